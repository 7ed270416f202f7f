use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::items::AbxItem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AbxMode {
    Within,
    Across,
}

impl fmt::Display for AbxMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AbxMode::Within => "within",
            AbxMode::Across => "across",
        })
    }
}

impl std::str::FromStr for AbxMode {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s {
            "within" => Ok(AbxMode::Within),
            "across" => Ok(AbxMode::Across),
            other => Err(crate::error::Error::config(
                "mode",
                format!("`{other}` is not one of within, across"),
            )),
        }
    }
}

/// Speakers a cell is averaged over: one speaker for within-speaker cells,
/// an ordered (A/B speaker, X speaker) pair for across-speaker cells.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeakerGroup {
    Within(String),
    Across { ab: String, x: String },
}

impl fmt::Display for SpeakerGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpeakerGroup::Within(s) => f.write_str(s),
            SpeakerGroup::Across { ab, x } => write!(f, "{ab}>{x}"),
        }
    }
}

/// Identity of a contrast cell: unordered phone pair (stored sorted),
/// shared context and speaker group.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub phones: (String, String),
    pub context: (String, String),
    pub speakers: SpeakerGroup,
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}-{} / {}_{} / {}",
            self.phones.0, self.phones.1, self.context.0, self.context.1, self.speakers
        )
    }
}

/// Item indices of one comparison; `x` shares its phone with `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triplet {
    pub a: usize,
    pub b: usize,
    pub x: usize,
    pub mode: AbxMode,
}

/// All (A, B, X) combinations for one orientation of a cell: A and X from
/// `a_tokens`/`x_tokens`, B from `b_tokens`. When `distinct_ax` is set, X is
/// drawn from `a_tokens` and must differ from A.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Orientation {
    pub a_tokens: Vec<usize>,
    pub b_tokens: Vec<usize>,
    pub x_tokens: Vec<usize>,
    pub distinct_ax: bool,
}

impl Orientation {
    pub fn len(&self) -> usize {
        let (na, nb, nx) = (self.a_tokens.len(), self.b_tokens.len(), self.x_tokens.len());
        if self.distinct_ax {
            na * na.saturating_sub(1) * nb
        } else {
            na * nb * nx
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, i: usize, mode: AbxMode) -> Triplet {
        let nb = self.b_tokens.len();
        let b = self.b_tokens[i % nb];
        let rest = i / nb;
        let (a, x) = if self.distinct_ax {
            let n_other = self.a_tokens.len() - 1;
            let a_idx = rest / n_other;
            let raw = rest % n_other;
            let x_idx = if raw >= a_idx { raw + 1 } else { raw };
            (self.a_tokens[a_idx], self.a_tokens[x_idx])
        } else {
            let nx = self.x_tokens.len();
            (self.a_tokens[rest / nx], self.x_tokens[rest % nx])
        };
        Triplet { a, b, x, mode }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellPlan {
    pub key: CellKey,
    pub mode: AbxMode,
    /// Both orientations: each phone of the pair serves as A.
    pub orientations: Vec<Orientation>,
}

impl CellPlan {
    pub fn n_triplets(&self) -> usize {
        self.orientations.iter().map(Orientation::len).sum()
    }

    pub fn triplet(&self, mut i: usize) -> Triplet {
        for o in &self.orientations {
            if i < o.len() {
                return o.get(i, self.mode);
            }
            i -= o.len();
        }
        panic!("triplet index out of range");
    }

    /// Every triplet, or a deterministic subset of `max` of them (kept in
    /// enumeration order) when the cell is larger than `max`.
    pub fn triplets(&self, limits: &TripletLimits) -> Vec<Triplet> {
        let n = self.n_triplets();
        match limits.max_triplets_per_cell {
            Some(max) if n > max => {
                let mut rng = ChaCha8Rng::seed_from_u64(limits.seed ^ fnv1a(&self.key.to_string()));
                let mut idx = rand::seq::index::sample(&mut rng, n, max).into_vec();
                idx.sort_unstable();
                idx.into_iter().map(|i| self.triplet(i)).collect()
            }
            _ => (0..n).map(|i| self.triplet(i)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TripletLimits {
    pub max_triplets_per_cell: Option<usize>,
    pub seed: u64,
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

type TokenIndex<'a> = BTreeMap<(&'a str, &'a str), BTreeMap<&'a str, BTreeMap<&'a str, Vec<usize>>>>;

/// Groups items into contrast cells satisfying the triplet constraints:
/// A and B differ in phone, X matches A, all three share the context;
/// within-speaker cells use one speaker (X ≠ A), across-speaker cells take
/// A and B from one speaker and X from another. Cells come out sorted by key.
pub fn plan_cells(items: &[AbxItem], mode: AbxMode) -> Vec<CellPlan> {
    // context -> phone -> speaker -> item indices
    let mut index: TokenIndex = BTreeMap::new();
    for (i, it) in items.iter().enumerate() {
        index
            .entry((it.prev.as_str(), it.next.as_str()))
            .or_default()
            .entry(it.phone.as_str())
            .or_default()
            .entry(it.speaker_id.as_str())
            .or_default()
            .push(i);
    }

    let mut cells: BTreeMap<CellKey, Vec<Orientation>> = BTreeMap::new();
    for (&(prev, next), phones) in &index {
        let phone_list: Vec<&str> = phones.keys().copied().collect();
        for (pi, &p) in phone_list.iter().enumerate() {
            for &q in &phone_list[pi + 1..] {
                for (a_phone, b_phone) in [(p, q), (q, p)] {
                    let a_by_spk = &phones[a_phone];
                    let b_by_spk = &phones[b_phone];
                    for (&s1, a_tokens) in a_by_spk {
                        let Some(b_tokens) = b_by_spk.get(s1) else {
                            continue;
                        };
                        let mut push = |speakers: SpeakerGroup, o: Orientation| {
                            if o.is_empty() {
                                return;
                            }
                            let key = CellKey {
                                phones: (p.to_string(), q.to_string()),
                                context: (prev.to_string(), next.to_string()),
                                speakers,
                            };
                            cells.entry(key).or_default().push(o);
                        };
                        match mode {
                            AbxMode::Within => push(
                                SpeakerGroup::Within(s1.to_string()),
                                Orientation {
                                    a_tokens: a_tokens.clone(),
                                    b_tokens: b_tokens.clone(),
                                    x_tokens: Vec::new(),
                                    distinct_ax: true,
                                },
                            ),
                            AbxMode::Across => {
                                for (&s2, x_tokens) in a_by_spk.iter().filter(|(s, _)| **s != s1) {
                                    push(
                                        SpeakerGroup::Across {
                                            ab: s1.to_string(),
                                            x: s2.to_string(),
                                        },
                                        Orientation {
                                            a_tokens: a_tokens.clone(),
                                            b_tokens: b_tokens.clone(),
                                            x_tokens: x_tokens.clone(),
                                            distinct_ax: false,
                                        },
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    cells
        .into_iter()
        .map(|(key, orientations)| CellPlan {
            key,
            mode,
            orientations,
        })
        .collect()
}

/// All triplets grouped by cell, subsampled per `limits`.
pub fn build_triplets(
    items: &[AbxItem],
    mode: AbxMode,
    limits: &TripletLimits,
) -> Vec<(CellKey, Vec<Triplet>)> {
    plan_cells(items, mode)
        .into_iter()
        .map(|c| {
            let t = c.triplets(limits);
            (c.key, t)
        })
        .collect()
}

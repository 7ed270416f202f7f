//! Seeded synthetic corpora for tests, demos and sanity checks.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::abx::{write_items, AbxItem};
use crate::afv::write_feature_file;
use crate::error::{Error, Result};
use crate::frames::{Articulator, FrameSequence, Interval};
use crate::manifest::{write_entries, ManifestEntry};

const POSITIONAL: [Articulator; 14] = [
    Articulator::TTx,
    Articulator::TTy,
    Articulator::TBx,
    Articulator::TBy,
    Articulator::TDx,
    Articulator::TDy,
    Articulator::ULx,
    Articulator::ULy,
    Articulator::LLx,
    Articulator::LLy,
    Articulator::LIx,
    Articulator::LIy,
    Articulator::Vx,
    Articulator::Vy,
];

/// Shape of the toy corpus written by [`write_toy_corpus`].
#[derive(Debug, Clone)]
pub struct ToyCorpus {
    pub speakers: usize,
    pub utterances_per_speaker: usize,
    pub syllables: usize,
    pub audio_rate_hz: u32,
    pub ema_rate_hz: f64,
    pub seed: u64,
}

impl Default for ToyCorpus {
    fn default() -> Self {
        ToyCorpus {
            speakers: 2,
            utterances_per_speaker: 6,
            syllables: 4,
            audio_rate_hz: 16_000,
            ema_rate_hz: 200.0,
            seed: 1,
        }
    }
}

const VOWELS: [&str; 3] = ["aa", "iy", "uw"];
const SIL: f64 = 0.2;
const CONS: f64 = 0.08;
const VOWEL: f64 = 0.14;

/// Articulator target of a phone, per positional channel.
fn target(phone: &str, ch: usize) -> f64 {
    let p = phone.bytes().fold(7u32, |h, b| h.wrapping_mul(31).wrapping_add(b as u32));
    let x = ((p as usize * 13 + ch * 7) % 23) as f64;
    x - 11.0
}

fn phone_freqs(phone: &str) -> (f64, f64) {
    match phone {
        "aa" => (700.0, 1200.0),
        "iy" => (300.0, 2300.0),
        "uw" => (320.0, 900.0),
        "b" => (200.0, 1000.0),
        "g" => (250.0, 1800.0),
        _ => (0.0, 0.0),
    }
}

/// Writes a small corpus with WAV audio, articulatory AFV1 files at
/// `ema_rate_hz`, transcriptions with leading and trailing silence, and an
/// item file over the vowels (context `b _ g`). Returns the manifest path;
/// the item file is `<dir>/items.item`.
pub fn write_toy_corpus(dir: &Path, spec: &ToyCorpus) -> Result<PathBuf> {
    let mut entries = Vec::new();
    let mut items = Vec::new();
    for s in 0..spec.speakers {
        let speaker = format!("spk{}", s + 1);
        let spk_offset: Vec<f64> = (0..POSITIONAL.len())
            .map(|c| ((s * 5 + c * 3) % 7) as f64 - 3.0)
            .collect();
        for u in 0..spec.utterances_per_speaker {
            let id = format!("{speaker}_u{:03}", u + 1);
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ fnv(&id));
            let mut intervals = vec![Interval::new(0.0, SIL, "sil")];
            let mut t = SIL;
            for _ in 0..spec.syllables {
                let v = VOWELS[rng.random_range(0..VOWELS.len())];
                for (label, len) in [("b", CONS), (v, VOWEL), ("g", CONS)] {
                    intervals.push(Interval::new(round_ms(t), round_ms(t + len), label));
                    t += len;
                }
                let vi = &intervals[intervals.len() - 2];
                items.push(AbxItem {
                    file_id: id.clone(),
                    onset_s: vi.onset,
                    offset_s: vi.offset,
                    phone: v.to_string(),
                    prev: "b".into(),
                    next: "g".into(),
                    speaker_id: speaker.clone(),
                });
            }
            intervals.push(Interval::new(round_ms(t), round_ms(t + SIL), "sil"));
            let duration = t + SIL;
            let label_at = |time: f64| -> &str {
                intervals
                    .iter()
                    .find(|iv| time >= iv.onset && time < iv.offset)
                    .map(|iv| iv.label.as_str())
                    .unwrap_or("sil")
            };

            // audio: two phone-dependent tones plus a little noise
            let n_audio = (duration * spec.audio_rate_hz as f64).round() as usize;
            let fs = spec.audio_rate_hz as f64;
            let pitch = 1.0 + 0.05 * s as f64;
            let wav_rel = format!("wav/{id}.wav");
            let wav_path = dir.join(&wav_rel);
            std::fs::create_dir_all(wav_path.parent().unwrap()).map_err(|e| Error::io(&wav_path, e))?;
            let wspec = hound::WavSpec {
                channels: 1,
                sample_rate: spec.audio_rate_hz,
                bits_per_sample: 16,
                sample_format: hound::SampleFormat::Int,
            };
            let mut w = hound::WavWriter::create(&wav_path, wspec).map_err(|e| Error::format(&wav_path, e.to_string()))?;
            for i in 0..n_audio {
                let tm = i as f64 / fs;
                let (f1, f2) = phone_freqs(label_at(tm));
                let noise: f64 = rng.sample::<f64, _>(StandardNormal) * 0.01;
                let x = 0.3 * (2.0 * PI * f1 * pitch * tm).sin() + 0.2 * (2.0 * PI * f2 * pitch * tm).sin() + noise;
                w.write_sample((x.clamp(-1.0, 1.0) * 32767.0) as i16)
                    .map_err(|e| Error::format(&wav_path, e.to_string()))?;
            }
            w.finalize().map_err(|e| Error::format(&wav_path, e.to_string()))?;

            // articulation: phone targets, a slow sinusoid, a per-speaker
            // offset, a slight drift across the session and sensor noise
            let n_ema = (duration * spec.ema_rate_hz).round() as usize;
            let drift = 0.05 * u as f64;
            let cols: Vec<Vec<f64>> = (0..POSITIONAL.len())
                .map(|c| {
                    (0..n_ema)
                        .map(|i| {
                            let tm = i as f64 / spec.ema_rate_hz;
                            let tgt = match label_at(tm) {
                                "sil" => 0.0,
                                p => target(p, c),
                            };
                            tgt + 2.0 * (2.0 * PI * 1.5 * tm + c as f64).sin()
                                + spk_offset[c]
                                + 20.0
                                + drift
                                + 0.05 * rng.sample::<f64, _>(StandardNormal)
                        })
                        .collect()
                })
                .collect();
            let ema = FrameSequence::from_columns(&cols, POSITIONAL.iter().map(|a| a.name()), spec.ema_rate_hz)?;
            let ema_rel = format!("ema/{id}.afv");
            write_feature_file(&ema, dir.join(&ema_rel))?;

            let mut e = ManifestEntry::new(&id, &speaker, "toy");
            e.audio = Some(wav_rel);
            e.articulatory = Some(ema_rel);
            e.intervals = Some(intervals);
            entries.push(e);
        }
    }
    let manifest = dir.join("manifest.jsonl");
    write_entries(&entries, &manifest)?;
    let items_path = dir.join("items.item");
    std::fs::write(&items_path, write_items(&items)).map_err(|e| Error::io(&items_path, e))?;
    Ok(manifest)
}

fn round_ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

fn fnv(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Shape of the ABX fixture built by [`abx_corpus`].
#[derive(Debug, Clone)]
pub struct AbxCorpus {
    pub phones: usize,
    pub speakers: usize,
    /// Tokens per phone and speaker, spread evenly over the contexts.
    pub tokens: usize,
    pub contexts: usize,
    pub dim: usize,
    /// Standard deviation of the per-frame noise added to the phone vector.
    pub noise: f64,
    /// Replace every frame with i.i.d. Gaussian noise.
    pub pure_noise: bool,
    pub seed: u64,
}

impl Default for AbxCorpus {
    fn default() -> Self {
        AbxCorpus {
            phones: 6,
            speakers: 4,
            tokens: 30,
            contexts: 3,
            dim: 8,
            noise: 0.05,
            pure_noise: false,
            seed: 0,
        }
    }
}

const CONTEXTS: [(&str, &str); 6] = [("b", "g"), ("d", "k"), ("p", "t"), ("m", "n"), ("s", "z"), ("f", "v")];

/// Features and items for the ABX sanity checks: each phone is a distinct
/// constant vector plus noise (or pure noise), one feature file per
/// speaker at 100 Hz, tokens 3 to 8 frames long separated by one frame.
pub fn abx_corpus(spec: &AbxCorpus) -> Result<(Vec<AbxItem>, BTreeMap<String, FrameSequence>)> {
    if spec.contexts == 0 || spec.contexts > CONTEXTS.len() {
        return Err(Error::InvalidParameter(format!(
            "contexts must be in 1..={}",
            CONTEXTS.len()
        )));
    }
    let rate = 100.0;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers: Vec<Vec<f64>> = (0..spec.phones)
        .map(|_| (0..spec.dim).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let names: Vec<String> = (0..spec.dim).map(|i| format!("f{i}")).collect();
    let mut items = Vec::new();
    let mut files = BTreeMap::new();
    for s in 0..spec.speakers {
        let speaker = format!("s{}", s + 1);
        let file_id = format!("{speaker}_all");
        let mut frames: Vec<Vec<f64>> = Vec::new();
        for k in 0..spec.tokens {
            for p in 0..spec.phones {
                let len = rng.random_range(3..=8usize);
                let onset = frames.len() + 1;
                frames.push(vec![0.0; spec.dim]);
                for _ in 0..len {
                    let f: Vec<f64> = (0..spec.dim)
                        .map(|d| {
                            let n: f64 = rng.sample(StandardNormal);
                            if spec.pure_noise {
                                n
                            } else {
                                centers[p][d] + spec.noise * n
                            }
                        })
                        .collect();
                    frames.push(f);
                }
                let (prev, next) = CONTEXTS[k % spec.contexts];
                items.push(AbxItem {
                    file_id: file_id.clone(),
                    onset_s: onset as f64 / rate,
                    offset_s: (onset + len) as f64 / rate,
                    phone: format!("p{p}"),
                    prev: prev.into(),
                    next: next.into(),
                    speaker_id: speaker.clone(),
                });
            }
        }
        frames.push(vec![0.0; spec.dim]);
        files.insert(file_id, FrameSequence::from_frames(&frames, names.clone(), rate)?);
    }
    Ok((items, files))
}

/// Writes [`abx_corpus`] output as `<dir>/features/<file>.afv` plus
/// `<dir>/items.item`.
pub fn write_abx_corpus(dir: &Path, spec: &AbxCorpus) -> Result<()> {
    let (items, files) = abx_corpus(spec)?;
    for (id, seq) in &files {
        write_feature_file(seq, dir.join("features").join(format!("{id}.afv")))?;
    }
    let path = dir.join("items.item");
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    std::fs::write(&path, write_items(&items)).map_err(|e| Error::io(&path, e))
}

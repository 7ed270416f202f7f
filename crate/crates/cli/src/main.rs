use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use artikit::abx::{self, AbxConfig, AbxMode, TripletLimits};
use artikit::afv::{read_feature_file, write_feature_file};
use artikit::csv_import::read_trajectory_csv;
use artikit::manifest::Manifest;
use artikit::metrics::Pooling;
use artikit::pipeline::{run_pipeline, score_predictions, PipelineConfig, ScoreConfig};
use artikit::preprocess::{preprocess_corpus, PreprocessConfig};
use artikit::report::{config_hash, write_report, Envelope};
use artikit::signal::{design_lowpass, frequency_response, FilterSpec};
use artikit::synthetic;
use artikit::tract::compute_tract_variables;
use artikit::{Error, Result, TrajectorySet};

/// Evaluation toolkit for acoustic-to-articulatory inversion.
///
/// Log verbosity is read from ARTIKIT_LOG (error, warn, info, debug, trace).
/// Exit status: 0 on success, 1 on bad input or configuration, 2 on an
/// internal error.
#[derive(Parser)]
#[command(name = "artikit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the low-pass kernel and its magnitude response as CSV.
    FilterDesign {
        #[arg(long, default_value_t = 50)]
        taps: usize,
        #[arg(long, default_value_t = 10.0)]
        cutoff: f64,
        #[arg(long, default_value_t = 100.0)]
        rate: f64,
        /// Number of response points between 0 Hz and Nyquist.
        #[arg(long, default_value_t = 51)]
        points: usize,
    },
    /// Preprocess a corpus into AFV1 features, speaker statistics and an
    /// updated manifest.
    Preprocess {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Append VLA, HPRO, TTC and TBC to an articulatory AFV1 file.
    Tract {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Channels of the input that must not be used.
        #[arg(long, value_delimiter = ',')]
        unavailable: Vec<String>,
    },
    /// Score predicted trajectories against a preprocessed corpus.
    ScoreRecon {
        /// Directory of `<id>.afv` predictions.
        #[arg(long)]
        pred: PathBuf,
        /// Preprocessed corpus directory (holding manifest.jsonl).
        #[arg(long = "ref")]
        reference: PathBuf,
        /// TOML file with `exclude_channels` and `pooling`.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, value_enum)]
        pooling: Option<PoolingArg>,
        /// Report path; `.json` and `.csv` are written. Prints JSON when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// ABX phone discrimination over a directory of AFV1 feature files.
    Abx {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        items: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Within)]
        mode: ModeArg,
        #[arg(long, default_value_t = 3)]
        min_contexts: usize,
        #[arg(long)]
        exclusions: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_triplets_per_cell: Option<usize>,
        /// Report path; `.json` and `.csv` are written. Prints JSON when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the pipeline described by a TOML configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Convert a trajectory CSV (one column per articulator) to AFV1.
    ImportCsv {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Write a synthetic corpus.
    Synth {
        #[arg(value_enum)]
        kind: SynthKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Within,
    Across,
}

#[derive(Clone, Copy, ValueEnum)]
enum PoolingArg {
    Frames,
    Utterances,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    /// WAV audio, 200 Hz articulatory data, transcriptions and an item file.
    Toy,
    /// Constant-vector phone features and an item file.
    Abx,
    /// The ABX layout filled with i.i.d. noise.
    AbxNoise,
}

fn print(text: &str) -> Result<()> {
    std::io::stdout()
        .write_all(text.as_bytes())
        .map_err(|e| Error::Io { path: PathBuf::from("<stdout>"), source: e })
}

fn emit<T: serde::Serialize>(out: Option<&Path>, kind: &str, hash: &str, report: &T, csv: &str) -> Result<()> {
    match out {
        Some(p) => write_report(p, kind, hash, report, csv),
        None => print(&Envelope::new(kind, hash, report).to_json()?),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::FilterDesign { taps, cutoff, rate, points } => {
            let w = design_lowpass(&FilterSpec::new(taps, cutoff, rate)?)?;
            let mut out = String::from("# weights\nn,weight\n");
            for (n, v) in w.iter().enumerate() {
                out.push_str(&format!("{n},{v}\n"));
            }
            out.push_str("# response\nfreq_hz,gain\n");
            let steps = points.max(2) - 1;
            for i in 0..=steps {
                let f = rate / 2.0 * i as f64 / steps as f64;
                out.push_str(&format!("{f},{}\n", frequency_response(&w, f, rate)));
            }
            print(&out)
        }
        Command::Preprocess { manifest, out, config } => {
            let text = std::fs::read_to_string(&config).map_err(|e| Error::Io { path: config.clone(), source: e })?;
            let cfg = PreprocessConfig::from_toml(&text)?;
            let m = Manifest::read(&manifest)?;
            let summary = preprocess_corpus(&m, &cfg, &out)?;
            log::info!("{} utterance(s) from {} speaker(s)", summary.utterances, summary.speakers);
            Ok(())
        }
        Command::Tract { input, output, unavailable } => {
            let seq = read_feature_file(&input)?;
            let traj = TrajectorySet::with_unavailable(seq, &unavailable)?;
            let (t, diag) = compute_tract_variables(&traj)?;
            if diag.zero_radius_frames > 0 {
                log::warn!("{} zero-radius frame(s); TTC/TBC set to 0 there", diag.zero_radius_frames);
            }
            for name in t.unavailable_names() {
                log::warn!("channel {name} unavailable");
            }
            write_feature_file(t.seq(), &output)
        }
        Command::ScoreRecon { pred, reference, mask, pooling, out } => {
            let mut cfg = match &mask {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
                    toml::from_str::<ScoreConfig>(&text)
                        .map_err(|e| Error::Config { field: "mask".into(), msg: e.to_string() })?
                }
                None => ScoreConfig::default(),
            };
            if let Some(p) = pooling {
                cfg.pooling = match p {
                    PoolingArg::Frames => Pooling::Frames,
                    PoolingArg::Utterances => Pooling::Utterances,
                };
            }
            let manifest = Manifest::read(reference.join("manifest.jsonl"))?;
            let report = score_predictions(&manifest, &pred, &cfg)?;
            emit(out.as_deref(), "score-recon", &config_hash(&cfg)?, &report, &report.to_csv())
        }
        Command::Abx {
            features,
            items,
            mode,
            min_contexts,
            exclusions,
            seed,
            max_triplets_per_cell,
            out,
        } => {
            let cfg = AbxConfig {
                mode: match mode {
                    ModeArg::Within => AbxMode::Within,
                    ModeArg::Across => AbxMode::Across,
                },
                min_contexts,
                limits: TripletLimits { max_triplets_per_cell, seed },
                exclusions: match &exclusions {
                    Some(p) => abx::read_exclusions(p)?,
                    None => BTreeSet::new(),
                },
            };
            let items = abx::parse_item_file(&items)?;
            let report = abx::run_abx(&features, &items, &cfg)?;
            eprintln!("{} ABX error: {:.4} ({} triplets)", cfg.mode, report.error, report.n_triplets);
            emit(out.as_deref(), "abx", &config_hash(&cfg)?, &report, &report.to_csv())
        }
        Command::Run { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let outcome = run_pipeline(&cfg)?;
            for r in outcome.reports {
                println!("{}", cfg.out_dir().join(r).display());
            }
            Ok(())
        }
        Command::ImportCsv { input, rate, output } => {
            let traj = read_trajectory_csv(&input, rate)?;
            let missing = traj.unavailable_names();
            if !missing.is_empty() {
                println!("unavailable: {}", missing.join(","));
            }
            write_feature_file(traj.seq(), &output)
        }
        Command::Synth { kind, out, seed } => match kind {
            SynthKind::Toy => {
                let spec = synthetic::ToyCorpus { seed, ..Default::default() };
                let m = synthetic::write_toy_corpus(&out, &spec)?;
                println!("{}", m.display());
                Ok(())
            }
            SynthKind::Abx | SynthKind::AbxNoise => {
                let spec = synthetic::AbxCorpus {
                    pure_noise: matches!(kind, SynthKind::AbxNoise),
                    seed,
                    ..Default::default()
                };
                synthetic::write_abx_corpus(&out, &spec)
            }
        },
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ARTIKIT_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

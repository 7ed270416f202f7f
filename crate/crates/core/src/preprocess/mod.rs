//! Corpus conditioning: silence trimming, per-speaker MFCC normalization,
//! trajectory pre-smoothing and rolling-window articulatory normalization.

mod corpus;
mod ops;

pub use corpus::{
    preprocess_corpus, stats_path, ChannelExclusion, CorpusConfig, PreprocessConfig,
    PreprocessSummary, SpeakerStats,
};
pub use ops::{
    align_streams, normalize_mfcc, presmooth, rolling_normalize, trim_silence, ChannelStats,
    NormalizeDiagnostics, RollingStats, TrimOutcome, DEFAULT_SILENCE_LABELS,
};

//! Signal processing: low-pass design and filtering, MFCC extraction, delta
//! features, context stacking and resampling.

mod filter;
mod frames_ops;
mod mfcc;

pub use filter::{
    apply_filter, apply_filter_to_channels, convolve_same, design_lowpass, frequency_response,
    FilterSpec, Padding,
};
pub use frames_ops::{add_deltas, resample, stack_context, unstack_context};
pub use mfcc::{coefficient_names, mfcc, MfccConfig};

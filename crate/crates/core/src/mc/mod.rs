//! Rare-event simulation of the path minimum.
//!
//! Paths live on a finite grid containing the essential set. The tail
//! probability is estimated by shifting the support values to mean `u·1`
//! (see [`tilted`]); the same draws give the conditional laws of the
//! overshoot, the argmin location and the fluctuation `X − uμ`, which are
//! compared against the residual reference law in [`qw`].

pub mod grid;
pub mod qw;
pub mod stats;
pub mod stream;
pub mod tilted;

pub use grid::{sample_paths, GridInfo, PathGrid};
pub use qw::{qw_reference_sample, QwEnsemble};
pub use tilted::{
    conditional_samples, is_estimate, ArgminStats, ConditionalEnsemble, ConditionalSample, MCReport, OvershootStats,
    TiltedSampler,
};

#[cfg(test)]
mod tests;

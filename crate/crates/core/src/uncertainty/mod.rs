//! Predictive uncertainty from repeated stochastic (MC dropout) or
//! independent (deep ensemble) generator forwards.
//!
//! Aggregation sorts the `M` values of every pixel before summing, so the
//! mean and standard deviation are bit-identical under any permutation of
//! the samples.

mod aggregate;
mod sample;

pub use aggregate::{aggregate_mean, aggregate_std, StdMode, UncertaintyMap};
pub use sample::{
    ensemble_sample, mc_dropout_sample, EnsembleSampler, IdentitySampler, McdSampler, SampleSource, SampleStack,
    Sampler, SingleSampler, DEFAULT_ENSEMBLE_SIZE, DEFAULT_MCD_SAMPLES,
};

#[cfg(test)]
mod tests;

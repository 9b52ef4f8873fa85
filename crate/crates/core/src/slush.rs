//! Slush: majority detection by repeated sampling.
//!
//! Each round draws `k` votes uniformly with replacement from the population
//! and adds them to a running pool. The current estimate is whichever value
//! the pooled sample favours relative to the threshold `phi`. Confidence that
//! the population sits on the same side of `phi` as the pooled proportion
//! `p̂` over `m` samples comes from Hoeffding's inequality:
//!
//! ```text
//! confidence = 1 - exp(-2 m (p̂ - phi)^2)
//! ```
//!
//! Sampling stops as soon as the confidence reaches the target, or after
//! `max_rounds` rounds.

use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::genmodel::Stream;

#[derive(Clone, Debug, PartialEq)]
pub struct SlushConfig {
    pub population: Vec<bool>,
    /// Votes sampled per round.
    pub k: usize,
    pub phi: f64,
    pub confidence_target: f64,
    pub max_rounds: u64,
    pub seed: u64,
}

impl SlushConfig {
    /// A config with `phi = 1/2`.
    pub fn new(
        population: Vec<bool>,
        k: usize,
        confidence_target: f64,
        max_rounds: u64,
        seed: u64,
    ) -> Self {
        SlushConfig {
            population,
            k,
            phi: 0.5,
            confidence_target,
            max_rounds,
            seed,
        }
    }

    /// Population of `size` votes whose first `ones` entries are `true`.
    pub fn population_with_ones(size: usize, ones: usize) -> Result<Vec<bool>> {
        if ones > size {
            return Err(invalid(format!(
                "{ones} true votes cannot fit in a population of {size}"
            )));
        }
        Ok((0..size).map(|i| i < ones).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.population.len();
        if self.k < 1 || self.k > n {
            return Err(invalid(format!(
                "sample size k must lie in 1..={n}, got {}",
                self.k
            )));
        }
        if !(self.phi > 0.0 && self.phi < 1.0) {
            return Err(invalid(format!("phi must lie in (0, 1), got {}", self.phi)));
        }
        if !(self.confidence_target > 0.0 && self.confidence_target < 1.0) {
            return Err(invalid(format!(
                "confidence target must lie in (0, 1), got {}",
                self.confidence_target
            )));
        }
        if self.max_rounds < 1 {
            return Err(invalid("max_rounds must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlushOutcome {
    /// Value believed to hold the majority.
    pub estimate: bool,
    pub rounds_used: u64,
    pub confident: bool,
    pub final_confidence: f64,
    /// Number of `true` votes across all pooled samples.
    pub pooled_true: u64,
    pub pooled_samples: u64,
}

impl SlushOutcome {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }
}

/// Samples `k` votes with replacement and counts the `true` ones.
pub fn slush_round<R: Rng + ?Sized>(population: &[bool], k: usize, rng: &mut R) -> Result<u64> {
    if population.is_empty() || k < 1 || k > population.len() {
        return Err(invalid(format!(
            "sample size k must lie in 1..={}, got {k}",
            population.len()
        )));
    }
    Ok((0..k)
        .filter(|_| population[rng.random_range(0..population.len())])
        .count() as u64)
}

/// One-sided Hoeffding confidence that the population proportion lies on
/// the same side of `phi` as `true_count / samples`.
pub fn hoeffding_confidence(true_count: u64, samples: u64, phi: f64) -> f64 {
    if samples == 0 {
        return 0.0;
    }
    let gap = true_count as f64 / samples as f64 - phi;
    -(-2.0 * samples as f64 * gap * gap).exp_m1()
}

pub fn run_slush(config: &SlushConfig) -> Result<SlushOutcome> {
    config.validate()?;
    let mut rng = Stream::seed_from_u64(config.seed);
    let mut pooled_true = 0u64;
    let mut pooled_samples = 0u64;
    let mut confidence = 0.0;
    let mut rounds = 0;
    while rounds < config.max_rounds {
        rounds += 1;
        pooled_true += slush_round(&config.population, config.k, &mut rng)?;
        pooled_samples += config.k as u64;
        confidence = hoeffding_confidence(pooled_true, pooled_samples, config.phi);
        if confidence >= config.confidence_target {
            break;
        }
    }
    let estimate = pooled_true as f64 > config.phi * pooled_samples as f64;
    Ok(SlushOutcome {
        estimate,
        rounds_used: rounds,
        confident: confidence >= config.confidence_target,
        final_confidence: confidence,
        pooled_true,
        pooled_samples,
    })
}

//! Random systems from the Avalanche sampling model.
//!
//! Node `v` draws `Y_v ~ Poisson(λ)` slices. Each slice is `v` together with
//! an independent, uniformly chosen `(k-1)`-subset of the other nodes.
//!
//! # Randomness
//!
//! All sampling uses `xoshiro256++` (from `rand_xoshiro`). Node `v` of a
//! sample with seed `s` gets its own generator, seeded through
//! `Xoshiro256PlusPlus::seed_from_u64(derive_seed(&[s, v]))`, so every node's
//! draws are independent of how many nodes exist or the order they are
//! processed in. [`derive_seed`] is a chained SplitMix64 finalizer and is part
//! of the on-disk reproducibility contract: changing it changes every sweep.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::fbas::Fbas;
use crate::nodeset::{NodeSet, MAX_NODES};

/// The generator behind every random stream.
pub type Stream = Xoshiro256PlusPlus;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit hash of a sequence of words.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(parts.len() as u64), |h, &p| {
        splitmix64(h.rotate_left(23) ^ p)
    })
}

/// Random stream for node `v` of the sample seeded with `seed`.
pub fn node_stream(seed: u64, v: usize) -> Stream {
    Stream::seed_from_u64(derive_seed(&[seed, v as u64]))
}

/// Parameters of the generative model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerativeParams {
    pub n: usize,
    /// Slice size, owner included.
    pub k: usize,
    /// Expected number of slices per node.
    pub lambda: f64,
    pub seed: u64,
}

impl GenerativeParams {
    pub fn new(n: usize, k: usize, lambda: f64, seed: u64) -> Result<Self> {
        let p = GenerativeParams { n, k, lambda, seed };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid(format!("n must be at least 2, got {}", self.n)));
        }
        if self.n > MAX_NODES {
            return Err(Error::UniverseTooLarge {
                n: self.n,
                max: MAX_NODES,
            });
        }
        if self.k < 2 || self.k > self.n {
            return Err(invalid(format!(
                "k must lie in 2..={}, got {}",
                self.n, self.k
            )));
        }
        check_lambda(self.lambda)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(invalid(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }
    Ok(())
}

/// Largest mean handled by sequential-search inversion.
const INVERSION_MAX_LAMBDA: f64 = 10.0;

/// Draws an exact Poisson(`lambda`) variate.
///
/// Means up to 10 use inversion by sequential search. Larger means use
/// Hörmann's transformed rejection with squeeze (PTRS), which is exact and
/// needs about 1.1 uniform pairs per draw.
pub fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    check_lambda(lambda)?;
    if lambda == 0.0 {
        return Ok(0);
    }
    Ok(if lambda <= INVERSION_MAX_LAMBDA {
        poisson_inversion(lambda, rng)
    } else {
        poisson_ptrs(lambda, rng)
    })
}

fn poisson_inversion<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    let u: f64 = rng.random();
    let mut x = 0u64;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    while u > cdf {
        x += 1;
        p *= lambda / x as f64;
        if p == 0.0 {
            // cdf has converged short of u by rounding alone
            break;
        }
        cdf += p;
    }
    x
}

fn poisson_ptrs<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    let slam = lambda.sqrt();
    let loglam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -lambda + k * loglam - ln_gamma(k + 1.0);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// Uniform `size`-subset of `0..n` that never contains `exclude`.
///
/// Partial Fisher–Yates over the `n - 1` eligible nodes.
pub fn sample_subset<R: Rng + ?Sized>(
    n: usize,
    size: usize,
    exclude: usize,
    rng: &mut R,
) -> Result<NodeSet> {
    if n > MAX_NODES {
        return Err(Error::UniverseTooLarge { n, max: MAX_NODES });
    }
    if exclude >= n {
        return Err(invalid(format!(
            "excluded node {exclude} is outside 0..{n}"
        )));
    }
    if size > n - 1 {
        return Err(invalid(format!("cannot choose {size} of {} nodes", n - 1)));
    }
    let mut pool = [0u8; MAX_NODES];
    let mut len = 0;
    for i in (0..n).filter(|&i| i != exclude) {
        pool[len] = i as u8;
        len += 1;
    }
    let mut bits = 0u64;
    for i in 0..size {
        let j = rng.random_range(i..len);
        pool.swap(i, j);
        bits |= 1u64 << pool[i];
    }
    Ok(NodeSet::from_bits_unchecked(n, bits))
}

/// Raw slices of a single node, before canonicalization.
pub fn sample_node_slices(params: &GenerativeParams, v: usize) -> Result<Vec<NodeSet>> {
    params.validate()?;
    let mut rng = node_stream(params.seed, v);
    let count = sample_poisson(params.lambda, &mut rng)?;
    let owner = NodeSet::from_indices(params.n, [v])?;
    (0..count)
        .map(|_| Ok(sample_subset(params.n, params.k - 1, v, &mut rng)?.union(&owner)))
        .collect()
}

/// Raw slices of every node, before canonicalization.
pub fn sample_raw_slices(params: &GenerativeParams) -> Result<Vec<Vec<NodeSet>>> {
    params.validate()?;
    (0..params.n)
        .map(|v| sample_node_slices(params, v))
        .collect()
}

/// Draws a canonical system from the model.
pub fn sample_fbas(params: &GenerativeParams) -> Result<Fbas> {
    Ok(sample_with_metadata(params)?.fbas)
}

/// A sampled system together with what canonicalization forgets.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledFbas {
    pub fbas: Fbas,
    pub metadata: SampleMetadata,
}

/// Sidecar written next to a sampled FBAS document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMetadata {
    pub params: GenerativeParams,
    /// Number of slices each node drew, duplicates included.
    pub raw_slice_counts: Vec<u64>,
}

impl SampleMetadata {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }
}

pub fn sample_with_metadata(params: &GenerativeParams) -> Result<SampledFbas> {
    let raw = sample_raw_slices(params)?;
    let raw_slice_counts = raw.iter().map(|l| l.len() as u64).collect();
    let fbas = Fbas::from_node_sets(params.n, raw)?;
    Ok(SampledFbas {
        fbas,
        metadata: SampleMetadata {
            params: *params,
            raw_slice_counts,
        },
    })
}

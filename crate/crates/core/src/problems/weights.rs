//! Weight distributions of the sampled (numeric) problem versions.

use rand::distr::Open01;
use rand::Rng;

use super::ProblemVersion;
use crate::error::{Error, Result};

/// Upper end (exclusive) of the uniform draw feeding the Pareto weights.
pub const PARETO_U_SUP: f64 = 0.75;
/// Tail exponent of the capped Pareto weights.
pub const PARETO_EXPONENT: i32 = 10;

/// `(1 - u)^-10`, the capped Pareto weight for a uniform draw `u in [0, 0.75)`.
#[inline]
pub fn pareto_weight(u: f64) -> f64 {
    let t = 1.0 - u;
    let t2 = t * t;
    let t4 = t2 * t2;
    let t8 = t4 * t4;
    1.0 / (t8 * t2)
}

/// Largest exponent `k` such that `2^k` is an admissible PowersOfTwo weight.
///
/// Equal to `31 - floor(log2 n)`, which keeps `n * 2^k <= 2^32`.
pub fn powers_of_two_max_exponent(n: usize) -> u32 {
    assert!(n >= 1);
    31 - n.ilog2()
}

/// Draws `n` i.i.d. weights for a numeric problem version.
pub fn sample_weights<R: Rng + ?Sized>(
    version: ProblemVersion,
    rng: &mut R,
    n: usize,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::contract("dimension must be at least 1"));
    }
    let mut w = vec![0.0; n];
    fill_weights(version, rng, &mut w)?;
    Ok(w)
}

pub(crate) fn fill_weights<R: Rng + ?Sized>(
    version: ProblemVersion,
    rng: &mut R,
    out: &mut [f64],
) -> Result<()> {
    match version {
        ProblemVersion::Rank => {
            return Err(Error::contract(
                "the rank version samples a permutation, not weights",
            ))
        }
        ProblemVersion::Uniform => {
            for w in out.iter_mut() {
                *w = rng.sample(Open01);
            }
        }
        ProblemVersion::PowersOfTwo => {
            let max_exp = powers_of_two_max_exponent(out.len());
            for w in out.iter_mut() {
                let k = rng.random_range(1..=max_exp);
                *w = (1u64 << k) as f64;
            }
        }
        ProblemVersion::Pareto => {
            for w in out.iter_mut() {
                let u = rng.random_range(0.0..PARETO_U_SUP);
                *w = pareto_weight(u);
            }
        }
    }
    Ok(())
}

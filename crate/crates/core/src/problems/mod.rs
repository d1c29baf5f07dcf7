//! The Dynamic BinVal problem family.
//!
//! Every environment is a linear function with strictly positive weights, so
//! all environments share the same optimum: the string whose transformed
//! image is all ones. Four versions differ in how an environment is drawn:
//!
//! * `Rank` draws a permutation `pi` and orders strings exactly as the sum
//!   `sum_j 2^pi(j) * y_j` would, without ever forming the number.
//! * `Uniform`, `PowersOfTwo` and `Pareto` draw i.i.d. weights and return a
//!   numeric fitness.

mod transform;
mod weights;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitstring::{set_bits, BitString};
use crate::error::{check_len, Error, Result};
use crate::seed::{derive_seed, mix64, SeedSpec, StreamTag};

pub use transform::{InstanceTransform, SCALE_RANGE, TRANSLATE_RANGE};
use transform::FoldedTransform;
pub use weights::{
    pareto_weight, powers_of_two_max_exponent, sample_weights, PARETO_EXPONENT, PARETO_U_SUP,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemVersion {
    Rank,
    Uniform,
    PowersOfTwo,
    Pareto,
}

impl ProblemVersion {
    pub const ALL: [ProblemVersion; 4] = [
        ProblemVersion::Rank,
        ProblemVersion::Uniform,
        ProblemVersion::PowersOfTwo,
        ProblemVersion::Pareto,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemVersion::Rank => "rank",
            ProblemVersion::Uniform => "uniform",
            ProblemVersion::PowersOfTwo => "powersoftwo",
            ProblemVersion::Pareto => "pareto",
        }
    }

    /// Stable numeric id, used as the function id in IOH exports.
    pub fn function_id(self) -> u32 {
        match self {
            ProblemVersion::Rank => 1,
            ProblemVersion::Uniform => 2,
            ProblemVersion::PowersOfTwo => 3,
            ProblemVersion::Pareto => 4,
        }
    }

    pub fn is_rank(self) -> bool {
        self == ProblemVersion::Rank
    }
}

impl fmt::Display for ProblemVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemVersion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "rank" | "ranking" => Ok(ProblemVersion::Rank),
            "uniform" => Ok(ProblemVersion::Uniform),
            "powersoftwo" | "power2" | "pow2" => Ok(ProblemVersion::PowersOfTwo),
            "pareto" => Ok(ProblemVersion::Pareto),
            _ => Err(Error::config(
                "version",
                format!("unknown problem version {s:?} (rank, uniform, powersoftwo, pareto)"),
            )),
        }
    }
}

/// The weight state of one environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvState {
    /// `priorities[j] = pi(j) - 1`: base position `j` carries weight
    /// `2^priorities[j]`. Always a permutation of `0..n`.
    Permutation(Vec<u32>),
    /// Strictly positive weight of every base position.
    Weights(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub state: EnvState,
    /// Number of `step()` calls since the problem was created.
    pub generation: u64,
}

impl Environment {
    pub fn permutation(&self) -> Option<&[u32]> {
        match &self.state {
            EnvState::Permutation(p) => Some(p),
            EnvState::Weights(_) => None,
        }
    }

    pub fn weights(&self) -> Option<&[f64]> {
        match &self.state {
            EnvState::Weights(w) => Some(w),
            EnvState::Permutation(_) => None,
        }
    }

    fn validate(&self, version: ProblemVersion, n: usize) -> Result<()> {
        match (&self.state, version.is_rank()) {
            (EnvState::Permutation(p), true) => {
                check_len(n, p.len())?;
                let mut seen = vec![false; n];
                for &v in p {
                    if v as usize >= n || std::mem::replace(&mut seen[v as usize], true) {
                        return Err(Error::contract("environment permutation is not a bijection"));
                    }
                }
                Ok(())
            }
            (EnvState::Weights(w), false) => {
                check_len(n, w.len())?;
                if w.iter().all(|&x| x > 0.0 && x.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::contract("environment weights must be positive and finite"))
                }
            }
            _ => Err(Error::contract(format!(
                "environment kind does not match the {version} version"
            ))),
        }
    }
}

/// `sum_i 2^priorities[i] * x_i` as an exact integer.
///
/// Test oracle for the rank version; only defined for `n <= 62`.
pub fn binval_exact(x: &BitString, priorities: &[u32]) -> Result<u64> {
    check_len(x.len(), priorities.len())?;
    if x.len() > 62 {
        return Err(Error::contract(format!(
            "exact BinVal needs n <= 62, got {}",
            x.len()
        )));
    }
    Ok(x.iter()
        .zip(priorities)
        .filter(|(b, _)| *b)
        .map(|(_, &p)| 1u64 << p)
        .sum())
}

/// An individual handed to [`DynBinValProblem::rank`], with the environment
/// generation in which it was last ranked (if any).
#[derive(Clone, Copy, Debug)]
pub struct Candidate<'a> {
    pub genome: &'a BitString,
    pub ranked_in: Option<u64>,
}

impl<'a> Candidate<'a> {
    pub fn fresh(genome: &'a BitString) -> Self {
        Candidate {
            genome,
            ranked_in: None,
        }
    }
}

/// Result of ranking a population, best first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ranking {
    /// Input indices, best first; ties keep input order.
    pub order: Vec<usize>,
    /// Tie-group of every input index; 0 is the best group.
    pub level: Vec<usize>,
    /// Whether ranking this input consumed an evaluation.
    pub charged: Vec<bool>,
}

impl Ranking {
    pub fn has_ties(&self) -> bool {
        self.order
            .windows(2)
            .any(|w| self.level[w[0]] == self.level[w[1]])
    }
}

/// Everything needed to reconstruct a problem instance, for run metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemDescriptor {
    pub version: ProblemVersion,
    pub n: usize,
    pub instance_id: u32,
    pub environment_seed: u64,
    pub transform: InstanceTransform,
}

/// A dynamic BinVal instance driven by an optimizer.
///
/// Not safe for concurrent use; distinct instances are independent.
#[derive(Clone, Debug)]
pub struct DynBinValProblem {
    n: usize,
    version: ProblemVersion,
    transform: InstanceTransform,
    folded: FoldedTransform,
    optimum: BitString,
    env: Environment,
    eval_count: u64,
    env_seed: u64,
    env_rng: ChaCha8Rng,
}

fn transform_key(version: ProblemVersion, n: usize, instance_id: u32) -> u64 {
    mix64(u64::from(instance_id) ^ mix64(n as u64 ^ mix64(u64::from(version.function_id()))))
}

impl DynBinValProblem {
    /// Builds instance `instance_id` of `version` in dimension `n`.
    ///
    /// The transform depends only on `(version, n, instance_id,
    /// seed.master_seed)`, so every run of an instance sees the same
    /// disguise. The environment stream is seeded from `seed` itself.
    pub fn new(version: ProblemVersion, n: usize, instance_id: u32, seed: SeedSpec) -> Result<Self> {
        if n == 0 {
            return Err(Error::contract("dimension must be at least 1"));
        }
        let transform = match instance_id {
            0 => return Err(Error::contract("instance ids start at 1")),
            1 => InstanceTransform::identity(n),
            id => {
                let spec = SeedSpec::new(
                    seed.master_seed,
                    transform_key(version, n, id),
                    StreamTag::Transformation,
                );
                InstanceTransform::sample(&mut spec.rng(), n, id)?
            }
        };
        let env_seed = derive_seed(&seed.with_stream(StreamTag::Environment));
        Self::with_transform(version, transform, env_seed)
    }

    pub fn with_transform(
        version: ProblemVersion,
        transform: InstanceTransform,
        env_seed: u64,
    ) -> Result<Self> {
        transform.validate()?;
        let n = transform.len();
        if n == 0 {
            return Err(Error::contract("dimension must be at least 1"));
        }
        let folded = transform.folded();
        let optimum = folded.mask.complement();
        let mut env_rng = ChaCha8Rng::seed_from_u64(env_seed);
        let state = if version.is_rank() {
            let mut p: Vec<u32> = (0..n as u32).collect();
            p.shuffle(&mut env_rng);
            EnvState::Permutation(p)
        } else {
            EnvState::Weights(sample_weights(version, &mut env_rng, n)?)
        };
        Ok(DynBinValProblem {
            n,
            version,
            transform,
            folded,
            optimum,
            env: Environment {
                state,
                generation: 0,
            },
            eval_count: 0,
            env_seed,
            env_rng,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn version(&self) -> ProblemVersion {
        self.version
    }

    pub fn transform(&self) -> &InstanceTransform {
        &self.transform
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn eval_count(&self) -> u64 {
        self.eval_count
    }

    /// Replaces the current environment, keeping its generation index.
    pub fn set_environment(&mut self, state: EnvState) -> Result<()> {
        let env = Environment {
            state,
            generation: self.env.generation,
        };
        env.validate(self.version, self.n)?;
        self.env = env;
        Ok(())
    }

    pub fn descriptor(&self) -> ProblemDescriptor {
        ProblemDescriptor {
            version: self.version,
            n: self.n,
            instance_id: self.transform.instance_id,
            environment_seed: self.env_seed,
            transform: self.transform.clone(),
        }
    }

    /// Draws a fresh environment. Costs no evaluations.
    pub fn step(&mut self) {
        match &mut self.env.state {
            EnvState::Permutation(p) => p.shuffle(&mut self.env_rng),
            EnvState::Weights(w) => weights::fill_weights(self.version, &mut self.env_rng, w)
                .expect("weight versions always sample"),
        }
        self.env.generation += 1;
    }

    /// Numeric fitness `scale * sum_j w_j y_j + translate`. Costs one evaluation.
    pub fn evaluate(&mut self, x: &BitString) -> Result<f64> {
        let value = self.peek_fitness(x)?;
        self.eval_count += 1;
        Ok(value)
    }

    /// Fitness under the current environment without charging an evaluation.
    pub fn peek_fitness(&self, x: &BitString) -> Result<f64> {
        let EnvState::Weights(w) = &self.env.state else {
            return Err(Error::contract(
                "the rank version has no numeric fitness; use rank()",
            ));
        };
        check_len(self.n, x.len())?;
        let target = &self.folded.target_index;
        let mut sum = 0.0;
        for (wi, (&xw, &mw)) in x.words().iter().zip(self.folded.mask.words()).enumerate() {
            let y = xw ^ mw;
            for i in set_bits(std::slice::from_ref(&y)) {
                sum += w[target[wi * 64 + i] as usize];
            }
        }
        Ok(self.transform.scale * sum + self.transform.translate)
    }

    /// Compares two strings under the current rank environment without
    /// charging evaluations. `Greater` means `a` is better.
    pub fn compare(&self, a: &BitString, b: &BitString) -> Result<Ordering> {
        let EnvState::Permutation(prio) = &self.env.state else {
            return Err(Error::contract("compare() is only defined for the rank version"));
        };
        check_len(self.n, a.len())?;
        check_len(self.n, b.len())?;
        Ok(self.compare_unchecked(prio, a, b))
    }

    /// The differing position carrying the largest weight decides.
    fn compare_unchecked(&self, prio: &[u32], a: &BitString, b: &BitString) -> Ordering {
        let target = &self.folded.target_index;
        let mut best: Option<(u32, usize)> = None;
        for (wi, (&aw, &bw)) in a.words().iter().zip(b.words()).enumerate() {
            let d = aw ^ bw;
            for i in set_bits(std::slice::from_ref(&d)) {
                let pos = wi * 64 + i;
                let p = prio[target[pos] as usize];
                if best.is_none_or(|(bp, _)| p > bp) {
                    best = Some((p, pos));
                }
            }
        }
        match best {
            None => Ordering::Equal,
            Some((_, pos)) => {
                if a.get(pos) ^ self.folded.mask.get(pos) {
                    Ordering::Greater
                } else {
                    Ordering::Less
                }
            }
        }
    }

    /// Sorts a population best first under the current rank environment.
    ///
    /// Each candidate not already ranked in the current environment costs
    /// one evaluation. Translation and scaling play no role here.
    pub fn rank(&mut self, pop: &[Candidate<'_>]) -> Result<Ranking> {
        let EnvState::Permutation(prio) = &self.env.state else {
            return Err(Error::contract("rank() is only defined for the rank version"));
        };
        for c in pop {
            check_len(self.n, c.genome.len())?;
        }
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&i, &j| self.compare_unchecked(prio, pop[j].genome, pop[i].genome));
        let mut level = vec![0; pop.len()];
        for k in 1..order.len() {
            let (prev, cur) = (order[k - 1], order[k]);
            level[cur] = if pop[prev].genome == pop[cur].genome {
                level[prev]
            } else {
                level[prev] + 1
            };
        }
        let current = self.env.generation;
        let charged: Vec<bool> = pop.iter().map(|c| c.ranked_in != Some(current)).collect();
        self.eval_count += charged.iter().filter(|&&c| c).count() as u64;
        Ok(Ranking {
            order,
            level,
            charged,
        })
    }

    /// Ranks a population where every member is charged.
    pub fn rank_fresh(&mut self, pop: &[BitString]) -> Result<Ranking> {
        let cands: Vec<Candidate<'_>> = pop.iter().map(Candidate::fresh).collect();
        self.rank(&cands)
    }

    /// The common optimum of all environments.
    pub fn optimum(&self) -> &BitString {
        &self.optimum
    }

    /// Termination check; consumes no evaluations.
    pub fn is_optimum(&self, x: &BitString) -> Result<bool> {
        check_len(self.n, x.len())?;
        Ok(*x == self.optimum)
    }
}

/// Convenience constructor mirroring [`DynBinValProblem::new`].
pub fn make_problem(
    version: ProblemVersion,
    n: usize,
    instance_id: u32,
    seed: SeedSpec,
) -> Result<DynBinValProblem> {
    DynBinValProblem::new(version, n, instance_id, seed)
}

#[cfg(test)]
mod tests;

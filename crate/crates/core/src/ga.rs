//! A parameterized (mu +/, lambda) genetic algorithm for dynamic problems.
//!
//! One generation:
//!
//! 1. If the environment clock fires, `step()` the problem and (unless stale
//!    fitness is kept) re-evaluate the parents.
//! 2. Create lambda offspring. Each one is, with probability `p_c`, a uniform
//!    crossover of two distinct parents; otherwise a copy of a random parent.
//!    Mutation is applied to copies always, and to crossover results only if
//!    `mutate_after_crossover` is set.
//! 3. Evaluate (or rank) the offspring and select mu survivors.
//!
//! The initial population counts as generation 1 of the environment clock,
//! so with update frequency `d > 0` the environment is resampled before loop
//! generation `k` whenever `k % d == 0`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::bitstring::{hamming, BitString};
use crate::error::{check_len, Error, Result};
use crate::problems::{Candidate, DynBinValProblem};
use crate::seed::{SeedSpec, StreamTag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    Plus,
    Comma,
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selection::Plus => "plus",
            Selection::Comma => "comma",
        })
    }
}

impl FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plus" | "+" => Ok(Selection::Plus),
            "comma" | "," => Ok(Selection::Comma),
            _ => Err(Error::config(
                "selection",
                format!("unknown selection {s:?} (plus, comma)"),
            )),
        }
    }
}

/// Every tunable of the GA. `Default` gives the standard configuration:
/// a (1+1) GA with mutation factor 1, no crossover, and an environment
/// change every generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaParams {
    /// Expected number of flipped bits; the per-bit rate is `chi / n`.
    pub chi: f64,
    pub lambda: usize,
    pub mu: usize,
    pub selection: Selection,
    pub p_c: f64,
    /// Generations between environment changes; 0 means never.
    pub update_freq: u64,
    /// Lower bound on the number of bits flipped by one mutation.
    pub n_min: usize,
    pub mutate_after_crossover: bool,
    /// Keep parent fitness across environment changes instead of
    /// re-evaluating. Ranking always uses the current environment, so for
    /// the rank version this only waives the re-evaluation charge.
    pub keep_stale_fitness: bool,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            chi: 1.0,
            lambda: 1,
            mu: 1,
            selection: Selection::Plus,
            p_c: 0.0,
            update_freq: 1,
            n_min: 0,
            mutate_after_crossover: true,
            keep_stale_fitness: false,
        }
    }
}

impl GaParams {
    /// Checks the parameter ranges for dimension `n`. Errors name the field.
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.chi >= 0.0 && self.chi <= n as f64) {
            return Err(Error::config(
                "chi",
                format!("mutation factor must lie in [0, {n}], got {}", self.chi),
            ));
        }
        if self.lambda == 0 {
            return Err(Error::config("lambda", "number of offspring must be at least 1"));
        }
        if self.mu == 0 {
            return Err(Error::config("mu", "number of parents must be at least 1"));
        }
        if self.selection == Selection::Comma && self.lambda < self.mu {
            return Err(Error::config(
                "lambda",
                format!(
                    "comma selection requires lambda >= mu, got lambda = {} < mu = {}",
                    self.lambda, self.mu
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.p_c) {
            return Err(Error::config(
                "p_c",
                format!("crossover rate must lie in [0, 1], got {}", self.p_c),
            ));
        }
        if self.n_min >= n {
            return Err(Error::config(
                "n_min",
                format!("minimum flips must lie in [0, {n}), got {}", self.n_min),
            ));
        }
        Ok(())
    }

    /// Whether loop generation `k` (1-based) starts with an environment change.
    pub fn updates_before(&self, k: u64) -> bool {
        self.update_freq > 0 && k.is_multiple_of(self.update_freq)
    }
}

/// Standard bit mutation with a floor on the number of flips.
#[derive(Clone, Debug)]
pub struct Mutator {
    n: usize,
    n_min: usize,
    flips: Binomial,
}

impl Mutator {
    pub fn new(n: usize, chi: f64, n_min: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::contract("dimension must be at least 1"));
        }
        if !(chi >= 0.0 && chi <= n as f64) {
            return Err(Error::contract(format!(
                "mutation factor must lie in [0, {n}], got {chi}"
            )));
        }
        if n_min >= n {
            return Err(Error::contract(format!(
                "minimum flips must lie in [0, {n}), got {n_min}"
            )));
        }
        let p = (chi / n as f64).min(1.0);
        let flips = Binomial::new(n as u64, p).map_err(|e| Error::contract(e.to_string()))?;
        Ok(Mutator { n, n_min, flips })
    }

    /// Number of bits the next mutation flips.
    pub fn draw_flips<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        (self.flips.sample(rng) as usize).max(self.n_min)
    }

    pub fn mutate_in_place<R: Rng + ?Sized>(&self, x: &mut BitString, rng: &mut R) {
        debug_assert_eq!(x.len(), self.n);
        let k = self.draw_flips(rng);
        x.flip_random(rng, k);
    }

    pub fn mutate<R: Rng + ?Sized>(&self, x: &BitString, rng: &mut R) -> Result<BitString> {
        check_len(self.n, x.len())?;
        let mut out = x.clone();
        self.mutate_in_place(&mut out, rng);
        Ok(out)
    }
}

/// Flips `max(n_min, Binomial(n, chi / n))` distinct uniformly chosen bits.
pub fn mutate<R: Rng + ?Sized>(
    x: &BitString,
    chi: f64,
    n_min: usize,
    rng: &mut R,
) -> Result<BitString> {
    Mutator::new(x.len(), chi, n_min)?.mutate(x, rng)
}

/// Takes every bit from `p1` or `p2` with probability 1/2 each.
pub fn uniform_crossover<R: Rng + ?Sized>(
    p1: &BitString,
    p2: &BitString,
    rng: &mut R,
) -> Result<BitString> {
    check_len(p1.len(), p2.len())?;
    let mut child = p1.clone();
    for (c, &b) in child.words_mut().iter_mut().zip(p2.words()) {
        let take_first: u64 = rng.next_u64();
        *c = (*c & take_first) | (b & !take_first);
    }
    Ok(child)
}

/// Creates `params.lambda` offspring from `parents`.
///
/// The crossover coin, parent choice and crossover masks come from
/// `crossover_rng`; flip counts and positions from `mutation_rng`. With a
/// single parent a crossover degenerates to copying it.
pub fn produce_offspring<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    parents: &[BitString],
    params: &GaParams,
    mutator: &Mutator,
    crossover_rng: &mut R1,
    mutation_rng: &mut R2,
) -> Result<Vec<BitString>> {
    if parents.is_empty() {
        return Err(Error::contract("cannot produce offspring without parents"));
    }
    let mu = parents.len();
    let mut out = Vec::with_capacity(params.lambda);
    for _ in 0..params.lambda {
        let crossed = params.p_c > 0.0 && crossover_rng.random_bool(params.p_c);
        let mut child = if crossed && mu >= 2 {
            let pair = index::sample(crossover_rng, mu, 2);
            uniform_crossover(&parents[pair.index(0)], &parents[pair.index(1)], crossover_rng)?
        } else if mu == 1 {
            parents[0].clone()
        } else {
            parents[crossover_rng.random_range(0..mu)].clone()
        };
        if !crossed || params.mutate_after_crossover {
            mutator.mutate_in_place(&mut child, mutation_rng);
        }
        out.push(child);
    }
    Ok(out)
}

/// Picks `mu` survivors from a pool laid out as parents `0..n_parents`
/// followed by offspring.
///
/// `quality(i, j)` returns `Greater` when pool member `i` is better than
/// `j`. Ties prefer offspring over parents, then break uniformly at random.
/// Returns pool indices, best first.
pub fn select_survivors<R: Rng + ?Sized>(
    n_parents: usize,
    n_offspring: usize,
    mu: usize,
    selection: Selection,
    mut quality: impl FnMut(usize, usize) -> Ordering,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let first = match selection {
        Selection::Plus => 0,
        Selection::Comma => n_parents,
    };
    let total = n_parents + n_offspring;
    if total - first < mu {
        return Err(Error::config(
            "lambda",
            format!("cannot select {mu} survivors from {} candidates", total - first),
        ));
    }
    let mut keyed: Vec<(usize, u64)> = (first..total).map(|i| (i, rng.next_u64())).collect();
    keyed.sort_by(|&(a, ka), &(b, kb)| {
        quality(b, a)
            .then_with(|| (a >= n_parents).cmp(&(b >= n_parents)).reverse())
            .then(ka.cmp(&kb))
    });
    Ok(keyed.into_iter().take(mu).map(|(i, _)| i).collect())
}

/// A population member with its cached evaluation state.
#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub genome: BitString,
    /// Numeric fitness (weight versions only).
    pub fitness: Option<f64>,
    /// Environment generation of the last evaluation or ranking.
    pub evaluated_in: Option<u64>,
}

impl Individual {
    fn new(genome: BitString) -> Self {
        Individual {
            genome,
            fitness: None,
            evaluated_in: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    Random,
    /// Every initial parent at this Hamming distance from the optimum.
    AtDistance(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub budget: u64,
    pub init: Init,
    /// Fraction of correct bits at which a run counts as successful.
    pub target_fraction: f64,
}

impl RunOptions {
    pub fn new(budget: u64) -> Self {
        RunOptions {
            budget,
            init: Init::Random,
            target_fraction: 1.0,
        }
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_target(mut self, fraction: f64) -> Self {
        self.target_fraction = fraction;
        self
    }
}

/// The independent random streams of one run.
#[derive(Clone, Debug)]
pub struct RunStreams {
    pub init: ChaCha8Rng,
    pub mutation: ChaCha8Rng,
    pub crossover: ChaCha8Rng,
}

impl RunStreams {
    pub fn derive(master_seed: u64, run_index: u64) -> Self {
        let spec = SeedSpec::new(master_seed, run_index, StreamTag::ProblemInit);
        RunStreams {
            init: spec.rng(),
            mutation: spec.with_stream(StreamTag::Mutation).rng(),
            crossover: spec.with_stream(StreamTag::Crossover).rng(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    /// Evaluations spent when the improving individual was evaluated.
    pub evaluations: u64,
    pub best_fraction_correct: f64,
    /// Loop generation of that evaluation; 0 is the initial population.
    pub generation: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub success: bool,
    /// Evaluations until the target fraction was first evaluated.
    pub evals_to_optimum: Option<u64>,
    pub evals_used: u64,
    pub generations: u64,
    /// Best-so-far fraction of correct bits, logged on improvement only.
    pub trajectory: Vec<TrajectoryPoint>,
    pub final_population_best_fraction: f64,
}

impl RunResult {
    /// Best-so-far fraction after at most `evals` evaluations (0 if none).
    pub fn fraction_at(&self, evals: u64) -> f64 {
        self.trajectory
            .iter()
            .take_while(|p| p.evaluations <= evals)
            .last()
            .map_or(0.0, |p| p.best_fraction_correct)
    }

    pub fn final_best_so_far(&self) -> f64 {
        self.trajectory.last().map_or(0.0, |p| p.best_fraction_correct)
    }
}

/// Observer-side bookkeeping; the selection never sees any of this.
#[derive(Debug)]
struct Tracker {
    optimum: BitString,
    n: usize,
    target_correct: usize,
    best_correct: Option<usize>,
    trajectory: Vec<TrajectoryPoint>,
    hit_at: Option<u64>,
}

impl Tracker {
    fn observe(&mut self, genome: &BitString, evaluations: u64, generation: u64) {
        let correct = self.n - hamming(genome, &self.optimum).expect("lengths checked");
        if self.best_correct.is_none_or(|b| correct > b) {
            self.best_correct = Some(correct);
            self.trajectory.push(TrajectoryPoint {
                evaluations,
                best_fraction_correct: correct as f64 / self.n as f64,
                generation,
            });
        }
        if self.hit_at.is_none() && correct >= self.target_correct {
            self.hit_at = Some(evaluations);
        }
    }

    fn fraction(&self, genome: &BitString) -> f64 {
        let correct = self.n - hamming(genome, &self.optimum).expect("lengths checked");
        correct as f64 / self.n as f64
    }
}

/// Number of correct bits needed to reach `fraction` in dimension `n`.
pub fn target_correct_bits(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// A GA run in progress, advanced one generation at a time.
pub struct GaRun<'p> {
    problem: &'p mut DynBinValProblem,
    params: GaParams,
    budget: u64,
    streams: RunStreams,
    mutator: Mutator,
    parents: Vec<Individual>,
    generation: u64,
    start_evals: u64,
    tracker: Tracker,
}

impl<'p> GaRun<'p> {
    /// Validates the configuration, creates and evaluates the initial parents.
    pub fn new(
        problem: &'p mut DynBinValProblem,
        params: &GaParams,
        options: &RunOptions,
        mut streams: RunStreams,
    ) -> Result<Self> {
        let n = problem.n();
        params.validate(n)?;
        if options.budget < params.mu as u64 {
            return Err(Error::contract(format!(
                "budget {} is smaller than mu = {}",
                options.budget, params.mu
            )));
        }
        if !(0.0..=1.0).contains(&options.target_fraction) {
            return Err(Error::contract("target fraction must lie in [0, 1]"));
        }
        let optimum = problem.optimum().clone();
        let mut parents = Vec::with_capacity(params.mu);
        for _ in 0..params.mu {
            let genome = match options.init {
                Init::Random => BitString::random(&mut streams.init, n)?,
                Init::AtDistance(d) => BitString::at_distance(&mut streams.init, &optimum, d)?,
            };
            parents.push(Individual::new(genome));
        }
        let mutator = Mutator::new(n, params.chi, params.n_min)?;
        let mut run = GaRun {
            start_evals: problem.eval_count(),
            problem,
            params: params.clone(),
            budget: options.budget,
            streams,
            mutator,
            parents: Vec::new(),
            generation: 0,
            tracker: Tracker {
                optimum,
                n,
                target_correct: target_correct_bits(options.target_fraction, n),
                best_correct: None,
                trajectory: Vec::new(),
                hit_at: None,
            },
        };
        if run.problem.version().is_rank() {
            run.rank_initial(&mut parents)?;
        } else {
            run.evaluate_all(&mut parents)?;
        }
        run.parents = parents;
        Ok(run)
    }

    pub fn evals_used(&self) -> u64 {
        self.problem.eval_count() - self.start_evals
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn parents(&self) -> &[Individual] {
        &self.parents
    }

    pub fn problem(&self) -> &DynBinValProblem {
        self.problem
    }

    pub fn target_reached(&self) -> bool {
        self.tracker.hit_at.is_some()
    }

    pub fn is_done(&self) -> bool {
        self.target_reached() || self.evals_used() >= self.budget
    }

    fn evaluate_all(&mut self, pop: &mut [Individual]) -> Result<()> {
        for ind in pop.iter_mut() {
            ind.fitness = Some(self.problem.evaluate(&ind.genome)?);
            ind.evaluated_in = Some(self.problem.environment().generation);
            let e = self.evals_used();
            self.tracker.observe(&ind.genome, e, self.generation);
        }
        Ok(())
    }

    fn rank_initial(&mut self, pop: &mut [Individual]) -> Result<()> {
        let genomes: Vec<BitString> = pop.iter().map(|i| i.genome.clone()).collect();
        self.problem.rank_fresh(&genomes)?;
        let g = self.problem.environment().generation;
        for (k, ind) in pop.iter_mut().enumerate() {
            ind.evaluated_in = Some(g);
            self.tracker.observe(&ind.genome, k as u64 + 1, 0);
        }
        Ok(())
    }

    /// Runs one generation. Does nothing once the run is done.
    pub fn step_generation(&mut self) -> Result<()> {
        if self.is_done() {
            return Ok(());
        }
        self.generation += 1;
        let changed = self.params.updates_before(self.generation);
        if changed {
            self.problem.step();
        }
        let is_rank = self.problem.version().is_rank();
        if changed && !is_rank && !self.params.keep_stale_fitness {
            let mut parents = std::mem::take(&mut self.parents);
            self.evaluate_all(&mut parents)?;
            self.parents = parents;
        }

        let parent_genomes: Vec<BitString> = self.parents.iter().map(|p| p.genome.clone()).collect();
        let offspring = produce_offspring(
            &parent_genomes,
            &self.params,
            &self.mutator,
            &mut self.streams.crossover,
            &mut self.streams.mutation,
        )?;
        let mut pool = std::mem::take(&mut self.parents);
        let n_parents = pool.len();
        pool.extend(offspring.into_iter().map(Individual::new));

        let survivors = if is_rank {
            let levels = self.rank_pool(&mut pool, n_parents)?;
            select_survivors(
                n_parents,
                pool.len() - n_parents,
                self.params.mu,
                self.params.selection,
                |i, j| levels[j].cmp(&levels[i]),
                &mut self.streams.mutation,
            )?
        } else {
            self.evaluate_all(&mut pool[n_parents..])?;
            select_survivors(
                n_parents,
                pool.len() - n_parents,
                self.params.mu,
                self.params.selection,
                |i, j| {
                    let (a, b) = (pool[i].fitness, pool[j].fitness);
                    a.expect("evaluated").total_cmp(&b.expect("evaluated"))
                },
                &mut self.streams.mutation,
            )?
        };

        let mut slots: Vec<Option<Individual>> = pool.into_iter().map(Some).collect();
        self.parents = survivors
            .into_iter()
            .map(|i| slots[i].take().expect("survivor indices are distinct"))
            .collect();
        Ok(())
    }

    /// Ranks parents and offspring together; returns the tie level of each.
    fn rank_pool(&mut self, pool: &mut [Individual], n_parents: usize) -> Result<Vec<usize>> {
        let current = self.problem.environment().generation;
        let waive = self.params.keep_stale_fitness;
        let ranking = {
            let cands: Vec<Candidate<'_>> = pool
                .iter()
                .enumerate()
                .map(|(i, ind)| Candidate {
                    genome: &ind.genome,
                    ranked_in: if i < n_parents && waive {
                        Some(current)
                    } else {
                        ind.evaluated_in
                    },
                })
                .collect();
            let before = self.evals_used();
            let ranking = self.problem.rank(&cands)?;
            let mut e = before;
            for (i, &charged) in ranking.charged.iter().enumerate() {
                if charged {
                    e += 1;
                    self.tracker.observe(&pool[i].genome, e, self.generation);
                }
            }
            ranking
        };
        for ind in pool.iter_mut() {
            ind.evaluated_in = Some(current);
        }
        Ok(ranking.level)
    }

    /// Runs generations until the target is reached or the budget is spent.
    pub fn run_to_end(&mut self) -> Result<()> {
        while !self.is_done() {
            self.step_generation()?;
        }
        Ok(())
    }

    pub fn finish(self) -> RunResult {
        let final_best = self
            .parents
            .iter()
            .map(|p| self.tracker.fraction(&p.genome))
            .fold(0.0, f64::max);
        RunResult {
            success: self.tracker.hit_at.is_some(),
            evals_to_optimum: self.tracker.hit_at,
            evals_used: self.problem.eval_count() - self.start_evals,
            generations: self.generation,
            trajectory: self.tracker.trajectory,
            final_population_best_fraction: final_best,
        }
    }
}

/// Runs the GA on `problem` until the target fraction (the optimum by
/// default) is evaluated or at least `options.budget` evaluations are spent.
///
/// The budget is checked between generations, so a run may overshoot it by
/// less than `lambda + mu` evaluations.
pub fn run_ga(
    problem: &mut DynBinValProblem,
    params: &GaParams,
    options: &RunOptions,
    streams: RunStreams,
) -> Result<RunResult> {
    let mut run = GaRun::new(problem, params, options, streams)?;
    run.run_to_end()?;
    Ok(run.finish())
}

#[cfg(test)]
#[path = "ga_tests.rs"]
mod tests;

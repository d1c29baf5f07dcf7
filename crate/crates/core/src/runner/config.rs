//! Experiment configuration documents and grid expansion.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ga::{GaParams, Selection};
use crate::problems::ProblemVersion;

/// Update frequencies swept by `freq_sweep` when the grid names none.
pub const DEFAULT_FREQ_SWEEP: [u64; 10] = [1, 2, 5, 10, 20, 50, 100, 200, 500, 0];

pub const DEFAULT_MASTER_SEED: u64 = 20_240_901;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Standard,
    Stages,
    FreqSweep,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Standard => "standard",
            Mode::Stages => "stages",
            Mode::FreqSweep => "freq_sweep",
        })
    }
}

/// A list of reals, written either as an array or as an inclusive range
/// `{"start": 0, "stop": 6, "step": 0.1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RealList {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl RealList {
    pub fn values(&self, path: &str) -> Result<Vec<f64>> {
        match *self {
            RealList::List(ref v) => Ok(v.clone()),
            RealList::Range { start, stop, step } => {
                if step.is_nan() || step <= 0.0 || stop < start {
                    return Err(Error::config(
                        path,
                        "a range needs step > 0 and stop >= start",
                    ));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                // Snap to 9 decimals so 0.1 steps print as 0.3, not 0.30000000000000004.
                Ok((0..count)
                    .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
                    .collect())
            }
        }
    }
}

impl From<Vec<f64>> for RealList {
    fn from(v: Vec<f64>) -> Self {
        RealList::List(v)
    }
}

/// Values for every GA parameter. Missing fields use the default value only.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub chi: Option<RealList>,
    pub lambda: Option<Vec<usize>>,
    pub mu: Option<Vec<usize>>,
    pub selection: Option<Vec<Selection>>,
    pub p_c: Option<RealList>,
    pub update_freq: Option<Vec<u64>>,
    pub n_min: Option<Vec<usize>>,
    pub mutate_after_crossover: Option<Vec<bool>>,
    pub keep_stale_fitness: Option<Vec<bool>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageOptions {
    pub start_fractions: RealList,
    /// Improvement in fraction of correct bits that ends a stage run.
    pub delta: f64,
}

impl Default for StageOptions {
    fn default() -> Self {
        StageOptions {
            start_fractions: RealList::Range {
                start: 0.5,
                stop: 0.95,
                step: 0.05,
            },
            delta: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_versions")]
    pub versions: Vec<ProblemVersion>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_instances")]
    pub instances: Vec<u32>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Evaluation budget per run; 1000 * n when absent.
    #[serde(default)]
    pub budget: Option<u64>,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub stages: StageOptions,
    pub output_dir: PathBuf,
    /// Worker threads; 0 picks the number of cores. Never affects results.
    #[serde(default)]
    pub jobs: usize,
}

fn default_versions() -> Vec<ProblemVersion> {
    vec![ProblemVersion::Rank]
}
fn default_n() -> usize {
    1000
}
fn default_instances() -> Vec<u32> {
    vec![1]
}
fn default_repetitions() -> usize {
    1
}
fn default_seed() -> u64 {
    DEFAULT_MASTER_SEED
}

impl ExperimentConfig {
    /// A standard-mode config with every list at its default.
    pub fn new(output_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            versions: default_versions(),
            n: default_n(),
            instances: default_instances(),
            repetitions: default_repetitions(),
            budget: None,
            master_seed: default_seed(),
            grid: GridSpec::default(),
            mode: Mode::Standard,
            stages: StageOptions::default(),
            output_dir: output_dir.into(),
            jobs: 0,
        }
    }

    /// Parses a JSON config. Errors carry the path of the offending key.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn budget(&self) -> u64 {
        self.budget.unwrap_or(1000 * self.n as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n", "dimension must be at least 1"));
        }
        if self.versions.is_empty() {
            return Err(Error::config("versions", "at least one version is required"));
        }
        if self.instances.is_empty() {
            return Err(Error::config("instances", "at least one instance is required"));
        }
        if let Some(i) = self.instances.iter().position(|&id| id == 0) {
            return Err(Error::config(format!("instances[{i}]"), "instance ids start at 1"));
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetitions", "must be at least 1"));
        }
        if self.budget == Some(0) {
            return Err(Error::config("budget", "must be at least 1"));
        }
        if self.mode == Mode::Stages {
            self.stage_starts()?;
        }
        let cells = expand_grid(self)?;
        let budget = self.budget();
        if let Some(c) = cells.iter().find(|c| (c.params.mu as u64) > budget) {
            return Err(Error::config(
                "budget",
                format!("budget {budget} is smaller than mu = {}", c.params.mu),
            ));
        }
        Ok(())
    }

    /// Start fractions of a stage experiment, validated.
    pub fn stage_starts(&self) -> Result<Vec<f64>> {
        let starts = self.stages.start_fractions.values("stages.start_fractions")?;
        if starts.is_empty() {
            return Err(Error::config("stages.start_fractions", "must not be empty"));
        }
        let delta = self.stages.delta;
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::config("stages.delta", "must lie in (0, 1]"));
        }
        for (i, &s) in starts.iter().enumerate() {
            if !(0.0..1.0).contains(&s) {
                return Err(Error::config(
                    format!("stages.start_fractions[{i}]"),
                    format!("start fraction {s} must lie in [0, 1)"),
                ));
            }
            if s + delta > 1.0 + 1e-9 {
                return Err(Error::config(
                    format!("stages.start_fractions[{i}]"),
                    format!("start fraction {s} plus delta {delta} exceeds 1"),
                ));
            }
        }
        Ok(starts)
    }
}

/// One concrete configuration: GA parameters and a problem version.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: usize,
    pub version: ProblemVersion,
    pub params: GaParams,
}

fn dim<T: Clone>(list: &Option<Vec<T>>, default: T, path: &str) -> Result<Vec<T>> {
    match list {
        None => Ok(vec![default]),
        Some(v) if v.is_empty() => Err(Error::config(path, "grid dimension must not be empty")),
        Some(v) => Ok(v.clone()),
    }
}

fn real_dim(list: &Option<RealList>, default: f64, path: &str) -> Result<Vec<f64>> {
    match list {
        None => Ok(vec![default]),
        Some(l) => {
            let v = l.values(path)?;
            if v.is_empty() {
                Err(Error::config(path, "grid dimension must not be empty"))
            } else {
                Ok(v)
            }
        }
    }
}

/// Cartesian product of the grid and the version list.
///
/// Ordering is lexicographic with `chi` varying slowest, then `lambda`,
/// `mu`, `selection`, `p_c`, `update_freq`, `n_min`,
/// `mutate_after_crossover`, `keep_stale_fitness`, and finally the version.
/// Instances are not part of a cell. In `freq_sweep` mode an absent
/// `update_freq` list means [`DEFAULT_FREQ_SWEEP`].
pub fn expand_grid(config: &ExperimentConfig) -> Result<Vec<Cell>> {
    let d = GaParams::default();
    let g = &config.grid;
    let chi = real_dim(&g.chi, d.chi, "grid.chi")?;
    let lambda = dim(&g.lambda, d.lambda, "grid.lambda")?;
    let mu = dim(&g.mu, d.mu, "grid.mu")?;
    let selection = dim(&g.selection, d.selection, "grid.selection")?;
    let p_c = real_dim(&g.p_c, d.p_c, "grid.p_c")?;
    let update_freq = match (&g.update_freq, config.mode) {
        (None, Mode::FreqSweep) => DEFAULT_FREQ_SWEEP.to_vec(),
        (l, _) => dim(l, d.update_freq, "grid.update_freq")?,
    };
    let n_min = dim(&g.n_min, d.n_min, "grid.n_min")?;
    let mac = dim(&g.mutate_after_crossover, d.mutate_after_crossover, "grid.mutate_after_crossover")?;
    let stale = dim(&g.keep_stale_fitness, d.keep_stale_fitness, "grid.keep_stale_fitness")?;
    if config.versions.is_empty() {
        return Err(Error::config("versions", "grid dimension must not be empty"));
    }

    let lens = [
        chi.len(),
        lambda.len(),
        mu.len(),
        selection.len(),
        p_c.len(),
        update_freq.len(),
        n_min.len(),
        mac.len(),
        stale.len(),
        config.versions.len(),
    ];
    let total: usize = lens.iter().product();
    let mut cells = Vec::with_capacity(total);
    let mut idx = [0usize; 10];
    for id in 0..total {
        let params = GaParams {
            chi: chi[idx[0]],
            lambda: lambda[idx[1]],
            mu: mu[idx[2]],
            selection: selection[idx[3]],
            p_c: p_c[idx[4]],
            update_freq: update_freq[idx[5]],
            n_min: n_min[idx[6]],
            mutate_after_crossover: mac[idx[7]],
            keep_stale_fitness: stale[idx[8]],
        };
        params.validate(config.n).map_err(|e| match e {
            Error::Config { path, message } => Error::config(
                format!("grid.{path}"),
                format!("cell {id} ({}): {message}", describe(&params)),
            ),
            other => other,
        })?;
        cells.push(Cell {
            id,
            version: config.versions[idx[9]],
            params,
        });
        // odometer, last dimension fastest
        for k in (0..lens.len()).rev() {
            idx[k] += 1;
            if idx[k] < lens[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(cells)
}

/// Compact `key=value` rendering of a parameter vector.
pub fn describe(p: &GaParams) -> String {
    format!(
        "chi={} lambda={} mu={} selection={} p_c={} update_freq={} n_min={} mutate_after_crossover={} keep_stale_fitness={}",
        p.chi,
        p.lambda,
        p.mu,
        p.selection,
        p.p_c,
        p.update_freq,
        p.n_min,
        p.mutate_after_crossover,
        p.keep_stale_fitness
    )
}

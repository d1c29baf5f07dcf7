//! Experiment protocols: grid sweeps, stage runs and update-frequency sweeps.
//!
//! Every run gets an ordinal from its position in the enumeration
//! cell x instance x (start fraction) x repetition, and all of its seeds are
//! derived from `(master_seed, ordinal)`. Runs execute on a worker pool but
//! are written in ordinal order, so the number of workers never shows up in
//! the output.

mod config;
mod ioh;
mod output;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{
    describe, expand_grid, Cell, ExperimentConfig, GridSpec, Mode, RealList, StageOptions,
    DEFAULT_FREQ_SWEEP, DEFAULT_MASTER_SEED,
};
pub use ioh::{export_ioh, IohExport};
pub use output::{
    export_sweep_table, load_records, parse_sweep_table, parse_trajectory, trajectory_csv,
    RunMetadata, RunSeeds, SummaryRow, SUMMARY_HEADER, TRAJECTORY_HEADER,
};

use crate::error::{Error, Result};
use crate::ga::{run_ga, GaParams, Init, RunOptions, RunResult, RunStreams};
use crate::metrics::{ert, format_ert, success_rate, RunSet};
use crate::problems::{DynBinValProblem, ProblemDescriptor, ProblemVersion};
use crate::seed::{derive_seed, SeedSpec, StreamTag};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const STAGES_FILE: &str = "stages.csv";
pub const FREQ_FILE: &str = "freq.csv";
pub const CONFIG_FILE: &str = "config.json";

/// Everything known about one finished run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub cell: usize,
    /// Repetition index within (cell, instance, start fraction).
    pub run: usize,
    /// Global position of the run in the experiment; keys all seeds.
    pub ordinal: u64,
    pub version: ProblemVersion,
    pub n: usize,
    pub instance: u32,
    pub budget: u64,
    pub params: GaParams,
    pub init: Init,
    pub target_fraction: f64,
    pub seeds: RunSeeds,
    pub problem: ProblemDescriptor,
    pub result: RunResult,
    /// Best-so-far fraction after 100 * n evaluations.
    pub fraction_at_100n: f64,
    /// Best-so-far fraction after `budget` evaluations.
    pub fraction_at_budget: f64,
}

/// A run waiting to be executed.
#[derive(Clone, Debug)]
struct Task {
    cell: usize,
    run: usize,
    ordinal: u64,
    version: ProblemVersion,
    instance: u32,
    params: GaParams,
    init: Init,
    target_fraction: f64,
}

fn execute(task: &Task, n: usize, budget: u64, master_seed: u64) -> Result<RunRecord> {
    let spec = SeedSpec::new(master_seed, task.ordinal, StreamTag::Environment);
    let mut problem = DynBinValProblem::new(task.version, n, task.instance, spec)?;
    let options = RunOptions::new(budget)
        .with_init(task.init)
        .with_target(task.target_fraction);
    let streams = RunStreams::derive(master_seed, task.ordinal);
    let result = run_ga(&mut problem, &task.params, &options, streams)?;
    let seed_of = |tag| derive_seed(&spec.with_stream(tag));
    Ok(RunRecord {
        cell: task.cell,
        run: task.run,
        ordinal: task.ordinal,
        version: task.version,
        n,
        instance: task.instance,
        budget,
        params: task.params.clone(),
        init: task.init,
        target_fraction: task.target_fraction,
        seeds: RunSeeds {
            master_seed,
            run_ordinal: task.ordinal,
            environment: seed_of(StreamTag::Environment),
            init: seed_of(StreamTag::ProblemInit),
            mutation: seed_of(StreamTag::Mutation),
            crossover: seed_of(StreamTag::Crossover),
        },
        problem: problem.descriptor(),
        fraction_at_100n: result.fraction_at(100 * n as u64),
        fraction_at_budget: result.fraction_at(budget),
        result,
    })
}

/// Creates `root/runs`, removes run files of earlier experiments and
/// checks that the directory accepts writes.
fn prepare_output(root: &Path) -> Result<()> {
    let runs = output::runs_dir(root);
    fs::create_dir_all(&runs).map_err(|e| Error::io(&runs, e))?;
    for entry in fs::read_dir(&runs).map_err(|e| Error::io(&runs, e))? {
        let path = entry.map_err(|e| Error::io(&runs, e))?.path();
        let stale = path
            .file_name()
            .and_then(|f| f.to_str())
            .is_some_and(|f| f.starts_with("run_"));
        if stale {
            fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
        }
    }
    let probe = runs.join(".write_probe");
    fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

/// Runs `tasks` on a pool of `jobs` workers (0 = all cores), writing each
/// finished run before the next chunk starts.
fn execute_all(config: &ExperimentConfig, tasks: &[Task]) -> Result<Vec<RunRecord>> {
    let root = &config.output_dir;
    prepare_output(root)?;
    let mut cfg = config.clone();
    cfg.jobs = 0;
    output::write_atomic(&root.join(CONFIG_FILE), cfg.to_json().as_bytes())?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::contract(format!("cannot start worker pool: {e}")))?;
    let chunk = 4 * pool.current_num_threads().max(1);
    let (n, budget, seed) = (config.n, config.budget(), config.master_seed);
    let mut records = Vec::with_capacity(tasks.len());
    for batch in tasks.chunks(chunk) {
        let done: Vec<Result<RunRecord>> =
            pool.install(|| batch.par_iter().map(|t| execute(t, n, budget, seed)).collect());
        for r in done {
            let r = r?;
            output::write_run(root, &r)?;
            records.push(r);
        }
    }
    Ok(records)
}

/// Writes the summary table and checks it against a re-render from disk.
fn write_summary(root: &Path, records: &[RunRecord]) -> Result<String> {
    let table = export_sweep_table(records)?;
    let path = root.join(SUMMARY_FILE);
    output::write_atomic(&path, table.as_bytes())?;
    let reloaded = export_sweep_table(&load_records(root)?)?;
    if reloaded != table {
        return Err(Error::data(
            path,
            "summary recomputed from run files differs from the in-memory summary",
        ));
    }
    Ok(table)
}

fn standard_tasks(config: &ExperimentConfig, cells: &[Cell]) -> Vec<Task> {
    let mut tasks = Vec::new();
    for cell in cells {
        for &instance in &config.instances {
            for run in 0..config.repetitions {
                tasks.push(Task {
                    cell: cell.id,
                    run,
                    ordinal: tasks.len() as u64,
                    version: cell.version,
                    instance,
                    params: cell.params.clone(),
                    init: Init::Random,
                    target_fraction: 1.0,
                });
            }
        }
    }
    tasks
}

/// Outcome of an experiment: the cells and every run, in ordinal order.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub cells: Vec<Cell>,
    pub records: Vec<RunRecord>,
    pub output_dir: PathBuf,
}

impl Experiment {
    pub fn cell_records(&self, cell: usize) -> impl Iterator<Item = &RunRecord> {
        self.records.iter().filter(move |r| r.cell == cell)
    }
}

/// Runs every cell x instance x repetition with random initialization.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Experiment> {
    config.validate()?;
    let cells = expand_grid(config)?;
    let tasks = standard_tasks(config, &cells);
    let records = execute_all(config, &tasks)?;
    write_summary(&config.output_dir, &records)?;
    Ok(Experiment {
        cells,
        records,
        output_dir: config.output_dir.clone(),
    })
}

/// One row of the stage table.
#[derive(Clone, Debug, PartialEq)]
pub struct StageRow {
    pub cell: usize,
    pub version: ProblemVersion,
    pub instance: u32,
    pub run: usize,
    pub start_fraction: f64,
    pub target_fraction: f64,
    pub start_distance: usize,
    /// Evaluations until the target was reached, or all evaluations used.
    pub evals: u64,
    pub success: bool,
}

pub const STAGES_HEADER: &str =
    "cell,version,instance,run,start_fraction,target_fraction,start_distance,evals,success";

/// Hamming distance to the optimum of a string with `fraction` correct bits.
pub fn start_distance(fraction: f64, n: usize) -> usize {
    ((1.0 - fraction) * n as f64).round() as usize
}

pub fn stages_csv(rows: &[StageRow]) -> String {
    let mut s = String::from(STAGES_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.cell,
            r.version,
            r.instance,
            r.run,
            r.start_fraction,
            r.target_fraction,
            r.start_distance,
            r.evals,
            r.success
        ));
    }
    s
}

/// Seeds every parent at distance round((1 - s) * n) from the optimum and
/// measures the time to gain `delta` in fraction of correct bits, for every
/// configured start fraction `s`.
pub fn run_stage_experiment(config: &ExperimentConfig) -> Result<(Experiment, Vec<StageRow>)> {
    config.validate()?;
    let starts = config.stage_starts()?;
    let delta = config.stages.delta;
    let cells = expand_grid(config)?;
    let mut tasks = Vec::new();
    let mut meta = Vec::new();
    for cell in &cells {
        for &instance in &config.instances {
            for &s in &starts {
                // Snap so that 0.95 + 0.05 is exactly 1.
                let target = ((s + delta) * 1e9).round() / 1e9;
                let d = start_distance(s, config.n);
                for run in 0..config.repetitions {
                    meta.push((s, d));
                    tasks.push(Task {
                        cell: cell.id,
                        run,
                        ordinal: tasks.len() as u64,
                        version: cell.version,
                        instance,
                        params: cell.params.clone(),
                        init: Init::AtDistance(d),
                        target_fraction: target.min(1.0),
                    });
                }
            }
        }
    }
    let records = execute_all(config, &tasks)?;
    write_summary(&config.output_dir, &records)?;
    let rows: Vec<StageRow> = records
        .iter()
        .zip(&meta)
        .map(|(r, &(s, d))| StageRow {
            cell: r.cell,
            version: r.version,
            instance: r.instance,
            run: r.run,
            start_fraction: s,
            target_fraction: r.target_fraction,
            start_distance: d,
            evals: r.result.evals_to_optimum.unwrap_or(r.result.evals_used),
            success: r.result.success,
        })
        .collect();
    output::write_atomic(
        &config.output_dir.join(STAGES_FILE),
        stages_csv(&rows).as_bytes(),
    )?;
    Ok((
        Experiment {
            cells,
            records,
            output_dir: config.output_dir.clone(),
        },
        rows,
    ))
}

/// Aggregate over the runs of one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub cell: usize,
    pub version: ProblemVersion,
    pub params: GaParams,
    pub runs: usize,
    pub success_rate: f64,
    /// Mean evaluations to the optimum over successful runs.
    pub mean_evals_success: Option<f64>,
    pub ert: f64,
    pub mean_final_fraction: f64,
}

impl CellSummary {
    /// `update_freq` as printed in tables; 0 means a static environment.
    pub fn freq_label(&self) -> String {
        freq_label(self.params.update_freq)
    }
}

pub fn freq_label(d: u64) -> String {
    if d == 0 {
        "static".to_string()
    } else {
        d.to_string()
    }
}

/// Per-cell success rate, ERT and mean final fraction at target `phi`.
/// Cells without runs are skipped.
pub fn summarize_cells(records: &[RunRecord], phi: f64) -> Result<Vec<CellSummary>> {
    let mut cells: Vec<usize> = records.iter().map(|r| r.cell).collect();
    cells.sort_unstable();
    cells.dedup();
    cells
        .into_iter()
        .map(|cell| {
            let rs: Vec<&RunRecord> = records.iter().filter(|r| r.cell == cell).collect();
            let first = rs[0];
            let set = RunSet::new(
                format!("cell {cell}"),
                first.budget,
                rs.iter().map(|r| r.result.clone()).collect(),
            );
            let runs = rs.len();
            Ok(CellSummary {
                cell,
                version: first.version,
                params: first.params.clone(),
                runs,
                success_rate: success_rate(&set, phi)?,
                mean_evals_success: set.mean_hitting_time(phi),
                ert: ert(&set, phi)?,
                mean_final_fraction: rs
                    .iter()
                    .map(|r| r.result.final_population_best_fraction)
                    .sum::<f64>()
                    / runs as f64,
            })
        })
        .collect()
}

pub const FREQ_HEADER: &str = "cell,update_freq,runs,success_rate,mean_evals_success,ert";

pub fn freq_csv(rows: &[CellSummary]) -> String {
    let mut s = String::from(FREQ_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{:.6},{},{}\n",
            r.cell,
            r.freq_label(),
            r.runs,
            r.success_rate,
            r.mean_evals_success.map_or(String::new(), |m| format!("{m:.1}")),
            format_ert(r.ert)
        ));
    }
    s
}

/// Standard runs for every update frequency of the grid, summarized per
/// cell at the optimum.
pub fn run_freq_sweep(config: &ExperimentConfig) -> Result<(Experiment, Vec<CellSummary>)> {
    let exp = run_experiment(config)?;
    let rows = summarize_cells(&exp.records, 1.0)?;
    output::write_atomic(
        &config.output_dir.join(FREQ_FILE),
        freq_csv(&rows).as_bytes(),
    )?;
    Ok((exp, rows))
}

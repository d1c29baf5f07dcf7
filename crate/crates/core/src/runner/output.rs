//! On-disk formats: trajectory CSVs, run metadata, and the summary table.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::RunRecord;
use crate::error::{Error, Result};
use crate::ga::{GaParams, Init, RunResult, Selection, TrajectoryPoint};
use crate::problems::{ProblemDescriptor, ProblemVersion};

pub const TRAJECTORY_HEADER: &str = "evaluations,best_fraction_correct,generation";

pub const SUMMARY_HEADER: [&str; 18] = [
    "cell",
    "run",
    "chi",
    "lambda",
    "mu",
    "selection",
    "p_c",
    "update_freq",
    "n_min",
    "mutate_after_crossover",
    "keep_stale_fitness",
    "version",
    "instance",
    "success",
    "evals_to_optimum",
    "evals_used",
    "fraction_at_100n",
    "fraction_at_budget",
];

pub(crate) fn runs_dir(root: &Path) -> PathBuf {
    root.join("runs")
}

pub(crate) fn trajectory_path(root: &Path, ordinal: u64) -> PathBuf {
    runs_dir(root).join(format!("run_{ordinal:06}.csv"))
}

pub(crate) fn metadata_path(root: &Path, ordinal: u64) -> PathBuf {
    runs_dir(root).join(format!("run_{ordinal:06}.json"))
}

/// Writes `bytes` to a sibling temp file and renames it into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Trajectory CSV: improvement rows followed by one final row holding the
/// evaluations used, the final best-so-far fraction and the generation count.
pub fn trajectory_csv(result: &RunResult) -> String {
    let mut s = String::with_capacity(32 * (result.trajectory.len() + 2));
    s.push_str(TRAJECTORY_HEADER);
    s.push('\n');
    for p in &result.trajectory {
        s.push_str(&format!(
            "{},{:.6},{}\n",
            p.evaluations, p.best_fraction_correct, p.generation
        ));
    }
    s.push_str(&format!(
        "{},{:.6},{}\n",
        result.evals_used,
        result.final_best_so_far(),
        result.generations
    ));
    s
}

/// Parses a trajectory CSV back into improvement rows and the final row.
/// Fractions are snapped to multiples of `1/n`.
pub fn parse_trajectory(
    text: &str,
    n: usize,
    path: &Path,
) -> Result<(Vec<TrajectoryPoint>, TrajectoryPoint)> {
    let mut lines = text.lines();
    if lines.next() != Some(TRAJECTORY_HEADER) {
        return Err(Error::data(path, "missing trajectory header"));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let bad = || Error::data(path, format!("bad trajectory row {}: {line:?}", k + 2));
        let mut parts = line.split(',');
        let (Some(e), Some(f), Some(g), None) = (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(bad());
        };
        let e: u64 = e.parse().map_err(|_| bad())?;
        let f: f64 = f.parse().map_err(|_| bad())?;
        let g: u64 = g.parse().map_err(|_| bad())?;
        rows.push(TrajectoryPoint {
            evaluations: e,
            best_fraction_correct: (f * n as f64).round() / n as f64,
            generation: g,
        });
    }
    let last = rows
        .pop()
        .ok_or_else(|| Error::data(path, "trajectory has no final row"))?;
    Ok((rows, last))
}

/// Seeds of one run, for the metadata record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub master_seed: u64,
    pub run_ordinal: u64,
    pub environment: u64,
    pub init: u64,
    pub mutation: u64,
    pub crossover: u64,
}

/// The JSON metadata document of one run (everything but the trajectory).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub cell: usize,
    pub run: usize,
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
    pub success: bool,
    pub evals_to_optimum: Option<u64>,
    pub evals_used: u64,
    pub generations: u64,
    pub final_population_best_fraction: f64,
    pub fraction_at_100n: f64,
    pub fraction_at_budget: f64,
}

impl RunMetadata {
    pub(crate) fn from_record(r: &RunRecord) -> Self {
        RunMetadata {
            cell: r.cell,
            run: r.run,
            ordinal: r.ordinal,
            version: r.version,
            n: r.n,
            instance: r.instance,
            budget: r.budget,
            params: r.params.clone(),
            init: r.init,
            target_fraction: r.target_fraction,
            seeds: r.seeds.clone(),
            problem: r.problem.clone(),
            success: r.result.success,
            evals_to_optimum: r.result.evals_to_optimum,
            evals_used: r.result.evals_used,
            generations: r.result.generations,
            final_population_best_fraction: r.result.final_population_best_fraction,
            fraction_at_100n: r.fraction_at_100n,
            fraction_at_budget: r.fraction_at_budget,
        }
    }

    pub(crate) fn into_record(self, trajectory: Vec<TrajectoryPoint>) -> RunRecord {
        RunRecord {
            cell: self.cell,
            run: self.run,
            ordinal: self.ordinal,
            version: self.version,
            n: self.n,
            instance: self.instance,
            budget: self.budget,
            params: self.params,
            init: self.init,
            target_fraction: self.target_fraction,
            seeds: self.seeds,
            problem: self.problem,
            result: RunResult {
                success: self.success,
                evals_to_optimum: self.evals_to_optimum,
                evals_used: self.evals_used,
                generations: self.generations,
                trajectory,
                final_population_best_fraction: self.final_population_best_fraction,
            },
            fraction_at_100n: self.fraction_at_100n,
            fraction_at_budget: self.fraction_at_budget,
        }
    }
}

/// Writes the trajectory and then the metadata of one run.
pub(crate) fn write_run(root: &Path, record: &RunRecord) -> Result<()> {
    write_atomic(
        &trajectory_path(root, record.ordinal),
        trajectory_csv(&record.result).as_bytes(),
    )?;
    let meta = serde_json::to_string_pretty(&RunMetadata::from_record(record))
        .expect("metadata serializes");
    write_atomic(&metadata_path(root, record.ordinal), meta.as_bytes())
}

/// Loads every complete run under `root/runs`, ordered by ordinal.
///
/// A run is complete when its metadata file exists; its trajectory must
/// then exist too.
pub fn load_records(root: &Path) -> Result<Vec<RunRecord>> {
    let dir = runs_dir(root);
    let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut metas = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(&dir, e))?.path();
        if path.extension().is_some_and(|x| x == "json") {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let meta: RunMetadata = serde_json::from_str(&text)
                .map_err(|e| Error::data(&path, e.to_string()))?;
            metas.push(meta);
        }
    }
    metas.sort_by_key(|m| m.ordinal);
    metas
        .into_iter()
        .map(|m| {
            let path = trajectory_path(root, m.ordinal);
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let (traj, _) = parse_trajectory(&text, m.n, &path)?;
            Ok(m.into_record(traj))
        })
        .collect()
}

/// One row of the flat analysis table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub cell: usize,
    pub run: usize,
    pub chi: f64,
    pub lambda: usize,
    pub mu: usize,
    pub selection: Selection,
    pub p_c: f64,
    pub update_freq: u64,
    pub n_min: usize,
    pub mutate_after_crossover: bool,
    pub keep_stale_fitness: bool,
    pub version: ProblemVersion,
    pub instance: u32,
    pub success: bool,
    pub evals_to_optimum: Option<u64>,
    pub evals_used: u64,
    pub fraction_at_100n: f64,
    pub fraction_at_budget: f64,
}

impl SummaryRow {
    pub fn from_record(r: &RunRecord) -> Self {
        let p = &r.params;
        SummaryRow {
            cell: r.cell,
            run: r.run,
            chi: p.chi,
            lambda: p.lambda,
            mu: p.mu,
            selection: p.selection,
            p_c: p.p_c,
            update_freq: p.update_freq,
            n_min: p.n_min,
            mutate_after_crossover: p.mutate_after_crossover,
            keep_stale_fitness: p.keep_stale_fitness,
            version: r.version,
            instance: r.instance,
            success: r.result.success,
            evals_to_optimum: r.result.evals_to_optimum,
            evals_used: r.result.evals_used,
            fraction_at_100n: r.fraction_at_100n,
            fraction_at_budget: r.fraction_at_budget,
        }
    }
}

/// Renders the summary table: one row per run, GA parameters in their
/// canonical order, then version and instance, then outcomes.
pub fn export_sweep_table(records: &[RunRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::contract("no records to export"));
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER).expect("in-memory write");
    for r in records {
        let s = SummaryRow::from_record(r);
        w.write_record([
            s.cell.to_string(),
            s.run.to_string(),
            s.chi.to_string(),
            s.lambda.to_string(),
            s.mu.to_string(),
            s.selection.to_string(),
            s.p_c.to_string(),
            s.update_freq.to_string(),
            s.n_min.to_string(),
            s.mutate_after_crossover.to_string(),
            s.keep_stale_fitness.to_string(),
            s.version.to_string(),
            s.instance.to_string(),
            s.success.to_string(),
            s.evals_to_optimum.map_or(String::new(), |e| e.to_string()),
            s.evals_used.to_string(),
            format!("{:.6}", s.fraction_at_100n),
            format!("{:.6}", s.fraction_at_budget),
        ])
        .expect("in-memory write");
    }
    let bytes = w.into_inner().expect("in-memory flush");
    Ok(String::from_utf8(bytes).expect("ascii output"))
}

pub fn parse_sweep_table(text: &str) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::data("summary", e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != SUMMARY_HEADER {
        return Err(Error::data("summary", "unexpected summary header"));
    }
    rdr.deserialize()
        .map(|row| row.map_err(|e| Error::data("summary", e.to_string())))
        .collect()
}

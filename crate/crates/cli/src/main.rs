//! `dbv`: run DBV experiments and query their results.
//!
//! Exit status: 0 on completion (whether or not runs succeed), 1 when a
//! query matches no runs, 2 for invalid flags or configs, 3 for I/O or
//! malformed data.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use dbv_core::metrics::format_ert;
use dbv_core::runner::{
    describe, export_ioh, freq_label, load_records, run_experiment, run_freq_sweep,
    run_stage_experiment, summarize_cells, CellSummary, ExperimentConfig, GridSpec, Mode,
    DEFAULT_MASTER_SEED,
};
use dbv_core::{Error, GaParams, ProblemVersion, Selection};

#[derive(Debug, Parser)]
#[command(name = "dbv", about = "Dynamic BinVal benchmark runner", allow_negative_numbers = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Repeated runs of one GA configuration on one problem instance.
    Run(RunArgs),
    /// Grid experiment from a JSON config.
    Sweep(ConfigArgs),
    /// Stage experiment: time to gain a fixed fraction from seeded starts.
    Stages(ConfigArgs),
    /// Update-frequency sweep.
    Freq(ConfigArgs),
    /// ERT and success rate per configuration of stored runs.
    Ert {
        #[arg(long)]
        data: PathBuf,
        /// Target fraction of correct bits.
        #[arg(long, default_value_t = 1.0)]
        phi: f64,
    },
    /// Export stored runs as an IOHprofiler folder.
    Export {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct RunArgs {
    /// Problem version: rank, uniform, powersoftwo or pareto.
    #[arg(long = "version", default_value = "rank")]
    problem: ProblemVersion,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    instance: u32,
    #[arg(long, default_value_t = 1.0)]
    chi: f64,
    #[arg(long, default_value_t = 1)]
    lambda: usize,
    #[arg(long, default_value_t = 1)]
    mu: usize,
    #[arg(long, default_value = "plus")]
    selection: Selection,
    #[arg(long, default_value_t = 0.0)]
    p_c: f64,
    /// Generations between environment changes; 0 is static.
    #[arg(long, default_value_t = 1)]
    update_freq: u64,
    #[arg(long, default_value_t = 0)]
    n_min: usize,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    mutate_after_crossover: bool,
    #[arg(long, default_value_t = false, action = ArgAction::Set)]
    keep_stale_fitness: bool,
    /// Evaluation budget per run [default: 1000 * n].
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, default_value_t = DEFAULT_MASTER_SEED)]
    seed: u64,
    #[arg(long, default_value = "dbv-out")]
    out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

impl RunArgs {
    fn params(&self) -> GaParams {
        GaParams {
            chi: self.chi,
            lambda: self.lambda,
            mu: self.mu,
            selection: self.selection,
            p_c: self.p_c,
            update_freq: self.update_freq,
            n_min: self.n_min,
            mutate_after_crossover: self.mutate_after_crossover,
            keep_stale_fitness: self.keep_stale_fitness,
        }
    }

    fn config(&self) -> ExperimentConfig {
        let p = self.params();
        let mut c = ExperimentConfig::new(&self.out);
        c.versions = vec![self.problem];
        c.n = self.n;
        c.instances = vec![self.instance];
        c.repetitions = self.runs;
        c.budget = self.budget;
        c.master_seed = self.seed;
        c.jobs = self.jobs;
        c.grid = GridSpec {
            chi: Some(vec![p.chi].into()),
            lambda: Some(vec![p.lambda]),
            mu: Some(vec![p.mu]),
            selection: Some(vec![p.selection]),
            p_c: Some(vec![p.p_c].into()),
            update_freq: Some(vec![p.update_freq]),
            n_min: Some(vec![p.n_min]),
            mutate_after_crossover: Some(vec![p.mutate_after_crossover]),
            keep_stale_fitness: Some(vec![p.keep_stale_fitness]),
        };
        c
    }
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` of the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `jobs` of the config.
    #[arg(long)]
    jobs: Option<usize>,
}

impl ConfigArgs {
    fn load(&self, mode: Mode) -> Result<ExperimentConfig, Error> {
        let mut c = ExperimentConfig::from_file(&self.config)?;
        c.mode = mode;
        if let Some(out) = &self.out {
            c.output_dir = out.clone();
        }
        if let Some(jobs) = self.jobs {
            c.jobs = jobs;
        }
        Ok(c)
    }
}

#[derive(Debug)]
enum Failure {
    Core(Error),
    NoRuns(PathBuf),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn cell_line(s: &CellSummary) -> String {
    format!(
        "cell {} version={} {}: runs={} success_rate={:.3} ert={} mean_final_fraction={:.6}",
        s.cell,
        s.version,
        describe(&s.params),
        s.runs,
        s.success_rate,
        format_ert(s.ert),
        s.mean_final_fraction
    )
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => {
            let exp = run_experiment(&args.config())?;
            for r in &exp.records {
                println!(
                    "run {}: success={} evals_to_optimum={} final_fraction={:.6}",
                    r.run,
                    r.result.success,
                    r.result
                        .evals_to_optimum
                        .map_or_else(|| "-".to_string(), |e| e.to_string()),
                    r.result.final_population_best_fraction
                );
            }
            eprintln!("wrote {} runs to {}", exp.records.len(), exp.output_dir.display());
        }
        Command::Sweep(args) => {
            let exp = run_experiment(&args.load(Mode::Standard)?)?;
            for s in summarize_cells(&exp.records, 1.0)? {
                println!("{}", cell_line(&s));
            }
        }
        Command::Stages(args) => {
            let (exp, rows) = run_stage_experiment(&args.load(Mode::Stages)?)?;
            for cell in &exp.cells {
                let mine: Vec<_> = rows.iter().filter(|r| r.cell == cell.id).collect();
                let wins = mine.iter().filter(|r| r.success).count();
                let mean = mine.iter().map(|r| r.evals as f64).sum::<f64>() / mine.len() as f64;
                println!(
                    "cell {} version={} {}: stage_runs={} successes={} mean_evals={:.1}",
                    cell.id,
                    cell.version,
                    describe(&cell.params),
                    mine.len(),
                    wins,
                    mean
                );
            }
        }
        Command::Freq(args) => {
            let (_, rows) = run_freq_sweep(&args.load(Mode::FreqSweep)?)?;
            for s in rows {
                println!(
                    "cell {} version={} update_freq={}: runs={} success_rate={:.3} mean_evals_success={} ert={}",
                    s.cell,
                    s.version,
                    freq_label(s.params.update_freq),
                    s.runs,
                    s.success_rate,
                    s.mean_evals_success.map_or_else(|| "-".to_string(), |m| format!("{m:.1}")),
                    format_ert(s.ert)
                );
            }
        }
        Command::Ert { data, phi } => {
            if !(0.0..=1.0).contains(&phi) {
                return Err(Error::Config {
                    path: "phi".into(),
                    message: format!("target fraction must lie in [0, 1], got {phi}"),
                }
                .into());
            }
            let records = load_records(&data)?;
            if records.is_empty() {
                return Err(Failure::NoRuns(data));
            }
            for s in summarize_cells(&records, phi)? {
                println!("{}", cell_line(&s));
            }
        }
        Command::Export { data, out } => {
            let records = load_records(&data)?;
            if records.is_empty() {
                return Err(Failure::NoRuns(data));
            }
            let e = export_ioh(&records, &out)?;
            eprintln!(
                "wrote {} index files and {} data files to {}",
                e.index_files.len(),
                e.data_files.len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::NoRuns(dir)) => {
            eprintln!("error: no runs found under {}", dir.display());
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Io { .. } | Error::Data { .. } => 3,
                _ => 2,
            })
        }
    }
}

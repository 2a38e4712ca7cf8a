//! Command-line front end.
//!
//! Subcommands:
//!
//! * `run`: run the benchmark and write `results.csv` and `summary.json`;
//! * `sweep`: repeat `run` over values of `L`, `n_s` or `n_e`;
//! * `oracle-check`: compare one selector against exhaustive search;
//! * `dump-matrix`: write a trial's generated candidate matrix as CSV.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on invalid input.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::candidate::CandidateMatrix;
use crate::error::Error;
use crate::experiment::{
    generate_candidates, run_experiment_with, summarize, write_results_csv, ExperimentConfig, SummaryRow,
    TrialRecord,
};
use crate::objective::ObjectiveKind;
use crate::oracle::{binomial, exhaustive_best, ENUMERATION_GUARD};
use crate::selection::Selector;

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "SENSOR_SELECT_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::GuardExceeded { .. } | Error::Shape(_) => {
                CliError::Validation(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn io_err(context: &str, path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{context} {}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "sensor-select", version, about = "Greedy and randomized group-greedy sensor selection benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the multi-trial benchmark and write results.csv and summary.json.
    Run(RunArgs),
    /// Repeat the benchmark over several values of one parameter.
    Sweep(SweepArgs),
    /// Compare a selector with the exhaustive optimum on one matrix.
    OracleCheck(OracleArgs),
    /// Write a generated candidate matrix as CSV.
    DumpMatrix(DumpArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodName {
    Greedy,
    Gg,
    Rgg,
    Ergg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    D,
    E,
}

impl From<ObjectiveArg> for ObjectiveKind {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::D => ObjectiveKind::D,
            ObjectiveArg::E => ObjectiveKind::E,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    #[value(name = "L")]
    L,
    #[value(name = "ns")]
    Ns,
    #[value(name = "ne")]
    Ne,
}

impl SweepAxis {
    fn name(self) -> &'static str {
        match self {
            SweepAxis::L => "L",
            SweepAxis::Ns => "ns",
            SweepAxis::Ne => "ne",
        }
    }
}

/// Method parameters shared by every subcommand that runs selectors.
#[derive(Debug, Clone, Args)]
pub struct MethodArgs {
    /// Objective criterion.
    #[arg(long, value_enum, default_value = "e", ignore_case = true)]
    pub objective: ObjectiveArg,
    /// Group size L for gg, rgg and ergg.
    #[arg(long = "L", visible_alias = "group-size", default_value_t = 10)]
    pub group_size: usize,
    /// Sketch size n_s for rgg and ergg.
    #[arg(long = "ns", default_value_t = 100)]
    pub sketch_size: usize,
    /// Elite count n_e for ergg.
    #[arg(long = "ne", default_value_t = 10)]
    pub elite_count: usize,
    /// Draw one sketch per step shared by all group members.
    #[arg(long)]
    pub shared_sketch: bool,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Read the candidate matrix from CSV instead of generating it; n and r
    /// are taken from the file.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

impl MethodArgs {
    fn selector(&self, name: MethodName) -> Selector {
        match name {
            MethodName::Greedy => Selector::Greedy,
            MethodName::Gg => Selector::GroupGreedy { group_size: self.group_size },
            MethodName::Rgg => Selector::Randomized {
                group_size: self.group_size,
                sketch_size: self.sketch_size,
                shared_sketch: self.shared_sketch,
            },
            MethodName::Ergg => Selector::EliteRandomized {
                group_size: self.group_size,
                sketch_size: self.sketch_size,
                elite_count: self.elite_count,
                shared_sketch: self.shared_sketch,
            },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub method_args: MethodArgs,
    /// Methods to run, comma separated.
    #[arg(long = "method", value_enum, value_delimiter = ',', default_value = "greedy,gg,rgg,ergg")]
    pub methods: Vec<MethodName>,
    /// Number of candidate locations.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Number of latent variables.
    #[arg(long, default_value_t = 10)]
    pub r: usize,
    /// Largest number of sensors to select.
    #[arg(long, default_value_t = 30)]
    pub p_max: usize,
    /// Number of independent trials, each on a fresh candidate matrix.
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    /// Worker threads for parallel trials (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write zero wall times so outputs depend only on the configuration.
    #[arg(long)]
    pub deterministic: bool,
    /// Suppress the per-trial log line.
    #[arg(long, short)]
    pub quiet: bool,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    /// Parameter to vary.
    #[arg(long, value_enum)]
    pub axis: SweepAxis,
    /// Values to use, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub method_args: MethodArgs,
    #[arg(long = "method", value_enum, default_value = "gg")]
    pub method: MethodName,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub r: usize,
    /// Number of sensors to select.
    #[arg(long, default_value_t = 3)]
    pub p: usize,
    /// Trial whose generated matrix is used.
    #[arg(long, default_value_t = 0)]
    pub trial: usize,
}

#[derive(Debug, Clone, Args)]
pub struct DumpArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub r: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trial whose matrix is written.
    #[arg(long, default_value_t = 0)]
    pub trial: usize,
    /// Destination CSV file.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (including the program name) and executes the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::OracleCheck(a) => cmd_oracle(&a),
        Command::DumpMatrix(a) => cmd_dump(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn read_matrix(path: &Path) -> Result<CandidateMatrix, CliError> {
    let file = File::open(path).map_err(|e| io_err("cannot read input matrix", path, e))?;
    CandidateMatrix::read_csv(BufReader::new(file))
        .map_err(|e| CliError::Runtime(format!("cannot parse input matrix {}: {e}", path.display())))
}

fn experiment_config(exp: &ExperimentArgs, shape: Option<(usize, usize)>) -> Result<ExperimentConfig, CliError> {
    let (n, r) = shape.unwrap_or((exp.n, exp.r));
    let mut methods = Vec::new();
    for &m in &exp.methods {
        let sel = exp.method_args.selector(m);
        if !methods.contains(&sel) {
            methods.push(sel);
        }
    }
    let cfg = ExperimentConfig {
        n,
        r,
        p_max: exp.p_max,
        trials: exp.trials,
        master_seed: exp.method_args.seed,
        methods,
        objective: exp.method_args.objective.into(),
        noise_variance: 1.0,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn with_threads<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match threads {
        None => Ok(job()),
        Some(0) => Err(CliError::Validation("--threads must be at least 1".into())),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Runtime(format!("cannot start thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

fn execute(exp: &ExperimentArgs, cfg: &ExperimentConfig, input: Option<&CandidateMatrix>) -> Result<Vec<TrialRecord>, CliError> {
    let quiet = exp.quiet;
    let log = |recs: &[TrialRecord]| {
        if quiet {
            return;
        }
        let parts: Vec<String> = recs
            .iter()
            .map(|r| match (&r.error, r.objective_curve.last()) {
                (Some(e), _) => format!("{}=FAILED({e})", r.method),
                (None, Some(v)) => format!("{}={v:.6e} ({:.3}s)", r.method, r.wall_time),
                (None, None) => format!("{}=-", r.method),
            })
            .collect();
        eprintln!("trial {}: {}", recs.first().map_or(0, |r| r.trial), parts.join(" "));
    };
    let records = with_threads(exp.threads, || {
        run_experiment_with(
            cfg,
            |t| match input {
                Some(u) => Ok(u.clone()),
                None => generate_candidates(cfg.n, cfg.r, cfg.matrix_key(t)),
            },
            log,
        )
    })??;
    Ok(records)
}

fn write_outputs(dir: &Path, cfg: &ExperimentConfig, records: &[TrialRecord], timing: bool) -> Result<Vec<SummaryRow>, CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err("cannot create output directory", dir, e))?;
    let csv_path = dir.join("results.csv");
    let file = File::create(&csv_path).map_err(|e| io_err("cannot write", &csv_path, e))?;
    write_results_csv(records, BufWriter::new(file), timing).map_err(|e| io_err("cannot write", &csv_path, e))?;

    let summary = summarize(cfg, records, timing)
        .map_err(|e| CliError::Runtime(format!("every trial failed: {e}")))?;
    let json_path = dir.join("summary.json");
    let file = File::create(&json_path).map_err(|e| io_err("cannot write", &json_path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &summary).map_err(|e| io_err("cannot write", &json_path, e))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| io_err("cannot write", &json_path, e))?;
    Ok(summary.rows)
}

fn print_final_rows(rows: &[SummaryRow], p_max: usize) {
    println!("{:<28} {:>4} {:>16} {:>14} {:>12} {:>14}", "method", "k", "mean", "std", "time[s]", "evals");
    for row in rows.iter().filter(|r| r.k == p_max) {
        println!(
            "{:<28} {:>4} {:>16.6e} {:>14.4e} {:>12.4} {:>14.0}",
            row.method, row.k, row.mean, row.std, row.mean_wall_time, row.mean_eval_count
        );
    }
}

fn load_input(args: &MethodArgs) -> Result<Option<CandidateMatrix>, CliError> {
    args.input.as_deref().map(read_matrix).transpose()
}

fn cmd_run(args: &RunArgs) -> Result<i32, CliError> {
    let exp = &args.exp;
    let input = load_input(&exp.method_args)?;
    let cfg = experiment_config(exp, input.as_ref().map(|u| (u.rows(), u.cols())))?;
    let records = execute(exp, &cfg, input.as_ref())?;
    let rows = write_outputs(&exp.out, &cfg, &records, !exp.deterministic)?;
    print_final_rows(&rows, cfg.p_max);
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        eprintln!("{failed} method runs failed; see summary.json");
    }
    Ok(EXIT_OK)
}

fn cmd_sweep(args: &SweepArgs) -> Result<i32, CliError> {
    let input = load_input(&args.exp.method_args)?;
    let shape = input.as_ref().map(|u| (u.rows(), u.cols()));
    // Validate every block before running any of them.
    let mut blocks = Vec::new();
    for &value in &args.values {
        let mut exp = args.exp.clone();
        match args.axis {
            SweepAxis::L => exp.method_args.group_size = value,
            SweepAxis::Ns => exp.method_args.sketch_size = value,
            SweepAxis::Ne => exp.method_args.elite_count = value,
        }
        let cfg = experiment_config(&exp, shape)
            .map_err(|e| CliError::Validation(format!("{}={value}: {}", args.axis.name(), e.message())))?;
        blocks.push((value, exp, cfg));
    }
    let mut sweep = Vec::new();
    for (value, exp, cfg) in blocks {
        let label = format!("{}={value}", args.axis.name());
        let records = execute(&exp, &cfg, input.as_ref())?;
        let rows = write_outputs(&args.exp.out.join(&label), &cfg, &records, !exp.deterministic)?;
        println!("== {label}");
        print_final_rows(&rows, cfg.p_max);
        sweep.push(serde_json::json!({ "axis": args.axis.name(), "value": value, "rows": rows }));
    }
    let path = args.exp.out.join("sweep.json");
    let text = serde_json::to_string_pretty(&sweep).expect("summary rows serialize");
    fs::write(&path, text + "\n").map_err(|e| io_err("cannot write", &path, e))?;
    Ok(EXIT_OK)
}

fn cmd_oracle(args: &OracleArgs) -> Result<i32, CliError> {
    let input = load_input(&args.method_args)?;
    let (n, r) = input.as_ref().map_or((args.n, args.r), |u| (u.rows(), u.cols()));
    let count = binomial(n, args.p);
    if count > ENUMERATION_GUARD {
        return Err(CliError::Validation(format!(
            "refusing exhaustive search: C({n}, {}) = {count} subsets exceeds the guard of {ENUMERATION_GUARD}",
            args.p
        )));
    }
    let selector = args.method_args.selector(args.method);
    selector.validate(n, args.p)?;
    let cfg = ExperimentConfig {
        n,
        r,
        p_max: args.p,
        trials: args.trial + 1,
        master_seed: args.method_args.seed,
        methods: vec![selector],
        objective: args.method_args.objective.into(),
        noise_variance: 1.0,
    };
    let u = match input {
        Some(u) => u,
        None => generate_candidates(n, r, cfg.matrix_key(args.trial))?,
    };
    let report = selector.run(&u, args.p, cfg.objective, cfg.selector_seed(args.trial))?;
    let best = exhaustive_best(&u, args.p, cfg.objective)?;
    let value = *report.objective_curve.last().expect("p >= 1");
    let ratio = if best.value > 0.0 { value / best.value } else { 1.0 };
    println!("method     {}", selector.label());
    println!("objective  {}", cfg.objective);
    println!("selector   {value:.17e}  {:?}", report.final_subset);
    println!("optimum    {:.17e}  {:?}", best.value, best.subset.canonical());
    println!("ratio      {ratio:.12}");

    let scale = best.value.abs().max(1.0);
    let mut ok = value <= best.value + 1e-8 * scale;
    if let Selector::GroupGreedy { group_size } = selector {
        if group_size as u128 >= count {
            let exact = (value - best.value).abs() <= 1e-10 * scale;
            println!("exact      {}", if exact { "yes" } else { "NO" });
            ok &= exact;
        }
    }
    println!("check      {}", if ok { "pass" } else { "FAIL" });
    Ok(if ok { EXIT_OK } else { EXIT_RUNTIME })
}

fn cmd_dump(args: &DumpArgs) -> Result<i32, CliError> {
    let cfg = ExperimentConfig {
        n: args.n,
        r: args.r,
        p_max: 1,
        trials: args.trial + 1,
        master_seed: args.seed,
        methods: vec![Selector::Greedy],
        objective: ObjectiveKind::D,
        noise_variance: 1.0,
    };
    let u = generate_candidates(args.n, args.r, cfg.matrix_key(args.trial))?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err("cannot create directory", parent, e))?;
    }
    let file = File::create(&args.out).map_err(|e| io_err("cannot write", &args.out, e))?;
    u.write_csv(BufWriter::new(file)).map_err(|e| io_err("cannot write", &args.out, e))?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_desk_configuration() {
        let cli = Cli::try_parse_from(["sensor-select", "run"]).unwrap();
        let Command::Run(a) = cli.command else { panic!("expected run") };
        assert_eq!((a.exp.n, a.exp.r, a.exp.trials, a.exp.p_max), (1000, 10, 50, 30));
        let m = &a.exp.method_args;
        assert_eq!((m.group_size, m.sketch_size, m.elite_count), (10, 100, 10));
        assert_eq!(a.exp.methods, vec![MethodName::Greedy, MethodName::Gg, MethodName::Rgg, MethodName::Ergg]);
    }

    #[test]
    fn parses_sweep_axis_and_values() {
        let cli = Cli::try_parse_from(["sensor-select", "sweep", "--axis", "L", "--values", "5,10,50"]).unwrap();
        let Command::Sweep(a) = cli.command else { panic!("expected sweep") };
        assert_eq!(a.axis, SweepAxis::L);
        assert_eq!(a.values, vec![5, 10, 50]);
    }

    #[test]
    fn unknown_flag_is_a_usage_error() {
        assert_eq!(run(["sensor-select", "run", "--bogus"]), EXIT_VALIDATION);
    }

    #[test]
    fn elite_constraint_is_validation() {
        let code = run([
            "sensor-select", "run", "--method", "ergg", "--L", "10", "--ns", "10", "--ne", "20", "--n", "50",
            "--trials", "1", "--p-max", "3", "--out", "/nonexistent/never-written",
        ]);
        assert_eq!(code, EXIT_VALIDATION);
    }
}

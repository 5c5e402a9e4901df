//! Command-line front end: `riccati`, `simulate`, `converge` and `bsde`.
//!
//! Every command writes its artifacts under `--out`. Errors are reported as
//! a JSON object on stderr with exit code 2 for invalid input and 3 for
//! numerical failure. `MFLQ_SEED`, when set, takes precedence over `--seed`.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::analytic::{example_problem, ExampleSolution};
use crate::bsde::{reconstruct_means, reconstruct_path, YWeight};
use crate::error::{Error, Result};
use crate::export;
use crate::harness::{
    bsde_convergence, mean_convergence, power_levels, riccati_convergence, strong_convergence, Oracle,
    RateReport, ReferenceOracle, StudyOptions,
};
use crate::mesh::TimeMesh;
use crate::problem::{Problem, ProblemData};
use crate::riccati::{riccati_error, solve_continuous_reference};
use crate::simulate::{discrete_cost, monte_carlo, McOptions};
use crate::solver::DiscreteSolution;

pub const SEED_ENV: &str = "MFLQ_SEED";
/// Path dumps above this many rows trigger a warning.
pub const PATH_ROWS_WARNING: usize = 1_000_000;
pub const MIN_LEVEL_EXPONENT: u32 = 2;
pub const MAX_LEVEL_EXPONENT: u32 = 20;

#[derive(Debug, Parser)]
#[command(name = "mflq", version, about = "Mean-field LQ control by Riccati difference equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the P and Π recursions and write P.csv, Pi.csv and gains.csv.
    Riccati(RiccatiArgs),
    /// Simulate the closed loop and write means, moments and cost.
    Simulate(SimulateArgs),
    /// Run convergence studies and write rates.csv and rates.json.
    Converge(ConvergeArgs),
    /// Reconstruct the adjoint pair along simulated paths.
    Bsde(BsdeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// "example" or a path to a problem JSON file.
    #[arg(long, default_value = "example")]
    pub problem: String,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Master seed; overridden by MFLQ_SEED.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Caps the number of worker threads.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RiccatiArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long = "N", default_value_t = 1024)]
    pub steps: usize,
    /// Also solve the continuous reference on this many steps.
    #[arg(long = "N-ref")]
    pub n_ref: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long = "N", default_value_t = 32)]
    pub steps: usize,
    #[arg(long = "M", default_value_t = 1000)]
    pub paths: usize,
    /// Write every path to paths.csv.
    #[arg(long)]
    pub dump_paths: bool,
    /// Force all Brownian increments to zero.
    #[arg(long)]
    pub zero_noise: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    All,
    Riccati,
    Mean,
    Strong,
    Bsde,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Exponent range `a:b` for N = 2^a ..= 2^b.
    #[arg(long, default_value = "4:10")]
    pub levels: LevelRange,
    #[arg(long = "M", default_value_t = 10_000)]
    pub paths: usize,
    #[arg(long = "N-ref", default_value_t = 1 << 14)]
    pub n_ref: usize,
    #[arg(long, value_enum, default_value_t = Metric::All)]
    pub metric: Metric,
}

#[derive(Debug, Clone, Args)]
pub struct BsdeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long = "N", default_value_t = 1024)]
    pub steps: usize,
    #[arg(long = "M", default_value_t = 8)]
    pub paths: usize,
    /// Weight of the state fluctuation in y: p or pi.
    #[arg(long, default_value = "p")]
    pub y_weight: YWeight,
}

/// Inclusive exponent range parsed from `a:b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelRange {
    pub lo: u32,
    pub hi: u32,
}

impl LevelRange {
    pub fn levels(&self) -> Vec<usize> {
        power_levels(self.lo, self.hi)
    }
}

impl FromStr for LevelRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (a, b) = s.split_once(':').ok_or("expected a:b")?;
        let lo: u32 = a.trim().parse().map_err(|_| format!("bad exponent {a:?}"))?;
        let hi: u32 = b.trim().parse().map_err(|_| format!("bad exponent {b:?}"))?;
        if lo > hi {
            return Err("range start exceeds end".into());
        }
        if lo < MIN_LEVEL_EXPONENT || hi > MAX_LEVEL_EXPONENT {
            return Err(format!(
                "exponents must lie in {MIN_LEVEL_EXPONENT}..={MAX_LEVEL_EXPONENT}"
            ));
        }
        Ok(Self { lo, hi })
    }
}

/// Resolved settings shared by all commands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: Problem,
    /// True for the builtin example, which has a closed-form oracle.
    pub builtin: bool,
    pub out: PathBuf,
    pub seed: u64,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn resolve(common: &CommonArgs) -> Result<Self> {
        let (data, builtin) = if common.problem == "example" {
            (example_problem(), true)
        } else {
            let text = fs::read_to_string(&common.problem)
                .map_err(|e| Error::Io(format!("{}: {e}", common.problem)))?;
            (ProblemData::from_json_str(&text)?, false)
        };
        let problem = Problem::new(data)?;
        let seed = match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?,
            Err(_) => common.seed,
        };
        if common.workers == Some(0) {
            return Err(Error::InvalidConfig("--workers must be positive".into()));
        }
        fs::create_dir_all(&common.out)
            .map_err(|e| Error::Io(format!("{}: {e}", common.out.display())))?;
        Ok(Self {
            problem,
            builtin,
            out: common.out.clone(),
            seed,
            workers: common.workers,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn mesh(&self, steps: usize) -> Result<TimeMesh> {
        TimeMesh::new(self.problem.horizon, steps)
    }
}

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::InvalidConfig(format!("{name} must be positive")));
    }
    Ok(())
}

pub fn cmd_riccati(args: &RiccatiArgs) -> Result<()> {
    positive("--N", args.steps)?;
    let cfg = RunConfig::resolve(&args.common)?;
    let sol = DiscreteSolution::compute(&cfg.problem, cfg.mesh(args.steps)?)?;
    export::riccati_csv(&sol.p, "P").write(&cfg.path("P.csv"))?;
    export::riccati_csv(&sol.pi, "Pi").write(&cfg.path("Pi.csv"))?;
    export::gains_csv(&sol.policy).write(&cfg.path("gains.csv"))?;
    if let Some(n_ref) = args.n_ref {
        let reference = solve_continuous_reference(&cfg.problem, n_ref)?;
        export::riccati_csv(&reference.p, "P").write(&cfg.path("P_ref.csv"))?;
        export::riccati_csv(&reference.pi, "Pi").write(&cfg.path("Pi_ref.csv"))?;
        let summary = json!({
            "N": args.steps,
            "N_ref": n_ref,
            "P_error": riccati_error(&sol.p, &reference.p)?,
            "Pi_error": riccati_error(&sol.pi, &reference.pi)?,
            "reference_psd": reference.psd_ok,
        });
        export::write_json(&cfg.path("riccati_error.json"), &summary)?;
    }
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    positive("--N", args.steps)?;
    positive("--M", args.paths)?;
    let cfg = RunConfig::resolve(&args.common)?;
    let sol = DiscreteSolution::compute(&cfg.problem, cfg.mesh(args.steps)?)?;
    let opts = McOptions {
        paths: args.paths,
        seed: cfg.seed,
        workers: cfg.workers,
        zero_noise: args.zero_noise,
    };
    let run = monte_carlo(&cfg.problem, &sol.policy, &sol.means, &opts)?;
    let cost = discrete_cost(&cfg.problem, &run.ensemble, &sol.means)?;
    export::means_csv(&sol.means).write(&cfg.path("means.csv"))?;
    export::moments_csv(&sol.mesh, &run.moments).write(&cfg.path("moments.csv"))?;
    let mut summary = serde_json::to_value(cost).map_err(|e| Error::Io(e.to_string()))?;
    if let Value::Object(map) = &mut summary {
        map.insert("N".into(), json!(args.steps));
        map.insert("M".into(), json!(args.paths));
        map.insert("seed".into(), json!(cfg.seed));
        map.insert("zero_noise".into(), json!(args.zero_noise));
    }
    export::write_json(&cfg.path("cost.json"), &summary)?;
    if args.dump_paths {
        let rows = args.paths * (args.steps + 1);
        if rows > PATH_ROWS_WARNING {
            eprintln!("warning: paths.csv will hold {rows} rows");
        }
        export::paths_csv(&sol.mesh, &run.ensemble.paths).write(&cfg.path("paths.csv"))?;
    }
    Ok(())
}

pub fn cmd_converge(args: &ConvergeArgs) -> Result<()> {
    positive("--M", args.paths)?;
    let cfg = RunConfig::resolve(&args.common)?;
    let p = &cfg.problem;
    let levels = args.levels.levels();
    let wants = |m: Metric| args.metric == Metric::All || args.metric == m;

    let reference;
    let oracle: &dyn Oracle = if cfg.builtin {
        &ExampleSolution
    } else {
        reference = ReferenceOracle::new(p, args.n_ref)?;
        &reference
    };
    let pathwise = oracle.pathwise(0.0, 0.0).is_some();
    if !pathwise && matches!(args.metric, Metric::Strong | Metric::Bsde) {
        return Err(Error::InvalidConfig(
            "pathwise metrics need the builtin example or a noise-free problem".into(),
        ));
    }
    let opts = StudyOptions {
        paths: args.paths,
        seed: cfg.seed,
        workers: cfg.workers,
    };

    let mut reports: Vec<RateReport> = Vec::new();
    if wants(Metric::Riccati) {
        let (rp, rpi) = riccati_convergence(p, &levels, args.n_ref)?;
        reports.extend([rp, rpi]);
    }
    if wants(Metric::Mean) {
        let (mx, mu) = mean_convergence(p, oracle, &levels)?;
        reports.extend([mx, mu]);
    }
    if pathwise {
        if wants(Metric::Strong) {
            let (sx, su) = strong_convergence(p, oracle, &levels, &opts)?;
            reports.extend([sx, su]);
        }
        if wants(Metric::Bsde) {
            let rates = bsde_convergence(p, oracle, &levels, &opts)?;
            reports.extend(rates.reports().into_iter().cloned());
        }
    } else if args.metric == Metric::All {
        eprintln!("warning: skipping strong and bsde metrics (no pathwise oracle for this problem)");
    }

    export::rates_csv(&reports).write(&cfg.path("rates.csv"))?;
    let mut summary = export::rates_json(&reports);
    summary["config"] = json!({
        "levels": levels,
        "M": args.paths,
        "seed": cfg.seed,
        "N_ref": args.n_ref,
        "problem": args.common.problem,
    });
    export::write_json(&cfg.path("rates.json"), &summary)?;
    Ok(())
}

pub fn cmd_bsde(args: &BsdeArgs) -> Result<()> {
    positive("--N", args.steps)?;
    positive("--M", args.paths)?;
    let cfg = RunConfig::resolve(&args.common)?;
    let p = &cfg.problem;
    let sol = DiscreteSolution::compute(p, cfg.mesh(args.steps)?)?;
    let adjoint = reconstruct_means(p, &sol.p, &sol.pi, &sol.means)?;
    let mut opts = McOptions::new(args.paths, cfg.seed);
    opts.workers = cfg.workers;
    let run = monte_carlo(p, &sol.policy, &sol.means, &opts)?;
    let paths = run
        .ensemble
        .paths
        .iter()
        .map(|path| reconstruct_path(p, &sol.p, &sol.pi, &sol.means, &adjoint, path, args.y_weight))
        .collect::<Result<Vec<_>>>()?;
    export::adjoint_means_csv(&sol.mesh, &adjoint).write(&cfg.path("adjoint_means.csv"))?;
    export::adjoint_paths_csv(&sol.mesh, &paths, &adjoint).write(&cfg.path("adjoint_paths.csv"))?;
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Riccati(a) => cmd_riccati(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Converge(a) => cmd_converge(a),
        Command::Bsde(a) => cmd_bsde(a),
    }
}

/// Machine-readable error report.
pub fn error_json(err: &Error) -> Value {
    let mut v = json!({
        "error": err.kind(),
        "message": err.to_string(),
        "exit_code": exit_code(err),
    });
    if let Error::InvalidProblemFile { key, .. } = err {
        v["key"] = json!(key);
    }
    v
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_validation() {
        2
    } else {
        3
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let report = json!({
                "error": "InvalidConfig",
                "message": e.to_string().trim(),
                "exit_code": 2,
            });
            eprintln!("{report}");
            return 2;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("{}", error_json(&err));
            exit_code(&err)
        }
    }
}

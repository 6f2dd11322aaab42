//! Command-line front end.
//!
//! Exit codes: 0 success, 1 input or validation failure, 2 numerical failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::approximator::{moment_matched, Approximator};
use crate::error::Error;
use crate::mgf::TPair;
use crate::moments::{sum_mean_var, SumSpec};
use crate::montecarlo::{default_grid, format_sig, simulate_cdf, CdfGrid, SimConfig};
use crate::report::{comparison_csv, comparison_table, EQUITY_RATIOS, PROBABILITY_COLUMNS};
use crate::solver::SolverConfig;
use crate::tuner::{TSetSearch, TunerConfig, WeightFn};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

const DEFAULT_SEED: u64 = 42;
const DEFAULT_SAMPLES: u64 = 10_000_000;

/// JSON problem description.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub means: Vec<f64>,
    /// Row-major lognormal covariance matrix.
    pub cov: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub t: Option<[f64; 2]>,
    #[serde(default)]
    pub sim: Option<SimSection>,
    #[serde(default)]
    pub grid: Option<GridSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub n: Option<u64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GridSection {
    Uniform { h: f64, k: usize },
    Explicit { domain: Vec<f64> },
}

impl ProblemFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("cannot parse {}: {e}", path.display())))
    }

    pub fn spec(&self) -> Result<SumSpec, Error> {
        SumSpec::from_rows(&self.means, &self.cov, &self.weights)
    }
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Lib(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Lib(_) => EXIT_INPUT,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Input(msg) => format!("error: {msg}"),
            CliError::Lib(e) => format!("error during {}: {e}", e.stage()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "lnsum",
    version,
    about = "Approximate weighted sums of correlated lognormals by a single lognormal"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the approximating lognormal for a problem file.
    Approx(ApproxArgs),
    /// Simulate the CDF of the sum on a grid and write it as CSV.
    Simulate(SimulateArgs),
    /// Search the t-pair grid against a simulated CDF.
    Optimize(OptimizeArgs),
    /// Four-method quantile comparison for the stock/bond portfolio.
    Table2(Table2Args),
}

#[derive(Debug, Args, Clone)]
pub struct SolverArgs {
    /// Convergence threshold on the largest residual.
    #[arg(long, default_value_t = 1e-10)]
    pub epsilon: f64,
    #[arg(long = "max-iter", default_value_t = 200)]
    pub max_iter: usize,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            epsilon: self.epsilon,
            max_iterations: self.max_iter,
        }
    }
}

#[derive(Debug, Args)]
pub struct ApproxArgs {
    pub file: PathBuf,
    /// MGF evaluation points (overrides the file; default -1.0 -0.2).
    #[arg(long, num_args = 2, value_names = ["T1", "T2"], allow_negative_numbers = true)]
    pub t: Option<Vec<f64>>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Print quantiles at the standard probability columns.
    #[arg(long, visible_alias = "alpha-row")]
    pub quantiles: bool,
    /// Print the intermediate derivation.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args, Clone)]
pub struct SimArgs {
    /// Sample size.
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub file: PathBuf,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Upper end of the uniform grid.
    #[arg(long = "grid-h")]
    pub grid_h: Option<f64>,
    /// Number of grid points.
    #[arg(long = "grid-k")]
    pub grid_k: Option<usize>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    pub file: PathBuf,
    /// Simulated CDF (`s,p` CSV).
    #[arg(long)]
    pub truth: PathBuf,
    /// Largest t index.
    #[arg(long, default_value_t = 100)]
    pub ul: u32,
    /// t = -index / (ul / prec).
    #[arg(long, default_value_t = 10)]
    pub prec: u32,
    /// Weight preset (`uniform`, `tail-emphasis`) or a JSON band file.
    #[arg(long, default_value = "uniform")]
    pub weights: String,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Table2Args {
    /// Equity ratios.
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = EQUITY_RATIOS.to_vec())]
    pub alpha: Vec<f64>,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Approx(a) => cmd_approx(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Optimize(a) => cmd_optimize(&a),
        Command::Table2(a) => cmd_table2(&a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{}", e.message());
            e.exit_code()
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Input(format!("stdout: {e}")))
        }
    }
}

fn sim_config(args: &SimArgs, file: Option<&SimSection>) -> SimConfig {
    SimConfig {
        sample_size: args.n.or(file.and_then(|s| s.n)).unwrap_or(DEFAULT_SAMPLES),
        seed: args
            .seed
            .or(file.and_then(|s| s.seed))
            .unwrap_or(DEFAULT_SEED),
        threads: args.threads.or(file.and_then(|s| s.threads)).unwrap_or(0),
    }
}

pub fn cmd_approx(args: &ApproxArgs) -> Result<(), CliError> {
    let problem = ProblemFile::load(&args.file)?;
    let spec = problem.spec()?;
    let [t1, t2] = match (&args.t, problem.t) {
        (Some(v), _) => [v[0], v[1]],
        (None, Some(t)) => t,
        (None, None) => [-1.0, -0.2],
    };
    let tpair = TPair::new(t1, t2)?;
    let config = args.solver.config();
    config.validate()?;
    if tpair.is_repeated() {
        eprintln!(
            "WARNING: The t-values are equal (t1 = t2 = {t1}); both MGF conditions coincide, so the fit is underdetermined."
        );
    }

    let approximator = Approximator::new(spec.clone())?;
    let mut text = String::new();
    let line = |text: &mut String, label: &str, v: f64| {
        text.push_str(&format!("{label:<28}{}\n", format_sig(v)));
    };

    if args.verbose {
        let sys = approximator.system();
        let n = spec.dim();
        text.push_str("underlying normal parameters\n");
        for i in 0..n {
            line(&mut text, &format!("  mu_x{}", i + 1), sys.means[i]);
        }
        for i in 0..n {
            line(&mut text, &format!("  var_x{}", i + 1), sys.cov[(i, i)]);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                line(
                    &mut text,
                    &format!("  cov_x{},x{}", i + 1, j + 1),
                    sys.cov[(i, j)],
                );
                line(
                    &mut text,
                    &format!("  rho_x{},x{}", i + 1, j + 1),
                    sys.correlation(i, j),
                );
            }
        }
        if let Some(l) = &sys.chol {
            text.push_str("cholesky factor L\n");
            for i in 0..n {
                let row: Vec<String> = (0..n).map(|j| format_sig(l[(i, j)])).collect();
                text.push_str(&format!("  [{}]\n", row.join(", ")));
            }
        }
        let (e, v) = sum_mean_var(&spec);
        line(&mut text, "E[S]", e);
        line(&mut text, "V[S]", v);
        let (mu0, s0) = approximator.start();
        line(&mut text, "start mu_x", mu0);
        line(&mut text, "start sigma_x", s0);
    }

    let result = approximator.fit(&tpair, &config)?;

    if args.verbose {
        line(&mut text, "C1", result.constants.c1);
        line(&mut text, "C2", result.constants.c2);
        text.push_str("newton iterates (mu_x, sigma_x, max |residual|)\n");
        for (k, step) in result.solver.trace.iter().enumerate() {
            text.push_str(&format!(
                "  {k:>3}  {}  {}  {}\n",
                format_sig(step.mu_x),
                format_sig(step.sigma_x),
                format_sig(step.residual)
            ));
        }
    }
    text.push_str(&format!("t pair                      {t1} {t2}\n"));
    line(&mut text, "lognormal mean", result.lognormal_mean);
    line(&mut text, "lognormal variance", result.lognormal_variance);
    line(&mut text, "normal mu_x", result.normal_mu);
    line(&mut text, "normal sigma_x", result.normal_sigma);
    text.push_str(&format!(
        "{:<28}{}\n",
        "iterations", result.solver.iterations
    ));
    line(&mut text, "final residual", result.solver.final_residual);

    if args.quantiles {
        let probs: Vec<String> = PROBABILITY_COLUMNS
            .iter()
            .map(|p| format!("{p:.2}"))
            .collect();
        let cells = PROBABILITY_COLUMNS
            .iter()
            .map(|&p| result.quantile(p).map(|q| format!("{q:.4}")))
            .collect::<Result<Vec<_>, _>>()?;
        text.push_str(&format!("p,{}\n", probs.join(",")));
        text.push_str(&format!("s,{}\n", cells.join(",")));
    }
    emit(None, &text)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let problem = ProblemFile::load(&args.file)?;
    let spec = problem.spec()?;
    let config = sim_config(&args.sim, problem.sim.as_ref());
    let domain = match (args.grid_h, args.grid_k, &problem.grid) {
        (None, None, Some(GridSection::Explicit { domain })) => domain.clone(),
        (h, k, file) => {
            let (fh, fk) = match file {
                Some(GridSection::Uniform { h, k }) => (Some(*h), Some(*k)),
                _ => (None, None),
            };
            let h = h.or(fh).unwrap_or(3.0);
            let k = k.or(fk).unwrap_or((h * 1000.0).round() as usize);
            default_grid(h, k)?
        }
    };
    let grid = simulate_cdf(&spec, &domain, &config)?;
    eprintln!(
        "simulated {} samples on {} grid points (seed {}, threads {})",
        config.sample_size,
        grid.len(),
        config.seed,
        if config.threads == 0 {
            rayon::current_num_threads()
        } else {
            config.threads
        }
    );
    let mut buf = Vec::new();
    grid.write_csv(
        &mut buf,
        &[
            ("seed", config.seed.to_string()),
            ("n", config.sample_size.to_string()),
            (
                "generator",
                format!(
                    "chacha8, {} samples per stream",
                    crate::montecarlo::BLOCK_SIZE
                ),
            ),
        ],
    )
    .map_err(|e| CliError::Input(e.to_string()))?;
    emit(args.out.as_deref(), &String::from_utf8_lossy(&buf))
}

fn weight_from_arg(arg: &str) -> Result<WeightFn, CliError> {
    if let Some(w) = WeightFn::preset(arg) {
        return Ok(w);
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(CliError::Input(format!(
            "`{arg}` is neither a weight preset (uniform, tail-emphasis) nor a file"
        )));
    }
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {arg}: {e}")))?;
    Ok(WeightFn::from_json(&text)?)
}

pub fn cmd_optimize(args: &OptimizeArgs) -> Result<(), CliError> {
    let problem = ProblemFile::load(&args.file)?;
    let spec = problem.spec()?;
    let truth_file = fs::File::open(&args.truth)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", args.truth.display())))?;
    let truth = CdfGrid::read_csv(truth_file)?;
    let config = TunerConfig {
        upper_limit: args.ul,
        precision: args.prec,
        weight: weight_from_arg(&args.weights)?,
        threads: args.threads,
    };
    let solver = args.solver.config();
    let search = TSetSearch::new(&spec, &truth, &config, &solver)?;
    let best = search.run()?;

    let mut text = String::new();
    text.push_str(&format!(
        "weights                     {}\n",
        config.weight.name()
    ));
    text.push_str(&format!(
        "pairs                       {} evaluated, {} skipped, {} total\n",
        best.evaluated,
        best.skipped,
        config.pair_count()
    ));
    text.push_str(&format!(
        "best score                  {}\n",
        format_sig(best.best_score)
    ));
    text.push_str(&format!(
        "best t pair                 {} {} (indices {} {})\n",
        format_sig(best.best_tpair.t1),
        format_sig(best.best_tpair.t2),
        best.best_indices.0,
        best.best_indices.1
    ));
    text.push_str(&format!(
        "lognormal mean              {}\n",
        format_sig(best.best_result.lognormal_mean)
    ));
    text.push_str(&format!(
        "lognormal variance          {}\n",
        format_sig(best.best_result.lognormal_variance)
    ));
    text.push_str(&format!(
        "normal mu_x                 {}\n",
        format_sig(best.best_result.normal_mu)
    ));
    text.push_str(&format!(
        "normal sigma_x              {}\n",
        format_sig(best.best_result.normal_sigma)
    ));
    let mm = moment_matched(&spec)?;
    let (e, v) = (mm.mean(), mm.variance());
    text.push_str(&format!("moment-matched mean         {}\n", format_sig(e)));
    text.push_str(&format!("moment-matched variance     {}\n", format_sig(v)));
    emit(args.out.as_deref(), &text)
}

pub fn cmd_table2(args: &Table2Args) -> Result<(), CliError> {
    let sim = sim_config(&args.sim, None);
    let solver = args.solver.config();
    solver.validate()?;
    let rows = comparison_table(&args.alpha, &sim, &solver)?;
    let mut text = format!("# seed={}\n# n={}\n", sim.seed, sim.sample_size);
    text.push_str(&comparison_csv(&rows));
    emit(args.out.as_deref(), &text)
}

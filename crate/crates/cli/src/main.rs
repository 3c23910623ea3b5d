use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gsqg::export::{self, Exportable, Format};
use gsqg::field::{build_field, irrotational_field, GridSpec};
use gsqg::kernel_oracle::{oracle_check, QuadratureConfig};
use gsqg::multiplier::{build_table, identity_betas, symbol_identity, Params, DEFAULT_TOL};
use gsqg::solver::{
    classify_regime, regime_map, solution_branch, solve, verify_solution, SolveConfig,
    SolveResult,
};
use gsqg::Error;

const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "gsqg", version, about = "Homogeneous steady states of generalized SQG")]
#[command(args_override_self = true)]
struct Cli {
    /// key=value file whose entries act as flags; command-line flags take precedence
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate the symbol and eigenvalues
    Multiplier(MultiplierArgs),
    /// Compare series coefficients with kernel quadrature (CSV)
    OracleCheck(OracleArgs),
    /// Sweep the product identity of the symbol and its inverse (CSV)
    IdentityCheck(IdentityArgs),
    /// Regime intervals over beta, or the regime of a single beta (JSON)
    Regimes(RegimeArgs),
    /// Compute a critical point (JSON or CSV)
    Solve(SolveArgs),
    /// Continue solutions along a beta grid (JSON)
    Branch(BranchArgs),
    /// Reconstruct psi and omega from a solution
    Field(FieldArgs),
    /// The irrotational family psi = r^-beta sin(beta theta)
    Irrotational(IrrotationalArgs),
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Write data here instead of standard output
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MultiplierArgs {
    #[arg(long)]
    s: f64,
    #[arg(long, allow_hyphen_values = true)]
    beta: f64,
    #[arg(long, default_value_t = 1)]
    m0: usize,
    #[arg(long, default_value_t = 64)]
    mmax: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value = "json", value_parser = ["json", "csv"])]
    format: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long)]
    s: f64,
    #[arg(long, allow_hyphen_values = true)]
    beta: f64,
    #[arg(long, default_value_t = 8)]
    mmax: i64,
    /// Largest accepted relative difference
    #[arg(long, default_value_t = 1e-6)]
    max_rel: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct IdentityArgs {
    #[arg(long)]
    s: f64,
    /// Mode range `lo..hi` (inclusive) or a single mode
    #[arg(long, default_value = "1..16")]
    m: String,
    /// Number of beta values per mode
    #[arg(long, default_value_t = 11)]
    betas: usize,
    /// Distance of the beta sweep from the window ends
    #[arg(long, default_value_t = 0.05)]
    margin: f64,
    /// Largest accepted deviation
    #[arg(long, default_value_t = 1e-8)]
    max_dev: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct RegimeArgs {
    #[arg(long)]
    s: f64,
    #[arg(long)]
    m0: usize,
    /// Classify this beta only
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
struct SolverFlags {
    #[arg(long, default_value_t = SolveConfig::default().m_max)]
    mmax: usize,
    #[arg(long, default_value_t = SolveConfig::default().n_grid)]
    ngrid: usize,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = SolveConfig::default().tol_grad)]
    tol: f64,
    #[arg(long, default_value_t = SolveConfig::default().max_iters)]
    max_iters: usize,
    #[arg(long, default_value_t = SolveConfig::default().epsilon_reg)]
    epsilon_reg: f64,
    /// Seed amplitude; 0 balances the two terms of the energy
    #[arg(long, default_value_t = 0.0)]
    seed_amplitude: f64,
    /// Pseudo-arclength sub-steps between branch points
    #[arg(long, default_value_t = SolveConfig::default().continuation_steps)]
    continuation: usize,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
}

impl SolverFlags {
    fn config(&self) -> SolveConfig {
        SolveConfig {
            m_max: self.mmax,
            n_grid: self.ngrid,
            c: self.c,
            tol_grad: self.tol,
            max_iters: self.max_iters,
            epsilon_reg: self.epsilon_reg,
            seed_amplitude: self.seed_amplitude,
            continuation_steps: self.continuation,
            rng_seed: self.rng_seed,
        }
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    s: f64,
    #[arg(long, allow_hyphen_values = true)]
    beta: f64,
    #[arg(long)]
    m0: usize,
    #[command(flatten)]
    solver: SolverFlags,
    /// Also run the weak-form and refinement checks (report on standard error)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    verify: Option<bool>,
    #[arg(long, default_value = "json", value_parser = ["json", "csv"])]
    format: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct BranchArgs {
    #[arg(long)]
    s: f64,
    #[arg(long)]
    m0: usize,
    /// Comma-separated values, or `lo:hi:count`
    #[arg(long, allow_hyphen_values = true)]
    betas: String,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Clone, Copy)]
struct GridFlags {
    #[arg(long, default_value_t = GridSpec::default().r_min)]
    rmin: f64,
    #[arg(long, default_value_t = GridSpec::default().r_max)]
    rmax: f64,
    #[arg(long, default_value_t = GridSpec::default().n_r)]
    nr: usize,
    #[arg(long, default_value_t = GridSpec::default().n_theta)]
    ntheta: usize,
}

impl GridFlags {
    fn spec(&self) -> GridSpec {
        GridSpec {
            r_min: self.rmin,
            r_max: self.rmax,
            n_r: self.nr,
            n_theta: self.ntheta,
        }
    }
}

#[derive(Args, Debug)]
struct FieldArgs {
    /// Solution JSON written by `solve`; otherwise the solve flags are used
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
    #[arg(long, required_unless_present = "input")]
    s: Option<f64>,
    #[arg(long, allow_hyphen_values = true, required_unless_present = "input")]
    beta: Option<f64>,
    #[arg(long, required_unless_present = "input")]
    m0: Option<usize>,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    grid: GridFlags,
    #[arg(long, default_value = "svg", value_parser = ["json", "csv", "svg", "svg-contours"])]
    format: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct IrrotationalArgs {
    #[arg(long, allow_hyphen_values = true)]
    beta: f64,
    #[command(flatten)]
    grid: GridFlags,
    #[arg(long, default_value = "svg", value_parser = ["json", "csv", "svg", "svg-contours"])]
    format: String,
    #[command(flatten)]
    output: OutputArgs,
}

/// Failures of the command itself, as opposed to library errors.
enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) | Error::Regime(_) | Error::Symmetry(_) => 1,
        Error::Numeric { .. } | Error::Solver(_) | Error::Consistency(_) => 2,
        Error::Io { .. } | Error::Serde(_) => 2,
    }
}

fn emit(output: &OutputArgs, text: &str) -> Outcome {
    match &output.out {
        Some(path) => export::write_text(path, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })?;
        }
    }
    Ok(())
}

fn parse_modes(spec: &str) -> std::result::Result<Vec<i64>, Failure> {
    let bad = || Failure::Usage(format!("invalid mode range {spec:?}"));
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: i64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: i64 = hi.trim_start_matches('=').trim().parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(bad());
        }
        Ok((lo..=hi).collect())
    } else {
        Ok(vec![spec.trim().parse().map_err(|_| bad())?])
    }
}

fn parse_betas(spec: &str) -> std::result::Result<Vec<f64>, Failure> {
    let bad = || Failure::Usage(format!("invalid beta grid {spec:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        return Ok(match n {
            0 => return Err(bad()),
            1 => vec![lo],
            _ => (0..n)
                .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
                .collect(),
        });
    }
    spec.split(',')
        .map(|v| v.trim().parse().map_err(|_| bad()))
        .collect()
}

fn run_multiplier(a: MultiplierArgs) -> Outcome {
    let table = build_table(&Params::new(a.s, a.beta, a.m0)?, a.mmax, a.tol)?;
    let format: Format = a.format.parse()?;
    emit(&a.output, &export::render(Exportable::Table(&table), format)?)
}

fn run_oracle(a: OracleArgs) -> Outcome {
    let rows = oracle_check(a.s, a.beta, a.mmax, &QuadratureConfig::default())?;
    let mut text = String::from("m,oracle,series,rel_diff\n");
    let mut worst: f64 = 0.0;
    for r in &rows {
        text.push_str(&format!(
            "{},{:.16e},{:.16e},{:.3e}\n",
            r.m, r.oracle, r.series, r.rel_diff
        ));
        worst = worst.max(r.rel_diff);
    }
    emit(&a.output, &text)?;
    eprintln!("max relative difference {worst:.3e}");
    if worst > a.max_rel {
        return Err(Error::Consistency(format!(
            "oracle and series differ by {worst:.3e} > {:.1e}",
            a.max_rel
        ))
        .into());
    }
    Ok(())
}

fn run_identity(a: IdentityArgs) -> Outcome {
    let modes = parse_modes(&a.m)?;
    let mut text = String::from("m,beta,product,deviation\n");
    let mut worst: f64 = 0.0;
    for m in modes {
        if m == 0 {
            return Err(Error::Domain("mode 0 has an empty beta window".into()).into());
        }
        for beta in identity_betas(m, a.betas, a.margin) {
            let row = symbol_identity(a.s, beta, m, DEFAULT_TOL)?;
            text.push_str(&format!(
                "{},{:.16e},{:.16e},{:.3e}\n",
                row.m, row.beta, row.product, row.deviation
            ));
            worst = worst.max(row.deviation);
        }
    }
    emit(&a.output, &text)?;
    eprintln!("max deviation {worst:.3e}");
    if worst > a.max_dev {
        return Err(Error::Consistency(format!(
            "identity deviation {worst:.3e} > {:.1e}",
            a.max_dev
        ))
        .into());
    }
    Ok(())
}

fn run_regimes(a: RegimeArgs) -> Outcome {
    let text = match a.beta {
        Some(beta) => export::to_json(&classify_regime(a.s, beta, a.m0)?)?,
        None => export::to_json(&regime_map(a.s, a.m0)?)?,
    };
    emit(&a.output, &text)
}

fn report_verification(res: &SolveResult, cfg: &SolveConfig) -> Outcome {
    let table = build_table(&res.params(), res.m_max, DEFAULT_TOL)?;
    let rep = verify_solution(res, &table, cfg)?;
    eprintln!(
        "weak form {:.3e} (bound {:.3e}); refinement change {:.3e}; decay {:.3} (threshold {:.3}); tail {:.3e}",
        rep.weak_form_residual,
        rep.weak_form_bound,
        rep.refinement_change,
        rep.decay_slope,
        rep.decay_threshold,
        rep.tail_energy_ratio
    );
    if !rep.decay_ok || !rep.tail_ok {
        eprintln!("warning: soft regularity diagnostics not met");
    }
    if !rep.passed() {
        return Err(Error::Consistency("verification failed".into()).into());
    }
    Ok(())
}

fn run_solve(a: SolveArgs) -> Outcome {
    let cfg = a.solver.config();
    let res = solve(a.s, a.beta, a.m0, &cfg)?;
    eprintln!(
        "{:?}: grad_norm {:.3e}, I = {:.12e}, {} iterations",
        res.regime.label, res.grad_norm, res.i_value, res.iterations
    );
    let format: Format = a.format.parse()?;
    emit(&a.output, &export::render(Exportable::Solution(&res), format)?)?;
    if a.verify.unwrap_or(false) {
        report_verification(&res, &cfg)?;
    }
    Ok(())
}

fn run_branch(a: BranchArgs) -> Outcome {
    let grid = parse_betas(&a.betas)?;
    let points = solution_branch(a.s, a.m0, &grid, &a.solver.config())?;
    for p in &points {
        match &p.error {
            None => eprintln!("beta {:+.6}: {:?}", p.beta, p.method),
            Some(e) => eprintln!("beta {:+.6}: failed: {e}", p.beta),
        }
    }
    emit(&a.output, &export::to_json(&points)?)
}

fn run_field(a: FieldArgs) -> Outcome {
    let res: SolveResult = match &a.input {
        Some(path) => export::read_json(path)?,
        None => solve(
            a.s.unwrap_or_default(),
            a.beta.unwrap_or_default(),
            a.m0.unwrap_or_default(),
            &a.solver.config(),
        )?,
    };
    let field = build_field(&res.w, &res.g, res.s, res.beta, &a.grid.spec())?;
    let format: Format = a.format.parse()?;
    emit(&a.output, &export::render(Exportable::Field(&field), format)?)
}

fn run_irrotational(a: IrrotationalArgs) -> Outcome {
    let field = irrotational_field(a.beta, &a.grid.spec())?;
    let format: Format = a.format.parse()?;
    emit(&a.output, &export::render(Exportable::Field(&field), format)?)
}

/// Entries of a `key=value` config file as flags; `#` starts a comment.
fn config_flags(path: &Path) -> std::result::Result<Vec<String>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut flags = vec![];
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Failure::Usage(format!(
                "{}:{}: expected key=value",
                path.display(),
                n + 1
            )));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match value {
            "true" => flags.push(format!("--{key}")),
            "false" => {}
            _ => flags.push(format!("--{key}={value}")),
        }
    }
    Ok(flags)
}

/// Splice config-file flags in right after the subcommand, so that later command-line
/// flags override them.
fn expand_config(argv: Vec<String>) -> std::result::Result<Vec<String>, Failure> {
    let mut config = None;
    let mut rest = vec![];
    let mut it = argv.into_iter();
    let prog = it.next().unwrap_or_else(|| "gsqg".into());
    while let Some(arg) = it.next() {
        if arg == "--config" {
            let Some(path) = it.next() else {
                return Err(Failure::Usage("--config needs a path".into()));
            };
            config = Some(PathBuf::from(path));
        } else if let Some(path) = arg.strip_prefix("--config=") {
            config = Some(PathBuf::from(path));
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else {
        return Ok(std::iter::once(prog).chain(rest).collect());
    };
    let flags = config_flags(&path)?;
    let mut out = vec![prog];
    match rest.iter().position(|a| !a.starts_with('-')) {
        Some(k) => {
            out.extend(rest[..=k].iter().cloned());
            out.extend(flags);
            out.extend(rest[k + 1..].iter().cloned());
        }
        None => out.extend(rest),
    }
    Ok(out)
}

fn init_threads() -> std::result::Result<(), Failure> {
    let Ok(value) = std::env::var("GSQG_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("GSQG_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(format!("cannot size the thread pool: {e}")))
}

fn run(argv: Vec<String>) -> Outcome {
    init_threads()?;
    let argv = expand_config(argv)?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Ok(()),
                _ => Err(Failure::Usage(String::new())),
            };
        }
    };
    match cli.command {
        Command::Multiplier(a) => run_multiplier(a),
        Command::OracleCheck(a) => run_oracle(a),
        Command::IdentityCheck(a) => run_identity(a),
        Command::Regimes(a) => run_regimes(a),
        Command::Solve(a) => run_solve(a),
        Command::Branch(a) => run_branch(a),
        Command::Field(a) => run_field(a),
        Command::Irrotational(a) => run_irrotational(a),
    }
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            if !msg.is_empty() {
                eprintln!("error: {msg}");
            }
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            if let Error::Solver(f) = &e {
                eprintln!("best iterate residual {:.3e}", f.grad_norm);
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

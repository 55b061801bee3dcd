//! The `helper-exp` command line.
//!
//! Defaults are compiled in, an optional `key=value` file given by `--config`
//! overrides them and flags override the file. Every output starts with a `#`
//! header recording the tool version, the command line (without `--threads`),
//! the seed and the source checksum. Exit codes: 0 success, 1 input error,
//! 2 enumeration budget exceeded, 3 optimizer did not converge (output is still
//! written and flagged).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::bounds::{self, RhoEstimate, RhoOptions};
use crate::error::{Error, Result};
use crate::exponent::{ExponentOptions, ExponentSolver};
use crate::fmt::sig;
use crate::oracle::{verify_theorem3, CodeSpec, OracleMode};
use crate::prob::{parse_source, JointSource, SourceFile};
use crate::region::{self, AuxChannel, Membership, MuGrid, RatePoint, SandwichConstants};
use crate::simplex::OptimizerOptions;
use crate::wyner::{self, CodeSpec3, ExponentSolver3, JointSource3, RatePoint3, WynerForm};

const TOOL: &str = "helper-exp";
const THREADS_ENV: &str = "HELPER_EXP_THREADS";
const DEFAULT_SEED: u64 = 0x5eed_0001;

#[derive(Debug, Parser)]
#[command(name = "helper-exp", version, about = "Rate regions, strong-converse exponents and optimal-code checks for one-helper source coding")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Plain-text `key=value` file; keys are long flag names.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads (default: HELPER_EXP_THREADS, then all cores). Never changes results.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Units of rates and exponents in the output; inputs are always nats.
    #[arg(long, global = true, value_enum)]
    units: Option<Units>,
    /// Seed of every randomized search, decimal or 0x-hex.
    #[arg(long, global = true, value_parser = parse_seed)]
    seed: Option<u64>,
    /// Write the result here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Points of the μ grid (hyperplanes for `region`, tilt grid for `exponent`).
    #[arg(long = "mu-grid", global = true)]
    mu_grid: Option<usize>,
    /// Extra μ points placed around the worst hyperplane in membership tests.
    #[arg(long = "mu-refine", global = true)]
    mu_refine: Option<usize>,
    /// Points of the α grid in the exponent search.
    #[arg(long = "alpha-grid", global = true)]
    alpha_grid: Option<usize>,
    /// Points of the γ grid (three-source commands).
    #[arg(long = "gamma-grid", global = true)]
    gamma_grid: Option<usize>,
    /// Points of the log-spaced λ grid.
    #[arg(long = "lambda-grid", global = true)]
    lambda_grid: Option<usize>,
    /// Smallest λ searched.
    #[arg(long = "lambda-min", global = true)]
    lambda_min: Option<f64>,
    /// Largest λ searched; a maximum found here is flagged.
    #[arg(long = "lambda-max", global = true)]
    lambda_max: Option<f64>,
    /// Levels of local grid refinement in the exponent search.
    #[arg(long, global = true)]
    refine: Option<usize>,
    /// Random starts of each simplex minimization.
    #[arg(long, global = true)]
    starts: Option<usize>,
    /// Iteration cap of each simplex minimization.
    #[arg(long = "max-iter", global = true)]
    max_iter: Option<usize>,
    /// Stop a minimization once it improves by less than this over 50 iterations.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Units {
    #[default]
    Nats,
    Bits,
}

impl Units {
    /// Divisor turning nats into this unit.
    pub fn scale(self) -> f64 {
        match self {
            Units::Nats => 1.0,
            Units::Bits => std::f64::consts::LN_2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Units::Nats => "nats",
            Units::Bits => "bits",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormArg {
    /// Formulas made consistent with the two-source case.
    Consistent,
    /// Formulas as printed.
    Strict,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Boundary of the rate region as CSV, or membership of one point.
    Region(RegionArgs),
    /// The exponent F(R1,R2) and its maximizing tilt parameters.
    Exponent(PointArgs),
    /// Every grid slice of the exponent search as CSV.
    Surface(PointArgs),
    /// Sandwich constants, ρ, κ_n and positivity floors.
    Bounds(BoundsArgs),
    /// The variance proxy ρ and the search that produced it.
    Rho(SourceArgs),
    /// Optimal correct-decoding probability against 5·exp(−nF).
    Verify(VerifyArgs),
    /// Three-source commands.
    #[command(subcommand)]
    Wyner(WynerCommand),
}

#[derive(Debug, Subcommand)]
enum WynerCommand {
    /// Boundary of the three-source region over (μ, γ) as CSV, or membership of one point.
    Region(Region3Args),
    /// The exponent F(R1,R2,R3) and its maximizing tilt parameters.
    Exponent(Point3Args),
    /// Optimal correct-decoding probability against 7·exp(−nF).
    Verify(Verify3Args),
    /// Sandwich constants, ρ, κ_n and positivity floors for three sources.
    Bounds(BoundsArgs),
}

#[derive(Debug, Args)]
struct SourceArgs {
    /// Source pmf file.
    #[arg(long)]
    source: PathBuf,
}

#[derive(Debug, Args)]
struct RegionArgs {
    /// Source pmf file.
    #[arg(long)]
    source: PathBuf,
    /// With --r2, test membership of (r1, r2) instead of tracing the boundary.
    #[arg(long, requires = "r2")]
    r1: Option<f64>,
    /// Rate of the encoder of Y, with --r1.
    #[arg(long, requires = "r1")]
    r2: Option<f64>,
}

#[derive(Debug, Args)]
struct PointArgs {
    /// Source pmf file.
    #[arg(long)]
    source: PathBuf,
    /// Helper rate in nats.
    #[arg(long)]
    r1: f64,
    /// Rate of the encoder of Y in nats.
    #[arg(long)]
    r2: f64,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    /// Source pmf file.
    #[arg(long)]
    source: PathBuf,
    /// Blocklengths for κ_n.
    #[arg(long = "n-list", value_delimiter = ',', default_value = "100,1000,1000000")]
    n_list: Vec<u64>,
    /// Margins τ (nats) for the positivity floor.
    #[arg(long = "tau-list", value_delimiter = ',', default_value = "0.01,0.1,0.3")]
    tau_list: Vec<f64>,
    /// Error probability ε for κ_n.
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Exponent slack δ in κ_n and the floor.
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Formula variant of ω and the slice.
    #[arg(long, value_enum, default_value = "consistent")]
    form: FormArg,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Source pmf file.
    #[arg(long)]
    source: PathBuf,
    /// Blocklength.
    #[arg(long)]
    n: usize,
    /// Message-set size of the helper.
    #[arg(long)]
    m1: usize,
    /// Message-set size of the encoder of Y.
    #[arg(long)]
    m2: usize,
    /// Best of this many random codes instead of exhaustive enumeration.
    #[arg(long)]
    sampled: Option<usize>,
    /// One CSV row instead of a key: value report.
    #[arg(long)]
    csv: bool,
}

#[derive(Debug, Args)]
struct Region3Args {
    /// Source pmf file.
    #[arg(long)]
    source: PathBuf,
    /// With --r2 and --r3, test membership of the rate triple.
    #[arg(long, requires_all = ["r2", "r3"])]
    r1: Option<f64>,
    /// Rate of the encoder of Y, with --r1 and --r3.
    #[arg(long, requires_all = ["r1", "r3"])]
    r2: Option<f64>,
    /// Rate of the encoder of Z, with --r1 and --r2.
    #[arg(long, requires_all = ["r1", "r2"])]
    r3: Option<f64>,
}

#[derive(Debug, Args)]
struct Point3Args {
    /// Source pmf file.
    #[arg(long)]
    source: PathBuf,
    /// Helper rate in nats.
    #[arg(long)]
    r1: f64,
    /// Rate of the encoder of Y in nats.
    #[arg(long)]
    r2: f64,
    /// Rate of the encoder of Z in nats.
    #[arg(long)]
    r3: f64,
    /// Search only this γ.
    #[arg(long)]
    gamma: Option<f64>,
    /// Formula variant of ω and the slice.
    #[arg(long, value_enum, default_value = "consistent")]
    form: FormArg,
}

#[derive(Debug, Args)]
struct Verify3Args {
    /// Source pmf file.
    #[arg(long)]
    source: PathBuf,
    /// Blocklength.
    #[arg(long)]
    n: usize,
    /// Message-set size of the helper.
    #[arg(long)]
    m1: usize,
    /// Message-set size of the encoder of Y.
    #[arg(long)]
    m2: usize,
    /// Message-set size of the encoder of Z.
    #[arg(long)]
    m3: usize,
    #[arg(long)]
    sampled: Option<usize>,
    /// One CSV row instead of a key: value report.
    #[arg(long)]
    csv: bool,
    /// Formula variant of ω and the slice.
    #[arg(long, value_enum, default_value = "consistent")]
    form: FormArg,
}

fn parse_seed(s: &str) -> std::result::Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(&hex.replace('_', ""), 16),
        None => s.replace('_', "").parse(),
    };
    parsed.map_err(|e| format!("bad seed `{s}`: {e}"))
}

/// Settings of one run after defaults, config file and flags are merged.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: String,
    pub source: Option<PathBuf>,
    pub mu_grid: MuGrid,
    pub gamma_points: usize,
    pub exponent: ExponentOptions,
    pub optimizer: OptimizerOptions,
    pub rho: RhoOptions,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub units: Units,
    /// `0` means all cores.
    pub threads: usize,
}

impl RunConfig {
    fn from_globals(g: &GlobalArgs, command: String, source: Option<PathBuf>) -> Result<Self> {
        let seed = g.seed.unwrap_or(DEFAULT_SEED);
        let mut optimizer = OptimizerOptions::default().with_seed(seed);
        let mut exponent = ExponentOptions::default();
        exponent.inner.seed = seed;
        exponent.anchor.seed = seed;
        if let Some(s) = g.starts {
            optimizer.starts = s;
            exponent.inner.starts = s;
            exponent.anchor.starts = s;
        }
        for o in [&mut optimizer, &mut exponent.inner, &mut exponent.anchor] {
            if let Some(m) = g.max_iter {
                o.max_iter = m;
            }
            if let Some(t) = g.tol {
                o.tol = t;
            }
        }
        let mut mu_grid = MuGrid::default();
        if let Some(m) = g.mu_grid {
            mu_grid.points = at_least_two("mu-grid", m)?;
            exponent.mu_points = m;
        }
        if let Some(r) = g.mu_refine {
            mu_grid.refine = r;
        }
        if let Some(a) = g.alpha_grid {
            exponent.alpha_points = at_least_two("alpha-grid", a)?;
        }
        let gamma_points = at_least_two("gamma-grid", g.gamma_grid.unwrap_or(exponent.gamma_points))?;
        exponent.gamma_points = gamma_points;
        if let Some(l) = g.lambda_grid {
            exponent.lambda_points = at_least_two("lambda-grid", l)?;
        }
        if let Some(l) = g.lambda_min {
            exponent.lambda_min = l;
        }
        if let Some(l) = g.lambda_max {
            exponent.lambda_max = l;
        }
        if !(exponent.lambda_min > 0.0 && exponent.lambda_min < exponent.lambda_max && exponent.lambda_max.is_finite()) {
            return Err(Error::Domain(format!(
                "need 0 < lambda-min < lambda-max, got {} and {}",
                exponent.lambda_min, exponent.lambda_max
            )));
        }
        if let Some(r) = g.refine {
            exponent.refine_levels = r;
        }
        let rho = RhoOptions { seed: seed.wrapping_add(1), ..RhoOptions::default() };
        let threads = match g.threads {
            Some(t) => t,
            None => match std::env::var(THREADS_ENV) {
                Ok(v) => v.trim().parse().map_err(|_| Error::Domain(format!("{THREADS_ENV} = `{v}` is not a thread count")))?,
                Err(_) => 0,
            },
        };
        Ok(RunConfig {
            command,
            source,
            mu_grid,
            gamma_points,
            exponent,
            optimizer,
            rho,
            seed,
            out: g.out.clone(),
            units: g.units.unwrap_or_default(),
            threads,
        })
    }
}

fn at_least_two(name: &str, v: usize) -> Result<usize> {
    if v < 2 {
        return Err(Error::Domain(format!("{name} must be at least 2, got {v}")));
    }
    Ok(v)
}

/// What a command produced.
struct Output {
    body: String,
    /// Source checksum for the header.
    checksum: String,
    converged: bool,
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn run<I: IntoIterator<Item = String>>(argv: I) -> i32 {
    let argv: Vec<String> = argv.into_iter().collect();
    let argv = match with_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{TOOL}: error: {e}");
            return 1;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (name, source) = describe(&cli.command);
    let cfg = match RunConfig::from_globals(&cli.global, name, source) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{TOOL}: error: cannot start worker pool: {e}");
            return 1;
        }
    };
    let result = pool.install(|| execute(&cli.command, &cfg));
    match result {
        Ok(out) => {
            let text = format!("{}{}", header(&argv, &cfg, &out), out.body);
            let written = match &cfg.out {
                Some(path) => std::fs::write(path, &text).map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => match std::io::Write::write_all(&mut std::io::stdout().lock(), text.as_bytes()) {
                    // A closed pipe (e.g. `| head`) is the reader's choice, not an error.
                    Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(format!("cannot write output: {e}")),
                    _ => Ok(()),
                },
            };
            if let Err(msg) = written {
                eprintln!("{TOOL}: error: {msg}");
                return 1;
            }
            if out.converged {
                0
            } else {
                eprintln!("{TOOL}: warning: an optimizer hit its iteration cap; values are the best found");
                3
            }
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> i32 {
    eprintln!("{TOOL}: error: {e}");
    match e {
        Error::BudgetExceeded { .. } => 2,
        _ => 1,
    }
}

/// Appends `--key value` for every config-file entry not given on the command line.
fn with_config(mut argv: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Io(format!("cannot read config {path}: {e}")))?;
    let known = long_flags();
    let given: BTreeSet<String> = argv
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| Error::Io(format!("{path}: line {}: {msg}", i + 1));
        let (key, value) = line.split_once('=').ok_or_else(|| bad(format!("expected key=value, found `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if key == "config" || !known.contains(key) {
            return Err(bad(format!("unknown key `{key}`")));
        }
        if given.contains(key) {
            continue;
        }
        match value {
            "true" => argv.push(format!("--{key}")),
            "false" => {}
            _ => argv.push(format!("--{key}={value}")),
        }
    }
    Ok(argv)
}

fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

fn long_flags() -> BTreeSet<String> {
    fn walk(cmd: &clap::Command, out: &mut BTreeSet<String>) {
        for a in cmd.get_arguments() {
            if let Some(l) = a.get_long() {
                out.insert(l.to_string());
            }
        }
        for s in cmd.get_subcommands() {
            walk(s, out);
        }
    }
    let mut out = BTreeSet::new();
    walk(&Cli::command(), &mut out);
    out.remove("help");
    out.remove("version");
    out
}

fn describe(cmd: &Command) -> (String, Option<PathBuf>) {
    match cmd {
        Command::Region(a) => ("region".into(), Some(a.source.clone())),
        Command::Exponent(a) => ("exponent".into(), Some(a.source.clone())),
        Command::Surface(a) => ("surface".into(), Some(a.source.clone())),
        Command::Bounds(a) => ("bounds".into(), Some(a.source.clone())),
        Command::Rho(a) => ("rho".into(), Some(a.source.clone())),
        Command::Verify(a) => ("verify".into(), Some(a.source.clone())),
        Command::Wyner(w) => match w {
            WynerCommand::Region(a) => ("wyner region".into(), Some(a.source.clone())),
            WynerCommand::Exponent(a) => ("wyner exponent".into(), Some(a.source.clone())),
            WynerCommand::Verify(a) => ("wyner verify".into(), Some(a.source.clone())),
            WynerCommand::Bounds(a) => ("wyner bounds".into(), Some(a.source.clone())),
        },
    }
}

fn header(argv: &[String], cfg: &RunConfig, out: &Output) -> String {
    let mut shown = vec![TOOL.to_string()];
    let mut skip = false;
    for a in argv.iter().skip(1) {
        if skip {
            skip = false;
        } else if a == "--threads" {
            skip = true;
        } else if !a.starts_with("--threads=") {
            shown.push(a.clone());
        }
    }
    let mut h = String::new();
    let _ = writeln!(h, "# {TOOL} {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(h, "# command: {}", shown.join(" "));
    let _ = writeln!(h, "# seed: {:#x}", cfg.seed);
    let _ = writeln!(h, "# source sha256: {}", out.checksum);
    let _ = writeln!(h, "# units: {}", cfg.units.name());
    if !out.converged {
        let _ = writeln!(h, "# warning: nonconverged optimizer; values are the best found");
    }
    h
}

fn load(path: &PathBuf) -> Result<SourceFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_source(&text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load2(path: &PathBuf) -> Result<JointSource> {
    match load(path)? {
        SourceFile::Two(s) => Ok(s),
        SourceFile::Three(_) => {
            Err(Error::Dimension(format!("{} holds a three-variable source; use the wyner commands", path.display())))
        }
    }
}

fn load3(path: &PathBuf) -> Result<JointSource3> {
    match load(path)? {
        SourceFile::Three(s) => Ok(s),
        SourceFile::Two(_) => Err(Error::Dimension(format!("{} holds a two-variable source", path.display()))),
    }
}

fn form(f: FormArg) -> WynerForm {
    match f {
        FormArg::Consistent => WynerForm::Consistent,
        FormArg::Strict => WynerForm::Strict,
    }
}

fn oracle_mode(sampled: Option<usize>, seed: u64) -> OracleMode {
    match sampled {
        Some(samples) => OracleMode::Sampled { seed, samples },
        None => OracleMode::Exhaustive,
    }
}

fn execute(cmd: &Command, cfg: &RunConfig) -> Result<Output> {
    let u = cfg.units.scale();
    match cmd {
        Command::Region(a) => {
            let src = load2(&a.source)?;
            let checksum = src.checksum();
            if let (Some(r1), Some(r2)) = (a.r1, a.r2) {
                let m = region::region_membership(&src, RatePoint::new(r1, r2)?, cfg.mu_grid, &cfg.optimizer)?;
                return Ok(Output { body: membership_text(&m, u), checksum, converged: true });
            }
            let curve = region::trace_boundary(&src, cfg.mu_grid, &cfg.optimizer)?;
            Ok(Output { body: curve.to_csv(u), checksum, converged: curve.converged })
        }
        Command::Exponent(a) => {
            let src = load2(&a.source)?;
            let f = ExponentSolver::new(&src, cfg.exponent.clone()).exponent(RatePoint::new(a.r1, a.r2)?);
            let mut body = String::new();
            let _ = writeln!(body, "F = {}", sig(f.value / u));
            let _ = writeln!(body, "argmax alpha = {}, mu = {}, lambda = {}", sig(f.argmax.alpha), sig(f.argmax.mu), sig(f.argmax.lambda));
            exponent_notes(&mut body, f.cells_evaluated, f.lambda_at_cap);
            Ok(Output { body, checksum: src.checksum(), converged: f.converged })
        }
        Command::Surface(a) => {
            let src = load2(&a.source)?;
            let s = ExponentSolver::new(&src, cfg.exponent.clone()).surface(RatePoint::new(a.r1, a.r2)?);
            let converged = s.result.converged;
            Ok(Output { body: s.to_csv(u), checksum: src.checksum(), converged })
        }
        Command::Rho(a) => {
            let src = load2(&a.source)?;
            let r = bounds::rho(&src, &cfg.rho);
            Ok(Output { body: rho_text(&r, u), checksum: src.checksum(), converged: true })
        }
        Command::Bounds(a) => {
            let src = load2(&a.source)?;
            let consts = region::sandwich_constants(src.nx(), src.ny())?;
            let r = bounds::rho(&src, &cfg.rho);
            let body = bounds_text(a, &consts, &r, u, |n| bounds::kappa_n(n, a.eps, a.delta, r.value))?;
            Ok(Output { body, checksum: src.checksum(), converged: true })
        }
        Command::Verify(a) => {
            let src = load2(&a.source)?;
            let spec = CodeSpec::new(a.n, a.m1, a.m2)?;
            let (r1, r2) = spec.rates();
            let f = ExponentSolver::new(&src, cfg.exponent.clone()).exponent(RatePoint::new(r1, r2)?);
            let rep = verify_theorem3(&src, spec, f.value, oracle_mode(a.sampled, cfg.seed))?;
            let body = if a.csv { rep.to_csv(u) } else { rep.to_text(u) };
            Ok(Output { body, checksum: src.checksum(), converged: f.converged })
        }
        Command::Wyner(w) => execute_wyner(w, cfg),
    }
}

fn execute_wyner(cmd: &WynerCommand, cfg: &RunConfig) -> Result<Output> {
    let u = cfg.units.scale();
    match cmd {
        WynerCommand::Region(a) => {
            let src = load3(&a.source)?;
            let checksum = src.checksum();
            if let (Some(r1), Some(r2), Some(r3)) = (a.r1, a.r2, a.r3) {
                let pt = RatePoint3::new(r1, r2, r3)?;
                let m = wyner::region_membership3(&src, pt, cfg.mu_grid, cfg.gamma_points, &cfg.optimizer)?;
                return Ok(Output { body: membership_text(&m, u), checksum, converged: true });
            }
            let curve = wyner::trace_boundary3(&src, cfg.mu_grid, cfg.gamma_points, &cfg.optimizer);
            Ok(Output { body: curve.to_csv(u), checksum, converged: curve.converged })
        }
        WynerCommand::Exponent(a) => {
            let src = load3(&a.source)?;
            let pt = RatePoint3::new(a.r1, a.r2, a.r3)?;
            let solver = match a.gamma {
                Some(g) => ExponentSolver3::with_fixed_gamma(&src, cfg.exponent.clone(), form(a.form), g)?,
                None => ExponentSolver3::new(&src, cfg.exponent.clone(), form(a.form)),
            };
            let f = solver.exponent(pt);
            let t = f.argmax;
            let mut body = String::new();
            let _ = writeln!(body, "F = {}", sig(f.value / u));
            let _ = writeln!(
                body,
                "argmax alpha = {}, mu = {}, gamma = {}, lambda = {}",
                sig(t.alpha),
                sig(t.mu),
                sig(t.gamma),
                sig(t.lambda)
            );
            exponent_notes(&mut body, f.cells_evaluated, f.lambda_at_cap);
            Ok(Output { body, checksum: src.checksum(), converged: f.converged })
        }
        WynerCommand::Verify(a) => {
            let src = load3(&a.source)?;
            let spec = CodeSpec3::new(a.n, a.m1, a.m2, a.m3)?;
            let f = ExponentSolver3::new(&src, cfg.exponent.clone(), form(a.form)).exponent(spec.rates());
            let rep = wyner::verify_theorem6(&src, spec, f.value, oracle_mode(a.sampled, cfg.seed))?;
            let body = if a.csv { rep.to_csv(u) } else { rep.to_text(u) };
            Ok(Output { body, checksum: src.checksum(), converged: f.converged })
        }
        WynerCommand::Bounds(a) => {
            let src = load3(&a.source)?;
            let consts = wyner::sandwich_constants3(src.nx(), src.ny(), src.nz())?;
            let r = wyner::rho3(&src, &cfg.rho, form(a.form));
            let body = bounds_text(a, &consts, &r, u, |n| wyner::kappa3_n(n, a.eps, a.delta, r.value))?;
            Ok(Output { body, checksum: src.checksum(), converged: true })
        }
    }
}

fn exponent_notes(body: &mut String, cells: usize, at_cap: bool) {
    let _ = writeln!(body, "cells evaluated = {cells}");
    if at_cap {
        let _ = writeln!(body, "note: best slice at the largest lambda searched; F may be larger");
    }
    let _ = writeln!(body, "note: F is the best slice over a finite search set, a lower bound on the supremum");
}

fn membership_text(m: &Membership, u: f64) -> String {
    match m {
        Membership::Inside => "inside\n".into(),
        Membership::Outside { margin, mu } => format!("outside\nmargin = {}\nmu = {}\n", sig(margin / u), sig(*mu)),
    }
}

fn channel_text(q: &AuxChannel) -> String {
    let row = |v: &[f64]| v.iter().map(|&x| sig(x)).collect::<Vec<_>>().join(" ");
    let mut s = format!("q_U = [{}]\n", row(q.q_u().probs()));
    for (k, r) in q.q_x_given_u().iter().enumerate() {
        let _ = writeln!(s, "q_X|U={k} = [{}]", row(r.probs()));
    }
    s
}

fn rho_text(r: &RhoEstimate, u: f64) -> String {
    let mut s = format!("rho >= {}\n", sig(r.value / (u * u)));
    let _ = write!(s, "argmax alpha = {}, mu = {}", sig(r.alpha), sig(r.mu));
    if let Some(g) = r.gamma {
        let _ = write!(s, ", gamma = {}", sig(g));
    }
    s.push('\n');
    s.push_str(&channel_text(&r.argmax));
    let _ = writeln!(s, "search: {}", r.search_spec);
    s
}

fn bounds_text(
    a: &BoundsArgs,
    consts: &SandwichConstants,
    r: &RhoEstimate,
    u: f64,
    kappa: impl Fn(u64) -> Result<f64>,
) -> Result<String> {
    let mut s = String::new();
    let _ = writeln!(s, "alpha0 = {}", sig(consts.alpha0));
    let _ = writeln!(s, "c1 = {}", sig(consts.c1));
    let _ = writeln!(s, "c2 = {}", sig(consts.c2));
    let ln_nu = bounds::nu_threshold_ln(consts, a.delta);
    let _ = writeln!(s, "nu = exp({})  (delta = {})", sig(ln_nu), sig(a.delta));
    s.push_str(&rho_text(r, u));
    let _ = writeln!(s, "\nn,kappa_n  (eps = {}, delta = {})", sig(a.eps), sig(a.delta));
    for &n in &a.n_list {
        let _ = writeln!(s, "{n},{}", sig(kappa(n)? / u));
    }
    let _ = writeln!(s, "\ntau,floor  (delta = {})", sig(a.delta));
    for &tau in &a.tau_list {
        let floor = if r.value > 0.0 { sig(bounds::positivity_floor(r.value, tau, a.delta)? / u) } else { "n/a".into() };
        let _ = writeln!(s, "{},{floor}", sig(tau / u));
    }
    Ok(s)
}

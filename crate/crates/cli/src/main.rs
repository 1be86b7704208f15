//! `outlier-ldp`: file-driven experiments on the smallest eigenvalue of
//! deformed GOE matrices, emitting CSV or JSON.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use outlier_ldp::error::Error;
use outlier_ldp::free_conv::FreeConvContext;
use outlier_ldp::measure::{AtomicMeasure, MeasureFile};
use outlier_ldp::prior::{goe_rate, maida_rate, mckenna_rate};
use outlier_ldp::rate::{DeformedModel, ExtendedReal};
use outlier_ldp::rmt::{
    convergence_check, default_window, dirichlet_law_check, ldp_tail_estimate, GoeSpec,
};
use outlier_ldp::variational::{c_t, fixed_point_residual, selberg_log_partition, selberg_ratio};

use output::{Cell, Table};

const AFTER_HELP: &str = "\
CSV headers:
  rate      lambda,rate,branch
  density   x,density
  compare   x,prior_value,rate_value,abs_diff

Exit codes: 0 success, 2 invalid configuration, 3 computation error.
Errors are reported on stderr as JSON {\"error\": kind, \"message\": text}.";

#[derive(Debug, Parser)]
#[command(name = "outlier-ldp", version, about, after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    io: OutputArgs,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Write the result to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format of tabular results.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Significant digits of every emitted number.
    #[arg(long, global = true, default_value_t = 12, value_parser = clap::value_parser!(u32).range(1..=17))]
    precision: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rate function on a grid.
    Rate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, allow_hyphen_values = true)]
        grid: Grid,
    },
    /// Shock point and left edge of the free convolution.
    Edge {
        #[command(flatten)]
        base: BaseArgs,
    },
    /// Outlier location, edge, limit of the smallest eigenvalue and regime.
    Bbp {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Density of the free convolution with the semicircle law.
    Density {
        #[command(flatten)]
        base: BaseArgs,
        /// Number of sample points.
        #[arg(long, default_value_t = 400)]
        points: usize,
    },
    /// Check of the variational fixed-point equation at one point.
    Fixedpoint {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        /// Random-restart descents used to search for a lower value.
        #[arg(long, default_value_t = 32)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare the rate function with an independent closed form.
    Compare {
        #[arg(value_enum)]
        which: Prior,
        /// Measure file (mckenna only).
        #[arg(long)]
        measure: Option<PathBuf>,
        /// Outlier (maida only).
        #[arg(long, allow_hyphen_values = true)]
        outlier: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        grid: Grid,
    },
    /// Monte Carlo estimate of the probability of a window around a point.
    Mc {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        mc: McArgs,
        /// Window center.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "target_rate")]
        x: Option<f64>,
        /// Place the window at the point left of the limit with this rate.
        #[arg(long, required_unless_present = "x")]
        target_rate: Option<f64>,
        /// Window half-width; defaults to 0.05·(edge − limit + 1).
        #[arg(long)]
        window: Option<f64>,
        /// Matrix size.
        #[arg(long)]
        n: usize,
    },
    /// Log partition function of the GOE eigenvalue law and its normalized ratio.
    Selberg {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
    },
    /// Eigenvector masses of the reference GOE against the Dirichlet law.
    DirichletCheck {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        mc: McArgs,
        #[arg(long)]
        n: usize,
    },
    /// Sample means of the smallest eigenvalue for several matrix sizes.
    Converge {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        mc: McArgs,
        /// Comma-separated matrix sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Prior {
    /// Rank-one perturbation of GOE(½); needs --outlier.
    Maida,
    /// No outlier, t = 1; needs --measure.
    Mckenna,
    /// Plain GOE of variance one.
    Goe,
}

#[derive(Debug, Args)]
struct BaseArgs {
    /// Measure file (JSON).
    #[arg(long)]
    measure: PathBuf,
    /// Variance of the GOE part.
    #[arg(long)]
    t: f64,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[command(flatten)]
    base: BaseArgs,
    /// Isolated eigenvalue of the deterministic part; defaults to the left
    /// end of the measure support (no outlier).
    #[arg(long, allow_hyphen_values = true)]
    outlier: Option<f64>,
}

#[derive(Debug, Args)]
struct McArgs {
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

/// `min:max:count` with `count ≥ 2`.
#[derive(Debug, Clone, Copy)]
struct Grid {
    min: f64,
    max: f64,
    count: usize,
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [min, max, count] = parts.as_slice() else {
            return Err(format!("grid must be min:max:count, got {s:?}"));
        };
        let min: f64 = min.trim().parse().map_err(|_| format!("bad grid minimum {min:?}"))?;
        let max: f64 = max.trim().parse().map_err(|_| format!("bad grid maximum {max:?}"))?;
        let count: usize = count.trim().parse().map_err(|_| format!("bad grid count {count:?}"))?;
        if count < 2 || !(min < max) || !min.is_finite() || !max.is_finite() {
            return Err(format!("grid needs finite min < max and count >= 2, got {s:?}"));
        }
        Ok(Grid { min, max, count })
    }
}

impl Grid {
    fn points(&self) -> Vec<f64> {
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.max } else { self.min + step * i as f64 })
            .collect()
    }
}

/// Failure of a run, mapped to the process exit code.
#[derive(Debug)]
enum Failure {
    Config { kind: &'static str, message: String },
    Compute(Error),
}

impl Failure {
    fn config(kind: &'static str, message: impl Into<String>) -> Self {
        Failure::Config { kind, message: message.into() }
    }

    fn report(&self) -> (u8, serde_json::Value) {
        match self {
            Failure::Config { kind, message } => (2, json!({ "error": kind, "message": message })),
            Failure::Compute(e) => (3, json!({ "error": error_kind(e), "message": e.to_string() })),
        }
    }
}

/// Errors raised while validating inputs are configuration errors.
fn invalid(e: Error) -> Failure {
    Failure::config(error_kind(&e), e.to_string())
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidMeasure(_) => "InvalidMeasure",
        Error::AtomCollision { .. } => "AtomCollision",
        Error::UnboundedQuantile(_) => "UnboundedQuantile",
        Error::DomainAboveSupport { .. } => "DomainAboveSupport",
        Error::AboveEdge { .. } => "AboveEdge",
        Error::BelowBranch { .. } => "BelowBranch",
        Error::OutlierAboveSupport { .. } => "OutlierAboveSupport",
        Error::OutlierAtEdge => "OutlierAtEdge",
        Error::AtBranchPoint { .. } => "AtBranchPoint",
        Error::ThetaOutOfRange { .. } => "ThetaOutOfRange",
        Error::DegenerateDirection { .. } => "DegenerateDirection",
        Error::InvalidArgument(_) => "InvalidArgument",
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Compute(e)
    }
}

fn load_measure(path: &Path) -> Result<AtomicMeasure, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config("Io", format!("cannot read {}: {e}", path.display())))?;
    let file: MeasureFile = serde_json::from_str(&text)
        .map_err(|e| Failure::config("InvalidMeasure", format!("{}: {e}", path.display())))?;
    file.into_measure().map_err(invalid)
}

fn load_context(base: &BaseArgs) -> Result<FreeConvContext, Failure> {
    FreeConvContext::new(load_measure(&base.measure)?, base.t).map_err(invalid)
}

fn load_model(args: &ModelArgs) -> Result<DeformedModel, Failure> {
    let nu = load_measure(&args.base.measure)?;
    let outlier = args.outlier.unwrap_or_else(|| nu.support_edge());
    DeformedModel::new(nu, args.base.t, outlier).map_err(invalid)
}

fn spec(n: usize, t: f64, seed: u64) -> Result<GoeSpec, Failure> {
    GoeSpec::new(n, t, seed).map_err(invalid)
}

/// Result of a subcommand before formatting.
enum Artifact {
    Table(Table),
    Json(serde_json::Value),
}

fn to_json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn extended(v: ExtendedReal) -> Cell {
    match v {
        ExtendedReal::Finite(x) => Cell::Num(x),
        ExtendedReal::PosInfinity => Cell::Num(f64::INFINITY),
    }
}

fn run(command: &Command) -> Result<Artifact, Failure> {
    match command {
        Command::Rate { model, grid } => {
            let model = load_model(model)?;
            let curve = model.rate_curve(grid.min, grid.max, grid.count).map_err(invalid)?;
            let mut table = Table::new(&["lambda", "rate", "branch"]);
            for ((l, v), b) in curve.grid.iter().zip(&curve.values).zip(&curve.branch) {
                let branch = to_json(b).as_str().unwrap_or_default().to_owned();
                table.push(vec![Cell::Num(*l), extended(*v), Cell::Text(branch)]);
            }
            Ok(Artifact::Table(table))
        }
        Command::Edge { base } => {
            let ctx = load_context(base)?;
            Ok(Artifact::Json(json!({
                "shock_point": ctx.shock_point(),
                "edge": ctx.edge(),
                "support_edge": ctx.nu().support_edge(),
            })))
        }
        Command::Bbp { model } => {
            let model = load_model(model)?;
            let rho = model.rho().ok();
            Ok(Artifact::Json(json!({
                "rho": rho,
                "edge": model.ctx().edge(),
                "ell_lambda": model.limit_smallest(),
                "regime": to_json(&model.regime()),
            })))
        }
        Command::Density { base, points } => {
            let ctx = load_context(base)?;
            let curve = ctx.density_curve(*points).map_err(invalid)?;
            let mut table = Table::new(&["x", "density"]);
            for (x, d) in &curve.points {
                table.push(vec![Cell::Num(*x), Cell::Num(*d)]);
            }
            Ok(Artifact::Table(table))
        }
        Command::Fixedpoint { model, lambda, restarts, seed } => {
            let model = load_model(model)?;
            let r = fixed_point_residual(&model, *lambda, *restarts, *seed)?;
            Ok(Artifact::Json(json!({
                "lambda": r.lambda,
                "rate": r.rate,
                "residual": r.residual,
                "argmin_y": r.argmin_y.as_slice(),
                "phi_at_argmin": r.phi_at_argmin,
            })))
        }
        Command::Compare { which, measure, outlier, grid } => compare(*which, measure.as_deref(), *outlier, grid),
        Command::Mc { model, mc, x, target_rate, window, n } => {
            let model = load_model(model)?;
            let x = match (x, target_rate) {
                (Some(x), _) => *x,
                (None, Some(r)) => model.point_with_rate(*r).map_err(invalid)?,
                (None, None) => return Err(Failure::config("InvalidArgument", "need --x or --target-rate")),
            };
            let window = window.unwrap_or_else(|| default_window(&model));
            spec(*n, model.t(), mc.seed)?;
            let report = ldp_tail_estimate(&model, *n, x, window, mc.samples, mc.seed, mc.workers)?;
            Ok(Artifact::Json(to_json(&report)))
        }
        Command::Selberg { n, t } => {
            if !(*t > 0.0 && t.is_finite()) {
                return Err(Failure::config("InvalidArgument", format!("t must be positive, got {t}")));
            }
            let ratio = selberg_ratio(*n, *t).map_err(invalid)?;
            Ok(Artifact::Json(json!({
                "n": n,
                "t": t,
                "log_partition": selberg_log_partition(*n, *t).map_err(invalid)?,
                "ratio": ratio,
                "c_t": c_t(*t),
            })))
        }
        Command::DirichletCheck { model, mc, n } => {
            let model = load_model(model)?;
            let spec = spec(*n, model.t(), mc.seed)?;
            let report = dirichlet_law_check(&spec, &model, mc.samples, mc.workers)?;
            Ok(Artifact::Json(to_json(&report)))
        }
        Command::Converge { model, mc, n } => {
            let model = load_model(model)?;
            for &size in n {
                spec(size, model.t(), mc.seed)?;
            }
            let reports = convergence_check(&model, n, mc.samples, mc.seed, mc.workers)?;
            Ok(Artifact::Json(json!({
                "ell_lambda": model.limit_smallest(),
                "reports": to_json(&reports),
            })))
        }
    }
}

fn compare(which: Prior, measure: Option<&Path>, outlier: Option<f64>, grid: &Grid) -> Result<Artifact, Failure> {
    type PriorFn<'a> = Box<dyn Fn(f64) -> Result<ExtendedReal, Error> + 'a>;
    let (model, prior): (DeformedModel, PriorFn) = match which {
        Prior::Maida => {
            let lam = outlier.ok_or_else(|| Failure::config("InvalidArgument", "compare maida needs --outlier"))?;
            maida_rate(lam, -2.0).map_err(invalid)?;
            let model = DeformedModel::new(AtomicMeasure::dirac(0.0), 0.5, lam).map_err(invalid)?;
            (model, Box::new(move |x| maida_rate(lam, x)))
        }
        Prior::Mckenna => {
            let path = measure.ok_or_else(|| Failure::config("InvalidArgument", "compare mckenna needs --measure"))?;
            let nu = load_measure(path)?;
            let ell = nu.support_edge();
            let model = DeformedModel::new(nu.clone(), 1.0, ell).map_err(invalid)?;
            (model, Box::new(move |x| mckenna_rate(&nu, x).map(ExtendedReal::Finite)))
        }
        Prior::Goe => {
            let model = DeformedModel::new(AtomicMeasure::dirac(0.0), 1.0, 0.0).map_err(invalid)?;
            (model, Box::new(|x| Ok(goe_rate(x))))
        }
    };
    let mut table = Table::new(&["x", "prior_value", "rate_value", "abs_diff"]);
    for x in grid.points() {
        let p = prior(x)?;
        let r = model.rate(x);
        let diff = match (p, r) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => (a - b).abs(),
            (ExtendedReal::PosInfinity, ExtendedReal::PosInfinity) => 0.0,
            _ => f64::INFINITY,
        };
        table.push(vec![Cell::Num(x), extended(p), extended(r), Cell::Num(diff)]);
    }
    Ok(Artifact::Table(table))
}

fn fail(f: &Failure) -> ExitCode {
    let (code, body) = f.report();
    eprintln!("{body}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            return fail(&Failure::config("Usage", message.trim_end()));
        }
    };
    let artifact = match run(&cli.command) {
        Ok(a) => a,
        Err(f) => return fail(&f),
    };
    let digits = cli.io.precision as usize;
    let text = match (artifact, cli.io.format) {
        (Artifact::Table(t), Format::Csv) => t.to_csv(digits),
        (Artifact::Table(t), Format::Json) => output::to_json_text(&t.to_json(), digits),
        (Artifact::Json(v), _) => output::to_json_text(&v, digits),
    };
    match &cli.io.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                return fail(&Failure::config("Io", format!("cannot write {}: {e}", path.display())));
            }
        }
        None => print!("{text}"),
    }
    ExitCode::SUCCESS
}

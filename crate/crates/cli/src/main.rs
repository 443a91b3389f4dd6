mod config;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spde_ergo::ergodicity::{
    convergence_experiment, estimate_invariant, moment_sweep, moments_to_csv, ConvergenceSetup,
    TvSettings,
};
use spde_ergo::{ensembles_to_csv, Error, SpectralModel};

use config::Resolved;
use svg::{line_chart, Series};

const EXIT_OTHER: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_ADMISSIBILITY: u8 = 3;
const EXIT_CONVERGENCE: u8 = 4;
const EXIT_INSUFFICIENT: u8 = 5;

#[derive(Parser)]
#[command(
    name = "spde-ergo",
    version,
    about = "Spectral simulation and ergodicity diagnostics for semilinear SPDEs with stable noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the admissibility report; exits 3 if any applicable condition fails.
    Check(Common),
    /// Write ensemble snapshots at the time grid (or the horizon).
    Simulate(Common),
    /// Write E|X_t^x|^p on the time grid for every start in x_list.
    Moments(Common),
    /// Run the convergence experiment and fit exponential rates.
    Converge(Common),
    /// Write a burn-in ensemble and its two-time stationarity diagnostic.
    Invariant(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    ExpEuler,
    Picard,
}

impl SchemeArg {
    fn name(self) -> &'static str {
        match self {
            Self::ExpEuler => "exp_euler",
            Self::Picard => "picard",
        }
    }
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads; 0 uses every available core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Overrides the config scheme.
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    /// Also write SVG charts where the command has one.
    #[arg(long)]
    svg: bool,
}

/// Failure carrying the process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Usage(_)
            | Error::Parameter(_)
            | Error::Structural(_)
            | Error::UnknownStrategy { .. } => EXIT_USAGE,
            Error::Convergence { .. } => EXIT_CONVERGENCE,
            Error::InsufficientData { .. } => EXIT_INSUFFICIENT,
            Error::Blown { .. } => EXIT_OTHER,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_OTHER,
        message: format!("cannot write {}: {e}", path.display()),
    }
}

struct Context {
    cfg: Resolved,
    model: SpectralModel,
    out: PathBuf,
    svg: bool,
    command: &'static str,
}

impl Context {
    fn new(args: &Common, command: &'static str) -> Result<Self, Failure> {
        let raw = config::load(&args.config)?;
        let base = args.config.parent().unwrap_or(Path::new("."));
        let (cfg, model) = raw.resolve(base, args.seed, args.scheme.map(SchemeArg::name))?;
        Ok(Self {
            cfg,
            model,
            out: args.out.clone(),
            svg: args.svg,
            command,
        })
    }

    /// Header lines embedded in every output file. Thread count and paths are
    /// deliberately absent so outputs depend only on config, seed and version.
    fn provenance(&self) -> Vec<String> {
        vec![
            format!("spde-ergo {} {}", env!("CARGO_PKG_VERSION"), self.command),
            format!(
                "seed: {}",
                self.cfg.seed.map_or("none".into(), |s| s.to_string())
            ),
            format!("model_hash: {}", self.model.hash()),
            format!("config: {}", self.cfg.to_json()),
        ]
    }

    fn write(&self, name: &str, body: &str) -> Result<PathBuf, Failure> {
        fs::create_dir_all(&self.out).map_err(|e| io_failure(&self.out, e))?;
        let path = self.out.join(name);
        fs::write(&path, body).map_err(|e| io_failure(&path, e))?;
        eprintln!("wrote {}", path.display());
        Ok(path)
    }

    fn warn_if_inadmissible(&self) {
        let report = self.model.report();
        if !report.passed() {
            let failed: Vec<&str> = report.failures().map(|e| e.id.label()).collect();
            eprintln!(
                "warning: model fails admissibility conditions [{}]; results are outside the theory",
                failed.join(", ")
            );
        }
    }

    fn single_start(&self) -> Result<Vec<f64>, Failure> {
        if self.cfg.x_list.len() != 1 {
            return Err(Error::Usage(format!(
                "{} takes exactly one initial condition, x_list has {}",
                self.command,
                self.cfg.x_list.len()
            ))
            .into());
        }
        Ok(self.cfg.x_list[0].coords(self.model.n_modes())?)
    }
}

fn commented(comments: &[String], body: &str) -> String {
    let mut out = String::new();
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str(body);
    out
}

fn cmd_check(ctx: &Context) -> Result<u8, Failure> {
    let report = ctx.model.report();
    print!("{}", report.table());
    if report.passed() {
        println!("all applicable conditions hold");
        Ok(0)
    } else {
        let failed: Vec<&str> = report.failures().map(|e| e.id.label()).collect();
        println!("failed: {}", failed.join(", "));
        Ok(EXIT_ADMISSIBILITY)
    }
}

fn cmd_simulate(ctx: &Context) -> Result<u8, Failure> {
    ctx.warn_if_inadmissible();
    let seed = ctx.cfg.seed()?;
    let x = ctx.single_start()?;
    let times = ctx.cfg.times()?;
    let horizon = times.iter().cloned().fold(0.0, f64::max);
    let config = ctx.cfg.path_config(horizon.max(ctx.cfg.step));
    let run = spde_ergo::solver::simulate_ensemble(
        &ctx.model,
        &x,
        &config,
        ctx.cfg.m_paths,
        seed,
        &times,
    )?;
    let mut comments = ctx.provenance();
    comments.push(format!("blown_paths: {}", run.blown));
    ctx.write(
        "snapshots.csv",
        &ensembles_to_csv(&run.snapshots, &comments),
    )?;
    Ok(0)
}

fn cmd_moments(ctx: &Context) -> Result<u8, Failure> {
    ctx.warn_if_inadmissible();
    let seed = ctx.cfg.seed()?;
    let times = ctx.cfg.times()?;
    let horizon = times.iter().cloned().fold(0.0, f64::max);
    let config = ctx.cfg.path_config(horizon.max(ctx.cfg.step));
    let mut sweeps = Vec::new();
    for x in &ctx.cfg.x_list {
        // Every start shares the seed, so differences between starts are
        // common-random-number comparisons.
        let coords = x.coords(ctx.model.n_modes())?;
        sweeps.push(moment_sweep(
            &ctx.model,
            &config,
            &coords,
            &times,
            ctx.cfg.m_paths,
            seed,
            ctx.cfg.p_moment,
        )?);
    }
    let mut comments = ctx.provenance();
    if let Some(w) = sweeps.iter().find_map(|s| s.warning.clone()) {
        eprintln!("warning: {w}");
        comments.push(format!("warning: {w}"));
    }
    let blown: usize = sweeps.iter().map(|s| s.blown).sum();
    comments.push(format!("blown_paths: {blown}"));
    ctx.write("moments.csv", &moments_to_csv(&sweeps, &comments))?;
    if ctx.svg {
        let series: Vec<Series> = sweeps
            .iter()
            .map(|s| Series {
                label: format!("|x| = {}", s.x_norm()),
                points: s.points.iter().map(|p| (p.t, p.moment)).collect(),
            })
            .collect();
        let title = format!("E|X_t|^{}", ctx.cfg.p_moment);
        ctx.write(
            "moments.svg",
            &line_chart(&title, "t", "moment", &series, false),
        )?;
    }
    Ok(0)
}

fn cmd_converge(ctx: &Context) -> Result<u8, Failure> {
    ctx.warn_if_inadmissible();
    let seed = ctx.cfg.seed()?;
    let time_grid = ctx.cfg.time_grid.clone().ok_or_else(|| {
        Failure::from(Error::Usage(
            "converge requires 'time_grid' in the config".into(),
        ))
    })?;
    let x_list = ctx
        .cfg
        .x_list
        .iter()
        .map(|x| x.coords(ctx.model.n_modes()))
        .collect::<spde_ergo::Result<Vec<_>>>()?;
    let setup = ConvergenceSetup {
        path: ctx.cfg.path_config(ctx.cfg.step),
        x_list,
        time_grid,
        m_paths: ctx.cfg.m_paths,
        tv: TvSettings {
            dims: ctx.cfg.dims0(),
            bins: ctx.cfg.bins,
        },
        p: ctx.cfg.p_moment,
        t_burn: ctx.cfg.t_burn,
        seed,
    };
    let report = convergence_experiment(&ctx.model, &setup)?;
    let comments = ctx.provenance();
    ctx.write("converge.csv", &report.to_csv(&comments))?;
    let summary = report.summary();
    ctx.write("converge_summary.txt", &commented(&comments, &summary))?;
    print!("{summary}");
    if ctx.svg {
        let series: Vec<Series> = report
            .curves
            .iter()
            .map(|c| Series {
                label: format!("|x| = {}", c.x_norm),
                points: c.points.iter().map(|p| (p.t, p.tv)).collect(),
            })
            .collect();
        ctx.write(
            "converge.svg",
            &line_chart("TV distance to the invariant law", "t", "TV", &series, true),
        )?;
    }
    if report.curves.iter().any(|c| c.fit.is_none()) {
        return Ok(EXIT_INSUFFICIENT);
    }
    if !report.reference_converged {
        return Ok(EXIT_CONVERGENCE);
    }
    Ok(0)
}

fn cmd_invariant(ctx: &Context) -> Result<u8, Failure> {
    ctx.warn_if_inadmissible();
    let seed = ctx.cfg.seed()?;
    let x = ctx.single_start()?;
    let tv = TvSettings {
        dims: ctx.cfg.dims0(),
        bins: ctx.cfg.bins,
    };
    let est = estimate_invariant(
        &ctx.model,
        &ctx.cfg.path_config(ctx.cfg.step),
        ctx.cfg.m_paths,
        ctx.cfg.t_burn,
        seed,
        &x,
        &tv,
    )?;
    let mut comments = ctx.provenance();
    let diagnostic = format!(
        "two-time TV between t = {} and t = {}: {} (threshold {}, {} bins on modes {:?}) -> {}",
        est.ensemble.time(),
        est.late.time(),
        est.diagnostic.value,
        est.threshold,
        est.diagnostic.bins_per_dim,
        ctx.cfg.dims,
        if est.converged {
            "converged"
        } else {
            "not converged"
        }
    );
    comments.push(diagnostic.clone());
    comments.push(format!("blown_paths: {}", est.blown));
    ctx.write(
        "invariant.csv",
        &ensembles_to_csv(std::slice::from_ref(&est.ensemble), &comments),
    )?;
    ctx.write(
        "invariant_diagnostic.txt",
        &commented(&ctx.provenance(), &format!("{diagnostic}\n")),
    )?;
    println!("{diagnostic}");
    Ok(if est.converged { 0 } else { EXIT_CONVERGENCE })
}

type Handler = fn(&Context) -> Result<u8, Failure>;

fn run(cli: Cli) -> Result<u8, Failure> {
    let (args, name, f): (&Common, &'static str, Handler) = match &cli.command {
        Command::Check(a) => (a, "check", cmd_check),
        Command::Simulate(a) => (a, "simulate", cmd_simulate),
        Command::Moments(a) => (a, "moments", cmd_moments),
        Command::Converge(a) => (a, "converge", cmd_converge),
        Command::Invariant(a) => (a, "invariant", cmd_invariant),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .map_err(|e| Failure {
            code: EXIT_OTHER,
            message: format!("cannot start thread pool: {e}"),
        })?;
    let ctx = Context::new(args, name)?;
    pool.install(|| f(&ctx))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use pisd_core::effective::QuantumContext;
use pisd_core::harness::{
    self, criterion_energy, ed_sweep, linspace, run_temperature_sweep_with, CriterionMode, SweepConfig,
};
use pisd_core::{GradientMethod, ModelKind, SpinSystemSpec, Vec3};

mod config;
mod manifest;

use config::{exact, ConfigError, Settings};
use manifest::RunManifest;

const SEED_ENV: &str = "PISD_SEED";

#[derive(Parser, Debug)]
#[command(name = "pisd", version, about = "Exact and coherent-state stochastic thermal sweeps for two coupled spins")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct SystemArgs {
    /// Flat `key = value` settings file; command-line flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// Spin quantum number (half-integer) [default: 0.5]
    #[arg(long = "s")]
    s: Option<f64>,
    /// Exchange J in units of g·μ_B·(1 T) [default: 1]
    #[arg(long = "J-over-gmuBBz", allow_negative_numbers = true)]
    j_over: Option<f64>,
    /// Field along z in Tesla [default: 1]
    #[arg(long = "Bz", allow_negative_numbers = true)]
    bz: Option<f64>,
    /// Gilbert damping [default: 0.5]
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct RangeArgs {
    /// Lowest temperature, K
    #[arg(long = "Tmin")]
    tmin: Option<f64>,
    /// Highest temperature, K
    #[arg(long = "Tmax")]
    tmax: Option<f64>,
    /// Number of evenly spaced temperatures
    #[arg(long)]
    points: Option<usize>,
    /// Explicit comma-separated temperatures in K (overrides the range)
    #[arg(long)]
    temperatures: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact-diagonalisation reference curve
    EdSweep {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        range: RangeArgs,
        /// Output CSV (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stochastic LLG sweep with an effective-field model
    PisdSweep {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        range: RangeArgs,
        /// classical | series-exact | series-high-t | difference | eigen-overlap [default: eigen-overlap]
        #[arg(long)]
        model: Option<String>,
        /// Truncation order for the series models
        #[arg(long)]
        order: Option<u32>,
        /// Time step in ns [default: 5e-6]
        #[arg(long = "dt-ns")]
        dt_ns: Option<f64>,
        /// Equilibration time in ns [default: 1, or 5 with --paper-scale]
        #[arg(long = "equil-ns")]
        equil_ns: Option<f64>,
        /// Averaging time in ns [default: 2, or 10 with --paper-scale]
        #[arg(long = "average-ns")]
        average_ns: Option<f64>,
        /// Independent trajectories per temperature [default: 5]
        #[arg(long)]
        realizations: Option<u32>,
        /// Steps between samples [default: 100]
        #[arg(long)]
        stride: Option<u64>,
        /// Random seed [default: $PISD_SEED, else 1]
        #[arg(long)]
        seed: Option<u64>,
        /// generator | finite-difference [default: generator]
        #[arg(long)]
        gradient: Option<String>,
        /// Finite-difference step on the unit vectors [default: 1e-6]
        #[arg(long = "fd-step")]
        fd_step: Option<f64>,
        /// Use 5 ns equilibration and 10 ns averaging
        #[arg(long = "paper-scale")]
        paper_scale: bool,
        /// Output CSV (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Series convergence criteria and their threshold temperatures
    Diagnose {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        range: RangeArgs,
        /// supremum | difference (both when omitted)
        #[arg(long)]
        mode: Option<String>,
        /// Criterion-vs-temperature CSV for one mode
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the oracle-equivalence checks
    Validate {
        /// Random configurations per check [default: 100]
        #[arg(long)]
        configs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-run a command from its manifest
    Reproduce {
        #[arg(long)]
        manifest: PathBuf,
        /// Write to this path instead of the recorded one
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    /// Bad flags, settings or inputs: exit 1.
    Config(String),
    /// Every temperature hit a numerical-domain failure: exit 2.
    AllFailed(String),
    /// An oracle check did not meet its tolerance: exit 3.
    Validation(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<pisd_core::Error> for Failure {
    fn from(e: pisd_core::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::AllFailed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn system_settings(sys: &SystemArgs, range: &RangeArgs) -> Result<Settings, ConfigError> {
    let base = match &sys.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    let mut cli = Settings::default();
    cli.set_opt("s", sys.s.map(exact));
    cli.set_opt("J_over_gmuBBz", sys.j_over.map(exact));
    cli.set_opt("Bz_T", sys.bz.map(exact));
    cli.set_opt("alpha", sys.alpha.map(exact));
    cli.set_opt("Tmin_K", range.tmin.map(exact));
    cli.set_opt("Tmax_K", range.tmax.map(exact));
    cli.set_opt("points", range.points);
    cli.set_opt("temperatures_K", range.temperatures.clone());
    Ok(base.overridden_by(&cli))
}

fn dispatch(command: Command) -> Outcome {
    match command {
        Command::EdSweep { system, range, out } => {
            let mut s = system_settings(&system, &range)?;
            s.set_opt("out", out.map(|p| p.display().to_string()));
            run_ed(s)
        }
        Command::PisdSweep {
            system,
            range,
            model,
            order,
            dt_ns,
            equil_ns,
            average_ns,
            realizations,
            stride,
            seed,
            gradient,
            fd_step,
            paper_scale,
            out,
        } => {
            let mut s = system_settings(&system, &range)?;
            s.set_opt("model", model);
            s.set_opt("order", order);
            s.set_opt("dt_ns", dt_ns.map(exact));
            s.set_opt("equil_ns", equil_ns.map(exact));
            s.set_opt("average_ns", average_ns.map(exact));
            s.set_opt("realizations", realizations);
            s.set_opt("stride", stride);
            s.set_opt("seed", seed);
            s.set_opt("gradient", gradient);
            s.set_opt("fd_step", fd_step.map(exact));
            if paper_scale {
                s.set("paper_scale", true);
            }
            s.set_opt("out", out.map(|p| p.display().to_string()));
            run_pisd(s)
        }
        Command::Diagnose {
            system,
            range,
            mode,
            out,
        } => {
            let mut s = system_settings(&system, &range)?;
            s.set_opt("mode", mode);
            s.set_opt("out", out.map(|p| p.display().to_string()));
            run_diagnose(s)
        }
        Command::Validate { configs, seed } => run_validate(configs.unwrap_or(100), seed.unwrap_or(1)),
        Command::Reproduce { manifest, out } => {
            let m = RunManifest::load(&manifest).map_err(|e| Failure::Config(e.0))?;
            let mut s = Settings(m.settings.clone());
            for key in s.0.keys() {
                if !config::KEYS.iter().any(|(k, _)| k == key) {
                    return Err(Failure::Config(format!("manifest has unknown setting '{key}'")));
                }
            }
            s.set_opt("out", out.map(|p| p.display().to_string()));
            match m.command.as_str() {
                "ed-sweep" => run_ed(s),
                "pisd-sweep" => run_pisd(s),
                "diagnose" => run_diagnose(s),
                other => Err(Failure::Config(format!("cannot reproduce command '{other}'"))),
            }
        }
    }
}

fn resolve_spec(s: &mut Settings, with_alpha: bool) -> Result<SpinSystemSpec, Failure> {
    let spin = s.resolve("s", 0.5)?;
    let ratio = s.resolve("J_over_gmuBBz", 1.0)?;
    let bz = s.resolve("Bz_T", 1.0)?;
    let alpha = if with_alpha { s.resolve("alpha", 0.5)? } else { 0.5 };
    let c = pisd_core::PhysicalConstants::ELECTRON;
    // J is fixed in units of gμ_B·(1 T) so that it survives B_z = 0.
    Ok(SpinSystemSpec::new(spin, ratio * c.g_mu_b(), Vec3::new(0.0, 0.0, bz), alpha)?)
}

/// Explicit list, else an even grid over the range, else `default`.
fn resolve_temperatures(s: &mut Settings, default: &[f64]) -> Result<Vec<f64>, Failure> {
    if let Some(list) = s.list("temperatures_K")? {
        if list.is_empty() || list.iter().any(|t| !(*t > 0.0)) {
            return Err(Failure::Config("temperatures must be positive".into()));
        }
        return Ok(list);
    }
    let any_range = ["Tmin_K", "Tmax_K", "points"].iter().any(|k| s.raw(k).is_some());
    if !any_range {
        s.set("temperatures_K", default.iter().map(|t| exact(*t)).collect::<Vec<_>>().join(","));
        return Ok(default.to_vec());
    }
    let tmin = s.resolve("Tmin_K", 0.1)?;
    let tmax = s.resolve("Tmax_K", 10.0)?;
    let points = s.resolve("points", 50usize)?;
    Ok(linspace(tmin, tmax, points)?)
}

fn resolve_seed(s: &mut Settings) -> Result<u64, Failure> {
    if let Some(seed) = s.get("seed")? {
        return Ok(seed);
    }
    let seed = match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Config(format!("{SEED_ENV}='{v}' is not an unsigned integer")))?,
        Err(_) => 1,
    };
    s.set("seed", seed);
    Ok(seed)
}

fn out_path(s: &Settings) -> Option<PathBuf> {
    s.raw("out").map(PathBuf::from)
}

fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn finish(command: &str, s: Settings, started: f64, seed: Option<u64>, failed: Vec<manifest::FailedRow>) -> Outcome {
    if let Some(out) = out_path(&s) {
        let m = RunManifest {
            tool: "pisd".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            settings: s.0.clone(),
            started_unix_s: started,
            finished_unix_s: now_unix(),
            outputs: vec![out.display().to_string()],
            failed_rows: failed,
        };
        let path = manifest::manifest_path(&out);
        m.write(&path).map_err(|e| Failure::Config(e.0))?;
        eprintln!("wrote {} and {}", out.display(), path.display());
    }
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(p) => Ok(harness::write_file_atomic(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_ed(mut s: Settings) -> Outcome {
    let started = now_unix();
    let spec = resolve_spec(&mut s, false)?;
    let temps = resolve_temperatures(&mut s, &linspace(0.1, 10.0, 50)?)?;
    let rows = ed_sweep(&spec, &temps)?;
    let mut text = format!("{}\n", harness::ED_HEADER);
    for (t, sz) in &rows {
        text.push_str(&format!("{},{}\n", pisd_core::quantum::fmt17(*t), pisd_core::quantum::fmt17(*sz)));
    }
    emit(out_path(&s).as_deref(), &text)?;
    finish("ed-sweep", s, started, None, Vec::new())
}

fn run_pisd(mut s: Settings) -> Outcome {
    let started = now_unix();
    let spec = resolve_spec(&mut s, true)?;
    let temps = resolve_temperatures(&mut s, &[1.0, 2.0, 4.0, 8.0])?;
    let tag: String = s.resolve("model", "eigen-overlap".to_string())?;
    let order: Option<u32> = s.get("order")?;
    let model = ModelKind::from_tag(&tag, order)?;
    if model.order().is_none() && order.is_some() {
        return Err(Failure::Config(format!("model '{tag}' does not take an order")));
    }
    let paper = s.resolve("paper_scale", false)?;
    let (equil_default, average_default) = if paper { (5.0, 10.0) } else { (1.0, 2.0) };
    let dt_ns = s.resolve("dt_ns", 5e-6)?;
    let equil_ns = s.resolve("equil_ns", equil_default)?;
    let average_ns = s.resolve("average_ns", average_default)?;
    let realizations = s.resolve("realizations", 5u32)?;
    let stride = s.resolve("stride", 100u64)?;
    let seed = resolve_seed(&mut s)?;
    let gradient = match s.resolve("gradient", "generator".to_string())?.as_str() {
        "generator" => GradientMethod::Generator,
        "finite-difference" => GradientMethod::FiniteDifference {
            step: s.resolve("fd_step", pisd_core::effective::FD_STEP)?,
        },
        other => return Err(Failure::Config(format!("unknown gradient method '{other}'"))),
    };
    let cfg = SweepConfig {
        dt: dt_ns * 1e-9,
        t_equil: equil_ns * 1e-9,
        t_average: average_ns * 1e-9,
        n_realizations: realizations,
        sample_stride: stride,
        gradient,
        ..SweepConfig::desk_scale(spec.clone(), model, temps, seed)
    };
    cfg.validate()?;
    let ctx = QuantumContext::new(&spec)?;
    let result = run_temperature_sweep_with(&cfg, ctx)?;
    let failed: Vec<manifest::FailedRow> = result
        .rows
        .iter()
        .filter_map(|r| match &r.status {
            harness::RowStatus::Failed(reason) => {
                eprintln!("T = {} K failed: {reason}", r.temperature);
                Some(manifest::FailedRow {
                    temperature_k: r.temperature,
                    reason: reason.clone(),
                })
            }
            harness::RowStatus::Ok => None,
        })
        .collect();
    emit(out_path(&s).as_deref(), &harness::sweep_csv(&result))?;
    let all_failed = result.all_failed();
    finish("pisd-sweep", s, started, Some(seed), failed)?;
    if all_failed {
        return Err(Failure::AllFailed(format!(
            "{model}: every temperature failed with a numerical-domain error; raise the order or the temperatures"
        )));
    }
    Ok(())
}

fn run_diagnose(mut s: Settings) -> Outcome {
    let started = now_unix();
    let spec = resolve_spec(&mut s, false)?;
    let modes = match s.get::<String>("mode")? {
        Some(m) => vec![m.parse::<CriterionMode>()?],
        None => vec![CriterionMode::Supremum, CriterionMode::Difference],
    };
    let ctx = QuantumContext::new(&spec)?;
    let k_b = spec.constants.k_b;
    for &mode in &modes {
        let x = criterion_energy(&ctx, mode);
        if x == 0.0 {
            println!("{}: criterion is 0 at every temperature", mode.tag());
        } else {
            let t = x / k_b;
            println!(
                "{}: criterion = 1 at T = {t:.2} K ({t:.6} K); the series is expected to converge for T >> {t:.2} K",
                mode.tag()
            );
        }
    }
    if let Some(out) = out_path(&s) {
        let [mode] = modes[..] else {
            return Err(Failure::Config("--out requires a single --mode".into()));
        };
        s.set("mode", mode.tag());
        let temps = resolve_temperatures(&mut s, &linspace(0.1, 10.0, 50)?)?;
        let x = criterion_energy(&ctx, mode);
        let rows: Vec<(f64, f64)> = temps
            .iter()
            .map(|&t| Ok((t, spec.constants.beta(t)? * x)))
            .collect::<pisd_core::Result<_>>()?;
        harness::write_diagnostic_csv(&out, &rows, mode)?;
    }
    finish("diagnose", s, started, None, Vec::new())
}

fn run_validate(configs: usize, seed: u64) -> Outcome {
    if configs == 0 {
        return Err(Failure::Config("--configs must be at least 1".into()));
    }
    let checks = pisd_core::validation::run_all(configs, seed)?;
    let mut failed = 0;
    for c in &checks {
        let tag = if c.passed() { "ok" } else { "FAILED" };
        println!("{tag:>6}  {:<45} worst {:.2e}  tol {:.0e}", c.name, c.worst, c.tolerance);
        failed += usize::from(!c.passed());
    }
    if failed > 0 {
        return Err(Failure::Validation(format!("{failed} check(s) failed")));
    }
    Ok(())
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cylconf::config::{Mode, ReplaySpec, ReportSpec, RunConfig, Schedule, StepSpec};
use cylconf::confinement::{ConfinementReport, EnvelopeSpec};
use cylconf::kernel::{validate_decay_envelope, DecayEnvelope};
use cylconf::replay::{big_c_from_c_prime, PlanParams, Regime};
use cylconf::runner::{self, ReplayEntry, ResumeOptions};
use cylconf::{Error, Result};

#[derive(Parser)]
#[command(name = "cylconf", version, about = "Vortex-blob flow on the infinite cylinder and confinement diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an euler or ns simulation.
    Simulate(SimulateArgs),
    /// Replay the iteration bounds over a sweep of times.
    ReplayBounds(ReplayArgs),
    /// Compare diagnostics CSVs against a confinement envelope.
    Report(ReportArgs),
    /// Continue a run from a checkpoint.
    Resume(ResumeArgs),
    /// Certify the kernel decay envelope on a grid.
    ValidateKernel(KernelArgs),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// euler or ns (defaults to the config's mode, else euler).
    #[arg(long)]
    mode: Option<SimMode>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Step size; for ns also the transport step unless it differs in the config.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    viscosity: Option<f64>,
    #[arg(long)]
    n_blobs: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    parallel_seeds: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    h_grid: Option<Vec<f64>>,
    /// Linear diagnostics spacing (replaces the schedule).
    #[arg(long, conflicts_with_all = ["t_first", "ratio"])]
    dt_out: Option<f64>,
    /// First time of a geometric schedule.
    #[arg(long, requires = "ratio")]
    t_first: Option<f64>,
    #[arg(long, requires = "t_first")]
    ratio: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimMode {
    Euler,
    Ns,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    NsA,
    NsB,
    Euler,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    regime: Option<RegimeArg>,
    /// Values of log t.
    #[arg(long, value_delimiter = ',')]
    log_t: Option<Vec<f64>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Closed-form constant C' (the recursion uses C = C' / 4e).
    #[arg(long, conflicts_with = "big_c")]
    c_prime: Option<f64>,
    #[arg(long)]
    big_c: Option<f64>,
    #[arg(long)]
    m0: Option<f64>,
    #[arg(long)]
    support_radius: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvelopeArg {
    NsSqrtLog,
    NsPower,
    EulerCuberootLog,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    common: Common,
    /// Diagnostics CSV files; several are averaged into an ensemble mean.
    #[arg(long = "input", num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    envelope: Option<EnvelopeArg>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Fit window as t_min,t_max.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    window: Option<Vec<f64>>,
}

#[derive(Args)]
struct ResumeArgs {
    checkpoint: PathBuf,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    allow_param_change: bool,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long, default_value_t = 2.0)]
    c1: f64,
    #[arg(long, default_value_t = 0.5)]
    c2: f64,
    #[arg(long, default_value_t = 4096)]
    samples: usize,
}

fn base_config(common: &Common, mode: Mode) -> Result<RunConfig> {
    let mut c = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::from_json(&format!(r#"{{"mode": {}}}"#, serde_json::to_string(&mode)?))?,
    };
    if let Some(d) = &common.output_dir {
        c.output_dir = Some(d.clone());
    }
    Ok(c)
}

fn need<T>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing {what}")))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut c = base_config(&a.common, Mode::Euler)?;
    if let Some(m) = a.mode {
        c.mode = match m {
            SimMode::Euler => Mode::Euler,
            SimMode::Ns => Mode::Ns,
        };
    }
    if !matches!(c.mode, Mode::Euler | Mode::Ns) {
        return Err(Error::Config("simulate needs mode euler or ns".into()));
    }
    if let Some(v) = a.viscosity {
        c.viscosity = v;
    }
    if c.mode == Mode::Ns {
        if let StepSpec::Euler(t) = c.step {
            c.step = StepSpec::Ns(cylconf::ns::NsStepConfig::new(t.dt, t, 0));
        }
    }
    if let Some(dt) = a.dt {
        match &mut c.step {
            StepSpec::Euler(s) => s.dt = dt,
            StepSpec::Ns(s) => {
                if s.transport.dt == s.dt {
                    s.transport.dt = dt;
                }
                s.dt = dt;
            }
        }
    }
    if let Some(t) = a.t_end {
        c.t_end = t;
    }
    if let Some(n) = a.n_blobs {
        c.patch.n_blobs = n;
    }
    if let Some(s) = a.seeds {
        c.seeds = s;
    }
    if let Some(p) = a.parallel_seeds {
        c.parallel_seeds = p;
    }
    if let Some(h) = a.h_grid {
        c.h_grid = h;
    }
    if let Some(dt_out) = a.dt_out {
        c.diagnostics_schedule = Schedule::Linear { dt_out };
    }
    if let (Some(t_first), Some(ratio)) = (a.t_first, a.ratio) {
        c.diagnostics_schedule = Schedule::Geometric { t_first, ratio };
    }
    let o = runner::run(&c)?;
    for w in &o.manifest.warnings {
        eprintln!("warning: {w}");
    }
    println!("output: {}", o.output_dir.display());
    for s in &o.manifest.outputs {
        println!("seed {:>6}  rows {:>5}  {}", s.seed, s.rows, s.diagnostics.display());
    }
    Ok(())
}

fn replay(a: ReplayArgs) -> Result<()> {
    let mut c = base_config(&a.common, Mode::BoundReplay)?;
    c.mode = Mode::BoundReplay;
    let flags_given = a.regime.is_some() || a.log_t.is_some();
    if c.replay.is_none() || flags_given {
        let prev = c.replay.take();
        let regime = match a.regime {
            Some(RegimeArg::NsA) => Regime::NsA,
            Some(RegimeArg::NsB) => Regime::NsB,
            Some(RegimeArg::Euler) => Regime::Euler,
            None => need(prev.as_ref().map(|p| p.regime), "--regime")?,
        };
        let prev_params = prev.as_ref().map(|p| p.params);
        let params = match (regime, prev_params) {
            (Regime::NsB, Some(PlanParams::BetaDelta { beta, delta })) => PlanParams::BetaDelta {
                beta: a.beta.unwrap_or(beta),
                delta: a.delta.unwrap_or(delta),
            },
            (Regime::NsB, _) => PlanParams::BetaDelta {
                beta: need(a.beta, "--beta")?,
                delta: need(a.delta, "--delta")?,
            },
            (_, Some(PlanParams::Alpha { alpha })) => PlanParams::Alpha {
                alpha: a.alpha.unwrap_or(alpha),
            },
            _ => PlanParams::Alpha {
                alpha: need(a.alpha, "--alpha")?,
            },
        };
        let big_c = match (a.big_c, a.c_prime) {
            (Some(b), _) => b,
            (None, Some(cp)) => big_c_from_c_prime(cp),
            (None, None) => need(prev.as_ref().map(|p| p.big_c), "--big-c or --c-prime")?,
        };
        c.replay = Some(ReplaySpec {
            regime,
            log_t: match a.log_t {
                Some(v) => v,
                None => need(prev.as_ref().map(|p| p.log_t.clone()), "--log-t")?,
            },
            params,
            big_c,
            m0: a.m0.or(prev.as_ref().map(|p| p.m0)).unwrap_or(1.0),
            support_radius: a.support_radius.or(prev.as_ref().map(|p| p.support_radius)).unwrap_or(1.0),
        });
    }
    let o = runner::run(&c)?;
    print_certificates(&o.certificates);
    println!("output: {}", o.output_dir.display());
    Ok(())
}

fn print_certificates(entries: &[ReplayEntry]) {
    println!("{:>10} {:>10} {:>12} {:>22} {:>22}", "log t", "n", "log h", "log recursive", "log closed");
    for e in entries {
        let p = &e.plan;
        match &e.certificate {
            Some(cert) => println!(
                "{:>10.4} {:>10} {:>12.4} {:>22.10e} {:>22.10e}",
                p.log_t, p.n, p.log_h, cert.log_recursive_bound, cert.log_closed_form
            ),
            None => println!(
                "{:>10.4} {:>10} {:>12.4} {:>22} {:>22}  ({})",
                p.log_t,
                p.n,
                p.log_h,
                "-",
                "-",
                e.error.as_deref().unwrap_or("")
            ),
        }
    }
}

fn report(a: ReportArgs) -> Result<()> {
    let mut c = base_config(&a.common, Mode::Report)?;
    c.mode = Mode::Report;
    let mut spec = c.report.take().unwrap_or(ReportSpec {
        envelope: EnvelopeSpec::NsSqrtLog { alpha: 2.0, ell: 1.0 },
        inputs: Vec::new(),
        window: None,
    });
    if let Some(kind) = a.envelope {
        spec.envelope = match kind {
            EnvelopeArg::NsSqrtLog => EnvelopeSpec::NsSqrtLog {
                alpha: need(a.alpha, "--alpha")?,
                ell: a.ell.unwrap_or(1.0),
            },
            EnvelopeArg::NsPower => EnvelopeSpec::NsPower {
                beta: need(a.beta, "--beta")?,
                delta: need(a.delta, "--delta")?,
            },
            EnvelopeArg::EulerCuberootLog => EnvelopeSpec::EulerCuberootLog {
                alpha: need(a.alpha, "--alpha")?,
                ell: a.ell.unwrap_or(1.0),
            },
        };
    }
    if !a.inputs.is_empty() {
        spec.inputs = a.inputs;
    }
    if let Some(w) = a.window {
        spec.window = Some((w[0], w[1]));
    }
    c.report = Some(spec);
    let o = runner::run(&c)?;
    if let Some(r) = &o.report {
        print_report(r);
    }
    println!("output: {}", o.output_dir.display());
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.6e}"))
}

fn print_report(r: &ConfinementReport) {
    println!(
        "{:>12} {:>14} {:>14} {:>14} {:>12} {:>14}",
        "t", "radius", "tail", "bound", "ratio", "d/envelope"
    );
    for s in &r.samples {
        println!(
            "{:>12.4e} {:>14.6e} {:>14.6e} {:>14.6e} {:>12} {:>14.6e}{}",
            s.t,
            s.radius,
            s.tail,
            s.bound,
            opt(s.ratio),
            s.confinement_ratio,
            if s.tail_extrapolated { "  (extrapolated)" } else { "" }
        );
    }
    let f = &r.diameter_fit;
    println!(
        "diameter slope {:.4} (95% CI [{:.4}, {:.4}], {} samples over t in [{:.3e}, {:.3e}])",
        f.exponent, f.ci_low, f.ci_high, f.samples, f.t_min, f.t_max
    );
    println!(
        "max tail/bound {}  confinement-ratio slope {:.4}  verdict {}",
        opt(r.max_ratio),
        r.confinement_ratio_slope,
        if r.pass { "PASS" } else { "FAIL" }
    );
}

fn resume(a: ResumeArgs) -> Result<()> {
    let o = runner::resume(
        &a.checkpoint,
        ResumeOptions {
            t_end: a.t_end,
            dt: a.dt,
            allow_param_change: a.allow_param_change,
        },
    )?;
    match o.output {
        None => println!("checkpoint already at t_end; nothing to do"),
        Some(s) => println!("seed {}  rows {}  {}", s.seed, s.rows, s.diagnostics.display()),
    }
    Ok(())
}

fn validate_kernel(a: KernelArgs) -> Result<()> {
    let r = validate_decay_envelope(DecayEnvelope { c1: a.c1, c2: a.c2 }, a.samples)?;
    println!("{}", serde_json::to_string_pretty(&r)?);
    if r.pass {
        Ok(())
    } else {
        Err(Error::EnvelopeExceeded {
            max_ratio: r.max_ratio,
            at: r.worst_separation,
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::ReplayBounds(a) => replay(a),
        Command::Report(a) => report(a),
        Command::Resume(a) => resume(a),
        Command::ValidateKernel(a) => validate_kernel(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

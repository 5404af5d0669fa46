use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pullback_core::attractor::{
    forwards_distance_profile, li_yorke_probe, pullback_lower_boundary, pullback_upper_boundary,
};
use pullback_core::cocycle::classify_point;
use pullback_core::dynamics::evolve_checkpoints;

use pullback_lab::experiments::{grid, num, rows2, Ctx};
use pullback_lab::plot::Series;
use pullback_lab::record::{report, RunRecord};
use pullback_lab::sweep::{sweep, write_csv};
use pullback_lab::{run_experiment, Assertion, ExperimentConfig, LabError};

#[derive(Parser)]
#[command(name = "pblab", version, about = "Pullback-attractor laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Base-point offset (overrides `experiment.offset`).
    #[arg(long, allow_hyphen_values = true)]
    offset: Option<f64>,
    /// Horizon (overrides `experiment.horizon`).
    #[arg(long = "T")]
    horizon: Option<f64>,
    /// Output directory (overrides `output.directory`).
    #[arg(long)]
    out: Option<String>,
    /// Also write SVG charts.
    #[arg(long)]
    plot: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evolve R·e0 and write the sup-norm trace and final profile.
    Simulate(Common),
    /// Upper and lower boundary at the offset.
    Pullback(Common),
    /// Finite-window class evidence at the offset.
    Classify(Common),
    /// Forwards distance to the segment / order-interval models.
    Forwards(Common),
    /// Li-Yorke probe on λ1·b, λ2·b.
    Liyorke(Common),
    /// classify + pullback at each offset.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated offsets (default: `experiment.offsets`).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        offsets: Option<Vec<f64>>,
    },
    /// Summarise the run records under a directory.
    Report { dir: PathBuf },
    /// Run the named experiment of the config.
    Run(Common),
}

fn load(c: &Common) -> Result<ExperimentConfig, LabError> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(o) = c.offset {
        cfg.experiment.offset = o;
    }
    if let Some(t) = c.horizon {
        cfg.experiment.horizon = Some(t);
    }
    if let Some(out) = &c.out {
        cfg.output.directory = out.clone();
    }
    cfg.output.plot |= c.plot;
    cfg.validate()?;
    Ok(cfg)
}

fn print_record(rec: &RunRecord) {
    println!("{} [{}]", rec.experiment, &rec.config_hash[..12]);
    for a in &rec.assertions {
        let m = a.measured.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "n/a".into());
        println!("  {:<36} {:>14}  {:<28} {}", a.name, m, a.threshold, if a.passed { "pass" } else { "FAIL" });
    }
    for n in &rec.notes {
        println!("  note: {n}");
    }
    for o in &rec.outputs {
        println!("  wrote {o}");
    }
}

fn simulate(cfg: &ExperimentConfig) -> Result<RunRecord, LabError> {
    let mut ctx = Ctx::open(cfg, "simulate", "forward trajectory of R·e0")?;
    let spec = ctx.spec.clone();
    let r = cfg.experiment.bounds.first().copied().unwrap_or(4.0 * spec.nonlinearity.r0);
    let times = grid(ctx.horizon(50.0), ctx.step(0.5));
    let track = evolve_checkpoints(&spec, ctx.base(), &spec.e0().scaled(r), &times)?;
    let norms: Vec<(f64, f64)> = times.iter().zip(&track).map(|(&t, s)| (t, spec.basis.sup_norm(s))).collect();
    ctx.csv("trajectory.csv", &["t", "sup_norm"], &rows2(&norms))?;
    let last = spec.basis.to_grid(track.last().unwrap());
    let profile: Vec<(f64, f64)> = spec.basis.x.iter().cloned().zip(last).collect();
    ctx.csv("final_profile.csv", &["x", "u"], &rows2(&profile))?;
    ctx.svg("trajectory.svg", "|u(t, p, R e0)|", "sup norm", &[Series { label: "sup norm", points: &norms }], false)?;
    ctx.finish()
}

fn pullback(cfg: &ExperimentConfig) -> Result<RunRecord, LabError> {
    let mut ctx = Ctx::open(cfg, "pullback", "pullback boundary b(p) and its lower counterpart")?;
    let (spec, p, params) = (ctx.spec.clone(), ctx.base(), ctx.params());
    let (b, rec) = pullback_upper_boundary(&spec, p, &params)?;
    let (lo, _) = pullback_lower_boundary(&spec, p, &params)?;
    ctx.rec.push(Assertion::holds("pullback_converged", rec.residual, &format!("<= {:e}", params.tol), rec.converged));
    ctx.rec.push(Assertion::at_most("iterates_max_increase", rec.max_increase, 1e-8));
    ctx.rec.push(Assertion::at_most("lower_plus_upper", spec.basis.sup_norm(&b.add(&lo)), 2.0 * params.tol));
    ctx.rec.note(format!(
        "{} iterations, depth {}, |b| = {}, declared zero {}",
        rec.iterations,
        rec.depth,
        spec.basis.sup_norm(&b),
        rec.declared_zero
    ));
    let (gb, gl) = (spec.basis.to_grid(&b), spec.basis.to_grid(&lo));
    let rows: Vec<Vec<String>> = spec.basis.x.iter().zip(gb.iter().zip(&gl)).map(|(x, (u, l))| vec![num(*x), num(*u), num(*l)]).collect();
    ctx.csv("boundary.csv", &["x", "b", "lower"], &rows)?;
    let res: Vec<(f64, f64)> = rec.residuals.iter().enumerate().map(|(i, r)| ((i + 1) as f64, *r)).collect();
    ctx.csv("residuals.csv", &["iteration", "residual"], &rows2(&res))?;
    ctx.svg("residuals.svg", "pullback residuals", "residual", &[Series { label: "|b_n - b_n-1|", points: &res }], true)?;
    ctx.finish()
}

fn classify(cfg: &ExperimentConfig) -> Result<RunRecord, LabError> {
    let mut ctx = Ctx::open(cfg, "classify", "finite-window class evidence")?;
    let window = cfg.experiment.window.unwrap_or_default();
    let th = cfg.experiment.thresholds.unwrap_or_default();
    let rep = classify_point(&ctx.spec, ctx.base(), window, th)?;
    let path = ctx.dir.join("classification.json");
    std::fs::write(&path, serde_json::to_string_pretty(&rep).map_err(|e| LabError::Data(e.to_string()))?)?;
    ctx.rec.outputs.push(path.display().to_string());
    for (name, ev) in [
        ("f_candidate", rep.f_candidate),
        ("s_candidate", rep.s_candidate),
        ("a_plus", rep.a_plus),
        ("a_minus", rep.a_minus),
        ("oscillating", rep.oscillating),
        ("recurrent_plus", rep.recurrent_plus),
        ("recurrent_minus", rep.recurrent_minus),
        ("forward_unbounded", rep.forward_unbounded),
    ] {
        ctx.rec.note(format!("{name}: {} (statistic {})", ev.flag, ev.statistic));
    }
    ctx.finish()
}

fn forwards(cfg: &ExperimentConfig) -> Result<RunRecord, LabError> {
    let mut ctx = Ctx::open(cfg, "forwards", "forwards distance to the section models")?;
    let (spec, p, params) = (ctx.spec.clone(), ctx.base(), ctx.params());
    let times = grid(ctx.horizon(200.0), ctx.step(5.0));
    let traj = ctx.boundary(&spec, p, &times, &params)?;
    let bounds = if cfg.experiment.bounds.is_empty() { vec![1.0, 2.0, 4.0, 8.0, 16.0] } else { cfg.experiment.bounds.clone() };
    let mut rows = Vec::new();
    for &r in &bounds {
        let prof = forwards_distance_profile(&spec, p, r, &traj, cfg.experiment.sample_k.unwrap_or(6), cfg.experiment.seed)?;
        if let Some(s) = prof.last() {
            ctx.rec.note(format!("R = {r}: final segment distance {:e}, interval distance {:e}", s.segment, s.interval));
        }
        rows.extend(prof.iter().map(|s| vec![num(r), num(s.t), num(s.segment), num(s.interval)]));
    }
    ctx.csv("distance.csv", &["R", "t", "segment", "interval"], &rows)?;
    ctx.finish()
}

fn liyorke(cfg: &ExperimentConfig) -> Result<RunRecord, LabError> {
    let mut ctx = Ctx::open(cfg, "liyorke", "Li-Yorke probe")?;
    let (spec, p, params) = (ctx.spec.clone(), ctx.base(), ctx.params());
    let [l1, l2] = cfg.experiment.lambdas.unwrap_or([0.2, 0.9]);
    let (b, rec) = pullback_upper_boundary(&spec, p, &params)?;
    ctx.rec.push(Assertion::holds("pullback_converged", rec.residual, &format!("<= {:e}", params.tol), rec.converged));
    let times = grid(ctx.horizon(400.0), ctx.step(0.5));
    let ly = li_yorke_probe(&spec, p, &b, l1, l2, &times)?;
    ctx.rec.note(format!("liminf_est {:e}, limsup_est {:e}", ly.liminf_est, ly.limsup_est));
    ctx.csv("liyorke.csv", &["t", "distance"], &rows2(&ly.trace))?;
    ctx.svg("liyorke.svg", "Li-Yorke distance", "dist", &[Series { label: "dist", points: &ly.trace }], true)?;
    ctx.finish()
}

fn run_sweep(cfg: &ExperimentConfig, offsets: Option<Vec<f64>>) -> Result<RunRecord, LabError> {
    let offsets = offsets.unwrap_or_else(|| cfg.experiment.offsets.clone());
    let mut ctx = Ctx::open(cfg, "sweep", "classification and pullback across offsets")?;
    let res = sweep(cfg, &offsets)?;
    for w in &res.warnings {
        eprintln!("warning: {w}");
        ctx.rec.note(format!("warning: {w}"));
    }
    let failed = res.rows.iter().filter(|r| r.error.is_some()).count();
    ctx.rec.note(format!("{} rows, {failed} with errors", res.rows.len()));
    let path = ctx.dir.join("sweep.csv");
    write_csv(&path, &res.rows)?;
    ctx.rec.outputs.push(path.display().to_string());
    ctx.finish()
}

fn dispatch(cmd: Cmd) -> Result<ExitCode, LabError> {
    let rec = match cmd {
        Cmd::Report { dir } => {
            let (text, status) = report(&dir)?;
            print!("{text}");
            return Ok(ExitCode::from(status.exit_code() as u8));
        }
        Cmd::Simulate(c) => simulate(&load(&c)?)?,
        Cmd::Pullback(c) => pullback(&load(&c)?)?,
        Cmd::Classify(c) => classify(&load(&c)?)?,
        Cmd::Forwards(c) => forwards(&load(&c)?)?,
        Cmd::Liyorke(c) => liyorke(&load(&c)?)?,
        Cmd::Sweep { common, offsets } => run_sweep(&load(&common)?, offsets)?,
        Cmd::Run(c) => run_experiment(&load(&c)?)?,
    };
    print_record(&rec);
    Ok(if rec.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

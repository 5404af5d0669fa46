//! Acceptance suite: one PASS/FAIL line per criterion, with the measured
//! values. Exits nonzero if any criterion fails.

use std::f64::consts::TAU;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pullback_core::attractor::{
    equilibrium_residual, pullback_lower_boundary, pullback_upper_boundary, random_positive, PullbackParams,
};
use pullback_core::cocycle::lyapunov_estimate;
use pullback_core::driving::{BasePoint, Driver, Term, WindowForm};
use pullback_core::dynamics::{absorbing_radius, evolve, linear_propagate, Adaptive, Integrator, ProblemSpec};
use pullback_core::spatial::{Basis, State};

use pullback_lab::config::{default_trig, plateau_dips};
use pullback_lab::experiments::mean_shift_control;
use pullback_lab::{run_experiment, ExperimentConfig, RunRecord};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

// ---------- C1 ----------

fn trig(rng: &mut ChaCha8Rng) -> Driver {
    let n = rng.gen_range(1..4);
    Driver::trig_poly((0..n).map(|_| Term::new(rng.gen_range(-1.0..1.0), rng.gen_range(0.1..3.0), rng.gen_range(0.0..TAU))).collect())
}

fn nonneg(basis: &Basis, rng: &mut ChaCha8Rng, max_amp: f64) -> State {
    let amp = rng.gen_range(0.0..max_amp);
    let z = random_positive(basis, rng);
    z.scaled(amp / basis.sup_norm(&z))
}

fn excess(basis: &Basis, a: &State, b: &State) -> f64 {
    let (ga, gb) = (basis.to_grid(a), basis.to_grid(b));
    ga.iter().zip(&gb).fold(0.0f64, |m, (x, y)| m.max(x - y))
}

fn c1() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let lattice = |rng: &mut ChaCha8Rng, lo: i64, hi: i64| rng.gen_range(lo..hi) as f64 * 1e-2;
    let mut worst = [0.0f64; 5];
    for _ in 0..50 {
        let spec = ProblemSpec::desk(trig(&mut rng)).unwrap();
        let basis = &spec.basis;
        let p = BasePoint::new(lattice(&mut rng, -2000, 2000));
        let (t, u) = (lattice(&mut rng, 50, 500), lattice(&mut rng, 50, 500));
        let amp = rng.gen_range(0.1..6.0);

        // semicocycle identity
        let z = spec.e0().scaled(amp).add(&State::mode(spec.n(), 1, 0.3 * amp));
        let whole = evolve(&spec, p, &z, t + u).unwrap();
        let split = evolve(&spec, p.translate(t), &evolve(&spec, p, &z, t).unwrap(), u).unwrap();
        worst[0] = worst[0].max(basis.sup_dist(&whole, &split));

        // oddness
        let mut zs = State::zeros(spec.n());
        for c in zs.coeffs.iter_mut().take(6) {
            *c = rng.gen_range(-3.0..3.0);
        }
        let a = evolve(&spec, p, &zs, t).unwrap();
        let b = evolve(&spec, p, &zs.scaled(-1.0), t).unwrap();
        worst[1] = worst[1].max(basis.sup_norm(&a.add(&b)));

        // monotonicity
        let base = nonneg(basis, &mut rng, 4.0);
        let upper = base.add(&nonneg(basis, &mut rng, 4.0));
        let ul = evolve(&spec, p, &base.scaled(-0.5), t).unwrap();
        let uu = evolve(&spec, p, &upper, t).unwrap();
        worst[2] = worst[2].max(excess(basis, &ul, &uu));

        // linear domination 0 <= u <= linear flow
        let z = nonneg(basis, &mut rng, 6.0);
        let un = evolve(&spec, p, &z, t).unwrap();
        let ln = linear_propagate(&spec, p, &z, t).unwrap();
        worst[3] = worst[3].max(excess(basis, &un, &ln)).max(excess(basis, &State::zeros(spec.n()), &un));

        // sublinearity u(λz) <= λ u(z)
        let lambda = rng.gen_range(1.0..4.0);
        let big = evolve(&spec, p, &z.scaled(lambda), t).unwrap();
        worst[4] = worst[4].max(excess(basis, &big, &un.scaled(lambda)));
    }

    let spec = ProblemSpec::desk(default_trig()).unwrap();
    let z = spec.e0().scaled(3.0).add(&State::mode(spec.n(), 2, 0.5));
    let run = |dt: f64| {
        let s = spec.with_integrator(Integrator { dt, ..Integrator::default() }).unwrap();
        evolve(&s, BasePoint::new(0.3), &z, 5.0).unwrap()
    };
    let reference = run(1.25e-4);
    let errs: Vec<f64> = [2e-2, 1e-2, 5e-3].iter().map(|&dt| spec.basis.sup_dist(&run(dt), &reference)).collect();
    let order = errs.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min);

    let max_v = worst.iter().cloned().fold(0.0, f64::max);
    verdict(
        max_v <= 1e-8 && order >= 1.9,
        format!(
            "50 instances each; max violations: cocycle {:.1e}, odd {:.1e}, monotone {:.1e}, linear-dom {:.1e}, sublinear {:.1e} (<= 1e-8); order {order:.3} (>= 1.9)",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    )
}

// ---------- C2 ----------

fn any_driver(rng: &mut ChaCha8Rng, i: usize) -> Driver {
    match i % 4 {
        0 => trig(rng),
        1 => Driver::geometric(rng.gen_range(1..8)),
        2 => Driver::power(rng.gen_range(0.2..0.9), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
        _ => Driver::window(WindowForm::PlateauDips {
            plateau: rng.gen_range(0.0..50.0),
            depth: rng.gen_range(0.5..6.0),
            period: rng.gen_range(5.0..40.0),
            shoulder: 0.05,
            ramp: 2.0,
        }),
    }
}

fn c2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let d = any_driver(&mut rng, i);
        let spec = ProblemSpec::desk(d.clone()).unwrap();
        let (s, t) = (rng.gen_range(-50.0..50.0), rng.gen_range(0.0..100.0));
        let mut z = State::zeros(spec.n());
        for c in z.coeffs.iter_mut().take(8) {
            *c = rng.gen_range(-2.0..2.0);
        }
        let u = linear_propagate(&spec, BasePoint::new(s), &z, t).unwrap();
        let di = d.primitive(s + t) - d.primitive(s);
        for k in 0..8 {
            let m = (k + 1) as f64;
            // Dirichlet mode k: sin((k+1)x), rate 1 - (k+1)²
            let want = z.coeffs[k] * ((1.0 - m * m) * t + di).exp();
            // floor keeps underflowed modes (both sides ~0) from dividing by zero
            worst = worst.max((u.coeffs[k] - want).abs() / want.abs().max(1e-280));
        }
    }
    verdict(worst <= 1e-10, format!("50 states, T <= 100: max relative error {worst:.2e} (<= 1e-10)"))
}

// ---------- C3 ----------

fn c3() -> Verdict {
    let t = 1000.0;
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut drivers = vec![default_trig(), Driver::sine(0.5), Driver::geometric(6), plateau_dips(), Driver::sine(-0.3)];
    drivers.extend((0..10).map(|_| trig(&mut rng)));
    let mut worst_ratio = 0.0f64;
    let mut ok = true;
    for d in &drivers {
        let spec = ProblemSpec::desk(d.clone()).unwrap();
        let s = rng.gen_range(-500.0..500.0);
        let l = lyapunov_estimate(&spec, BasePoint::new(s), t).unwrap();
        let n = (t / 0.1) as usize;
        let sup_i = (0..=n).map(|i| d.primitive(s + t * i as f64 / n as f64).abs()).fold(0.0, f64::max);
        let bound = 2.0 * sup_i / t;
        ok &= l.abs() <= bound;
        if bound > 0.0 {
            worst_ratio = worst_ratio.max(l.abs() / bound);
        }
    }
    let spec = ProblemSpec::desk(mean_shift_control()).unwrap();
    let lc = lyapunov_estimate(&spec, BasePoint::new(0.0), t).unwrap();
    let ctrl = (lc + 0.1).abs();
    verdict(
        ok && ctrl <= 1e-3,
        format!(
            "{} bounded drivers: max |λ̂| / (2 sup|I|/T) = {worst_ratio:.3} (<= 1); control λ̂ = {lc:.6} (|λ̂ + 0.1| = {ctrl:.1e} <= 1e-3)",
            drivers.len()
        ),
    )
}

// ---------- C4 ----------

fn g(y: f64) -> f64 {
    let e = y.abs() - 1.0;
    if e <= 0.0 {
        0.0
    } else {
        -y.signum() * e * e
    }
}

/// First return to 0 of `y'' + y + g(y) = 0`, `y(0) = 0`, `y'(0) = s` (RK4), ∞ on escape.
fn first_zero(s: f64) -> f64 {
    let h = 1e-3;
    let f = |y: f64, v: f64| (v, -y - g(y));
    let (mut x, mut y, mut v) = (0.0, 0.0, s);
    loop {
        let (k1y, k1v) = f(y, v);
        let (k2y, k2v) = f(y + 0.5 * h * k1y, v + 0.5 * h * k1v);
        let (k3y, k3v) = f(y + 0.5 * h * k2y, v + 0.5 * h * k2v);
        let (k4y, k4v) = f(y + h * k3y, v + h * k3v);
        let ny = y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        let nv = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if x > 1.0 && ny <= 0.0 {
            return x + h * y / (y - ny);
        }
        if x > 10.0 || !ny.is_finite() {
            return f64::INFINITY;
        }
        x += h;
        y = ny;
        v = nv;
    }
}

/// Amplitude of the maximal positive steady state by shooting on `y'(0)`.
fn shooting_amplitude() -> f64 {
    let base = first_zero(0.5);
    let hits = |s: f64| (first_zero(s) - base).abs() < 1e-13;
    let (mut lo, mut hi) = (0.5, 3.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if hits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (h, mut y, mut v, mut best) = (1e-5, 0.0f64, lo, 0.0f64);
    let acc = |y: f64| -y - g(y);
    while v > 0.0 {
        v += 0.5 * h * acc(y);
        y += h * v;
        v += 0.5 * h * acc(y);
        best = best.max(y);
    }
    best
}

fn c4() -> Verdict {
    let spec = ProblemSpec::desk(Driver::power(0.5, -1.0, 1.0)).unwrap();
    let p = BasePoint::new(0.0);
    let params = PullbackParams::for_spec(&spec);
    let tol = params.tol;
    let (b, rec) = pullback_upper_boundary(&spec, p, &params).unwrap();
    let (b8, _) = pullback_upper_boundary(&spec, p, &PullbackParams { r: 8.0, ..params }).unwrap();
    let (lo, _) = pullback_lower_boundary(&spec, p, &params).unwrap();
    let r_indep = spec.basis.sup_dist(&b, &b8);
    let lower = spec.basis.sup_norm(&b.add(&lo));
    let eq = equilibrium_residual(&spec, p, &b, 50.0, 10, &params).unwrap().residual;

    let start = Instant::now();
    let amp = shooting_amplitude();
    let oracle_secs = start.elapsed().as_secs_f64();
    let auto = ProblemSpec::desk(Driver::zero())
        .unwrap()
        .with_integrator(Integrator { adaptive: Some(Adaptive { tol: 1e-8, dt_max: 1e4 }), ..Integrator::default() })
        .unwrap();
    let ap = PullbackParams { r: 4.0, t0: 1e5, tol: 1e-6, n_max: 30, min_depth: 0.0 };
    let (ba, _) = pullback_upper_boundary(&auto, p, &ap).unwrap();
    let shoot = auto.basis.sup_dist(&ba, &auto.e0().scaled(amp));

    let pass = rec.converged
        && rec.max_increase <= 1e-8
        && r_indep <= 2.0 * tol
        && eq <= 5.0 * tol
        && lower <= 2.0 * tol
        && shoot <= 1e-4
        && oracle_secs < 1.0;
    verdict(
        pass,
        format!(
            "max increase {:.1e} (<= 1e-8); r=4 vs 8 {r_indep:.1e} (<= {:.0e}); equilibrium {eq:.1e} (<= {:.0e}); lower+upper {lower:.1e}; autonomous vs shooting {shoot:.1e} (< 1e-4, oracle {:.0} ms, amplitude {amp:.7})",
            rec.max_increase,
            2.0 * tol,
            5.0 * tol,
            oracle_secs * 1e3
        ),
    )
}

// ---------- lab-backed criteria ----------

fn run(name: &str, out: &Path) -> RunRecord {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.toml"));
    let mut cfg = ExperimentConfig::load(&path).unwrap();
    cfg.output.directory = out.display().to_string();
    cfg.output.plot = false;
    run_experiment(&cfg).unwrap()
}

fn from_record(rec: &RunRecord, names: &[&str]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in names {
        match rec.assertions.iter().find(|a| a.name == *n) {
            Some(a) => {
                pass &= a.passed;
                let m = a.measured.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "n/a".into());
                parts.push(format!("{n} {m} ({}){}", a.threshold, if a.passed { "" } else { " FAIL" }));
            }
            None => {
                pass = false;
                parts.push(format!("{n} missing"));
            }
        }
    }
    // a prerequisite failure is recorded separately
    if let Some(a) = rec.assertions.iter().find(|a| a.name == "experiment_completed") {
        pass = false;
        parts.push(format!("error: {}", a.error.clone().unwrap_or_default()));
    }
    verdict(pass, parts.join("; "))
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let start = Instant::now();
    let mut lines: Vec<(&str, &str, Verdict)> = Vec::new();
    let mut emit = |id: &'static str, title: &'static str, v: Verdict| {
        println!("[{}] {id} {title}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        lines.push((id, title, v));
    };

    emit("C1", "semiflow correctness", c1());
    emit("C2", "exact-linear oracle", c2());
    emit("C3", "null Lyapunov exponent", c3());
    emit("C4", "pullback boundary", c4());

    let rec = run("b_case_forwards", out);
    let mut v = from_record(&rec, &["segment_distance_last_quarter_max", "settle_time", "runtime_seconds"]);
    if let Some(n) = rec.notes.iter().find(|n| n.starts_with("R = 16")) {
        v.detail.push_str(&format!("; {n}"));
    }
    emit("C5", "bounded-cocycle forwards attraction", v);

    let rec = run("pinched_no_forwards", out);
    emit("C6", "pinched, no forwards attraction", from_record(&rec, &["pinched_boundary_norm", "distance_to_zero_at_window_end"]));

    let rec = run("asymptotic_zero_attractor", out);
    emit(
        "C7",
        "asymptotically zero attractor",
        from_record(
            &rec,
            &["boundary_norm_at_offset", "boundary_strictly_positive", "trajectory_norm_at_window_end", "boundary_norm_at_window_end"],
        ),
    );

    let rec = run("fr_segment_liyorke", out);
    emit(
        "C8",
        "bounded past with recurrent dips",
        from_record(
            &rec,
            &["pullback_residual", "forward_max_norm", "forward_max_norm_reaches", "forward_min_norm", "r0_crossings", "angle_to_e0_rad"],
        ),
    );
    emit("C9", "Li-Yorke pair", from_record(&rec, &["liyorke_liminf", "liyorke_limsup", "control_liminf"]));

    let rec = run("cone_containment", out);
    let mut v = from_record(&rec, &["mixed_count"]);
    v.detail.push_str(&format!("; {}", rec.notes.join("; ")));
    emit("C10", "cone containment", v);

    let rec = run("sublinear_forwards", out);
    emit(
        "C11",
        "sublinear forwards attraction",
        from_record(&rec, &["distance_from_2b", "distance_from_half_b", "b1_formula", "b1_below_b"]),
    );

    let rec = run("absorbing_check", out);
    let r_star = absorbing_radius(&ProblemSpec::desk(default_trig()).unwrap()).unwrap();
    let mut v = from_record(&rec, &["samples_absorbed", "max_norm_after_entry"]);
    v.pass &= r_star == 4.0;
    v.detail.push_str(&format!("; r* = {r_star} (= 4); {}", rec.notes.join("; ")));
    emit("C12", "absorbing ball", v);

    let failed: Vec<&str> = lines.iter().filter(|l| !l.2.pass).map(|l| l.0).collect();
    println!(
        "acceptance: {}/{} criteria passed in {:.0} s{}",
        lines.len() - failed.len(),
        lines.len(),
        start.elapsed().as_secs_f64(),
        if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}

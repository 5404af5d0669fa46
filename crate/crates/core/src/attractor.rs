//! Pullback construction of the attractor boundary `b(p) = sup A(p)` and the
//! diagnostics built on it: equilibrium residuals, forwards distance
//! profiles, Li-Yorke probes, threshold crossings, cone membership, `b1(p)`
//! and sublinear convergence traces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cocycle::{estimate_principal, ClassReport, Thresholds, Window, DEFAULT_PULL_DEPTH};
use crate::driving::{window_stats_with, BasePoint};
use crate::dynamics::{absorbing_radius, evolve, evolve_checkpoints, ProblemSpec};
use crate::error::{invalid, Error, Result};
use crate::par;
use crate::spatial::{Basis, BoundaryCondition, State};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PullbackParams {
    /// Initial amplitude `r` of `r·e0`.
    pub r: f64,
    /// Pullback step.
    pub t0: f64,
    pub tol: f64,
    pub n_max: usize,
    /// The stopping test is ignored until the pullback depth reaches this.
    /// Drivers with saturating transients can make consecutive iterates
    /// agree long before they have seen the relevant past.
    #[serde(default)]
    pub min_depth: f64,
}

impl PullbackParams {
    /// `r = max(r*, 4)`, `t0 = 5`, `tol = 1e-6`, `n_max = 400`. Drivers with
    /// unbounded slope have no finite `r*` bound; they fall back to `r = 4`.
    pub fn for_spec(spec: &ProblemSpec) -> Self {
        let r = absorbing_radius(spec).ok().filter(|r| r.is_finite()).unwrap_or(4.0).max(4.0);
        PullbackParams { r, t0: 5.0, tol: 1e-6, n_max: 400, min_depth: 0.0 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.t0 > 0.0 && self.tol > 0.0 && self.n_max >= 1 && self.min_depth >= 0.0) {
            return invalid("pullback needs r > 0, t0 > 0, tol > 0, n_max >= 1 and min_depth >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullbackRecord {
    pub iterations: usize,
    pub depth: f64,
    /// `||b_n - b_{n-1}||_∞` of the accepted iterate.
    pub residual: f64,
    pub converged: bool,
    /// Largest pointwise increase `max_x (b_n - b_{n-1})` seen over all
    /// iterations (the sequence should be nonincreasing).
    pub max_increase: f64,
    /// `||b||_∞` before any zero snapping.
    pub raw_norm: f64,
    /// `||b||_∞ < 10·tol`: the boundary is reported as exactly 0.
    pub declared_zero: bool,
    pub residuals: Vec<f64>,
}

impl PullbackRecord {
    pub fn monotone(&self) -> bool {
        self.max_increase <= 1e-8
    }
}

struct PullbackRun {
    b: State,
    prev: State,
    record: PullbackRecord,
}

fn pullback_run(spec: &ProblemSpec, p: BasePoint, params: &PullbackParams, sign: f64) -> Result<PullbackRun> {
    params.validate()?;
    let basis = &spec.basis;
    let start = spec.e0().scaled(sign * params.r);
    let autonomous = spec.driver.is_autonomous() && spec.is_homogeneous();
    let mut prev = start.clone();
    let mut residuals = Vec::new();
    let mut max_increase = f64::NEG_INFINITY;
    let mut converged = false;
    let mut n = 0;
    let mut cur = start.clone();
    while n < params.n_max {
        n += 1;
        let depth = n as f64 * params.t0;
        cur = if autonomous {
            // same discrete semiflow, so continuing equals restarting
            evolve(spec, p.translate(-params.t0), &prev, params.t0)?
        } else {
            evolve(spec, p.translate(-depth), &start, depth)?
        };
        let diff = cur.sub(&prev);
        let residual = basis.sup_norm(&diff);
        let inc = basis.to_grid(&diff).iter().fold(f64::NEG_INFINITY, |a, &v| a.max(sign * v));
        max_increase = max_increase.max(inc);
        residuals.push(residual);
        if residual < params.tol && depth >= params.min_depth {
            converged = true;
            break;
        }
        if n < params.n_max {
            prev = cur.clone();
        }
    }
    let raw_norm = basis.sup_norm(&cur);
    let declared_zero = raw_norm < 10.0 * params.tol;
    let record = PullbackRecord {
        iterations: n,
        depth: n as f64 * params.t0,
        residual: *residuals.last().unwrap(),
        converged,
        max_increase,
        raw_norm,
        declared_zero,
        residuals,
    };
    let (b, prev) = if declared_zero { (State::zeros(spec.n()), State::zeros(spec.n())) } else { (cur, prev) };
    Ok(PullbackRun { b, prev, record })
}

/// `b(p) = lim u(n t0, p·(-n t0), r e0)`, iterated until two consecutive
/// iterates are `tol`-close or `n_max` is reached (then flagged unconverged).
pub fn pullback_upper_boundary(spec: &ProblemSpec, p: BasePoint, params: &PullbackParams) -> Result<(State, PullbackRecord)> {
    let run = pullback_run(spec, p, params, 1.0)?;
    Ok((run.b, run.record))
}

/// Same construction from `-r e0`; by oddness of `g` this is `-b(p)`.
pub fn pullback_lower_boundary(spec: &ProblemSpec, p: BasePoint, params: &PullbackParams) -> Result<(State, PullbackRecord)> {
    let run = pullback_run(spec, p, params, -1.0)?;
    Ok((run.b, run.record))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryMode {
    /// A fresh pullback at every sample time.
    Independent,
    /// `b(p)` and the previous iterate carried forward by the semiflow:
    /// `u(t, p, b_n(p))` is itself a (deeper) pullback iterate at `p·t`, and
    /// the distance between the two carried iterates is the residual.
    Propagated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySample {
    pub t: f64,
    pub b: State,
    pub sup_norm: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTrajectory {
    pub offset: f64,
    pub params: PullbackParams,
    pub mode: TrajectoryMode,
    pub samples: Vec<BoundarySample>,
    /// Indices of samples whose residual exceeds `tol`.
    pub flagged: Vec<usize>,
}

impl BoundaryTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }
}

/// `b(p·t)` at each `t` of `times` (nondecreasing, `≥ 0` for `Propagated`).
pub fn boundary_trajectory(
    spec: &ProblemSpec,
    p: BasePoint,
    times: &[f64],
    params: &PullbackParams,
    mode: TrajectoryMode,
) -> Result<BoundaryTrajectory> {
    let basis = &spec.basis;
    let samples = match mode {
        TrajectoryMode::Independent => {
            let runs = par::map(times, |&t| pullback_run(spec, p.translate(t), params, 1.0));
            let mut out = Vec::with_capacity(times.len());
            for (run, &t) in runs.into_iter().zip(times) {
                let run = run?;
                let sup_norm = basis.sup_norm(&run.b);
                out.push(BoundarySample { t, b: run.b, sup_norm, residual: run.record.residual });
            }
            out
        }
        TrajectoryMode::Propagated => {
            if times.iter().any(|&t| t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
                return invalid("propagated trajectories need nondecreasing times >= 0");
            }
            let run = pullback_run(spec, p, params, 1.0)?;
            let pair = [run.b, run.prev];
            let mut tracks = par::map(&pair, |z| evolve_checkpoints(spec, p, z, times));
            let prev = tracks.pop().unwrap()?;
            let cur = tracks.pop().unwrap()?;
            cur.into_iter()
                .zip(prev)
                .zip(times)
                .map(|((b, q), &t)| {
                    let residual = basis.sup_dist(&b, &q);
                    BoundarySample { t, sup_norm: basis.sup_norm(&b), b, residual }
                })
                .collect()
        }
    };
    let flagged = samples.iter().enumerate().filter(|(_, s)| s.residual > params.tol).map(|(i, _)| i).collect();
    Ok(BoundaryTrajectory { offset: p.offset, params: *params, mode, samples, flagged })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumCheck {
    /// max over checkpoints of `||u(t,p,b) - b(p·t)|| / max(||b(p·t)||, tol)`.
    pub residual: f64,
    pub per_checkpoint: Vec<(f64, f64)>,
}

/// Invariance check of `b`: carry it forward and compare with independent
/// pullbacks at `n_checkpoints` equally spaced times in `(0, T]`.
pub fn equilibrium_residual(
    spec: &ProblemSpec,
    p: BasePoint,
    b: &State,
    t: f64,
    n_checkpoints: usize,
    params: &PullbackParams,
) -> Result<EquilibriumCheck> {
    if n_checkpoints == 0 || !(t > 0.0) {
        return invalid("equilibrium_residual needs T > 0 and at least one checkpoint");
    }
    let times: Vec<f64> = (1..=n_checkpoints).map(|i| t * i as f64 / n_checkpoints as f64).collect();
    let carried = evolve_checkpoints(spec, p, b, &times)?;
    let fresh = boundary_trajectory(spec, p, &times, params, TrajectoryMode::Independent)?;
    let basis = &spec.basis;
    let per: Vec<(f64, f64)> = carried
        .iter()
        .zip(&fresh.samples)
        .map(|(u, s)| (s.t, basis.sup_dist(u, &s.b) / s.sup_norm.max(params.tol)))
        .collect();
    let residual = per.iter().fold(0.0f64, |a, &(_, r)| a.max(r));
    Ok(EquilibriumCheck { residual, per_checkpoint: per })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionMode {
    Segment,
    OrderInterval,
}

/// Model of `A(p)`: the segment `{β b_ref : |β| ≤ 1}` or the order interval `[-b_ref, b_ref]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionModel {
    pub mode: SectionMode,
    pub b_ref: State,
}

impl SectionModel {
    pub fn distance(&self, basis: &Basis, z: &State) -> f64 {
        match self.mode {
            SectionMode::Segment => segment_distance(basis, z, &self.b_ref),
            SectionMode::OrderInterval => interval_distance(basis, z, &self.b_ref),
        }
    }
}

fn grid_sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// `min_{|β|≤1} ||z - β b||_∞`; the objective is convex in β, so golden
/// section on the grid sup finds the minimiser.
pub fn segment_distance(basis: &Basis, z: &State, b: &State) -> f64 {
    let zg = basis.to_grid(z);
    let bg = basis.to_grid(b);
    if grid_sup(&bg) == 0.0 {
        return basis.sup_norm(z);
    }
    let f = |beta: f64| -grid_sup(&zg.iter().zip(&bg).map(|(u, v)| u - beta * v).collect::<Vec<_>>());
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..90 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    let candidates = [-1.0, 1.0, 0.5 * (lo + hi)];
    let best = candidates.iter().copied().max_by(|a, b| f(*a).partial_cmp(&f(*b)).unwrap()).unwrap();
    basis.sup_dist(z, &b.scaled(best))
}

/// Grid sup of the pointwise violation of `-b ≤ z ≤ b`.
pub fn interval_distance(basis: &Basis, z: &State, b: &State) -> f64 {
    let zg = basis.to_grid(z);
    let bg = basis.to_grid(b);
    zg.iter().zip(&bg).fold(0.0f64, |a, (&u, &v)| {
        let w = v.abs();
        a.max(u - w).max(-w - u)
    })
}

/// Initial data of sup norm `R`: `+R e0`, `-R e0`, `±R·(mixed modes)`, then
/// seeded random positive profiles.
pub fn initial_samples(basis: &Basis, bound_r: f64, k: usize, seed: u64) -> Vec<State> {
    let n = basis.n_modes;
    let unit = |s: State| {
        let norm = basis.sup_norm(&s);
        s.scaled(bound_r / norm)
    };
    let mut mixed = State::zeros(n);
    mixed.coeffs[0] = 1.0;
    mixed.coeffs[1] = 0.6;
    if n > 2 {
        mixed.coeffs[2] = 0.3;
    }
    let mixed = unit(mixed);
    let mut out = vec![basis.e0_state().scaled(bound_r), basis.e0_state().scaled(-bound_r), mixed.clone(), mixed.scaled(-1.0)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < k {
        out.push(unit(random_positive(basis, &mut rng)));
    }
    out.truncate(k);
    out
}

/// `e0·(1 + 0.9·Σ_{k=1..4} ξ_k cos(kx)/4)`, `ξ_k ∈ [-1, 1]`: positive on the interior.
pub fn random_positive(basis: &Basis, rng: &mut impl Rng) -> State {
    let xi: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let f: Vec<f64> = basis
        .x
        .iter()
        .zip(&basis.e0)
        .map(|(x, e)| {
            let w: f64 = xi.iter().enumerate().map(|(k, v)| v * ((k + 1) as f64 * x).cos()).sum();
            e * (1.0 + 0.9 * w / 4.0)
        })
        .collect();
    basis.to_coeffs(&f).expect("grid length matches")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceSample {
    pub t: f64,
    /// Distance to the segment model.
    pub segment: f64,
    /// Distance to the order-interval model.
    pub interval: f64,
}

/// `max_z dist(u(t, p, z), A(p·t))` over sample initial data, for both
/// section models built from `boundary` (whose sample times are the grid).
pub fn forwards_distance_profile(
    spec: &ProblemSpec,
    p: BasePoint,
    bound_r: f64,
    boundary: &BoundaryTrajectory,
    sample_k: usize,
    seed: u64,
) -> Result<Vec<DistanceSample>> {
    if !(bound_r > 0.0) || sample_k == 0 {
        return invalid("forwards_distance_profile needs bound_R > 0 and sample_k >= 1");
    }
    let times = boundary.times();
    let samples = initial_samples(&spec.basis, bound_r, sample_k, seed);
    let tracks = par::map(&samples, |z| evolve_checkpoints(spec, p, z, &times));
    let tracks: Vec<Vec<State>> = tracks.into_iter().collect::<Result<_>>()?;
    let basis = &spec.basis;
    let out = boundary
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (mut seg, mut int) = (0.0f64, 0.0f64);
            for track in &tracks {
                seg = seg.max(segment_distance(basis, &track[i], &s.b));
                int = int.max(interval_distance(basis, &track[i], &s.b));
            }
            DistanceSample { t: s.t, segment: seg, interval: int }
        })
        .collect();
    Ok(out)
}

/// `max_z ||u(t, p, z)||_∞` over the same samples: distance to the section `{0}`.
pub fn distance_to_zero_profile(spec: &ProblemSpec, p: BasePoint, bound_r: f64, times: &[f64], sample_k: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    let samples = initial_samples(&spec.basis, bound_r, sample_k, seed);
    let tracks = par::map(&samples, |z| evolve_checkpoints(spec, p, z, times));
    let tracks: Vec<Vec<State>> = tracks.into_iter().collect::<Result<_>>()?;
    Ok(times
        .iter()
        .enumerate()
        .map(|(i, &t)| (t, tracks.iter().map(|tr| spec.basis.sup_norm(&tr[i])).fold(0.0, f64::max)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiYorkeProbe {
    pub liminf_est: f64,
    pub limsup_est: f64,
    pub trace: Vec<(f64, f64)>,
}

/// Distance between the trajectories from `λ1·b` and `λ2·b`; liminf/limsup
/// estimates are the min/max over the tail half of `t_grid`.
pub fn li_yorke_probe(spec: &ProblemSpec, p: BasePoint, b: &State, lambda1: f64, lambda2: f64, t_grid: &[f64]) -> Result<LiYorkeProbe> {
    if lambda1.abs() > 1.0 || lambda2.abs() > 1.0 {
        return invalid("li_yorke_probe needs |λ_i| <= 1");
    }
    if t_grid.is_empty() {
        return invalid("li_yorke_probe needs a nonempty time grid");
    }
    let starts = [b.scaled(lambda1), b.scaled(lambda2)];
    let tracks = par::map(&starts, |z| evolve_checkpoints(spec, p, z, t_grid));
    let (a, c) = (tracks[0].clone()?, tracks[1].clone()?);
    let trace: Vec<(f64, f64)> = t_grid.iter().zip(a.iter().zip(&c)).map(|(&t, (u, v))| (t, spec.basis.sup_dist(u, v))).collect();
    let tail = &trace[trace.len() / 2..];
    let liminf_est = tail.iter().fold(f64::INFINITY, |m, &(_, d)| m.min(d));
    let limsup_est = tail.iter().fold(0.0f64, |m, &(_, d)| m.max(d));
    Ok(LiYorkeProbe { liminf_est, limsup_est, trace })
}

/// Times where `||b(p·t)||_∞ - r0` changes sign, by linear interpolation.
pub fn crossing_times(spec: &ProblemSpec, boundary: &BoundaryTrajectory) -> Result<Vec<f64>> {
    let s = &boundary.samples;
    if s.windows(2).any(|w| w[1].t - w[0].t > 0.5 + 1e-12) {
        return invalid("crossing_times needs samples at most 0.5 time units apart");
    }
    let r0 = spec.nonlinearity.r0;
    let mut out = Vec::new();
    for w in s.windows(2) {
        let (f0, f1) = (w[0].sup_norm - r0, w[1].sup_norm - r0);
        if (f0 <= 0.0 && f1 > 0.0) || (f0 > 0.0 && f1 <= 0.0) {
            out.push(w[0].t + (w[1].t - w[0].t) * f0 / (f0 - f1));
        }
    }
    Ok(out)
}

/// `b1(p) = (r0 / m̂)·e(p)` with `m̂ = max_{[T_minus, 0]} c(t, p)`.
pub fn compute_b1(spec: &ProblemSpec, p: BasePoint, window: Window, th: Thresholds) -> Result<State> {
    if !spec.is_homogeneous() {
        return invalid("compute_b1 uses the closed-form cocycle; homogeneous linear part required");
    }
    let stats = window_stats_with(&spec.driver, p, window.t_minus, window.t_plus, th.grid_step, th.eps_rec)?;
    if stats.past_max > th.m_cut {
        return Err(Error::Refused(format!(
            "s-candidate evidence: max ln c over the past window is {:.3} > M_cut = {}",
            stats.past_max, th.m_cut
        )));
    }
    let e = estimate_principal(spec, p, DEFAULT_PULL_DEPTH)?.e_of_p;
    Ok(e.scaled(spec.nonlinearity.r0 / stats.past_max.exp()))
}

/// Angle (radians) between two profiles in the grid L² inner product.
pub fn angle_between(basis: &Basis, a: &State, b: &State) -> f64 {
    let (ga, gb) = (basis.to_grid(a), basis.to_grid(b));
    let (ab, aa, bb) = (basis.inner(&ga, &gb), basis.inner(&ga, &ga), basis.inner(&gb, &gb));
    if aa == 0.0 || bb == 0.0 {
        return 0.0;
    }
    // the acos form loses half the digits near 0; use the orthogonal residual
    let perp = (aa - ab * ab / bb).max(0.0).sqrt();
    perp.atan2(ab)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cone {
    StrictlyPositive,
    StrictlyNegative,
    Zero,
    Mixed,
}

/// Sign class of `z` on the interior grid. `||z|| ≤ tol` is zero; otherwise
/// the profile is scaled to sup 1 and must keep one sign up to `tol`, with
/// (Dirichlet) strictly signed values next to both boundary points, i.e. a
/// boundary derivative of the right sign, or (other BCs) strictly signed
/// values everywhere.
pub fn cone_membership(basis: &Basis, z: &State, tol: f64) -> Cone {
    let g = basis.to_grid(z);
    let s = grid_sup(&g);
    if s <= tol {
        return Cone::Zero;
    }
    let w: Vec<f64> = g.iter().map(|v| v / s).collect();
    let dirichlet = matches!(basis.bc, BoundaryCondition::Dirichlet);
    let (first, last) = (w[0], w[w.len() - 1]);
    let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pos = if dirichlet { min >= -tol && first > 0.0 && last > 0.0 } else { min > 0.0 };
    let neg = if dirichlet { max <= tol && first < 0.0 && last < 0.0 } else { max < 0.0 };
    match (pos, neg) {
        (true, _) => Cone::StrictlyPositive,
        (_, true) => Cone::StrictlyNegative,
        _ => Cone::Mixed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SublinearTrace {
    /// `(t, ||u(t, p, z0) - b(p·t)||_∞)`.
    pub trace: Vec<(f64, f64)>,
    pub final_distance: f64,
    /// Forward-growth and bounded-past evidence present, so decay is expected
    /// rather than merely observed.
    pub hypotheses_met: bool,
}

pub fn sublinear_convergence_test(
    spec: &ProblemSpec,
    p: BasePoint,
    z0: &State,
    boundary: &BoundaryTrajectory,
    evidence: Option<&ClassReport>,
) -> Result<SublinearTrace> {
    let times = boundary.times();
    let track = evolve_checkpoints(spec, p, z0, &times)?;
    let trace: Vec<(f64, f64)> = track.iter().zip(&boundary.samples).map(|(u, s)| (s.t, spec.basis.sup_dist(u, &s.b))).collect();
    let final_distance = trace.last().map(|x| x.1).unwrap_or(0.0);
    let hypotheses_met = evidence.map(|r| r.f_candidate.flag && r.forward_unbounded.flag).unwrap_or(false);
    Ok(SublinearTrace { trace, final_distance, hypotheses_met })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Absorption {
    /// First sample time after which every sample stays within the radius.
    pub entry_time: Option<f64>,
    pub max_after_entry: f64,
}

/// Sampled absorption check of one trajectory into `||·||_∞ ≤ radius`.
pub fn absorption_time(spec: &ProblemSpec, p: BasePoint, z: &State, t: f64, step: f64, radius: f64) -> Result<Absorption> {
    if !(step > 0.0 && t > 0.0) {
        return invalid("absorption_time needs T > 0 and step > 0");
    }
    let n = (t / step).round() as usize;
    let times: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
    let mut norms = vec![spec.basis.sup_norm(z)];
    norms.extend(evolve_checkpoints(spec, p, z, &times[1..])?.iter().map(|s| spec.basis.sup_norm(s)));
    let last_out = norms.iter().rposition(|&v| v > radius);
    let entry = match last_out {
        None => Some(0),
        Some(i) if i + 1 < norms.len() => Some(i + 1),
        _ => None,
    };
    Ok(match entry {
        Some(i) => Absorption { entry_time: Some(times[i]), max_after_entry: norms[i..].iter().cloned().fold(0.0, f64::max) },
        None => Absorption { entry_time: None, max_after_entry: f64::NAN },
    })
}

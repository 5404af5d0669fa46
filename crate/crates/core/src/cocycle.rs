//! The scalar principal cocycle `c(t, p)`, Lyapunov estimates, the
//! continuous-separation data and finite-horizon point classification.

use serde::{Deserialize, Serialize};

use crate::driving::{log_cocycle, window_stats_with, BasePoint, WindowStats};
use crate::dynamics::{linear_propagate, ProblemSpec};
use crate::error::{invalid, Result};
use crate::spatial::State;

/// Depth used when `e(p)` has to be estimated implicitly.
pub const DEFAULT_PULL_DEPTH: f64 = 20.0;
/// Residual below which a principal-vector estimate counts as converged.
pub const PRINCIPAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationEstimate {
    /// `e(p)`, sup-normalised and interior-positive.
    pub e_of_p: State,
    pub pullback_depth: f64,
    /// Sup distance to the estimate at twice the depth.
    pub residual: f64,
}

impl SeparationEstimate {
    pub fn converged(&self) -> bool {
        self.residual < PRINCIPAL_TOL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CocycleLog {
    pub value: f64,
    /// False when the principal vector behind a perturbed-mode value did not converge.
    pub reliable: bool,
}

fn normalized(spec: &ProblemSpec, v: &State) -> (State, f64) {
    let s = spec.basis.sup_norm(v);
    let sign = if v.coeffs[0] < 0.0 { -1.0 } else { 1.0 };
    (v.scaled(sign / s), s)
}

/// `normalize(φ(T, p·(-T)) e0)` and its distance to the depth-`2T` estimate.
pub fn estimate_principal(spec: &ProblemSpec, p: BasePoint, t_pull: f64) -> Result<SeparationEstimate> {
    if !(t_pull > 0.0) {
        return invalid(format!("estimate_principal: T_pull must be > 0, got {t_pull}"));
    }
    let e0 = spec.e0();
    if spec.is_homogeneous() {
        return Ok(SeparationEstimate { e_of_p: e0, pullback_depth: t_pull, residual: 0.0 });
    }
    let pull = |depth: f64| -> Result<State> {
        let v = linear_propagate(spec, p.translate(-depth), &e0, depth)?;
        Ok(normalized(spec, &v).0)
    };
    let e1 = pull(t_pull)?;
    let e2 = pull(2.0 * t_pull)?;
    let residual = spec.basis.sup_dist(&e1, &e2);
    Ok(SeparationEstimate { e_of_p: e1, pullback_depth: t_pull, residual })
}

/// `ln c(t, p)`: exact `I(s+t) - I(s)` in homogeneous mode, otherwise
/// `ln ||φ(t, p) e(p)||_∞` with `e(p)` from [`estimate_principal`].
pub fn cocycle_log(spec: &ProblemSpec, p: BasePoint, t: f64) -> Result<CocycleLog> {
    if spec.is_homogeneous() {
        return Ok(CocycleLog { value: log_cocycle(&spec.driver, p, t), reliable: true });
    }
    if t < 0.0 {
        let back = cocycle_log(spec, p.translate(t), -t)?;
        return Ok(CocycleLog { value: -back.value, reliable: back.reliable });
    }
    let est = estimate_principal(spec, p, DEFAULT_PULL_DEPTH)?;
    let v = linear_propagate(spec, p, &est.e_of_p, t)?;
    Ok(CocycleLog { value: spec.basis.sup_norm(&v).ln(), reliable: est.converged() })
}

/// `ln c(T, p) / T`.
pub fn lyapunov_estimate(spec: &ProblemSpec, p: BasePoint, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return invalid(format!("lyapunov_estimate: T must be > 0, got {t}"));
    }
    Ok(cocycle_log(spec, p, t)?.value / t)
}

/// Samples `(t, ln c(t, p))` on `[t_minus, t_plus]`, with `t = 0` on the grid.
/// The perturbed case follows the normalised principal vector forward from
/// `p·t_minus` and accumulates the logs of the renormalisations.
pub fn log_cocycle_trace(spec: &ProblemSpec, p: BasePoint, t_minus: f64, t_plus: f64, step: f64) -> Result<Vec<(f64, f64)>> {
    if !(step > 0.0) || t_minus > 0.0 || t_plus < 0.0 {
        return invalid("log_cocycle_trace needs step > 0 and t_minus <= 0 <= t_plus");
    }
    let mut times = Vec::new();
    let nm = (-t_minus / step).ceil() as usize;
    for i in (1..=nm).rev() {
        times.push((-(i as f64) * step).max(t_minus));
    }
    let np = (t_plus / step).ceil() as usize;
    for i in 0..=np {
        times.push((i as f64 * step).min(t_plus));
    }
    times.dedup();
    if spec.is_homogeneous() {
        return Ok(times.iter().map(|&t| (t, log_cocycle(&spec.driver, p, t))).collect());
    }
    let start = p.translate(times[0]);
    let mut v = estimate_principal(spec, start, DEFAULT_PULL_DEPTH)?.e_of_p;
    let mut acc = vec![0.0; times.len()];
    for i in 1..times.len() {
        let w = linear_propagate(spec, p.translate(times[i - 1]), &v, times[i] - times[i - 1])?;
        let (nv, s) = normalized(spec, &w);
        acc[i] = acc[i - 1] + s.ln();
        v = nv;
    }
    let i0 = times.iter().position(|&t| t == 0.0).unwrap_or(0);
    let base = acc[i0];
    Ok(times.iter().zip(&acc).map(|(&t, a)| (t, a - base)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// `ln c` bound for "bounded" (cocycle swing `e^{M_cut}`).
    pub m_cut: f64,
    /// "→ 0" means `c ≤ eps_zero`.
    pub eps_zero: f64,
    /// Recurrence band `|ln c| ≤ eps_rec`.
    pub eps_rec: f64,
    pub grid_step: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { m_cut: 8.0, eps_zero: 1e-3, eps_rec: 0.5, grid_step: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub t_minus: f64,
    pub t_plus: f64,
}

impl Default for Window {
    fn default() -> Self {
        Window { t_minus: -2000.0, t_plus: 2000.0 }
    }
}

/// A flag with the statistic that decided it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub flag: bool,
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub offset: f64,
    /// statistic: `max ln c` over `[T_minus, 0]`.
    pub f_candidate: Evidence,
    pub s_candidate: Evidence,
    /// statistic: `max ln c` over the last quarter of `[0, T_plus]`.
    pub a_plus: Evidence,
    /// statistic: `max ln c` over the earliest quarter of `[T_minus, 0]`.
    pub a_minus: Evidence,
    /// statistic: smallest margin by which both tails exceed `±M_cut`.
    pub oscillating: Evidence,
    /// statistic: `min |ln c|` over `t ≥ T_plus/2`.
    pub recurrent_plus: Evidence,
    /// statistic: `min |ln c|` over `t ≤ T_minus/2`.
    pub recurrent_minus: Evidence,
    /// statistic: `max ln c` over `[0, T_plus]` (limsup c = ∞ proxy).
    pub forward_unbounded: Evidence,
    pub stats: Option<WindowStats>,
    pub window: Window,
    pub thresholds: Thresholds,
}

pub fn classify_point(spec: &ProblemSpec, p: BasePoint, window: Window, th: Thresholds) -> Result<ClassReport> {
    if !(window.t_minus < 0.0 && 0.0 < window.t_plus) {
        return invalid(format!("window must satisfy T_minus < 0 < T_plus, got [{}, {}]", window.t_minus, window.t_plus));
    }
    if !(th.eps_zero > 0.0 && th.eps_rec >= 0.0 && th.grid_step > 0.0) {
        return invalid("thresholds need eps_zero > 0, eps_rec >= 0 and grid_step > 0");
    }
    let trace = log_cocycle_trace(spec, p, window.t_minus, window.t_plus, th.grid_step)?;
    let max_of = |pred: &dyn Fn(f64) -> bool| fold(&trace, pred, f64::NEG_INFINITY, |a, v| a.max(v));
    let min_of = |pred: &dyn Fn(f64) -> bool| fold(&trace, pred, f64::INFINITY, |a, v| a.min(v));
    let min_abs = |pred: &dyn Fn(f64) -> bool| fold(&trace, pred, f64::INFINITY, |a, v| a.min(v.abs()));

    let (tm, tp) = (window.t_minus, window.t_plus);
    let mut stats = None;
    let (past_max, past_min, fwd_max, fwd_min) = if spec.is_homogeneous() {
        let s = window_stats_with(&spec.driver, p, tm, tp, th.grid_step, th.eps_rec)?;
        stats = Some(s);
        (s.past_max, s.past_min, s.forward_max, s.forward_min)
    } else {
        (
            max_of(&|t| t <= 0.0),
            min_of(&|t| t <= 0.0),
            max_of(&|t| t >= 0.0),
            min_of(&|t| t >= 0.0),
        )
    };
    let f = past_max <= th.m_cut;
    let ln_zero = th.eps_zero.ln();
    let tail_plus = max_of(&|t| t >= 0.75 * tp);
    let tail_minus = max_of(&|t| t <= 0.75 * tm);
    let osc = (-fwd_min).min(fwd_max).min(-past_min).min(past_max) - th.m_cut;
    let rec_plus = min_abs(&|t| t >= 0.5 * tp);
    let rec_minus = min_abs(&|t| t <= 0.5 * tm);
    Ok(ClassReport {
        offset: p.offset,
        f_candidate: Evidence { flag: f, statistic: past_max },
        s_candidate: Evidence { flag: !f, statistic: past_max },
        a_plus: Evidence { flag: tail_plus <= ln_zero, statistic: tail_plus },
        // c → 0 in the past forces sup_{t≤0} c < ∞, so the window flag requires both
        a_minus: Evidence { flag: tail_minus <= ln_zero && f, statistic: tail_minus },
        oscillating: Evidence { flag: osc > 0.0, statistic: osc },
        recurrent_plus: Evidence { flag: rec_plus <= th.eps_rec, statistic: rec_plus },
        recurrent_minus: Evidence { flag: rec_minus <= th.eps_rec, statistic: rec_minus },
        forward_unbounded: Evidence { flag: fwd_max > th.m_cut, statistic: fwd_max },
        stats,
        window,
        thresholds: th,
    })
}

fn fold(trace: &[(f64, f64)], pred: &dyn Fn(f64) -> bool, init: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
    trace.iter().filter(|(t, _)| pred(*t)).fold(init, |a, &(_, v)| f(a, v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// Fitted `δ` in `ratio(t) ≈ M e^{-δ t}`.
    pub rate: f64,
    /// Fitted `M`.
    pub constant: f64,
    /// `μ_0 - μ_1` of the basis.
    pub gap: f64,
    /// `rate ≥ 0.9·gap`.
    pub dominated: bool,
}

/// Decay of `||φ(t,p) z2|| / ||φ(t,p) e(p)||`, with `φ(t,p) z2` taken modulo
/// the principal direction (Gram–Schmidt in the grid L² product after every
/// unit of time), fitted by least squares on `[0, T]`.
pub fn separation_gap_check(spec: &ProblemSpec, p: BasePoint, z2: &State, t: f64) -> Result<GapReport> {
    if !(t > 0.0) {
        return invalid("separation_gap_check: T must be > 0");
    }
    let basis = &spec.basis;
    let zn = z2.abs_sum();
    if zn == 0.0 || z2.coeffs[0].abs() > 1e-12 * zn {
        return invalid("separation_gap_check: z2 must be nonzero with zero principal coefficient");
    }
    let est = estimate_principal(spec, p, DEFAULT_PULL_DEPTH)?;
    let l2 = |s: &State| {
        let g = basis.to_grid(s);
        basis.inner(&g, &g).sqrt()
    };
    let mut v1 = est.e_of_p.clone();
    let mut v2 = z2.clone();
    let n1 = l2(&v1);
    v1 = v1.scaled(1.0 / n1);
    let mut log_ratio = (l2(&v2)).ln();
    v2 = v2.scaled(1.0 / l2(&v2));
    let dt_block = 0.5f64.min(t);
    let n_blocks = (t / dt_block).round().max(1.0) as usize;
    let mut ts = vec![0.0];
    let mut ys = vec![log_ratio];
    for i in 0..n_blocks {
        let q = p.translate(i as f64 * dt_block);
        let w1 = linear_propagate(spec, q, &v1, dt_block)?;
        let w2 = linear_propagate(spec, q, &v2, dt_block)?;
        let g1 = basis.to_grid(&w1);
        let g2 = basis.to_grid(&w2);
        let a1 = basis.inner(&g1, &g1).sqrt();
        let proj = basis.inner(&g2, &g1) / (a1 * a1);
        let w2 = w2.sub(&w1.scaled(proj));
        let a2 = l2(&w2);
        log_ratio += a2.ln() - a1.ln();
        v1 = w1.scaled(1.0 / a1);
        v2 = w2.scaled(1.0 / a2);
        ts.push((i + 1) as f64 * dt_block);
        ys.push(log_ratio);
    }
    let (slope, intercept) = least_squares(&ts, &ys);
    let gap = basis.gap;
    Ok(GapReport { rate: -slope, constant: intercept.exp(), gap, dominated: -slope >= 0.9 * gap })
}

pub(crate) fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    (slope, my - slope * mx)
}

//! Forcing signals `a(t)` with closed-form primitives `I(t) = ∫_0^t a`.
//!
//! A base point is a time offset `s` along one driver orbit; the cocycle log
//! along it is `ln c(t, p_s) = I(s + t) - I(s)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriverKind {
    TrigPoly,
    GeometricLimitPeriodic,
    SyntheticWindow,
}

/// One `amplitude * sin(frequency * t + phase)` component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl Term {
    pub fn new(amplitude: f64, frequency: f64, phase: f64) -> Self {
        Term { amplitude, frequency, phase }
    }

    fn eval(&self, t: f64) -> f64 {
        self.amplitude * (self.frequency * t + self.phase).sin()
    }

    fn primitive(&self, t: f64) -> f64 {
        let (a, w, ph) = (self.amplitude, self.frequency, self.phase);
        if w == 0.0 {
            return a * ph.sin() * t;
        }
        // (a/w)(cos ph - cos(wt + ph)) written without cancellation
        2.0 * (a / w) * (ph + 0.5 * w * t).sin() * (0.5 * w * t).sin()
    }
}

/// Built-in synthetic primitives, exact on the computational window.
///
/// `Power`: `I = past·|t|^β` for `t < 0`, `future·t^β` for `t ≥ 0`
/// (`a(0) := 0`). Signs select the class: `(-1,-1)` even decay (asymptotic
/// both ways), `(+1,-1)` odd (pinched, forward-asymptotic), `(+1,+1)` pinched
/// with forward growth, `(-1,+1)` bounded past with forward growth.
///
/// `PlateauDips`: `I = 0` on `[-plateau, 0]`; for `τ ≥ 0` (with `τ = t` to the
/// right, `τ = -plateau - t` to the left) `I = -s(τ)·(shoulder + depth·sin²(πτ/period))`,
/// `s(τ) = (1 - e^{-τ/ramp})²`. So `I ≤ 0`, `sup I = 0` is attained on the
/// plateau, and the orbit keeps returning to `-shoulder` between dips of
/// depth `shoulder + depth` (bounded past, recurrent, unbounded-free).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum WindowForm {
    Power {
        beta: f64,
        past: f64,
        future: f64,
    },
    PlateauDips {
        plateau: f64,
        depth: f64,
        period: f64,
        shoulder: f64,
        ramp: f64,
    },
}

impl WindowForm {
    fn validate(&self) -> Result<()> {
        match *self {
            WindowForm::Power { beta, past, future } => {
                if !(beta > 0.0 && beta < 1.0) {
                    return invalid(format!("power window: beta must lie in (0,1), got {beta}"));
                }
                if !past.is_finite() || !future.is_finite() {
                    return invalid("power window: non-finite coefficient");
                }
            }
            WindowForm::PlateauDips { plateau, depth, period, shoulder, ramp } => {
                if plateau < 0.0 || depth < 0.0 || shoulder < 0.0 {
                    return invalid("plateau_dips: plateau, depth and shoulder must be >= 0");
                }
                if period <= 0.0 || ramp <= 0.0 {
                    return invalid("plateau_dips: period and ramp must be > 0");
                }
            }
        }
        Ok(())
    }

    fn eval(&self, t: f64) -> f64 {
        match *self {
            WindowForm::Power { beta, past, future } => {
                if t > 0.0 {
                    future * beta * t.powf(beta - 1.0)
                } else if t < 0.0 {
                    -past * beta * (-t).powf(beta - 1.0)
                } else {
                    0.0
                }
            }
            WindowForm::PlateauDips { plateau, .. } => {
                if t >= 0.0 {
                    self.dips_slope(t)
                } else if t <= -plateau {
                    -self.dips_slope(-plateau - t)
                } else {
                    0.0
                }
            }
        }
    }

    fn primitive(&self, t: f64) -> f64 {
        match *self {
            WindowForm::Power { beta, past, future } => {
                if t >= 0.0 {
                    future * t.powf(beta)
                } else {
                    past * (-t).powf(beta)
                }
            }
            WindowForm::PlateauDips { plateau, .. } => {
                if t >= 0.0 {
                    self.dips_value(t)
                } else if t <= -plateau {
                    self.dips_value(-plateau - t)
                } else {
                    0.0
                }
            }
        }
    }

    fn dips_value(&self, tau: f64) -> f64 {
        let WindowForm::PlateauDips { depth, period, shoulder, ramp, .. } = *self else {
            unreachable!()
        };
        let s = (-(-tau / ramp).exp_m1()).powi(2);
        let sn = (std::f64::consts::PI * tau / period).sin();
        -s * (shoulder + depth * sn * sn)
    }

    fn dips_slope(&self, tau: f64) -> f64 {
        let WindowForm::PlateauDips { depth, period, shoulder, ramp, .. } = *self else {
            unreachable!()
        };
        let e = (-tau / ramp).exp();
        let s = (1.0 - e).powi(2);
        let ds = 2.0 * (1.0 - e) * e / ramp;
        let w = std::f64::consts::PI / period;
        let sn = (w * tau).sin();
        -(ds * (shoulder + depth * sn * sn) + s * depth * w * (2.0 * w * tau).sin())
    }

    /// sup |a|, or infinity when the slope is unbounded.
    fn lipschitz(&self) -> f64 {
        match *self {
            WindowForm::Power { .. } => f64::INFINITY,
            WindowForm::PlateauDips { depth, period, shoulder, ramp, .. } => {
                (shoulder + depth) / (2.0 * ramp) + depth * std::f64::consts::PI / period
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Driver {
    pub kind: DriverKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<Term>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_form: Option<WindowForm>,
    /// Documentation only; never read by any algorithm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_hint: Option<String>,
}

impl Driver {
    pub fn zero() -> Self {
        Driver::trig_poly(Vec::new())
    }

    pub fn trig_poly(terms: Vec<Term>) -> Self {
        Driver { kind: DriverKind::TrigPoly, terms, window_form: None, class_hint: None }
    }

    /// `a(t) = amplitude·sin(t)`.
    pub fn sine(amplitude: f64) -> Self {
        Driver::trig_poly(vec![Term::new(amplitude, 1.0, 0.0)])
    }

    /// `a(t) = -Σ_{k=1..K} 2^{-k} sin(4^{-k} t)`, `I(t) = -Σ 2^{k+1} sin²(4^{-k} t / 2)`.
    pub fn geometric(k_max: u32) -> Self {
        let terms = (1..=k_max)
            .map(|k| Term::new(-(0.5f64).powi(k as i32), (0.25f64).powi(k as i32), 0.0))
            .collect();
        Driver { kind: DriverKind::GeometricLimitPeriodic, terms, window_form: None, class_hint: None }
    }

    pub fn window(form: WindowForm) -> Self {
        Driver { kind: DriverKind::SyntheticWindow, terms: Vec::new(), window_form: Some(form), class_hint: None }
    }

    pub fn power(beta: f64, past: f64, future: f64) -> Self {
        Driver::window(WindowForm::Power { beta, past, future })
    }

    pub fn with_hint(mut self, hint: &str) -> Self {
        self.class_hint = Some(hint.to_string());
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            DriverKind::TrigPoly | DriverKind::GeometricLimitPeriodic => {
                if self.window_form.is_some() {
                    return invalid("window_form is only valid for synthetic_window drivers");
                }
                for term in &self.terms {
                    if !(term.amplitude.is_finite() && term.frequency.is_finite() && term.phase.is_finite()) {
                        return invalid("driver term with non-finite entry");
                    }
                    if term.frequency < 0.0 {
                        return invalid("driver term frequency must be >= 0");
                    }
                }
                Ok(())
            }
            DriverKind::SyntheticWindow => match &self.window_form {
                None => invalid("synthetic_window driver needs a window_form"),
                Some(form) => {
                    if !self.terms.is_empty() {
                        return invalid("synthetic_window drivers take no terms");
                    }
                    form.validate()
                }
            },
        }
    }

    /// `a(t)`. At the kink of a power form the value is 0 by convention.
    pub fn eval(&self, t: f64) -> f64 {
        match &self.window_form {
            Some(form) => form.eval(t),
            None => self.terms.iter().map(|term| term.eval(t)).sum(),
        }
    }

    /// Closed-form `I(t)`, with `I(0) = 0`.
    pub fn primitive(&self, t: f64) -> f64 {
        match &self.window_form {
            Some(form) => form.primitive(t),
            None => self.terms.iter().map(|term| term.primitive(t)).sum(),
        }
    }

    /// True when `a ≡ 0`, i.e. the problem is autonomous.
    pub fn is_autonomous(&self) -> bool {
        match &self.window_form {
            Some(WindowForm::Power { past, future, .. }) => *past == 0.0 && *future == 0.0,
            Some(WindowForm::PlateauDips { depth, shoulder, .. }) => *depth == 0.0 && *shoulder == 0.0,
            None => self.terms.iter().all(|t| t.amplitude == 0.0 || (t.frequency == 0.0 && t.phase.sin() == 0.0)),
        }
    }

    /// sup |a| (infinite for power forms).
    pub fn lipschitz(&self) -> f64 {
        match &self.window_form {
            Some(form) => form.lipschitz(),
            None => self.terms.iter().map(|t| t.amplitude.abs()).sum(),
        }
    }

    /// Upper bound for `max_{[t0,t1]} I`, sampling at spacing `h` plus a
    /// Lipschitz margin; exact for power forms (monotone on each side of 0).
    pub fn primitive_max(&self, t0: f64, t1: f64, h: f64) -> f64 {
        if let Some(WindowForm::Power { .. }) = self.window_form {
            let mut m = self.primitive(t0).max(self.primitive(t1));
            if t0 < 0.0 && t1 > 0.0 {
                m = m.max(0.0);
            }
            return m;
        }
        let span = t1 - t0;
        let n = ((span / h).ceil() as usize).max(1);
        let step = span / n as f64;
        let mut m = f64::NEG_INFINITY;
        for i in 0..=n {
            m = m.max(self.primitive(t0 + i as f64 * step));
        }
        m + 0.5 * self.lipschitz() * step
    }

    /// Least-squares slope of `ln M(t)` against `ln t` over `n` log-spaced
    /// times in `[t_lo, t_hi]`, where `M(t) = max_{[0,t]} |I|` (sampled at
    /// spacing `h`). About `β` for `|I| ~ t^β`, near 0 for bounded `I`.
    pub fn growth_exponent(&self, t_lo: f64, t_hi: f64, n: usize, h: f64) -> Result<f64> {
        if !(t_lo > 0.0 && t_hi > t_lo && n >= 2 && h > 0.0) {
            return invalid("growth_exponent needs 0 < t_lo < t_hi, n >= 2 and h > 0");
        }
        let ratio = (t_hi / t_lo).ln() / (n - 1) as f64;
        let (mut running, mut t) = (0.0f64, 0.0);
        let mut pts = Vec::with_capacity(n);
        for i in 0..n {
            let target = if i + 1 == n { t_hi } else { t_lo * (ratio * i as f64).exp() };
            while t < target {
                t = (t + h).min(target);
                running = running.max(self.primitive(t).abs());
            }
            if running > 0.0 {
                pts.push((target.ln(), running.ln()));
            }
        }
        if pts.len() < 2 {
            return Ok(0.0);
        }
        let k = pts.len() as f64;
        let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / k, pts.iter().map(|p| p.1).sum::<f64>() / k);
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Ok(sxy / sxx)
    }
}

/// A point of the base flow, represented by its time offset along the orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasePoint {
    pub offset: f64,
}

impl BasePoint {
    pub fn new(offset: f64) -> Self {
        BasePoint { offset }
    }

    /// `p·t`.
    pub fn translate(self, t: f64) -> Self {
        BasePoint { offset: self.offset + t }
    }
}

pub fn base_translate(p: BasePoint, t: f64) -> BasePoint {
    p.translate(t)
}

pub fn driver_eval(d: &Driver, t: f64) -> f64 {
    d.eval(t)
}

pub fn driver_primitive(d: &Driver, t: f64) -> f64 {
    d.primitive(t)
}

/// `ln c(t, p) = I(s + t) - I(s)` for the homogeneous linear part.
pub fn log_cocycle(d: &Driver, p: BasePoint, t: f64) -> f64 {
    d.primitive(p.offset + t) - d.primitive(p.offset)
}

/// Finite-window statistics of `ln c(·, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub t_minus: f64,
    pub t_plus: f64,
    pub past_max: f64,
    pub past_min: f64,
    pub forward_max: f64,
    pub forward_min: f64,
    /// Band half-width used for the recurrence proxies.
    pub eps_rec: f64,
    /// Returns into `|ln c| <= eps_rec` at `t >= t_plus/2`, counted as entries
    /// into the band (the first sample counts if it is already inside).
    pub returns_plus: usize,
    /// Same on `t <= t_minus/2`.
    pub returns_minus: usize,
    /// `min ln c` over `t >= t_plus/2` (how deep the forward excursions go).
    pub depth_plus: f64,
    /// `min ln c` over `t <= t_minus/2`.
    pub depth_minus: f64,
}

pub fn window_stats(d: &Driver, p: BasePoint, t_minus: f64, t_plus: f64, grid_step: f64) -> Result<WindowStats> {
    window_stats_with(d, p, t_minus, t_plus, grid_step, 0.5)
}

pub fn window_stats_with(
    d: &Driver,
    p: BasePoint,
    t_minus: f64,
    t_plus: f64,
    grid_step: f64,
    eps_rec: f64,
) -> Result<WindowStats> {
    if !(grid_step > 0.0) {
        return invalid(format!("grid_step must be > 0, got {grid_step}"));
    }
    if !(t_minus < 0.0 && 0.0 < t_plus) {
        return invalid(format!("window must satisfy T_minus < 0 < T_plus, got [{t_minus}, {t_plus}]"));
    }
    let lc = |t: f64| log_cocycle(d, p, t);
    let (past_min, past_max) = extrema(&lc, t_minus, 0.0, grid_step);
    let (forward_min, forward_max) = extrema(&lc, 0.0, t_plus, grid_step);
    let (returns_plus, depth_plus) = band_returns(&lc, 0.5 * t_plus, t_plus, grid_step, eps_rec);
    let (returns_minus, depth_minus) = band_returns(&|t| lc(-t), -0.5 * t_minus, -t_minus, grid_step, eps_rec);
    Ok(WindowStats {
        t_minus,
        t_plus,
        past_max,
        past_min,
        forward_max,
        forward_min,
        eps_rec,
        returns_plus,
        returns_minus,
        depth_plus,
        depth_minus,
    })
}

fn grid(t0: f64, t1: f64, h: f64) -> impl Iterator<Item = f64> {
    let n = (((t1 - t0) / h).ceil() as usize).max(1);
    let step = (t1 - t0) / n as f64;
    (0..=n).map(move |i| if i == n { t1 } else { t0 + i as f64 * step })
}

/// Grid extrema of `f` on `[t0, t1]`, each polished by golden-section search
/// on the two neighbouring cells.
pub(crate) fn extrema(f: &dyn Fn(f64) -> f64, t0: f64, t1: f64, h: f64) -> (f64, f64) {
    let ts: Vec<f64> = grid(t0, t1, h).collect();
    let vals: Vec<f64> = ts.iter().map(|&t| f(t)).collect();
    let (mut imin, mut imax) = (0, 0);
    for (i, &v) in vals.iter().enumerate() {
        if v < vals[imin] {
            imin = i;
        }
        if v > vals[imax] {
            imax = i;
        }
    }
    let bracket = |i: usize| (ts[i.saturating_sub(1)], ts[(i + 1).min(ts.len() - 1)]);
    let (a, b) = bracket(imax);
    let hi = crate::numeric::golden_max(f, a, b).max(vals[imax]);
    let (a, b) = bracket(imin);
    let lo = (-crate::numeric::golden_max(&|t| -f(t), a, b)).min(vals[imin]);
    (lo, hi)
}

fn band_returns(f: &dyn Fn(f64) -> f64, t0: f64, t1: f64, h: f64, eps: f64) -> (usize, f64) {
    let mut count = 0;
    let mut inside = false;
    let mut depth = f64::INFINITY;
    for t in grid(t0, t1, h) {
        let v = f(t);
        depth = depth.min(v);
        let now = v.abs() <= eps;
        if now && !inside {
            count += 1;
        }
        inside = now;
    }
    (count, depth)
}

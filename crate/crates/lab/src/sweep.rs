//! `classify_point` plus an upper-boundary pullback at each offset of a list.

use std::path::Path;

use pullback_core::attractor::{pullback_upper_boundary, PullbackParams};
use pullback_core::cocycle::{classify_point, ClassReport};
use pullback_core::driving::BasePoint;
use pullback_core::par;

use crate::config::ExperimentConfig;
use crate::experiments::num;
use crate::LabError;

pub const HEADER: &[&str] = &[
    "offset",
    "f_candidate",
    "past_max_ln_c",
    "s_candidate",
    "a_plus",
    "a_plus_stat",
    "a_minus",
    "a_minus_stat",
    "oscillating",
    "oscillating_margin",
    "recurrent_plus",
    "recurrent_plus_stat",
    "recurrent_minus",
    "recurrent_minus_stat",
    "forward_unbounded",
    "forward_max_ln_c",
    "b_norm",
    "pullback_iterations",
    "pullback_residual",
    "pullback_converged",
    "error",
];

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub offset: f64,
    pub class: Option<ClassReport>,
    /// `(‖b‖, iterations, residual, converged)`.
    pub pullback: Option<(f64, usize, f64, bool)>,
    pub error: Option<String>,
}

impl SweepRow {
    fn cells(&self) -> Vec<String> {
        let mut v = vec![num(self.offset)];
        match &self.class {
            Some(c) => {
                for ev in [&c.f_candidate, &c.s_candidate, &c.a_plus, &c.a_minus, &c.oscillating, &c.recurrent_plus, &c.recurrent_minus, &c.forward_unbounded] {
                    v.push(ev.flag.to_string());
                    // s_candidate shares its statistic with f_candidate
                    if !std::ptr::eq(ev, &c.s_candidate) {
                        v.push(num(ev.statistic));
                    }
                }
            }
            None => v.extend(std::iter::repeat_n(String::new(), 15)),
        }
        match self.pullback {
            Some((n, it, r, c)) => v.extend([num(n), it.to_string(), num(r), c.to_string()]),
            None => v.extend(std::iter::repeat_n(String::new(), 4)),
        }
        v.push(self.error.clone().unwrap_or_default());
        v
    }
}

/// Exact duplicates removed, first occurrence kept; returns the count removed.
pub fn dedup_offsets(offsets: &[f64]) -> (Vec<f64>, usize) {
    let mut out: Vec<f64> = Vec::with_capacity(offsets.len());
    for &o in offsets {
        if !out.iter().any(|&x| x.to_bits() == o.to_bits() || x == o) {
            out.push(o);
        }
    }
    let removed = offsets.len() - out.len();
    (out, removed)
}

pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub warnings: Vec<String>,
}

pub fn sweep(cfg: &ExperimentConfig, offsets: &[f64]) -> Result<SweepResult, LabError> {
    let spec = cfg.spec()?;
    let (offsets, removed) = dedup_offsets(offsets);
    let mut warnings = Vec::new();
    if removed > 0 {
        warnings.push(format!("removed {removed} duplicate offset(s)"));
    }
    let window = cfg.experiment.window.unwrap_or_default();
    let th = cfg.experiment.thresholds.unwrap_or_default();
    let params = cfg.experiment.pullback.unwrap_or_else(|| PullbackParams::for_spec(&spec));
    let rows = par::map(&offsets, |&o| {
        let p = BasePoint::new(o);
        let mut errors = Vec::new();
        let class = classify_point(&spec, p, window, th).map_err(|e| errors.push(format!("classify: {e}"))).ok();
        let pullback = pullback_upper_boundary(&spec, p, &params)
            .map(|(b, r)| (spec.basis.sup_norm(&b), r.iterations, r.residual, r.converged))
            .map_err(|e| errors.push(format!("pullback: {e}")))
            .ok();
        let error = (!errors.is_empty()).then(|| errors.join("; "));
        SweepRow { offset: o, class, pullback, error }
    });
    Ok(SweepResult { rows, warnings })
}

pub fn write_csv(path: &Path, rows: &[SweepRow]) -> Result<(), LabError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record(r.cells())?;
    }
    w.flush()?;
    Ok(())
}

//! Experiment configuration: a TOML file with fixed sections, unknown keys
//! rejected. The canonical form is `toml::to_string` of the parsed value, and
//! the config hash is SHA-256 over that form.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pullback_core::attractor::PullbackParams;
use pullback_core::cocycle::{Thresholds, Window};
use pullback_core::driving::{Driver, DriverKind, Term, WindowForm};
use pullback_core::dynamics::{Integrator, LinearPart, Nonlinearity, ProblemSpec};
use pullback_core::spatial::{Basis, BoundaryCondition};

use crate::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainSection,
    pub driver: DriverSection,
    #[serde(default = "homogeneous")]
    pub linear_part: LinearPart,
    pub nonlinearity: Nonlinearity,
    #[serde(default)]
    pub integrator: Integrator,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn homogeneous() -> LinearPart {
    LinearPart::Homogeneous
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bc {
    Dirichlet,
    Neumann,
    Robin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub bc: Bc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Galerkin modes.
    pub n: usize,
    /// Physical grid points.
    pub m: usize,
}

impl Default for DomainSection {
    fn default() -> Self {
        DomainSection { bc: Bc::Dirichlet, alpha: None, n: 64, m: 256 }
    }
}

/// Either a named built-in (with its optional knobs) or an explicit driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DriverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<DriverKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<Term>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_form: Option<WindowForm>,
}

pub const BUILTINS: &[&str] = &[
    "zero",
    "default_trig",
    "sine",
    "geometric",
    "power_pinched",
    "power_even_decay",
    "power_odd",
    "power_forward_growth",
    "plateau_dips",
];

/// `0.5 sin t + 0.5 sin(√2 t)`: quasi-periodic, bounded primitive.
pub fn default_trig() -> Driver {
    Driver::trig_poly(vec![Term::new(0.5, 1.0, 0.0), Term::new(0.5, std::f64::consts::SQRT_2, 0.0)])
}

pub fn plateau_dips() -> Driver {
    Driver::window(WindowForm::PlateauDips { plateau: 300.0, depth: 6.0, period: 40.0, shoulder: 0.05, ramp: 2.0 })
}

pub fn builtin_driver(name: &str, amplitude: Option<f64>, k_max: Option<u32>) -> Result<Driver, LabError> {
    let d = match name {
        "zero" => Driver::zero(),
        "default_trig" => default_trig(),
        "sine" => Driver::sine(amplitude.unwrap_or(0.5)),
        "geometric" => Driver::geometric(k_max.unwrap_or(6)),
        "power_pinched" => Driver::power(0.5, 1.0, 1.0),
        "power_even_decay" => Driver::power(0.5, -1.0, -1.0),
        "power_odd" => Driver::power(0.5, 1.0, -1.0),
        "power_forward_growth" => Driver::power(0.5, -1.0, 1.0),
        "plateau_dips" => plateau_dips(),
        other => {
            return Err(LabError::Config(format!(
                "driver.builtin: unknown built-in '{other}'; available: {}",
                BUILTINS.join(", ")
            )))
        }
    };
    Ok(d.with_hint(name))
}

impl DriverSection {
    pub fn builtin(name: &str) -> Self {
        DriverSection { builtin: Some(name.to_string()), ..Default::default() }
    }

    pub fn resolve(&self) -> Result<Driver, LabError> {
        let d = match (&self.builtin, self.kind) {
            (Some(_), Some(_)) => return Err(LabError::Config("driver: give either builtin or kind, not both".into())),
            (Some(name), None) => {
                if !self.terms.is_empty() || self.window_form.is_some() {
                    return Err(LabError::Config("driver: builtin drivers take no terms or window_form".into()));
                }
                builtin_driver(name, self.amplitude, self.k_max)?
            }
            (None, Some(kind)) => {
                if self.amplitude.is_some() || self.k_max.is_some() {
                    return Err(LabError::Config("driver: amplitude/k_max only apply to builtin drivers".into()));
                }
                Driver { kind, terms: self.terms.clone(), window_form: self.window_form, class_hint: None }
            }
            (None, None) => return Err(LabError::Config("driver: one of builtin or kind is required".into())),
        };
        d.validate().map_err(|e| LabError::Config(format!("driver: {e}")))?;
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub offset: f64,
    /// Forward horizon `T`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_step: Option<f64>,
    /// Initial-data bounds `R`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bounds: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<[f64; 2]>,
    /// Offsets for `sweep`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub offsets: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pullback: Option<PullbackParams>,
    /// Deeper pullback for reference boundaries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<PullbackParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Window>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Thresholds>,
    /// Comparison driver (e.g. the bounded control of a Li-Yorke run).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<DriverSection>,
}

impl ExperimentSection {
    pub fn named(name: &str) -> Self {
        ExperimentSection {
            name: name.to_string(),
            seed: 0,
            offset: 0.0,
            horizon: None,
            sample_step: None,
            bounds: Vec::new(),
            sample_k: None,
            samples: None,
            lambdas: None,
            offsets: Vec::new(),
            pullback: None,
            reference: None,
            window: None,
            thresholds: None,
            control: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: String,
    #[serde(default)]
    pub plot: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { directory: "out".into(), plot: false }
    }
}

fn check(ok: bool, name: &str, why: &str) -> Result<(), LabError> {
    if ok {
        Ok(())
    } else {
        Err(LabError::Config(format!("{name}: {why}")))
    }
}

fn check_pullback(p: &PullbackParams, name: &str) -> Result<(), LabError> {
    check(p.r > 0.0, &format!("{name}.r"), "must be > 0")?;
    check(p.t0 > 0.0, &format!("{name}.t0"), "must be > 0")?;
    check(p.tol > 0.0, &format!("{name}.tol"), "must be > 0")?;
    check(p.n_max >= 1, &format!("{name}.n_max"), "must be >= 1")?;
    check(p.min_depth >= 0.0, &format!("{name}.min_depth"), "must be >= 0")
}

impl ExperimentConfig {
    /// Desk defaults around a named experiment and driver.
    pub fn desk(experiment: &str, driver: &str) -> Self {
        ExperimentConfig {
            domain: DomainSection::default(),
            driver: DriverSection::builtin(driver),
            linear_part: LinearPart::Homogeneous,
            nonlinearity: Nonlinearity::new(1.0, 1.0),
            integrator: Integrator::default(),
            experiment: ExperimentSection::named(experiment),
            output: OutputSection::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, LabError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config values are TOML-representable")
    }

    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let d = &self.domain;
        check(d.n >= 1, "domain.n", "must be >= 1")?;
        check(d.m >= 2 * d.n, "domain.m", "must be >= 2·domain.n")?;
        match (d.bc, d.alpha) {
            (Bc::Robin, Some(a)) => check(a > 0.0, "domain.alpha", "must be > 0")?,
            (Bc::Robin, None) => check(false, "domain.alpha", "required for robin")?,
            (_, Some(_)) => check(false, "domain.alpha", "only valid for robin")?,
            _ => {}
        }
        self.driver.resolve()?;
        let nl = &self.nonlinearity;
        check(nl.r0 > 0.0 && nl.r0.is_finite(), "nonlinearity.r0", &format!("must be > 0, got {}", nl.r0))?;
        check(nl.kappa > 0.0 && nl.kappa.is_finite(), "nonlinearity.kappa", &format!("must be > 0, got {}", nl.kappa))?;
        let it = &self.integrator;
        check(it.dt > 0.0 && it.dt <= 0.1, "integrator.dt", "must lie in (0, 0.1]")?;
        if let Some(ad) = it.adaptive {
            check(ad.tol > 0.0, "integrator.adaptive.tol", "must be > 0")?;
            check(ad.dt_max >= it.dt, "integrator.adaptive.dt_max", "must be >= integrator.dt")?;
        }
        if let LinearPart::Perturbed { epsilon, chi } = &self.linear_part {
            check(epsilon.is_finite(), "linear_part.epsilon", "must be finite")?;
            chi.validate().map_err(|e| LabError::Config(format!("linear_part.chi: {e}")))?;
        }
        let e = &self.experiment;
        check(
            crate::experiments::NAMES.contains(&e.name.as_str()),
            "experiment.name",
            &format!("unknown experiment '{}'; available: {}", e.name, crate::experiments::NAMES.join(", ")),
        )?;
        check(e.seed <= i64::MAX as u64, "experiment.seed", "must fit in a signed 64-bit integer")?;
        check(e.offset.is_finite(), "experiment.offset", "must be finite")?;
        if let Some(h) = e.horizon {
            check(h > 0.0 && h.is_finite(), "experiment.horizon", "must be > 0")?;
        }
        if let Some(s) = e.sample_step {
            check(s > 0.0, "experiment.sample_step", "must be > 0")?;
        }
        check(e.bounds.iter().all(|&r| r > 0.0), "experiment.bounds", "entries must be > 0")?;
        if let Some(k) = e.sample_k {
            check(k >= 1, "experiment.sample_k", "must be >= 1")?;
        }
        if let Some(n) = e.samples {
            check(n >= 1, "experiment.samples", "must be >= 1")?;
        }
        if let Some([l1, l2]) = e.lambdas {
            check(l1.abs() <= 1.0 && l2.abs() <= 1.0, "experiment.lambdas", "entries must satisfy |λ| <= 1")?;
        }
        check(e.offsets.iter().all(|o| o.is_finite()), "experiment.offsets", "entries must be finite")?;
        if let Some(p) = &e.pullback {
            check_pullback(p, "experiment.pullback")?;
        }
        if let Some(p) = &e.reference {
            check_pullback(p, "experiment.reference")?;
        }
        if let Some(w) = &e.window {
            check(w.t_minus < 0.0 && 0.0 < w.t_plus, "experiment.window", "needs t_minus < 0 < t_plus")?;
        }
        if let Some(th) = &e.thresholds {
            check(th.m_cut > 0.0, "experiment.thresholds.m_cut", "must be > 0")?;
            check(th.eps_zero > 0.0 && th.eps_zero < 1.0, "experiment.thresholds.eps_zero", "must lie in (0, 1)")?;
            check(th.eps_rec > 0.0, "experiment.thresholds.eps_rec", "must be > 0")?;
            check(th.grid_step > 0.0, "experiment.thresholds.grid_step", "must be > 0")?;
        }
        if let Some(c) = &e.control {
            c.resolve().map_err(|err| LabError::Config(format!("experiment.control.{err}")))?;
        }
        check(!self.output.directory.is_empty(), "output.directory", "must not be empty")?;
        Ok(())
    }

    pub fn basis(&self) -> Result<Basis, LabError> {
        let bc = match self.domain.bc {
            Bc::Dirichlet => BoundaryCondition::Dirichlet,
            Bc::Neumann => BoundaryCondition::Neumann,
            Bc::Robin => BoundaryCondition::Robin { alpha: self.domain.alpha.unwrap_or(1.0) },
        };
        Ok(Basis::new(bc, self.domain.n, self.domain.m)?)
    }

    pub fn spec(&self) -> Result<ProblemSpec, LabError> {
        let basis = Arc::new(self.basis()?);
        Ok(ProblemSpec::new(basis, self.driver.resolve()?, self.linear_part.clone(), self.nonlinearity, self.integrator)?)
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

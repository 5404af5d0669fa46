//! On-disk cache of boundary trajectories, keyed by a hash of everything the
//! computation reads. A hit returns the stored result, so cached and fresh
//! trajectories agree exactly.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use pullback_core::attractor::{boundary_trajectory, BoundaryTrajectory, PullbackParams, TrajectoryMode};
use pullback_core::driving::{BasePoint, Driver};
use pullback_core::dynamics::{Integrator, LinearPart, Nonlinearity, ProblemSpec};

use crate::config::hex;
use crate::LabError;

#[derive(Serialize)]
struct Key<'a> {
    version: u32,
    bc: String,
    n: usize,
    m: usize,
    driver: Driver,
    linear_part: &'a LinearPart,
    nonlinearity: &'a Nonlinearity,
    integrator: &'a Integrator,
    offset: f64,
    times: &'a [f64],
    params: &'a PullbackParams,
    mode: TrajectoryMode,
}

pub fn trajectory_key(spec: &ProblemSpec, p: BasePoint, times: &[f64], params: &PullbackParams, mode: TrajectoryMode) -> String {
    let mut driver = spec.driver.clone();
    driver.class_hint = None;
    let key = Key {
        version: 1,
        bc: format!("{:?}", spec.basis.bc),
        n: spec.basis.n_modes,
        m: spec.basis.m_grid,
        driver,
        linear_part: &spec.linear_part,
        nonlinearity: &spec.nonlinearity,
        integrator: &spec.integrator,
        offset: p.offset,
        times,
        params,
        mode,
    };
    let bytes = serde_json::to_vec(&key).expect("key is serializable");
    hex(&Sha256::digest(&bytes))
}

#[derive(Debug, Clone)]
pub struct Cache {
    dir: Option<PathBuf>,
}

impl Cache {
    pub fn at(dir: impl Into<PathBuf>) -> Self {
        Cache { dir: Some(dir.into()) }
    }

    pub fn disabled() -> Self {
        Cache { dir: None }
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("boundary-{key}.json")))
    }

    /// Returns the trajectory and whether it came from the cache.
    pub fn boundary(
        &self,
        spec: &ProblemSpec,
        p: BasePoint,
        times: &[f64],
        params: &PullbackParams,
        mode: TrajectoryMode,
    ) -> Result<(BoundaryTrajectory, bool), LabError> {
        let key = trajectory_key(spec, p, times, params, mode);
        let path = self.path(&key);
        if let Some(path) = &path {
            if let Some(hit) = load(path) {
                return Ok((hit, true));
            }
        }
        let fresh = boundary_trajectory(spec, p, times, params, mode)?;
        if let Some(path) = &path {
            store(path, &fresh)?;
        }
        Ok((fresh, false))
    }
}

/// Unreadable or corrupt entries count as misses and get overwritten.
fn load(path: &Path) -> Option<BoundaryTrajectory> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

fn store(path: &Path, traj: &BoundaryTrajectory) -> Result<(), LabError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string(traj).map_err(|e| LabError::Data(e.to_string()))?;
    // write-then-rename so a killed run never leaves a truncated entry
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

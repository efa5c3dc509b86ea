use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use hwy_core::extension::{Extension, PoissonOperator};
use hwy_core::quadrature::QuadratureGrid;
use hwy_core::Dim;
use serde::Serialize;

use crate::cache;
use crate::error::{LabError, LabResult};

/// `NxM`: polar by azimuthal node counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SphereRes {
    pub polar: usize,
    pub azimuth: usize,
}

impl FromStr for SphereRes {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected NxM, got {s:?}"))?;
        let polar = a.trim().parse().map_err(|_| format!("bad polar count in {s:?}"))?;
        let azimuth = b.trim().parse().map_err(|_| format!("bad azimuth count in {s:?}"))?;
        Ok(SphereRes { polar, azimuth })
    }
}

impl std::fmt::Display for SphereRes {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.polar, self.azimuth)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabConfig {
    pub dim: usize,
    pub sphere_res: SphereRes,
    pub radial_res: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_cache: Option<PathBuf>,
}

impl Default for LabConfig {
    fn default() -> Self {
        LabConfig {
            dim: 3,
            sphere_res: SphereRes {
                polar: 64,
                azimuth: 128,
            },
            radial_res: 48,
            seed: 0,
            kernel_cache: None,
        }
    }
}

/// Grids plus the discrete extension operator for one configuration.
#[derive(Clone, Debug)]
pub struct Lab {
    pub config: LabConfig,
    pub dim: Dim,
    pub sphere: Arc<QuadratureGrid>,
    pub ball: Arc<QuadratureGrid>,
    pub op: Arc<PoissonOperator>,
}

impl Lab {
    pub fn build(config: &LabConfig) -> LabResult<Self> {
        let dim = Dim::new(config.dim)?;
        let sphere = Arc::new(QuadratureGrid::sphere(
            dim,
            config.sphere_res.polar,
            config.sphere_res.azimuth,
        )?);
        let ball = Arc::new(QuadratureGrid::ball(config.radial_res, &sphere)?);
        let op = match &config.kernel_cache {
            Some(path) if path.exists() => cache::load(path, sphere.clone(), ball.clone())?,
            Some(path) => {
                let op = PoissonOperator::new(sphere.clone(), ball.clone())?;
                cache::save(path, &op)?;
                op
            }
            None => PoissonOperator::new(sphere.clone(), ball.clone())?,
        };
        Ok(Lab {
            config: config.clone(),
            dim,
            sphere,
            ball,
            op: Arc::new(op),
        })
    }

    pub fn extension(&self) -> Extension {
        Extension::discrete(self.op.clone())
    }
}

impl From<String> for LabError {
    fn from(s: String) -> Self {
        LabError::Usage(s)
    }
}

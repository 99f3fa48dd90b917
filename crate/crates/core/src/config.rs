//! Run configuration: a flat `key = value` file with `[section]` headers.
//!
//! ```text
//! [frontend]
//! n_p = 5
//! dog_sigma2 = 2.0
//! [spatial]
//! wac_size = 15
//! ```
//!
//! Missing keys take their defaults; unknown keys are errors.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detector::DetectorParams;
use crate::error::{Error, Result};
use crate::frontend::{DogKernel, PhotoreceptorParams};
use crate::ganglion::GanglionParams;
use crate::spatial::SpatialParams;
use crate::temporal::CascadeParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontendParams {
    pub n_p: usize,
    pub u: f64,
    pub dog_gain: f64,
    pub dog_sigma1: f64,
    pub dog_sigma2: f64,
    pub dog_size: usize,
}

impl Default for FrontendParams {
    fn default() -> Self {
        let p = PhotoreceptorParams::default();
        let d = DogKernel::default();
        Self {
            n_p: p.n_p,
            u: p.u,
            dog_gain: d.gain,
            dog_sigma1: d.sigma1,
            dog_sigma2: d.sigma2,
            dog_size: d.size,
        }
    }
}

/// Viewing geometry used to convert degrees to pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneParams {
    /// Horizontal field of view, degrees.
    pub fov_deg: f64,
    pub frame_rate: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            fov_deg: 32.0,
            frame_rate: 300.0,
        }
    }
}

impl SceneParams {
    pub fn px_per_deg(&self, width: usize) -> f64 {
        crate::synth::deg_to_px(self.fov_deg, width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub frontend: FrontendParams,
    pub temporal: CascadeParams,
    pub spatial: SpatialParams,
    pub ganglion: GanglionParams,
    pub detector: DetectorParams,
    pub scene: SceneParams,
}

impl RunConfig {
    /// Single-target characterisation on a white ground.
    pub fn tuning() -> Self {
        let mut c = Self::default();
        c.spatial.wac_size = 15;
        c.spatial.wac_sigma = 1.2;
        c
    }

    /// Real footage resized to 320x240 with an assumed 80 degree field of view.
    pub fn real_footage() -> Self {
        Self {
            detector: DetectorParams::real(),
            scene: SceneParams {
                fov_deg: 80.0,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    pub fn photoreceptor(&self) -> PhotoreceptorParams {
        PhotoreceptorParams {
            n_p: self.frontend.n_p,
            u: self.frontend.u,
        }
    }

    pub fn dog(&self) -> DogKernel {
        DogKernel {
            gain: self.frontend.dog_gain,
            sigma1: self.frontend.dog_sigma1,
            sigma2: self.frontend.dog_sigma2,
            size: self.frontend.dog_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.temporal.validate()?;
        self.dog().build()?;
        let s = &self.spatial;
        if s.wac_size % 2 == 0 || s.gabor_size % 2 == 0 {
            return Err(Error::Config("kernel sizes must be odd".into()));
        }
        let d = &self.detector;
        if !(d.eps > 0.0) || d.n_min == 0 {
            return Err(Error::Config("need eps > 0 and n_min >= 1".into()));
        }
        if !(d.gamma > 0.0 && d.gamma < 1.0) {
            return Err(Error::Config("gamma must lie in (0, 1)".into()));
        }
        let g = &self.ganglion;
        if g.w_on < 0.0 || g.w_off < 0.0 {
            return Err(Error::Config("ON/OFF weights must be nonnegative".into()));
        }
        if !(self.scene.fov_deg > 0.0 && self.scene.frame_rate > 0.0) {
            return Err(Error::Config("fov and frame rate must be positive".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Short content hash of the configuration, for report headers.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

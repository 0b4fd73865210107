use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Psf, SamplingGrid};
use crate::pgd::PgdOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeModel {
    /// `e^{iφ}` with `φ` uniform on `[0, 2π)`.
    #[default]
    UnitModulus,
    /// Circular standard complex Gaussian entries.
    ComplexGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Width of the Gaussian PSF.
    Sigma,
    /// Signal-to-noise ratio in dB.
    Snr,
}

impl SweepAxis {
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepAxis::Sigma => (0..=14).map(|i| 0.05 + 0.025 * i as f64).collect(),
            SweepAxis::Snr => (0..=8).map(|i| 5.0 * i as f64).collect(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::Sigma => "sigma",
            SweepAxis::Snr => "snr_db",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    /// Defaults to the axis' standard grid when omitted.
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

impl SweepSpec {
    pub fn values(&self) -> Vec<f64> {
        self.values.clone().unwrap_or_else(|| self.axis.default_values())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    #[serde(rename = "T")]
    pub period: f64,
    pub psf: Psf,
    pub r: usize,
    #[serde(rename = "L")]
    pub snapshots: usize,
    pub delta_min: f64,
    pub amplitude_model: AmplitudeModel,
    /// `None` means noiseless.
    pub snr_db: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub sweep: Option<SweepSpec>,
    pub pgd: PgdOptions,
    /// Worker threads for the trials of a sweep point; `None` uses all cores.
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 15,
            period: 1.0,
            psf: Psf::Gaussian { sigma: 0.15 },
            r: 3,
            snapshots: 5,
            delta_min: 0.15,
            amplitude_model: AmplitudeModel::UnitModulus,
            snr_db: Some(25.0),
            trials: 50,
            seed: 0,
            sweep: None,
            pgd: PgdOptions::default(),
            threads: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn grid(&self) -> Result<SamplingGrid> {
        SamplingGrid::new(self.n, self.period).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.grid()?;
        self.psf.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.pgd.validate()?;
        if self.r == 0 || self.snapshots == 0 {
            return bad("r and L must be at least 1".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.delta_min >= 0.0 && self.delta_min.is_finite()) {
            return bad(format!("delta_min must be a nonnegative number, got {}", self.delta_min));
        }
        if self.delta_min * self.r as f64 >= self.period {
            return bad(format!("delta_min·r = {} leaves no room on a torus of length {}", self.delta_min * self.r as f64, self.period));
        }
        if 2 * self.n + 1 < self.r + 1 {
            return bad(format!("N = {} samples cannot resolve r = {} spikes", 2 * self.n + 1, self.r));
        }
        if let Some(snr) = self.snr_db {
            if snr.is_nan() {
                return bad("snr_db must not be NaN".into());
            }
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        if let Some(sweep) = &self.sweep {
            let values = sweep.values();
            if values.is_empty() {
                return bad("sweep needs at least one value".into());
            }
            if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                return bad(format!("sweep value {v} is not finite"));
            }
            if sweep.axis == SweepAxis::Sigma {
                if !matches!(self.psf, Psf::Gaussian { .. }) {
                    return bad("a sigma sweep needs a gaussian psf".into());
                }
                if let Some(v) = values.iter().find(|v| **v <= 0.0) {
                    return bad(format!("sigma {v} must be positive"));
                }
            }
        }
        Ok(())
    }

    /// The configuration of one sweep point.
    pub fn at(&self, axis: SweepAxis, value: f64) -> Result<Self> {
        let mut cfg = self.clone();
        cfg.sweep = None;
        match axis {
            SweepAxis::Sigma => cfg.psf = Psf::gaussian(value).map_err(|e| Error::Config(e.to_string()))?,
            SweepAxis::Snr => cfg.snr_db = Some(value),
        }
        Ok(cfg)
    }
}

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::proakis_c;
use crate::epic_detector::{default_self_iterations, Damping, EpicVariant, Schedule};
use crate::error::invalid;
use crate::map_detector::{MapVariant, DEFAULT_ENUMERATION_BUDGET};
use crate::numerics::Constellation;
use crate::precode::{PrecoderKind, PrecoderSpec};
use crate::{Error, Result};

/// Receiver selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectorKind {
    #[serde(rename = "swh-exact")]
    SwhExact,
    #[serde(rename = "swh-log")]
    SwhLog,
    #[serde(rename = "swh-maxlog")]
    SwhMaxLog,
    #[serde(rename = "epic")]
    Epic,
    #[serde(rename = "vamp")]
    Vamp,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 5] = [
        DetectorKind::SwhExact,
        DetectorKind::SwhLog,
        DetectorKind::SwhMaxLog,
        DetectorKind::Epic,
        DetectorKind::Vamp,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DetectorKind::SwhExact => "swh-exact",
            DetectorKind::SwhLog => "swh-log",
            DetectorKind::SwhMaxLog => "swh-maxlog",
            DetectorKind::Epic => "epic",
            DetectorKind::Vamp => "vamp",
        }
    }

    pub fn map_variant(&self) -> Option<MapVariant> {
        match self {
            DetectorKind::SwhExact => Some(MapVariant::Exact),
            DetectorKind::SwhLog => Some(MapVariant::Log),
            DetectorKind::SwhMaxLog => Some(MapVariant::MaxLog),
            _ => None,
        }
    }

    pub fn epic_variant(&self) -> Option<EpicVariant> {
        match self {
            DetectorKind::Epic => Some(EpicVariant::Epic),
            DetectorKind::Vamp => Some(EpicVariant::Vamp),
            _ => None,
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown detector '{s}'")))
    }
}

/// Complete description of a link-level experiment.
///
/// Read from a flat TOML file; every key is optional and unknown keys are
/// rejected.
///
/// ```toml
/// n = 256
/// q = 8
/// j = 4
/// precoder = "swh"
/// detector = "swh-maxlog"
/// ebn0_db = [2.0, 3.0, 4.0]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    /// Symbols per block.
    pub n: usize,
    /// Spreading size; ignored for the DFT precoder.
    pub q: usize,
    /// Group count, checked against `n / q` when given.
    pub p: Option<usize>,
    /// QAM order.
    pub j: usize,
    pub precoder: PrecoderKind,
    pub detector: DetectorKind,
    /// Highest turbo iteration index; `n_tau + 1` iterations are run.
    pub n_tau: usize,
    /// Highest self-iteration index; defaults by QAM order.
    pub n_s: Option<usize>,
    pub beta_scale: Option<f64>,
    pub beta_base: Option<f64>,
    pub taps: Vec<f64>,
    pub ebn0_db: Vec<f64>,
    pub seed: u64,
    pub min_frame_errors: u64,
    pub max_frames: u64,
    /// Stop turbo iterations once the decoded information bits are correct.
    pub early_exit: bool,
    pub enumeration_budget: u64,
    /// Frames averaged per EXIT trajectory.
    pub exit_frames: u64,
    /// EXIT measurement point; defaults to the lowest grid point with FER
    /// below one half.
    pub exit_ebn0_db: Option<f64>,
    pub output: Option<PathBuf>,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            n: 256,
            q: 8,
            p: None,
            j: 4,
            precoder: PrecoderKind::Swh,
            detector: DetectorKind::SwhMaxLog,
            n_tau: 9,
            n_s: None,
            beta_scale: None,
            beta_base: None,
            taps: proakis_c(),
            ebn0_db: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            seed: 1,
            min_frame_errors: 500,
            max_frames: 200_000,
            early_exit: true,
            enumeration_budget: DEFAULT_ENUMERATION_BUDGET,
            exit_frames: 200,
            exit_ebn0_db: None,
            output: None,
        }
    }
}

impl LinkConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: LinkConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks the sizes and detector/precoder compatibility.
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        let spec = self
            .precoder_spec()
            .map_err(|e| Error::Config(e.to_string()))?;
        if let Some(p) = self.p {
            if p != spec.p() {
                return cfg_err(format!("P = {p} does not match N/Q = {}", spec.p()));
            }
        }
        Constellation::qam(self.j).map_err(|e| Error::Config(e.to_string()))?;
        if self.detector.map_variant().is_some() && self.precoder != PrecoderKind::Swh {
            return cfg_err(format!(
                "detector {} requires the swh precoder, got {}",
                self.detector, self.precoder
            ));
        }
        if self.taps.is_empty() || self.taps.len() > self.n {
            return cfg_err(format!(
                "{} channel taps for N = {}",
                self.taps.len(),
                self.n
            ));
        }
        if self.max_frames == 0 || self.min_frame_errors == 0 {
            return cfg_err("stop rule needs positive frame and error limits".into());
        }
        if let (Some(s), Some(b)) = (self.beta_scale, self.beta_base) {
            if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&b) {
                return cfg_err("damping parameters must lie in [0, 1]".into());
            }
        }
        if self.ebn0_db.iter().any(|v| !v.is_finite()) {
            return cfg_err("Eb/N0 grid contains a non-finite value".into());
        }
        Ok(())
    }

    pub fn precoder_spec(&self) -> Result<PrecoderSpec> {
        PrecoderSpec::new(self.precoder, self.n, self.q)
    }

    pub fn constellation(&self) -> Result<Constellation> {
        Constellation::qam(self.j)
    }

    /// Coded bits per frame, `N·log2 J`.
    pub fn coded_len(&self) -> usize {
        self.n * self.j.trailing_zeros() as usize
    }

    pub fn schedule(&self) -> Schedule {
        let d = Damping::for_order(self.j);
        Schedule {
            n_tau: self.n_tau,
            n_s: self.n_s.unwrap_or_else(|| default_self_iterations(self.j)),
            damping: Damping {
                scale: self.beta_scale.unwrap_or(d.scale),
                base: self.beta_base.unwrap_or(d.base),
            },
        }
    }

    /// Scheme label used in reports, e.g. `SWH-Q8` or `DFT`.
    pub fn scheme(&self) -> String {
        match self.precoder {
            PrecoderKind::Dft => "DFT".to_string(),
            k => format!("{}-Q{}", k.to_string().to_uppercase(), self.q),
        }
    }
}

//! TOML run configuration.
//!
//! ```toml
//! schema_version = 1
//! scenario = "pure"            # optional default for `reconstruct`
//!
//! [setup]                      # all optional
//! pump_ratio = 1.0             # P
//! transmission = 1.0           # T
//! theta = 0.0                  # relative phase inside the second source
//!
//! [idler]
//! alpha = 0.6                  # H amplitude; beta = sqrt(1 - alpha^2)
//! xi = 0.0
//!
//! [environment]                # either a coherence triple ...
//! q = 1.0
//! m_h = 1.0
//! m_v = 1.0
//! delta_phi = 0.0
//! dim = 3
//! # ... or explicit vectors as [re, im] pairs:
//! # e_h = [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]
//!
//! [grid]
//! points = 64
//! offset = 0.0
//!
//! [noise]                      # omit for noiseless fringes
//! counts = 100000
//! seed = 7
//!
//! [check]
//! samples = 10000
//! seed = 0
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vistomo_core::environment::DEFAULT_ENV_DIM;
use vistomo_core::fringes::{PhaseGrid, DEFAULT_POINTS};
use vistomo_core::reconstruct::Scenario;
use vistomo_core::{
    check_feasible, embed, CoherenceTriple, EnvironmentVectors, IdlerPrep, PolarizationState,
    SetupConfig, SignalPrep, C64,
};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub setup: SetupSection,
    pub idler: IdlerSection,
    #[serde(default)]
    pub environment: EnvironmentSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSection>,
    #[serde(default)]
    pub check: CheckSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SetupSection {
    pub pump_ratio: f64,
    pub transmission: f64,
    pub theta: f64,
}

impl Default for SetupSection {
    fn default() -> Self {
        Self {
            pump_ratio: 1.0,
            transmission: 1.0,
            theta: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdlerSection {
    pub alpha: f64,
    #[serde(default)]
    pub xi: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_phi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_h: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_v: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_psi: Option<Vec<[f64; 2]>>,
}

impl EnvironmentSection {
    pub fn from_triple(t: &CoherenceTriple) -> Self {
        Self {
            q: Some(t.q),
            m_h: Some(t.m_h),
            m_v: Some(t.m_v),
            delta_phi: Some(t.delta_phi),
            ..Self::default()
        }
    }

    fn has_vectors(&self) -> bool {
        self.e_h.is_some() || self.e_v.is_some() || self.e_psi.is_some()
    }

    fn has_triple(&self) -> bool {
        self.q.is_some() || self.m_h.is_some() || self.m_v.is_some() || self.delta_phi.is_some()
    }

    /// Missing triple entries default to the fully coherent value.
    pub fn triple(&self) -> CliResult<CoherenceTriple> {
        let t = CoherenceTriple::new(
            self.q.unwrap_or(1.0),
            self.m_h.unwrap_or(1.0),
            self.m_v.unwrap_or(1.0),
            self.delta_phi.unwrap_or(0.0),
        )
        .map_err(|e| CliError::Usage(format!("[environment]: {e}")))?;
        Ok(t)
    }

    pub fn resolve(&self) -> CliResult<EnvironmentVectors> {
        if self.has_vectors() {
            if self.has_triple() || self.dim.is_some() {
                return Err(CliError::Usage(
                    "[environment]: give either q/m_h/m_v/delta_phi/dim or e_h/e_v/e_psi, not both"
                        .into(),
                ));
            }
            let get = |name: &str, v: &Option<Vec<[f64; 2]>>| {
                v.as_ref()
                    .map(|v| v.iter().map(|&[re, im]| C64::new(re, im)).collect::<Vec<_>>())
                    .ok_or_else(|| CliError::Usage(format!("[environment]: missing `{name}`")))
            };
            let env = EnvironmentVectors::from_vectors(
                get("e_h", &self.e_h)?,
                get("e_v", &self.e_v)?,
                get("e_psi", &self.e_psi)?,
            )
            .map_err(|e| CliError::Usage(format!("[environment]: {e}")))?;
            return Ok(env);
        }
        let t = self.triple()?;
        let feasibility = check_feasible(&t)?;
        if !feasibility.feasible {
            return Err(CliError::Infeasible {
                slack: feasibility.slack,
            });
        }
        let dim = self.dim.unwrap_or(DEFAULT_ENV_DIM);
        embed(&t, dim).map_err(|e| match e {
            vistomo_core::Error::Infeasible { slack } => CliError::Infeasible { slack },
            other => CliError::Usage(format!("[environment]: {other}")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub points: usize,
    pub offset: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            points: DEFAULT_POINTS,
            offset: 0.0,
        }
    }
}

impl GridSection {
    pub fn phase_grid(&self) -> PhaseGrid {
        PhaseGrid {
            points: self.points,
            offset: self.offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub counts: u64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSection {
    pub samples: usize,
    pub seed: u64,
}

impl Default for CheckSection {
    fn default() -> Self {
        Self {
            samples: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

impl RunConfig {
    /// Minimal config for a pure idler state with a coherent environment.
    pub fn pure(alpha: f64, xi: f64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenario: Some(Scenario::PureCoherent),
            setup: SetupSection::default(),
            idler: IdlerSection { alpha, xi },
            environment: EnvironmentSection::default(),
            grid: GridSection::default(),
            noise: None,
            check: CheckSection::default(),
            output: OutputSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Usage(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Usage(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Usage(message) => CliError::Parse {
                path: path.to_owned(),
                message,
            },
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn polarization(&self) -> CliResult<PolarizationState> {
        PolarizationState::from_alpha(self.idler.alpha, self.idler.xi)
            .map_err(|e| CliError::Usage(format!("[idler]: {e}")))
    }

    /// Interferometer settings with a balanced signal; commands swap in the
    /// per-basis signal preparation.
    pub fn setup_config(&self) -> CliResult<SetupConfig> {
        let idler = IdlerPrep::new(self.polarization()?, self.environment.resolve()?);
        SetupConfig::new(
            self.setup.pump_ratio,
            self.setup.transmission,
            self.setup.theta,
            SignalPrep::balanced(0.0),
            idler,
        )
        .map_err(|e| CliError::Usage(format!("[setup]: {e}")))
    }
}

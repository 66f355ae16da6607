use serde::{Deserialize, Serialize};

use crate::dictionary::{MomentumConfig, SamplingStrategy};
use crate::error::{Error, Result};
use crate::losses::DualTempConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Framework {
    /// Momentum encoder + FIFO key dictionaries.
    #[serde(rename = "mocov2")]
    MocoV2,
    /// Momentum encoder, current-batch keys as negatives, no dictionary.
    #[serde(rename = "simmoco")]
    SimMoco,
    /// Shared encoder for both views, dual-temperature loss on both sides.
    #[serde(rename = "simco")]
    SimCo,
    /// SimCo with the scalar temperature tied to the vector temperature.
    StSimCo,
    /// Predictor on the query side, stop-gradient target from the same encoder.
    NonclSimsiam,
    /// Predictor on the query side, target from a momentum encoder.
    NonclByolLike,
}

impl Framework {
    pub fn name(self) -> &'static str {
        match self {
            Self::MocoV2 => "mocov2",
            Self::SimMoco => "simmoco",
            Self::SimCo => "simco",
            Self::StSimCo => "st-simco",
            Self::NonclSimsiam => "noncl-simsiam",
            Self::NonclByolLike => "noncl-byol-like",
        }
    }

    pub fn uses_momentum(self) -> bool {
        matches!(self, Self::MocoV2 | Self::SimMoco | Self::NonclByolLike)
    }

    pub fn uses_queues(self) -> bool {
        matches!(self, Self::MocoV2)
    }

    pub fn uses_predictor(self) -> bool {
        matches!(self, Self::NonclSimsiam | Self::NonclByolLike)
    }

    pub fn is_contrastive(self) -> bool {
        !self.uses_predictor()
    }
}

impl std::fmt::Display for Framework {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Framework {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mocov2" => Self::MocoV2,
            "simmoco" => Self::SimMoco,
            "simco" => Self::SimCo,
            "st" | "st-simco" => Self::StSimCo,
            "noncl" | "noncl-simsiam" => Self::NonclSimsiam,
            "noncl-byol" | "noncl-byol-like" => Self::NonclByolLike,
            other => return Err(Error::InvalidConfig(format!("unknown framework `{other}`"))),
        })
    }
}

/// One point of the ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameworkSpec {
    pub framework: Framework,
    pub temperatures: DualTempConfig,
    /// Average the loss over both view orders.
    pub symmetric: bool,
    pub momentum: MomentumConfig,
    pub dict_size_scalar: usize,
    pub dict_size_vector: usize,
    /// Keys drawn from the vector dictionary per step; 0 uses all of it.
    pub vector_sample: usize,
    /// Keys drawn from the scalar dictionary per step; 0 uses all of it.
    pub scalar_sample: usize,
    pub sampling: SamplingStrategy,
    pub scalar_sampling: SamplingStrategy,
    /// Inter-anchor hardness weighting. Contrastive frameworks: compute the
    /// scalar component at `tau_alpha` instead of `tau_beta`. Non-contrastive:
    /// multiply each anchor's loss by its frozen in-batch `sum_j p_j` at `tau_alpha`.
    pub ha_toggle: bool,
}

impl FrameworkSpec {
    /// Desk-scale defaults for `framework`.
    pub fn new(framework: Framework) -> Self {
        Self {
            framework,
            temperatures: DualTempConfig::new(0.1, 1.0).expect("positive temperatures"),
            symmetric: false,
            momentum: MomentumConfig::new(0.99).expect("in range"),
            dict_size_scalar: 1024,
            dict_size_vector: 1024,
            vector_sample: 0,
            scalar_sample: 0,
            sampling: SamplingStrategy::Newest,
            scalar_sampling: SamplingStrategy::Newest,
            ha_toggle: false,
        }
    }

    /// Temperatures actually applied to the scalar and vector components.
    pub fn effective_temperatures(&self) -> DualTempConfig {
        let t = self.temperatures;
        if self.framework == Framework::StSimCo || (self.ha_toggle && self.framework.is_contrastive()) {
            DualTempConfig::single(t.tau_alpha()).expect("validated")
        } else {
            t
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.framework.uses_queues() {
            if self.dict_size_scalar == 0 || self.dict_size_vector == 0 {
                return Err(Error::InvalidConfig("dictionary sizes must be positive".into()));
            }
            if self.vector_sample > self.dict_size_vector || self.scalar_sample > self.dict_size_scalar {
                return Err(Error::InvalidConfig("sample count exceeds dictionary size".into()));
            }
        }
        Ok(())
    }
}

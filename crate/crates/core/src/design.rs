//! One entry point per transmission scheme.

use serde::{Deserialize, Serialize};

use crate::baselines::{self, BaselineKind};
use crate::error::{Error, Result};
use crate::model::{check_alignment_feasibility, check_sdma_feasibility, ChannelSet, SystemConfig, TransceiverSet};
use crate::stage_one::{self, StageOneOptions, StageOneResult};
use crate::stage_two::{self, StageTwoOptions, StageTwoResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    Proposed,
    ChannelInversionNaive,
    SdmaZf,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Proposed, Scheme::ChannelInversionNaive, Scheme::SdmaZf];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "Proposed",
            Scheme::ChannelInversionNaive => "ChannelInversionNaive",
            Scheme::SdmaZf => "SdmaZf",
        }
    }

    /// Dimension-only feasibility, independent of the channel draw.
    pub fn dimensions_feasible(self, config: &SystemConfig) -> bool {
        let l = config.total_streams();
        let ms_ok = config.n_k.iter().zip(&config.l_k).all(|(&n, &l)| n >= l);
        ms_ok
            && match self {
                Scheme::Proposed => config.n_b >= l && config.n_r >= l,
                Scheme::ChannelInversionNaive => config.n_b >= config.n_r && config.n_r >= l,
                Scheme::SdmaZf => config.n_b >= l && config.n_r >= 2 * l,
            }
    }

    /// Feasibility for a concrete channel draw.
    pub fn feasible(self, config: &SystemConfig, channels: &ChannelSet) -> bool {
        self.dimensions_feasible(config)
            && match self {
                Scheme::Proposed => check_alignment_feasibility(config, channels),
                Scheme::ChannelInversionNaive => true,
                Scheme::SdmaZf => check_sdma_feasibility(config, channels),
            }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scheme {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DesignOptions {
    pub stage_one: StageOneOptions,
    pub stage_two: StageTwoOptions,
}

/// The two-stage design: alignment and power allocation, then the
/// alternating relay precoder and equalizer optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposedDesign {
    pub stage_one: StageOneResult,
    pub stage_two: StageTwoResult,
}

pub fn design_proposed(config: &SystemConfig, channels: &ChannelSet, opts: &DesignOptions) -> Result<ProposedDesign> {
    let s1 = stage_one::stage_one_search_with(config, channels, &opts.stage_one)?;
    let s2 = stage_two::alternating_optimization(&s1, config, channels, &opts.stage_two)?;
    Ok(ProposedDesign {
        stage_one: s1,
        stage_two: s2,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignOutcome {
    pub transceivers: TransceiverSet,
    /// Alternating-loop iterations; zero for the closed-form baselines.
    pub iterations: usize,
    pub converged: bool,
}

/// Designs `scheme` for one channel draw. Infeasible dimensions come back
/// as [`Error::Infeasible`].
pub fn design(
    scheme: Scheme,
    config: &SystemConfig,
    channels: &ChannelSet,
    opts: &DesignOptions,
) -> Result<DesignOutcome> {
    if !scheme.feasible(config, channels) {
        return Err(Error::Infeasible(format!(
            "{scheme} is not feasible for this configuration"
        )));
    }
    let closed_form = |t: TransceiverSet| DesignOutcome {
        transceivers: t,
        iterations: 0,
        converged: true,
    };
    match scheme {
        Scheme::Proposed => {
            let d = design_proposed(config, channels, opts)?;
            Ok(DesignOutcome {
                transceivers: d.stage_two.transceivers,
                iterations: d.stage_two.iterations,
                converged: d.stage_two.converged,
            })
        }
        Scheme::ChannelInversionNaive => {
            baselines::baseline(BaselineKind::ChannelInversionNaive, config, channels).map(closed_form)
        }
        Scheme::SdmaZf => baselines::baseline(BaselineKind::SdmaZf, config, channels).map(closed_form),
    }
}

//! One internal-calibration trial, end to end: draw hardware and channel,
//! measure both directions, solve, and score against the ground truth.

use crate::array::{
    make_partition, sample_hardware_profile_with, true_calibration, CalibrationMatrix, HardwareProfile,
    HybridArrayConfig, ImpairmentModel, Partition, PartitionScheme,
};
use alloc::vec::Vec;

use crate::calibration::{
    aligned_nmse, bidirectional_simulate, build_q, solve_calibration, BidirectionalMeasurements,
    BidirectionalWeights, CalibrationSolution,
};
use crate::channel::{intra_array_channel, ChannelMatrix, IntraArrayChannelParams};
use crate::error::{Error, RankCondition, Result};
use crate::estimation::NoiseBudget;
use crate::rng::{derive_seed, keyed_rng, tag};

/// Physical description of an internal-calibration experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub array: HybridArrayConfig,
    pub channel: IntraArrayChannelParams,
    pub impairments: ImpairmentModel,
    pub noise: NoiseBudget,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            array: HybridArrayConfig::subarray(64, 8).expect("64 antennas on 8 chains is valid"),
            channel: IntraArrayChannelParams::default(),
            impairments: ImpairmentModel::default(),
            noise: NoiseBudget::default(),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.array.validate()?;
        self.array.require_subarray()?;
        self.channel.validate()?;
        self.noise.validate()?;
        crate::array::amplitude_half_width(self.impairments.amp_imbalance_std)?;
        Ok(())
    }

    /// Interleaving alternates whole RF-chain subarrays between the groups.
    pub fn partition(&self, scheme: PartitionSchemeKind) -> Result<Partition> {
        let scheme = match scheme {
            PartitionSchemeKind::TwoSides => PartitionScheme::TwoSides,
            PartitionSchemeKind::Interleaved => PartitionScheme::Interleaved {
                block: self.array.antennas_per_chain(),
            },
        };
        let p = make_partition(&self.array, scheme)?;
        p.check_chain_alignment(&self.array)?;
        Ok(p)
    }

    /// Hardware, channel and beam weights of trial `trial`. The weights are
    /// shared by both partition schemes; smaller `(K, L)` cells use prefixes.
    pub fn draw_trial(&self, seed: u64, trial: u64, k_max: usize, l_max: usize) -> Result<TrialDraw> {
        let profile = sample_hardware_profile_with(
            &self.array,
            &self.impairments,
            &mut keyed_rng(seed, &[tag::TRIAL, trial, tag::HARDWARE]),
        )?;
        let channel = intra_array_channel(
            &self.array,
            &self.channel,
            &mut keyed_rng(seed, &[tag::TRIAL, trial, tag::CHANNEL]),
        )?;
        let weights = BidirectionalWeights::random(
            &self.array,
            k_max,
            l_max,
            self.noise.pilot_amplitude(),
            derive_seed(seed, &[tag::TRIAL, trial, tag::WEIGHTS]),
        )?;
        Ok(TrialDraw {
            profile,
            channel,
            weights,
            measurement_seed: derive_seed(seed, &[tag::TRIAL, trial, tag::MEASURE]),
        })
    }
}

/// Named partition schemes; the interleaving block follows the RF chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PartitionSchemeKind {
    TwoSides,
    Interleaved,
}

impl PartitionSchemeKind {
    pub const ALL: [PartitionSchemeKind; 2] = [PartitionSchemeKind::TwoSides, PartitionSchemeKind::Interleaved];

    pub fn name(self) -> &'static str {
        match self {
            PartitionSchemeKind::TwoSides => "two-sides",
            PartitionSchemeKind::Interleaved => "interleaved",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "two-sides" => Some(PartitionSchemeKind::TwoSides),
            "interleaved" => Some(PartitionSchemeKind::Interleaved),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialDraw {
    pub profile: HardwareProfile,
    pub channel: ChannelMatrix,
    pub weights: BidirectionalWeights,
    pub measurement_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialStatus {
    Converged,
    /// At least one direction was underdetermined; the reported NMSE comes
    /// from minimum-norm channel estimates.
    Diverged(RankCondition),
}

impl TrialStatus {
    pub fn name(self) -> &'static str {
        match self {
            TrialStatus::Converged => "converged",
            TrialStatus::Diverged(_) => "diverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub status: TrialStatus,
    pub nmse_f: f64,
    pub solution: CalibrationSolution,
    pub truth: CalibrationMatrix,
}

/// Runs one calibration on `draw` using the first `k` precoders and `l`
/// combiners of its weight set.
pub fn run_trial(
    scenario: &Scenario,
    draw: &TrialDraw,
    partition: &Partition,
    k: usize,
    l: usize,
    noise: &NoiseBudget,
) -> Result<TrialOutcome> {
    let weights = draw.weights.truncated(k, l)?;
    let meas = bidirectional_simulate(
        &draw.profile,
        &scenario.array,
        partition,
        &draw.channel,
        &weights,
        noise,
        draw.measurement_seed,
    )?;
    score(scenario, draw, &meas)
}

/// Runs every `(K, L)` cell of a sweep on one draw. The campaign is simulated
/// once with the full weight set and truncated per cell.
pub fn run_sweep_trial(
    scenario: &Scenario,
    draw: &TrialDraw,
    partition: &Partition,
    cells: &[(usize, usize)],
    noise: &NoiseBudget,
) -> Result<Vec<TrialOutcome>> {
    let meas = bidirectional_simulate(
        &draw.profile,
        &scenario.array,
        partition,
        &draw.channel,
        &draw.weights,
        noise,
        draw.measurement_seed,
    )?;
    cells
        .iter()
        .map(|&(k, l)| score(scenario, draw, &meas.truncated(k, l)?))
        .collect()
}

fn score(scenario: &Scenario, draw: &TrialDraw, meas: &BidirectionalMeasurements) -> Result<TrialOutcome> {
    let (est, status) = match meas.estimate() {
        Ok(est) => (est, TrialStatus::Converged),
        Err(Error::Underdetermined { condition, .. }) => (meas.estimate_min_norm()?, TrialStatus::Diverged(condition)),
        Err(e) => return Err(e),
    };
    let solution = solve_calibration(&build_q(&est))?;
    let truth = true_calibration(&draw.profile, &scenario.array)?;
    let nmse_f = aligned_nmse(&solution.f, truth.as_vector())?;
    Ok(TrialOutcome {
        status,
        nmse_f,
        solution,
        truth,
    })
}

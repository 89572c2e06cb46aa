//! Fully connected analog front ends.
//!
//! Every RF chain reaches every antenna through its own phase shifter, and a
//! summation network `U` combines the `n_rf` branches feeding each antenna.
//! The branch-level channel `C̃ = U^r C U^t` is reciprocal whenever `C` is,
//! but no split of the array into two groups can be measured internally, so
//! calibration needs an external reference UE.

use alloc::vec::Vec;

use crate::array::{HardwareProfile, HybridArrayConfig, Partition};
use crate::calibration::{build_q, solve_calibration, BidirectionalEstimate, CalibrationSolution};
use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::estimation::{
    ls_estimate_channel, random_beam_weights, simulate_measurements, BeamWeightSet, EffectiveLink, NoiseBudget,
    SubarrayLayout,
};
use crate::linalg::{CMatrix, CVector, C64, ONE};
use crate::rng::{derive_seed, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SummationSide {
    /// `n_ant × (n_ant·n_rf)`: branches into antennas.
    Transmit,
    /// `(n_rf·n_ant) × n_ant`: antennas into branches.
    Receive,
}

/// 0/1 summation network of a fully connected transceiver.
#[derive(Debug, Clone, PartialEq)]
pub struct SummationMatrix {
    side: SummationSide,
    n_ant: usize,
    n_rf: usize,
    u: CMatrix,
}

impl SummationMatrix {
    pub fn side(&self) -> SummationSide {
        self.side
    }

    pub fn n_ant(&self) -> usize {
        self.n_ant
    }

    pub fn n_rf(&self) -> usize {
        self.n_rf
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.u
    }
}

/// Transmit form `[I I … I]` with `n_rf` identity blocks; the receive form
/// stacks them vertically.
pub fn summation_matrix(n_ant: usize, n_rf: usize, side: SummationSide) -> Result<SummationMatrix> {
    if n_ant == 0 || n_rf == 0 {
        return Err(Error::InvalidParameter {
            name: "n_ant, n_rf",
            reason: "must be positive",
        });
    }
    let branches = n_ant * n_rf;
    let u = match side {
        SummationSide::Transmit => CMatrix::from_fn(n_ant, branches, |m, b| if b % n_ant == m { ONE } else { C64::new(0.0, 0.0) }),
        SummationSide::Receive => CMatrix::from_fn(branches, n_ant, |b, m| if b % n_ant == m { ONE } else { C64::new(0.0, 0.0) }),
    };
    Ok(SummationMatrix { side, n_ant, n_rf, u })
}

/// `C̃ = U^r C U^t`, with `c` mapping the transmitter's antennas (columns) to
/// the receiver's antennas (rows).
pub fn composite_channel(c: &CMatrix, u_tx: &SummationMatrix, u_rx: &SummationMatrix) -> Result<CMatrix> {
    if u_tx.side != SummationSide::Transmit || u_rx.side != SummationSide::Receive {
        return Err(Error::InvalidInput("summation matrices passed on the wrong side"));
    }
    if c.ncols() != u_tx.n_ant {
        return Err(Error::DimensionMismatch {
            context: "channel columns vs transmit antennas",
            expected: u_tx.n_ant,
            actual: c.ncols(),
        });
    }
    if c.nrows() != u_rx.n_ant {
        return Err(Error::DimensionMismatch {
            context: "channel rows vs receive antennas",
            expected: u_rx.n_ant,
            actual: c.nrows(),
        });
    }
    Ok(&u_rx.u * c * &u_tx.u)
}

/// Branch responses `(I ⊗ T2)(T1 ⊗ I)` and `(R1 ⊗ I)(I ⊗ R2)`: branch
/// `k·n_ant + m` (chain `k`, antenna `m`) gets `t1_k t2_m`.
pub fn merged_responses_fully_connected(
    profile: &HardwareProfile,
    config: &HybridArrayConfig,
) -> Result<(Vec<C64>, Vec<C64>)> {
    config.require_fully_connected()?;
    if profile.t1.len() != config.n_rf || profile.r1.len() != config.n_rf {
        return Err(Error::DimensionMismatch {
            context: "hardware profile RF chains",
            expected: config.n_rf,
            actual: profile.t1.len(),
        });
    }
    if profile.t2.len() != config.n_ant || profile.r2.len() != config.n_ant {
        return Err(Error::DimensionMismatch {
            context: "hardware profile branches",
            expected: config.n_ant,
            actual: profile.t2.len(),
        });
    }
    let merge = |chain: &[C64], branch: &[C64]| -> Vec<C64> {
        chain.iter().flat_map(|k| branch.iter().map(move |m| k * m)).collect()
    };
    Ok((merge(&profile.t1, &profile.t2), merge(&profile.r1, &profile.r2)))
}

/// Branch-level calibration `T̃ / R̃` of a fully connected transceiver.
pub fn branch_calibration(profile: &HardwareProfile, config: &HybridArrayConfig) -> Result<CVector> {
    let (t, r) = merged_responses_fully_connected(profile, config)?;
    if let Some(index) = r.iter().position(|z| *z == C64::new(0.0, 0.0)) {
        return Err(Error::SingularHardware { index });
    }
    Ok(CVector::from_iterator(t.len(), t.iter().zip(&r).map(|(a, b)| a / b)))
}

/// Pilot and combiner counts for the two directions of a reference-UE
/// measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceDesign {
    /// BS precoders while the BS transmits.
    pub k_dl: usize,
    /// UE combiners while the BS transmits.
    pub l_dl: usize,
    pub k_ul: usize,
    pub l_ul: usize,
}

impl ReferenceDesign {
    /// Smallest counts meeting the rank conditions on the branch-level
    /// channel: each side needs as many independent observations as it has
    /// branches.
    pub fn minimal(bs: &HybridArrayConfig, ue: &HybridArrayConfig) -> Self {
        ReferenceDesign {
            k_dl: bs.n_ant * bs.n_rf,
            l_dl: ue.n_ant,
            k_ul: ue.n_ant * ue.n_rf,
            l_ul: bs.n_ant,
        }
    }
}

/// Weight sets of a reference-UE measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceWeights {
    pub downlink: BeamWeightSet,
    pub uplink: BeamWeightSet,
}

fn branch_layout(config: &HybridArrayConfig) -> Result<SubarrayLayout> {
    config.require_fully_connected()?;
    SubarrayLayout::new(config.n_rf, config.n_ant)
}

/// Random weights where each RF chain drives its own `n_ant` branches.
pub fn reference_weights(
    bs: &HybridArrayConfig,
    ue: &HybridArrayConfig,
    design: ReferenceDesign,
    pilot_amplitude: f64,
    seed: u64,
) -> Result<ReferenceWeights> {
    let (bs_layout, ue_layout) = (branch_layout(bs)?, branch_layout(ue)?);
    Ok(ReferenceWeights {
        downlink: random_beam_weights(
            bs_layout,
            ue_layout,
            design.k_dl,
            design.l_dl,
            pilot_amplitude,
            derive_seed(seed, &[tag::WEIGHTS, 0]),
        )?,
        uplink: random_beam_weights(
            ue_layout,
            bs_layout,
            design.k_ul,
            design.l_ul,
            pilot_amplitude,
            derive_seed(seed, &[tag::WEIGHTS, 1]),
        )?,
    })
}

/// Joint BS and UE calibration from a reference UE.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCalibration {
    /// BS branches first, then UE branches.
    pub solution: CalibrationSolution,
    pub n_bs_branches: usize,
}

impl ReferenceCalibration {
    /// The part the BS keeps.
    pub fn bs_part(&self) -> CVector {
        self.solution.f.rows(0, self.n_bs_branches).into_owned()
    }

    pub fn ue_part(&self) -> CVector {
        let n = self.solution.f.len() - self.n_bs_branches;
        self.solution.f.rows(self.n_bs_branches, n).into_owned()
    }
}

/// Calibrates a fully connected BS against a reference UE.
///
/// The BS branches form group `A` and the UE branches group `B`. Both
/// directions are measured over the composite channel built from `channel`
/// (UE antennas × BS antennas), then the internal-calibration solver runs on
/// the joint branch set. The UE's estimates are assumed fed back without loss.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_with_reference(
    bs_profile: &HardwareProfile,
    bs_config: &HybridArrayConfig,
    ue_profile: &HardwareProfile,
    ue_config: &HybridArrayConfig,
    channel: &ChannelMatrix,
    weights: &ReferenceWeights,
    noise: &NoiseBudget,
    seed: u64,
) -> Result<ReferenceCalibration> {
    let (t_bs, r_bs) = merged_responses_fully_connected(bs_profile, bs_config)?;
    let (t_ue, r_ue) = merged_responses_fully_connected(ue_profile, ue_config)?;
    let u_bs_t = summation_matrix(bs_config.n_ant, bs_config.n_rf, SummationSide::Transmit)?;
    let u_bs_r = summation_matrix(bs_config.n_ant, bs_config.n_rf, SummationSide::Receive)?;
    let u_ue_t = summation_matrix(ue_config.n_ant, ue_config.n_rf, SummationSide::Transmit)?;
    let u_ue_r = summation_matrix(ue_config.n_ant, ue_config.n_rf, SummationSide::Receive)?;
    let c = channel.entries();
    let c_dl = composite_channel(c, &u_bs_t, &u_ue_r)?;
    let c_ul = composite_channel(&c.transpose(), &u_ue_t, &u_bs_r)?;

    let dl = EffectiveLink::from_front_ends(&r_ue, &c_dl, &t_bs)?;
    let ul = EffectiveLink::from_front_ends(&r_bs, &c_ul, &t_ue)?;
    let h_ab = ls_estimate_channel(&simulate_measurements(
        &dl,
        &weights.downlink,
        noise,
        derive_seed(seed, &[tag::MEASURE, 0]),
    )?)?;
    let h_ba = ls_estimate_channel(&simulate_measurements(
        &ul,
        &weights.uplink,
        noise,
        derive_seed(seed, &[tag::MEASURE, 1]),
    )?)?;

    let n_bs = t_bs.len();
    let n_ue = t_ue.len();
    let partition = Partition::new((0..n_bs).collect(), (n_bs..n_bs + n_ue).collect())?;
    let est = BidirectionalEstimate::new(h_ab, h_ba, partition)?;
    Ok(ReferenceCalibration {
        solution: solve_calibration(&build_q(&est))?,
        n_bs_branches: n_bs,
    })
}

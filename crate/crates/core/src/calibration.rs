//! Internal reciprocity calibration from bi-directional intra-array measurements.
//!
//! The array is split into groups `A` and `B`. `A` transmits to `B`, then the
//! roles are swapped within the coherence time, giving effective channels
//! `H_{A→B} = R_B C T_A` and `H_{B→A} = R_A Cᵀ T_B`. With the diagonal
//! calibration matrix `F = R^{-T} T` every cross-group pair satisfies
//! `f_j h_{i→j} = f_i h_{j→i}`, so `f` minimizes
//!
//! ```text
//! J(f) = Σ_{i∈A, j∈B} |f_j h_{i→j} − f_i h_{j→i}|²
//! ```
//!
//! `J(f) = fᴴ Q f` for a Hermitian PSD `Q`; under `‖f‖ = 1` the minimizer is
//! the eigenvector of the smallest eigenvalue of `Q`.

use alloc::vec::Vec;

use crate::array::{merged_rx_response, merged_tx_response, HardwareProfile, HybridArrayConfig, Partition};
use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::estimation::{
    ls_estimate_channel, ls_estimate_min_norm, random_beam_weights, simulate_measurements, BeamWeightSet,
    EffectiveLink, MeasurementSet, NoiseBudget, SubarrayLayout,
};
use crate::linalg::{hermitian_defect, norm_sq, CMatrix, CVector, C64, ZERO};
use crate::rng::{derive_seed, tag};

/// Relative eigen-gap below which the solution is flagged as non-unique.
pub const DEGENERACY_GAP: f64 = 1e-6;

/// Largest relative Hermitian defect accepted by [`solve_calibration`].
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Channel estimates in both directions between the two groups.
#[derive(Debug, Clone, PartialEq)]
pub struct BidirectionalEstimate {
    /// `|B| × |A|`, group A transmitting.
    pub h_ab: CMatrix,
    /// `|A| × |B|`, group B transmitting.
    pub h_ba: CMatrix,
    pub partition: Partition,
}

impl BidirectionalEstimate {
    pub fn new(h_ab: CMatrix, h_ba: CMatrix, partition: Partition) -> Result<Self> {
        let (na, nb) = (partition.group_a().len(), partition.group_b().len());
        if h_ab.shape() != (nb, na) {
            return Err(Error::DimensionMismatch {
                context: "h_ab rows",
                expected: nb,
                actual: h_ab.nrows(),
            });
        }
        if h_ba.shape() != (na, nb) {
            return Err(Error::DimensionMismatch {
                context: "h_ba rows",
                expected: na,
                actual: h_ba.nrows(),
            });
        }
        Ok(BidirectionalEstimate { h_ab, h_ba, partition })
    }

    /// Same measurements with the roles of the groups exchanged.
    pub fn swapped(&self) -> BidirectionalEstimate {
        BidirectionalEstimate {
            h_ab: self.h_ba.clone(),
            h_ba: self.h_ab.clone(),
            partition: self.partition.swapped(),
        }
    }

    /// `(i, j, h_{i→j}, h_{j→i})` over all cross-group pairs, global indices.
    fn pairs(&self) -> impl Iterator<Item = (usize, usize, C64, C64)> + '_ {
        let a = self.partition.group_a();
        let b = self.partition.group_b();
        a.iter().enumerate().flat_map(move |(ia, &i)| {
            b.iter()
                .enumerate()
                .map(move |(jb, &j)| (i, j, self.h_ab[(jb, ia)], self.h_ba[(ia, jb)]))
        })
    }
}

/// Weight sets for both directions of an internal measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct BidirectionalWeights {
    pub a_to_b: BeamWeightSet,
    pub b_to_a: BeamWeightSet,
}

impl BidirectionalWeights {
    /// Random weights where each group uses half of the RF chains.
    pub fn random(config: &HybridArrayConfig, k: usize, l: usize, pilot_amplitude: f64, seed: u64) -> Result<Self> {
        config.require_subarray()?;
        if !config.n_rf.is_multiple_of(2) {
            return Err(Error::UnsupportedPartition("internal calibration needs an even number of RF chains"));
        }
        let layout = SubarrayLayout::new(config.n_rf / 2, config.antennas_per_chain())?;
        Ok(BidirectionalWeights {
            a_to_b: random_beam_weights(layout, layout, k, l, pilot_amplitude, derive_seed(seed, &[tag::WEIGHTS, 0]))?,
            b_to_a: random_beam_weights(layout, layout, k, l, pilot_amplitude, derive_seed(seed, &[tag::WEIGHTS, 1]))?,
        })
    }

    pub fn truncated(&self, k: usize, l: usize) -> Result<Self> {
        Ok(BidirectionalWeights {
            a_to_b: self.a_to_b.truncated(k, l)?,
            b_to_a: self.b_to_a.truncated(k, l)?,
        })
    }
}

/// Raw measurements of one bi-directional exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct BidirectionalMeasurements {
    pub a_to_b: MeasurementSet,
    pub b_to_a: MeasurementSet,
    pub partition: Partition,
}

impl BidirectionalMeasurements {
    pub fn estimate(&self) -> Result<BidirectionalEstimate> {
        BidirectionalEstimate::new(
            ls_estimate_channel(&self.a_to_b)?,
            ls_estimate_channel(&self.b_to_a)?,
            self.partition.clone(),
        )
    }

    pub fn truncated(&self, k: usize, l: usize) -> Result<Self> {
        Ok(BidirectionalMeasurements {
            a_to_b: self.a_to_b.truncated(k, l)?,
            b_to_a: self.b_to_a.truncated(k, l)?,
            partition: self.partition.clone(),
        })
    }

    /// Minimum-norm estimates, available even when a direction is underdetermined.
    pub fn estimate_min_norm(&self) -> Result<BidirectionalEstimate> {
        BidirectionalEstimate::new(
            ls_estimate_min_norm(&self.a_to_b),
            ls_estimate_min_norm(&self.b_to_a),
            self.partition.clone(),
        )
    }
}

pub(crate) fn submatrix(m: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |r, c| m[(rows[r], cols[c])])
}

fn pick(v: &[C64], idx: &[usize]) -> Vec<C64> {
    idx.iter().map(|&i| v[i]).collect()
}

/// Simulates both directions over the same reciprocal channel realization.
pub fn bidirectional_simulate(
    profile: &HardwareProfile,
    config: &HybridArrayConfig,
    partition: &Partition,
    channel: &ChannelMatrix,
    weights: &BidirectionalWeights,
    noise: &NoiseBudget,
    seed: u64,
) -> Result<BidirectionalMeasurements> {
    bidirectional_simulate_with_channels(profile, config, partition, channel, channel, weights, noise, seed)
}

/// As [`bidirectional_simulate`], but the reverse direction sees `reverse`.
/// Passing two independent realizations models a coherence-time violation.
#[allow(clippy::too_many_arguments)]
pub fn bidirectional_simulate_with_channels(
    profile: &HardwareProfile,
    config: &HybridArrayConfig,
    partition: &Partition,
    forward: &ChannelMatrix,
    reverse: &ChannelMatrix,
    weights: &BidirectionalWeights,
    noise: &NoiseBudget,
    seed: u64,
) -> Result<BidirectionalMeasurements> {
    partition.check_chain_alignment(config)?;
    for c in [forward, reverse] {
        if c.entries().shape() != (config.n_ant, config.n_ant) {
            return Err(Error::DimensionMismatch {
                context: "intra-array channel size",
                expected: config.n_ant,
                actual: c.entries().nrows(),
            });
        }
    }
    let t = merged_tx_response(profile, config)?;
    let r = merged_rx_response(profile, config)?;
    let (a, b) = (partition.group_a(), partition.group_b());
    let link_ab = EffectiveLink::from_front_ends(&pick(&r, b), &submatrix(forward.entries(), b, a), &pick(&t, a))?;
    let link_ba = EffectiveLink::from_front_ends(&pick(&r, a), &submatrix(reverse.entries(), a, b), &pick(&t, b))?;
    Ok(BidirectionalMeasurements {
        a_to_b: simulate_measurements(&link_ab, &weights.a_to_b, noise, derive_seed(seed, &[tag::MEASURE, 0]))?,
        b_to_a: simulate_measurements(&link_ba, &weights.b_to_a, noise, derive_seed(seed, &[tag::MEASURE, 1]))?,
        partition: partition.clone(),
    })
}

/// Measures `A → B`, swaps roles, measures `B → A`, and estimates both
/// effective channels by least squares.
pub fn bidirectional_measure(
    profile: &HardwareProfile,
    config: &HybridArrayConfig,
    partition: &Partition,
    channel: &ChannelMatrix,
    weights: &BidirectionalWeights,
    noise: &NoiseBudget,
    seed: u64,
) -> Result<BidirectionalEstimate> {
    bidirectional_simulate(profile, config, partition, channel, weights, noise, seed)?.estimate()
}

/// Hermitian PSD matrix whose quadratic form is the calibration cost.
#[derive(Debug, Clone, PartialEq)]
pub struct QMatrix(CMatrix);

impl QMatrix {
    /// Wraps an arbitrary matrix; the solver checks the Hermitian property.
    pub fn from_matrix(q: CMatrix) -> Self {
        QMatrix(q)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    /// `fᴴ Q f`.
    pub fn quadratic_form(&self, f: &CVector) -> f64 {
        f.dotc(&(&self.0 * f)).re
    }
}

pub fn build_q(est: &BidirectionalEstimate) -> QMatrix {
    let n = est.partition.n_ant();
    let mut q = CMatrix::zeros(n, n);
    for (i, j, h_ij, h_ji) in est.pairs() {
        q[(i, i)] += C64::new(h_ji.norm_sqr(), 0.0);
        q[(j, j)] += C64::new(h_ij.norm_sqr(), 0.0);
        q[(i, j)] = -h_ji.conj() * h_ij;
        q[(j, i)] = -h_ij.conj() * h_ji;
    }
    QMatrix(q)
}

/// `J(f)` by direct summation over the cross-group pairs.
pub fn calibration_cost(f: &CVector, est: &BidirectionalEstimate) -> f64 {
    est.pairs()
        .map(|(i, j, h_ij, h_ji)| (f[j] * h_ij - f[i] * h_ji).norm_sqr())
        .sum()
}

/// Unit-norm calibration estimate with eigen diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSolution {
    /// Unit norm, first entry real and non-negative.
    pub f: CVector,
    /// Smallest eigenvalue of `Q`, equal to `J(f)`.
    pub residual: f64,
    pub second_eigenvalue: f64,
    /// `(λ₂ − λ₁) / |λ_max|`.
    pub relative_gap: f64,
    /// Set when the relative gap is below [`DEGENERACY_GAP`].
    pub degenerate: bool,
}

pub fn solve_calibration(q: &QMatrix) -> Result<CalibrationSolution> {
    let m = q.matrix();
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::ContractViolation("Q must be a non-empty square matrix"));
    }
    if hermitian_defect(m) > HERMITIAN_TOLERANCE {
        return Err(Error::ContractViolation("Q is not Hermitian"));
    }
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let smallest = eig.eigenvalues[order[0]];
    let second = order.get(1).map_or(f64::INFINITY, |&i| eig.eigenvalues[i]);
    let scale = eig.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let relative_gap = if scale > 0.0 { (second - smallest) / scale } else { 0.0 };
    let f = fix_phase(eig.eigenvectors.column(order[0]).into_owned());
    Ok(CalibrationSolution {
        f,
        residual: smallest,
        second_eigenvalue: second,
        relative_gap,
        degenerate: relative_gap < DEGENERACY_GAP,
    })
}

/// Normalizes to unit norm and rotates so the first nonzero entry is real positive.
fn fix_phase(v: CVector) -> CVector {
    let norm = libm::sqrt(norm_sq(v.as_slice()));
    if norm == 0.0 {
        return v;
    }
    let anchor = v.iter().copied().find(|z| *z != ZERO).unwrap_or(ZERO);
    let rot = anchor.conj() / anchor.norm();
    v.map(|z| z * rot / norm)
}

/// `α f_est` with the least-squares optimal `α = (f_estᴴ f_ref) / (f_estᴴ f_est)`.
pub fn align_scalar(f_est: &CVector, f_ref: &CVector) -> Result<CVector> {
    if f_est.len() != f_ref.len() {
        return Err(Error::DimensionMismatch {
            context: "calibration vector length",
            expected: f_ref.len(),
            actual: f_est.len(),
        });
    }
    let energy = norm_sq(f_est.as_slice());
    if energy == 0.0 {
        return Err(Error::InvalidInput("cannot align a zero calibration vector"));
    }
    let alpha = f_est.dotc(f_ref) / energy;
    Ok(f_est * alpha)
}

/// `‖f_est − f_ref‖² / ‖f_ref‖²`; the caller aligns first.
pub fn nmse_f(f_est: &CVector, f_ref: &CVector) -> Result<f64> {
    if f_est.len() != f_ref.len() {
        return Err(Error::DimensionMismatch {
            context: "calibration vector length",
            expected: f_ref.len(),
            actual: f_est.len(),
        });
    }
    let reference = norm_sq(f_ref.as_slice());
    if reference == 0.0 {
        return Err(Error::InvalidInput("reference calibration vector is zero"));
    }
    Ok(norm_sq((f_est - f_ref).as_slice()) / reference)
}

/// NMSE after removing the complex scalar ambiguity.
pub fn aligned_nmse(f_est: &CVector, f_ref: &CVector) -> Result<f64> {
    nmse_f(&align_scalar(f_est, f_ref)?, f_ref)
}

//! Transceiver configuration and hardware impairments.
//!
//! The hybrid front end is reduced to its equivalent model: the RF-chain
//! responses (mixers, converters) are replicated onto every branch they feed
//! and merged with the per-branch amplifier responses, giving diagonal
//! transmit and receive responses `T` and `R` of size `n_ant`. The
//! calibration matrix is `F = R^{-T} T`, which for diagonal responses is the
//! elementwise ratio `T_mm / R_mm`.
//!
//! Antennas are mapped to RF chains in contiguous blocks: antennas
//! `0..n_ant/n_rf` hang off chain 0, the next block off chain 1, and so on.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{norm_sq, CVector, C64, ZERO};
use crate::rng::unit_phasor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Subarray,
    FullyConnected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Arrangement {
    /// Co-polarized uniform linear array.
    #[default]
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridArrayConfig {
    pub n_ant: usize,
    pub n_rf: usize,
    pub architecture: Architecture,
    /// Inter-element spacing in half-wavelength units.
    pub element_spacing: f64,
    pub arrangement: Arrangement,
}

impl HybridArrayConfig {
    pub fn new(n_ant: usize, n_rf: usize, architecture: Architecture) -> Result<Self> {
        let config = HybridArrayConfig {
            n_ant,
            n_rf,
            architecture,
            element_spacing: 1.0,
            arrangement: Arrangement::Linear,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn subarray(n_ant: usize, n_rf: usize) -> Result<Self> {
        Self::new(n_ant, n_rf, Architecture::Subarray)
    }

    pub fn fully_connected(n_ant: usize, n_rf: usize) -> Result<Self> {
        Self::new(n_ant, n_rf, Architecture::FullyConnected)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ant == 0 {
            return Err(Error::InvalidParameter {
                name: "n_ant",
                reason: "must be positive",
            });
        }
        if self.n_rf == 0 {
            return Err(Error::InvalidParameter {
                name: "n_rf",
                reason: "must be positive",
            });
        }
        if self.n_rf > self.n_ant {
            return Err(Error::InvalidParameter {
                name: "n_rf",
                reason: "must not exceed n_ant",
            });
        }
        if self.architecture == Architecture::Subarray && !self.n_ant.is_multiple_of(self.n_rf) {
            return Err(Error::InvalidParameter {
                name: "n_rf",
                reason: "must divide n_ant for the subarray architecture",
            });
        }
        if !(self.element_spacing.is_finite() && self.element_spacing > 0.0) {
            return Err(Error::InvalidParameter {
                name: "element_spacing",
                reason: "must be positive and finite",
            });
        }
        Ok(())
    }

    /// Branches driven by each RF chain in the subarray architecture.
    pub fn antennas_per_chain(&self) -> usize {
        self.n_ant / self.n_rf
    }

    /// RF chain feeding antenna `m` (subarray architecture).
    pub fn chain_of(&self, antenna: usize) -> usize {
        antenna / self.antennas_per_chain()
    }

    fn require(&self, expected: Architecture) -> Result<()> {
        if self.architecture != expected {
            let expected = match expected {
                Architecture::Subarray => "subarray",
                Architecture::FullyConnected => "fully connected",
            };
            return Err(Error::UnsupportedArchitecture { expected });
        }
        Ok(())
    }

    pub(crate) fn require_subarray(&self) -> Result<()> {
        self.require(Architecture::Subarray)
    }

    pub(crate) fn require_fully_connected(&self) -> Result<()> {
        self.require(Architecture::FullyConnected)
    }
}

/// Statistical model for [`sample_hardware_profile_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpairmentModel {
    /// Standard deviation of the squared branch amplitude.
    pub amp_imbalance_std: f64,
    /// Half-width (radians) of a uniform branch phase error. Zero by default:
    /// branches then carry amplitude imbalance only.
    pub branch_phase_jitter: f64,
}

impl Default for ImpairmentModel {
    fn default() -> Self {
        ImpairmentModel {
            amp_imbalance_std: 0.1,
            branch_phase_jitter: 0.0,
        }
    }
}

/// Per-chain and per-branch hardware responses of one transceiver.
#[derive(Debug, Clone, PartialEq)]
pub struct HardwareProfile {
    /// Transmit RF-chain responses (length `n_rf`).
    pub t1: Vec<C64>,
    /// Receive RF-chain responses (length `n_rf`).
    pub r1: Vec<C64>,
    /// Transmit branch responses (length `n_ant`).
    pub t2: Vec<C64>,
    /// Receive branch responses (length `n_ant`).
    pub r2: Vec<C64>,
}

impl HardwareProfile {
    pub fn from_parts(t1: Vec<C64>, r1: Vec<C64>, t2: Vec<C64>, r2: Vec<C64>) -> Result<Self> {
        if t1.len() != r1.len() {
            return Err(Error::DimensionMismatch {
                context: "r1",
                expected: t1.len(),
                actual: r1.len(),
            });
        }
        if t2.len() != r2.len() {
            return Err(Error::DimensionMismatch {
                context: "r2",
                expected: t2.len(),
                actual: r2.len(),
            });
        }
        for (i, z) in t1.iter().chain(&r1).chain(&t2).chain(&r2).enumerate() {
            if *z == ZERO {
                return Err(Error::SingularHardware { index: i });
            }
        }
        Ok(HardwareProfile { t1, r1, t2, r2 })
    }

    /// Perfectly reciprocal unit hardware.
    pub fn ideal(config: &HybridArrayConfig) -> Self {
        let one = C64::new(1.0, 0.0);
        HardwareProfile {
            t1: alloc::vec![one; config.n_rf],
            r1: alloc::vec![one; config.n_rf],
            t2: alloc::vec![one; config.n_ant],
            r2: alloc::vec![one; config.n_ant],
        }
    }

    fn check_dims(&self, config: &HybridArrayConfig) -> Result<()> {
        if self.t1.len() != config.n_rf {
            return Err(Error::DimensionMismatch {
                context: "hardware profile RF chains",
                expected: config.n_rf,
                actual: self.t1.len(),
            });
        }
        if self.t2.len() != config.n_ant {
            return Err(Error::DimensionMismatch {
                context: "hardware profile branches",
                expected: config.n_ant,
                actual: self.t2.len(),
            });
        }
        Ok(())
    }
}

/// Largest standard deviation of `a²` reachable with `a ~ U[1-ε, 1+ε]`, `ε < 1`.
pub const MAX_AMP_IMBALANCE_STD: f64 = 1.192_569_587_999_887_6; // sqrt(64/45)

/// Half-width `ε` such that `a ~ U[1-ε, 1+ε]` has `std(a²) = amp_imbalance_std`.
///
/// `Var(a²) = (4/3)ε² + (4/45)ε⁴`, a quadratic in `ε²`; the positive root is
/// taken. Amplitudes must stay strictly positive, so `ε < 1` is required.
pub fn amplitude_half_width(amp_imbalance_std: f64) -> Result<f64> {
    if !(amp_imbalance_std.is_finite() && amp_imbalance_std >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "amp_imbalance_std",
            reason: "must be a finite non-negative number",
        });
    }
    if amp_imbalance_std == 0.0 {
        return Ok(0.0);
    }
    let var = amp_imbalance_std * amp_imbalance_std;
    let (a, b) = (4.0 / 45.0, 4.0 / 3.0);
    // Stable root of a·x² + b·x − var = 0 for x = ε².
    let x = 2.0 * var / (b + libm::sqrt(b * b + 4.0 * a * var));
    let eps = libm::sqrt(x);
    if eps >= 1.0 {
        return Err(Error::InvalidParameter {
            name: "amp_imbalance_std",
            reason: "too large for a positive uniform amplitude model",
        });
    }
    Ok(eps)
}

pub fn sample_hardware_profile<R: Rng + ?Sized>(
    config: &HybridArrayConfig,
    amp_imbalance_std: f64,
    rng: &mut R,
) -> Result<HardwareProfile> {
    sample_hardware_profile_with(
        config,
        &ImpairmentModel {
            amp_imbalance_std,
            branch_phase_jitter: 0.0,
        },
        rng,
    )
}

/// Draws mixer phases uniformly on `[-π, π)` and branch amplitudes uniformly
/// on `[1-ε, 1+ε]`.
pub fn sample_hardware_profile_with<R: Rng + ?Sized>(
    config: &HybridArrayConfig,
    model: &ImpairmentModel,
    rng: &mut R,
) -> Result<HardwareProfile> {
    config.validate()?;
    let eps = amplitude_half_width(model.amp_imbalance_std)?;
    if !(model.branch_phase_jitter.is_finite() && model.branch_phase_jitter >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "branch_phase_jitter",
            reason: "must be a finite non-negative number",
        });
    }
    let t1: Vec<C64> = (0..config.n_rf).map(|_| unit_phasor(rng)).collect();
    let r1: Vec<C64> = (0..config.n_rf).map(|_| unit_phasor(rng)).collect();
    let mut branch = || {
        let amp = if eps > 0.0 {
            rng.random_range(1.0 - eps..=1.0 + eps)
        } else {
            1.0
        };
        let phase = if model.branch_phase_jitter > 0.0 {
            let w = model.branch_phase_jitter;
            rng.random_range(-w..w)
        } else {
            0.0
        };
        C64::from_polar(amp, phase)
    };
    let t2: Vec<C64> = (0..config.n_ant).map(|_| branch()).collect();
    let r2: Vec<C64> = (0..config.n_ant).map(|_| branch()).collect();
    Ok(HardwareProfile { t1, r1, t2, r2 })
}

/// Diagonal of `T = T2 (T1 ⊗ I)` for a subarray transceiver.
pub fn merged_tx_response(profile: &HardwareProfile, config: &HybridArrayConfig) -> Result<Vec<C64>> {
    config.require_subarray()?;
    profile.check_dims(config)?;
    Ok(merge_subarray(&profile.t1, &profile.t2, config))
}

/// Diagonal of `R = (R1 ⊗ I) R2` for a subarray transceiver.
pub fn merged_rx_response(profile: &HardwareProfile, config: &HybridArrayConfig) -> Result<Vec<C64>> {
    config.require_subarray()?;
    profile.check_dims(config)?;
    Ok(merge_subarray(&profile.r1, &profile.r2, config))
}

fn merge_subarray(chain: &[C64], branch: &[C64], config: &HybridArrayConfig) -> Vec<C64> {
    branch
        .iter()
        .enumerate()
        .map(|(m, b)| b * chain[config.chain_of(m)])
        .collect()
}

/// Diagonal calibration matrix `F = R^{-T} T`, stored as its diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationMatrix {
    f: CVector,
}

impl CalibrationMatrix {
    /// Wraps a diagonal; every entry must be nonzero.
    pub fn new(f: CVector) -> Result<Self> {
        if let Some(index) = f.iter().position(|z| *z == ZERO) {
            return Err(Error::SingularCalibration { index });
        }
        Ok(CalibrationMatrix { f })
    }

    pub fn from_slice(f: &[C64]) -> Result<Self> {
        Self::new(CVector::from_column_slice(f))
    }

    pub fn as_vector(&self) -> &CVector {
        &self.f
    }

    pub fn into_vector(self) -> CVector {
        self.f
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(norm_sq(self.f.as_slice()))
    }

    /// Unit-norm copy.
    pub fn normalized(&self) -> CalibrationMatrix {
        let n = self.norm();
        CalibrationMatrix { f: &self.f / C64::new(n, 0.0) }
    }

    /// Copy scaled so that the first coefficient equals one, the alternative
    /// normalization to the unit-norm constraint.
    pub fn pinned_first(&self) -> CalibrationMatrix {
        let first = self.f[0];
        CalibrationMatrix { f: &self.f / first }
    }

    /// Restricts to the given antenna indices, in order.
    pub fn select(&self, indices: &[usize]) -> CalibrationMatrix {
        CalibrationMatrix {
            f: CVector::from_iterator(indices.len(), indices.iter().map(|&i| self.f[i])),
        }
    }
}

/// Ground-truth `f_m = T_mm / R_mm`, unnormalized.
pub fn true_calibration(profile: &HardwareProfile, config: &HybridArrayConfig) -> Result<CalibrationMatrix> {
    let t = merged_tx_response(profile, config)?;
    let r = merged_rx_response(profile, config)?;
    calibration_from_responses(&t, &r)
}

pub fn calibration_from_responses(tx: &[C64], rx: &[C64]) -> Result<CalibrationMatrix> {
    if tx.len() != rx.len() {
        return Err(Error::DimensionMismatch {
            context: "receive response",
            expected: tx.len(),
            actual: rx.len(),
        });
    }
    let mut f = Vec::with_capacity(tx.len());
    for (index, (t, r)) in tx.iter().zip(rx).enumerate() {
        if *r == ZERO {
            return Err(Error::SingularHardware { index });
        }
        f.push(t / r);
    }
    CalibrationMatrix::from_slice(&f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionScheme {
    /// Left half versus right half of the array.
    TwoSides,
    /// Consecutive blocks of `block` antennas alternate between the groups.
    Interleaved { block: usize },
}

/// Split of the antennas (or branches) into two non-empty groups, 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    group_a: Vec<usize>,
    group_b: Vec<usize>,
}

impl Partition {
    pub fn new(group_a: Vec<usize>, group_b: Vec<usize>) -> Result<Self> {
        let n = group_a.len() + group_b.len();
        if group_a.is_empty() || group_b.is_empty() {
            return Err(Error::UnsupportedPartition("both groups must be non-empty"));
        }
        let mut seen = alloc::vec![false; n];
        for &i in group_a.iter().chain(&group_b) {
            if i >= n || seen[i] {
                return Err(Error::UnsupportedPartition(
                    "groups must be disjoint and cover every antenna",
                ));
            }
            seen[i] = true;
        }
        Ok(Partition { group_a, group_b })
    }

    pub fn group_a(&self) -> &[usize] {
        &self.group_a
    }

    pub fn group_b(&self) -> &[usize] {
        &self.group_b
    }

    pub fn n_ant(&self) -> usize {
        self.group_a.len() + self.group_b.len()
    }

    /// Same split with the roles of the two groups exchanged.
    pub fn swapped(&self) -> Partition {
        Partition {
            group_a: self.group_b.clone(),
            group_b: self.group_a.clone(),
        }
    }

    /// Checks that every RF chain's subarray lies inside one group, so a chain
    /// is never asked to transmit and receive at once.
    pub fn check_chain_alignment(&self, config: &HybridArrayConfig) -> Result<()> {
        config.require_subarray()?;
        if self.n_ant() != config.n_ant {
            return Err(Error::DimensionMismatch {
                context: "partition size",
                expected: config.n_ant,
                actual: self.n_ant(),
            });
        }
        let mut in_a = alloc::vec![false; config.n_ant];
        for &i in &self.group_a {
            in_a[i] = true;
        }
        let per = config.antennas_per_chain();
        for chain in in_a.chunks(per) {
            if chain.iter().any(|&x| x != chain[0]) {
                return Err(Error::UnsupportedPartition(
                    "an RF chain's subarray straddles both groups",
                ));
            }
        }
        Ok(())
    }
}

pub fn make_partition(config: &HybridArrayConfig, scheme: PartitionScheme) -> Result<Partition> {
    let n = config.n_ant;
    if !n.is_multiple_of(2) {
        return Err(Error::UnsupportedPartition("n_ant must be even"));
    }
    let half = n / 2;
    let (a, b): (Vec<usize>, Vec<usize>) = match scheme {
        PartitionScheme::TwoSides => ((0..half).collect(), (half..n).collect()),
        PartitionScheme::Interleaved { block } => {
            if block == 0 || !half.is_multiple_of(block) {
                return Err(Error::UnsupportedPartition(
                    "interleaving block must divide n_ant/2",
                ));
            }
            (0..n).partition(|i| (i / block) % 2 == 0)
        }
    };
    Ok(Partition {
        group_a: a,
        group_b: b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, identity, kron, CMatrix};
    use crate::rng::keyed_rng;

    fn cfg(n_ant: usize, n_rf: usize) -> HybridArrayConfig {
        HybridArrayConfig::subarray(n_ant, n_rf).unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn config_invariants() {
        assert!(HybridArrayConfig::subarray(64, 8).is_ok());
        assert!(HybridArrayConfig::subarray(64, 7).is_err());
        assert!(HybridArrayConfig::subarray(4, 8).is_err());
        assert!(HybridArrayConfig::fully_connected(6, 4).is_ok());
        assert!(HybridArrayConfig::subarray(0, 1).is_err());
    }

    #[test]
    fn half_width_for_ten_percent_imbalance() {
        let eps = amplitude_half_width(0.1).unwrap();
        assert!((eps - 0.0866).abs() < 1e-4, "eps = {eps}");
        let var = 4.0 / 3.0 * eps * eps + 4.0 / 45.0 * eps.powi(4);
        assert!((var - 0.01).abs() < 1e-15);
        assert_eq!(amplitude_half_width(0.0).unwrap(), 0.0);
        assert!(amplitude_half_width(1.2).is_err());
        assert!(amplitude_half_width(-0.1).is_err());
        let near_max = amplitude_half_width(MAX_AMP_IMBALANCE_STD * 0.999).unwrap();
        assert!(near_max < 1.0);
    }

    #[test]
    fn sampled_amplitudes_have_requested_spread() {
        // 10⁶ draws of a² from the branch amplitude model.
        let config = cfg(10_000, 1);
        let mut rng = keyed_rng(3, &[]);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut n = 0usize;
        while n < 1_000_000 {
            let p = sample_hardware_profile(&config, 0.1, &mut rng).unwrap();
            for z in p.t2.iter().chain(&p.r2) {
                let a2 = z.norm_sqr();
                sum += a2;
                sum_sq += a2 * a2;
                n += 1;
            }
        }
        let mean = sum / n as f64;
        let std = (sum_sq / n as f64 - mean * mean).sqrt();
        assert!((std - 0.1).abs() < 0.001, "std(a²) = {std}");
    }

    #[test]
    fn zero_imbalance_gives_unit_branches() {
        let config = cfg(16, 4);
        let p = sample_hardware_profile(&config, 0.0, &mut keyed_rng(1, &[])).unwrap();
        assert!(p.t2.iter().chain(&p.r2).all(|z| *z == c(1.0, 0.0)));
        assert!(p.t1.iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn profiles_are_deterministic() {
        let config = cfg(16, 4);
        let a = sample_hardware_profile(&config, 0.1, &mut keyed_rng(9, &[1])).unwrap();
        let b = sample_hardware_profile(&config, 0.1, &mut keyed_rng(9, &[1])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn phase_jitter_switch() {
        let config = cfg(8, 2);
        let model = ImpairmentModel {
            amp_imbalance_std: 0.0,
            branch_phase_jitter: 0.3,
        };
        let p = sample_hardware_profile_with(&config, &model, &mut keyed_rng(2, &[])).unwrap();
        assert!(p.t2.iter().all(|z| z.arg().abs() < 0.3 && (z.norm() - 1.0).abs() < 1e-14));
        assert!(p.t2.iter().any(|z| z.arg() != 0.0));
    }

    #[test]
    fn merged_tx_hand_expansion() {
        let config = cfg(4, 2);
        let (ea, eb) = (C64::from_polar(1.0, 0.3), C64::from_polar(1.0, -1.2));
        let t2 = [c(1.1, 0.0), c(0.9, 0.0), c(1.05, 0.0), c(0.95, 0.0)];
        let p = HardwareProfile::from_parts(
            alloc::vec![ea, eb],
            alloc::vec![c(1.0, 0.0); 2],
            t2.to_vec(),
            alloc::vec![c(1.0, 0.0); 4],
        )
        .unwrap();
        let t = merged_tx_response(&p, &config).unwrap();
        assert_eq!(t, alloc::vec![t2[0] * ea, t2[1] * ea, t2[2] * eb, t2[3] * eb]);
    }

    #[test]
    fn merged_rx_hand_expansion() {
        let config = cfg(4, 2);
        let p = sample_hardware_profile(&config, 0.1, &mut keyed_rng(4, &[])).unwrap();
        let r = merged_rx_response(&p, &config).unwrap();
        let expected = [
            p.r2[0] * p.r1[0],
            p.r2[1] * p.r1[0],
            p.r2[2] * p.r1[1],
            p.r2[3] * p.r1[1],
        ];
        assert_eq!(r, expected.to_vec());
        let ideal = HardwareProfile::ideal(&config);
        assert!(merged_rx_response(&ideal, &config).unwrap().iter().all(|z| *z == c(1.0, 0.0)));
    }

    #[test]
    fn one_branch_per_chain_is_elementwise() {
        let config = cfg(6, 6);
        let p = sample_hardware_profile(&config, 0.1, &mut keyed_rng(5, &[])).unwrap();
        let t = merged_tx_response(&p, &config).unwrap();
        for (m, tm) in t.iter().enumerate() {
            assert_eq!(*tm, p.t2[m] * p.t1[m]);
        }
    }

    #[test]
    fn merged_response_rejects_fully_connected() {
        let config = HybridArrayConfig::fully_connected(4, 2).unwrap();
        let p = HardwareProfile::ideal(&config);
        assert!(matches!(
            merged_tx_response(&p, &config),
            Err(Error::UnsupportedArchitecture { .. })
        ));
    }

    #[test]
    fn merged_response_matches_dense_kronecker() {
        for (n_ant, n_rf, seed) in [(8, 2, 1u64), (12, 3, 2), (16, 16, 3), (9, 1, 4)] {
            let config = cfg(n_ant, n_rf);
            let p = sample_hardware_profile(&config, 0.1, &mut keyed_rng(seed, &[])).unwrap();
            let per = identity(n_ant / n_rf);
            let t_dense = diag(&p.t2) * kron(&diag(&p.t1), &per);
            let r_dense = kron(&diag(&p.r1), &per) * diag(&p.r2);
            let t = diag(&merged_tx_response(&p, &config).unwrap());
            let r = diag(&merged_rx_response(&p, &config).unwrap());
            assert!((t_dense - t).norm() < 1e-12);
            assert!((r_dense - r).norm() < 1e-12);
        }
    }

    #[test]
    fn analog_beamformer_commutes_with_chain_response() {
        // V_RF T1 = (T1 ⊗ I) V_RF for block-diagonal V_RF with n_ant/n_rf × 1 blocks.
        let config = cfg(12, 3);
        let mut rng = keyed_rng(6, &[]);
        let p = sample_hardware_profile(&config, 0.1, &mut rng).unwrap();
        let per = config.antennas_per_chain();
        let mut v = CMatrix::zeros(12, 3);
        for m in 0..12 {
            v[(m, m / per)] = crate::rng::unit_phasor(&mut rng);
        }
        let lhs = &v * diag(&p.t1);
        let rhs = kron(&diag(&p.t1), &identity(per)) * &v;
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn reciprocal_hardware_calibrates_to_ones() {
        let config = cfg(8, 2);
        let mut p = sample_hardware_profile(&config, 0.1, &mut keyed_rng(7, &[])).unwrap();
        p.r1 = p.t1.clone();
        p.r2 = p.t2.clone();
        let f = true_calibration(&p, &config).unwrap();
        assert!(f.as_vector().iter().all(|z| (z - c(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn calibration_is_elementwise_ratio() {
        let f = calibration_from_responses(&[c(2.0, 0.0), c(0.0, 2.0)], &[c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        assert_eq!(f.as_vector().as_slice(), &[c(2.0, 0.0), c(2.0, 0.0)]);
        assert!(matches!(
            calibration_from_responses(&[c(1.0, 0.0)], &[ZERO]),
            Err(Error::SingularHardware { index: 0 })
        ));
    }

    #[test]
    fn calibration_relates_downlink_and_uplink() {
        // H_DL = F_UE^{-T} H_UL^T F_BS for any symmetric C.
        let bs = cfg(8, 2);
        let ue = cfg(4, 2);
        let mut rng = keyed_rng(8, &[]);
        let pb = sample_hardware_profile(&bs, 0.1, &mut rng).unwrap();
        let pu = sample_hardware_profile(&ue, 0.1, &mut rng).unwrap();
        let c_mat = CMatrix::from_fn(4, 8, |_, _| crate::rng::complex_gaussian(&mut rng, 1.0));
        let h_dl = diag(&merged_rx_response(&pu, &ue).unwrap())
            * &c_mat
            * diag(&merged_tx_response(&pb, &bs).unwrap());
        let h_ul = diag(&merged_rx_response(&pb, &bs).unwrap())
            * c_mat.transpose()
            * diag(&merged_tx_response(&pu, &ue).unwrap());
        let f_bs = true_calibration(&pb, &bs).unwrap();
        let f_ue = true_calibration(&pu, &ue).unwrap();
        let f_ue_inv: alloc::vec::Vec<C64> = f_ue.as_vector().iter().map(|z| z.inv()).collect();
        let rebuilt = diag(&f_ue_inv) * h_ul.transpose() * diag(f_bs.as_vector().as_slice());
        assert!((rebuilt - h_dl).norm() < 1e-12);
    }

    #[test]
    fn partitions() {
        let config = cfg(64, 8);
        let two = make_partition(&config, PartitionScheme::TwoSides).unwrap();
        assert_eq!(two.group_a(), (0..32).collect::<Vec<_>>().as_slice());
        let inter = make_partition(&config, PartitionScheme::Interleaved { block: 8 }).unwrap();
        assert_eq!(&inter.group_a()[..8], &[0, 1, 2, 3, 4, 5, 6, 7]);
        assert_eq!(&inter.group_a()[8..16], &[16, 17, 18, 19, 20, 21, 22, 23]);
        assert_eq!(&inter.group_b()[..8], &[8, 9, 10, 11, 12, 13, 14, 15]);
        assert_eq!(inter.group_a().len(), 32);
        let small = make_partition(&cfg(4, 2), PartitionScheme::Interleaved { block: 1 }).unwrap();
        assert_eq!(small.group_a(), &[0, 2]);
        assert_eq!(small.group_b(), &[1, 3]);
        assert!(make_partition(&cfg(5, 1), PartitionScheme::TwoSides).is_err());
        assert!(make_partition(&config, PartitionScheme::Interleaved { block: 5 }).is_err());
        assert!(two.check_chain_alignment(&config).is_ok());
        assert!(inter.check_chain_alignment(&config).is_ok());
        assert!(small.check_chain_alignment(&cfg(4, 2)).is_err());
    }

    #[test]
    fn partition_constructor_validates() {
        assert!(Partition::new(alloc::vec![0, 1], alloc::vec![2, 3]).is_ok());
        assert!(Partition::new(alloc::vec![0, 1], alloc::vec![1, 3]).is_err());
        assert!(Partition::new(alloc::vec![0], alloc::vec![1, 2]).is_ok());
        assert!(Partition::new(alloc::vec![], alloc::vec![0, 1]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn partitions_are_disjoint_exhaustive_equal(half in 1usize..40, block_sel in 0usize..4, two in proptest::bool::ANY) {
            let n = 2 * half;
            let config = HybridArrayConfig::subarray(n, 1).unwrap();
            let divisors: Vec<usize> = (1..=half).filter(|b| half % b == 0).collect();
            let scheme = if two {
                PartitionScheme::TwoSides
            } else {
                PartitionScheme::Interleaved { block: divisors[block_sel % divisors.len()] }
            };
            let p = make_partition(&config, scheme).unwrap();
            proptest::prop_assert_eq!(p.group_a().len(), half);
            proptest::prop_assert_eq!(p.group_b().len(), half);
            let mut all: Vec<usize> = p.group_a().iter().chain(p.group_b()).copied().collect();
            all.sort_unstable();
            proptest::prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}

//! Pilot-based effective channel estimation through hybrid beamformers.
//!
//! With `K` transmit precoders `V_k` carrying pilots `p_k` and `L` receive
//! combiners `W_l`, the measurements stack into `Y = W̃ H P̃ + N` where
//! `P̃ = [V_1 p_1, …, V_K p_K]` and `W̃ = [W_1; …; W_L]`. Since
//! `vec(W̃ H P̃) = (P̃ᵀ ⊗ W̃) vec(H)`, the least-squares estimate factors as
//! `Ĥ = W̃⁺ Y P̃⁺` and only two small pseudo-inverses are needed. `H` is
//! identifiable iff `rank(P̃) = n_tx` and `rank(W̃) = n_rx`.
//!
//! Pilots are injected after the digital precoder and the digital combiner is
//! the identity, so each measurement yields one sample per receive RF chain.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, RankCondition, Result};
use crate::linalg::{pseudo_inverse, CMatrix, CVector, C64};
use crate::rng::{complex_gaussian, keyed_rng, tag, unit_phasor};

/// Block-diagonal analog network: `n_rf` chains, each driving
/// `ant_per_chain` consecutive branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubarrayLayout {
    pub n_rf: usize,
    pub ant_per_chain: usize,
}

impl SubarrayLayout {
    pub fn new(n_rf: usize, ant_per_chain: usize) -> Result<Self> {
        if n_rf == 0 || ant_per_chain == 0 {
            return Err(Error::InvalidParameter {
                name: "layout",
                reason: "RF chains and branches per chain must be positive",
            });
        }
        Ok(SubarrayLayout { n_rf, ant_per_chain })
    }

    pub fn n_ant(&self) -> usize {
        self.n_rf * self.ant_per_chain
    }
}

/// Transmit precoders with their pilots, and receive combiners.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamWeightSet {
    tx: SubarrayLayout,
    rx: SubarrayLayout,
    precoders: Vec<CMatrix>,
    pilots: Vec<CVector>,
    combiners: Vec<CMatrix>,
}

impl BeamWeightSet {
    pub fn tx_layout(&self) -> SubarrayLayout {
        self.tx
    }

    pub fn rx_layout(&self) -> SubarrayLayout {
        self.rx
    }

    pub fn k(&self) -> usize {
        self.precoders.len()
    }

    pub fn l(&self) -> usize {
        self.combiners.len()
    }

    /// Samples per measurement (one per receive RF chain).
    pub fn n_s(&self) -> usize {
        self.rx.n_rf
    }

    pub fn precoders(&self) -> &[CMatrix] {
        &self.precoders
    }

    pub fn pilots(&self) -> &[CVector] {
        &self.pilots
    }

    pub fn combiners(&self) -> &[CMatrix] {
        &self.combiners
    }

    /// `P̃ = [V_1 p_1, …, V_K p_K]`.
    pub fn stacked_pilots(&self) -> CMatrix {
        let n_t = self.tx.n_ant();
        let mut p = CMatrix::zeros(n_t, self.k());
        for (k, (v, s)) in self.precoders.iter().zip(&self.pilots).enumerate() {
            p.set_column(k, &(v * s));
        }
        p
    }

    /// `W̃ = [W_1; …; W_L]`.
    pub fn stacked_combiners(&self) -> CMatrix {
        let n_s = self.n_s();
        let mut w = CMatrix::zeros(n_s * self.l(), self.rx.n_ant());
        for (l, wl) in self.combiners.iter().enumerate() {
            w.rows_mut(l * n_s, n_s).copy_from(wl);
        }
        w
    }

    /// The first `k` precoders and `l` combiners.
    pub fn truncated(&self, k: usize, l: usize) -> Result<BeamWeightSet> {
        if k > self.k() || l > self.l() {
            return Err(Error::InvalidParameter {
                name: "K/L",
                reason: "exceeds the generated weight set",
            });
        }
        Ok(BeamWeightSet {
            tx: self.tx,
            rx: self.rx,
            precoders: self.precoders[..k].to_vec(),
            pilots: self.pilots[..k].to_vec(),
            combiners: self.combiners[..l].to_vec(),
        })
    }
}

fn qpsk<R: Rng + ?Sized>(rng: &mut R, amplitude: f64) -> C64 {
    let s = amplitude * core::f64::consts::FRAC_1_SQRT_2;
    let re = if rng.random::<bool>() { s } else { -s };
    let im = if rng.random::<bool>() { s } else { -s };
    C64::new(re, im)
}

/// Random unit-modulus analog weights (phases uniform on `[-π, π)`) and QPSK
/// pilots of the given amplitude.
///
/// Each precoder, pilot and combiner is drawn from its own stream keyed by its
/// index, so the set for `(K, L)` is a prefix of the set for any larger
/// `(K', L')` under the same seed.
pub fn random_beam_weights(
    tx: SubarrayLayout,
    rx: SubarrayLayout,
    k: usize,
    l: usize,
    pilot_amplitude: f64,
    seed: u64,
) -> Result<BeamWeightSet> {
    if k == 0 || l == 0 {
        return Err(Error::InvalidParameter {
            name: "K/L",
            reason: "must be at least 1",
        });
    }
    if !(pilot_amplitude.is_finite() && pilot_amplitude > 0.0) {
        return Err(Error::InvalidParameter {
            name: "pilot_amplitude",
            reason: "must be positive",
        });
    }
    let precoders = (0..k)
        .map(|i| {
            let mut rng = keyed_rng(seed, &[tag::PRECODER, i as u64]);
            let mut v = CMatrix::zeros(tx.n_ant(), tx.n_rf);
            for m in 0..tx.n_ant() {
                v[(m, m / tx.ant_per_chain)] = unit_phasor(&mut rng);
            }
            v
        })
        .collect();
    let pilots = (0..k)
        .map(|i| {
            let mut rng = keyed_rng(seed, &[tag::PILOT, i as u64]);
            CVector::from_fn(tx.n_rf, |_, _| qpsk(&mut rng, pilot_amplitude))
        })
        .collect();
    let combiners = (0..l)
        .map(|i| {
            let mut rng = keyed_rng(seed, &[tag::COMBINER, i as u64]);
            let mut w = CMatrix::zeros(rx.n_rf, rx.n_ant());
            for m in 0..rx.n_ant() {
                w[(m / rx.ant_per_chain, m)] = unit_phasor(&mut rng);
            }
            w
        })
        .collect();
    Ok(BeamWeightSet {
        tx,
        rx,
        precoders,
        pilots,
        combiners,
    })
}

/// Transmit and receive impairment levels of a measurement campaign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBudget {
    /// Transmitter error vector magnitude.
    pub tx_evm_db: f64,
    pub tx_power_dbm_per_antenna: f64,
    /// Digital-domain receive noise per combiner output.
    pub rx_noise_floor_dbm: f64,
    pub enable_tx: bool,
    pub enable_rx: bool,
}

impl Default for NoiseBudget {
    fn default() -> Self {
        NoiseBudget {
            tx_evm_db: -20.0,
            tx_power_dbm_per_antenna: 0.0,
            rx_noise_floor_dbm: -97.0,
            enable_tx: true,
            enable_rx: true,
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    libm::pow(10.0, (dbm - 30.0) / 10.0)
}

impl NoiseBudget {
    pub fn noiseless() -> Self {
        NoiseBudget {
            enable_tx: false,
            enable_rx: false,
            ..Default::default()
        }
    }

    pub fn with_flags(self, enable_tx: bool, enable_rx: bool) -> Self {
        NoiseBudget {
            enable_tx,
            enable_rx,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tx_evm_db.is_finite() && self.tx_evm_db <= 0.0) {
            return Err(Error::InvalidParameter {
                name: "tx_evm_db",
                reason: "must be at most 0 dB",
            });
        }
        if !self.tx_power_dbm_per_antenna.is_finite() || !self.rx_noise_floor_dbm.is_finite() {
            return Err(Error::InvalidParameter {
                name: "power levels",
                reason: "must be finite",
            });
        }
        Ok(())
    }

    pub fn tx_power_w(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm_per_antenna)
    }

    /// Transmit SNR in dB; an EVM of −20 dB corresponds to 40 dB.
    pub fn tx_snr_db(&self) -> f64 {
        -2.0 * self.tx_evm_db
    }

    /// Per-antenna transmit noise power in watts.
    pub fn tx_noise_power_w(&self) -> f64 {
        self.tx_power_w() * libm::pow(10.0, -self.tx_snr_db() / 10.0)
    }

    pub fn rx_noise_power_w(&self) -> f64 {
        dbm_to_watts(self.rx_noise_floor_dbm)
    }

    /// QPSK amplitude giving `tx_power_dbm_per_antenna` on every unit-modulus branch.
    pub fn pilot_amplitude(&self) -> f64 {
        libm::sqrt(self.tx_power_w())
    }
}

/// Effective channel `H = R C T` together with the path `R C` that transmit
/// noise, injected after the transmit front end, travels through.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveLink {
    h: CMatrix,
    noise_path: CMatrix,
}

impl EffectiveLink {
    pub fn from_front_ends(rx: &[C64], c: &CMatrix, tx: &[C64]) -> Result<Self> {
        if c.nrows() != rx.len() {
            return Err(Error::DimensionMismatch {
                context: "receive response length",
                expected: c.nrows(),
                actual: rx.len(),
            });
        }
        if c.ncols() != tx.len() {
            return Err(Error::DimensionMismatch {
                context: "transmit response length",
                expected: c.ncols(),
                actual: tx.len(),
            });
        }
        let noise_path = CMatrix::from_fn(c.nrows(), c.ncols(), |i, j| rx[i] * c[(i, j)]);
        let h = CMatrix::from_fn(c.nrows(), c.ncols(), |i, j| noise_path[(i, j)] * tx[j]);
        Ok(EffectiveLink { h, noise_path })
    }

    /// Link whose transmit noise is injected ahead of `h` itself.
    pub fn from_matrix(h: CMatrix) -> Self {
        EffectiveLink {
            noise_path: h.clone(),
            h,
        }
    }

    pub fn h(&self) -> &CMatrix {
        &self.h
    }

    pub fn noise_path(&self) -> &CMatrix {
        &self.noise_path
    }
}

/// Received block matrix `Y` (`n_s·L × K`) with the stacked designs.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub y: CMatrix,
    pub p_stacked: CMatrix,
    pub w_stacked: CMatrix,
    pub n_s: usize,
}

impl MeasurementSet {
    pub fn k(&self) -> usize {
        self.y.ncols()
    }

    pub fn l(&self) -> usize {
        self.y.nrows() / self.n_s
    }

    /// `y_{l,k}`.
    pub fn block(&self, l: usize, k: usize) -> CVector {
        self.y.view((l * self.n_s, k), (self.n_s, 1)).into_owned().column(0).into_owned()
    }

    /// Measurements of the first `k` precoders and `l` combiners. Equal to a
    /// fresh simulation with truncated weights and the same seed.
    pub fn truncated(&self, k: usize, l: usize) -> Result<MeasurementSet> {
        if k > self.k() || l > self.l() {
            return Err(Error::InvalidParameter {
                name: "K/L",
                reason: "exceeds the measured set",
            });
        }
        Ok(MeasurementSet {
            y: self.y.view((0, 0), (l * self.n_s, k)).into_owned(),
            p_stacked: self.p_stacked.columns(0, k).into_owned(),
            w_stacked: self.w_stacked.rows(0, l * self.n_s).into_owned(),
            n_s: self.n_s,
        })
    }
}

/// `y_{l,k} = W_l (H V_k p_k + (R C) n_tx) + n_rx`.
///
/// Transmit noise has power `tx_noise_power_w` on each transmitting branch and
/// is part of the transmitted signal `x_k`: every combiner observing pilot `k`
/// sees the same distortion. Receive noise has power `rx_noise_power_w` on each
/// combiner output and is fresh for every `(l, k)`.
pub fn simulate_measurements(
    link: &EffectiveLink,
    weights: &BeamWeightSet,
    noise: &NoiseBudget,
    seed: u64,
) -> Result<MeasurementSet> {
    noise.validate()?;
    let h = link.h();
    if h.ncols() != weights.tx.n_ant() {
        return Err(Error::DimensionMismatch {
            context: "channel columns vs transmit branches",
            expected: weights.tx.n_ant(),
            actual: h.ncols(),
        });
    }
    if h.nrows() != weights.rx.n_ant() {
        return Err(Error::DimensionMismatch {
            context: "channel rows vs receive branches",
            expected: weights.rx.n_ant(),
            actual: h.nrows(),
        });
    }
    let p = weights.stacked_pilots();
    let w = weights.stacked_combiners();
    let mut y = &w * (h * &p);
    let n_s = weights.n_s();
    let tx_var = noise.tx_noise_power_w();
    let rx_var = noise.rx_noise_power_w();
    for k in 0..weights.k() {
        let tx_noise = noise.enable_tx.then(|| {
            let mut rng = keyed_rng(seed, &[tag::TX_NOISE, k as u64]);
            let n_tx = CVector::from_fn(h.ncols(), |_, _| complex_gaussian(&mut rng, tx_var));
            link.noise_path() * n_tx
        });
        for l in 0..weights.l() {
            let mut block = CVector::zeros(n_s);
            if let Some(received) = &tx_noise {
                block += &weights.combiners[l] * received;
            }
            if noise.enable_rx {
                let mut rng = keyed_rng(seed, &[tag::RX_NOISE, l as u64, k as u64]);
                block += CVector::from_fn(n_s, |_, _| complex_gaussian(&mut rng, rx_var));
            }
            if noise.enable_tx || noise.enable_rx {
                let mut col = y.view_mut((l * n_s, k), (n_s, 1));
                col += &block;
            }
        }
    }
    Ok(MeasurementSet {
        y,
        p_stacked: p,
        w_stacked: w,
        n_s,
    })
}

/// Least-squares effective channel from a measurement set.
///
/// Fails with [`Error::Underdetermined`] when `rank(P̃) < n_tx` (too few
/// precoders) or `rank(W̃) < n_rx` (too few combiners).
pub fn ls_estimate_channel(meas: &MeasurementSet) -> Result<CMatrix> {
    let n_t = meas.p_stacked.nrows();
    let n_r = meas.w_stacked.ncols();
    let p_inv = pseudo_inverse(&meas.p_stacked);
    if p_inv.rank < n_t {
        return Err(Error::Underdetermined {
            condition: RankCondition::Precoders,
            rank: p_inv.rank,
            required: n_t,
        });
    }
    let w_inv = pseudo_inverse(&meas.w_stacked);
    if w_inv.rank < n_r {
        return Err(Error::Underdetermined {
            condition: RankCondition::Combiners,
            rank: w_inv.rank,
            required: n_r,
        });
    }
    Ok(w_inv.pinv * &meas.y * p_inv.pinv)
}

/// Minimum-norm least-squares estimate without the identifiability check.
/// Used to quantify how far an underdetermined design drifts.
pub fn ls_estimate_min_norm(meas: &MeasurementSet) -> CMatrix {
    let p_inv = pseudo_inverse(&meas.p_stacked);
    let w_inv = pseudo_inverse(&meas.w_stacked);
    w_inv.pinv * &meas.y * p_inv.pinv
}

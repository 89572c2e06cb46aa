//! Downlink CSIT from uplink estimates and calibration coefficients.
//!
//! For a single-antenna UE the two calibration factors merge into
//! `F = f_UE^{-1} F_BS`, and the downlink row vector is `h_ULᵀ F`. With
//! `F̂ = F + ΔF` and `ĥ_UL = h_UL + Δh` the per-antenna error is
//! `h_m ΔF_m + Δh_m F̂_m`. Errors are modeled as i.i.d. circular Gaussian,
//! which ignores the correlation a real solver produces between entries.

use rand::Rng;

use crate::array::{merged_rx_response, merged_tx_response, CalibrationMatrix, HardwareProfile, HybridArrayConfig};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_defect, norm_sq, CMatrix, CVector, C64, ZERO};
use crate::rng::{complex_gaussian, keyed_rng, tag};

/// Variances of the calibration and uplink estimation errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsitErrorModel {
    /// Per-entry variance of `ΔF`.
    pub sigma_f_sq: f64,
    /// Per-entry variance of `Δh`; equal to `NMSE_UL`.
    pub sigma_ul_sq: f64,
    pub n_ant_bs: usize,
}

impl CsitErrorModel {
    pub fn new(sigma_f_sq: f64, sigma_ul_sq: f64, n_ant_bs: usize) -> Result<Self> {
        let model = CsitErrorModel {
            sigma_f_sq,
            sigma_ul_sq,
            n_ant_bs,
        };
        model.validate()?;
        Ok(model)
    }

    /// Error model producing the given NMSE values for a calibration vector
    /// of energy `f_norm_sq`: `σ_F² = NMSE_F ‖F‖² / N`.
    pub fn from_nmse(nmse_f: f64, nmse_ul: f64, f_norm_sq: f64, n_ant_bs: usize) -> Result<Self> {
        if n_ant_bs == 0 {
            return Err(Error::InvalidParameter {
                name: "n_ant_bs",
                reason: "must be positive",
            });
        }
        Self::new(nmse_f * f_norm_sq / n_ant_bs as f64, nmse_ul, n_ant_bs)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_f_sq.is_finite() && self.sigma_f_sq >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "sigma_f_sq",
                reason: "must be a finite non-negative variance",
            });
        }
        if !(self.sigma_ul_sq.is_finite() && self.sigma_ul_sq >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "sigma_ul_sq",
                reason: "must be a finite non-negative variance",
            });
        }
        if self.n_ant_bs == 0 {
            return Err(Error::InvalidParameter {
                name: "n_ant_bs",
                reason: "must be positive",
            });
        }
        Ok(())
    }

    /// `N σ_F² / ‖F‖²`.
    pub fn nmse_f(&self, f_norm_sq: f64) -> f64 {
        self.n_ant_bs as f64 * self.sigma_f_sq / f_norm_sq
    }
}

/// `F_UE^{-T} H_ULᵀ F_BS`; `h_ul` is `N_BS × N_UE` (UE transmitting).
pub fn reconstruct_dl(h_ul: &CMatrix, f_bs: &CalibrationMatrix, f_ue: &CalibrationMatrix) -> Result<CMatrix> {
    if h_ul.nrows() != f_bs.len() {
        return Err(Error::DimensionMismatch {
            context: "uplink rows vs BS calibration",
            expected: f_bs.len(),
            actual: h_ul.nrows(),
        });
    }
    if h_ul.ncols() != f_ue.len() {
        return Err(Error::DimensionMismatch {
            context: "uplink columns vs UE calibration",
            expected: f_ue.len(),
            actual: h_ul.ncols(),
        });
    }
    let (fb, fu) = (f_bs.as_vector(), f_ue.as_vector());
    Ok(CMatrix::from_fn(h_ul.ncols(), h_ul.nrows(), |u, m| h_ul[(m, u)] * fb[m] / fu[u]))
}

/// Single-antenna UE: `ĥ_DL = f_UE^{-1} F_BS ĥ_UL`, returned as a column.
pub fn reconstruct_dl_single(h_ul: &CVector, f_bs: &CalibrationMatrix, f_ue: C64) -> Result<CVector> {
    if f_ue == ZERO {
        return Err(Error::SingularCalibration { index: 0 });
    }
    if h_ul.len() != f_bs.len() {
        return Err(Error::DimensionMismatch {
            context: "uplink length vs BS calibration",
            expected: f_bs.len(),
            actual: h_ul.len(),
        });
    }
    Ok(h_ul.component_mul(f_bs.as_vector()) / f_ue)
}

/// Front ends of a BS and a single-antenna UE.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleUeLink {
    pub t_bs: CVector,
    pub r_bs: CVector,
    pub t_ue: C64,
    pub r_ue: C64,
}

impl SingleUeLink {
    pub fn new(t_bs: CVector, r_bs: CVector, t_ue: C64, r_ue: C64) -> Result<Self> {
        if t_bs.len() != r_bs.len() || t_bs.is_empty() {
            return Err(Error::DimensionMismatch {
                context: "BS receive response",
                expected: t_bs.len(),
                actual: r_bs.len(),
            });
        }
        if let Some(index) = r_bs.iter().position(|z| *z == ZERO) {
            return Err(Error::SingularHardware { index });
        }
        if t_ue == ZERO {
            return Err(Error::SingularHardware { index: 0 });
        }
        Ok(SingleUeLink { t_bs, r_bs, t_ue, r_ue })
    }

    /// The UE profile must describe a one-antenna, one-chain transceiver.
    pub fn from_profiles(
        bs: &HardwareProfile,
        bs_config: &HybridArrayConfig,
        ue: &HardwareProfile,
        ue_config: &HybridArrayConfig,
    ) -> Result<Self> {
        if ue_config.n_ant != 1 {
            return Err(Error::DimensionMismatch {
                context: "UE antenna count",
                expected: 1,
                actual: ue_config.n_ant,
            });
        }
        let t = merged_tx_response(bs, bs_config)?;
        let r = merged_rx_response(bs, bs_config)?;
        let t_ue = merged_tx_response(ue, ue_config)?[0];
        let r_ue = merged_rx_response(ue, ue_config)?[0];
        Self::new(CVector::from_vec(t), CVector::from_vec(r), t_ue, r_ue)
    }

    pub fn n_ant(&self) -> usize {
        self.t_bs.len()
    }

    /// Combined `F = f_UE^{-1} F_BS` with `f_UE = t_UE / r_UE`.
    pub fn calibration(&self) -> CVector {
        let f_ue = self.t_ue / self.r_ue;
        self.t_bs.component_div(&self.r_bs) / f_ue
    }

    /// `E[h_UL h_ULᴴ] = |t_UE|² R R^H` for a unit-variance Rayleigh channel.
    pub fn ul_covariance(&self) -> CMatrix {
        let t2 = self.t_ue.norm_sqr();
        CMatrix::from_diagonal(&self.r_bs.map(|r| C64::new(t2 * r.norm_sqr(), 0.0)))
    }

    /// `h_UL = R_BS c t_UE`.
    pub fn uplink(&self, c: &CVector) -> CVector {
        self.r_bs.component_mul(c) * self.t_ue
    }

    /// `h_DL[m] = r_UE c_m T_m`.
    pub fn downlink(&self, c: &CVector) -> CVector {
        self.t_bs.component_mul(c) * self.r_ue
    }
}

fn check_covariance(omega: &CMatrix, n: usize) -> Result<()> {
    if omega.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            context: "covariance size",
            expected: n,
            actual: omega.nrows(),
        });
    }
    if hermitian_defect(omega) > 1e-12 {
        return Err(Error::InvalidInput("covariance is not Hermitian"));
    }
    let eig = ((omega + omega.adjoint()) * C64::new(0.5, 0.0)).symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if eig.eigenvalues.iter().any(|&v| v < -1e-10 * scale) {
        return Err(Error::InvalidInput("covariance is not positive semidefinite"));
    }
    Ok(())
}

fn trace_re(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// `(1/N)(σ_F² Tr Ω + σ_UL² ‖f̂‖²)`: the DL NMSE averaged over the channel,
/// the UL error and a `ΔF` independent of the given estimate `f̂`.
pub fn nmse_dl_closed_form(omega: &CMatrix, f_hat: &CVector, err: &CsitErrorModel) -> Result<f64> {
    err.validate()?;
    let n = err.n_ant_bs;
    if f_hat.len() != n {
        return Err(Error::DimensionMismatch {
            context: "calibration length",
            expected: n,
            actual: f_hat.len(),
        });
    }
    check_covariance(omega, n)?;
    Ok((err.sigma_f_sq * trace_re(omega) + err.sigma_ul_sq * norm_sq(f_hat.as_slice())) / n as f64)
}

/// Full expectation, also over `F̂ = F + ΔF`: `E‖F̂‖² = ‖F‖² + N σ_F²`.
pub fn nmse_dl_expected(omega: &CMatrix, f: &CVector, err: &CsitErrorModel) -> Result<f64> {
    let base = nmse_dl_closed_form(omega, f, err)?;
    Ok(base + err.sigma_ul_sq * err.sigma_f_sq)
}

/// Squared DL error `‖ĥ_DL − h_DL‖²` of Monte Carlo trial `trial`.
pub fn dl_error_trial(link: &SingleUeLink, err: &CsitErrorModel, seed: u64, trial: u64) -> Result<f64> {
    err.validate()?;
    let n = link.n_ant();
    if n != err.n_ant_bs {
        return Err(Error::DimensionMismatch {
            context: "error model antenna count",
            expected: n,
            actual: err.n_ant_bs,
        });
    }
    let mut rng = keyed_rng(seed, &[tag::CSIT, trial]);
    let c = CVector::from_fn(n, |_, _| complex_gaussian(&mut rng, 1.0));
    let f_hat = link.calibration() + CVector::from_fn(n, |_, _| complex_gaussian(&mut rng, err.sigma_f_sq));
    let h_ul_hat = link.uplink(&c) + CVector::from_fn(n, |_, _| complex_gaussian(&mut rng, err.sigma_ul_sq));
    let h_dl_hat = h_ul_hat.component_mul(&f_hat);
    Ok(norm_sq((h_dl_hat - link.downlink(&c)).as_slice()))
}

/// Empirical `(1/(N·trials)) Σ ‖ĥ_DL − h_DL‖²` over Rayleigh channels.
pub fn nmse_dl_monte_carlo(link: &SingleUeLink, err: &CsitErrorModel, trials: u64, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            reason: "must be at least 1",
        });
    }
    let mut total = 0.0;
    for t in 0..trials {
        total += dl_error_trial(link, err, seed, t)?;
    }
    Ok(total / (trials as f64 * link.n_ant() as f64))
}

/// `|aᴴb|² / (‖a‖²‖b‖²)`: one for identical beam directions, whatever the
/// complex scale.
pub fn beam_alignment(h_est: &CVector, h_true: &CVector) -> Result<f64> {
    if h_est.len() != h_true.len() {
        return Err(Error::DimensionMismatch {
            context: "beam length",
            expected: h_true.len(),
            actual: h_est.len(),
        });
    }
    let (a, b) = (norm_sq(h_est.as_slice()), norm_sq(h_true.as_slice()));
    if a == 0.0 || b == 0.0 {
        return Err(Error::InvalidInput("beam vector is zero"));
    }
    Ok(h_est.dotc(h_true).norm_sqr() / (a * b))
}

/// Draws a unit-variance Rayleigh uplink channel for `link`.
pub fn draw_rayleigh<R: Rng + ?Sized>(link: &SingleUeLink, rng: &mut R) -> CVector {
    CVector::from_fn(link.n_ant(), |_, _| complex_gaussian(rng, 1.0))
}

//! Propagation channels: the reciprocal intra-array channel of a linear array
//! and i.i.d. Rayleigh vectors for user links.

use rand::Rng;

use crate::array::{Arrangement, HybridArrayConfig};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};
use crate::rng::complex_gaussian;

/// Parameters of the near-field-plus-multipath intra-array channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntraArrayChannelParams {
    /// Near-field path magnitude between adjacent (half-wavelength) elements.
    pub mag_at_half_lambda_db: f64,
    /// Magnitude drop per additional half-wavelength of separation.
    pub decay_db_per_half_lambda: f64,
    /// Power of the circular Gaussian multipath term.
    pub multipath_variance: f64,
}

impl Default for IntraArrayChannelParams {
    fn default() -> Self {
        IntraArrayChannelParams {
            mag_at_half_lambda_db: -15.0,
            decay_db_per_half_lambda: 3.5,
            multipath_variance: 0.001,
        }
    }
}

impl IntraArrayChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.multipath_variance.is_finite() && self.multipath_variance >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "multipath_variance",
                reason: "must be a finite non-negative number",
            });
        }
        if !(self.decay_db_per_half_lambda.is_finite() && self.decay_db_per_half_lambda >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "decay_db_per_half_lambda",
                reason: "must be a finite non-negative number",
            });
        }
        if !self.mag_at_half_lambda_db.is_finite() {
            return Err(Error::InvalidParameter {
                name: "mag_at_half_lambda_db",
                reason: "must be finite",
            });
        }
        Ok(())
    }

    /// `|c̄|` at a separation of `distance` half-wavelengths (linear in dB).
    pub fn near_field_magnitude(&self, distance: f64) -> f64 {
        let db = self.mag_at_half_lambda_db - self.decay_db_per_half_lambda * (distance - 1.0);
        libm::pow(10.0, db / 20.0)
    }
}

/// Complex channel matrix, rows = receive antennas, columns = transmit antennas.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    entries: CMatrix,
    reciprocal: bool,
}

impl ChannelMatrix {
    /// General (not necessarily reciprocal) channel.
    pub fn new(entries: CMatrix) -> Self {
        ChannelMatrix {
            entries,
            reciprocal: false,
        }
    }

    /// Reciprocal channel; the matrix must equal its transpose exactly.
    pub fn reciprocal(entries: CMatrix) -> Result<Self> {
        if !entries.is_square() || entries != entries.transpose() {
            return Err(Error::ContractViolation("reciprocal channel must be symmetric"));
        }
        Ok(ChannelMatrix {
            entries,
            reciprocal: true,
        })
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn is_reciprocal(&self) -> bool {
        self.reciprocal
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }
}

/// Draws `c_ij = |c̄_ij| exp(j2πφ_ij) + c̃_ij` for every pair `i < j`, with
/// `φ ~ U[0, 1)` and `c̃ ~ CN(0, σ²)`, and mirrors it to `c_ji`. The diagonal
/// is zero: an element never transmits to itself.
pub fn intra_array_channel<R: Rng + ?Sized>(
    config: &HybridArrayConfig,
    params: &IntraArrayChannelParams,
    rng: &mut R,
) -> Result<ChannelMatrix> {
    config.validate()?;
    params.validate()?;
    match config.arrangement {
        Arrangement::Linear => {}
    }
    let n = config.n_ant;
    let mut c = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let distance = (j - i) as f64 * config.element_spacing;
            let mag = params.near_field_magnitude(distance);
            let cycles: f64 = rng.random_range(0.0..1.0);
            let near = C64::from_polar(mag, 2.0 * core::f64::consts::PI * cycles);
            let value = near + complex_gaussian(rng, params.multipath_variance);
            c[(i, j)] = value;
            c[(j, i)] = value;
        }
    }
    Ok(ChannelMatrix {
        entries: c,
        reciprocal: true,
    })
}

/// `n` i.i.d. `CN(0, 1)` entries.
pub fn rayleigh_channel<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<CVector> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "must be positive",
        });
    }
    Ok(CVector::from_fn(n, |_, _| complex_gaussian(rng, 1.0)))
}

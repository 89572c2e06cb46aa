//! Dense complex matrix helpers shared by the estimators.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SVD};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            for p in 0..br {
                for q in 0..bc {
                    out[(i * br + p, j * bc + q)] = s * b[(p, q)];
                }
            }
        }
    }
    out
}

pub fn diag(entries: &[C64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_column_slice(entries))
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Column-major vectorization, `vec(A)`.
pub fn vec_of(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &CVector, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_column_slice(rows, cols, v.as_slice())
}

pub fn norm_sq(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Moore-Penrose pseudo-inverse obtained from an SVD, with its numerical rank.
#[derive(Debug, Clone)]
pub struct PseudoInverse {
    pub pinv: CMatrix,
    pub rank: usize,
}

/// Rank tolerance `max(m, n) * eps * sigma_max`.
pub fn rank_tolerance(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

pub fn pseudo_inverse(m: &CMatrix) -> PseudoInverse {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return PseudoInverse {
            pinv: CMatrix::zeros(cols, rows),
            rank: 0,
        };
    }
    let svd = SVD::new(m.clone(), true, true);
    let sigma_max = svd.singular_values.max();
    let tol = rank_tolerance(rows, cols, sigma_max);
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let pinv = if sigma_max == 0.0 {
        CMatrix::zeros(cols, rows)
    } else {
        // `tol` is strictly positive here; pseudo_inverse only fails for eps < 0.
        svd.pseudo_inverse(tol).expect("non-negative tolerance")
    };
    PseudoInverse { pinv, rank }
}

pub fn numerical_rank(m: &CMatrix) -> usize {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let tol = rank_tolerance(rows, cols, sv.max());
    sv.iter().filter(|&&s| s > tol).count()
}

/// Relative Hermitian defect `‖M − Mᴴ‖_F / ‖M‖_F` (zero for the zero matrix).
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let scale = libm::sqrt(frobenius_sq(m));
    if scale == 0.0 {
        return 0.0;
    }
    libm::sqrt(frobenius_sq(&(m - m.adjoint()))) / scale
}

pub fn to_vec(v: &CVector) -> Vec<C64> {
    v.iter().copied().collect()
}

//! Dense linear-algebra kernels: symmetric/Hermitian eigendecomposition,
//! positive-definite log-determinants and square roots, and the complex
//! soft-thresholding operator.
//!
//! All matrices in the estimation pipeline are small and dense (dimension up
//! to a few hundred); the eigensolvers wrap `nalgebra`'s dense symmetric
//! routine, with eigenvalues returned in ascending order.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fmath;

/// Dense real matrix used throughout the crate.
pub type Mat = DMatrix<f64>;
/// Dense complex matrix used throughout the crate.
pub type CMat = DMatrix<Complex64>;

/// Relative eigenvalue tolerance below which a matrix is declared not PD.
pub const PD_TOLERANCE: f64 = 1e-12;

/// Real symmetric matrix with exact entry-wise symmetry enforced at
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSymMatrix(Mat);

impl RealSymMatrix {
    /// Symmetrizes `m` exactly: both `(i, j)` and `(j, i)` receive the
    /// averaged value.
    pub fn new(mut m: Mat) -> Result<Self> {
        let d = square_dim(&m, "RealSymMatrix")?;
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: "RealSymMatrix",
            });
        }
        for i in 0..d {
            for j in (i + 1)..d {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(Self(m))
    }

    pub fn identity(dim: usize) -> Self {
        Self(Mat::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Mat {
        &self.0
    }

    pub fn into_matrix(self) -> Mat {
        self.0
    }
}

/// Complex Hermitian matrix with exact conjugate symmetry enforced at
/// construction (real diagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct HermMatrix(CMat);

impl HermMatrix {
    pub fn new(mut m: CMat) -> Result<Self> {
        let d = square_dim_c(&m, "HermMatrix")?;
        if m.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::NonFinite {
                context: "HermMatrix",
            });
        }
        for i in 0..d {
            m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
            for j in (i + 1)..d {
                let v = 0.5 * (m[(i, j)] + m[(j, i)].conj());
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
            }
        }
        Ok(Self(m))
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMat::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }
}

/// Eigendecomposition of a real symmetric matrix, eigenvalues ascending,
/// eigenvectors orthonormal in the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: Mat,
}

/// Eigendecomposition of a complex Hermitian matrix: real ascending
/// eigenvalues, unitary `vectors`.
#[derive(Debug, Clone)]
pub struct HermEigen {
    pub values: DVector<f64>,
    pub vectors: CMat,
}

fn square_dim(m: &Mat, context: &'static str) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::InvalidArgument {
            context,
            message: format!("expected square nonempty matrix, got {}x{}", m.nrows(), m.ncols()),
        });
    }
    Ok(m.nrows())
}

fn square_dim_c(m: &CMat, context: &'static str) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::InvalidArgument {
            context,
            message: format!("expected square nonempty matrix, got {}x{}", m.nrows(), m.ncols()),
        });
    }
    Ok(m.nrows())
}

/// Eigendecomposition of a real symmetric matrix, eigenvalues sorted
/// ascending. The input is symmetrized before factorization.
pub fn sym_eig(a: &Mat) -> Result<SymEigen> {
    let d = square_dim(a, "sym_eig")?;
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { context: "sym_eig" });
    }
    let sym = RealSymMatrix::new(a.clone())?;
    let se = sym.into_matrix().symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let values = DVector::from_iterator(d, order.iter().map(|&i| se.eigenvalues[i]));
    let mut vectors = Mat::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &se.eigenvectors.column(src));
    }
    Ok(SymEigen { values, vectors })
}

/// Eigendecomposition of a complex Hermitian matrix, eigenvalues sorted
/// ascending. The input is Hermitianized before factorization.
pub fn herm_eig(a: &CMat) -> Result<HermEigen> {
    let d = square_dim_c(a, "herm_eig")?;
    if a.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(Error::NonFinite { context: "herm_eig" });
    }
    let herm = HermMatrix::new(a.clone())?;
    let se = herm.into_matrix().symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let values = DVector::from_iterator(d, order.iter().map(|&i| se.eigenvalues[i]));
    let mut vectors = CMat::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &se.eigenvectors.column(src));
    }
    Ok(HermEigen { values, vectors })
}

fn check_pd(values: &DVector<f64>, context: &'static str) -> Result<()> {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let tolerance = PD_TOLERANCE * max.max(0.0);
    if !(max > 0.0) || min <= tolerance {
        return Err(Error::NotPositiveDefinite {
            context,
            min_eigenvalue: min,
            tolerance,
        });
    }
    Ok(())
}

/// `ln det A` for real symmetric positive-definite `A`, as the sum of the
/// logs of the eigenvalues.
pub fn log_det_pd_sym(a: &RealSymMatrix) -> Result<f64> {
    let eig = sym_eig(a.as_matrix())?;
    check_pd(&eig.values, "log_det_pd_sym")?;
    Ok(eig.values.iter().map(|&v| fmath::ln(v)).sum())
}

/// `ln det A` for Hermitian positive-definite `A`; the result is real.
pub fn log_det_pd_herm(a: &HermMatrix) -> Result<f64> {
    let eig = herm_eig(a.as_matrix())?;
    check_pd(&eig.values, "log_det_pd_herm")?;
    Ok(eig.values.iter().map(|&v| fmath::ln(v)).sum())
}

/// Complex soft-thresholding scalar operator: shrinks `b` radially by `beta`,
/// mapping to zero when `|b| <= beta`.
pub fn soft_threshold(b: Complex64, beta: f64) -> Complex64 {
    debug_assert!(beta >= 0.0);
    let mag = b.norm();
    if mag <= beta {
        Complex64::new(0.0, 0.0)
    } else {
        b * ((mag - beta) / mag)
    }
}

/// Real soft-thresholding scalar operator.
pub fn soft_threshold_real(b: f64, beta: f64) -> f64 {
    debug_assert!(beta >= 0.0);
    if fmath::abs(b) <= beta {
        0.0
    } else if b > 0.0 {
        b - beta
    } else {
        b + beta
    }
}

/// Symmetric square root of a positive-definite matrix, along with its
/// inverse.
#[derive(Debug, Clone)]
pub struct PdSqrt {
    /// `root * root = A`.
    pub root: Mat,
    /// `inv_root = root^-1`.
    pub inv_root: Mat,
}

/// Symmetric square root of a real symmetric positive-definite matrix.
pub fn sqrt_pd(a: &RealSymMatrix) -> Result<PdSqrt> {
    let eig = sym_eig(a.as_matrix())?;
    check_pd(&eig.values, "sqrt_pd")?;
    let d = a.dim();
    let mut root = Mat::zeros(d, d);
    let mut inv_root = Mat::zeros(d, d);
    for k in 0..d {
        let s = fmath::sqrt(eig.values[k]);
        let v = eig.vectors.column(k);
        // rank-one accumulation of V sqrt(L) V^T and V sqrt(L)^-1 V^T
        for i in 0..d {
            for j in 0..d {
                root[(i, j)] += s * v[i] * v[j];
                inv_root[(i, j)] += v[i] * v[j] / s;
            }
        }
    }
    Ok(PdSqrt { root, inv_root })
}

/// Inverse of a real symmetric positive-definite matrix via its
/// eigendecomposition.
pub fn inv_pd_sym(a: &RealSymMatrix) -> Result<Mat> {
    let eig = sym_eig(a.as_matrix())?;
    check_pd(&eig.values, "inv_pd_sym")?;
    let d = a.dim();
    let mut out = Mat::zeros(d, d);
    for k in 0..d {
        let v = eig.vectors.column(k);
        let w = 1.0 / eig.values[k];
        for i in 0..d {
            for j in 0..d {
                out[(i, j)] += w * v[i] * v[j];
            }
        }
    }
    Ok(out)
}

/// Inverse of a Hermitian positive-definite matrix via its eigendecomposition.
pub fn inv_pd_herm(a: &HermMatrix) -> Result<CMat> {
    let eig = herm_eig(a.as_matrix())?;
    check_pd(&eig.values, "inv_pd_herm")?;
    let d = a.dim();
    let mut out = CMat::zeros(d, d);
    for k in 0..d {
        let v = eig.vectors.column(k);
        let w = 1.0 / eig.values[k];
        for i in 0..d {
            for j in 0..d {
                out[(i, j)] += v[i] * v[j].conj() * w;
            }
        }
    }
    Ok(out)
}

/// `Re tr(A B)` without forming the product.
pub fn re_trace_product(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let x = a[(i, j)];
            let y = b[(j, i)];
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

/// `tr(A B)` for real matrices without forming the product.
pub fn trace_product(a: &Mat, b: &Mat) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

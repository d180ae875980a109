//! Dense symmetric-matrix primitives.
//!
//! Everything here works on `nalgebra::DMatrix<f64>`. Eigenvalues come from
//! nalgebra's symmetric QR iteration; this module adds rank truncation,
//! deterministic ordering and a sign convention on top.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::Matrix;

/// Structure of the true scale matrix Σ.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaKind {
    Identity,
    /// Autoregressive structure with entries `rho^|i-j|`.
    Ar1 {
        rho: f64,
    },
    /// User supplied symmetric positive-definite matrix.
    Dense(Matrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSpec {
    pub kind: SigmaKind,
    pub p: usize,
}

impl SigmaSpec {
    pub fn identity(p: usize) -> Self {
        SigmaSpec {
            kind: SigmaKind::Identity,
            p,
        }
    }

    pub fn ar1(rho: f64, p: usize) -> Self {
        SigmaSpec {
            kind: SigmaKind::Ar1 { rho },
            p,
        }
    }

    pub fn build(&self) -> Result<Matrix> {
        sigma_build(self)
    }
}

/// Builds Σ for the given structure.
pub fn sigma_build(spec: &SigmaSpec) -> Result<Matrix> {
    let p = spec.p;
    if p == 0 {
        return Err(Error::invalid("p", "dimension must be at least 1"));
    }
    match &spec.kind {
        SigmaKind::Identity => Ok(DMatrix::identity(p, p)),
        SigmaKind::Ar1 { rho } => {
            let rho = *rho;
            if !(rho.abs() < 1.0) {
                return Err(Error::invalid(
                    "rho",
                    format!("|rho| must be < 1, got {rho}"),
                ));
            }
            Ok(DMatrix::from_fn(p, p, |i, j| {
                rho.powi(i.abs_diff(j) as i32)
            }))
        }
        SigmaKind::Dense(m) => {
            if m.nrows() != p || m.ncols() != p {
                return Err(Error::DimensionMismatch {
                    expected: format!("{p}x{p}"),
                    found: format!("{}x{}", m.nrows(), m.ncols()),
                });
            }
            check_symmetric(m, 1e-12)?;
            let min = m.clone().symmetric_eigenvalues().min();
            if min <= 0.0 {
                return Err(Error::NotPsd { eigenvalue: min });
            }
            Ok(m.clone())
        }
    }
}

/// Largest `|a_ij - a_ji|`, relative to `max(1, max |a_ij|)`.
pub fn relative_asymmetry(a: &Matrix) -> f64 {
    let scale = a.amax().max(1.0);
    let n = a.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst / scale
}

fn check_symmetric(a: &Matrix, tol: f64) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    let asym = relative_asymmetry(a);
    if asym > tol {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

/// `(A + Aᵀ)/2`, bit-symmetric.
pub fn symmetrize(a: &Matrix) -> Matrix {
    let n = a.nrows();
    let mut out = a.clone();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Symmetric PSD square root through the spectral decomposition.
///
/// Eigenvalues in `[-1e-8·scale, 0)` are clipped to zero; anything more
/// negative is reported as a non-PSD input.
pub fn sym_sqrt(a: &Matrix) -> Result<Matrix> {
    check_symmetric(a, 1e-12)?;
    let eig = symmetrize(a).symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    let mut roots = DVector::zeros(eig.eigenvalues.len());
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < -1e-8 * scale {
            return Err(Error::NotPsd { eigenvalue: lam });
        }
        roots[k] = lam.max(0.0).sqrt();
    }
    let v = &eig.eigenvectors;
    Ok(symmetrize(
        &(v * DMatrix::from_diagonal(&roots) * v.transpose()),
    ))
}

/// Truncated spectral decomposition `S = H·diag(L)·Hᵀ` keeping only the
/// numerically positive part of the spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    /// `p × r`, semi-orthogonal.
    pub vectors: Matrix,
    /// Length `r`, descending, strictly positive.
    pub values: DVector<f64>,
}

impl EigenSystem {
    pub fn rank(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn values_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    /// `H·diag(d)·Hᵀ` for an arbitrary diagonal of length `r`.
    pub fn compose(&self, diag: &[f64]) -> Matrix {
        assert_eq!(diag.len(), self.rank(), "diagonal length must equal rank");
        let mut scaled = self.vectors.clone();
        for (k, &d) in diag.iter().enumerate() {
            scaled.column_mut(k).scale_mut(d);
        }
        symmetrize(&(scaled * self.vectors.transpose()))
    }

    pub fn reconstruct(&self) -> Matrix {
        self.compose(self.values.as_slice())
    }

    /// Moore–Penrose inverse `H·diag(1/L)·Hᵀ`.
    pub fn pinv(&self) -> Matrix {
        let inv: Vec<f64> = self.values.iter().map(|l| 1.0 / l).collect();
        self.compose(&inv)
    }
}

/// Default relative cutoff for the numerical rank: `p · ε`.
pub fn default_rank_tol(p: usize) -> f64 {
    p as f64 * f64::EPSILON
}

/// Eigendecomposition of a symmetric PSD matrix, truncated to eigenvalues
/// above `rank_tol · λ_max`, in decreasing order.
pub fn eigen_sym_truncated(s: &Matrix, rank_tol: f64) -> Result<EigenSystem> {
    check_symmetric(s, 1e-10)?;
    let p = s.nrows();
    let eig = symmetrize(s).symmetric_eigen();
    let max = eig.eigenvalues.max();
    if !(max > 0.0) {
        return Err(Error::ZeroRank);
    }
    let cutoff = rank_tol * max;
    let mut order: Vec<usize> = (0..p).filter(|&k| eig.eigenvalues[k] > cutoff).collect();
    // stable: ties keep the solver's index order
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    if order.is_empty() {
        return Err(Error::ZeroRank);
    }

    let r = order.len();
    let mut vectors = DMatrix::zeros(p, r);
    let mut values = DVector::zeros(r);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let mut col = eig.eigenvectors.column(src).clone_owned();
        let thresh = col.amax() * f64::EPSILON;
        if let Some(first) = col.iter().find(|x| x.abs() > thresh) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
        vectors.set_column(dst, &col);
    }
    Ok(EigenSystem { vectors, values })
}

/// [`eigen_sym_truncated`] with the default rank tolerance.
pub fn eigen_sym(s: &Matrix) -> Result<EigenSystem> {
    eigen_sym_truncated(s, default_rank_tol(s.nrows()))
}

pub fn pinv_from_eigen(es: &EigenSystem) -> Matrix {
    es.pinv()
}

/// `UᵀU`, symmetrized.
pub fn gram(u: &Matrix) -> Matrix {
    symmetrize(&u.tr_mul(u))
}

/// `‖A − B‖_F / ‖B‖_F` (absolute error when `B = 0`).
pub fn rel_frobenius(a: &Matrix, b: &Matrix) -> f64 {
    let diff = (a - b).norm();
    let base = b.norm();
    if base > 0.0 {
        diff / base
    } else {
        diff
    }
}

/// `tr(A·B)` without forming the product.
pub fn trace_product(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

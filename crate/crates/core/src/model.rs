//! Elliptical sampling model and the canonical form of `Y = Xβ + E`.
//!
//! The Student-t model is the variance mixture `E = √V · G · Σ^{1/2}` with
//! `G` a matrix of iid standard normals and `1/V ~ Gamma(k/2, rate k/2)`.
//! One mixing value is drawn per noise *matrix*: the density depends on the
//! noise only through `tr(E Σ⁻¹ Eᵀ)`, so drawing per row would give a
//! different model.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::gram;
use crate::Matrix;

/// Degrees of freedom of the t-model, always `> 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreesOfFreedom(f64);

impl DegreesOfFreedom {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 2.0) || !k.is_finite() {
            return Err(Error::invalid(
                "df",
                format!("degrees of freedom must be finite and > 2, got {k}"),
            ));
        }
        Ok(DegreesOfFreedom(k))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSpec {
    Gaussian,
    StudentT(DegreesOfFreedom),
}

impl ModelSpec {
    pub fn student_t(k: f64) -> Result<Self> {
        Ok(ModelSpec::StudentT(DegreesOfFreedom::new(k)?))
    }

    /// Normalising constant of the companion density: `E[V]`.
    pub fn k_star(&self) -> f64 {
        match self {
            ModelSpec::Gaussian => 1.0,
            ModelSpec::StudentT(k) => {
                let k = k.get();
                k / (k - 2.0)
            }
        }
    }

    /// Draws the variance-mixing value `V` (exactly 1 for the Gaussian model).
    pub fn sample_mixing<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ModelSpec::Gaussian => 1.0,
            ModelSpec::StudentT(k) => {
                let half = 0.5 * k.get();
                // Gamma(shape k/2, scale 2/k), i.e. rate k/2
                let g: f64 = Gamma::new(half, 1.0 / half)
                    .expect("shape and scale are positive")
                    .sample(rng);
                1.0 / g
            }
        }
    }

    /// `rows × p` noise matrix `√V · G · sqrt_sigma` with a single mixing draw.
    pub fn sample_noise<R: Rng + ?Sized>(
        &self,
        rows: usize,
        sqrt_sigma: &Matrix,
        rng: &mut R,
    ) -> Matrix {
        let p = sqrt_sigma.nrows();
        let scale = self.sample_mixing(rng).sqrt();
        let mut data = Vec::with_capacity(rows * p);
        for _ in 0..rows * p {
            let z: f64 = StandardNormal.sample(rng);
            data.push(z);
        }
        let g = DMatrix::from_row_slice(rows, p, &data);
        let mut e = g * sqrt_sigma;
        if scale != 1.0 {
            e *= scale;
        }
        e
    }

    /// Draws the residual block `U` directly (no regression design) and
    /// returns it with `S = UᵀU`.
    pub fn sample_canonical<R: Rng + ?Sized>(
        &self,
        m: usize,
        sqrt_sigma: &Matrix,
        rng: &mut R,
    ) -> CanonicalSample {
        let p = sqrt_sigma.nrows();
        let u = self.sample_noise(m, sqrt_sigma, rng);
        let s = gram(&u);
        CanonicalSample {
            u,
            s,
            z: None,
            theta: None,
            dims: Dims { p, m, q: 0 },
        }
    }
}

pub fn k_star(model: &ModelSpec) -> f64 {
    model.k_star()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub p: usize,
    pub m: usize,
    pub q: usize,
}

/// One draw in canonical coordinates: `Z` (`q × p`), `U` (`m × p`), `S = UᵀU`.
#[derive(Debug, Clone)]
pub struct CanonicalSample {
    pub u: Matrix,
    pub s: Matrix,
    pub z: Option<Matrix>,
    pub theta: Option<Matrix>,
    pub dims: Dims,
}

struct Reduction {
    sample: CanonicalSample,
    q1: Matrix,
}

fn reduce(y: &Matrix, x: &Matrix) -> Result<Reduction> {
    let (n, p) = y.shape();
    let (nx, q) = x.shape();
    if nx != n {
        return Err(Error::DimensionMismatch {
            expected: format!("X with {n} rows"),
            found: format!("{nx} rows"),
        });
    }
    if q == 0 || q > n {
        return Err(Error::invalid(
            "X",
            format!("need 1 <= q <= n, got q={q}, n={n}"),
        ));
    }

    // Householder QR of [X | I_n]: the first q columns of Q span col(X) and
    // the remaining n - q complete it to an orthogonal basis.
    let mut aug = DMatrix::zeros(n, q + n);
    aug.view_mut((0, 0), (n, q)).copy_from(x);
    aug.view_mut((0, q), (n, n)).fill_with_identity();
    let qr = aug.qr();
    let r = qr.r();
    let scale = x.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    for k in 0..q {
        let d = r[(k, k)].abs();
        if !(d > 1e-10 * scale) {
            return Err(Error::RankDeficient { column: k, diag: d });
        }
    }
    let qm = qr.q();
    let q1 = qm.columns(0, q).into_owned();
    let q2 = qm.columns(q, n - q).into_owned();
    let z = q1.tr_mul(y);
    let u = q2.tr_mul(y);
    let s = gram(&u);
    Ok(Reduction {
        sample: CanonicalSample {
            u,
            s,
            z: Some(z),
            theta: None,
            dims: Dims { p, m: n - q, q },
        },
        q1,
    })
}

/// Rotates `Y` by the orthogonal completion of the QR factor of `X`.
pub fn canonical_reduce(y: &Matrix, x: &Matrix) -> Result<CanonicalSample> {
    reduce(y, x).map(|r| r.sample)
}

/// Samples `Y = Xβ + E` and reduces it; `theta = Q₁ᵀXβ` is filled in.
pub fn sample_regression<R: Rng + ?Sized>(
    model: &ModelSpec,
    x: &Matrix,
    beta: &Matrix,
    sqrt_sigma: &Matrix,
    rng: &mut R,
) -> Result<CanonicalSample> {
    if beta.nrows() != x.ncols() || beta.ncols() != sqrt_sigma.nrows() {
        return Err(Error::DimensionMismatch {
            expected: format!("beta {}x{}", x.ncols(), sqrt_sigma.nrows()),
            found: format!("{}x{}", beta.nrows(), beta.ncols()),
        });
    }
    let mean = x * beta;
    let y = &mean + model.sample_noise(x.nrows(), sqrt_sigma, rng);
    let red = reduce(&y, x)?;
    let mut sample = red.sample;
    sample.theta = Some(red.q1.tr_mul(&mean));
    Ok(sample)
}

/// Orthonormalised `n × q` standard-normal design (thin QR).
pub fn default_design<R: Rng + ?Sized>(n: usize, q: usize, rng: &mut R) -> Matrix {
    let mut data = Vec::with_capacity(n * q);
    for _ in 0..n * q {
        let z: f64 = StandardNormal.sample(rng);
        data.push(z);
    }
    DMatrix::from_row_slice(n, q, &data).qr().q()
}

/// Private generator for one replication.
///
/// The ChaCha key is expanded from `base_seed` and the 64-bit stream id is
/// the replication index, so `(base_seed, rep)` addresses a distinct
/// 128-bit generator state independent of scheduling.
pub fn replication_rng(base_seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(rep);
    rng
}

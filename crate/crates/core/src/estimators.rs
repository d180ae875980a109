//! Usual and orthogonally invariant estimators of Σ.
//!
//! An orthogonally invariant estimator keeps the eigenvectors of `S` and
//! inflates each positive eigenvalue:
//!
//! ```text
//! Σ̂_Ψ = a₀ · H · diag(l_i (1 + ψ_i(L))) · Hᵀ
//! ```
//!
//! The ψ-families are the Haff-type weights `b·l_i^{-α}/Σ_j l_j^{-α}`, the
//! James–Stein constants `1/(v + r − 2i + 1)` and the Efron–Morris–Dey weights
//! `1/((1 + b·l_i^α/Σ_j l_j^α)·v)`.

use crate::error::{Error, Result};
use crate::matrix::EigenSystem;
use crate::model::{CanonicalSample, ModelSpec};
use crate::Matrix;

/// A diagonal matrix function `L ↦ diag(φ_1(L), …, φ_r(L))` of a descending
/// positive spectrum, with its partial derivatives `∂φ_i/∂l_i`.
pub trait SpectralWeight {
    /// `φ_i(L)` for `i = 1..r`, where `r = l.len()` and `v = max(p, m)`.
    fn weights(&self, l: &[f64], v: usize) -> Result<Vec<f64>>;

    /// Analytic `∂φ_i/∂l_i` (`i` is zero based).
    fn derivative(&self, l: &[f64], v: usize, i: usize) -> Result<f64>;

    /// Central finite difference of `φ_i` in `l_i`, step `max(1e-6, 1e-6·l_i)`.
    fn derivative_fd(&self, l: &[f64], v: usize, i: usize) -> Result<f64> {
        let h = (1e-6 * l[i]).max(1e-6);
        let mut up = l.to_vec();
        let mut down = l.to_vec();
        up[i] += h;
        down[i] -= h;
        let fu = self.weights(&up, v)?[i];
        let fd = self.weights(&down, v)?[i];
        Ok((fu - fd) / (2.0 * h))
    }
}

pub(crate) fn check_spectrum(l: &[f64]) -> Result<()> {
    for (index, &value) in l.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::NonPositiveEigenvalue { index, value });
        }
    }
    Ok(())
}

/// The ψ-families of the shrinkage correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShrinkagePsi {
    /// `ψ_i = b · l_i^{-α} / tr(L^{-α})`; improvement is certified for `α ≥ 1`, `0 < b ≤ b₀`.
    Haff {
        alpha: f64,
        b: f64,
    },
    JamesStein,
    EfronMorrisDey {
        alpha: f64,
        b: f64,
    },
    Zero,
}

impl ShrinkagePsi {
    pub fn haff(alpha: f64, b: f64) -> Result<Self> {
        check_alpha_b(alpha, b)?;
        Ok(ShrinkagePsi::Haff { alpha, b })
    }

    pub fn efron_morris_dey(alpha: f64, b: f64) -> Result<Self> {
        check_alpha_b(alpha, b)?;
        Ok(ShrinkagePsi::EfronMorrisDey { alpha, b })
    }

    /// Whether the Haff improvement condition holds (`α ≥ 1`, `0 < b ≤ b₀(v, r)`).
    pub fn is_certified(&self, v: usize, r: usize) -> bool {
        match *self {
            ShrinkagePsi::Haff { alpha, b } => alpha >= 1.0 && b > 0.0 && b <= b0_bound(v, r),
            _ => false,
        }
    }

    pub fn psi_eval(&self, l: &[f64], v: usize) -> Result<Vec<f64>> {
        check_spectrum(l)?;
        let r = l.len();
        Ok(match *self {
            ShrinkagePsi::Haff { alpha, b } => normalized_powers(l, -alpha)
                .into_iter()
                .map(|w| b * w)
                .collect(),
            ShrinkagePsi::JamesStein => (1..=r)
                .map(|i| 1.0 / (v as f64 + r as f64 - 2.0 * i as f64 + 1.0))
                .collect(),
            ShrinkagePsi::EfronMorrisDey { alpha, b } => normalized_powers(l, alpha)
                .into_iter()
                .map(|u| 1.0 / ((1.0 + b * u) * v as f64))
                .collect(),
            ShrinkagePsi::Zero => vec![0.0; r],
        })
    }

    pub fn psi_derivative(&self, l: &[f64], v: usize, i: usize) -> Result<f64> {
        check_spectrum(l)?;
        if i >= l.len() {
            return Err(Error::invalid(
                "i",
                format!("index {i} out of range for rank {}", l.len()),
            ));
        }
        Ok(match *self {
            ShrinkagePsi::Haff { alpha, b } => {
                let w = normalized_powers(l, -alpha)[i];
                b * alpha * w / l[i] * (w - 1.0)
            }
            ShrinkagePsi::JamesStein | ShrinkagePsi::Zero => 0.0,
            ShrinkagePsi::EfronMorrisDey { alpha, b } => {
                let u = normalized_powers(l, alpha)[i];
                let du = alpha * u * (1.0 - u) / l[i];
                let denom = 1.0 + b * u;
                -b * du / (v as f64 * denom * denom)
            }
        })
    }
}

impl SpectralWeight for ShrinkagePsi {
    fn weights(&self, l: &[f64], v: usize) -> Result<Vec<f64>> {
        self.psi_eval(l, v)
    }

    fn derivative(&self, l: &[f64], v: usize, i: usize) -> Result<f64> {
        self.psi_derivative(l, v, i)
    }
}

/// `φ_i ≡ c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantWeight(pub f64);

impl SpectralWeight for ConstantWeight {
    fn weights(&self, l: &[f64], _v: usize) -> Result<Vec<f64>> {
        check_spectrum(l)?;
        Ok(vec![self.0; l.len()])
    }

    fn derivative(&self, l: &[f64], _v: usize, _i: usize) -> Result<f64> {
        check_spectrum(l)?;
        Ok(0.0)
    }
}

fn check_alpha_b(alpha: f64, b: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(
            "alpha",
            format!("must be finite and > 0, got {alpha}"),
        ));
    }
    if !(b >= 0.0) || !b.is_finite() {
        return Err(Error::invalid(
            "b",
            format!("must be finite and >= 0, got {b}"),
        ));
    }
    Ok(())
}

/// `l_i^e / Σ_j l_j^e`, computed relative to the extreme eigenvalue so large
/// exponents neither overflow nor underflow to zero in the dominant term.
fn normalized_powers(l: &[f64], e: f64) -> Vec<f64> {
    let pivot = if e < 0.0 {
        l.iter().copied().fold(f64::INFINITY, f64::min)
    } else {
        l.iter().copied().fold(0.0, f64::max)
    };
    let raw: Vec<f64> = l.iter().map(|&x| (x / pivot).powf(e)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorSpec {
    /// `a · S`.
    Usual { a: f64 },
    /// `a₀ · H · L · (I + Ψ(L)) · Hᵀ`; the scale is supplied by the caller.
    OrthInvariant { psi: ShrinkagePsi },
}

/// `a₀ = 1/(K*·max(p, m))`, the risk-optimal multiple of `S` under the data-based loss.
pub fn optimal_a(model: &ModelSpec, p: usize, m: usize) -> f64 {
    1.0 / (model.k_star() * p.max(m) as f64)
}

/// `1/(K*·(p + m + 1))`, the optimal multiple under the quadratic loss.
pub fn quadratic_loss_a(model: &ModelSpec, p: usize, m: usize) -> f64 {
    1.0 / (model.k_star() * (p + m + 1) as f64)
}

/// `2(r − 1)/(v − r + 1)`: largest Haff weight certified under the data-based loss.
pub fn b0_bound(v: usize, r: usize) -> f64 {
    debug_assert!(r >= 1 && v >= r);
    let (v, r) = (v as f64, r as f64);
    2.0 * (r - 1.0) / (v - r + 1.0)
}

/// `2(r − 1)(v + r + 1)/((v − r + 1)(v − r + 3))`: the quadratic-loss bound for `α = 1`.
pub fn b1_bound(v: usize, r: usize) -> f64 {
    debug_assert!(r >= 1 && v >= r);
    let (v, r) = (v as f64, r as f64);
    2.0 * (r - 1.0) * (v + r + 1.0) / ((v - r + 1.0) * (v - r + 3.0))
}

pub fn estimate(
    spec: &EstimatorSpec,
    sample: &CanonicalSample,
    es: &EigenSystem,
    a0: f64,
) -> Result<Matrix> {
    let v = sample.dims.p.max(sample.dims.m);
    estimate_with(spec, &sample.s, es, v, a0)
}

/// [`estimate`] on bare parts: `S`, its eigensystem and `v = max(p, m)`.
pub fn estimate_with(
    spec: &EstimatorSpec,
    s: &Matrix,
    es: &EigenSystem,
    v: usize,
    a0: f64,
) -> Result<Matrix> {
    match spec {
        EstimatorSpec::Usual { a } => {
            if !(*a > 0.0) {
                return Err(Error::invalid("a", format!("must be > 0, got {a}")));
            }
            Ok(s * *a)
        }
        EstimatorSpec::OrthInvariant { psi } => {
            if es.rank() == 0 {
                return Err(Error::ZeroRank);
            }
            if !(a0 > 0.0) {
                return Err(Error::invalid("a0", format!("must be > 0, got {a0}")));
            }
            let l = es.values_slice();
            let psi = psi.psi_eval(l, v)?;
            let diag: Vec<f64> = l
                .iter()
                .zip(&psi)
                .map(|(li, pi)| a0 * li * (1.0 + pi))
                .collect();
            Ok(es.compose(&diag))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn optimal_constants() {
        let t5 = ModelSpec::student_t(5.0).unwrap();
        assert_relative_eq!(
            optimal_a(&ModelSpec::Gaussian, 25, 10),
            0.04,
            max_relative = 1e-15
        );
        assert_relative_eq!(optimal_a(&t5, 50, 20), 0.012, max_relative = 1e-14);
        assert_relative_eq!(
            optimal_a(&ModelSpec::Gaussian, 10, 10),
            0.1,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            quadratic_loss_a(&ModelSpec::Gaussian, 20, 10),
            1.0 / 31.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            quadratic_loss_a(&ModelSpec::Gaussian, 1, 1),
            1.0 / 3.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(quadratic_loss_a(&t5, 2, 2), 0.12, max_relative = 1e-14);
    }

    #[test]
    fn bounds() {
        assert_eq!(b0_bound(25, 10), 1.125);
        assert_eq!(b0_bound(7, 1), 0.0);
        assert_relative_eq!(b0_bound(50, 20), 38.0 / 31.0, max_relative = 1e-15);
        assert_relative_eq!(b1_bound(25, 10), 2.25, max_relative = 1e-15);
        assert_eq!(b1_bound(7, 1), 0.0);
        assert_relative_eq!(b1_bound(20, 10), 558.0 / 143.0, max_relative = 1e-15);
    }

    #[test]
    fn haff_values() {
        let psi = ShrinkagePsi::haff(1.0, 1.0).unwrap();
        assert_eq!(psi.psi_eval(&[1.0, 1.0], 2).unwrap(), vec![0.5, 0.5]);
        let psi = ShrinkagePsi::haff(1.0, 1.25).unwrap();
        let w = psi.psi_eval(&[4.0, 1.0], 2).unwrap();
        assert_relative_eq!(w[0], 0.25, max_relative = 1e-14);
        assert_relative_eq!(w[1], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn james_stein_values() {
        let l: Vec<f64> = (0..10).map(|i| 10.0 - i as f64).collect();
        let w = ShrinkagePsi::JamesStein.psi_eval(&l, 25).unwrap();
        assert_relative_eq!(w[0], 1.0 / 34.0);
        assert_relative_eq!(w[9], 1.0 / 16.0);
        assert!(w.iter().sum::<f64>() > 1.0 / 34.0);
    }

    #[test]
    fn rejects_nonpositive_spectrum() {
        let psi = ShrinkagePsi::haff(1.0, 1.0).unwrap();
        assert!(matches!(
            psi.psi_eval(&[1.0, 0.0], 3),
            Err(Error::NonPositiveEigenvalue { index: 1, .. })
        ));
        assert!(psi.psi_derivative(&[-1.0], 3, 0).is_err());
        assert!(ShrinkagePsi::haff(0.0, 1.0).is_err());
        assert!(ShrinkagePsi::haff(1.0, -0.5).is_err());
    }

    #[test]
    fn haff_derivative_value() {
        let psi = ShrinkagePsi::haff(1.0, 1.0).unwrap();
        assert_relative_eq!(
            psi.psi_derivative(&[1.0, 1.0], 2, 0).unwrap(),
            -0.25,
            max_relative = 1e-14
        );
        assert_eq!(
            ShrinkagePsi::JamesStein
                .psi_derivative(&[3.0, 2.0, 1.0], 5, 1)
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let l = [7.3, 3.1, 1.7, 0.9, 0.25];
        for psi in [
            ShrinkagePsi::haff(1.0, 1.3).unwrap(),
            ShrinkagePsi::haff(3.5, 0.7).unwrap(),
            ShrinkagePsi::efron_morris_dey(1.0, 2.0).unwrap(),
            ShrinkagePsi::efron_morris_dey(2.5, 0.4).unwrap(),
            ShrinkagePsi::Zero,
        ] {
            for i in 0..l.len() {
                let a = psi.psi_derivative(&l, 12, i).unwrap();
                let f = psi.derivative_fd(&l, 12, i).unwrap();
                assert!(
                    (a - f).abs() <= 1e-5 * a.abs().max(1e-8),
                    "{psi:?} i={i}: {a} vs {f}"
                );
            }
        }
    }

    #[test]
    fn certified_region() {
        assert!(ShrinkagePsi::haff(1.0, 1.125).unwrap().is_certified(25, 10));
        assert!(!ShrinkagePsi::haff(1.0, 1.2).unwrap().is_certified(25, 10));
        assert!(!ShrinkagePsi::haff(0.5, 1.0).unwrap().is_certified(25, 10));
        assert!(!ShrinkagePsi::haff(2.0, 0.0).unwrap().is_certified(25, 10));
    }

    #[test]
    fn extreme_alpha_is_finite() {
        let psi = ShrinkagePsi::haff(10.0, 1.0).unwrap();
        let w = psi.psi_eval(&[1e6, 1.0, 1e-6], 5).unwrap();
        assert!(w.iter().all(|x| x.is_finite()));
        assert_relative_eq!(w.iter().sum::<f64>(), 1.0, max_relative = 1e-14);
    }
}

//! Numerical checks of the orthogonally invariant Stein–Haff identity and of
//! the `g(Ψ)` bound on the risk difference.
//!
//! For `G = H·L·Φ(L)·Hᵀ` the identity reads
//!
//! ```text
//! E[tr(Σ⁻¹ H L Φ Hᵀ)] = K* E*[ Σ_i (v−r+1)φ_i + 2 l_i ∂φ_i/∂l_i + Σ_{j≠i} (l_i φ_i − l_j φ_j)/(l_i − l_j) ]
//! ```
//!
//! In the Gaussian model `E = E*` and `K* = 1`, so both sides can be
//! estimated from the same draws.

use crate::error::{Error, Result};
use crate::estimators::{check_spectrum, ShrinkagePsi, SpectralWeight};
use crate::matrix::{trace_product, SigmaSpec};
use crate::model::ModelSpec;
use crate::risk::{mean_se, replicate_draws, Design};

/// Relative gap below which two eigenvalues count as tied: `1e-9 · l_1`.
pub const TIE_TOL: f64 = 1e-9;

/// Rejects spectra that are not strictly decreasing with gaps above `TIE_TOL · l_1`.
pub fn check_ties(l: &[f64]) -> Result<()> {
    check_spectrum(l)?;
    let Some(&top) = l.first() else {
        return Ok(());
    };
    let tol = TIE_TOL * top;
    for (i, w) in l.windows(2).enumerate() {
        let gap = w[0] - w[1];
        if !(gap > tol) {
            return Err(Error::NearTie { i, j: i + 1, gap });
        }
    }
    Ok(())
}

/// The bracketed sum on the right-hand side of the identity.
pub fn stein_haff_rhs_integrand<W: SpectralWeight + ?Sized>(
    l: &[f64],
    phi: &W,
    v: usize,
) -> Result<f64> {
    check_ties(l)?;
    let r = l.len();
    let phi_vals = phi.weights(l, v)?;
    let lead = v as f64 - r as f64 + 1.0;
    let mut total = 0.0;
    for i in 0..r {
        let mut term = lead * phi_vals[i] + 2.0 * l[i] * phi.derivative(l, v, i)?;
        for j in (0..r).filter(|&j| j != i) {
            term += (l[i] * phi_vals[i] - l[j] * phi_vals[j]) / (l[i] - l[j]);
        }
        total += term;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheckResult {
    pub lhs_mean: f64,
    pub lhs_se: f64,
    pub rhs_mean: f64,
    pub rhs_se: f64,
    /// From the paired differences `lhs_k − rhs_k`.
    pub z_score: f64,
    pub reps: usize,
    pub skipped: usize,
}

/// z-score of the mean paired difference `lhs_k − rhs_k`.
fn paired_z(lhs: &[f64], rhs: &[f64]) -> f64 {
    let d: Vec<f64> = lhs.iter().zip(rhs).map(|(a, b)| a - b).collect();
    let (diff, se) = mean_se(&d);
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    }
}

/// Paired Monte-Carlo check of the identity under the Gaussian model.
pub fn stein_haff_check<W: SpectralWeight + Sync + ?Sized>(
    sigma: &SigmaSpec,
    m: usize,
    phi: &W,
    reps: usize,
    seed: u64,
) -> Result<IdentityCheckResult> {
    if reps < 2 {
        return Err(Error::invalid("reps", "need at least 2 replications"));
    }
    let design = Design::new(ModelSpec::Gaussian, sigma, m)?;
    let v = design.v();
    let out = replicate_draws(&design, reps, seed, |draw| {
        let l = draw.eigen.values_slice();
        let rhs = stein_haff_rhs_integrand(l, phi, v)?;
        let weights = phi.weights(l, v)?;
        let diag: Vec<f64> = l.iter().zip(&weights).map(|(li, wi)| li * wi).collect();
        let g = draw.eigen.compose(&diag);
        let lhs = trace_product(&design.sigma.sigma_inv, &g);
        Ok((lhs, rhs))
    })?;
    let lhs: Vec<f64> = out.values.iter().map(|x| x.0).collect();
    let rhs: Vec<f64> = out.values.iter().map(|x| x.1).collect();
    let (lhs_mean, lhs_se) = mean_se(&lhs);
    let (rhs_mean, rhs_se) = mean_se(&rhs);
    Ok(IdentityCheckResult {
        lhs_mean,
        lhs_se,
        rhs_mean,
        rhs_se,
        z_score: paired_z(&lhs, &rhs),
        reps: out.values.len(),
        skipped: out.skipped,
    })
}

/// How the second numerator of the cross term is squared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CrossTerm {
    /// `l_j(2ψ_j + ψ_i²)`, the literal reading of the bound.
    #[default]
    Printed,
    /// `l_j(2ψ_j + ψ_j²)`, the form obtained from `Φ = 2Ψ + Ψ²`.
    Symmetrized,
}

/// Whether `−2vλ` is subtracted inside every summand or once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Penalty {
    #[default]
    PerTerm,
    Once,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GVariant {
    pub cross: CrossTerm,
    pub penalty: Penalty,
}

impl GVariant {
    /// Printed cross term, `−2vλ` inside the sum.
    pub const PRINTED: GVariant = GVariant {
        cross: CrossTerm::Printed,
        penalty: Penalty::PerTerm,
    };
    /// Symmetrized cross term, `−2vλ` once.
    pub const DERIVED: GVariant = GVariant {
        cross: CrossTerm::Symmetrized,
        penalty: Penalty::Once,
    };
}

/// Integrand `g(Ψ)` bounding the risk difference of `Σ̂_Ψ` over `a₀S`.
/// Improvement is guaranteed when it is non-positive for every spectrum.
pub fn g_psi<W: SpectralWeight + ?Sized>(
    l: &[f64],
    psi: &W,
    v: usize,
    lambda: f64,
    variant: GVariant,
) -> Result<f64> {
    check_ties(l)?;
    let r = l.len();
    let psi_vals = psi.weights(l, v)?;
    let lead = v as f64 - r as f64 + 1.0;
    let mut total = 0.0;
    for i in 0..r {
        let pi = psi_vals[i];
        let mut term =
            2.0 * lead * pi + lead * pi * pi + 4.0 * l[i] * (1.0 + pi) * psi.derivative(l, v, i)?;
        for j in (0..r).filter(|&j| j != i) {
            let pj = psi_vals[j];
            let sq = match variant.cross {
                CrossTerm::Printed => pi * pi,
                CrossTerm::Symmetrized => pj * pj,
            };
            term += (l[i] * (2.0 * pi + pi * pi) - l[j] * (2.0 * pj + sq)) / (l[i] - l[j]);
        }
        if variant.penalty == Penalty::PerTerm {
            term -= 2.0 * v as f64 * lambda;
        }
        total += term;
    }
    if variant.penalty == Penalty::Once {
        total -= 2.0 * v as f64 * lambda;
    }
    Ok(total)
}

/// Both cross-term readings of `g(Ψ)` (with `−2vλ` inside the sum).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GPsiComparison {
    pub printed: f64,
    pub symmetrized: f64,
}

pub fn g_psi_compare<W: SpectralWeight + ?Sized>(
    l: &[f64],
    psi: &W,
    v: usize,
    lambda: f64,
) -> Result<GPsiComparison> {
    let printed = g_psi(l, psi, v, lambda, GVariant::PRINTED)?;
    let symmetrized = g_psi(
        l,
        psi,
        v,
        lambda,
        GVariant {
            cross: CrossTerm::Symmetrized,
            penalty: Penalty::PerTerm,
        },
    )?;
    if (printed - symmetrized).abs() > 1e-9 {
        log::debug!(
            "g(Ψ) cross-term readings differ: printed {printed:e}, symmetrized {symmetrized:e}"
        );
    }
    Ok(GPsiComparison {
        printed,
        symmetrized,
    })
}

/// Fixed lower bound `λ ≤ tr(Ψ(L))` of each family.
pub fn trace_lower_bound(psi: &ShrinkagePsi, v: usize, r: usize) -> f64 {
    match *psi {
        ShrinkagePsi::Haff { b, .. } => b,
        ShrinkagePsi::JamesStein => 1.0 / (v + r - 1) as f64,
        ShrinkagePsi::EfronMorrisDey { b, .. } => r as f64 / ((b + 1.0) * v as f64),
        ShrinkagePsi::Zero => 0.0,
    }
}

/// Spectrum-free bound `−2(r−1)b + (v−r+1)b²` on `g` for the Haff family.
pub fn haff_improvement_margin(v: usize, r: usize, b: f64) -> f64 {
    let (v, r) = (v as f64, r as f64);
    b * ((v - r + 1.0) * b - 2.0 * (r - 1.0))
}

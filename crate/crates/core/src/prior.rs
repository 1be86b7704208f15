//! Independent closed forms of the rate function in two special cases,
//! used to cross-check [`DeformedModel::rate`](crate::rate::DeformedModel::rate).
//!
//! * Rank-one perturbation of a GOE of variance `½` (`ν = δ₀`, `t = ½`): the
//!   piecewise formula with branches `M_Λ` (separated outlier) and `N_Λ`.
//! * No outlier (`Λ = ℓ_ν`, `t = 1`): the supremum over `θ ≥ 0` of a
//!   spherical-integral functional built from R-transforms.

use crate::error::{Error, Result};
use crate::free_conv::FreeConvContext;
use crate::measure::AtomicMeasure;
use crate::numerics::{bisect, golden_max, integrate};
use crate::rate::ExtendedReal;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// `∫_a^b √(z²−2) dz` for `a, b ≤ −√2`, from the antiderivative
/// `F(u) = u√(u²−2)/2 − log(u + √(u²−2))` in `u = −z`.
fn sqrt_integral(a: f64, b: f64) -> f64 {
    let f = |u: f64| {
        let r = (u * u - 2.0).max(0.0).sqrt();
        0.5 * u * r - (u + r).ln()
    };
    f(-a) - f(-b)
}

/// Rate of the smallest eigenvalue of a GOE of variance one,
/// `½ ∫_x^{−2} √(z²−4) dz`, in closed form; `+∞` for `x > −2`.
pub fn goe_rate(x: f64) -> ExtendedReal {
    if !(x <= -2.0) {
        return ExtendedReal::PosInfinity;
    }
    let a = -x;
    let r = (a * a - 4.0).sqrt();
    ExtendedReal::Finite(0.5 * (0.5 * a * r - 2.0 * ((a + r) / 2.0).ln()))
}

/// Rate of the smallest eigenvalue of `GOE(½) + Λ e₁e₁ᵀ`, `Λ < 0`.
///
/// Threshold `Λ = −1/√2`, typical value `ρ = Λ + 1/(2Λ)` below it and
/// `−√2` above it; `+∞` for `x > −√2`.
///
/// # Errors
/// `InvalidArgument` unless `Λ < 0`.
pub fn maida_rate(outlier: f64, x: f64) -> Result<ExtendedReal> {
    if !(outlier < 0.0) {
        return Err(Error::InvalidArgument(format!("outlier must be negative, got {outlier}")));
    }
    if x > -SQRT2 {
        return Ok(ExtendedReal::PosInfinity);
    }
    let lam = outlier;
    let rho = lam + 1.0 / (2.0 * lam);
    let v = if lam <= -1.0 / SQRT2 {
        0.5 * sqrt_integral(x, rho) - lam * (x - rho) + 0.25 * (x * x - rho * rho)
    } else if x <= rho {
        0.5 * sqrt_integral(x, -SQRT2) - lam * x
            + 0.25 * x * x
            + 0.25
            + 0.25 * 2f64.ln()
            + 0.5 * lam * lam
            + 0.5 * lam.abs().ln()
    } else {
        sqrt_integral(x, -SQRT2)
    };
    Ok(ExtendedReal::Finite(v))
}

/// Measure entering the spherical-integral functional.
#[derive(Debug, Clone, Copy)]
pub enum ThetaMeasure<'a> {
    Atomic(&'a AtomicMeasure),
    /// `ν ⊞ σ_t`.
    Convolved(&'a FreeConvContext),
}

impl ThetaMeasure<'_> {
    fn left_edge(&self) -> f64 {
        match self {
            ThetaMeasure::Atomic(m) => m.support_edge(),
            ThetaMeasure::Convolved(c) => c.edge(),
        }
    }

    /// `G_μ(x)` for `x` at or below the left edge (`−∞` at an atom).
    fn stieltjes(&self, x: f64) -> Result<f64> {
        match self {
            ThetaMeasure::Atomic(m) => {
                if x >= m.support_edge() {
                    Ok(f64::NEG_INFINITY)
                } else {
                    m.stieltjes(x)
                }
            }
            ThetaMeasure::Convolved(c) => c.stieltjes_conv(x),
        }
    }

    /// `∫ log|x−y| dμ(y)`.
    fn log_integral(&self, x: f64) -> Result<f64> {
        match self {
            ThetaMeasure::Atomic(m) => m.log_potential(x).map(|s| -s),
            ThetaMeasure::Convolved(c) => c.log_potential_conv(x),
        }
    }

    /// `K_μ(u)`: the point below the support where `G_μ = u < 0`.
    fn k_inverse(&self, u: f64) -> f64 {
        let edge = self.left_edge();
        match self {
            ThetaMeasure::Atomic(m) => {
                // 1/(z−ℓ) ≤ G(z) ≤ α₁/(z−ℓ) below the support.
                let lo = edge + 1.0 / u;
                let hi = edge + m.weights()[0] / u;
                bisect(|z| m.stieltjes_unchecked(z) - u, lo, hi)
            }
            ThetaMeasure::Convolved(c) => {
                let lo = edge + 1.0 / u;
                bisect(|z| c.stieltjes_conv(z).expect("z below edge") - u, lo, edge)
            }
        }
    }

    /// `½ ∫₀^{−2θ} R_μ(u) du` with `R_μ(u) = K_μ(u) − 1/u`.
    fn r_integral(&self, theta: f64) -> f64 {
        if theta == 0.0 {
            return 0.0;
        }
        -0.5 * integrate(|u| self.k_inverse(u) - 1.0 / u, -2.0 * theta, 0.0, 1e-13)
    }
}

/// `J(θ, μ, x)` for `θ ≥ 0` and `x` at or below the left edge of `μ`:
///
/// * `½ ∫₀^{−2θ} R_μ(u) du` if `2θ ≤ |G_μ(x)|`,
/// * `−θx − ½(1 + log 2θ) − ½ ∫ log|x−y| dμ(y)` otherwise.
///
/// # Errors
/// `ThetaOutOfRange` for negative or non-finite `θ`; `AboveEdge` if `x` is
/// above the left edge of `μ`.
pub fn mckenna_theta_terms(theta: f64, mu: ThetaMeasure<'_>, x: f64) -> Result<f64> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::ThetaOutOfRange { theta });
    }
    let edge = mu.left_edge();
    if x > edge {
        return Err(Error::AboveEdge { x, edge });
    }
    let g = mu.stieltjes(x)?;
    if 2.0 * theta <= g.abs() {
        Ok(mu.r_integral(theta))
    } else {
        Ok(-theta * x - 0.5 * (1.0 + (2.0 * theta).ln()) - 0.5 * mu.log_integral(x)?)
    }
}

/// Optimizer and value of the no-outlier variational formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McKennaOptimum {
    pub value: f64,
    pub theta: f64,
}

/// `sup_{θ≥0} { J(θ, ν⊞σ₁, x) − J(θ, ν, ℓ_ν) − θ² }` with its maximizer.
///
/// # Errors
/// `AboveEdge` if `x > ℓ_{ν,1}`.
pub fn mckenna_optimum(nu: &AtomicMeasure, x: f64) -> Result<McKennaOptimum> {
    let ctx = FreeConvContext::new(nu.clone(), 1.0)?;
    let conv = ThetaMeasure::Convolved(&ctx);
    let atomic = ThetaMeasure::Atomic(nu);
    let ell = nu.support_edge();
    let objective = |theta: f64| -> f64 {
        mckenna_theta_terms(theta, conv, x).expect("x below edge")
            - mckenna_theta_terms(theta, atomic, ell).expect("theta >= 0")
            - theta * theta
    };
    let theta_lo = 0.5 * ctx.stieltjes_conv(x)?.abs();
    let theta_hi = 5.0 * (ell - x).max(1.0);
    let (theta2, v2) = golden_max(objective, theta_lo, theta_hi, 1e-10);
    let inner = [0.25 * theta_lo, 0.5 * theta_lo, theta_lo]
        .into_iter()
        .map(|th| (th, objective(th)))
        .fold((0.0, 0.0), |best, c| if c.1 > best.1 { c } else { best });
    Ok(if v2 >= inner.1 {
        McKennaOptimum { value: v2, theta: theta2 }
    } else {
        McKennaOptimum { value: inner.1, theta: inner.0 }
    })
}

/// Rate of the smallest eigenvalue of `GOE(1) + B_N` without an outlier, from
/// the variational formula.
///
/// # Errors
/// `AboveEdge` if `x > ℓ_{ν,1}`.
pub fn mckenna_rate(nu: &AtomicMeasure, x: f64) -> Result<f64> {
    mckenna_optimum(nu, x).map(|o| o.value)
}

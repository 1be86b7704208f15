//! The rate function `I_{ν,t}^Λ` of the smallest eigenvalue of
//! `G_N + B_N` where `B_N` has spectrum approximating `ν` plus one outlier
//! `Λ ≤ ℓ_ν`.
//!
//! With `ω = ω_{ν,t}(λ)` and `γ = γ(Λ,λ)` the rate is
//!
//! ```text
//! I(λ) = ½(S_ν(ω) − S_ν(γ)) + ((λ−γ)² − (λ−ω)²)/(4t)   for λ ≤ ℓ_{ν,t},
//! I(λ) = +∞                                            for λ > ℓ_{ν,t}.
//! ```
//!
//! `γ = Λ` when the outlier separates from the bulk (`Λ ≤ ω̄`) or when `λ`
//! lies below `ρ = H(Λ)`; otherwise `γ = ω*(λ)`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::free_conv::FreeConvContext;
use crate::measure::AtomicMeasure;
use crate::numerics::bisect;

/// A value in `[−∞, +∞)` extended by an explicit `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
}

impl ExtendedReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    /// The finite value, if any.
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::PosInfinity => None,
        }
    }

    /// Floating-point view, mapping `+∞` to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl From<f64> for ExtendedReal {
    fn from(v: f64) -> Self {
        ExtendedReal::Finite(v)
    }
}

impl Add for ExtendedReal {
    type Output = ExtendedReal;

    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::Finite(a + b),
            _ => ExtendedReal::PosInfinity,
        }
    }
}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => a.partial_cmp(b),
            (ExtendedReal::Finite(_), ExtendedReal::PosInfinity) => Some(Ordering::Less),
            (ExtendedReal::PosInfinity, ExtendedReal::Finite(_)) => Some(Ordering::Greater),
            (ExtendedReal::PosInfinity, ExtendedReal::PosInfinity) => Some(Ordering::Equal),
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::PosInfinity => f.write_str("inf"),
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(v) => s.serialize_f64(*v),
            ExtendedReal::PosInfinity => s.serialize_str("inf"),
        }
    }
}

/// Which solution of `H(γ) = ρ` enters the rate at a given `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `γ = Λ`: the outlier itself.
    Bbp,
    /// `γ = ω*(λ)`: the eigenvalue is pulled out of the bulk.
    Pulled,
    /// `λ > ℓ_{ν,t}`, where the rate is infinite.
    Infinite,
}

/// Regime of the limiting smallest eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `Λ < ω̄`: the smallest eigenvalue separates at `ρ`.
    Bbp,
    /// `Λ = ω̄`: threshold case, `ρ = ℓ_{ν,t}`.
    Critical,
    /// `Λ > ω̄`: the smallest eigenvalue sticks to the bulk edge.
    Subcritical,
}

/// The limiting model `(ν, t, Λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformedModel {
    ctx: Arc<FreeConvContext>,
    outlier: f64,
}

impl DeformedModel {
    /// # Errors
    /// `OutlierAboveSupport` if `Λ > ℓ_ν`, `InvalidArgument` for bad `t` or a
    /// non-finite `Λ`.
    pub fn new(nu: AtomicMeasure, t: f64, outlier: f64) -> Result<Self> {
        Self::from_context(Arc::new(FreeConvContext::new(nu, t)?), outlier)
    }

    /// # Errors
    /// As for [`DeformedModel::new`].
    pub fn from_context(ctx: Arc<FreeConvContext>, outlier: f64) -> Result<Self> {
        if !outlier.is_finite() {
            return Err(Error::InvalidArgument(format!("outlier must be finite, got {outlier}")));
        }
        let ell = ctx.nu().support_edge();
        if outlier > ell {
            return Err(Error::OutlierAboveSupport { outlier, edge: ell });
        }
        Ok(Self { ctx, outlier })
    }

    /// Same `ν` and `t`, different outlier.
    ///
    /// # Errors
    /// `OutlierAboveSupport` if `Λ > ℓ_ν`.
    pub fn with_outlier(&self, outlier: f64) -> Result<Self> {
        Self::from_context(Arc::clone(&self.ctx), outlier)
    }

    pub fn ctx(&self) -> &FreeConvContext {
        &self.ctx
    }

    pub fn nu(&self) -> &AtomicMeasure {
        self.ctx.nu()
    }

    pub fn t(&self) -> f64 {
        self.ctx.t()
    }

    pub fn outlier(&self) -> f64 {
        self.outlier
    }

    /// `true` when `Λ = ℓ_ν`, i.e. there is no separate outlier.
    pub fn outlier_at_edge(&self) -> bool {
        self.outlier >= self.nu().support_edge()
    }

    /// `ρ = H(Λ) = Λ + t G_ν(Λ)`.
    ///
    /// # Errors
    /// `OutlierAtEdge` if `Λ = ℓ_ν`.
    pub fn rho(&self) -> Result<f64> {
        if self.outlier_at_edge() {
            return Err(Error::OutlierAtEdge);
        }
        Ok(self.ctx.h(self.outlier))
    }

    /// `ρ`, or `−∞` when `Λ = ℓ_ν`.
    fn rho_or_neg_inf(&self) -> f64 {
        self.rho().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn regime(&self) -> Regime {
        let shock = self.ctx.shock_point();
        match self.outlier.partial_cmp(&shock) {
            Some(Ordering::Less) => Regime::Bbp,
            Some(Ordering::Equal) => Regime::Critical,
            _ => Regime::Subcritical,
        }
    }

    /// Almost-sure limit `ℓ^Λ` of the smallest eigenvalue: `ρ` if `Λ ≤ ω̄`,
    /// else `ℓ_{ν,t}`.
    pub fn limit_smallest(&self) -> f64 {
        if self.outlier <= self.ctx.shock_point() {
            self.ctx.h(self.outlier)
        } else {
            self.ctx.edge()
        }
    }

    fn branch_at(&self, lambda: f64) -> Branch {
        if lambda > self.ctx.edge() {
            Branch::Infinite
        } else if self.outlier <= self.ctx.shock_point() || lambda <= self.rho_or_neg_inf() {
            Branch::Bbp
        } else {
            Branch::Pulled
        }
    }

    /// `γ(Λ, λ)`.
    ///
    /// # Errors
    /// `AboveEdge` if `λ > ℓ_{ν,t}`.
    pub fn gamma(&self, lambda: f64) -> Result<f64> {
        match self.branch_at(lambda) {
            Branch::Infinite => Err(Error::AboveEdge { x: lambda, edge: self.ctx.edge() }),
            Branch::Bbp => Ok(self.outlier),
            Branch::Pulled => self.ctx.subordination_upper(lambda),
        }
    }

    /// The rate `I_{ν,t}^Λ(λ)`; `+∞` above `ℓ_{ν,t}`.
    pub fn rate(&self, lambda: f64) -> ExtendedReal {
        if lambda.is_nan() || lambda > self.ctx.edge() {
            return ExtendedReal::PosInfinity;
        }
        let gamma = self.gamma(lambda).expect("lambda below edge");
        ExtendedReal::Finite(self.rate_two_arg_unchecked(lambda, gamma))
    }

    /// The point `λ < ℓ^Λ` where the rate equals `target`.
    ///
    /// # Errors
    /// `InvalidArgument` unless `target > 0` and finite.
    pub fn point_with_rate(&self, target: f64) -> Result<f64> {
        if !(target > 0.0 && target.is_finite()) {
            return Err(Error::InvalidArgument(format!("target rate must be positive, got {target}")));
        }
        let hi = self.limit_smallest();
        let f = |l: f64| self.rate(l).to_f64() - target;
        let mut step = (4.0 * self.t() * target).sqrt().max(1e-3);
        let mut lo = hi - step;
        while f(lo) < 0.0 {
            step *= 2.0;
            lo = hi - step;
        }
        Ok(bisect(f, lo, hi))
    }

    /// `I(λ, γ) = ½(S_ν(ω(λ)) − S_ν(γ)) + ((λ−γ)² − (λ−ω)²)/(4t)`.
    ///
    /// # Errors
    /// `AboveEdge` if `λ > ℓ_{ν,t}`, `DomainAboveSupport` if `γ ≥ ℓ_ν`.
    pub fn rate_two_arg(&self, lambda: f64, gamma: f64) -> Result<f64> {
        let ell = self.nu().support_edge();
        if !(gamma < ell) {
            return Err(Error::DomainAboveSupport { x: gamma, edge: ell });
        }
        self.ctx.subordination_lower(lambda)?;
        Ok(self.rate_two_arg_unchecked(lambda, gamma))
    }

    fn rate_two_arg_unchecked(&self, lambda: f64, gamma: f64) -> f64 {
        let omega = self.ctx.subordination_lower(lambda).expect("lambda below edge");
        let nu = self.nu();
        let t = self.t();
        0.5 * (nu.log_potential_unchecked(omega) - nu.log_potential_unchecked(gamma))
            + ((lambda - gamma).powi(2) - (lambda - omega).powi(2)) / (4.0 * t)
    }

    /// `dI/dλ = (ω(λ) − γ(Λ,λ))/(2t)`.
    ///
    /// # Errors
    /// `AboveEdge` for `λ ≥ ℓ_{ν,t}`; `AtBranchPoint` within `1e-10` of `ρ` in
    /// the subcritical regime, where the second derivative jumps.
    pub fn rate_derivative(&self, lambda: f64) -> Result<f64> {
        let edge = self.ctx.edge();
        if !(lambda < edge) {
            return Err(Error::AboveEdge { x: lambda, edge });
        }
        if self.outlier > self.ctx.shock_point() && !self.outlier_at_edge() {
            let rho = self.rho_or_neg_inf();
            if (lambda - rho).abs() <= 1e-10 {
                return Err(Error::AtBranchPoint { x: lambda });
            }
        }
        let omega = self.ctx.subordination_lower(lambda)?;
        let gamma = self.gamma(lambda)?;
        Ok((omega - gamma) / (2.0 * self.t()))
    }

    /// Evaluate the rate on `n` equally spaced points of
    /// `[lambda_min, lambda_max]`.
    ///
    /// # Errors
    /// `InvalidArgument` if `n < 2` or the interval is empty.
    pub fn rate_curve(&self, lambda_min: f64, lambda_max: f64, n: usize) -> Result<RateCurve> {
        if n < 2 || !(lambda_min < lambda_max) {
            return Err(Error::InvalidArgument(format!(
                "need n >= 2 and lambda_min < lambda_max (got n={n}, [{lambda_min}, {lambda_max}])"
            )));
        }
        let grid: Vec<f64> = (0..n)
            .map(|i| lambda_min + (lambda_max - lambda_min) * i as f64 / (n - 1) as f64)
            .collect();
        let values = grid.iter().map(|&l| self.rate(l)).collect();
        let branch = grid.iter().map(|&l| self.branch_at(l)).collect();
        Ok(RateCurve { grid, values, branch })
    }
}

/// Sampled graph of `λ ↦ I(λ)` with the branch used at each point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCurve {
    pub grid: Vec<f64>,
    pub values: Vec<ExtendedReal>,
    pub branch: Vec<Branch>,
}

impl RateCurve {
    /// Grid point with the smallest rate.
    pub fn argmin(&self) -> f64 {
        let i = (0..self.grid.len())
            .min_by(|&a, &b| self.values[a].partial_cmp(&self.values[b]).unwrap())
            .unwrap();
        self.grid[i]
    }
}

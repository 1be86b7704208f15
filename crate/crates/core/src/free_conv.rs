//! Free convolution `ν ⊞ σ_t` of an atomic measure with the semicircle law
//! of variance `t`.
//!
//! Everything is expressed through `H(z) = z + t G_ν(z)`. Below `ℓ_ν` the map
//! `H` is strictly concave, increasing up to the shock point `ω̄` (where
//! `Σ αᵢ/(ηᵢ−ω̄)² = 1/t`) and decreasing after it. The left edge of
//! `ν ⊞ σ_t` is `ℓ_{ν,t} = H(ω̄)`; the increasing-branch inverse of `H` is
//! the subordination function `ω`, the decreasing-branch inverse is `ω*`.
//! The density is recovered from Biane's parametrization
//! `x(u) = u + t Re G_ν(u + i v_t(u))`, density `v_t(u)/(πt)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::measure::AtomicMeasure;
use crate::numerics::{bisect, newton_bracketed};

/// `ν`, `t` and the cached shock point and edge of `ν ⊞ σ_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeConvContext {
    nu: AtomicMeasure,
    t: f64,
    shock: f64,
    edge: f64,
}

impl FreeConvContext {
    /// # Errors
    /// `InvalidArgument` unless `t` is positive and finite.
    pub fn new(nu: AtomicMeasure, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
        }
        let ell = nu.support_edge();
        // Σ α/(η−ω)² ≤ 1/(ℓ−ω)² ≤ 1/t once ℓ − ω ≥ √t, and it diverges at ℓ.
        let f = |w: f64| nu.inverse_square_moment(w) - 1.0 / t;
        let df = |w: f64| 2.0 * nu.atoms().map(|(eta, a)| a / (eta - w).powi(3)).sum::<f64>();
        let lo = ell - t.sqrt();
        let shock = newton_bracketed(f, df, lo, ell, 1e-16 * (1.0 + ell.abs()), 0.0);
        let edge = shock + t * nu.stieltjes_unchecked(shock);
        Ok(Self { nu, t, shock, edge })
    }

    pub fn nu(&self) -> &AtomicMeasure {
        &self.nu
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Shock point `ω̄ = ω(ℓ_{ν,t})`.
    pub fn shock_point(&self) -> f64 {
        self.shock
    }

    /// Left edge `ℓ_{ν,t}` of `ν ⊞ σ_t`.
    pub fn edge(&self) -> f64 {
        self.edge
    }

    /// `H(x) = x + t G_ν(x)` for `x < ℓ_ν`.
    ///
    /// # Errors
    /// `DomainAboveSupport` if `x ≥ ℓ_ν`.
    pub fn h_transform(&self, x: f64) -> Result<f64> {
        let ell = self.nu.support_edge();
        if !(x < ell) {
            return Err(Error::DomainAboveSupport { x, edge: ell });
        }
        self.nu.stieltjes(x).map(|g| x + self.t * g)
    }

    pub(crate) fn h(&self, x: f64) -> f64 {
        x + self.t * self.nu.stieltjes_unchecked(x)
    }

    fn h_prime(&self, x: f64) -> f64 {
        1.0 - self.t * self.nu.inverse_square_moment(x)
    }

    fn check_below_edge(&self, x: f64) -> Result<()> {
        if x > self.edge + 1e-12 * (1.0 + x.abs()) || x.is_nan() {
            return Err(Error::AboveEdge { x, edge: self.edge });
        }
        Ok(())
    }

    /// Increasing-branch inverse `ω(x) ≤ ω̄` of `H`.
    ///
    /// # Errors
    /// `AboveEdge` if `x > ℓ_{ν,t}`.
    pub fn subordination_lower(&self, x: f64) -> Result<f64> {
        self.check_below_edge(x)?;
        if x >= self.edge {
            return Ok(self.shock);
        }
        let mut lo = (self.shock - 1.0).min(x);
        while self.h(lo) >= x {
            lo = self.shock - 2.0 * (self.shock - lo);
        }
        Ok(newton_bracketed(
            |w| self.h(w) - x,
            |w| self.h_prime(w),
            lo,
            self.shock,
            4.0 * f64::EPSILON * (1.0 + x.abs()),
            0.0,
        ))
    }

    /// Decreasing-branch inverse `ω*(x) ∈ [ω̄, ℓ_ν)` of `H`.
    ///
    /// # Errors
    /// `AboveEdge` if `x > ℓ_{ν,t}`, `BelowBranch` if `H` does not reach `x`
    /// before `ℓ_ν`.
    pub fn subordination_upper(&self, x: f64) -> Result<f64> {
        self.check_below_edge(x)?;
        if x >= self.edge {
            return Ok(self.shock);
        }
        let ell = self.nu.support_edge();
        let mut delta = 0.5 * (ell - self.shock);
        let hi = loop {
            let w = ell - delta;
            if w >= ell {
                return Err(Error::BelowBranch { x });
            }
            if self.h(w) <= x {
                break w;
            }
            delta *= 0.5;
        };
        Ok(newton_bracketed(
            |w| self.h(w) - x,
            |w| self.h_prime(w),
            self.shock,
            hi,
            4.0 * f64::EPSILON * (1.0 + x.abs()),
            0.0,
        ))
    }

    /// Biane's `v_t(u)`: zero when `Σ αᵢ/(ηᵢ−u)² ≤ 1/t`, otherwise the
    /// positive solution of `Σ αᵢ/((ηᵢ−u)² + v²) = 1/t`.
    pub fn biane_v(&self, u: f64) -> f64 {
        let inv_t = 1.0 / self.t;
        if self.nu.inverse_square_moment(u) <= inv_t {
            return 0.0;
        }
        let g = |s: f64| {
            self.nu
                .atoms()
                .map(|(eta, a)| a / ((eta - u) * (eta - u) + s))
                .sum::<f64>()
                - inv_t
        };
        let dg = |s: f64| {
            -self
                .nu
                .atoms()
                .map(|(eta, a)| {
                    let d = (eta - u) * (eta - u) + s;
                    a / (d * d)
                })
                .sum::<f64>()
        };
        // Σ α/(d²+s) ≤ 1/s, so s = t is always on the negative side.
        let s = newton_bracketed(g, dg, 0.0, self.t, 4.0 * f64::EPSILON * self.t, 0.0);
        s.max(0.0).sqrt()
    }

    /// Point `x(u)` of the real line parametrized by `u`.
    fn biane_x(&self, u: f64, v: f64) -> f64 {
        if v == 0.0 {
            return self.h(u);
        }
        let re_g: f64 = self
            .nu
            .atoms()
            .map(|(eta, a)| {
                let d = u - eta;
                a * d / (d * d + v * v)
            })
            .sum();
        u + self.t * re_g
    }

    /// Intervals of `u` on which `v_t(u) > 0`, sorted left to right.
    fn bulk_components(&self) -> Vec<(f64, f64)> {
        let inv_t = 1.0 / self.t;
        let f = |u: f64| self.nu.inverse_square_moment(u) - inv_t;
        let locs = self.nu.locations();
        let last = *locs.last().unwrap();
        let right = bisect(f, last + self.t.sqrt(), last);
        let mut comps = Vec::new();
        let mut start = self.shock;
        for w in locs.windows(2) {
            let (a, b) = (w[0], w[1]);
            // F is convex between atoms; its minimum sits where F' = 0.
            let fp = |u: f64| self.nu.atoms().map(|(eta, al)| al / (eta - u).powi(3)).sum::<f64>();
            let m = bisect(fp, a + 1e-15 * (b - a).max(1.0), b - 1e-15 * (b - a).max(1.0));
            if f(m) < 0.0 {
                let r1 = bisect(f, m, a);
                let r2 = bisect(f, m, b);
                comps.push((start, r1));
                start = r2;
            }
        }
        comps.push((start, right));
        comps
    }

    /// Samples `(x, density)` of `ν ⊞ σ_t` over its whole support.
    ///
    /// Each connected component of the support gets a cosine-spaced grid in
    /// `u`, which clusters points at the square-root edges; the first and
    /// last point of every component have zero density.
    ///
    /// # Errors
    /// `InvalidArgument` if `n_points < 2`.
    pub fn density_curve(&self, n_points: usize) -> Result<DensityCurve> {
        if n_points < 2 {
            return Err(Error::InvalidArgument("density_curve needs at least 2 points".into()));
        }
        let comps = self.bulk_components();
        let total: f64 = comps.iter().map(|(a, b)| b - a).sum();
        let mut points = Vec::with_capacity(n_points + 16 * comps.len());
        let mut remaining = n_points;
        for (i, &(a, b)) in comps.iter().enumerate() {
            let share = if i + 1 == comps.len() {
                remaining
            } else {
                ((n_points as f64) * (b - a) / total).round() as usize
            };
            let n = share.max(16);
            remaining = remaining.saturating_sub(n);
            for j in 0..n {
                let theta = PI * j as f64 / (n - 1) as f64;
                let u = a + 0.5 * (b - a) * (1.0 - theta.cos());
                let v = if j == 0 || j + 1 == n { 0.0 } else { self.biane_v(u) };
                points.push((self.biane_x(u, v), v / (PI * self.t)));
            }
        }
        Ok(DensityCurve { points })
    }

    /// Distribution function of `ν ⊞ σ_t`, by quadrature over a 4000-point
    /// density curve.
    pub fn cdf(&self, x: f64) -> f64 {
        self.density_curve(4000).expect("n_points >= 2").cdf(x)
    }

    /// `G_{ν⊞σ_t}(x) = G_ν(ω(x))` for `x ≤ ℓ_{ν,t}`.
    ///
    /// # Errors
    /// `AboveEdge` if `x > ℓ_{ν,t}`.
    pub fn stieltjes_conv(&self, x: f64) -> Result<f64> {
        let w = self.subordination_lower(x)?;
        Ok(self.nu.stieltjes_unchecked(w))
    }

    /// `∫ log|λ−x| d(ν⊞σ_t)(λ)` for `x ≤ ℓ_{ν,t}`, via
    /// `Σ αᵢ log|ηᵢ−ω(x)| + (ω(x)−x)²/(2t)`.
    ///
    /// # Errors
    /// `AboveEdge` if `x > ℓ_{ν,t}`.
    pub fn log_potential_conv(&self, x: f64) -> Result<f64> {
        let w = self.subordination_lower(x)?;
        Ok(-self.nu.log_potential_unchecked(w) + (w - x) * (w - x) / (2.0 * self.t))
    }
}

/// Sampled density of `ν ⊞ σ_t`, ordered by `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve {
    pub points: Vec<(f64, f64)>,
}

impl DensityCurve {
    /// Trapezoid rule of the density in `x`.
    pub fn total_mass(&self) -> f64 {
        self.integrate(|_| 1.0)
    }

    /// Trapezoid rule of `f(x)·density(x)` in `x`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.points
            .windows(2)
            .map(|w| {
                let ((x0, d0), (x1, d1)) = (w[0], w[1]);
                0.5 * (f(x0) * d0 + f(x1) * d1) * (x1 - x0)
            })
            .sum()
    }

    /// Cumulative trapezoid integral up to `x`, linear inside a cell.
    pub fn cdf(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for w in self.points.windows(2) {
            let ((x0, d0), (x1, d1)) = (w[0], w[1]);
            if x <= x0 {
                break;
            }
            if x < x1 {
                let s = (x - x0) / (x1 - x0);
                let dx = x - x0;
                acc += dx * (d0 + 0.5 * s * (d1 - d0));
                break;
            }
            acc += 0.5 * (d0 + d1) * (x1 - x0);
        }
        acc.min(1.0)
    }
}

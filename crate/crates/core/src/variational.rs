//! Simplex functionals behind the rate function.
//!
//! For an eigenvector whose squared projections on the eigenspaces of
//! `B_N` are `Y = (y₀, y₁, …, y_p)` (outlier direction first), the quantities
//! below combine into
//!
//! ```text
//! K(Λ, λ, Y) = L(λ, Y) + I_ν(Y) − C_t − ∫log|λ−x| d(ν⊞σ_t)(x) + λ²/(4t)
//! ```
//!
//! and the rate is characterized as the fixed point
//! `I^Λ(λ) = inf_Y { K(Λ,λ,Y) + I^{Φ(Λ,Y)}(λ) · 1[ω(λ) ≥ Φ(Λ,Y)] }`, where
//! `Φ(Λ,Y)` is the smallest eigenvalue of `B_N` compressed to the orthogonal
//! complement of the eigenvector. The minimizers of `J = L + I_ν` are known
//! in closed form ([`y_of_gamma`]); random-restart projected gradient is
//! used only to look for counterexamples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::numerics::newton_bracketed;
use crate::rate::{DeformedModel, ExtendedReal};

/// A point of the simplex `{y ≥ 0, Σ y = 1}` in `ℝ^{p+1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SimplexVector {
    y: Vec<f64>,
}

impl SimplexVector {
    /// Entries within `1e-12` below zero are clamped to zero.
    ///
    /// # Errors
    /// `InvalidArgument` for fewer than two entries, entries outside
    /// `[0, 1]`, or a sum away from one by more than `1e-12`.
    pub fn new(mut y: Vec<f64>) -> Result<Self> {
        if y.len() < 2 {
            return Err(Error::InvalidArgument("simplex vector needs y0 and y1".into()));
        }
        if y.iter().any(|v| !(-1e-12..=1.0 + 1e-12).contains(v)) {
            return Err(Error::InvalidArgument(format!("entries must lie in [0,1]: {y:?}")));
        }
        for v in &mut y {
            *v = v.clamp(0.0, 1.0);
        }
        let s: f64 = y.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("entries sum to {s}")));
        }
        Ok(Self { y })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.y
    }

    /// Mass on the outlier direction.
    pub fn y0(&self) -> f64 {
        self.y[0]
    }

    /// Masses on the eigenspaces of the atoms `η₁ < … < η_p`.
    pub fn masses(&self) -> &[f64] {
        &self.y[1..]
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

fn check_dim(model: &DeformedModel, y: &[f64]) -> Result<()> {
    if y.len() != model.nu().len() + 1 {
        return Err(Error::InvalidArgument(format!(
            "simplex vector has {} entries, model needs {}",
            y.len(),
            model.nu().len() + 1
        )));
    }
    Ok(())
}

fn mean_and_second_moment(model: &DeformedModel, y: &[f64]) -> (f64, f64) {
    let lam = model.outlier();
    let mut m = lam * y[0];
    let mut s2 = lam * lam * y[0];
    for (eta, yk) in model.nu().locations().iter().zip(&y[1..]) {
        m += eta * yk;
        s2 += eta * eta * yk;
    }
    (m, s2)
}

fn l_raw(model: &DeformedModel, lambda: f64, y: &[f64]) -> f64 {
    let t = model.t();
    let (m, s2) = mean_and_second_moment(model, y);
    -lambda * m / (2.0 * t) + s2 / (2.0 * t) - m * m / (4.0 * t)
}

/// `L(λ, Y) = −(λ/2t)M + Σ₂/(2t) − M²/(4t)` with `M = Λy₀ + Σ η_k y_k` and
/// `Σ₂ = Λ²y₀ + Σ η_k² y_k`.
///
/// # Errors
/// `InvalidArgument` if `Y` does not have `p+1` entries.
pub fn big_l(model: &DeformedModel, lambda: f64, y: &SimplexVector) -> Result<f64> {
    check_dim(model, y.as_slice())?;
    Ok(l_raw(model, lambda, y.as_slice()))
}

fn dirichlet_raw(alpha: &[f64], masses: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (a, yk) in alpha.iter().zip(masses) {
        if *a > 0.0 {
            if *yk <= 0.0 {
                return f64::INFINITY;
            }
            acc -= a * (yk / a).ln();
        }
    }
    0.5 * acc
}

/// Dirichlet rate `I_ν(Y) = −½ Σ_{k≥1} α_k log(y_k/α_k)`, `+∞` if some
/// `y_k = 0` with `α_k > 0`.
///
/// # Errors
/// `InvalidArgument` if `alpha` does not have one entry per atom of `Y`.
pub fn dirichlet_rate(alpha: &[f64], y: &SimplexVector) -> Result<ExtendedReal> {
    if alpha.len() + 1 != y.len() {
        return Err(Error::InvalidArgument("alpha and Y dimensions differ".into()));
    }
    let v = dirichlet_raw(alpha, y.masses());
    Ok(if v.is_finite() { ExtendedReal::Finite(v) } else { ExtendedReal::PosInfinity })
}

/// `C_t = ½ − ½ ln t`.
pub fn c_t(t: f64) -> f64 {
    0.5 - 0.5 * t.ln()
}

/// `log Z_N^t` with
/// `Z_N^t = N! (2t/N)^{N(N+1)/4} (2π)^N ∏_{j<N} Γ((j+1)/2)/Γ(½)`.
///
/// # Errors
/// `InvalidArgument` for `n = 0` or non-positive `t`.
pub fn selberg_log_partition(n: usize, t: f64) -> Result<f64> {
    if n == 0 || !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("need N >= 1 and t > 0 (N={n}, t={t})")));
    }
    let nf = n as f64;
    let ln_half = ln_gamma(0.5);
    let product: f64 = (0..n).map(|j| ln_gamma((j as f64 + 1.0) / 2.0) - ln_half).sum();
    Ok(ln_gamma(nf + 1.0)
        + nf * (nf + 1.0) / 4.0 * (2.0 * t / nf).ln()
        + nf * (2.0 * std::f64::consts::PI).ln()
        + product)
}

/// `(1/N)(log Z_{N−1}^{t(N−1)/N} − log Z_N^t)`, which tends to `C_t`.
///
/// # Errors
/// `InvalidArgument` for `n < 2` or non-positive `t`.
pub fn selberg_ratio(n: usize, t: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument("selberg ratio needs N >= 2".into()));
    }
    let nf = n as f64;
    Ok((selberg_log_partition(n - 1, t * (nf - 1.0) / nf)? - selberg_log_partition(n, t)?) / nf)
}

fn phi_raw(model: &DeformedModel, y: &[f64]) -> f64 {
    let lam = model.outlier();
    let locs = model.nu().locations();
    let eta1 = locs[0];
    if y[0] <= 0.0 || lam >= eta1 {
        return lam;
    }
    if y[1] <= 0.0 {
        return eta1;
    }
    let f = |x: f64| {
        locs.iter().zip(&y[1..]).map(|(eta, yk)| yk * (eta - lam) / (eta - x)).sum::<f64>() - 1.0
    };
    let df = |x: f64| {
        locs.iter()
            .zip(&y[1..])
            .map(|(eta, yk)| yk * (eta - lam) / ((eta - x) * (eta - x)))
            .sum::<f64>()
    };
    newton_bracketed(f, df, lam, eta1, 4.0 * f64::EPSILON * (1.0 + eta1.abs()), 0.0)
}

/// `Φ(Λ, Y)`: the root in `[Λ, η₁]` of `Σ_k y_k(η_k−Λ)/(η_k−x) = 1`, with
/// `Φ = Λ` when `y₀ = 0` and `Φ = η₁` when `y₁ = 0`.
///
/// # Errors
/// `InvalidArgument` if `Y` does not have `p+1` entries.
pub fn phi(model: &DeformedModel, y: &SimplexVector) -> Result<f64> {
    check_dim(model, y.as_slice())?;
    Ok(phi_raw(model, y.as_slice()))
}

/// Which closed-form critical point of `J` to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaChoice {
    /// `γ = Λ`.
    Outlier,
    /// `γ = ω*(λ)`.
    Pulled,
}

/// Result of [`y_of_gamma`].
#[derive(Debug, Clone, PartialEq)]
pub enum Candidate {
    Feasible(SimplexVector),
    /// The closed form leaves the simplex with this (negative) `y₀`.
    Infeasible { y0: f64 },
}

impl Candidate {
    pub fn feasible(self) -> Option<SimplexVector> {
        match self {
            Candidate::Feasible(y) => Some(y),
            Candidate::Infeasible { .. } => None,
        }
    }
}

/// Critical point `Y(γ)` of `J`:
/// `y_k = tα_k/((η_k − ω(λ))(η_k − γ))`, `y₀ = 1 − Σ y_k`.
///
/// # Errors
/// `AboveEdge` if `λ > ℓ_{ν,t}`.
pub fn y_of_gamma(model: &DeformedModel, lambda: f64, choice: GammaChoice) -> Result<Candidate> {
    let ctx = model.ctx();
    let omega = ctx.subordination_lower(lambda)?;
    let gamma = match choice {
        GammaChoice::Outlier => {
            if model.outlier_at_edge() {
                return Ok(Candidate::Infeasible { y0: f64::NEG_INFINITY });
            }
            model.outlier()
        }
        GammaChoice::Pulled => ctx.subordination_upper(lambda)?,
    };
    let t = model.t();
    let mut y = Vec::with_capacity(model.nu().len() + 1);
    y.push(0.0);
    for (eta, a) in model.nu().atoms() {
        y.push(t * a / ((eta - omega) * (eta - gamma)));
    }
    let y0 = 1.0 - y[1..].iter().sum::<f64>();
    if y0 < -1e-12 {
        return Ok(Candidate::Infeasible { y0 });
    }
    y[0] = if y0.abs() <= 1e-12 { 0.0 } else { y0 };
    // Absorb the rounding so that the entries sum to one.
    let s: f64 = y.iter().sum();
    for v in &mut y {
        *v /= s;
    }
    Ok(Candidate::Feasible(SimplexVector::new(y)?))
}

/// `y₀(Λ) = (λ−ρ)/(ω(λ)−Λ)`, or `1 + tG_ν′(Λ)` when `ω(λ) = Λ`.
///
/// # Errors
/// `OutlierAtEdge` if `Λ = ℓ_ν`; `AboveEdge` if `λ > ℓ_{ν,t}`.
pub fn y0_closed_form(model: &DeformedModel, lambda: f64) -> Result<f64> {
    let rho = model.rho()?;
    let omega = model.ctx().subordination_lower(lambda)?;
    let lam = model.outlier();
    if (omega - lam).abs() <= 1e-7 * (1.0 + lam.abs()) {
        Ok(1.0 + model.t() * model.nu().stieltjes_derivative(lam)?)
    } else {
        Ok((lambda - rho) / (omega - lam))
    }
}

/// All terms of `K(Λ, λ, Y)` together with `Φ(Λ, Y)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalEval {
    pub l: f64,
    pub i_nu: ExtendedReal,
    pub j: ExtendedReal,
    pub k: ExtendedReal,
    pub phi: f64,
    /// Whether `ω(λ) ≥ Φ(Λ, Y)`.
    pub indicator_active: bool,
}

/// Quantities that depend on `(model, λ)` only.
struct Frame<'a> {
    model: &'a DeformedModel,
    lambda: f64,
    omega: f64,
    s_omega: f64,
    k_shift: f64,
}

impl<'a> Frame<'a> {
    fn new(model: &'a DeformedModel, lambda: f64) -> Result<Self> {
        let ctx = model.ctx();
        let omega = ctx.subordination_lower(lambda)?;
        let t = model.t();
        let k_shift = -c_t(t) - ctx.log_potential_conv(lambda)? + lambda * lambda / (4.0 * t);
        Ok(Self {
            model,
            lambda,
            omega,
            s_omega: model.nu().log_potential_unchecked(omega),
            k_shift,
        })
    }

    fn j(&self, y: &[f64]) -> f64 {
        l_raw(self.model, self.lambda, y) + dirichlet_raw(self.model.nu().weights(), &y[1..])
    }

    fn grad_j(&self, y: &[f64], g: &mut [f64]) {
        let t = self.model.t();
        let (m, _) = mean_and_second_moment(self.model, y);
        let dl = |b: f64| (-self.lambda * b + b * b - m * b) / (2.0 * t);
        g[0] = dl(self.model.outlier());
        for (k, (eta, a)) in self.model.nu().atoms().enumerate() {
            g[k + 1] = dl(eta) - 0.5 * a / y[k + 1];
        }
    }

    /// `I(λ, γ)` for `γ` on the outlier branch, reusing `ω(λ)`.
    fn rate_at(&self, gamma: f64) -> f64 {
        let t = self.model.t();
        0.5 * (self.s_omega - self.model.nu().log_potential_unchecked(gamma))
            + ((self.lambda - gamma).powi(2) - (self.lambda - self.omega).powi(2)) / (4.0 * t)
    }

    /// `K + I^Φ(λ)·1[ω ≥ Φ]`.
    fn fixed_point_objective(&self, y: &[f64]) -> f64 {
        let j = self.j(y);
        if !j.is_finite() {
            return f64::INFINITY;
        }
        let p = phi_raw(self.model, y);
        let extra = if self.omega >= p { self.rate_at(p) } else { 0.0 };
        j + self.k_shift + extra
    }

    fn grad_fixed_point(&self, y: &[f64], g: &mut [f64]) {
        self.grad_j(y, g);
        let p = phi_raw(self.model, y);
        if self.omega < p {
            return;
        }
        let model = self.model;
        let lam = model.outlier();
        let ctx = model.ctx();
        // ∂I(λ,γ)/∂γ = (H(γ) − λ)/(2t).
        let di = (ctx.h(p) - self.lambda) / (2.0 * model.t());
        let locs = model.nu().locations();
        if y[0] > 1e-12 && lam - p != 0.0 {
            let mut dfdphi = y[0] / ((lam - p) * (lam - p));
            for (eta, yk) in locs.iter().zip(&y[1..]) {
                dfdphi += yk / ((eta - p) * (eta - p));
            }
            g[0] -= di / (lam - p) / dfdphi;
            for (k, eta) in locs.iter().enumerate() {
                g[k + 1] -= di / (eta - p) / dfdphi;
            }
        } else {
            // Φ ≈ Λ + y₀/Σ_k y_k/(η_k−Λ) near the face y₀ = 0.
            let s: f64 = locs.iter().zip(&y[1..]).map(|(eta, yk)| yk / (eta - lam)).sum();
            g[0] += di / s;
        }
    }
}

/// Evaluate every term of `K(Λ, λ, Y)`.
///
/// # Errors
/// `AboveEdge` if `λ > ℓ_{ν,t}`; `InvalidArgument` on a dimension mismatch.
pub fn functional_k(model: &DeformedModel, lambda: f64, y: &SimplexVector) -> Result<FunctionalEval> {
    check_dim(model, y.as_slice())?;
    let frame = Frame::new(model, lambda)?;
    let l = l_raw(model, lambda, y.as_slice());
    let i_nu = dirichlet_rate(model.nu().weights(), y)?;
    let j = ExtendedReal::Finite(l) + i_nu;
    let k = j + ExtendedReal::Finite(frame.k_shift);
    let phi = phi_raw(model, y.as_slice());
    Ok(FunctionalEval { l, i_nu, j, k, phi, indicator_active: frame.omega >= phi })
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cum += ui;
        let cand = (cum - 1.0) / (i + 1) as f64;
        if ui - cand > 0.0 {
            tau = cand;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - tau).max(0.0);
    }
    let s: f64 = v.iter().sum();
    for x in v.iter_mut() {
        *x /= s;
    }
}

/// Projected gradient descent with Armijo backtracking.
fn projected_descent<F, G>(f: F, grad: G, start: Vec<f64>, max_iter: usize) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    let n = start.len();
    let mut y = start;
    let mut fy = f(&y);
    let mut g = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut step = 0.1;
    for _ in 0..max_iter {
        grad(&y, &mut g);
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                trial[i] = y[i] - step * g[i];
            }
            project_simplex(&mut trial);
            let decrease: f64 = (0..n).map(|i| g[i] * (y[i] - trial[i])).sum();
            let ft = f(&trial);
            if ft.is_finite() && ft <= fy - 1e-4 * decrease {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        let moved: f64 = (0..n).map(|i| (trial[i] - y[i]).abs()).sum();
        std::mem::swap(&mut y, &mut trial);
        let fnew = f(&y);
        let gain = fy - fnew;
        fy = fnew;
        if moved < 1e-14 || gain.abs() < 1e-15 * (1.0 + fy.abs()) {
            break;
        }
        step = (step * 2.0).min(1e3);
    }
    (y, fy)
}

/// Uniform random point of the simplex (flat Dirichlet), with every
/// coordinate bounded away from zero.
fn random_start(dim: usize, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut y: Vec<f64> = (0..dim).map(|_| -(1.0 - rng.gen::<f64>()).ln() + 1e-3).collect();
    let s: f64 = y.iter().sum();
    for v in &mut y {
        *v /= s;
    }
    y
}

/// Run `restarts` independent descents (in parallel) and return each end
/// point with its value, in restart order.
fn restarts<F, G>(dim: usize, n: usize, seed: u64, f: F, grad: G) -> Vec<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64], &mut [f64]) + Sync,
{
    (0..n as u64)
        .into_par_iter()
        .map(|i| projected_descent(&f, &grad, random_start(dim, seed, i), 5000))
        .collect()
}

/// The minimizer of `J` reported by [`minimize_j`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JMinimum {
    pub y: SimplexVector,
    pub value: f64,
    /// Closed form that was returned.
    pub choice: GammaChoice,
    /// Final values of the random-restart descents.
    pub restart_values: Vec<f64>,
}

/// Minimize `J(Y) = L(λ,Y) + I_ν(Y)` over the simplex.
///
/// The closed-form candidate is chosen by the case analysis of the
/// minimizer; `restarts` projected-gradient descents from random starts are
/// recorded alongside for verification.
///
/// # Errors
/// `AboveEdge` if `λ > ℓ_{ν,t}`.
pub fn minimize_j(model: &DeformedModel, lambda: f64, restarts_n: usize, seed: u64) -> Result<JMinimum> {
    let frame = Frame::new(model, lambda)?;
    let ctx = model.ctx();
    let edge = ctx.edge();
    let shock = ctx.shock_point();
    let lam = model.outlier();
    let rho = model.rho().unwrap_or(f64::NEG_INFINITY);
    let eval = |c: GammaChoice| -> Result<Option<(SimplexVector, f64, GammaChoice)>> {
        Ok(y_of_gamma(model, lambda, c)?
            .feasible()
            .map(|y| {
                let v = frame.j(y.as_slice());
                (y, v, c)
            }))
    };
    let chosen = if lambda <= rho || (lam < shock && lambda >= edge) {
        eval(GammaChoice::Outlier)?
    } else if lam >= shock {
        eval(GammaChoice::Pulled)?
    } else {
        let a = eval(GammaChoice::Outlier)?;
        let b = eval(GammaChoice::Pulled)?;
        match (a, b) {
            (Some(a), Some(b)) => Some(if a.1 <= b.1 { a } else { b }),
            (a, b) => a.or(b),
        }
    };
    let (y, value, choice) = match chosen {
        Some(c) => c,
        None => eval(GammaChoice::Pulled)?.expect("Y(omega*) is always feasible"),
    };
    let dim = model.nu().len() + 1;
    let restart_values = restarts(dim, restarts_n, seed, |y| frame.j(y), |y, g| frame.grad_j(y, g))
        .into_iter()
        .map(|r| r.1)
        .collect();
    Ok(JMinimum { y, value, choice, restart_values })
}

/// Outcome of checking the fixed-point equation at one `λ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointReport {
    pub lambda: f64,
    pub rate: f64,
    /// `|rate − inf_Y objective|`.
    pub residual: f64,
    pub argmin_y: SimplexVector,
    pub phi_at_argmin: f64,
    /// Objective at the closed-form candidates `Y(Λ)` and `Y(ω*)`
    /// (`None` when infeasible).
    pub candidate_outlier: Option<f64>,
    pub candidate_pulled: Option<f64>,
    /// Smallest value reached by the random-restart descents.
    pub restart_min: f64,
}

/// Check `I^Λ(λ) = inf_Y { K + I^{Φ(Λ,Y)}(λ)·1[ω(λ) ≥ Φ(Λ,Y)] }` over the
/// closed-form candidates and `restarts` random-restart descents.
///
/// # Errors
/// `AboveEdge` unless `λ < ℓ_{ν,t}`.
pub fn fixed_point_residual(
    model: &DeformedModel,
    lambda: f64,
    restarts_n: usize,
    seed: u64,
) -> Result<FixedPointReport> {
    let edge = model.ctx().edge();
    if !(lambda < edge) {
        return Err(Error::AboveEdge { x: lambda, edge });
    }
    let frame = Frame::new(model, lambda)?;
    let rate = model.rate(lambda).to_f64();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut consider = |y: Vec<f64>, v: f64| {
        if best.as_ref().is_none_or(|b| v < b.1) {
            best = Some((y, v));
        }
    };
    let mut candidate = |c: GammaChoice| -> Result<Option<f64>> {
        Ok(y_of_gamma(model, lambda, c)?.feasible().map(|y| {
            let v = frame.fixed_point_objective(y.as_slice());
            consider(y.as_slice().to_vec(), v);
            v
        }))
    };
    let candidate_outlier = candidate(GammaChoice::Outlier)?;
    let candidate_pulled = candidate(GammaChoice::Pulled)?;
    let dim = model.nu().len() + 1;
    let runs = restarts(
        dim,
        restarts_n,
        seed,
        |y| frame.fixed_point_objective(y),
        |y, g| frame.grad_fixed_point(y, g),
    );
    let mut restart_min = f64::INFINITY;
    for (y, v) in runs {
        restart_min = restart_min.min(v);
        consider(y, v);
    }
    let (y, v) = best.expect("Y(omega*) is always a candidate");
    let argmin_y = SimplexVector::new(y)?;
    let phi_at_argmin = phi_raw(model, argmin_y.as_slice());
    Ok(FixedPointReport {
        lambda,
        rate,
        residual: (rate - v).abs(),
        argmin_y,
        phi_at_argmin,
        candidate_outlier,
        candidate_pulled,
        restart_min,
    })
}

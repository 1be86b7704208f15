//! Finitely supported probability measures, their Stieltjes transform and
//! logarithmic potential, and discretization of measures given by a
//! quantile function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A probability measure `Σ αᵢ δ_{ηᵢ}` with finitely many atoms.
///
/// Locations are strictly increasing and weights strictly positive with
/// unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    locations: Vec<f64>,
    weights: Vec<f64>,
}

impl AtomicMeasure {
    /// Build a measure from `(location, weight)` pairs in any order.
    ///
    /// Locations closer than `1e-12` are merged. Weights summing to one
    /// within `1e-9` are renormalized; anything further off is rejected.
    ///
    /// # Errors
    /// `InvalidMeasure` for an empty list, non-finite values, non-positive
    /// weights, or a total weight away from one.
    pub fn new(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        let mut sorted = atoms.to_vec();
        for &(x, w) in &sorted {
            if !x.is_finite() || !w.is_finite() {
                return Err(Error::InvalidMeasure("non-finite atom".into()));
            }
            if w <= 0.0 {
                return Err(Error::InvalidMeasure(format!("non-positive weight {w}")));
            }
        }
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = sorted.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        let mut locations: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut weights: Vec<f64> = Vec::with_capacity(sorted.len());
        for (x, w) in sorted {
            match locations.last() {
                Some(&last) if (x - last).abs() <= 1e-12 => *weights.last_mut().unwrap() += w,
                _ => {
                    locations.push(x);
                    weights.push(w);
                }
            }
        }
        for w in &mut weights {
            *w /= total;
        }
        Ok(Self { locations, weights })
    }

    /// Unit mass at `x`.
    pub fn dirac(x: f64) -> Self {
        Self { locations: vec![x], weights: vec![1.0] }
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.locations.iter().copied().zip(self.weights.iter().copied())
    }

    /// Left edge `ℓ_ν` of the support.
    pub fn support_edge(&self) -> f64 {
        self.locations[0]
    }

    /// Right edge of the support.
    pub fn support_right(&self) -> f64 {
        *self.locations.last().unwrap()
    }

    /// The measure translated by `shift`.
    pub fn shifted(&self, shift: f64) -> Self {
        Self {
            locations: self.locations.iter().map(|x| x + shift).collect(),
            weights: self.weights.clone(),
        }
    }

    fn check_off_atoms(&self, x: f64) -> Result<()> {
        if self
            .locations
            .iter()
            .any(|&eta| (x - eta).abs() < 1e-13 * (1.0 + eta.abs()))
        {
            return Err(Error::AtomCollision { x });
        }
        Ok(())
    }

    /// Stieltjes transform `G_ν(x) = Σ αᵢ/(x−ηᵢ)`.
    ///
    /// # Errors
    /// `AtomCollision` when `x` is (numerically) an atom.
    pub fn stieltjes(&self, x: f64) -> Result<f64> {
        self.check_off_atoms(x)?;
        Ok(self.stieltjes_unchecked(x))
    }

    /// `G_ν′(x) = −Σ αᵢ/(x−ηᵢ)²`.
    ///
    /// # Errors
    /// `AtomCollision` when `x` is (numerically) an atom.
    pub fn stieltjes_derivative(&self, x: f64) -> Result<f64> {
        self.check_off_atoms(x)?;
        Ok(self.stieltjes_derivative_unchecked(x))
    }

    /// Logarithmic potential `S_ν(x) = −Σ αᵢ log|x−ηᵢ|`.
    ///
    /// # Errors
    /// `AtomCollision` when `x` is (numerically) an atom.
    pub fn log_potential(&self, x: f64) -> Result<f64> {
        self.check_off_atoms(x)?;
        Ok(self.log_potential_unchecked(x))
    }

    pub(crate) fn stieltjes_unchecked(&self, x: f64) -> f64 {
        self.atoms().map(|(eta, a)| a / (x - eta)).sum()
    }

    pub(crate) fn stieltjes_derivative_unchecked(&self, x: f64) -> f64 {
        -self.inverse_square_moment(x)
    }

    /// `Σ αᵢ/(ηᵢ−x)²`.
    pub(crate) fn inverse_square_moment(&self, x: f64) -> f64 {
        self.atoms()
            .map(|(eta, a)| {
                let d = eta - x;
                a / (d * d)
            })
            .sum()
    }

    pub(crate) fn log_potential_unchecked(&self, x: f64) -> f64 {
        -self.atoms().map(|(eta, a)| a * (x - eta).abs().ln()).sum::<f64>()
    }

    /// The piecewise-linear quantile table of this measure: a flat segment
    /// per atom joined by vertical jumps.
    pub fn to_quantile_table(&self) -> QuantileSpec {
        let mut table = Vec::with_capacity(2 * self.len());
        let mut u = 0.0;
        for (eta, a) in self.atoms() {
            table.push((u, eta));
            u += a;
            table.push((u.min(1.0), eta));
        }
        table.last_mut().unwrap().0 = 1.0;
        QuantileSpec::Table(table)
    }
}

/// A bounded nondecreasing quantile function `η_ν : [0,1] → ℝ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantileSpec {
    /// Uniform law on `[a, b]`.
    Uniform(f64, f64),
    /// Piecewise-linear interpolation of `(u, value)` breakpoints. Repeated
    /// `u` encodes a jump, a flat segment encodes an atom.
    Table(Vec<(f64, f64)>),
}

/// Which of the two discretization maps to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Floor map `D_ε⁻`.
    #[default]
    Lower,
    /// Ceiling map `D_ε⁺`.
    Upper,
}

impl QuantileSpec {
    /// Breakpoints of the quantile function after validation.
    fn segments(&self) -> Result<Vec<(f64, f64)>> {
        let pts = match self {
            QuantileSpec::Uniform(a, b) => {
                if !(a.is_finite() && b.is_finite() && a <= b) {
                    return Err(Error::UnboundedQuantile(format!("uniform({a}, {b})")));
                }
                vec![(0.0, *a), (1.0, *b)]
            }
            QuantileSpec::Table(t) => t.clone(),
        };
        if pts.len() < 2 {
            return Err(Error::UnboundedQuantile("table needs two breakpoints".into()));
        }
        if pts.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::UnboundedQuantile("non-finite breakpoint".into()));
        }
        if pts[0].0 != 0.0 || pts.last().unwrap().0 != 1.0 {
            return Err(Error::UnboundedQuantile("table must span u ∈ [0,1]".into()));
        }
        if pts.windows(2).any(|w| w[1].0 < w[0].0 || w[1].1 < w[0].1) {
            return Err(Error::UnboundedQuantile("table must be nondecreasing".into()));
        }
        Ok(pts)
    }

    /// Value of the quantile function at `u ∈ [0,1]` (right-continuous at
    /// jumps).
    pub fn eval(&self, u: f64) -> Result<f64> {
        let pts = self.segments()?;
        let u = u.clamp(0.0, 1.0);
        let mut value = pts[0].1;
        for w in pts.windows(2) {
            let ((u0, v0), (u1, v1)) = (w[0], w[1]);
            if u >= u0 {
                value = if u1 > u0 && u <= u1 { v0 + (v1 - v0) * (u - u0) / (u1 - u0) } else { v1 };
            }
        }
        Ok(value)
    }

    /// Left end `η_ν(0)` of the support.
    pub fn left_edge(&self) -> Result<f64> {
        Ok(self.segments()?[0].1)
    }

    /// Push the measure forward under the floor (`Lower`) or ceiling
    /// (`Upper`) map onto the grid `edge + qε`.
    ///
    /// # Errors
    /// `UnboundedQuantile` for malformed specifications, `InvalidArgument`
    /// for a non-positive `eps`.
    pub fn discretize(&self, edge: f64, eps: f64, side: Side) -> Result<AtomicMeasure> {
        if !(eps > 0.0 && eps.is_finite()) || !edge.is_finite() {
            return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
        }
        let pts = self.segments()?;
        let cell = |v: f64| -> i64 {
            let r = (v - edge) / eps;
            // Snap values that sit on a grid point up to rounding.
            let nearest = r.round();
            if (r - nearest).abs() <= 1e-9 {
                return nearest as i64;
            }
            match side {
                Side::Lower => r.floor() as i64,
                Side::Upper => r.ceil() as i64,
            }
        };
        let mut mass: std::collections::BTreeMap<i64, f64> = Default::default();
        for w in pts.windows(2) {
            let ((u0, v0), (u1, v1)) = (w[0], w[1]);
            let du = u1 - u0;
            if du <= 0.0 {
                continue;
            }
            if v1 == v0 {
                *mass.entry(cell(v0)).or_default() += du;
                continue;
            }
            // Increasing linear piece: split [v0, v1] at grid points.
            let slope = du / (v1 - v0);
            let q0 = ((v0 - edge) / eps).floor() as i64;
            let q1 = ((v1 - edge) / eps).ceil() as i64;
            for q in q0..q1 {
                let lo = (edge + q as f64 * eps).max(v0);
                let hi = (edge + (q + 1) as f64 * eps).min(v1);
                if hi > lo {
                    let target = match side {
                        Side::Lower => q,
                        Side::Upper => q + 1,
                    };
                    *mass.entry(target).or_default() += (hi - lo) * slope;
                }
            }
        }
        let atoms: Vec<(f64, f64)> = mass
            .into_iter()
            .filter(|&(_, m)| m > 1e-15)
            .map(|(q, m)| (edge + q as f64 * eps, m))
            .collect();
        AtomicMeasure::new(&atoms)
    }
}

/// On-disk measure description.
///
/// Either explicit atoms or a quantile specification, the latter discretized
/// on load with the given `eps` and `side`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantile: Option<QuantileSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
}

impl MeasureFile {
    /// Resolve the description into an atomic measure.
    ///
    /// # Errors
    /// `InvalidMeasure` if neither or both of `atoms`/`quantile` are given or
    /// a quantile comes without `eps`; otherwise the errors of
    /// [`AtomicMeasure::new`] and [`QuantileSpec::discretize`].
    pub fn into_measure(self) -> Result<AtomicMeasure> {
        match (self.atoms, self.quantile) {
            (Some(atoms), None) => AtomicMeasure::new(&atoms),
            (None, Some(q)) => {
                let eps = self
                    .eps
                    .ok_or_else(|| Error::InvalidMeasure("quantile input requires eps".into()))?;
                let edge = q.left_edge()?;
                q.discretize(edge, eps, self.side.unwrap_or_default())
            }
            _ => Err(Error::InvalidMeasure(
                "exactly one of \"atoms\" or \"quantile\" must be given".into(),
            )),
        }
    }

    /// Parse a JSON measure description.
    ///
    /// # Errors
    /// `InvalidMeasure` for malformed JSON, plus the errors of
    /// [`MeasureFile::into_measure`].
    pub fn parse(json: &str) -> Result<AtomicMeasure> {
        let file: MeasureFile =
            serde_json::from_str(json).map_err(|e| Error::InvalidMeasure(e.to_string()))?;
        file.into_measure()
    }
}

impl From<&AtomicMeasure> for MeasureFile {
    fn from(m: &AtomicMeasure) -> Self {
        Self { atoms: Some(m.atoms().collect()), quantile: None, eps: None, side: None }
    }
}

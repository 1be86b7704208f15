//! Finite-N experiments on `X_N = G_N + B_N`, where `G_N` is a GOE matrix of
//! variance `t` and `B_N = diag(Λ, η₁ (N₁ times), …, η_p (N_p times))`.

pub mod eigen;
pub mod rng;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};
use crate::rate::DeformedModel;
use crate::variational::{phi, SimplexVector};
use eigen::{
    is_positive_definite_shifted, smallest_eigenvalue, smallest_eigenvalue_in_place, symmetric_eigen,
    SymMatrix, TridiagWorkspace,
};
use rng::{derive_key, NormalStream};

/// Size, variance and seed of a GOE ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoeSpec {
    pub n: usize,
    pub t: f64,
    pub seed: u64,
}

impl GoeSpec {
    /// # Errors
    /// `InvalidArgument` for `n < 2` or non-positive `t`.
    pub fn new(n: usize, t: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("N must be at least 2, got {n}")));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
        }
        Ok(Self { n, t, seed })
    }
}

/// Fill the lower triangle of `a` (row-major `n×n`) with a GOE sample;
/// entries are drawn row by row over `j ≥ i`.
fn fill_goe_lower(a: &mut [f64], n: usize, t: f64, key: u64, sample_index: u64) {
    let mut z = NormalStream::new(key, sample_index);
    let off = (t / n as f64).sqrt();
    let diag = (2.0 * t / n as f64).sqrt();
    for i in 0..n {
        a[i * n + i] = diag * z.next_normal();
        for j in i + 1..n {
            a[j * n + i] = off * z.next_normal();
        }
    }
}

/// GOE sample number `sample_index` of the ensemble: off-diagonal variance
/// `t/N`, diagonal variance `2t/N`. The Monte Carlo routines draw the same
/// matrices for the same `(seed, N, sample_index)`.
pub fn sample_goe(spec: &GoeSpec, sample_index: u64) -> SymMatrix {
    let n = spec.n;
    let mut a = vec![0.0; n * n];
    fill_goe_lower(&mut a, n, spec.t, derive_key(spec.seed, n as u64), sample_index);
    for i in 0..n {
        for j in 0..i {
            a[j * n + i] = a[i * n + j];
        }
    }
    SymMatrix::from_raw(n, a)
}

/// Split `total` into integer multiplicities proportional to `weights` by
/// the largest-remainder rule (ties to the lower index).
///
/// # Errors
/// `InvalidArgument` if some weight receives multiplicity zero.
pub fn multiplicities(weights: &[f64], total: usize) -> Result<Vec<usize>> {
    let exact: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().take(total.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    if counts.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "N-1 = {total} too small to give every atom a positive multiplicity"
        )));
    }
    Ok(counts)
}

/// Spectrum of `B_N`: the outlier followed by each atom repeated.
///
/// # Errors
/// As for [`multiplicities`].
pub fn b_spectrum(model: &DeformedModel, n: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    let counts = multiplicities(model.nu().weights(), n - 1)?;
    let mut b = Vec::with_capacity(n);
    b.push(model.outlier());
    for (eta, &c) in model.nu().locations().iter().zip(&counts) {
        b.extend(std::iter::repeat_n(*eta, c));
    }
    Ok((b, counts))
}

/// One draw of `X_N = G_N + B_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformedSample {
    pub matrix: SymMatrix,
    /// Diagonal of `B_N`, outlier first.
    pub b_diag: Vec<f64>,
    /// `(N₁, …, N_p)`.
    pub multiplicities: Vec<usize>,
}

/// Assemble `G_N + B_N` for sample `sample_index`.
///
/// # Errors
/// As for [`multiplicities`].
pub fn build_deformed(spec: &GoeSpec, model: &DeformedModel, sample_index: u64) -> Result<DeformedSample> {
    let (b_diag, counts) = b_spectrum(model, spec.n)?;
    let mut matrix = sample_goe(spec, sample_index);
    for (i, b) in b_diag.iter().enumerate() {
        let v = matrix.get(i, i) + b;
        matrix.set(i, i, v);
    }
    Ok(DeformedSample { matrix, b_diag, multiplicities: counts })
}

/// Squared projections of `v1` on the eigenspaces of `B_N`: the outlier
/// coordinate, then one block per atom.
///
/// # Errors
/// `InvalidArgument` if `v1` has the wrong length or is not a unit vector
/// (to `1e-12`).
pub fn eigenvector_masses(sample: &DeformedSample, v1: &[f64]) -> Result<SimplexVector> {
    masses_for_blocks(&sample.multiplicities, v1)
}

fn masses_for_blocks(counts: &[usize], v1: &[f64]) -> Result<SimplexVector> {
    let n = 1 + counts.iter().sum::<usize>();
    if v1.len() != n {
        return Err(Error::InvalidArgument(format!("vector has length {}, need {n}", v1.len())));
    }
    let norm2: f64 = v1.iter().map(|x| x * x).sum();
    if (norm2 - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("vector is not unit: |v|² = {norm2}")));
    }
    let mut y = Vec::with_capacity(counts.len() + 1);
    y.push(v1[0] * v1[0]);
    let mut start = 1;
    for &c in counts {
        y.push(v1[start..start + c].iter().map(|x| x * x).sum::<f64>() / norm2);
        start += c;
    }
    y[0] /= norm2;
    SimplexVector::new(y)
}

/// Smallest eigenvalue of `B_N` compressed to `v1⊥`, computed two ways: by
/// the eigensolver on the explicit `(N−1)×(N−1)` compression, and as
/// `Φ(Λ, Y(v1))` from the secular equation. Returns `(eigensolver, Φ)`.
///
/// # Errors
/// `DegenerateDirection` if some mass of `v1` is 0 or 1 within `1e-10`;
/// `InvalidArgument` for a non-unit or wrongly sized `v1`.
pub fn projected_outlier_check(
    model: &DeformedModel,
    sample: &DeformedSample,
    v1: &[f64],
) -> Result<(f64, f64)> {
    let y = eigenvector_masses(sample, v1)?;
    if let Some(&m) = y.as_slice().iter().find(|&&m| !(1e-10..=1.0 - 1e-10).contains(&m)) {
        return Err(Error::DegenerateDirection { mass: m });
    }
    let n = v1.len();
    let b = &sample.b_diag;
    // Householder reflector P with P v1 = s e₀; columns 1.. span v1⊥.
    let s = if v1[0] > 0.0 { -1.0 } else { 1.0 };
    let mut u = v1.to_vec();
    u[0] -= s;
    let beta = 2.0 / u.iter().map(|x| x * x).sum::<f64>();
    let bu: Vec<f64> = b.iter().zip(&u).map(|(bi, ui)| bi * ui).collect();
    let ubu: f64 = bu.iter().zip(&u).map(|(x, y)| x * y).sum();
    let mut c = SymMatrix::zeros(n - 1);
    for i in 1..n {
        for j in 1..=i {
            let mut v = -beta * (u[i] * bu[j] + bu[i] * u[j]) + beta * beta * ubu * u[i] * u[j];
            if i == j {
                v += b[i];
            }
            c.set(i - 1, j - 1, v);
        }
    }
    let eig = smallest_eigenvalue(&c);
    let p = phi(model, &y)?;
    debug_assert!(eig >= model.outlier() - 1e-9 && eig <= model.nu().support_edge() + 1e-9);
    Ok((eig, p))
}

/// Summary of a Monte Carlo experiment on the smallest eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    /// Matrix size.
    pub n: usize,
    pub n_samples: usize,
    /// Samples with `|λ₁ − center| ≤ window`.
    pub n_hits: usize,
    /// Hit frequency for tail estimates, mean of `λ₁` for convergence runs.
    pub estimate: f64,
    pub std_error: f64,
    /// `−log(max(hits, 1)/n_samples)/N`.
    pub empirical_rate: f64,
    /// `true` when no sample hit and `empirical_rate` is only a bound.
    pub zero_hits: bool,
    pub center: f64,
    pub window: f64,
    pub seed: u64,
}

impl McReport {
    fn from_values(values: &[f64], n: usize, center: f64, window: f64, seed: u64) -> Self {
        let ns = values.len() as f64;
        let n_hits = values.iter().filter(|v| (**v - center).abs() <= window).count();
        let mean = values.iter().sum::<f64>() / ns;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (ns - 1.0).max(1.0);
        Self::build(n, values.len(), n_hits, mean, (var / ns).sqrt(), center, window, seed)
    }

    fn from_hits(n: usize, n_samples: usize, n_hits: usize, center: f64, window: f64, seed: u64) -> Self {
        let ns = n_samples as f64;
        let p = n_hits as f64 / ns;
        Self::build(n, n_samples, n_hits, p, (p * (1.0 - p) / ns).sqrt(), center, window, seed)
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        n: usize,
        n_samples: usize,
        n_hits: usize,
        estimate: f64,
        std_error: f64,
        center: f64,
        window: f64,
        seed: u64,
    ) -> Self {
        Self {
            n,
            n_samples,
            n_hits,
            estimate,
            std_error,
            empirical_rate: -((n_hits.max(1) as f64) / n_samples as f64).ln() / n as f64,
            zero_hits: n_hits == 0,
            center,
            window,
            seed,
        }
    }
}

/// Default window `0.05 (ℓ_{ν,t} − ℓ^Λ + 1)`.
pub fn default_window(model: &DeformedModel) -> f64 {
    0.05 * (model.ctx().edge() - model.limit_smallest() + 1.0)
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(pool.install(f))
}

/// `λ₁(G_N + B_N)` for samples `0..n_samples`, in sample order.
fn smallest_eigenvalues(
    model: &DeformedModel,
    n: usize,
    n_samples: usize,
    key: u64,
    workers: usize,
) -> Result<Vec<f64>> {
    let (b, _) = b_spectrum(model, n)?;
    let t = model.t();
    with_workers(workers, || {
        (0..n_samples as u64)
            .into_par_iter()
            .map_init(
                || (vec![0.0; n * n], TridiagWorkspace::new(n)),
                |(a, ws), i| {
                    fill_goe_lower(a, n, t, key, i);
                    for (k, bk) in b.iter().enumerate() {
                        a[k * n + k] += bk;
                    }
                    smallest_eigenvalue_in_place(a, n, ws)
                },
            )
            .collect()
    })
}

/// Mean smallest eigenvalue for each `N` in `n_list`, compared with the
/// almost-sure limit `ℓ^Λ`; hits count samples within `0.05` of it.
///
/// `workers = 0` uses the default thread count. The reports depend only on
/// `(seed, n_samples)`.
///
/// # Errors
/// `InvalidArgument` for `N < 2`, too few samples, or a bad multiplicity
/// split.
pub fn convergence_check(
    model: &DeformedModel,
    n_list: &[usize],
    n_samples: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<McReport>> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument("need at least 2 samples".into()));
    }
    let center = model.limit_smallest();
    n_list
        .iter()
        .map(|&n| {
            GoeSpec::new(n, model.t(), seed)?;
            let values = smallest_eigenvalues(model, n, n_samples, derive_key(seed, n as u64), workers)?;
            Ok(McReport::from_values(&values, n, center, 0.05, seed))
        })
        .collect()
}

/// Estimate `P(|λ₁ − x| ≤ window)` and the empirical rate
/// `−log P̂ / N`.
///
/// # Errors
/// `InvalidArgument` for a non-positive window, no samples, or a bad
/// multiplicity split.
pub fn ldp_tail_estimate(
    model: &DeformedModel,
    n: usize,
    x: f64,
    window: f64,
    n_samples: usize,
    seed: u64,
    workers: usize,
) -> Result<McReport> {
    if !(window > 0.0) || n_samples == 0 {
        return Err(Error::InvalidArgument("need window > 0 and n_samples > 0".into()));
    }
    GoeSpec::new(n, model.t(), seed)?;
    let n_hits = count_window_hits(model, n, n_samples, derive_key(seed, n as u64), x, window, workers)?;
    Ok(McReport::from_hits(n, n_samples, n_hits, x, window, seed))
}

/// Number of samples whose smallest eigenvalue lies in `[x − w, x + w]`,
/// decided by two definiteness tests instead of an eigenvalue computation:
/// `λ₁ ≥ x − w` iff `X − (x−w)I ⪰ 0` and `λ₁ ≤ x + w` iff `X − (x+w)I` is
/// not positive definite.
fn count_window_hits(
    model: &DeformedModel,
    n: usize,
    n_samples: usize,
    key: u64,
    x: f64,
    window: f64,
    workers: usize,
) -> Result<usize> {
    let (b, _) = b_spectrum(model, n)?;
    let t = model.t();
    with_workers(workers, || {
        (0..n_samples as u64)
            .into_par_iter()
            .map_init(
                || (vec![0.0; n * n], vec![0.0; n * n]),
                |(a, work), i| {
                    fill_goe_lower(a, n, t, key, i);
                    for (k, bk) in b.iter().enumerate() {
                        a[k * n + k] += bk;
                    }
                    work.copy_from_slice(a);
                    if is_positive_definite_shifted(work, n, x + window) {
                        return 0;
                    }
                    work.copy_from_slice(a);
                    usize::from(is_positive_definite_shifted(work, n, x - window))
                },
            )
            .sum()
    })
}

/// Sample mean of one mass coordinate against its Dirichlet mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateCheck {
    pub expected: f64,
    pub mean: f64,
    pub std_error: f64,
    /// `(mean − expected)/std_error`.
    pub z: f64,
}

/// Eigenvector masses of the bottom eigenvector under the reference GOE
/// law, against the Dirichlet law of a uniform unit vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletReport {
    pub n: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub multiplicities: Vec<usize>,
    /// Outlier coordinate first.
    pub coordinates: Vec<CoordinateCheck>,
    /// Kolmogorov distance of the `Y₁` sample to `Beta(N₁/2, (N−N₁)/2)`.
    pub ks_y1: f64,
    /// Largest deviation of a mass sum from one.
    pub max_sum_error: f64,
}

/// Check that the masses `Y` of the bottom eigenvector of a GOE matrix on
/// the eigenspaces of `B_N` follow the Dirichlet law with mean
/// `(1/N, N₁/N, …, N_p/N)`.
///
/// The eigenvectors of the undeformed GOE are Haar distributed, which is the
/// reference law of the eigenvector in the change of variables.
///
/// # Errors
/// `InvalidArgument` for fewer than 2 samples or a bad multiplicity split.
pub fn dirichlet_law_check(
    spec: &GoeSpec,
    model: &DeformedModel,
    n_samples: usize,
    workers: usize,
) -> Result<DirichletReport> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument("need at least 2 samples".into()));
    }
    let n = spec.n;
    let counts = multiplicities(model.nu().weights(), n - 1)?;
    let samples: Vec<Vec<f64>> = with_workers(workers, || {
        (0..n_samples as u64)
            .into_par_iter()
            .map(|i| {
                let eig = symmetric_eigen(&sample_goe(spec, i));
                let v = eig.vector(0);
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let v: Vec<f64> = v.iter().map(|x| x / norm).collect();
                masses_for_blocks(&counts, &v).map(|y| y.as_slice().to_vec())
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let ns = n_samples as f64;
    let mut expected = vec![1.0 / n as f64];
    expected.extend(counts.iter().map(|&c| c as f64 / n as f64));
    let coordinates = expected
        .iter()
        .enumerate()
        .map(|(k, &e)| {
            let mean = samples.iter().map(|y| y[k]).sum::<f64>() / ns;
            let var = samples.iter().map(|y| (y[k] - mean).powi(2)).sum::<f64>() / (ns - 1.0);
            let std_error = (var / ns).sqrt();
            CoordinateCheck { expected: e, mean, std_error, z: (mean - e) / std_error }
        })
        .collect();
    let max_sum_error = samples
        .iter()
        .map(|y| (y.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let n1 = counts[0] as f64;
    let beta = Beta::new(n1 / 2.0, (n as f64 - n1) / 2.0)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut y1: Vec<f64> = samples.iter().map(|y| y[1]).collect();
    y1.sort_by(f64::total_cmp);
    let ks_y1 = y1
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = beta.cdf(v);
            (f - i as f64 / ns).abs().max(((i + 1) as f64 / ns - f).abs())
        })
        .fold(0.0, f64::max);
    Ok(DirichletReport {
        n,
        n_samples,
        seed: spec.seed,
        multiplicities: counts,
        coordinates,
        ks_y1,
        max_sum_error,
    })
}

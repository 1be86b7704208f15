//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the report is printed by a plain `cargo test`.

use std::time::{Duration, Instant};

use outlier_ldp::free_conv::FreeConvContext;
use outlier_ldp::measure::AtomicMeasure;
use outlier_ldp::prior::{maida_rate, mckenna_rate};
use outlier_ldp::rate::{DeformedModel, ExtendedReal};
use outlier_ldp::rmt::rng::NormalStream;
use outlier_ldp::rmt::{
    build_deformed, convergence_check, default_window, dirichlet_law_check, ldp_tail_estimate,
    projected_outlier_check, GoeSpec, McReport,
};
use outlier_ldp::variational::{fixed_point_residual, selberg_ratio};

/// Reference spot value of the GOE rate at `x = −3`. It disagrees with the
/// closed form in the fifth digit, so the difference is reported, not asserted.
const QUOTED_GOE_SPOT: f64 = 0.714651;

struct Outcome {
    pass: bool,
    detail: String,
}

fn model(atoms: &[(f64, f64)], t: f64, outlier: f64) -> DeformedModel {
    DeformedModel::new(AtomicMeasure::new(atoms).unwrap(), t, outlier).unwrap()
}

fn two_atoms() -> AtomicMeasure {
    AtomicMeasure::new(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap()
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn finite(v: ExtendedReal) -> f64 {
    v.finite().expect("finite rate")
}

/// Adaptive Simpson quadrature.
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

/// `½ ∫_x^{−2} √(z²−4) dz`, substituting `z = −2 cosh s`.
fn goe_oracle(x: f64) -> f64 {
    let s_max = (-x / 2.0).acosh();
    0.5 * simpson(&|s: f64| 4.0 * s.sinh().powi(2), 0.0, s_max, 1e-15)
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let m = model(&[(0.0, 1.0)], 1.0, 0.0);
    let max_err = linspace(-6.0, -2.05, 50)
        .into_iter()
        .map(|x| (finite(m.rate(x)) - goe_oracle(x)).abs())
        .fold(0.0, f64::max);
    let spot = finite(m.rate(-3.0));
    let spot_err = (spot - goe_oracle(-3.0)).abs();
    let el = start.elapsed();
    Outcome {
        pass: max_err <= 1e-8 && spot_err <= 1e-6 && within(el, 1.0),
        detail: format!(
            "max |rate − quadrature| = {max_err:.1e} on 50 points; I(−3) = {spot:.10} (oracle diff {spot_err:.1e}; \
             reference {QUOTED_GOE_SPOT} differs by {:.1e}); {:.2} s",
            (spot - QUOTED_GOE_SPOT).abs(),
            el.as_secs_f64()
        ),
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut max_err: f64 = 0.0;
    let mut branches = [0usize; 2];
    for lam in [-1.5, -1.0, -0.9] {
        let m = DeformedModel::new(AtomicMeasure::dirac(0.0), 0.5, lam).unwrap();
        let rho = lam + 1.0 / (2.0 * lam);
        for x in linspace(-4.0, -(2f64.sqrt()) - 1e-3, 50) {
            let prior = finite(maida_rate(lam, x).unwrap());
            max_err = max_err.max((prior - finite(m.rate(x))).abs());
            branches[usize::from(x > rho)] += 1;
        }
    }
    let el = start.elapsed();
    Outcome {
        pass: max_err <= 1e-8 && branches.iter().all(|&b| b > 0) && within(el, 1.0),
        detail: format!(
            "max |maida − rate| = {max_err:.1e} over 3×50 points ({} left of ρ, {} right); {:.2} s",
            branches[0],
            branches[1],
            el.as_secs_f64()
        ),
    }
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut max_err: f64 = 0.0;
    for nu in [AtomicMeasure::dirac(0.0), two_atoms()] {
        let m = DeformedModel::new(nu.clone(), 1.0, nu.support_edge()).unwrap();
        let edge = m.ctx().edge();
        for x in linspace(edge - 3.0, edge - 0.01, 30) {
            max_err = max_err.max((mckenna_rate(&nu, x).unwrap() - finite(m.rate(x))).abs());
        }
    }
    let el = start.elapsed();
    Outcome {
        pass: max_err <= 1e-6 && within(el, 5.0),
        detail: format!("max |mckenna − rate| = {max_err:.1e} over 2×30 points; {:.2} s", el.as_secs_f64()),
    }
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let fixtures = [
        model(&[(1.0, 1.0)], 1.0, -1.0),
        model(&[(-1.0, 0.5), (1.0, 0.5)], 1.0, -1.5),
        model(&[(-1.0, 0.2), (0.0, 0.5), (2.0, 0.3)], 0.5, -3.0),
    ];
    let mut worst: f64 = 0.0;
    let mut cases = [0usize; 3];
    let mut errors = 0;
    for (f, m) in fixtures.iter().enumerate() {
        let ctx = m.ctx();
        let rho = m.rho().unwrap();
        for (i, l) in linspace(ctx.edge() - 3.0, ctx.edge() - 0.01, 10).into_iter().enumerate() {
            if m.outlier() >= ctx.shock_point() {
                cases[0] += 1;
            } else if l <= rho {
                cases[1] += 1;
            } else if m.outlier() < ctx.subordination_lower(l).unwrap() {
                cases[2] += 1;
            }
            match fixed_point_residual(m, l, 50, (f * 10 + i) as u64) {
                Ok(r) => worst = worst.max(r.residual),
                Err(_) => errors += 1,
            }
        }
    }
    let el = start.elapsed();
    Outcome {
        pass: errors == 0 && worst <= 1e-6 && cases.iter().all(|&c| c > 0) && within(el, 30.0),
        detail: format!(
            "max residual {worst:.1e} over 3×10 points with 50 restarts (cases {cases:?}, {errors} errors); {:.2} s",
            el.as_secs_f64()
        ),
    }
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let m = DeformedModel::new(two_atoms(), 1.0, -2.0).unwrap();
    let spec = GoeSpec::new(200, 1.0, 2024).unwrap();
    let sample = build_deformed(&spec, &m, 0).unwrap();
    let mut stream = NormalStream::new(7, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let v: Vec<f64> = (0..200).map(|_| stream.next_normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let v: Vec<f64> = v.into_iter().map(|x| x / norm).collect();
        let (eig, phi) = projected_outlier_check(&m, &sample, &v).unwrap();
        worst = worst.max((eig - phi).abs());
    }
    let el = start.elapsed();
    Outcome {
        pass: worst <= 1e-8 && within(el, 10.0),
        detail: format!("max |eigensolver − secular root| = {worst:.1e} over 100 directions at N=200; {:.2} s", el.as_secs_f64()),
    }
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let contexts: Vec<FreeConvContext> = [
        (vec![(0.0, 1.0)], 1.0),
        (vec![(-1.0, 0.5), (1.0, 0.5)], 1.0),
        (vec![(-1.0, 0.2), (0.0, 0.5), (2.0, 0.3)], 0.5),
        (vec![(-3.0, 0.5), (3.0, 0.5)], 0.3),
    ]
    .into_iter()
    .map(|(a, t)| FreeConvContext::new(AtomicMeasure::new(&a).unwrap(), t).unwrap())
    .collect();
    let (mut branch, mut ident, mut norm, mut hopf): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for ctx in &contexts {
        for i in 0..200 {
            let x = ctx.edge() - 8.0 * ((i as f64 + 0.5) / 200.0).powi(2);
            let lo = ctx.subordination_lower(x).unwrap();
            let up = ctx.subordination_upper(x).unwrap();
            let scale = 1.0 + x.abs();
            branch = branch.max((ctx.h_transform(lo).unwrap() - x).abs() / scale);
            branch = branch.max((ctx.h_transform(up).unwrap() - x).abs() / scale);
            ident = ident.max((lo + ctx.t() * ctx.stieltjes_conv(x).unwrap() - x).abs());
        }
        norm = norm.max((ctx.density_curve(4000).unwrap().total_mass() - 1.0).abs());
        let fine = ctx.density_curve(20000).unwrap();
        for i in 0..20 {
            let x = ctx.edge() - 0.1 - 0.3 * i as f64;
            let quad = fine.integrate(|y| (y - x).abs().ln());
            hopf = hopf.max((quad - ctx.log_potential_conv(x).unwrap()).abs());
        }
    }
    let two = &contexts[1];
    let shock_err = (two.shock_point() + 3f64.sqrt()).abs();
    let edge_err = (two.edge() + 1.5 * 3f64.sqrt()).abs();
    let el = start.elapsed();
    Outcome {
        pass: branch <= 1e-12
            && ident <= 1e-10
            && norm <= 1e-6
            && hopf <= 1e-6
            && shock_err <= 1e-10
            && edge_err <= 1e-10
            && within(el, 5.0),
        detail: format!(
            "branch residual {branch:.1e}, subordination identity {ident:.1e}, normalization {norm:.1e}, \
             log-potential vs quadrature {hopf:.1e}, shock {shock_err:.1e}, edge {edge_err:.1e}; {:.2} s",
            el.as_secs_f64()
        ),
    }
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let r = selberg_ratio(2000, 1.0).unwrap();
    let el = start.elapsed();
    Outcome {
        pass: (r - 0.5).abs() <= 0.02 && within(el, 1.0),
        detail: format!("ratio at N=2000, t=1: {r:.6}; {:.3} s", el.as_secs_f64()),
    }
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let fixtures = [
        model(&[(0.0, 1.0)], 1.0, 0.0),
        model(&[(1.0, 1.0)], 1.0, -1.0),
        model(&[(-1.0, 0.5), (1.0, 0.5)], 1.0, -2.0),
        model(&[(-1.0, 0.5), (1.0, 0.5)], 1.0, -1.5),
        model(&[(-1.0, 0.2), (0.0, 0.5), (2.0, 0.3)], 0.5, -3.0),
    ];
    let (mut min_d2, mut max_zero, mut max_deriv, mut max_growth) = (f64::INFINITY, 0.0f64, 0.0f64, 0.0f64);
    let mut min_side = f64::INFINITY;
    for m in &fixtures {
        let rate = |l: f64| finite(m.rate(l));
        let edge = m.ctx().edge();
        let rho = m.rho().unwrap_or(f64::NEG_INFINITY);
        let ell = m.limit_smallest();
        max_zero = max_zero.max(rate(ell).abs());
        min_side = min_side.min(rate(ell - 0.05));
        if ell + 0.05 <= edge {
            min_side = min_side.min(rate(ell + 0.05));
        }
        for i in 0..100 {
            let l = edge - 4.0 + 4.0 * (i as f64 + 0.5) / 100.0;
            if (l - rho).abs() < 1e-3 || edge - l < 1e-3 {
                continue;
            }
            let h = 1e-4;
            min_d2 = min_d2.min(rate(l + h) - 2.0 * rate(l) + rate(l - h));
            let d = m.rate_derivative(l).unwrap();
            if d.abs() >= 1e-3 {
                let hd = 1e-5;
                let fd = (rate(l + hd) - rate(l - hd)) / (2.0 * hd);
                max_deriv = max_deriv.max((fd - d).abs() / d.abs());
            }
        }
        let l = -1e4;
        max_growth = max_growth.max((rate(l) / (l * l) * 4.0 * m.t() - 1.0).abs());
    }
    let el = start.elapsed();
    Outcome {
        pass: min_d2 > 0.0
            && max_zero <= 1e-12
            && min_side > 0.0
            && max_deriv <= 1e-6
            && max_growth <= 5e-3
            && within(el, 2.0),
        detail: format!(
            "min second difference {min_d2:.2e}, rate at limit {max_zero:.1e}, min rate at limit±0.05 {min_side:.2e}, \
             derivative rel. err {max_deriv:.1e}, growth constant rel. err {max_growth:.1e} at −1e4; {:.2} s",
            el.as_secs_f64()
        ),
    }
}

/// Serialized reports of the three Monte Carlo experiments.
struct McRun {
    convergence: Vec<(DeformedModel, Vec<McReport>)>,
    ldp: (f64, McReport),
    dirichlet: String,
    seconds: [f64; 3],
}

impl McRun {
    fn bytes(&self) -> Vec<u8> {
        let conv: Vec<&Vec<McReport>> = self.convergence.iter().map(|c| &c.1).collect();
        let mut out = serde_json::to_vec(&conv).unwrap();
        out.extend(serde_json::to_vec(&self.ldp.1).unwrap());
        out.extend(self.dirichlet.as_bytes());
        out
    }
}

fn monte_carlo(workers: usize) -> McRun {
    let start = Instant::now();
    let convergence: Vec<(DeformedModel, Vec<McReport>)> = [
        model(&[(1.0, 1.0)], 1.0, -1.0),
        model(&[(-1.0, 0.5), (1.0, 0.5)], 1.0, -2.5),
        model(&[(-1.0, 0.5), (1.0, 0.5)], 1.0, -1.5),
    ]
    .into_iter()
    .enumerate()
    .map(|(i, m)| {
        let r = convergence_check(&m, &[400], 2000, 100 + i as u64, workers).unwrap();
        (m, r)
    })
    .collect();
    let t_conv = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let m = model(&[(1.0, 1.0)], 1.0, -1.0);
    let x = m.point_with_rate(0.02).unwrap();
    let report = ldp_tail_estimate(&m, 150, x, default_window(&m), 200_000, 7, workers).unwrap();
    let t_ldp = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let m = model(&[(-1.0, 0.5), (1.0, 0.5)], 1.0, -2.0);
    let spec = GoeSpec::new(100, 1.0, 11).unwrap();
    let dirichlet = serde_json::to_string(&dirichlet_law_check(&spec, &m, 5000, workers).unwrap()).unwrap();
    let t_dir = start.elapsed().as_secs_f64();
    McRun { convergence, ldp: (x, report), dirichlet, seconds: [t_conv, t_ldp, t_dir] }
}

fn criterion_9(run: &McRun) -> Outcome {
    let deviations: Vec<f64> = run
        .convergence
        .iter()
        .map(|(m, r)| (r[0].estimate - m.limit_smallest()).abs())
        .collect();
    let conv_ok = deviations.iter().all(|d| *d <= 0.05) && run.seconds[0] < 120.0;

    let (x, report) = &run.ldp;
    let ratio = report.empirical_rate / 0.02;
    let ldp_ok = !report.zero_hits && (0.6..=1.6).contains(&ratio) && run.seconds[1] < 600.0;

    let d: outlier_ldp::rmt::DirichletReport = serde_json::from_str(&run.dirichlet).unwrap();
    let max_z = d.coordinates.iter().map(|c| c.z.abs()).fold(0.0, f64::max);
    let dir_ok = max_z <= 5.0 && run.seconds[2] < 60.0;
    Outcome {
        pass: conv_ok && ldp_ok && dir_ok,
        detail: format!(
            "[{}] |mean λ₁ − limit| at N=400, n=2000: {:.4}, {:.4}, {:.4} ({:.0} s); \
             [{}] empirical rate at x={x:.4} (N=150, n=2e5, {} hits, window {:.3}) = {:.5} = {ratio:.3}× target 0.02 ({:.0} s); \
             [{}] Dirichlet max |z| = {max_z:.2} over {} coordinates (N=100, n=5000) ({:.0} s)",
            if conv_ok { "ok" } else { "FAIL" },
            deviations[0],
            deviations[1],
            deviations[2],
            run.seconds[0],
            if ldp_ok { "ok" } else { "FAIL" },
            report.n_hits,
            report.window,
            report.empirical_rate,
            run.seconds[1],
            if dir_ok { "ok" } else { "FAIL" },
            d.coordinates.len(),
            run.seconds[2],
        ),
    }
}

fn criterion_10(first: &McRun, second: &McRun) -> Outcome {
    let (a, b) = (first.bytes(), second.bytes());
    Outcome {
        pass: a == b,
        detail: format!("criterion 9 reports with 1 and 3 workers: {} bytes, identical = {}", a.len(), a == b),
    }
}

fn main() {
    // Respect libtest's filtering convention loosely: `--list` prints nothing.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut all_pass = true;
    let mut report = |id: usize, name: &str, o: Outcome| {
        all_pass &= o.pass;
        println!("criterion {id:>2} {}  {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    };
    report(1, "GOE closed form", criterion_1());
    report(2, "rank-one GOE(1/2) closed form", criterion_2());
    report(3, "no-outlier variational formula", criterion_3());
    report(4, "fixed-point equation", criterion_4());
    report(5, "secular equation of the projected matrix", criterion_5());
    report(6, "free convolution suite", criterion_6());
    report(7, "Selberg ratio", criterion_7());
    report(8, "rate function shape", criterion_8());
    let first = monte_carlo(1);
    report(9, "Monte Carlo", criterion_9(&first));
    let second = monte_carlo(3);
    report(10, "determinism across worker counts", criterion_10(&first, &second));
    if !all_pass {
        std::process::exit(1);
    }
}

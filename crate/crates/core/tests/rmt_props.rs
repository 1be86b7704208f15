use outlier_ldp::measure::AtomicMeasure;
use outlier_ldp::rate::DeformedModel;
use outlier_ldp::rmt::eigen::{eigenvalues, smallest_eigenvalue, symmetric_eigen, SymMatrix};
use outlier_ldp::rmt::rng::NormalStream;
use outlier_ldp::rmt::{build_deformed, convergence_check, projected_outlier_check, sample_goe, GoeSpec};

fn random_unit(n: usize, stream: &mut NormalStream) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| stream.next_normal()).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

#[test]
fn eigensolver_reconstruction_and_orthogonality() {
    for (n, seed) in [(2, 1), (7, 2), (64, 3), (200, 4), (500, 5)] {
        let spec = GoeSpec::new(n, 1.0, seed).unwrap();
        let mut m = sample_goe(&spec, 0);
        // A repeated diagonal block makes the spectrum strongly clustered.
        for i in 0..n / 2 {
            m.set(i, i, m.get(i, i) + 3.0);
        }
        let eig = symmetric_eigen(&m);
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        let scale = m.max_abs();
        let mut max_rec: f64 = 0.0;
        let mut max_orth: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let rec: f64 = (0..n).map(|k| eig.vectors[i * n + k] * eig.values[k] * eig.vectors[j * n + k]).sum();
                max_rec = max_rec.max((rec - m.get(i, j)).abs());
                let dot: f64 = (0..n).map(|k| eig.vectors[k * n + i] * eig.vectors[k * n + j]).sum();
                max_orth = max_orth.max((dot - f64::from(u8::from(i == j))).abs());
            }
        }
        assert!(max_rec <= 1e-10 * scale, "n={n}: reconstruction {max_rec}");
        assert!(max_orth <= 1e-10, "n={n}: orthogonality {max_orth}");
        let fast = eigenvalues(&m);
        for (a, b) in fast.iter().zip(&eig.values) {
            assert!((a - b).abs() <= 1e-11 * scale);
        }
        assert!((smallest_eigenvalue(&m) - eig.values[0]).abs() <= 1e-12 * scale);
    }
}

#[test]
fn projected_outlier_equals_secular_root() {
    let model = DeformedModel::new(AtomicMeasure::new(&[(-1.0, 0.5), (1.0, 0.5)]).unwrap(), 1.0, -2.0).unwrap();
    let spec = GoeSpec::new(200, 1.0, 17).unwrap();
    let sample = build_deformed(&spec, &model, 0).unwrap();
    let mut stream = NormalStream::new(99, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let v = random_unit(200, &mut stream);
        let (eig, phi) = projected_outlier_check(&model, &sample, &v).unwrap();
        // Interlacing: the compression's bottom eigenvalue lies between the
        // two smallest eigenvalues of B.
        assert!((-2.0..=-1.0).contains(&eig));
        worst = worst.max((eig - phi).abs());
    }
    assert!(worst <= 1e-8, "{worst}");
}

#[test]
fn eigenvalues_interlace_under_rank_one_change() {
    let spec = GoeSpec::new(40, 1.0, 6).unwrap();
    let a = sample_goe(&spec, 3);
    let mut b = a.clone();
    b.set(0, 0, a.get(0, 0) - 5.0);
    let (ea, eb) = (eigenvalues(&a), eigenvalues(&b));
    // Lowering one diagonal entry moves every eigenvalue down by at most one slot.
    for k in 0..40 {
        assert!(eb[k] <= ea[k] + 1e-12);
        if k > 0 {
            assert!(eb[k] >= ea[k - 1] - 1e-12);
        }
    }
}

#[test]
fn convergence_reports_are_worker_independent() {
    let model = DeformedModel::new(AtomicMeasure::dirac(1.0), 1.0, -1.0).unwrap();
    let a = convergence_check(&model, &[20, 40], 100, 5, 1).unwrap();
    let b = convergence_check(&model, &[20, 40], 100, 5, 4).unwrap();
    assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
    assert!(a.iter().all(|r| (r.estimate - r.center).abs() < 0.3));
}

#[test]
fn from_rows_validates() {
    assert!(SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_ok());
    assert!(SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.5, 1.0]]).is_err());
    assert!(SymMatrix::from_rows(&[vec![1.0, 2.0]]).is_err());
}

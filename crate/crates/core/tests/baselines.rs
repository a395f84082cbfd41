use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bdr_core::baselines::{cca, joint_samples, pca, SampleMoments, Which};
use bdr_core::linalg::{orthonormalize, Matrix};
use bdr_core::problems::{LinearForwardKind, LinearGaussianConfig, LinearGaussianProblem};
use bdr_core::spectral::principal_angles;

fn spd(n: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    let a = Matrix::<f64>::random_normal(n, n, rng);
    let mut s = a.t_matmul(&a).unwrap();
    s.add_diag(0.5);
    s.symmetrize();
    s
}

fn random_linear(d: usize, m: usize, seed: u64) -> LinearGaussianProblem<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Matrix::<f64>::random_normal(m, d, &mut rng);
    let pr = spd(d, &mut rng);
    let obs = spd(m, &mut rng);
    LinearGaussianProblem::from_parts(g, vec![0.0; d], pr, obs).unwrap()
}

#[test]
fn sample_covariance_converges_to_prior() {
    let p = LinearGaussianProblem::<f64>::new(&LinearGaussianConfig::default()).unwrap();
    let (xs, ys) = joint_samples(p.model(), 100_000, 3).unwrap();
    let mo = SampleMoments::from_samples(&xs, &ys).unwrap();
    assert_eq!(mo.n, 100_000);
    let rel = mo.cov_x.rel_diff(&p.prior_cov);
    assert!(rel <= 0.05, "relative Frobenius error {rel}");
}

#[test]
fn exact_moments_round_trip() {
    let p = random_linear(3, 2, 1);
    let mo = p.exact_moments().unwrap();
    let again = SampleMoments::exact(
        mo.mean_x.clone(),
        mo.mean_y.clone(),
        mo.cov_x.clone(),
        mo.cov_y.clone(),
        mo.cov_xy.clone(),
    )
    .unwrap();
    assert_eq!(again.cov_x, p.prior_cov);
    assert_eq!(again.cov_xy, mo.cov_xy);
    assert!(SampleMoments::exact(vec![0.0], vec![0.0], Matrix::identity(2), Matrix::identity(1), Matrix::zeros(1, 1)).is_err());
}

#[test]
fn pca_of_white_prior_is_flat() {
    // Y = GX + ε with standard normal X: Cov(X) = I, every direction equally likely.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = Matrix::<f64>::random_normal(4, 6, &mut rng);
    let p = LinearGaussianProblem::from_parts(g, vec![0.0; 6], Matrix::identity(6), Matrix::identity(4)).unwrap();
    let mo = p.exact_moments().unwrap();
    let pc = pca(&mo, Which::X).unwrap();
    assert!(pc.scores.iter().all(|&s| (s - 1.0).abs() < 1e-12));
    let py = pca(&mo, Which::Y).unwrap();
    assert!(py.scores.windows(2).all(|w| w[0] >= w[1]));
    assert!(py.scores.iter().all(|&s| s >= 1.0 - 1e-12));
}

#[test]
fn pca_reconstruction_residual_matches_tail_variance() {
    let cfg = LinearGaussianConfig { d: 20, m: 20, forward: LinearForwardKind::Gaussian, ..Default::default() };
    let p = LinearGaussianProblem::<f64>::new(&cfg).unwrap();
    let (fit_x, fit_y) = joint_samples(p.model(), 10_000, 21).unwrap();
    let mo = SampleMoments::from_samples(&fit_x, &fit_y).unwrap();
    let pc = pca(&mo, Which::X).unwrap();
    let (xs, _) = joint_samples(p.model(), 10_000, 22).unwrap();
    for k in [1, 3, 6] {
        let basis = pc.basis.columns(0, k);
        let mut resid = 0.0;
        for i in 0..xs.rows() {
            let x: Vec<f64> = xs.row(i).iter().zip(&mo.mean_x).map(|(a, b)| a - b).collect();
            let coef = basis.t_matvec(&x).unwrap();
            let proj = basis.matvec(&coef).unwrap();
            resid += x.iter().zip(&proj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        resid /= xs.rows() as f64;
        let tail: f64 = pc.scores[k..].iter().sum();
        assert!((resid - tail).abs() <= 0.05 * tail, "k = {k}: residual {resid} vs tail {tail}");
    }
}

#[test]
fn cca_correlation_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let xs = Matrix::<f64>::random_normal(50, 1, &mut rng);
    let mo = SampleMoments::from_samples(&xs, &xs).unwrap();
    let c = cca(&mo, 1, None).unwrap();
    assert!((c.correlations[0] - 1.0).abs() < 1e-8);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mo = SampleMoments::exact(vec![0.0; 3], vec![0.0; 2], spd(3, &mut rng), spd(2, &mut rng), Matrix::zeros(3, 2)).unwrap();
    let c = cca(&mo, 2, Some(0.0)).unwrap();
    assert!(c.correlations.iter().all(|&r| r == 0.0));
}

#[test]
fn cca_outputs_are_covariance_orthonormal() {
    let p = random_linear(6, 5, 8);
    let mo = p.exact_moments().unwrap();
    let c = cca(&mo, 4, Some(0.0)).unwrap();
    let ucu = c.u.t_matmul(&mo.cov_x.matmul(&c.u).unwrap()).unwrap();
    let vcv = c.v.t_matmul(&mo.cov_y.matmul(&c.v).unwrap()).unwrap();
    assert!(ucu.sub(&Matrix::identity(4)).unwrap().max_abs() <= 1e-8);
    assert!(vcv.sub(&Matrix::identity(4)).unwrap().max_abs() <= 1e-8);
    assert!(c.correlations.windows(2).all(|w| w[0] >= w[1]));
    assert!(c.correlations.iter().all(|&r| (0.0..=1.0).contains(&r)));
    assert!(cca(&mo, 6, Some(0.0)).is_err());
    assert!(cca(&mo, 2, Some(-1.0)).is_err());
}

#[test]
fn cca_subspace_invariant_under_reparameterization() {
    let p = random_linear(5, 4, 9);
    let mo = p.exact_moments().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut a = Matrix::<f64>::random_normal(5, 5, &mut rng);
    a.add_diag(3.0);
    // X' = A X: Cov(X') = A Cov(X) Aᵀ, Cov(X', Y) = A Cov(X, Y).
    let mut cx = a.matmul(&mo.cov_x).unwrap().matmul_t(&a).unwrap();
    cx.symmetrize();
    let moved = SampleMoments::exact(
        a.matvec(&mo.mean_x).unwrap(),
        mo.mean_y.clone(),
        cx,
        mo.cov_y.clone(),
        a.matmul(&mo.cov_xy).unwrap(),
    )
    .unwrap();
    let base = cca(&mo, 4, Some(0.0)).unwrap();
    let other = cca(&moved, 4, Some(0.0)).unwrap();
    for (x, y) in base.correlations.iter().zip(&other.correlations) {
        assert!((x - y).abs() <= 1e-8);
    }
    let gaps_ok = |k: usize| base.correlations[k - 1] - base.correlations[k] >= 0.01 * base.correlations[0];
    for r in 1..4 {
        if !gaps_ok(r) {
            continue;
        }
        // Directions transform as u' = A⁻ᵀ u, so Aᵀ U' spans U.
        let pulled = a.t_matmul(&other.u.columns(0, r)).unwrap();
        let ang = principal_angles(&orthonormalize(&base.u.columns(0, r)), &orthonormalize(&pulled)).unwrap();
        assert!(ang.iter().all(|&t| t <= 1e-6), "r = {r}: {ang:?}");
        let vang = principal_angles(&orthonormalize(&base.v.columns(0, r)), &orthonormalize(&other.v.columns(0, r))).unwrap();
        assert!(vang.iter().all(|&t| t <= 1e-6), "r = {r}: {vang:?}");
    }
}

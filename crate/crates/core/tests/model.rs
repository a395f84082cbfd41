mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bdr_core::diagnostics::estimate_diagnostics;
use bdr_core::linalg::{random_orthogonal, Matrix};
use bdr_core::model::{
    mixed_grad, whitened_model, whitening_from_covs, BayesModel, Capabilities, GaussianErrorModel,
    Jitter, LinearForward,
};
use bdr_core::problems::linear_gaussian::{power_spectrum, spectral_matrix};
use bdr_core::problems::{DiffusionConfig, DiffusionProblem, ImageConfig, ImageProblem};
use bdr_core::rng::substream;
use bdr_core::Error;

use common::{fd_mixed_grad, rel_frobenius};

fn random_spd(n: usize, seed: u64) -> Matrix<f64> {
    let a = Matrix::<f64>::random_normal(n, n + 2, &mut ChaCha8Rng::seed_from_u64(seed));
    let mut h = a.matmul_t(&a).unwrap();
    h.add_diag(0.1);
    h.symmetrize();
    h
}

fn linear_model(g: Matrix<f64>, mean: Vec<f64>, pr: Matrix<f64>, obs: Matrix<f64>) -> GaussianErrorModel<f64> {
    GaussianErrorModel::new(Arc::new(LinearForward::new(g)), mean, pr, obs).unwrap()
}

#[test]
fn identity_covariances_whiten_trivially() {
    let w = whitening_from_covs(&Matrix::<f64>::identity(3), &Matrix::identity(2), Jitter::Absolute(0.0)).unwrap();
    for m in [&w.pr_sqrt, &w.pr_inv_sqrt] {
        assert!(m.sub(&Matrix::identity(3)).unwrap().max_abs() < 1e-15);
    }
    for m in [&w.obs_sqrt, &w.obs_inv_sqrt] {
        assert!(m.sub(&Matrix::identity(2)).unwrap().max_abs() < 1e-15);
    }
}

#[test]
fn diagonal_prior_roots() {
    let w = whitening_from_covs(
        &Matrix::<f64>::from_diag(&[4.0, 1.0]),
        &Matrix::identity(1),
        Jitter::default(),
    )
    .unwrap();
    assert!(w.pr_sqrt.sub(&Matrix::from_diag(&[2.0, 1.0])).unwrap().max_abs() < 1e-14);
    assert!(w.pr_inv_sqrt.sub(&Matrix::from_diag(&[0.5, 1.0])).unwrap().max_abs() < 1e-14);
    assert!((w.condition_numbers[0] - 4.0).abs() < 1e-12);
}

#[test]
fn decaying_prior_reconstructed_from_its_root() {
    let wm: Matrix<f64> = random_orthogonal(50, &mut substream(0, 0));
    let cov = spectral_matrix(&wm, &power_spectrum(1.0, 2.0, 1e-6, 50));
    let w = whitening_from_covs(&cov, &Matrix::identity(1), Jitter::default()).unwrap();
    let rebuilt = w.pr_sqrt.matmul_t(&w.pr_sqrt).unwrap();
    assert!(rebuilt.rel_diff(&cov) <= 1e-10);
    let id = w.pr_sqrt.matmul(&w.pr_inv_sqrt).unwrap();
    assert!(id.sub(&Matrix::identity(50)).unwrap().max_abs() <= 1e-6);
}

#[test]
fn whitening_rejects_bad_inputs() {
    let asym = Matrix::<f64>::from_f64_rows(&[&[1.0, 0.5], &[0.0, 1.0]]);
    assert!(matches!(
        whitening_from_covs(&asym, &Matrix::identity(1), Jitter::default()),
        Err(Error::NotSymmetric { .. })
    ));
    let indef = Matrix::<f64>::from_diag(&[1.0, -1.0]);
    assert!(matches!(
        whitening_from_covs(&indef, &Matrix::identity(1), Jitter::default()),
        Err(Error::Indefinite { .. })
    ));
    assert!(whitening_from_covs(&Matrix::<f64>::identity(2), &Matrix::identity(1), Jitter::Relative(-1.0)).is_err());
}

#[test]
fn linear_white_mixed_gradient_is_g() {
    let g = Matrix::<f64>::from_f64_rows(&[&[1.0, 2.0], &[0.0, -1.0], &[3.0, 0.5]]);
    let model = linear_model(g.clone(), vec![0.0; 2], Matrix::identity(2), Matrix::identity(3));
    let mg = mixed_grad(&model, &[0.3, -0.7], &[1.0, 2.0, 3.0]).unwrap();
    assert_eq!(mg, g);
}

#[test]
fn constant_forward_has_zero_mixed_gradient() {
    let model = linear_model(Matrix::zeros(2, 3), vec![0.0; 3], Matrix::identity(3), Matrix::identity(2));
    let mg = mixed_grad(&model, &[1.0, 2.0, 3.0], &[0.5, 0.5]).unwrap();
    assert_eq!(mg.max_abs(), 0.0);
}

#[test]
fn gaussian_mixed_gradient_ignores_data() {
    let p = DiffusionProblem::<f64>::new(&DiffusionConfig { d: 20, m: 10, ..Default::default() }).unwrap();
    let mut rng = substream(3, 0);
    let x = p.sample_prior(&mut rng).unwrap();
    let a = mixed_grad(&p, &x, &p.sample_likelihood(&x, &mut rng).unwrap()).unwrap();
    let b = mixed_grad(&p, &x, &vec![7.0; 10]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn mixed_gradient_is_noise_precision_times_jacobian() {
    let g = Matrix::<f64>::random_normal(4, 3, &mut ChaCha8Rng::seed_from_u64(2));
    let obs = random_spd(4, 3);
    let model = linear_model(g.clone(), vec![0.0; 3], random_spd(3, 4), obs.clone());
    let prec = bdr_core::spectral::sym_eig(&obs).unwrap().apply(|l| 1.0 / l);
    let want = prec.matmul(&g).unwrap();
    let got = mixed_grad(&model, &[0.1, 0.2, 0.3], &[0.0; 4]).unwrap();
    assert!(got.rel_diff(&want) < 1e-10);
}

#[test]
fn gaussian_models_match_finite_differences() {
    let g = Matrix::<f64>::random_normal(5, 4, &mut ChaCha8Rng::seed_from_u64(6));
    let model = linear_model(g, vec![0.5; 4], random_spd(4, 7), random_spd(5, 8));
    let mut rng = substream(1, 0);
    let x = model.sample_prior(&mut rng).unwrap();
    let y = model.sample_likelihood(&x, &mut rng).unwrap();
    let an = mixed_grad(&model, &x, &y).unwrap();
    assert!(rel_frobenius(&fd_mixed_grad(&model, &x, &y, 1e-5), &an) <= 1e-4);

    let p = DiffusionProblem::<f64>::new(&DiffusionConfig { d: 30, m: 15, ..Default::default() }).unwrap();
    for k in 0..3 {
        let mut rng = substream(2, k);
        let x = p.sample_prior(&mut rng).unwrap();
        let y = p.sample_likelihood(&x, &mut rng).unwrap();
        let an = mixed_grad(&p, &x, &y).unwrap();
        assert!(rel_frobenius(&fd_mixed_grad(&p, &x, &y, 1e-5), &an) <= 1e-4);
    }
}

#[test]
fn small_image_matches_full_likelihood_finite_differences() {
    let img = ImageProblem::<f64>::new(&ImageConfig { grid: 4, ..Default::default() }).unwrap();
    for k in 0..5 {
        let mut rng = substream(4, k);
        let x = img.sample_prior(&mut rng).unwrap();
        let y: Vec<f64> = img
            .sample_likelihood(&x, &mut rng)
            .unwrap()
            .into_iter()
            .map(|v| v.clamp(1e-3, 1.0 - 1e-3))
            .collect();
        let an = mixed_grad(&img, &x, &y).unwrap();
        let fd = fd_mixed_grad(&img, &x, &y, 1e-5);
        assert!(rel_frobenius(&fd, &an) <= 1e-5, "point {k}: {}", rel_frobenius(&fd, &an));
    }
}

#[test]
fn image_rejects_out_of_support_data() {
    let img = ImageProblem::<f64>::new(&ImageConfig { grid: 4, ..Default::default() }).unwrap();
    let mut y = vec![0.5; 16];
    y[3] = 1.5;
    assert!(matches!(mixed_grad(&img, &[0.0, 0.0, 1.0], &y), Err(Error::Domain(_))));
    assert!(matches!(img.log_likelihood(&y, &[0.0, 0.0, 1.0]), Err(Error::Domain(_))));
}

struct PriorOnly;

impl BayesModel<f64> for PriorOnly {
    fn dim_x(&self) -> usize {
        1
    }
    fn dim_y(&self) -> usize {
        1
    }
    fn capabilities(&self) -> Capabilities {
        Capabilities::PRIOR_SAMPLE
    }
}

#[test]
fn missing_capability_is_reported() {
    assert!(matches!(mixed_grad(&PriorOnly, &[0.0], &[0.0]), Err(Error::UnsupportedCapability(_))));
    assert!(matches!(estimate_diagnostics(&PriorOnly, 4, 0), Err(Error::UnsupportedCapability(_))));
}

#[test]
fn white_model_unchanged_by_whitening() {
    let g = Matrix::<f64>::from_f64_rows(&[&[1.0, 2.0], &[0.5, -1.0]]);
    let model = linear_model(g.clone(), vec![0.0; 2], Matrix::identity(2), Matrix::identity(2));
    let w = whitened_model(&model).unwrap();
    assert_eq!(mixed_grad(&w.model, &[0.2, 0.1], &[0.0, 0.0]).unwrap(), g);
    assert!(w.model.is_whitened());
}

#[test]
fn whitened_linear_gradient_is_constant_whitened_map() {
    let g = Matrix::<f64>::random_normal(3, 4, &mut ChaCha8Rng::seed_from_u64(11));
    let model = linear_model(g.clone(), vec![1.0, -2.0, 0.0, 0.5], random_spd(4, 12), random_spd(3, 13));
    let w = whitened_model(&model).unwrap();
    let want = w.pair.obs_inv_sqrt.matmul(&g).unwrap().matmul(&w.pair.pr_sqrt).unwrap();
    for x in [[0.0; 4], [1.0, 2.0, -1.0, 0.3]] {
        assert!(mixed_grad(&w.model, &x, &[0.0; 3]).unwrap().rel_diff(&want) < 1e-12);
    }
}

#[test]
fn whitened_diffusion_diagnostic_matches_jacobian_route() {
    let p = DiffusionProblem::<f64>::new(&DiffusionConfig::default()).unwrap();
    let w = whitened_model(p.model()).unwrap();
    let n = 200;
    let seed = 17;
    let est = estimate_diagnostics(&w.model, n, seed).unwrap();
    let prec = 1.0 / (p.config.sigma_noise * p.config.sigma_noise);
    let mut core = Matrix::zeros(100, 100);
    for i in 0..n {
        let xb = w.model.sample_prior(&mut substream(seed, i as u64)).unwrap();
        let (_, j) = p.forward().forward_with_jacobian(&w.unwhiten_x(&xb)).unwrap();
        let jtj = j.t_matmul(&j).unwrap().scale(prec / n as f64);
        core = core.add(&jtj).unwrap();
    }
    let direct = w.pair.pr_sqrt.matmul(&core).unwrap().matmul(&w.pair.pr_sqrt).unwrap();
    assert!(est.h_x.rel_diff(&direct) <= 1e-8, "{}", est.h_x.rel_diff(&direct));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn whitening_round_trip(d in 1usize..8, m in 1usize..8, seed in any::<u64>()) {
        let g = Matrix::<f64>::random_normal(m, d, &mut ChaCha8Rng::seed_from_u64(seed));
        let mean: Vec<f64> = (0..d).map(|i| i as f64 - 1.5).collect();
        let model = linear_model(g, mean, random_spd(d, seed ^ 1), random_spd(m, seed ^ 2));
        let w = whitened_model(&model).unwrap();
        let mut rng = substream(seed, 0);
        let x = model.sample_prior(&mut rng).unwrap();
        let y = model.sample_likelihood(&x, &mut rng).unwrap();
        let xr = w.unwhiten_x(&w.whiten_x(&x));
        let yr = w.unwhiten_y(&w.whiten_y(&y));
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let ex = x.iter().zip(&xr).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let ey = y.iter().zip(&yr).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(ex <= 1e-12 * nx, "x round trip {}", ex / nx);
        prop_assert!(ey <= 1e-12 * ny, "y round trip {}", ey / ny);
    }
}

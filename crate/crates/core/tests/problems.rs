use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bdr_core::diagnostics::estimate_diagnostics;
use bdr_core::model::{whitened_model, ForwardModel};
use bdr_core::problems::diffusion::{drift, drift_derivative, observation_steps};
use bdr_core::problems::image::{cb_log_normalizer, cb_mean, cb_quantile};
use bdr_core::problems::{
    build_problem, diffusion_forward, image_probabilities, DiffusionConfig, DiffusionForward, DiffusionProblem,
    ImageConfig, ImageProblem, Parameterization, ProblemConfig, ProblemName,
};
use bdr_core::reduction::reduce_permutation;
use bdr_core::spectral::sym_eig;

#[test]
fn default_problems_have_documented_shapes() {
    for (name, d, m) in [(ProblemName::LinearGaussian, 50, 50), (ProblemName::Image, 3, 1024), (ProblemName::Diffusion, 100, 100)] {
        let p = build_problem::<f64>(&ProblemConfig::with_defaults(name)).unwrap();
        assert_eq!((p.model().dim_x(), p.model().dim_y()), (d, m));
        assert_eq!(p.name(), name);
        assert_eq!(name.to_string().parse::<ProblemName>().unwrap(), name);
    }
    assert!("elasticity".parse::<ProblemName>().is_err());
}

#[test]
fn linear_gaussian_default_spectra() {
    let p = build_problem::<f64>(&ProblemConfig::with_defaults(ProblemName::LinearGaussian)).unwrap();
    let g = p.gaussian().unwrap();
    let prior = sym_eig(&g.prior().cov).unwrap().values;
    let noise = sym_eig(g.noise_cov()).unwrap().values;
    for i in 0..50 {
        let k = (i + 1) as f64;
        let want_pr = 1.0 / (k * k) + 1e-6;
        let want_obs = 500.0 / k + 1e-6;
        assert!((prior[i] - want_pr).abs() <= 1e-10, "prior {i}: {} vs {want_pr}", prior[i]);
        assert!((noise[i] - want_obs).abs() <= 1e-10 * 500.0, "noise {i}: {} vs {want_obs}", noise[i]);
    }
}

#[test]
fn invalid_sections_are_listed() {
    let mut cfg = ProblemConfig::with_defaults(ProblemName::Diffusion);
    cfg.diffusion.dt = 0.0;
    cfg.diffusion.m = 200;
    let errs = cfg.validate();
    assert_eq!(errs.len(), 2, "{errs:?}");
    assert!(errs.iter().all(|e| e.starts_with("problem.diffusion:")));
    assert!(build_problem::<f64>(&cfg).is_err());
    let mut cfg = ProblemConfig::with_defaults(ProblemName::Image);
    cfg.image.fixed_gamma = Some(9.0);
    assert!(build_problem::<f64>(&cfg).is_err());
}

#[test]
fn image_probability_examples() {
    let pr = image_probabilities([4.0_f64, -4.0, 1.0], 4, 3.0).unwrap();
    assert!((pr.p[(1, 2)] - 0.1).abs() < 1e-15);
    let far = image_probabilities([-16.0_f64, -16.0, 2.5], 32, 3.0).unwrap();
    assert!((far.p[(31, 31)] - 0.9).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let x = [rng.random_range(-16.0..16.0), rng.random_range(-16.0..16.0), rng.random_range(0.25..5.0)];
        let pr = image_probabilities(x, 16, 3.0).unwrap();
        assert!(pr.p.as_slice().iter().all(|&p| (0.1..=0.9).contains(&p)));
    }
}

#[test]
fn image_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-6;
    for _ in 0..10 {
        let x = [rng.random_range(-14.0..14.0), rng.random_range(-14.0..14.0), rng.random_range(0.5..4.5)];
        let pr = image_probabilities(x, 32, 3.0).unwrap();
        for j in 0..3 {
            let (mut xp, mut xm) = (x, x);
            xp[j] += h;
            xm[j] -= h;
            let (a, b) = (image_probabilities(xp, 32, 3.0).unwrap(), image_probabilities(xm, 32, 3.0).unwrap());
            let scale = pr.grad.col(j).iter().fold(0.0_f64, |m, v: &f64| m.max(v.abs()));
            for k in 0..1024 {
                let fd = (a.p.as_slice()[k] - b.p.as_slice()[k]) / (2.0 * h);
                let an: f64 = pr.grad[(k, j)];
                assert!((fd - an).abs() <= 1e-5 * scale.max(1e-12), "param {j}, pixel {k}: {an} vs {fd}");
            }
        }
    }
}

#[test]
fn continuous_bernoulli_helpers() {
    // The normalizer at λ = ½ is 2 and the density is uniform.
    assert!((cb_log_normalizer(0.5_f64) - 2f64.ln()).abs() < 1e-12);
    assert!((cb_mean(0.5_f64) - 0.5).abs() < 1e-12);
    // Quantile inverts the CDF: the mean of quantiles over a fine grid matches cb_mean.
    for lam in [0.1_f64, 0.3, 0.49999, 0.7, 0.9] {
        let k = 200_000;
        let mean = (0..k).map(|i| cb_quantile((i as f64 + 0.5) / k as f64, lam)).sum::<f64>() / k as f64;
        assert!((mean - cb_mean(lam)).abs() < 1e-6, "λ = {lam}: {mean} vs {}", cb_mean(lam));
    }
}

#[test]
fn diffusion_forward_examples() {
    let d = 20;
    let (u, jac) = diffusion_forward(&vec![0.0_f64; d], 1.0, 0.05, d).unwrap();
    assert!(u.iter().all(|&v| v == 0.0));
    for i in 0..d {
        assert_eq!(jac[(i, i)], 1.0);
        for j in i + 1..d {
            assert_eq!(jac[(i, j)], 0.0);
        }
    }
    // Without drift the state is the path itself.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (u, jac) = diffusion_forward(&x, 0.0, 0.05, d).unwrap();
    for i in 0..d {
        assert!((u[i] - x[i]).abs() < 1e-14);
        for j in 0..d {
            assert_eq!(jac[(i, j)], if i == j { 1.0 } else { 0.0 });
        }
    }
    let inc = DiffusionForward::new(0.0_f64, 0.05, d, d, Parameterization::Increment);
    let (u, jac) = inc.forward_with_jacobian(&x).unwrap();
    let mut acc = 0.0;
    for i in 0..d {
        acc += x[i];
        assert!((u[i] - acc).abs() < 1e-14);
        for j in 0..d {
            assert_eq!(jac[(i, j)], if j <= i { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn diffusion_jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for param in [Parameterization::Path, Parameterization::Increment] {
        let f = DiffusionForward::new(1.0_f64, 0.01, 100, 25, param);
        let x: Vec<f64> = (0..100).map(|_| rng.random_range(-0.3..0.3)).collect();
        let jac = f.jacobian(&x).unwrap();
        let h = 1e-6;
        let scale = jac.max_abs();
        for j in 0..100 {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += h;
            xm[j] -= h;
            let (a, b) = (f.eval(&xp).unwrap(), f.eval(&xm).unwrap());
            for i in 0..25 {
                let fd = (a[i] - b[i]) / (2.0 * h);
                assert!((fd - jac[(i, j)]).abs() <= 1e-6 * scale, "({i}, {j}): {} vs {fd}", jac[(i, j)]);
            }
        }
    }
}

#[test]
fn drift_derivative_matches_finite_differences() {
    let h = 1e-6;
    for k in -40..=40 {
        let u = k as f64 * 0.1;
        let fd = (drift(1.3, u + h) - drift(1.3, u - h)) / (2.0 * h);
        assert!((fd - drift_derivative(1.3, u)).abs() <= 1e-8, "u = {u}");
    }
    assert_eq!(drift(1.0_f64, 0.0), 0.0);
    assert_eq!(drift(1.0_f64, 1.0), 0.0);
}

#[test]
fn observation_grid_excludes_origin_and_includes_end() {
    assert_eq!(observation_steps(100, 100), (1..=100).collect::<Vec<_>>());
    let s = observation_steps(100, 4);
    assert_eq!(s, vec![25, 50, 75, 100]);
    let p = DiffusionProblem::<f64>::new(&DiffusionConfig::default()).unwrap();
    let t = p.times();
    assert!((t[0] - 0.01).abs() < 1e-15 && (t[99] - 1.0).abs() < 1e-12);
}

fn eigen_ratio_discrepancy(a: &[f64], b: &[f64], k: usize) -> f64 {
    a.iter().zip(b).take(k).map(|(x, y)| (x - y).abs() / x.max(*y)).fold(0.0, f64::max)
}

fn whitened_diffusion(param: Parameterization) -> DiffusionProblem<f64> {
    DiffusionProblem::<f64>::new(&DiffusionConfig { parameterization: param, ..Default::default() }).unwrap()
}

#[test]
fn whitened_diffusion_spectra_differ_beyond_sampling_noise() {
    let p = whitened_diffusion(Parameterization::Path);
    let w = whitened_model(p.model()).unwrap();
    let a = estimate_diagnostics(&w.model, 4000, 1).unwrap();
    let b = estimate_diagnostics(&w.model, 4000, 2).unwrap();
    let ax = sym_eig(&a.h_x).unwrap().values;
    let ay = sym_eig(&a.h_y).unwrap().values;
    let bx = sym_eig(&b.h_x).unwrap().values;
    let by = sym_eig(&b.h_y).unwrap().values;
    let between = eigen_ratio_discrepancy(&ax, &ay, 10);
    let noise = eigen_ratio_discrepancy(&ax, &bx, 10).max(eigen_ratio_discrepancy(&ay, &by, 10));
    assert!(between > 3.0 * noise, "h_x vs h_y {between}, seed-to-seed {noise}");
}

#[test]
fn whitened_spectra_independent_of_parameterization() {
    // Symmetric roots make the two whitened coordinates differ by a rotation,
    // so only the distribution of the spectra is shared.
    let mut spectra = Vec::new();
    for (param, seed) in [(Parameterization::Path, 6), (Parameterization::Increment, 6), (Parameterization::Path, 7)] {
        let p = whitened_diffusion(param);
        let w = whitened_model(p.model()).unwrap();
        spectra.push(sym_eig(&estimate_diagnostics(&w.model, 4000, seed).unwrap().h_x).unwrap().values);
    }
    let across = eigen_ratio_discrepancy(&spectra[0], &spectra[1], 10);
    let noise = eigen_ratio_discrepancy(&spectra[0], &spectra[2], 10);
    assert!(across <= 3.0 * noise, "path vs increment {across}, seed-to-seed {noise}");
}

#[test]
fn diffusion_informed_early_informative_late() {
    let p = DiffusionProblem::<f64>::new(&DiffusionConfig::default()).unwrap();
    let red = reduce_permutation(&estimate_diagnostics(&p, 2000, 9).unwrap()).unwrap();
    let top_x = red.u_basis.col(0).iter().position(|&v| v == 1.0).unwrap();
    let top_y = red.v_basis.col(0).iter().position(|&v| v == 1.0).unwrap();
    assert!(top_x < 100 / 3, "most informed parameter at {top_x}");
    assert!(top_y >= 2 * 100 / 3, "most informative datum at {top_y}");
}

#[test]
fn image_spectrum_stable_under_grid_refinement() {
    let mut scaled = Vec::new();
    for grid in [16, 32] {
        let prob = ImageProblem::<f64>::new(&ImageConfig { grid, ..Default::default() }).unwrap();
        let area = prob.pixel_area();
        let dp = estimate_diagnostics(&prob, 2000, 12).unwrap();
        let vals = sym_eig(&dp.h_y).unwrap().values;
        scaled.push(vals[..20].iter().map(|v| v * area).collect::<Vec<f64>>());
    }
    for k in 0..20 {
        let (a, b) = (scaled[0][k], scaled[1][k]);
        assert!((a - b).abs() <= 0.1 * b, "eigenvalue {k}: {a} vs {b}");
    }
}

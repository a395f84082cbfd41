use std::sync::Arc;

use bdr_core::diagnostics::diagnostics_linear_gaussian;
use bdr_core::error::Error;
use bdr_core::inference::InnerMode;
use bdr_core::information::{cmi_bound_check, cmi_data, cmi_param, gap_ratio, gaussian_expected_kl, CmiKind};
use bdr_core::linalg::Matrix;
use bdr_core::model::{GaussianErrorModel, LinearForward};
use bdr_core::problems::{LinearGaussianConfig, LinearGaussianProblem};
use bdr_core::reduction::{reduce_rotation, Reduction};

fn instance() -> (LinearGaussianProblem<f64>, Reduction<f64>, Vec<f64>) {
    let p = LinearGaussianProblem::<f64>::new(&LinearGaussianConfig::default()).unwrap();
    let (pair, sigma) = diagnostics_linear_gaussian(&p.g, p.model().whitening()).unwrap();
    (p, reduce_rotation(&pair).unwrap(), sigma)
}

#[test]
fn expected_kl_examples() {
    let sigma = [2.0_f64, 1.0, 0.5, 0.1];
    assert_eq!(gaussian_expected_kl(&sigma, 4, 4).unwrap(), 0.0);
    assert!((gaussian_expected_kl(&[1.0_f64], 0, 0).unwrap() - 0.346_573_590_279_972_6).abs() < 1e-15);
    for r in 0..=6 {
        for s in 0..=6 {
            let k = r.min(s);
            assert_eq!(gaussian_expected_kl(&sigma, r, s).unwrap(), gaussian_expected_kl(&sigma, k, k).unwrap());
        }
    }
    let want = 0.5 * (1.25f64.ln() + 1.01f64.ln());
    assert!((gaussian_expected_kl(&sigma, 2, 3).unwrap() - want).abs() < 1e-15);
}

#[test]
fn gap_ratio_examples() {
    let sigma: Vec<f64> = (1..=12).map(|i| (1e-3 * 0.5f64.powi(i)).sqrt()).collect();
    let v = gap_ratio(&sigma, 3, 3, 1.0).unwrap().value;
    assert!((0.24..=0.26).contains(&v), "{v}");
    let v = gap_ratio(&sigma, 12, 3, 1.0).unwrap().value;
    assert!((0.48..=0.52).contains(&v), "{v}");
    let v2 = gap_ratio(&sigma, 3, 3, 2.0).unwrap().value;
    assert!((v2 - gap_ratio(&sigma, 3, 3, 1.0).unwrap().value / 4.0).abs() < 1e-15);
    assert!(gap_ratio(&sigma, 3, 3, 0.0).is_err());
}

#[test]
fn gap_ratio_bounded_by_half_on_linear_instance() {
    let (_, _, sigma) = instance();
    let d = sigma.len();
    for r in 0..=d {
        for s in 0..=d {
            let g = gap_ratio(&sigma, r, s, 1.0).unwrap();
            if r == d && s == d {
                assert!(g.degenerate);
                continue;
            }
            assert!(!g.degenerate);
            assert!(g.value > 0.0 && g.value <= 0.5, "({r}, {s}): {}", g.value);
        }
    }
}

#[test]
fn param_estimate_converges_in_inner_samples() {
    let (p, red, _) = instance();
    let w = p.whitened().unwrap();
    let est: Vec<_> = [10, 100, 1000]
        .iter()
        .map(|&l| cmi_param(&w.model, &red, 5, 2000, l, 31, InnerMode::Fresh).unwrap())
        .collect();
    let pooled = (est.iter().map(|e| e.std_error * e.std_error).sum::<f64>() / 3.0).sqrt();
    let late = (est[2].value - est[1].value).abs();
    let early = (est[1].value - est[0].value).abs();
    assert!(late <= early + 3.0 * pooled, "{late} vs {early} + 3·{pooled}");
    assert_eq!(est[2].n_inner, 1000);
    assert_eq!(est[2].estimator, CmiKind::ParamCmi);
}

#[test]
fn data_estimate_nonincreasing_in_s() {
    let (p, red, _) = instance();
    let w = p.whitened().unwrap();
    let est: Vec<_> = [0, 5, 10, 20, 40]
        .iter()
        .map(|&s| cmi_data(&w.model, &red, s, 2000, 100, 32, InnerMode::Fresh).unwrap())
        .collect();
    for pair in est.windows(2) {
        let se = (pair[0].std_error.powi(2) + pair[1].std_error.powi(2)).sqrt();
        assert!(pair[1].value <= pair[0].value + 3.0 * se, "{} then {}", pair[0].value, pair[1].value);
    }
    assert!(est.iter().all(|e| e.shared_inner_samples && e.std_error >= 0.0));
    assert!(est.iter().all(|e| e.value >= -3.0 * e.std_error));
}

#[test]
fn bound_check_vanishes_without_reduction() {
    let (p, red, sigma) = instance();
    let w = p.whitened().unwrap();
    let c = bdr_core::diagnostics::lsi_bound_linear_gaussian(sigma[0]).unwrap();
    let chk = cmi_bound_check(&w.model, &red, 50, 50, c, 100, 5, 3).unwrap();
    assert_eq!((chk.cmi, chk.bound), (0.0, 0.0));
    assert!(chk.holds(0.0));
    assert!(cmi_bound_check(&w.model, &red, 10, 10, 0.0, 10, 5, 3).is_err());
}

#[test]
fn mean_mode_uses_single_inner_evaluation() {
    let (p, red, _) = instance();
    let w = p.whitened().unwrap();
    let a = cmi_param(&w.model, &red, 10, 200, 0, 4, InnerMode::Mean).unwrap();
    let b = cmi_param(&w.model, &red, 10, 200, 0, 4, InnerMode::Mean).unwrap();
    assert_eq!(a.n_inner, 1);
    assert_eq!(a.value, b.value);
    assert!(cmi_param(&w.model, &red, 10, 200, 0, 4, InnerMode::Fresh).is_err());
    assert!(cmi_param(&w.model, &red, 10, 0, 5, 4, InnerMode::Fresh).is_err());
}

#[test]
fn underflow_is_reported() {
    let g = Matrix::<f64>::identity(2).scale(1e4);
    let model =
        GaussianErrorModel::new(Arc::new(LinearForward::new(g)), vec![0.0; 2], Matrix::identity(2), Matrix::identity(2))
            .unwrap();
    let red = Reduction::from_scores(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
    let err = cmi_param(&model, &red, 0, 4, 1, 1, InnerMode::Fresh).unwrap_err();
    assert!(matches!(err, Error::Underflow { .. }), "{err:?}");
}

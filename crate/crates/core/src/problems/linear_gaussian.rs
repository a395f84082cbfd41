//! Linear forward model with Gaussian prior and noise whose covariances have
//! prescribed power-law spectra in random orthonormal eigenbases.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::baselines::SampleMoments;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{random_orthogonal, Matrix};
use crate::model::{whitened_model, BayesModel, GaussianErrorModel, LinearForward, Whitened};
use crate::rng::substream;
use crate::scalar::Real;
use crate::spectral::{spd_roots, svd_rect};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearForwardKind {
    /// `G = I` (requires d = m).
    Identity,
    /// Seeded standard normal entries scaled by `1/√d`.
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearGaussianConfig {
    pub d: usize,
    pub m: usize,
    pub forward: LinearForwardKind,
    pub prior_lambda0: f64,
    pub prior_decay: f64,
    pub prior_floor: f64,
    pub noise_lambda0: f64,
    pub noise_decay: f64,
    pub noise_floor: f64,
    /// Seed of the random eigenbases (and of G when random).
    pub seed_w: u64,
}

impl Default for LinearGaussianConfig {
    fn default() -> Self {
        LinearGaussianConfig {
            d: 50,
            m: 50,
            forward: LinearForwardKind::Identity,
            prior_lambda0: 1.0,
            prior_decay: 2.0,
            prior_floor: 1e-6,
            noise_lambda0: 500.0,
            noise_decay: 1.0,
            noise_floor: 1e-6,
            seed_w: 0,
        }
    }
}

impl LinearGaussianConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.d == 0 {
            errs.push("d must be positive".to_string());
        }
        if self.m == 0 {
            errs.push("m must be positive".to_string());
        }
        if self.forward == LinearForwardKind::Identity && self.d != self.m {
            errs.push(format!("identity forward model needs d = m (got d = {}, m = {})", self.d, self.m));
        }
        for (name, v) in [
            ("prior_lambda0", self.prior_lambda0),
            ("noise_lambda0", self.noise_lambda0),
        ] {
            if !(v > 0.0) {
                errs.push(format!("{name} must be positive"));
            }
        }
        for (name, v) in [
            ("prior_floor", self.prior_floor),
            ("noise_floor", self.noise_floor),
            ("prior_decay", self.prior_decay),
            ("noise_decay", self.noise_decay),
        ] {
            if !(v >= 0.0) {
                errs.push(format!("{name} must be nonnegative"));
            }
        }
        errs
    }
}

/// `λ0 / i^θ + τ` for i = 1..n.
pub fn power_spectrum<T: Real>(lambda0: f64, decay: f64, floor: f64, n: usize) -> Vec<T> {
    (1..=n)
        .map(|i| T::c(lambda0 / (i as f64).powf(decay) + floor))
        .collect()
}

/// `W diag(D) Wᵀ`, symmetrized.
pub fn spectral_matrix<T: Real>(w: &Matrix<T>, diag: &[T]) -> Matrix<T> {
    let mut out = w.matmul(&Matrix::from_diag(diag)).expect("square").matmul_t(w).expect("square");
    out.symmetrize();
    out
}

#[derive(Clone, Debug)]
pub struct LinearGaussianProblem<T: Real> {
    pub g: Matrix<T>,
    pub prior_mean: Vec<T>,
    pub prior_cov: Matrix<T>,
    pub noise_cov: Matrix<T>,
    pub seed_w: u64,
    model: GaussianErrorModel<T>,
}

impl<T: Real> LinearGaussianProblem<T> {
    pub fn new(cfg: &LinearGaussianConfig) -> Result<Self> {
        let errs = cfg.validate();
        if !errs.is_empty() {
            return Err(Error::InvalidArgument(errs.join("; ")));
        }
        let w_pr: Matrix<T> = random_orthogonal(cfg.d, &mut substream(cfg.seed_w, 0));
        let w_obs: Matrix<T> = random_orthogonal(cfg.m, &mut substream(cfg.seed_w, 1));
        let prior_cov = spectral_matrix(
            &w_pr,
            &power_spectrum(cfg.prior_lambda0, cfg.prior_decay, cfg.prior_floor, cfg.d),
        );
        let noise_cov = spectral_matrix(
            &w_obs,
            &power_spectrum(cfg.noise_lambda0, cfg.noise_decay, cfg.noise_floor, cfg.m),
        );
        let g = match cfg.forward {
            LinearForwardKind::Identity => Matrix::identity(cfg.d),
            LinearForwardKind::Gaussian => {
                let scale = T::one() / T::from_usize_lossy(cfg.d).sqrt();
                Matrix::<T>::random_normal(cfg.m, cfg.d, &mut substream(cfg.seed_w, 2)).scale(scale)
            }
        };
        let mut p = Self::from_parts(g, vec![T::zero(); cfg.d], prior_cov, noise_cov)?;
        p.seed_w = cfg.seed_w;
        Ok(p)
    }

    pub fn from_parts(g: Matrix<T>, prior_mean: Vec<T>, prior_cov: Matrix<T>, noise_cov: Matrix<T>) -> Result<Self> {
        let model = GaussianErrorModel::new(
            Arc::new(LinearForward::new(g.clone())),
            prior_mean.clone(),
            prior_cov.clone(),
            noise_cov.clone(),
        )?;
        Ok(LinearGaussianProblem {
            g,
            prior_mean,
            prior_cov,
            noise_cov,
            seed_w: 0,
            model,
        })
    }

    pub fn model(&self) -> &GaussianErrorModel<T> {
        &self.model
    }

    pub fn whitened(&self) -> Result<Whitened<T>> {
        whitened_model(&self.model)
    }

    /// `Ā = Γ_obs^{-1/2} G Γ_pr^{1/2}` (m×d).
    pub fn whitened_forward_matrix(&self) -> Result<Matrix<T>> {
        let w = self.model.whitening();
        w.obs_inv_sqrt.matmul(&self.g)?.matmul(&w.pr_sqrt)
    }

    /// Singular values of the whitened forward matrix, descending.
    pub fn singular_values(&self) -> Result<Vec<T>> {
        Ok(svd_rect(&self.whitened_forward_matrix()?)?.sigma)
    }

    /// Exact joint moments of `(X, Y)`.
    pub fn exact_moments(&self) -> Result<SampleMoments<T>> {
        let cov_xy = self.prior_cov.matmul_t(&self.g)?;
        let mut cov_y = self.g.matmul(&cov_xy)?.add(&self.noise_cov)?;
        cov_y.symmetrize();
        let mean_y = self.g.matvec(&self.prior_mean)?;
        SampleMoments::exact(self.prior_mean.clone(), mean_y, self.prior_cov.clone(), cov_y, cov_xy)
    }

    /// Mean and covariance of the exact posterior given data `y`.
    pub fn posterior(&self, y: &[T]) -> Result<(Vec<T>, Matrix<T>)> {
        let w = self.model.whitening();
        let a = self.whitened_forward_matrix()?;
        let mut h = a.t_matmul(&a)?;
        h.add_diag(T::one());
        let (_, _, sys) = spd_roots(&h, T::zero())?;
        let inv = sys.apply(|l| T::one() / l);
        let resid: Vec<T> = y
            .iter()
            .zip(self.g.matvec(&self.prior_mean)?)
            .map(|(&a, b)| a - b)
            .collect();
        let yb = w.obs_inv_sqrt.matvec(&resid)?;
        let mb = inv.matvec(&a.t_matvec(&yb)?)?;
        let mut mean = w.pr_sqrt.matvec(&mb)?;
        for (m, &mu) in mean.iter_mut().zip(&self.prior_mean) {
            *m += mu;
        }
        let mut cov = w.pr_sqrt.matmul(&inv)?.matmul(&w.pr_sqrt)?;
        cov.symmetrize();
        Ok((mean, cov))
    }
}

impl<T: Real> BayesModel<T> for LinearGaussianProblem<T> {
    fn dim_x(&self) -> usize {
        self.model.dim_x()
    }
    fn dim_y(&self) -> usize {
        self.model.dim_y()
    }
    fn capabilities(&self) -> crate::model::Capabilities {
        self.model.capabilities()
    }
    fn sample_prior(&self, rng: &mut dyn rand::RngCore) -> Result<Vec<T>> {
        self.model.sample_prior(rng)
    }
    fn sample_likelihood(&self, x: &[T], rng: &mut dyn rand::RngCore) -> Result<Vec<T>> {
        self.model.sample_likelihood(x, rng)
    }
    fn log_likelihood(&self, y: &[T], x: &[T]) -> Result<T> {
        self.model.log_likelihood(y, x)
    }
    fn mixed_grad(&self, x: &[T], y: &[T]) -> Result<Matrix<T>> {
        self.model.mixed_grad(x, y)
    }
    fn gaussian_prior(&self) -> Option<&crate::model::GaussianPrior<T>> {
        self.model.gaussian_prior()
    }
    fn gaussian_error(&self) -> Option<&GaussianErrorModel<T>> {
        Some(&self.model)
    }
    fn is_whitened(&self) -> bool {
        self.model.is_whitened()
    }
}

/// Exact reduced posterior of `x_r` for a whitened linear model
/// `ȳ = Ā x̄ + ε` with standard normal prior and noise, orthonormal bases
/// `U`, `V` and projected data `y_s = V_sᵀ ȳ`.
///
/// Returns `(mean, covariance)` of `π(x_r | y_s)`.
pub fn analytic_reduced_posterior<T: Real>(
    a_bar: &Matrix<T>,
    u: &Matrix<T>,
    v: &Matrix<T>,
    r: usize,
    s: usize,
    y_s: &[T],
) -> Result<(Vec<T>, Matrix<T>)> {
    let (a_r, s_cov) = reduced_blocks(a_bar, u, v, r, s)?;
    let (_, _, ssys) = spd_roots(&s_cov, T::zero())?;
    let s_inv = ssys.apply(|l| T::one() / l);
    let mut prec = a_r.t_matmul(&s_inv.matmul(&a_r)?)?;
    prec.add_diag(T::one());
    prec.symmetrize();
    let (_, _, psys) = spd_roots(&prec, T::zero())?;
    let cov = psys.apply(|l| T::one() / l);
    let mean = cov.matvec(&a_r.t_matvec(&s_inv.matvec(y_s)?)?)?;
    Ok((mean, cov))
}

/// `log N(y_s; A_r x_r, S)`: the exact reduced likelihood of the whitened
/// linear model.
pub fn analytic_reduced_log_likelihood<T: Real>(
    a_bar: &Matrix<T>,
    u: &Matrix<T>,
    v: &Matrix<T>,
    r: usize,
    s: usize,
    y_s: &[T],
    x_r: &[T],
) -> Result<T> {
    let (a_r, s_cov) = reduced_blocks(a_bar, u, v, r, s)?;
    let (_, isq, sys) = spd_roots(&s_cov, T::zero())?;
    let pred = a_r.matvec(x_r)?;
    let resid: Vec<T> = y_s.iter().zip(&pred).map(|(&a, &b)| a - b).collect();
    let w = isq.matvec(&resid)?;
    let q: T = w.iter().map(|&v| v * v).sum();
    let log_det: T = sys.values.iter().map(|l| l.ln()).sum();
    let sf = T::from_usize_lossy(s);
    Ok(-T::c(0.5) * (q + log_det + sf * T::c(std::f64::consts::TAU.ln())))
}

/// `A_r = V_sᵀ Ā U_r` and `S = I + V_sᵀ Ā U_⊥ U_⊥ᵀ Āᵀ V_s`.
fn reduced_blocks<T: Real>(
    a_bar: &Matrix<T>,
    u: &Matrix<T>,
    v: &Matrix<T>,
    r: usize,
    s: usize,
) -> Result<(Matrix<T>, Matrix<T>)> {
    let (m, d) = a_bar.shape();
    check_dim("r", r, d)?;
    check_dim("s", s, m)?;
    let v_s = v.columns(0, s);
    let b = v_s.t_matmul(a_bar)?;
    let a_r = b.matmul(&u.columns(0, r))?;
    let bp = b.matmul(&u.columns(r, d))?;
    let mut s_cov = bp.matmul_t(&bp)?;
    s_cov.add_diag(T::one());
    s_cov.symmetrize();
    Ok((a_r, s_cov))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_stated_spectra() {
        let p = LinearGaussianProblem::<f64>::new(&LinearGaussianConfig::default()).unwrap();
        assert_eq!((p.dim_x(), p.dim_y()), (50, 50));
        let ev = crate::spectral::sym_eig(&p.prior_cov).unwrap().values;
        for (i, &l) in ev.iter().enumerate() {
            let k = (i + 1) as f64;
            assert!((l - (1.0 / (k * k) + 1e-6)).abs() < 1e-12);
        }
        let ev = crate::spectral::sym_eig(&p.noise_cov).unwrap().values;
        for (i, &l) in ev.iter().enumerate() {
            let k = (i + 1) as f64;
            assert!((l - (500.0 / k + 1e-6)).abs() < 1e-9);
        }
    }

    #[test]
    fn reproducible_from_seed() {
        let a = LinearGaussianProblem::<f64>::new(&LinearGaussianConfig::default()).unwrap();
        let b = LinearGaussianProblem::<f64>::new(&LinearGaussianConfig::default()).unwrap();
        assert_eq!(a.prior_cov, b.prior_cov);
        let c = LinearGaussianProblem::<f64>::new(&LinearGaussianConfig { seed_w: 1, ..Default::default() }).unwrap();
        assert_ne!(a.prior_cov, c.prior_cov);
    }

    #[test]
    fn identity_needs_square() {
        let cfg = LinearGaussianConfig { m: 10, ..Default::default() };
        assert!(LinearGaussianProblem::<f64>::new(&cfg).is_err());
        let cfg = LinearGaussianConfig { m: 10, d: 6, forward: LinearForwardKind::Gaussian, ..Default::default() };
        let p = LinearGaussianProblem::<f64>::new(&cfg).unwrap();
        assert_eq!(p.g.shape(), (10, 6));
    }

    #[test]
    fn posterior_matches_precision_form() {
        let cfg = LinearGaussianConfig {
            d: 4,
            m: 3,
            forward: LinearForwardKind::Gaussian,
            noise_lambda0: 0.5,
            ..Default::default()
        };
        let p = LinearGaussianProblem::<f64>::new(&cfg).unwrap();
        let y = [0.3, -0.2, 1.0];
        let (mean, cov) = p.posterior(&y).unwrap();
        let inv = |a: &Matrix<f64>| crate::spectral::sym_eig(a).unwrap().apply(|l| 1.0 / l);
        let noise_inv = inv(&p.noise_cov);
        let mut prec = p.g.t_matmul(&noise_inv.matmul(&p.g).unwrap()).unwrap().add(&inv(&p.prior_cov)).unwrap();
        prec.symmetrize();
        let cov2 = inv(&prec);
        assert!(cov.rel_diff(&cov2) < 1e-8);
        let mean2 = cov2.matvec(&p.g.t_matvec(&noise_inv.matvec(&y).unwrap()).unwrap()).unwrap();
        for (a, b) in mean.iter().zip(&mean2) {
            assert!((a - b).abs() < 1e-8 * b.abs().max(1.0));
        }
    }

    #[test]
    fn full_reduction_recovers_posterior() {
        let cfg = LinearGaussianConfig { d: 5, m: 5, noise_lambda0: 0.5, ..Default::default() };
        let p = LinearGaussianProblem::<f64>::new(&cfg).unwrap();
        let a = p.whitened_forward_matrix().unwrap();
        let y_bar = [0.1, 0.4, -0.3, 0.2, 0.0];
        let (mean, cov) =
            analytic_reduced_posterior(&a, &Matrix::identity(5), &Matrix::identity(5), 5, 5, &y_bar).unwrap();
        let mut prec = a.t_matmul(&a).unwrap();
        prec.add_diag(1.0);
        let full = crate::spectral::sym_eig(&prec).unwrap().apply(|l| 1.0 / l);
        assert!(cov.rel_diff(&full) < 1e-12);
        let m2 = full.matvec(&a.t_matvec(&y_bar).unwrap()).unwrap();
        for (x, y) in mean.iter().zip(&m2) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

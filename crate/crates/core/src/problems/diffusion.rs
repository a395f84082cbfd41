//! Euler–Maruyama discretization of `du = f(u) dt + dW` observed with
//! Gaussian noise, with the Brownian forcing as parameter.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{check_len, BayesModel, Capabilities, ForwardModel, GaussianErrorModel, GaussianPrior};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameterization {
    /// `x_k = W(t_k)`, prior covariance `min(t_i, t_j)`.
    #[default]
    Path,
    /// `x_k = W(t_k) − W(t_{k−1})`, prior covariance `Δt I`.
    Increment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffusionConfig {
    pub beta: f64,
    pub dt: f64,
    pub d: usize,
    pub m: usize,
    pub sigma_noise: f64,
    pub parameterization: Parameterization,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        DiffusionConfig {
            beta: 1.0,
            dt: 1e-2,
            d: 100,
            m: 100,
            sigma_noise: 0.1,
            parameterization: Parameterization::Path,
        }
    }
}

impl DiffusionConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.d == 0 {
            errs.push("d must be positive".to_string());
        }
        if self.m == 0 || self.m > self.d {
            errs.push(format!("m must lie in 1..={} (one observation per time step at most)", self.d));
        }
        if !(self.dt > 0.0) {
            errs.push("dt must be positive".to_string());
        }
        if !(self.sigma_noise > 0.0) {
            errs.push("sigma_noise must be positive".to_string());
        }
        if !self.beta.is_finite() {
            errs.push("beta must be finite".to_string());
        }
        errs
    }
}

/// `f(u) = βu(1 − u²)/(1 + u²)`.
pub fn drift<T: Real>(beta: T, u: T) -> T {
    let u2 = u * u;
    beta * u * (T::one() - u2) / (T::one() + u2)
}

/// `f′(u) = β(1 − 4u² − u⁴)/(1 + u²)²`.
pub fn drift_derivative<T: Real>(beta: T, u: T) -> T {
    let u2 = u * u;
    let den = T::one() + u2;
    beta * (T::one() - T::c(4.0) * u2 - u2 * u2) / (den * den)
}

/// Node indices (1-based time steps) of `m` observations equispaced in
/// `(0, T]` on a grid of `d` steps.
pub fn observation_steps(d: usize, m: usize) -> Vec<usize> {
    (1..=m)
        .map(|j| (((j * d) as f64 / m as f64).round() as usize).clamp(1, d))
        .collect()
}

#[derive(Clone, Debug)]
pub struct DiffusionForward<T> {
    beta: T,
    dt: T,
    d: usize,
    obs: Vec<usize>,
    parameterization: Parameterization,
}

impl<T: Real> DiffusionForward<T> {
    pub fn new(beta: T, dt: T, d: usize, m: usize, parameterization: Parameterization) -> Self {
        DiffusionForward {
            beta,
            dt,
            d,
            obs: observation_steps(d, m),
            parameterization,
        }
    }

    pub fn observation_steps(&self) -> &[usize] {
        &self.obs
    }

    fn increment(&self, x: &[T], k: usize) -> T {
        match self.parameterization {
            Parameterization::Increment => x[k],
            Parameterization::Path => {
                if k == 0 {
                    x[0]
                } else {
                    x[k] - x[k - 1]
                }
            }
        }
    }

    /// Full path `u_1..u_d` and, optionally, its d×d sensitivity.
    fn run(&self, x: &[T], with_jac: bool) -> Result<(Vec<T>, Option<Matrix<T>>)> {
        check_len("diffusion parameter", x, self.d)?;
        let d = self.d;
        let mut u = Vec::with_capacity(d);
        let mut jac = with_jac.then(|| Matrix::zeros(d, d));
        let mut prev = T::zero();
        for k in 0..d {
            let next = prev + drift(self.beta, prev) * self.dt + self.increment(x, k);
            if let Some(j) = jac.as_mut() {
                let a = T::one() + drift_derivative(self.beta, prev) * self.dt;
                if k > 0 {
                    let (head, tail) = j.as_mut_slice().split_at_mut(k * d);
                    let prev_row = &head[(k - 1) * d..k * d];
                    let row = &mut tail[..d];
                    for c in 0..k {
                        row[c] = a * prev_row[c];
                    }
                }
                match self.parameterization {
                    Parameterization::Increment => j[(k, k)] += T::one(),
                    Parameterization::Path => {
                        j[(k, k)] += T::one();
                        if k > 0 {
                            j[(k, k - 1)] -= T::one();
                        }
                    }
                }
            }
            u.push(next);
            prev = next;
        }
        Ok((u, jac))
    }

    /// Observed states and their m×d Jacobian.
    pub fn forward_with_jacobian(&self, x: &[T]) -> Result<(Vec<T>, Matrix<T>)> {
        let (u, jac) = self.run(x, true)?;
        let jac = jac.expect("requested");
        let mut out = Matrix::zeros(self.obs.len(), self.d);
        let mut y = Vec::with_capacity(self.obs.len());
        for (r, &k) in self.obs.iter().enumerate() {
            y.push(u[k - 1]);
            out.row_mut(r).copy_from_slice(jac.row(k - 1));
        }
        Ok((y, out))
    }
}

impl<T: Real> ForwardModel<T> for DiffusionForward<T> {
    fn dim_x(&self) -> usize {
        self.d
    }

    fn dim_y(&self) -> usize {
        self.obs.len()
    }

    fn eval(&self, x: &[T]) -> Result<Vec<T>> {
        let (u, _) = self.run(x, false)?;
        Ok(self.obs.iter().map(|&k| u[k - 1]).collect())
    }

    fn jacobian(&self, x: &[T]) -> Result<Matrix<T>> {
        Ok(self.forward_with_jacobian(x)?.1)
    }

    fn eval_with_jacobian(&self, x: &[T]) -> Result<(Vec<T>, Matrix<T>)> {
        self.forward_with_jacobian(x)
    }
}

/// Observed path and Jacobian for the default path parameterization.
pub fn diffusion_forward<T: Real>(x: &[T], beta: T, dt: T, m: usize) -> Result<(Vec<T>, Matrix<T>)> {
    DiffusionForward::new(beta, dt, x.len(), m, Parameterization::Path).forward_with_jacobian(x)
}

/// Prior covariance of the parameter.
pub fn prior_covariance<T: Real>(d: usize, dt: T, parameterization: Parameterization) -> Matrix<T> {
    match parameterization {
        Parameterization::Path => Matrix::from_fn(d, d, |i, j| dt * T::from_usize_lossy(i.min(j) + 1)),
        Parameterization::Increment => Matrix::identity(d).scale(dt),
    }
}

#[derive(Clone, Debug)]
pub struct DiffusionProblem<T: Real> {
    pub config: DiffusionConfig,
    forward: Arc<DiffusionForward<T>>,
    model: GaussianErrorModel<T>,
}

impl<T: Real> DiffusionProblem<T> {
    pub fn new(cfg: &DiffusionConfig) -> Result<Self> {
        let errs = cfg.validate();
        if !errs.is_empty() {
            return Err(Error::InvalidArgument(errs.join("; ")));
        }
        let forward = Arc::new(DiffusionForward::new(
            T::c(cfg.beta),
            T::c(cfg.dt),
            cfg.d,
            cfg.m,
            cfg.parameterization,
        ));
        let prior_cov = prior_covariance(cfg.d, T::c(cfg.dt), cfg.parameterization);
        let noise_cov = Matrix::identity(cfg.m).scale(T::c(cfg.sigma_noise * cfg.sigma_noise));
        let model = GaussianErrorModel::new(forward.clone(), vec![T::zero(); cfg.d], prior_cov, noise_cov)?;
        Ok(DiffusionProblem {
            config: cfg.clone(),
            forward,
            model,
        })
    }

    pub fn forward(&self) -> &DiffusionForward<T> {
        &self.forward
    }

    pub fn model(&self) -> &GaussianErrorModel<T> {
        &self.model
    }

    /// Time of each parameter node.
    pub fn times(&self) -> Vec<T> {
        (1..=self.config.d)
            .map(|k| T::from_usize_lossy(k) * T::c(self.config.dt))
            .collect()
    }
}

impl<T: Real> BayesModel<T> for DiffusionProblem<T> {
    fn dim_x(&self) -> usize {
        self.model.dim_x()
    }
    fn dim_y(&self) -> usize {
        self.model.dim_y()
    }
    fn capabilities(&self) -> Capabilities {
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
    fn gaussian_prior(&self) -> Option<&GaussianPrior<T>> {
        self.model.gaussian_prior()
    }
    fn gaussian_error(&self) -> Option<&GaussianErrorModel<T>> {
        Some(&self.model)
    }
}

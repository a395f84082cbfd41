use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::BayesModel;
use crate::rng::{derive_seed, substream};
use crate::scalar::Real;

use super::iact::{iact, MIN_CHAIN_LEN};
use super::posterior::{InnerMode, ReducedPosterior};

/// Settings of the adaptive random-walk Metropolis chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McmcConfig {
    /// Fraction of the total chain spent adapting and discarded.
    pub burn_in_fraction: f64,
    pub target_acceptance: f64,
    /// Initial proposal scale; defaults to `2.38/√r`.
    pub initial_scale: Option<f64>,
    /// Robbins–Monro step exponent for the log-scale update.
    pub adaptation_exponent: f64,
    /// Acceptance rate below which the chain is flagged as diverged.
    pub divergence_threshold: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            burn_in_fraction: 0.2,
            target_acceptance: 0.234,
            initial_scale: None,
            adaptation_exponent: 0.6,
            divergence_threshold: 0.01,
        }
    }
}

/// Approximate posterior draws and chain diagnostics.
#[derive(Clone, Debug)]
pub struct ApproxPosterior<T> {
    /// n×d samples `U_r x_r + U_⊥ x_⊥` in the model's coordinates.
    pub samples: Matrix<T>,
    /// n×r kept chain states.
    pub chain: Matrix<T>,
    pub acceptance: T,
    pub iact: Vec<T>,
    pub ess: Vec<T>,
    pub diverged: bool,
    pub burn_in: usize,
    pub final_scale: T,
}

/// Runs the four-step approximate-posterior sampler: project the data,
/// sample `x_r` by MCMC on the reduced posterior, complete each state with a
/// conditional prior draw, and assemble.
pub fn sample_approx_posterior<T: Real>(
    post: &ReducedPosterior<'_, T>,
    y: &[T],
    n_samples: usize,
    cfg: &McmcConfig,
    seed: u64,
) -> Result<ApproxPosterior<T>> {
    if !(0.0..1.0).contains(&cfg.burn_in_fraction) {
        return Err(Error::InvalidArgument("burn_in_fraction must lie in [0, 1)".into()));
    }
    if !(cfg.target_acceptance > 0.0 && cfg.target_acceptance < 1.0) {
        return Err(Error::InvalidArgument("target_acceptance must lie in (0, 1)".into()));
    }
    let y_s = post.project_data(y)?;
    let r = post.dims.r;
    let d = post.model.dim_x();
    let cond = post.conditional();

    if r == 0 {
        let rows: Vec<Result<Vec<T>>> = (0..n_samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = substream(derive_seed(seed, 1), i as u64);
                let x_perp = cond.sample(&[], &mut rng)?;
                cond.assemble(&[], &x_perp)
            })
            .collect();
        let samples = collect_rows(rows, n_samples, d)?;
        return Ok(ApproxPosterior {
            samples,
            chain: Matrix::zeros(n_samples, 0),
            acceptance: T::one(),
            iact: vec![],
            ess: vec![],
            diverged: false,
            burn_in: 0,
            final_scale: T::zero(),
        });
    }

    let f = cfg.burn_in_fraction;
    let burn_in = ((n_samples as f64) * f / (1.0 - f)).round() as usize;
    let mut rng = substream(seed, 0);
    let mut inner = post.draw_inner(&mut rng);
    let log_target = |x: &[T], inner: &[Vec<T>]| -> Result<T> {
        Ok(post.reduced_likelihood_with(&y_s, x, inner)? + cond.marginal_log_pdf(x)?)
    };
    let mut x = cond.marginal_mean().to_vec();
    let mut lp = log_target(&x, &inner)?;
    let mut log_scale = T::c(cfg.initial_scale.unwrap_or(2.38 / (r as f64).sqrt())).ln();
    let target = T::c(cfg.target_acceptance);
    let gamma = T::c(cfg.adaptation_exponent);
    let mut accepted = 0usize;
    let mut kept = Vec::with_capacity(n_samples * r);
    for t in 0..(burn_in + n_samples) {
        let z: Vec<T> = (0..r).map(|_| T::sample_standard_normal(&mut rng)).collect();
        let step = cond.marginal_sqrt_apply(&z)?;
        let scale = log_scale.exp();
        let prop: Vec<T> = x.iter().zip(&step).map(|(&a, &b)| a + scale * b).collect();
        let prop_inner = if post.inner_mode == InnerMode::Fresh {
            post.draw_inner(&mut rng)
        } else {
            inner.clone()
        };
        let lp_prop = log_target(&prop, &prop_inner)?;
        let log_alpha = (lp_prop - lp).min(T::zero());
        let u = T::sample_open01(&mut rng);
        let accept = lp_prop.is_finite() && u.ln() < log_alpha;
        if accept {
            x = prop;
            lp = lp_prop;
            if post.inner_mode == InnerMode::Fresh {
                inner = prop_inner;
            }
        }
        if t < burn_in {
            let alpha = if lp_prop.is_finite() { log_alpha.exp() } else { T::zero() };
            let rate = T::one() / T::from_usize_lossy(t + 1).powf(gamma);
            log_scale += rate * (alpha - target);
        } else {
            if accept {
                accepted += 1;
            }
            kept.extend_from_slice(&x);
        }
    }
    let chain = Matrix::from_vec(n_samples, r, kept)?;
    let acceptance = if n_samples > 0 {
        T::from_usize_lossy(accepted) / T::from_usize_lossy(n_samples)
    } else {
        T::zero()
    };
    let rows: Vec<Result<Vec<T>>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(derive_seed(seed, 1), i as u64);
            let x_r = chain.row(i);
            let x_perp = cond.sample(x_r, &mut rng)?;
            cond.assemble(x_r, &x_perp)
        })
        .collect();
    let samples = collect_rows(rows, n_samples, d)?;
    let (iact_values, ess) = if n_samples >= MIN_CHAIN_LEN {
        let tau = iact(&chain)?.values;
        let n = T::from_usize_lossy(n_samples);
        let ess = tau.iter().map(|&t| n / t).collect();
        (tau, ess)
    } else {
        (vec![], vec![])
    };
    Ok(ApproxPosterior {
        samples,
        chain,
        acceptance,
        iact: iact_values,
        ess,
        diverged: acceptance < T::c(cfg.divergence_threshold),
        burn_in,
        final_scale: log_scale.exp(),
    })
}

fn collect_rows<T: Real>(rows: Vec<Result<Vec<T>>>, n: usize, d: usize) -> Result<Matrix<T>> {
    let mut data = Vec::with_capacity(n * d);
    for (i, r) in rows.into_iter().enumerate() {
        data.extend(r.map_err(|e| Error::SamplingFailure { index: i, source: Box::new(e) })?);
    }
    Matrix::from_vec(n, d, data)
}

/// Independent chains, one per seed, run in parallel.
pub fn run_chains<T: Real>(
    post: &ReducedPosterior<'_, T>,
    y: &[T],
    n_samples: usize,
    cfg: &McmcConfig,
    seeds: &[u64],
) -> Vec<Result<ApproxPosterior<T>>> {
    seeds
        .par_iter()
        .map(|&s| sample_approx_posterior(post, y, n_samples, cfg, s))
        .collect()
}

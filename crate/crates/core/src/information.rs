//! Gaussian closed forms for the expected KL error and Monte Carlo
//! estimators of the two conditional mutual information terms.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::inference::{ConditionalPrior, InnerMode};
use crate::model::{BayesModel, Capabilities, GaussianErrorModel};
use crate::reduction::{bound, Reduction};
use crate::rng::{derive_seed, substream};
use crate::scalar::{log_mean_exp, mean_and_stderr, Real};

fn check_sigma<T: Real>(sigma: &[T]) -> Result<()> {
    for &s in sigma {
        if !(s >= T::zero()) {
            return Err(Error::NegativeInput { name: "sigma", value: s.to_f64_lossy() });
        }
    }
    Ok(())
}

/// `½ Σ_{i > min(r,s)} log(1 + σ_i²)`.
pub fn gaussian_expected_kl<T: Real>(sigma: &[T], r: usize, s: usize) -> Result<T> {
    check_sigma(sigma)?;
    let k = r.min(s).min(sigma.len());
    let mut acc = T::zero();
    for &v in sigma[k..].iter().rev() {
        acc += (v * v).ln_1p();
    }
    Ok(T::c(0.5) * acc)
}

fn sq_tail<T: Real>(sigma: &[T], k: usize) -> T {
    let k = k.min(sigma.len());
    sigma[k..].iter().rev().map(|&v| v * v).sum()
}

/// Ratio of exact expected KL to the bound `C̄² (Σ_{i>r} σ_i² + Σ_{i>s} σ_i²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapRatio<T> {
    /// NaN when `degenerate`.
    pub value: T,
    /// Set when the bound's trace term vanishes.
    pub degenerate: bool,
}

pub fn gap_ratio<T: Real>(sigma: &[T], r: usize, s: usize, lsi_const: T) -> Result<GapRatio<T>> {
    check_sigma(sigma)?;
    if !(lsi_const > T::zero()) {
        return Err(Error::InvalidArgument(format!("lsi_const must be positive, got {lsi_const}")));
    }
    let kl = gaussian_expected_kl(sigma, r, s)?;
    let denom = lsi_const * lsi_const * (sq_tail(sigma, r) + sq_tail(sigma, s));
    if denom == T::zero() {
        return Ok(GapRatio { value: T::nan(), degenerate: true });
    }
    Ok(GapRatio { value: kl / denom, degenerate: false })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CmiKind {
    ParamCmi,
    DataCmi,
}

/// Monte Carlo estimate with its outer-loop standard error.
#[derive(Clone, Debug, Serialize)]
pub struct CmiEstimate<T> {
    pub value: T,
    pub std_error: T,
    pub n_outer: usize,
    pub n_inner: usize,
    pub estimator: CmiKind,
    pub inner_mode: InnerMode,
    /// Whether the marginal estimates share their prior samples.
    pub shared_inner_samples: bool,
}

/// Log-likelihood threshold below which `exp` underflows in double precision.
const UNDERFLOW_LOG: f64 = -745.0;

fn guard<T: Real>(lls: &[T], index: usize) -> Result<()> {
    if lls.iter().all(|&v| v <= T::c(UNDERFLOW_LOG)) {
        return Err(Error::Underflow { index });
    }
    Ok(())
}

fn validate_counts(n: usize, l: usize, mode: InnerMode) -> Result<()> {
    if n == 0 {
        return Err(Error::InsufficientSamples { required: 1, found: 0 });
    }
    if l == 0 && mode != InnerMode::Mean {
        return Err(Error::InvalidArgument("inner sample count must be at least 1".into()));
    }
    Ok(())
}

fn summarize<T: Real>(
    terms: Vec<Result<T>>,
    l: usize,
    kind: CmiKind,
    mode: InnerMode,
    shared: bool,
) -> Result<CmiEstimate<T>> {
    let n = terms.len();
    let mut vals = Vec::with_capacity(n);
    for t in terms {
        vals.push(t?);
    }
    let (value, std_error) = mean_and_stderr(&vals);
    Ok(CmiEstimate {
        value,
        std_error,
        n_outer: n,
        n_inner: if mode == InnerMode::Mean { 1 } else { l },
        estimator: kind,
        inner_mode: mode,
        shared_inner_samples: shared,
    })
}

/// Estimates `I(X_⊥; Y | X_r)` as the mean of
/// `log π(Yⁱ|Xⁱ) − log π̂(Yⁱ|X_rⁱ)`, where the reduced likelihood averages ℓ
/// likelihoods at `U_r X_rⁱ + U_⊥ X_⊥ʲ`, `X_⊥ʲ ~ π(x_⊥ | X_rⁱ)`.
///
/// `InnerMode::Mean` replaces the inner average by one evaluation at the
/// conditional mean; `Fixed` behaves like `Fresh` since every outer sample
/// has its own conditioning value.
pub fn cmi_param<T: Real>(
    model: &dyn BayesModel<T>,
    reduction: &Reduction<T>,
    r: usize,
    n: usize,
    l: usize,
    seed: u64,
    mode: InnerMode,
) -> Result<CmiEstimate<T>> {
    let d = model.dim_x();
    check_dim("r", r, d)?;
    validate_counts(n, l, mode)?;
    model.capabilities().require(
        Capabilities::PRIOR_SAMPLE | Capabilities::LIKELIHOOD_SAMPLE | Capabilities::LIKELIHOOD_LOGPDF,
        "joint sampling and likelihood evaluation",
    )?;
    if !model.capabilities().contains(Capabilities::CONDITIONAL_PRIOR) {
        return Err(Error::UnsupportedCapability("conditional prior sampling"));
    }
    let prior = model
        .gaussian_prior()
        .ok_or(Error::UnsupportedCapability("conditional prior sampling"))?;
    let cond = ConditionalPrior::new(prior, &reduction.u_basis, r)?;
    let terms: Vec<Result<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let x = model.sample_prior(&mut rng)?;
            let y = model.sample_likelihood(&x, &mut rng)?;
            let num = model.log_likelihood(&y, &x)?;
            if r == d {
                return Ok(num - num);
            }
            let x_r = cond.project(&x)?;
            let lls: Vec<T> = if mode == InnerMode::Mean {
                let xp = cond.mean(&x_r)?;
                vec![model.log_likelihood(&y, &cond.assemble(&x_r, &xp)?)?]
            } else {
                let mut v = Vec::with_capacity(l);
                for _ in 0..l {
                    let xp = cond.sample(&x_r, &mut rng)?;
                    v.push(model.log_likelihood(&y, &cond.assemble(&x_r, &xp)?)?);
                }
                v
            };
            guard(&lls, i)?;
            Ok(num - log_mean_exp(&lls))
        })
        .collect();
    summarize(terms, l, CmiKind::ParamCmi, mode, false)
}

/// Estimates `I(Y_⊥; X | Y_s)` as the mean of
/// `[log π(Yⁱ|Xⁱ) − log π̂(Yⁱ)] − [log π(Y_sⁱ|Xⁱ) − log π̂(Y_sⁱ)]`.
///
/// Both evidences are estimated from the same ℓ prior samples, and the
/// projected likelihood uses the closed form of the Gaussian error model.
pub fn cmi_data<T: Real>(
    model: &dyn BayesModel<T>,
    reduction: &Reduction<T>,
    s: usize,
    n: usize,
    l: usize,
    seed: u64,
    mode: InnerMode,
) -> Result<CmiEstimate<T>> {
    let m = model.dim_y();
    check_dim("s", s, m)?;
    validate_counts(n, l, mode)?;
    let gm = model
        .gaussian_error()
        .ok_or(Error::UnsupportedCapability("closed-form projected likelihood"))?;
    let v_s = reduction.v_s(s)?;
    let terms: Vec<Result<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let x = gm.sample_prior(&mut rng)?;
            let y = gm.sample_likelihood(&x, &mut rng)?;
            let y_bar = gm.whiten_data(&y);
            let y_s = v_s.t_matvec(&y_bar)?;
            let pair = |xj: &[T]| -> Result<(T, T)> {
                let g = gm.whitened_forward(xj)?;
                let full = gm.log_likelihood_whitened(&y_bar, &g);
                let proj = if s == m {
                    full
                } else {
                    GaussianErrorModel::projected_log_likelihood_whitened(&v_s, &y_s, &g)
                };
                Ok((full, proj))
            };
            let (full_num, proj_num) = pair(&x)?;
            let (mut full_den, mut proj_den) = (Vec::new(), Vec::new());
            if mode == InnerMode::Mean {
                let (a, b) = pair(&gm.prior().mean)?;
                full_den.push(a);
                proj_den.push(b);
            } else {
                for _ in 0..l {
                    let xj = gm.prior().sample(&mut rng);
                    let (a, b) = pair(&xj)?;
                    full_den.push(a);
                    proj_den.push(b);
                }
            }
            guard(&full_den, i)?;
            guard(&proj_den, i)?;
            let full = full_num - log_mean_exp(&full_den);
            let proj = proj_num - log_mean_exp(&proj_den);
            Ok(full - proj)
        })
        .collect();
    summarize(terms, l, CmiKind::DataCmi, mode, true)
}

/// Estimated CMI sum against the bound `C̄² (tail_x(r) + tail_y(s))`.
#[derive(Clone, Debug, Serialize)]
pub struct CmiBoundCheck<T> {
    pub cmi: T,
    pub std_error: T,
    pub bound: T,
    pub param: CmiEstimate<T>,
    pub data: CmiEstimate<T>,
}

impl<T: Real> CmiBoundCheck<T> {
    /// `cmi ≤ bound + k·std_error`.
    pub fn holds(&self, k: T) -> bool {
        self.cmi <= self.bound + k * self.std_error
    }
}

#[allow(clippy::too_many_arguments)]
pub fn cmi_bound_check<T: Real>(
    model: &dyn BayesModel<T>,
    reduction: &Reduction<T>,
    r: usize,
    s: usize,
    lsi_const: T,
    n: usize,
    l: usize,
    seed: u64,
) -> Result<CmiBoundCheck<T>> {
    if !(lsi_const > T::zero()) {
        return Err(Error::InvalidArgument(format!("lsi_const must be positive, got {lsi_const}")));
    }
    let b = lsi_const * lsi_const * bound(reduction, r, s)?;
    let param = cmi_param(model, reduction, r, n, l, derive_seed(seed, 1), InnerMode::Fresh)?;
    let data = cmi_data(model, reduction, s, n, l, derive_seed(seed, 2), InnerMode::Fresh)?;
    let se = (param.std_error * param.std_error + data.std_error * data.std_error).sqrt();
    Ok(CmiBoundCheck {
        cmi: param.value + data.value,
        std_error: se,
        bound: b,
        param,
        data,
    })
}

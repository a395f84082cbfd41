use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::model::{check_len, BayesModel, GaussianErrorModel};
use crate::reduction::{ReducedDims, Reduction};
use crate::rng::substream;
use crate::scalar::{log_mean_exp, Real};

use super::conditional::ConditionalPrior;

/// How the discarded parameter block is integrated out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerMode {
    /// New conditional-prior draws at every evaluation (pseudo-marginal).
    #[default]
    Fresh,
    /// Draws fixed once per chain.
    Fixed,
    /// A single evaluation at the conditional prior mean.
    Mean,
}

impl fmt::Display for InnerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InnerMode::Fresh => "fresh",
            InnerMode::Fixed => "fixed",
            InnerMode::Mean => "mean",
        })
    }
}

impl FromStr for InnerMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fresh" => Ok(InnerMode::Fresh),
            "fixed" => Ok(InnerMode::Fixed),
            "mean" => Ok(InnerMode::Mean),
            other => Err(Error::InvalidArgument(format!(
                "unknown inner mode `{other}` (expected fresh, fixed or mean)"
            ))),
        }
    }
}

/// Closed-form `log π(y_s | x) = −(s/2) log 2π − ½‖y_s − V_sᵀ Γ_obs^{-1/2} G(x)‖²`
/// for whitened data bases `V_s`.
pub fn marginal_likelihood_gaussian<T: Real>(
    model: &GaussianErrorModel<T>,
    reduction: &Reduction<T>,
    s: usize,
    y_s: &[T],
    x: &[T],
) -> Result<T> {
    check_dim("s", s, reduction.dim_y())?;
    check_len("y_s", y_s, s)?;
    check_len("x", x, model.dim_x())?;
    if reduction.dim_y() != model.dim_y() {
        return Err(crate::error::shape_err(
            "marginal_likelihood_gaussian",
            format!("reduction with m={}", model.dim_y()),
            format!("m={}", reduction.dim_y()),
        ));
    }
    let v_s = reduction.v_s(s)?;
    let g_bar = model.whitened_forward(x)?;
    Ok(GaussianErrorModel::projected_log_likelihood_whitened(&v_s, y_s, &g_bar))
}

/// The approximate posterior `π(x_r | y_s) π(x_⊥ | x_r)` of a Gaussian error
/// model with bases taken from a reduction in the model's coordinates.
pub struct ReducedPosterior<'a, T: Real> {
    pub model: &'a GaussianErrorModel<T>,
    pub reduction: &'a Reduction<T>,
    pub dims: ReducedDims<T>,
    pub inner_l: usize,
    pub inner_mode: InnerMode,
    cond: ConditionalPrior<T>,
    v_s: Matrix<T>,
}

impl<'a, T: Real> ReducedPosterior<'a, T> {
    pub fn new(
        model: &'a GaussianErrorModel<T>,
        reduction: &'a Reduction<T>,
        dims: ReducedDims<T>,
        inner_l: usize,
        inner_mode: InnerMode,
    ) -> Result<Self> {
        check_dim("r", dims.r, model.dim_x())?;
        check_dim("s", dims.s, model.dim_y())?;
        if reduction.dim_x() != model.dim_x() || reduction.dim_y() != model.dim_y() {
            return Err(crate::error::shape_err(
                "ReducedPosterior",
                format!("reduction for d={}, m={}", model.dim_x(), model.dim_y()),
                format!("d={}, m={}", reduction.dim_x(), reduction.dim_y()),
            ));
        }
        if inner_l == 0 && inner_mode != InnerMode::Mean {
            return Err(Error::InvalidArgument("inner sample count must be at least 1".into()));
        }
        let cond = ConditionalPrior::new(model.prior(), &reduction.u_basis, dims.r)?;
        let v_s = reduction.v_s(dims.s)?;
        Ok(ReducedPosterior {
            model,
            reduction,
            dims,
            inner_l,
            inner_mode,
            cond,
            v_s,
        })
    }

    pub fn conditional(&self) -> &ConditionalPrior<T> {
        &self.cond
    }

    /// `y_s = V_sᵀ Γ_obs^{-1/2} y`.
    pub fn project_data(&self, y: &[T]) -> Result<Vec<T>> {
        check_len("y", y, self.model.dim_y())?;
        self.v_s.t_matvec(&self.model.whiten_data(y))
    }

    /// Number of inner evaluations per likelihood estimate.
    pub fn inner_count(&self) -> usize {
        if self.inner_mode == InnerMode::Mean {
            1
        } else {
            self.inner_l
        }
    }

    /// Standard normal inner draws for one estimate (zeros in mean mode).
    pub fn draw_inner(&self, rng: &mut dyn RngCore) -> Vec<Vec<T>> {
        let k = self.model.dim_x() - self.dims.r;
        if self.inner_mode == InnerMode::Mean || k == 0 {
            return vec![vec![T::zero(); k]; self.inner_count()];
        }
        (0..self.inner_l)
            .map(|_| (0..k).map(|_| T::sample_standard_normal(rng)).collect())
            .collect()
    }

    /// `log π(y_s | U_r x_r + U_⊥ x_⊥)` for one completion.
    pub fn log_likelihood_at(&self, y_s: &[T], x: &[T]) -> Result<T> {
        let g_bar = self.model.whitened_forward(x)?;
        Ok(GaussianErrorModel::projected_log_likelihood_whitened(&self.v_s, y_s, &g_bar))
    }

    /// Reduced-likelihood estimate from given standard normal inner draws.
    pub fn reduced_likelihood_with(&self, y_s: &[T], x_r: &[T], inner: &[Vec<T>]) -> Result<T> {
        check_len("y_s", y_s, self.dims.s)?;
        check_len("x_r", x_r, self.dims.r)?;
        if inner.is_empty() {
            return Err(Error::InvalidArgument("at least one inner draw is required".into()));
        }
        let mut lls = Vec::with_capacity(inner.len());
        for z in inner {
            let x_perp = self.cond.sample_with(x_r, z)?;
            let x = self.cond.assemble(x_r, &x_perp)?;
            lls.push(self.log_likelihood_at(y_s, &x)?);
        }
        Ok(log_mean_exp(&lls))
    }

    /// Monte Carlo estimate of `log π(y_s | x_r)` using the inner draws of
    /// stream `seed`.
    pub fn reduced_likelihood(&self, y_s: &[T], x_r: &[T], seed: u64) -> Result<T> {
        let mut rng = substream(seed, 0);
        let inner = self.draw_inner(&mut rng);
        self.reduced_likelihood_with(y_s, x_r, &inner)
    }
}

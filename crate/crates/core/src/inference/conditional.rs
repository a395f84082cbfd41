use rand::RngCore;

use crate::error::{check_dim, shape_err, Error, Result};
use crate::linalg::Matrix;
use crate::model::{check_len, GaussianPrior};
use crate::scalar::Real;
use crate::spectral::{spd_roots, sym_eig};

/// Gaussian prior split along an orthonormal basis `U = [U_r, U_⊥]`:
/// the marginal of `x_r = U_rᵀx` and the conditional of `x_⊥ = U_⊥ᵀx` given `x_r`.
#[derive(Clone, Debug)]
pub struct ConditionalPrior<T> {
    basis: Matrix<T>,
    r: usize,
    mean_r: Vec<T>,
    mean_perp: Vec<T>,
    /// `C_⊥r C_rr⁻¹`; `None` when the split is independent.
    gain: Option<Matrix<T>>,
    /// Symmetric root of the Schur complement; `None` means identity.
    cond_sqrt: Option<Matrix<T>>,
    marg_sqrt: Option<Matrix<T>>,
    marg_inv_sqrt: Option<Matrix<T>>,
    marg_log_det: T,
}

impl<T: Real> ConditionalPrior<T> {
    pub fn new(prior: &GaussianPrior<T>, basis: &Matrix<T>, r: usize) -> Result<Self> {
        let d = prior.dim();
        if basis.shape() != (d, d) {
            return Err(shape_err("conditional prior basis", format!("{d}x{d}"), basis.shape_str()));
        }
        check_dim("r", r, d)?;
        let defect = basis.orthonormality_defect();
        if defect > T::c(1e-8).max(T::epsilon() * T::c(1e3)) {
            return Err(Error::InvalidArgument(format!(
                "conditional prior needs an orthonormal basis (defect {defect})"
            )));
        }
        let m = basis.t_matvec(&prior.mean)?;
        let (mean_r, mean_perp) = (m[..r].to_vec(), m[r..].to_vec());
        if prior.sqrt.is_identity() {
            return Ok(ConditionalPrior {
                basis: basis.clone(),
                r,
                mean_r,
                mean_perp,
                gain: None,
                cond_sqrt: None,
                marg_sqrt: None,
                marg_inv_sqrt: None,
                marg_log_det: T::zero(),
            });
        }
        let mut c = basis.t_matmul(&prior.cov.matmul(basis)?)?;
        c.symmetrize();
        let c_rr = c.submatrix(0, r, 0, r);
        let c_pr = c.submatrix(r, d, 0, r);
        let c_pp = c.submatrix(r, d, r, d);
        let (gain, schur, marg_sqrt, marg_inv_sqrt, marg_log_det) = if r == 0 {
            (None, c_pp, None, None, T::zero())
        } else {
            let (sq, isq, sys) = spd_roots(&c_rr, T::zero())?;
            let inv = isq.matmul(&isq)?;
            let k = c_pr.matmul(&inv)?;
            let mut s = c_pp.sub(&k.matmul_t(&c_pr)?)?;
            s.symmetrize();
            let ld = sys.values.iter().map(|l| l.ln()).sum();
            (Some(k), s, Some(sq), Some(isq), ld)
        };
        let cond_sqrt = if d > r {
            let sys = sym_eig(&schur)?;
            Some(sys.apply(|l| l.max(T::zero()).sqrt()))
        } else {
            None
        };
        Ok(ConditionalPrior {
            basis: basis.clone(),
            r,
            mean_r,
            mean_perp,
            gain,
            cond_sqrt,
            marg_sqrt,
            marg_inv_sqrt,
            marg_log_det,
        })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn basis(&self) -> &Matrix<T> {
        &self.basis
    }

    /// `E[x_⊥ | x_r]`.
    pub fn mean(&self, x_r: &[T]) -> Result<Vec<T>> {
        check_len("x_r", x_r, self.r)?;
        let mut out = self.mean_perp.clone();
        if let Some(k) = &self.gain {
            let dev: Vec<T> = x_r.iter().zip(&self.mean_r).map(|(&a, &b)| a - b).collect();
            for (o, v) in out.iter_mut().zip(k.matvec(&dev)?) {
                *o += v;
            }
        }
        Ok(out)
    }

    /// Conditional draw driven by a standard normal vector `z` of length d−r.
    pub fn sample_with(&self, x_r: &[T], z: &[T]) -> Result<Vec<T>> {
        check_len("conditional noise", z, self.dim() - self.r)?;
        let mut out = self.mean(x_r)?;
        let step = match &self.cond_sqrt {
            Some(l) => l.matvec(z)?,
            None => z.to_vec(),
        };
        for (o, v) in out.iter_mut().zip(step) {
            *o += v;
        }
        Ok(out)
    }

    pub fn sample(&self, x_r: &[T], rng: &mut dyn RngCore) -> Result<Vec<T>> {
        let z: Vec<T> = (0..self.dim() - self.r)
            .map(|_| T::sample_standard_normal(rng))
            .collect();
        self.sample_with(x_r, &z)
    }

    /// `U_r x_r + U_⊥ x_⊥`.
    pub fn assemble(&self, x_r: &[T], x_perp: &[T]) -> Result<Vec<T>> {
        check_len("x_r", x_r, self.r)?;
        check_len("x_perp", x_perp, self.dim() - self.r)?;
        let mut z = x_r.to_vec();
        z.extend_from_slice(x_perp);
        self.basis.matvec(&z)
    }

    /// `U_rᵀ x`.
    pub fn project(&self, x: &[T]) -> Result<Vec<T>> {
        check_len("x", x, self.dim())?;
        Ok(self.basis.columns(0, self.r).t_matvec(x)?)
    }

    /// Marginal prior mean of `x_r`.
    pub fn marginal_mean(&self) -> &[T] {
        &self.mean_r
    }

    /// Applies the marginal prior root of `x_r` (used to shape proposals).
    pub fn marginal_sqrt_apply(&self, z: &[T]) -> Result<Vec<T>> {
        match &self.marg_sqrt {
            Some(l) => l.matvec(z),
            None => Ok(z.to_vec()),
        }
    }

    /// Log-density of the marginal prior of `x_r`.
    pub fn marginal_log_pdf(&self, x_r: &[T]) -> Result<T> {
        check_len("x_r", x_r, self.r)?;
        let dev: Vec<T> = x_r.iter().zip(&self.mean_r).map(|(&a, &b)| a - b).collect();
        let w = match &self.marg_inv_sqrt {
            Some(l) => l.matvec(&dev)?,
            None => dev,
        };
        let q: T = w.iter().map(|&v| v * v).sum();
        let r = T::from_usize_lossy(self.r);
        Ok(-T::c(0.5) * (q + self.marg_log_det + r * T::c(std::f64::consts::TAU.ln())))
    }
}

/// Draws `x_⊥ | x_r` for a Gaussian prior split by the orthonormal basis `u`.
pub fn conditional_prior_gaussian<T: Real>(
    prior: &GaussianPrior<T>,
    u: &Matrix<T>,
    r: usize,
    x_r: &[T],
    rng: &mut dyn RngCore,
) -> Result<Vec<T>> {
    ConditionalPrior::new(prior, u, r)?.sample(x_r, rng)
}

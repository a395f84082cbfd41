//! PCA and CCA baselines computed from joint moments.

use serde::Serialize;

use crate::error::{check_dim, shape_err, Error, Result};
use crate::linalg::Matrix;
use crate::model::BayesModel;
use crate::rng::substream;
use crate::scalar::Real;
use crate::spectral::{gen_eig, sym_eig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentSource {
    Sample,
    Exact,
}

/// First and second moments of `(X, Y)`.
#[derive(Clone, Debug)]
pub struct SampleMoments<T> {
    pub mean_x: Vec<T>,
    pub mean_y: Vec<T>,
    pub cov_x: Matrix<T>,
    pub cov_y: Matrix<T>,
    /// `Cov(X, Y)`, d×m.
    pub cov_xy: Matrix<T>,
    pub n: usize,
    pub source: MomentSource,
}

impl<T: Real> SampleMoments<T> {
    /// Unbiased moments of paired samples stored as rows of `xs` (n×d) and `ys` (n×m).
    pub fn from_samples(xs: &Matrix<T>, ys: &Matrix<T>) -> Result<Self> {
        let n = xs.rows();
        if ys.rows() != n {
            return Err(shape_err("moments", format!("{n} data samples"), format!("{}", ys.rows())));
        }
        if n < 2 {
            return Err(Error::InsufficientSamples { required: 2, found: n });
        }
        let mean_x = column_means(xs);
        let mean_y = column_means(ys);
        let cx = centered(xs, &mean_x);
        let cy = centered(ys, &mean_y);
        let denom = T::from_usize_lossy(n - 1);
        let mut cov_x = cx.t_matmul(&cx)?.scale(T::one() / denom);
        let mut cov_y = cy.t_matmul(&cy)?.scale(T::one() / denom);
        cov_x.symmetrize();
        cov_y.symmetrize();
        let cov_xy = cx.t_matmul(&cy)?.scale(T::one() / denom);
        Ok(SampleMoments {
            mean_x,
            mean_y,
            cov_x,
            cov_y,
            cov_xy,
            n,
            source: MomentSource::Sample,
        })
    }

    /// Pass-through of exact moments.
    pub fn exact(
        mean_x: Vec<T>,
        mean_y: Vec<T>,
        cov_x: Matrix<T>,
        cov_y: Matrix<T>,
        cov_xy: Matrix<T>,
    ) -> Result<Self> {
        let (d, m) = (mean_x.len(), mean_y.len());
        if cov_x.shape() != (d, d) || cov_y.shape() != (m, m) || cov_xy.shape() != (d, m) {
            return Err(shape_err(
                "exact moments",
                format!("{d}x{d}, {m}x{m}, {d}x{m}"),
                format!("{}, {}, {}", cov_x.shape_str(), cov_y.shape_str(), cov_xy.shape_str()),
            ));
        }
        crate::spectral::check_symmetric(&cov_x)?;
        crate::spectral::check_symmetric(&cov_y)?;
        Ok(SampleMoments {
            mean_x,
            mean_y,
            cov_x,
            cov_y,
            cov_xy,
            n: 0,
            source: MomentSource::Exact,
        })
    }

    pub fn dim_x(&self) -> usize {
        self.mean_x.len()
    }

    pub fn dim_y(&self) -> usize {
        self.mean_y.len()
    }
}

fn column_means<T: Real>(a: &Matrix<T>) -> Vec<T> {
    let mut mean = vec![T::zero(); a.cols()];
    for i in 0..a.rows() {
        for (m, &v) in mean.iter_mut().zip(a.row(i)) {
            *m += v;
        }
    }
    let n = T::from_usize_lossy(a.rows());
    mean.iter().map(|&v| v / n).collect()
}

fn centered<T: Real>(a: &Matrix<T>, mean: &[T]) -> Matrix<T> {
    Matrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] - mean[j])
}

/// Draws `n` joint samples from a model using the `(seed, i)` substreams.
/// Returns `(xs, ys)` with samples as rows.
pub fn joint_samples<T: Real>(model: &dyn BayesModel<T>, n: usize, seed: u64) -> Result<(Matrix<T>, Matrix<T>)> {
    use rayon::prelude::*;
    let pairs: Vec<Result<(Vec<T>, Vec<T>)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let x = model.sample_prior(&mut rng)?;
            let y = model.sample_likelihood(&x, &mut rng)?;
            Ok((x, y))
        })
        .collect();
    let (d, m) = (model.dim_x(), model.dim_y());
    let mut xs = Vec::with_capacity(n * d);
    let mut ys = Vec::with_capacity(n * m);
    for (i, p) in pairs.into_iter().enumerate() {
        let (x, y) = p.map_err(|e| Error::SamplingFailure { index: i, source: Box::new(e) })?;
        xs.extend(x);
        ys.extend(y);
    }
    Ok((Matrix::from_vec(n, d, xs)?, Matrix::from_vec(n, m, ys)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    X,
    Y,
}

/// Principal directions and variances.
#[derive(Clone, Debug)]
pub struct Pca<T> {
    pub basis: Matrix<T>,
    pub scores: Vec<T>,
}

pub fn pca<T: Real>(moments: &SampleMoments<T>, which: Which) -> Result<Pca<T>> {
    let cov = match which {
        Which::X => &moments.cov_x,
        Which::Y => &moments.cov_y,
    };
    let sys = sym_eig(cov)?;
    Ok(Pca {
        basis: sys.vectors,
        scores: sys.values.iter().map(|&v| v.max(T::zero())).collect(),
    })
}

/// Canonical directions and correlations.
///
/// `correlations` holds the generalized eigenvalues of
/// `Cov(X,Y)Cov(Y)⁻¹Cov(Y,X) u = ρ Cov(X) u`, which are squared canonical
/// correlations in [0, 1].
#[derive(Clone, Debug)]
pub struct Cca<T> {
    pub u: Matrix<T>,
    pub v: Matrix<T>,
    pub correlations: Vec<T>,
    pub ridge: (T, T),
}

/// Condition number beyond which a regularized covariance is rejected.
pub const MAX_CONDITION: f64 = 1e14;

/// Canonical correlation analysis with ridge regularization. `ridge = None`
/// uses `1e-10 · trace/dim` for each covariance.
pub fn cca<T: Real>(moments: &SampleMoments<T>, r: usize, ridge: Option<T>) -> Result<Cca<T>> {
    let (d, m) = (moments.dim_x(), moments.dim_y());
    check_dim("r", r, d.min(m))?;
    let default_ridge = |c: &Matrix<T>| T::c(1e-10) * c.trace() / T::from_usize_lossy(c.rows());
    let rx = ridge.unwrap_or_else(|| default_ridge(&moments.cov_x));
    let ry = ridge.unwrap_or_else(|| default_ridge(&moments.cov_y));
    if rx < T::zero() || ry < T::zero() {
        return Err(Error::NegativeInput { name: "ridge", value: rx.min(ry).to_f64_lossy() });
    }
    let mut cx = moments.cov_x.clone();
    cx.add_diag(rx);
    let mut cy = moments.cov_y.clone();
    cy.add_diag(ry);
    let cx_inv = regularized_inverse(&cx)?;
    let cy_inv = regularized_inverse(&cy)?;

    let cxy = &moments.cov_xy;
    let mut ax = cxy.matmul(&cy_inv)?.matmul_t(cxy)?;
    ax.symmetrize();
    let mut ay = cxy.t_matmul(&cx_inv.matmul(cxy)?)?;
    ay.symmetrize();
    let ex = gen_eig(&ax, &cx)?;
    let ey = gen_eig(&ay, &cy)?;

    let mut u = ex.vectors.columns(0, r);
    let v = ey.vectors.columns(0, r);
    // Orient each U column so the paired covariance uᵀ Cov(X,Y) v is nonnegative.
    let cv = cxy.matmul(&v)?;
    for k in 0..r {
        let mut c = T::zero();
        for i in 0..d {
            c += u[(i, k)] * cv[(i, k)];
        }
        if c < T::zero() {
            for i in 0..d {
                u[(i, k)] = -u[(i, k)];
            }
        }
    }
    let correlations = ex.values[..r]
        .iter()
        .map(|&v| v.max(T::zero()).min(T::one()))
        .collect();
    Ok(Cca {
        u,
        v,
        correlations,
        ridge: (rx, ry),
    })
}

fn regularized_inverse<T: Real>(c: &Matrix<T>) -> Result<Matrix<T>> {
    let sys = sym_eig(c)?;
    let hi = sys.max_value();
    let lo = sys.min_value();
    if !(lo > T::zero()) || hi / lo > T::c(MAX_CONDITION) {
        let cond = if lo > T::zero() { (hi / lo).to_f64_lossy() } else { f64::INFINITY };
        return Err(Error::SingularCovariance { condition: cond, limit: MAX_CONDITION });
    }
    Ok(sys.apply(|l| T::one() / l))
}

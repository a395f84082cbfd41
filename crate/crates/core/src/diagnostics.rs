//! Diagnostic matrices `H_X = E[MᵀM]` and `H_Y = E[MMᵀ]` of the mixed
//! gradient `M = ∇_x∇_y log π(y|x)`.

use std::ops::Range;

use crate::error::{shape_err, Error, Result};
use crate::linalg::Matrix;
use crate::model::{mixed_grad, BayesModel, Capabilities, WhiteningPair};
use crate::rng::substream;
use crate::scalar::Real;
use crate::spectral::svd_rect;

/// Estimated (or exact) pair of diagnostic matrices.
#[derive(Clone, Debug)]
pub struct DiagnosticPair<T> {
    pub h_x: Matrix<T>,
    pub h_y: Matrix<T>,
    pub n_samples: usize,
    pub whitened: bool,
    pub seed: u64,
}

impl<T: Real> DiagnosticPair<T> {
    pub fn new(h_x: Matrix<T>, h_y: Matrix<T>, n_samples: usize, whitened: bool, seed: u64) -> Result<Self> {
        if !h_x.is_square() || !h_y.is_square() {
            return Err(shape_err(
                "DiagnosticPair",
                "square matrices",
                format!("{} and {}", h_x.shape_str(), h_y.shape_str()),
            ));
        }
        crate::spectral::check_symmetric(&h_x)?;
        crate::spectral::check_symmetric(&h_y)?;
        Ok(DiagnosticPair {
            h_x,
            h_y,
            n_samples,
            whitened,
            seed,
        })
    }

    pub fn dim_x(&self) -> usize {
        self.h_x.rows()
    }

    pub fn dim_y(&self) -> usize {
        self.h_y.rows()
    }
}

/// Streaming accumulator for `Σ MᵀM` and `Σ MMᵀ`.
///
/// Only upper triangles are accumulated; `finish` mirrors and averages.
#[derive(Clone, Debug)]
pub struct DiagnosticAccumulator<T> {
    h_x: Matrix<T>,
    h_y: Matrix<T>,
    count: usize,
}

impl<T: Real> DiagnosticAccumulator<T> {
    pub fn new(d: usize, m: usize) -> Self {
        DiagnosticAccumulator {
            h_x: Matrix::zeros(d, d),
            h_y: Matrix::zeros(m, m),
            count: 0,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, g: &Matrix<T>) -> Result<()> {
        self.push_batch(std::slice::from_ref(g))
    }

    /// Adds several gradients at once; `H_Y` rows stay in cache across the
    /// whole batch.
    pub fn push_batch(&mut self, gs: &[Matrix<T>]) -> Result<()> {
        let (m, d) = (self.h_y.rows(), self.h_x.rows());
        for g in gs {
            if g.shape() != (m, d) {
                return Err(shape_err("DiagnosticAccumulator::push", format!("{m}x{d}"), g.shape_str()));
            }
        }
        for g in gs {
            for k in 0..m {
                let row = g.row(k);
                for i in 0..d {
                    let a = row[i];
                    if a == T::zero() {
                        continue;
                    }
                    let hrow = &mut self.h_x.row_mut(i)[i..];
                    for (h, &b) in hrow.iter_mut().zip(&row[i..]) {
                        *h += a * b;
                    }
                }
            }
        }
        // Row-wise axpys over each Mᵀ keep the inner loop contiguous, and
        // an H_Y row stays in cache for the whole batch.
        let stacked: Vec<Matrix<T>> = gs.iter().map(|g| g.transpose()).collect();
        for a in 0..m {
            let hrow = &mut self.h_y.row_mut(a)[a..];
            for gt in &stacked {
                for i in 0..d {
                    let col = gt.row(i);
                    let c = col[a];
                    if c == T::zero() {
                        continue;
                    }
                    for (h, &b) in hrow.iter_mut().zip(&col[a..]) {
                        *h += c * b;
                    }
                }
            }
        }
        self.count += gs.len();
        Ok(())
    }

    pub fn merge(mut self, other: DiagnosticAccumulator<T>) -> Result<Self> {
        if self.h_x.shape() != other.h_x.shape() || self.h_y.shape() != other.h_y.shape() {
            return Err(shape_err("DiagnosticAccumulator::merge", self.h_x.shape_str(), other.h_x.shape_str()));
        }
        for (a, &b) in self.h_x.as_mut_slice().iter_mut().zip(other.h_x.as_slice()) {
            *a += b;
        }
        for (a, &b) in self.h_y.as_mut_slice().iter_mut().zip(other.h_y.as_slice()) {
            *a += b;
        }
        self.count += other.count;
        Ok(self)
    }

    pub fn finish(self, whitened: bool, seed: u64) -> Result<DiagnosticPair<T>> {
        if self.count == 0 {
            return Err(Error::InsufficientSamples { required: 1, found: 0 });
        }
        let n = T::from_usize_lossy(self.count);
        let h_x = mirror_upper(&self.h_x, n);
        let h_y = mirror_upper(&self.h_y, n);
        Ok(DiagnosticPair {
            h_x,
            h_y,
            n_samples: self.count,
            whitened,
            seed,
        })
    }
}

fn mirror_upper<T: Real>(a: &Matrix<T>, n: T) -> Matrix<T> {
    let p = a.rows();
    let mut out = Matrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = a[(i, j)] / n;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Number of samples handled sequentially at the leaves of the reduction tree.
const LEAF: usize = 32;

/// Monte Carlo estimate of the diagnostic matrices.
///
/// Sample `i` draws `Xⁱ ~ π_X`, `Yⁱ ~ π_{Y|Xⁱ}` from substream `(seed, i)`.
/// The partial sums are combined along a fixed binary tree over index
/// ranges, so the result is bitwise identical for any number of threads.
pub fn estimate_diagnostics<T: Real>(
    model: &dyn BayesModel<T>,
    n: usize,
    seed: u64,
) -> Result<DiagnosticPair<T>> {
    if n == 0 {
        return Err(Error::InsufficientSamples { required: 1, found: 0 });
    }
    model.capabilities().require(
        Capabilities::PRIOR_SAMPLE | Capabilities::LIKELIHOOD_SAMPLE | Capabilities::MIXED_GRAD,
        "prior sampling, likelihood sampling and mixed gradients",
    )?;
    let acc = accumulate(model, 0..n, seed)?;
    acc.finish(model.is_whitened(), seed)
}

fn accumulate<T: Real>(
    model: &dyn BayesModel<T>,
    range: Range<usize>,
    seed: u64,
) -> Result<DiagnosticAccumulator<T>> {
    if range.len() <= LEAF {
        let mut acc = DiagnosticAccumulator::new(model.dim_x(), model.dim_y());
        let mut grads = Vec::with_capacity(range.len());
        for i in range {
            grads.push(
                sample_gradient(model, i, seed)
                    .map_err(|e| Error::SamplingFailure { index: i, source: Box::new(e) })?,
            );
        }
        acc.push_batch(&grads)?;
        return Ok(acc);
    }
    // Split at a multiple of LEAF so the tree shape depends only on n.
    let half = range.len().div_ceil(2).div_ceil(LEAF) * LEAF;
    let mid = range.start + half.min(range.len());
    let (left, right) = rayon::join(
        || accumulate(model, range.start..mid, seed),
        || accumulate(model, mid..range.end, seed),
    );
    left?.merge(right?)
}

/// Mixed gradient at the `i`-th joint sample of the `(seed, i)` stream.
pub fn sample_gradient<T: Real>(model: &dyn BayesModel<T>, i: usize, seed: u64) -> Result<Matrix<T>> {
    let mut rng = substream(seed, i as u64);
    let x = model.sample_prior(&mut rng)?;
    let y = model.sample_likelihood(&x, &mut rng)?;
    mixed_grad(model, &x, &y)
}

/// Closed-form whitened diagnostics of a linear model.
///
/// With `A = Γ_pr^{1/2} Gᵀ Γ_obs^{-1/2}` (d×m), `H_X̄ = A Aᵀ` and `H_Ȳ = Aᵀ A`;
/// the singular values of A are returned as well.
pub fn diagnostics_linear_gaussian<T: Real>(
    g: &Matrix<T>,
    whitening: &WhiteningPair<T>,
) -> Result<(DiagnosticPair<T>, Vec<T>)> {
    let (m, d) = g.shape();
    if whitening.pr_sqrt.shape() != (d, d) || whitening.obs_inv_sqrt.shape() != (m, m) {
        return Err(shape_err(
            "diagnostics_linear_gaussian",
            format!("whitening for d={d}, m={m}"),
            format!(
                "pr {} / obs {}",
                whitening.pr_sqrt.shape_str(),
                whitening.obs_inv_sqrt.shape_str()
            ),
        ));
    }
    let a = whitening
        .pr_sqrt
        .matmul(&g.transpose())?
        .matmul(&whitening.obs_inv_sqrt)?;
    let svd = svd_rect(&a)?;
    let mut h_x = a.matmul_t(&a)?;
    let mut h_y = a.t_matmul(&a)?;
    h_x.symmetrize();
    h_y.symmetrize();
    let pair = DiagnosticPair {
        h_x,
        h_y,
        n_samples: 0,
        whitened: true,
        seed: 0,
    };
    Ok((pair, svd.sigma))
}

/// Upper bound `½(2 + σ² + σ√(σ² + 4))` on the subspace log-Sobolev
/// constant of a whitened linear–Gaussian joint density.
pub fn lsi_bound_linear_gaussian<T: Real>(sigma_max: T) -> Result<T> {
    if sigma_max < T::zero() || sigma_max.is_nan() {
        return Err(Error::NegativeInput {
            name: "sigma_max",
            value: sigma_max.to_f64_lossy(),
        });
    }
    let s2 = sigma_max * sigma_max;
    Ok(T::c(0.5) * (T::c(2.0) + s2 + sigma_max * (s2 + T::c(4.0)).sqrt()))
}

//! Blob image observed through continuous-Bernoulli pixels.
//!
//! Pixel `(i, j)` (row `i`, column `j`) sits at the cell centre
//! `(c_j, c_i)` of a uniform grid over `[−16, 16]²`; the first parameter
//! moves the blob horizontally (columns), the second vertically (rows).
//! Data are flattened row-major, index `i·grid + j`.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{check_len, BayesModel, Capabilities};
use crate::scalar::Real;

pub const DOMAIN_HALF_WIDTH: f64 = 16.0;
pub const GAMMA_RANGE: (f64, f64) = (0.25, 5.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageParam {
    X1,
    X2,
    Gamma,
}

impl ImageParam {
    fn index(self) -> usize {
        match self {
            ImageParam::X1 => 0,
            ImageParam::X2 => 1,
            ImageParam::Gamma => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImageConfig {
    pub grid: usize,
    pub sigma_blob: f64,
    /// Parameters whose gradient columns enter the diagnostics. Masked-out
    /// parameters stay random under the prior.
    pub param_mask: Vec<ImageParam>,
    /// When set, `γ` is fixed and the parameter is `(x1, x2)` only.
    pub fixed_gamma: Option<f64>,
}

impl Default for ImageConfig {
    fn default() -> Self {
        ImageConfig {
            grid: 32,
            sigma_blob: 3.0,
            param_mask: vec![ImageParam::X1, ImageParam::X2, ImageParam::Gamma],
            fixed_gamma: None,
        }
    }
}

impl ImageConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.grid == 0 {
            errs.push("grid must be positive".to_string());
        }
        if !(self.sigma_blob > 0.0) {
            errs.push("sigma_blob must be positive".to_string());
        }
        if self.param_mask.is_empty() {
            errs.push("param_mask must name at least one parameter".to_string());
        }
        if let Some(g) = self.fixed_gamma {
            if !(GAMMA_RANGE.0..=GAMMA_RANGE.1).contains(&g) {
                errs.push(format!("fixed_gamma must lie in [{}, {}]", GAMMA_RANGE.0, GAMMA_RANGE.1));
            }
            if self.param_mask.contains(&ImageParam::Gamma) && self.param_mask.len() == 1 {
                errs.push("param_mask names only gamma, which is fixed".to_string());
            }
        }
        errs
    }
}

/// Pixel probabilities and their parameter gradients.
#[derive(Clone, Debug)]
pub struct ImageProbabilities<T> {
    /// `grid × grid`.
    pub p: Matrix<T>,
    /// `grid² × 3`, rows in flattened pixel order, columns `(x1, x2, γ)`.
    pub grad: Matrix<T>,
}

/// Cell-centre coordinates of a grid over `[−16, 16]`.
pub fn pixel_centres<T: Real>(grid: usize) -> Vec<T> {
    let h = 2.0 * DOMAIN_HALF_WIDTH / grid as f64;
    (0..grid)
        .map(|k| T::c(-DOMAIN_HALF_WIDTH + (k as f64 + 0.5) * h))
        .collect()
}

fn check_support<T: Real>(x1: T, x2: T, gamma: T) -> Result<()> {
    let w = T::c(DOMAIN_HALF_WIDTH);
    let inside = |v: T, lo: T, hi: T| v >= lo && v <= hi;
    if !inside(x1, -w, w) || !inside(x2, -w, w) || !inside(gamma, T::c(GAMMA_RANGE.0), T::c(GAMMA_RANGE.1)) {
        return Err(Error::Domain(format!(
            "image parameter ({x1}, {x2}, {gamma}) outside [-16, 16]^2 x [0.25, 5]"
        )));
    }
    Ok(())
}

/// `p_ij = 0.9 − 0.8 exp(−½ q^γ)` with `q = ((c_j − x1)² + (c_i − x2)²)/σ²`.
pub fn image_probabilities<T: Real>(x: [T; 3], grid: usize, sigma: T) -> Result<ImageProbabilities<T>> {
    let [x1, x2, gamma] = x;
    check_support(x1, x2, gamma)?;
    let c = pixel_centres::<T>(grid);
    let inv_s2 = T::one() / (sigma * sigma);
    let mut p = Matrix::zeros(grid, grid);
    let mut grad = Matrix::zeros(grid * grid, 3);
    let half = T::c(0.5);
    let two = T::c(2.0);
    for i in 0..grid {
        let dy = c[i] - x2;
        for j in 0..grid {
            let dx = c[j] - x1;
            let q = (dx * dx + dy * dy) * inv_s2;
            let qg = q.powf(gamma);
            let e = (-half * qg).exp();
            p[(i, j)] = T::c(0.9) - T::c(0.8) * e;
            // ∂p = 0.4 e ∂(q^γ)
            let k = T::c(0.4) * e;
            let row = grad.row_mut(i * grid + j);
            if q > T::zero() {
                let dqg_dq = gamma * qg / q;
                row[0] = k * dqg_dq * (-two * dx * inv_s2);
                row[1] = k * dqg_dq * (-two * dy * inv_s2);
                row[2] = k * qg * q.ln();
            }
        }
    }
    Ok(ImageProbabilities { p, grad })
}

/// `ln C(λ)` for the continuous-Bernoulli normalizer
/// `C(λ) = 2 artanh(1 − 2λ) / (1 − 2λ)`.
pub fn cb_log_normalizer<T: Real>(lambda: T) -> T {
    let t = T::one() - T::c(2.0) * lambda;
    if t.abs() < T::c(1e-4) {
        let t2 = t * t;
        (T::c(2.0) * (T::one() + t2 / T::c(3.0) + t2 * t2 / T::c(5.0))).ln()
    } else {
        (T::c(2.0) * t.atanh() / t).ln()
    }
}

/// `ln C(λ) + y ln λ + (1 − y) ln(1 − λ)`.
pub fn cb_log_pdf<T: Real>(y: T, lambda: T) -> T {
    cb_log_normalizer(lambda) + y * lambda.ln() + (T::one() - y) * (T::one() - lambda).ln()
}

/// Inverse CDF of the continuous Bernoulli distribution.
pub fn cb_quantile<T: Real>(u: T, lambda: T) -> T {
    let eta = (lambda / (T::one() - lambda)).ln();
    if eta.abs() < T::c(1e-8) {
        return u;
    }
    (u * eta.exp_m1()).ln_1p() / eta
}

/// Mean of the continuous Bernoulli distribution.
pub fn cb_mean<T: Real>(lambda: T) -> T {
    let t = T::one() - T::c(2.0) * lambda;
    if t.abs() < T::c(1e-4) {
        // expansion about λ = ½ in δ = λ − ½
        let d = -t / T::c(2.0);
        return T::c(0.5) + d / T::c(3.0) + T::c(16.0 / 45.0) * d * d * d;
    }
    lambda / (T::c(2.0) * lambda - T::one()) + T::one() / (T::c(2.0) * (T::one() - T::c(2.0) * lambda).atanh())
}

#[derive(Clone, Debug)]
pub struct ImageProblem<T: Real> {
    grid: usize,
    sigma: T,
    mask: [bool; 3],
    fixed_gamma: Option<T>,
}

impl<T: Real> ImageProblem<T> {
    pub fn new(cfg: &ImageConfig) -> Result<Self> {
        let errs = cfg.validate();
        if !errs.is_empty() {
            return Err(Error::InvalidArgument(errs.join("; ")));
        }
        let mut mask = [false; 3];
        for p in &cfg.param_mask {
            mask[p.index()] = true;
        }
        Ok(ImageProblem {
            grid: cfg.grid,
            sigma: T::c(cfg.sigma_blob),
            mask,
            fixed_gamma: cfg.fixed_gamma.map(T::c),
        })
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn mask(&self) -> [bool; 3] {
        self.mask
    }

    /// Pixel area relative to a unit cell, `(32/grid)²`.
    pub fn pixel_area(&self) -> T {
        let h = T::c(2.0 * DOMAIN_HALF_WIDTH) / T::from_usize_lossy(self.grid);
        h * h
    }

    fn full_param(&self, x: &[T]) -> Result<[T; 3]> {
        check_len("image parameter", x, self.dim_x())?;
        Ok(match self.fixed_gamma {
            Some(g) => [x[0], x[1], g],
            None => [x[0], x[1], x[2]],
        })
    }

    pub fn probabilities(&self, x: &[T]) -> Result<ImageProbabilities<T>> {
        image_probabilities(self.full_param(x)?, self.grid, self.sigma)
    }

    fn check_data(&self, y: &[T]) -> Result<()> {
        check_len("image data", y, self.dim_y())?;
        for (k, &v) in y.iter().enumerate() {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::Domain(format!("pixel {k} value {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

impl<T: Real> BayesModel<T> for ImageProblem<T> {
    fn dim_x(&self) -> usize {
        if self.fixed_gamma.is_some() {
            2
        } else {
            3
        }
    }

    fn dim_y(&self) -> usize {
        self.grid * self.grid
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities::PRIOR_SAMPLE
            | Capabilities::LIKELIHOOD_SAMPLE
            | Capabilities::LIKELIHOOD_LOGPDF
            | Capabilities::MIXED_GRAD
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Result<Vec<T>> {
        let w = T::c(DOMAIN_HALF_WIDTH);
        let mut x = vec![T::sample_uniform(rng, -w, w), T::sample_uniform(rng, -w, w)];
        if self.fixed_gamma.is_none() {
            x.push(T::sample_uniform(rng, T::c(GAMMA_RANGE.0), T::c(GAMMA_RANGE.1)));
        }
        Ok(x)
    }

    fn sample_likelihood(&self, x: &[T], rng: &mut dyn RngCore) -> Result<Vec<T>> {
        let probs = self.probabilities(x)?;
        Ok(probs
            .p
            .as_slice()
            .iter()
            .map(|&l| cb_quantile(T::sample_open01(rng), l))
            .collect())
    }

    fn log_likelihood(&self, y: &[T], x: &[T]) -> Result<T> {
        self.check_data(y)?;
        let probs = self.probabilities(x)?;
        let terms: Vec<T> = y
            .iter()
            .zip(probs.p.as_slice())
            .map(|(&yi, &l)| cb_log_pdf(yi, l))
            .collect();
        Ok(crate::scalar::pairwise_sum(&terms))
    }

    fn mixed_grad(&self, x: &[T], y: &[T]) -> Result<Matrix<T>> {
        self.check_data(y)?;
        let probs = self.probabilities(x)?;
        let d = self.dim_x();
        let mut out = Matrix::zeros(self.dim_y(), d);
        for (k, &l) in probs.p.as_slice().iter().enumerate() {
            let w = T::one() / (l * (T::one() - l));
            let g = probs.grad.row(k);
            let row = out.row_mut(k);
            for j in 0..d {
                if self.mask[j] {
                    row[j] = g[j] * w;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn centre_pixel_at_gamma_one() {
        // grid 4 has a cell centre at (-12, -12) ... (12, 12) in steps of 8
        let pr = image_probabilities([4.0_f64, -4.0, 1.0], 4, 3.0).unwrap();
        assert!((pr.p[(1, 2)] - 0.1).abs() < 1e-15);
        assert_eq!(pr.grad.row(1 * 4 + 2), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn distant_pixels_approach_upper_level() {
        let pr = image_probabilities([16.0_f64, 16.0, 2.0], 32, 3.0).unwrap();
        assert!((pr.p[(0, 0)] - 0.9).abs() < 1e-12);
        assert!(pr.p.as_slice().iter().all(|&p| p >= 0.1 && p <= 0.9));
    }

    #[test]
    fn horizontal_parameter_moves_columns() {
        let pr = image_probabilities([-12.0_f64, 12.0, 1.0], 4, 3.0).unwrap();
        // minimum at column 0, row 3
        assert!((pr.p[(3, 0)] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_outside_support() {
        assert!(image_probabilities([17.0, 0.0, 1.0], 4, 3.0).is_err());
        assert!(image_probabilities([0.0, 0.0, 0.1], 4, 3.0).is_err());
        let p = ImageProblem::<f64>::new(&ImageConfig { grid: 2, ..Default::default() }).unwrap();
        assert!(matches!(
            p.mixed_grad(&[0.0, 0.0, 1.0], &[0.5, 1.5, 0.2, 0.2]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let h = 1e-5;
        let mut rng = substream(3, 0);
        let prob = ImageProblem::<f64>::new(&ImageConfig { grid: 8, ..Default::default() }).unwrap();
        for _ in 0..10 {
            let mut x = prob.sample_prior(&mut rng).unwrap();
            x[2] = x[2].max(0.6);
            let pr = prob.probabilities(&x).unwrap();
            for k in 0..3 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let pp = prob.probabilities(&xp).unwrap().p;
                let pm = prob.probabilities(&xm).unwrap().p;
                for idx in 0..64 {
                    let fd = (pp.as_slice()[idx] - pm.as_slice()[idx]) / (2.0 * h);
                    let an = pr.grad[(idx, k)];
                    assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "{fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn normalizer_integrates_to_one() {
        for &l in &[0.1, 0.3, 0.5, 0.5 + 1e-6, 0.77, 0.9] {
            let n = 20000;
            let s: f64 = (0..n)
                .map(|k| cb_log_pdf((k as f64 + 0.5) / n as f64, l).exp())
                .sum::<f64>()
                / n as f64;
            assert!((s - 1.0).abs() < 1e-6, "{l}: {s}");
        }
    }

    #[test]
    fn quantile_inverts_cdf_and_matches_mean() {
        for &l in &[0.1, 0.42, 0.5, 0.9] {
            let n = 20000;
            let m: f64 = (0..n).map(|k| cb_quantile((k as f64 + 0.5) / n as f64, l)).sum::<f64>() / n as f64;
            assert!((m - cb_mean(l)).abs() < 1e-6, "{l}: {m} vs {}", cb_mean(l));
            let y = cb_quantile(0.3, l);
            assert!(y > 0.0 && y < 1.0);
        }
        assert!((cb_mean(0.5_f64) - 0.5).abs() < 1e-15);
        assert!((cb_mean(0.5 + 1e-5_f64) - cb_mean(0.5 + 2e-4)).abs() < 1e-4);
    }

    #[test]
    fn fixed_gamma_reduces_dimension() {
        let cfg = ImageConfig { grid: 4, fixed_gamma: Some(1.0), ..Default::default() };
        let p = ImageProblem::<f64>::new(&cfg).unwrap();
        assert_eq!((p.dim_x(), p.dim_y()), (2, 16));
        let g = p.mixed_grad(&[1.0, 2.0], &[0.5; 16]).unwrap();
        assert_eq!(g.shape(), (16, 2));
    }

    #[test]
    fn defaults() {
        let p = ImageProblem::<f64>::new(&ImageConfig::default()).unwrap();
        assert_eq!((p.dim_x(), p.dim_y()), (3, 1024));
    }
}

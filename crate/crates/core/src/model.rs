//! Bayesian model contract and the Gaussian error model specialization.

use std::sync::Arc;

use bitflags::bitflags;
use rand::RngCore;

use crate::error::{shape_err, Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::Real;
use crate::spectral::{check_symmetric, spd_roots};

bitflags! {
    /// Operations a model implements.
    #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
    pub struct Capabilities: u32 {
        const PRIOR_SAMPLE = 1;
        const LIKELIHOOD_SAMPLE = 1 << 1;
        const LIKELIHOOD_LOGPDF = 1 << 2;
        const MIXED_GRAD = 1 << 3;
        const FORWARD_JACOBIAN = 1 << 4;
        const CONDITIONAL_PRIOR = 1 << 5;
    }
}

impl Capabilities {
    pub fn require(self, needed: Capabilities, what: &'static str) -> Result<()> {
        if self.contains(needed) {
            Ok(())
        } else {
            Err(Error::UnsupportedCapability(what))
        }
    }
}

/// A joint density `π(x) π(y|x)` that can be sampled and differentiated.
///
/// Implementations must be immutable after construction; all randomness is
/// supplied by the caller.
pub trait BayesModel<T: Real>: Send + Sync {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;
    fn capabilities(&self) -> Capabilities;

    fn sample_prior(&self, _rng: &mut dyn RngCore) -> Result<Vec<T>> {
        Err(Error::UnsupportedCapability("prior sampling"))
    }

    fn sample_likelihood(&self, _x: &[T], _rng: &mut dyn RngCore) -> Result<Vec<T>> {
        Err(Error::UnsupportedCapability("likelihood sampling"))
    }

    fn log_likelihood(&self, _y: &[T], _x: &[T]) -> Result<T> {
        Err(Error::UnsupportedCapability("likelihood evaluation"))
    }

    /// The m×d matrix with entries `∂²/∂x_j∂y_i log π(y|x)`.
    fn mixed_grad(&self, _x: &[T], _y: &[T]) -> Result<Matrix<T>> {
        Err(Error::UnsupportedCapability("mixed gradients"))
    }

    fn gaussian_prior(&self) -> Option<&GaussianPrior<T>> {
        None
    }

    fn gaussian_error(&self) -> Option<&GaussianErrorModel<T>> {
        None
    }

    /// True when the prior is standard normal and the noise is white, so
    /// the model's own coordinates are the whitened ones.
    fn is_whitened(&self) -> bool {
        false
    }
}

/// Checked mixed gradient: validates capability, argument lengths and the
/// returned shape.
pub fn mixed_grad<T: Real>(model: &dyn BayesModel<T>, x: &[T], y: &[T]) -> Result<Matrix<T>> {
    model
        .capabilities()
        .require(Capabilities::MIXED_GRAD, "mixed gradients")?;
    check_len("mixed_grad x", x, model.dim_x())?;
    check_len("mixed_grad y", y, model.dim_y())?;
    let g = model.mixed_grad(x, y)?;
    if g.shape() != (model.dim_y(), model.dim_x()) {
        return Err(shape_err(
            "mixed_grad result",
            format!("{}x{}", model.dim_y(), model.dim_x()),
            g.shape_str(),
        ));
    }
    Ok(g)
}

pub(crate) fn check_len<T>(ctx: &'static str, v: &[T], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(shape_err(ctx, format!("length {n}"), format!("length {}", v.len())));
    }
    Ok(())
}

/// A symmetric factor stored in the cheapest exact form.
#[derive(Clone, Debug)]
pub enum SymFactor<T> {
    Identity(usize),
    Diagonal(Vec<T>),
    Dense(Matrix<T>),
}

impl<T: Real> SymFactor<T> {
    pub fn from_matrix(m: &Matrix<T>) -> Self {
        let n = m.rows();
        let mut diagonal = true;
        let mut identity = true;
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if i == j {
                    identity &= v == T::one();
                } else if v != T::zero() {
                    diagonal = false;
                    identity = false;
                }
            }
        }
        if identity {
            SymFactor::Identity(n)
        } else if diagonal {
            SymFactor::Diagonal(m.diag())
        } else {
            SymFactor::Dense(m.clone())
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, SymFactor::Identity(_))
    }

    pub fn apply(&self, v: &[T]) -> Vec<T> {
        match self {
            SymFactor::Identity(_) => v.to_vec(),
            SymFactor::Diagonal(d) => d.iter().zip(v).map(|(&a, &b)| a * b).collect(),
            SymFactor::Dense(m) => m.matvec(v).expect("factor dimension"),
        }
    }

    /// `F · A`.
    pub fn left(&self, a: &Matrix<T>) -> Matrix<T> {
        match self {
            SymFactor::Identity(_) => a.clone(),
            SymFactor::Diagonal(d) => Matrix::from_fn(a.rows(), a.cols(), |i, j| d[i] * a[(i, j)]),
            SymFactor::Dense(m) => m.matmul(a).expect("factor dimension"),
        }
    }

    /// `A · F`.
    pub fn right(&self, a: &Matrix<T>) -> Matrix<T> {
        match self {
            SymFactor::Identity(_) => a.clone(),
            SymFactor::Diagonal(d) => Matrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] * d[j]),
            SymFactor::Dense(m) => a.matmul(m).expect("factor dimension"),
        }
    }
}

/// How small eigenvalues are floored before inversion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Jitter {
    /// Floor at `factor · λ_max`.
    Relative(f64),
    /// Floor at a fixed value.
    Absolute(f64),
}

impl Default for Jitter {
    fn default() -> Self {
        Jitter::Relative(1e-12)
    }
}

/// Symmetric square roots of the prior and noise covariances.
#[derive(Clone, Debug)]
pub struct WhiteningPair<T> {
    pub pr_sqrt: Matrix<T>,
    pub pr_inv_sqrt: Matrix<T>,
    pub obs_sqrt: Matrix<T>,
    pub obs_inv_sqrt: Matrix<T>,
    /// Condition numbers of Γ_pr and Γ_obs after flooring.
    pub condition_numbers: [T; 2],
    pub pr_log_det: T,
    pub obs_log_det: T,
}

struct Roots<T> {
    sqrt: Matrix<T>,
    inv_sqrt: Matrix<T>,
    cond: T,
    log_det: T,
}

fn roots<T: Real>(a: &Matrix<T>, jitter: Jitter) -> Result<Roots<T>> {
    check_symmetric(a)?;
    let lmax = crate::spectral::sym_eig(a)?.max_value();
    let floor = match jitter {
        Jitter::Relative(f) => {
            if f < 0.0 {
                return Err(Error::NegativeInput { name: "jitter", value: f });
            }
            T::c(f) * lmax.max(T::zero())
        }
        Jitter::Absolute(f) => {
            if f < 0.0 {
                return Err(Error::NegativeInput { name: "jitter", value: f });
            }
            T::c(f)
        }
    };
    let (sqrt, inv_sqrt, sys) = spd_roots(a, floor)?;
    let clamped: Vec<T> = sys.values.iter().map(|&l| l.max(floor)).collect();
    let lo = *clamped.last().expect("nonempty");
    let hi = clamped[0];
    let log_det = clamped.iter().map(|l| l.ln()).sum();
    Ok(Roots {
        sqrt,
        inv_sqrt,
        cond: hi / lo,
        log_det,
    })
}

/// Symmetric (spectral) square roots of both covariances.
pub fn whitening_from_covs<T: Real>(
    pr_cov: &Matrix<T>,
    obs_cov: &Matrix<T>,
    jitter: Jitter,
) -> Result<WhiteningPair<T>> {
    let pr = roots(pr_cov, jitter)?;
    let obs = roots(obs_cov, jitter)?;
    Ok(WhiteningPair {
        pr_sqrt: pr.sqrt,
        pr_inv_sqrt: pr.inv_sqrt,
        obs_sqrt: obs.sqrt,
        obs_inv_sqrt: obs.inv_sqrt,
        condition_numbers: [pr.cond, obs.cond],
        pr_log_det: pr.log_det,
        obs_log_det: obs.log_det,
    })
}

/// Gaussian prior `N(μ, Γ)` with cached symmetric roots.
#[derive(Clone, Debug)]
pub struct GaussianPrior<T> {
    pub mean: Vec<T>,
    pub cov: Matrix<T>,
    pub sqrt: SymFactor<T>,
    pub inv_sqrt: SymFactor<T>,
    pub log_det: T,
}

impl<T: Real> GaussianPrior<T> {
    pub fn new(mean: Vec<T>, cov: Matrix<T>) -> Result<Self> {
        if cov.shape() != (mean.len(), mean.len()) {
            return Err(shape_err(
                "GaussianPrior",
                format!("{0}x{0}", mean.len()),
                cov.shape_str(),
            ));
        }
        let r = roots(&cov, Jitter::default())?;
        Ok(Self::from_parts(mean, cov, &r.sqrt, &r.inv_sqrt, r.log_det))
    }

    fn from_parts(
        mean: Vec<T>,
        cov: Matrix<T>,
        sqrt: &Matrix<T>,
        inv_sqrt: &Matrix<T>,
        log_det: T,
    ) -> Self {
        let (sqrt, inv_sqrt) = if SymFactor::from_matrix(&cov).is_identity() {
            (SymFactor::Identity(mean.len()), SymFactor::Identity(mean.len()))
        } else {
            (SymFactor::from_matrix(sqrt), SymFactor::from_matrix(inv_sqrt))
        };
        GaussianPrior {
            mean,
            cov,
            sqrt,
            inv_sqrt,
            log_det,
        }
    }

    pub fn standard(d: usize) -> Self {
        GaussianPrior {
            mean: vec![T::zero(); d],
            cov: Matrix::identity(d),
            sqrt: SymFactor::Identity(d),
            inv_sqrt: SymFactor::Identity(d),
            log_det: T::zero(),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn is_standard(&self) -> bool {
        self.sqrt.is_identity() && self.mean.iter().all(|&m| m == T::zero())
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Vec<T> {
        let z: Vec<T> = (0..self.dim())
            .map(|_| T::sample_standard_normal(rng))
            .collect();
        self.unwhiten(&z)
    }

    pub fn whiten(&self, x: &[T]) -> Vec<T> {
        let c: Vec<T> = x.iter().zip(&self.mean).map(|(&a, &b)| a - b).collect();
        self.inv_sqrt.apply(&c)
    }

    pub fn unwhiten(&self, z: &[T]) -> Vec<T> {
        let mut x = self.sqrt.apply(z);
        for (xi, &m) in x.iter_mut().zip(&self.mean) {
            *xi += m;
        }
        x
    }

    pub fn log_pdf(&self, x: &[T]) -> T {
        let z = self.whiten(x);
        let d = T::from_usize_lossy(self.dim());
        -T::c(0.5) * (dot(&z, &z) + self.log_det + d * T::c(std::f64::consts::TAU.ln()))
    }
}

/// Deterministic map `x ↦ G(x)` with an analytic Jacobian.
pub trait ForwardModel<T: Real>: Send + Sync {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;
    fn eval(&self, x: &[T]) -> Result<Vec<T>>;
    fn jacobian(&self, x: &[T]) -> Result<Matrix<T>>;

    fn eval_with_jacobian(&self, x: &[T]) -> Result<(Vec<T>, Matrix<T>)> {
        Ok((self.eval(x)?, self.jacobian(x)?))
    }

    /// The constant Jacobian when the map is affine.
    fn linear_part(&self) -> Option<&Matrix<T>> {
        None
    }
}

/// Affine forward map `G x + b`.
#[derive(Clone, Debug)]
pub struct LinearForward<T> {
    pub g: Matrix<T>,
    pub offset: Option<Vec<T>>,
}

impl<T: Real> LinearForward<T> {
    pub fn new(g: Matrix<T>) -> Self {
        LinearForward { g, offset: None }
    }
}

impl<T: Real> ForwardModel<T> for LinearForward<T> {
    fn dim_x(&self) -> usize {
        self.g.cols()
    }

    fn dim_y(&self) -> usize {
        self.g.rows()
    }

    fn eval(&self, x: &[T]) -> Result<Vec<T>> {
        let mut y = self.g.matvec(x)?;
        if let Some(b) = &self.offset {
            for (yi, &bi) in y.iter_mut().zip(b) {
                *yi += bi;
            }
        }
        Ok(y)
    }

    fn jacobian(&self, _x: &[T]) -> Result<Matrix<T>> {
        Ok(self.g.clone())
    }

    fn linear_part(&self) -> Option<&Matrix<T>> {
        Some(&self.g)
    }
}

/// `y = G(x) + ε`, `ε ~ N(0, Γ_obs)`, `x ~ N(μ_pr, Γ_pr)`.
#[derive(Clone)]
pub struct GaussianErrorModel<T: Real> {
    forward: Arc<dyn ForwardModel<T>>,
    prior: GaussianPrior<T>,
    noise_cov: Matrix<T>,
    noise_sqrt: SymFactor<T>,
    noise_inv_sqrt: SymFactor<T>,
    noise_log_det: T,
    whitening: WhiteningPair<T>,
}

impl<T: Real> std::fmt::Debug for GaussianErrorModel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GaussianErrorModel")
            .field("dim_x", &self.forward.dim_x())
            .field("dim_y", &self.forward.dim_y())
            .finish()
    }
}

impl<T: Real> GaussianErrorModel<T> {
    pub fn new(
        forward: Arc<dyn ForwardModel<T>>,
        prior_mean: Vec<T>,
        prior_cov: Matrix<T>,
        noise_cov: Matrix<T>,
    ) -> Result<Self> {
        Self::with_jitter(forward, prior_mean, prior_cov, noise_cov, Jitter::default())
    }

    pub fn with_jitter(
        forward: Arc<dyn ForwardModel<T>>,
        prior_mean: Vec<T>,
        prior_cov: Matrix<T>,
        noise_cov: Matrix<T>,
        jitter: Jitter,
    ) -> Result<Self> {
        let (d, m) = (forward.dim_x(), forward.dim_y());
        if d == 0 || m == 0 {
            return Err(Error::InvalidArgument("model dimensions must be positive".into()));
        }
        check_len("prior mean", &prior_mean, d)?;
        if prior_cov.shape() != (d, d) {
            return Err(shape_err("prior covariance", format!("{d}x{d}"), prior_cov.shape_str()));
        }
        if noise_cov.shape() != (m, m) {
            return Err(shape_err("noise covariance", format!("{m}x{m}"), noise_cov.shape_str()));
        }
        let whitening = whitening_from_covs(&prior_cov, &noise_cov, jitter)?;
        let prior = GaussianPrior::from_parts(
            prior_mean,
            prior_cov,
            &whitening.pr_sqrt,
            &whitening.pr_inv_sqrt,
            whitening.pr_log_det,
        );
        let (noise_sqrt, noise_inv_sqrt) = if SymFactor::from_matrix(&noise_cov).is_identity() {
            (SymFactor::Identity(m), SymFactor::Identity(m))
        } else {
            (
                SymFactor::from_matrix(&whitening.obs_sqrt),
                SymFactor::from_matrix(&whitening.obs_inv_sqrt),
            )
        };
        Ok(GaussianErrorModel {
            forward,
            prior,
            noise_cov,
            noise_sqrt,
            noise_inv_sqrt,
            noise_log_det: whitening.obs_log_det,
            whitening,
        })
    }

    pub fn forward(&self) -> &Arc<dyn ForwardModel<T>> {
        &self.forward
    }

    pub fn prior(&self) -> &GaussianPrior<T> {
        &self.prior
    }

    pub fn noise_cov(&self) -> &Matrix<T> {
        &self.noise_cov
    }

    pub fn whitening(&self) -> &WhiteningPair<T> {
        &self.whitening
    }

    /// `Γ_obs^{-1/2} y`.
    pub fn whiten_data(&self, y: &[T]) -> Vec<T> {
        self.noise_inv_sqrt.apply(y)
    }

    /// `Γ_obs^{-1/2} G(x)`.
    pub fn whitened_forward(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.noise_inv_sqrt.apply(&self.forward.eval(x)?))
    }

    /// Log-likelihood given whitened data and whitened forward output.
    pub fn log_likelihood_whitened(&self, y_bar: &[T], g_bar: &[T]) -> T {
        let mut q = T::zero();
        for (&a, &b) in y_bar.iter().zip(g_bar) {
            q += (a - b) * (a - b);
        }
        let m = T::from_usize_lossy(y_bar.len());
        -T::c(0.5) * (q + self.noise_log_det + m * T::c(std::f64::consts::TAU.ln()))
    }

    /// Data-marginalized likelihood `log π(y_s | x)` for projected whitened data
    /// `y_s = V_sᵀ Γ_obs^{-1/2} y`, given `ḡ = Γ_obs^{-1/2} G(x)`.
    pub fn projected_log_likelihood_whitened(v_s: &Matrix<T>, y_s: &[T], g_bar: &[T]) -> T {
        let proj = v_s.t_matvec(g_bar).expect("basis rows match data dimension");
        let mut q = T::zero();
        for (&a, &b) in y_s.iter().zip(&proj) {
            q += (a - b) * (a - b);
        }
        let s = T::from_usize_lossy(y_s.len());
        -T::c(0.5) * (q + s * T::c(std::f64::consts::TAU.ln()))
    }
}

impl<T: Real> BayesModel<T> for GaussianErrorModel<T> {
    fn dim_x(&self) -> usize {
        self.forward.dim_x()
    }

    fn dim_y(&self) -> usize {
        self.forward.dim_y()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities::all()
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Result<Vec<T>> {
        Ok(self.prior.sample(rng))
    }

    fn sample_likelihood(&self, x: &[T], rng: &mut dyn RngCore) -> Result<Vec<T>> {
        check_len("sample_likelihood x", x, self.dim_x())?;
        let g = self.forward.eval(x)?;
        let z: Vec<T> = (0..g.len()).map(|_| T::sample_standard_normal(rng)).collect();
        let e = self.noise_sqrt.apply(&z);
        Ok(g.iter().zip(&e).map(|(&a, &b)| a + b).collect())
    }

    fn log_likelihood(&self, y: &[T], x: &[T]) -> Result<T> {
        check_len("log_likelihood y", y, self.dim_y())?;
        let g_bar = self.whitened_forward(x)?;
        Ok(self.log_likelihood_whitened(&self.whiten_data(y), &g_bar))
    }

    fn mixed_grad(&self, x: &[T], _y: &[T]) -> Result<Matrix<T>> {
        let j = self.forward.jacobian(x)?;
        Ok(self.noise_inv_sqrt.left(&self.noise_inv_sqrt.left(&j)))
    }

    fn gaussian_prior(&self) -> Option<&GaussianPrior<T>> {
        Some(&self.prior)
    }

    fn gaussian_error(&self) -> Option<&GaussianErrorModel<T>> {
        Some(self)
    }

    fn is_whitened(&self) -> bool {
        self.prior.is_standard() && self.noise_sqrt.is_identity()
    }
}

/// Forward map in whitened coordinates:
/// `x̄ ↦ Γ_obs^{-1/2} G(Γ_pr^{1/2} x̄ + μ_pr)`.
struct WhitenedForward<T: Real> {
    inner: Arc<dyn ForwardModel<T>>,
    pr_sqrt: SymFactor<T>,
    obs_inv_sqrt: SymFactor<T>,
    mean: Vec<T>,
}

impl<T: Real> WhitenedForward<T> {
    fn point(&self, xb: &[T]) -> Vec<T> {
        let mut x = self.pr_sqrt.apply(xb);
        for (xi, &m) in x.iter_mut().zip(&self.mean) {
            *xi += m;
        }
        x
    }
}

impl<T: Real> ForwardModel<T> for WhitenedForward<T> {
    fn dim_x(&self) -> usize {
        self.inner.dim_x()
    }

    fn dim_y(&self) -> usize {
        self.inner.dim_y()
    }

    fn eval(&self, xb: &[T]) -> Result<Vec<T>> {
        check_len("whitened forward x", xb, self.dim_x())?;
        Ok(self.obs_inv_sqrt.apply(&self.inner.eval(&self.point(xb))?))
    }

    fn jacobian(&self, xb: &[T]) -> Result<Matrix<T>> {
        check_len("whitened forward x", xb, self.dim_x())?;
        let j = self.inner.jacobian(&self.point(xb))?;
        Ok(self.pr_sqrt.right(&self.obs_inv_sqrt.left(&j)))
    }

    fn eval_with_jacobian(&self, xb: &[T]) -> Result<(Vec<T>, Matrix<T>)> {
        let (g, j) = self.inner.eval_with_jacobian(&self.point(xb))?;
        Ok((
            self.obs_inv_sqrt.apply(&g),
            self.pr_sqrt.right(&self.obs_inv_sqrt.left(&j)),
        ))
    }
}

/// A Gaussian error model expressed in whitened coordinates together with
/// the maps back to the original ones.
#[derive(Clone, Debug)]
pub struct Whitened<T: Real> {
    pub model: GaussianErrorModel<T>,
    pub pair: WhiteningPair<T>,
    pub prior_mean: Vec<T>,
    pr_sqrt: SymFactor<T>,
    pr_inv_sqrt: SymFactor<T>,
    obs_sqrt: SymFactor<T>,
    obs_inv_sqrt: SymFactor<T>,
}

impl<T: Real> Whitened<T> {
    pub fn whiten_x(&self, x: &[T]) -> Vec<T> {
        let c: Vec<T> = x.iter().zip(&self.prior_mean).map(|(&a, &b)| a - b).collect();
        self.pr_inv_sqrt.apply(&c)
    }

    pub fn unwhiten_x(&self, xb: &[T]) -> Vec<T> {
        let mut x = self.pr_sqrt.apply(xb);
        for (xi, &m) in x.iter_mut().zip(&self.prior_mean) {
            *xi += m;
        }
        x
    }

    pub fn whiten_y(&self, y: &[T]) -> Vec<T> {
        self.obs_inv_sqrt.apply(y)
    }

    pub fn unwhiten_y(&self, yb: &[T]) -> Vec<T> {
        self.obs_sqrt.apply(yb)
    }
}

/// Re-expresses a Gaussian error model in whitened coordinates: standard
/// normal prior, identity noise, and forward map
/// `Γ_obs^{-1/2} G(Γ_pr^{1/2} x̄ + μ_pr)`.
pub fn whitened_model<T: Real>(model: &GaussianErrorModel<T>) -> Result<Whitened<T>> {
    model
        .capabilities()
        .require(Capabilities::FORWARD_JACOBIAN, "forward Jacobians")?;
    let pair = model.whitening.clone();
    let (d, m) = (model.dim_x(), model.dim_y());
    let pr_sqrt = prefer_identity(&model.prior.sqrt, &pair.pr_sqrt);
    let pr_inv_sqrt = prefer_identity(&model.prior.inv_sqrt, &pair.pr_inv_sqrt);
    let obs_sqrt = prefer_identity(&model.noise_sqrt, &pair.obs_sqrt);
    let obs_inv_sqrt = prefer_identity(&model.noise_inv_sqrt, &pair.obs_inv_sqrt);
    let mean = model.prior.mean.clone();

    let forward: Arc<dyn ForwardModel<T>> = match model.forward.linear_part() {
        Some(g) => {
            let a = pr_sqrt.right(&obs_inv_sqrt.left(g));
            let shift = model.forward.eval(&mean)?;
            let offset = obs_inv_sqrt.apply(&shift);
            let any = offset.iter().any(|&v| v != T::zero());
            Arc::new(LinearForward {
                g: a,
                offset: if any { Some(offset) } else { None },
            })
        }
        None => Arc::new(WhitenedForward {
            inner: model.forward.clone(),
            pr_sqrt: pr_sqrt.clone(),
            obs_inv_sqrt: obs_inv_sqrt.clone(),
            mean: mean.clone(),
        }),
    };
    let white = GaussianErrorModel {
        forward,
        prior: GaussianPrior::standard(d),
        noise_cov: Matrix::identity(m),
        noise_sqrt: SymFactor::Identity(m),
        noise_inv_sqrt: SymFactor::Identity(m),
        noise_log_det: T::zero(),
        whitening: WhiteningPair {
            pr_sqrt: Matrix::identity(d),
            pr_inv_sqrt: Matrix::identity(d),
            obs_sqrt: Matrix::identity(m),
            obs_inv_sqrt: Matrix::identity(m),
            condition_numbers: [T::one(), T::one()],
            pr_log_det: T::zero(),
            obs_log_det: T::zero(),
        },
    };
    Ok(Whitened {
        model: white,
        pair,
        prior_mean: mean,
        pr_sqrt,
        pr_inv_sqrt,
        obs_sqrt,
        obs_inv_sqrt,
    })
}

fn prefer_identity<T: Real>(cached: &SymFactor<T>, dense: &Matrix<T>) -> SymFactor<T> {
    if cached.is_identity() {
        cached.clone()
    } else {
        SymFactor::from_matrix(dense)
    }
}

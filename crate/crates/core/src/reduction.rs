//! Informed/informative bases, the trace-tail bound `B(r, s)` and the choice
//! of reduced dimensions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticPair;
use crate::error::{check_dim, shape_err, Error, Result};
use crate::linalg::Matrix;
use crate::model::WhiteningPair;
use crate::scalar::Real;
use crate::spectral::sym_eig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReductionKind {
    Rotation,
    Permutation,
}

impl fmt::Display for ReductionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReductionKind::Rotation => "rotation",
            ReductionKind::Permutation => "permutation",
        })
    }
}

impl FromStr for ReductionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rotation" => Ok(ReductionKind::Rotation),
            "permutation" => Ok(ReductionKind::Permutation),
            other => Err(Error::InvalidArgument(format!(
                "unknown reduction kind `{other}` (expected rotation or permutation)"
            ))),
        }
    }
}

/// Orthogonal bases `U = [U_r, U_⊥]`, `V = [V_s, V_⊥]` ordered by score.
#[derive(Clone, Debug)]
pub struct Reduction<T> {
    pub kind: ReductionKind,
    pub u_basis: Matrix<T>,
    pub v_basis: Matrix<T>,
    pub x_scores: Vec<T>,
    pub y_scores: Vec<T>,
    /// Present when the bases live in whitened coordinates.
    pub whitening: Option<WhiteningPair<T>>,
    x_tails: Vec<T>,
    y_tails: Vec<T>,
}

/// Chosen dimensions with their bound and cost.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReducedDims<T> {
    pub r: usize,
    pub s: usize,
    pub bound: T,
    pub cost: T,
}

/// Suffix sums `t[k] = Σ_{i≥k} v[i]`, with `t[len] = 0`.
pub fn tail_sums<T: Real>(v: &[T]) -> Vec<T> {
    let mut t = vec![T::zero(); v.len() + 1];
    for k in (0..v.len()).rev() {
        t[k] = t[k + 1] + v[k];
    }
    t
}

fn clip_nonneg<T: Real>(v: &[T]) -> Vec<T> {
    v.iter().map(|&x| x.max(T::zero())).collect()
}

fn check_scores<T: Real>(name: &'static str, v: &[T]) -> Result<()> {
    for (i, &x) in v.iter().enumerate() {
        if !(x >= T::zero()) {
            return Err(Error::NegativeInput { name, value: x.to_f64_lossy() });
        }
        if i > 0 && x > v[i - 1] {
            return Err(Error::InvalidArgument(format!("{name} must be sorted in decreasing order")));
        }
    }
    Ok(())
}

impl<T: Real> Reduction<T> {
    /// Assembles a reduction from explicit bases and scores.
    pub fn new(
        kind: ReductionKind,
        u_basis: Matrix<T>,
        v_basis: Matrix<T>,
        x_scores: Vec<T>,
        y_scores: Vec<T>,
    ) -> Result<Self> {
        check_scores("x_scores", &x_scores)?;
        check_scores("y_scores", &y_scores)?;
        let d = x_scores.len();
        let m = y_scores.len();
        if u_basis.shape() != (d, d) {
            return Err(shape_err("Reduction u_basis", format!("{d}x{d}"), u_basis.shape_str()));
        }
        if v_basis.shape() != (m, m) {
            return Err(shape_err("Reduction v_basis", format!("{m}x{m}"), v_basis.shape_str()));
        }
        Ok(Reduction {
            kind,
            x_tails: tail_sums(&x_scores),
            y_tails: tail_sums(&y_scores),
            u_basis,
            v_basis,
            x_scores,
            y_scores,
            whitening: None,
        })
    }

    /// Score-only reduction with identity bases (for dimension selection).
    pub fn from_scores(x_scores: Vec<T>, y_scores: Vec<T>) -> Result<Self> {
        let d = x_scores.len();
        let m = y_scores.len();
        Self::new(
            ReductionKind::Permutation,
            Matrix::identity(d),
            Matrix::identity(m),
            x_scores,
            y_scores,
        )
    }

    pub fn with_whitening(mut self, pair: WhiteningPair<T>) -> Self {
        self.whitening = Some(pair);
        self
    }

    pub fn dim_x(&self) -> usize {
        self.x_scores.len()
    }

    pub fn dim_y(&self) -> usize {
        self.y_scores.len()
    }

    pub fn tail_x(&self, r: usize) -> Result<T> {
        check_dim("r", r, self.dim_x())?;
        Ok(self.x_tails[r])
    }

    pub fn tail_y(&self, s: usize) -> Result<T> {
        check_dim("s", s, self.dim_y())?;
        Ok(self.y_tails[s])
    }

    pub fn u_r(&self, r: usize) -> Result<Matrix<T>> {
        check_dim("r", r, self.dim_x())?;
        Ok(self.u_basis.columns(0, r))
    }

    pub fn u_perp(&self, r: usize) -> Result<Matrix<T>> {
        check_dim("r", r, self.dim_x())?;
        Ok(self.u_basis.columns(r, self.dim_x()))
    }

    pub fn v_s(&self, s: usize) -> Result<Matrix<T>> {
        check_dim("s", s, self.dim_y())?;
        Ok(self.v_basis.columns(0, s))
    }

    pub fn v_perp(&self, s: usize) -> Result<Matrix<T>> {
        check_dim("s", s, self.dim_y())?;
        Ok(self.v_basis.columns(s, self.dim_y()))
    }

    /// `U_r = Γ_pr^{-1/2} Ū_r`, which satisfies `U_rᵀ Γ_pr U_r = I_r`.
    pub fn unwhitened_u(&self, r: usize) -> Result<Matrix<T>> {
        let w = self
            .whitening
            .as_ref()
            .ok_or(Error::UnsupportedCapability("unwhitened bases (no whitening attached)"))?;
        w.pr_inv_sqrt.matmul(&self.u_r(r)?)
    }

    /// `V_s = Γ_obs^{-1/2} V̄_s`, which satisfies `V_sᵀ Γ_obs V_s = I_s`.
    pub fn unwhitened_v(&self, s: usize) -> Result<Matrix<T>> {
        let w = self
            .whitening
            .as_ref()
            .ok_or(Error::UnsupportedCapability("unwhitened bases (no whitening attached)"))?;
        w.obs_inv_sqrt.matmul(&self.v_s(s)?)
    }
}

/// Optimal rotation: eigenvectors of `H_X` and `H_Y`.
pub fn reduce_rotation<T: Real>(diag: &DiagnosticPair<T>) -> Result<Reduction<T>> {
    let ex = sym_eig(&diag.h_x)?;
    let ey = sym_eig(&diag.h_y)?;
    Reduction::new(
        ReductionKind::Rotation,
        ex.vectors,
        ey.vectors,
        clip_nonneg(&ex.values),
        clip_nonneg(&ey.values),
    )
}

/// Coordinate order by decreasing diagonal entry (ties keep index order).
pub fn permutation_order<T: Real>(diag: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..diag.len()).collect();
    idx.sort_by(|&a, &b| diag[b].partial_cmp(&diag[a]).unwrap_or(std::cmp::Ordering::Equal));
    idx
}

/// Optimal permutation: coordinates sorted by the diagonals of `H_X`, `H_Y`.
pub fn reduce_permutation<T: Real>(diag: &DiagnosticPair<T>) -> Result<Reduction<T>> {
    let dx = diag.h_x.diag();
    let dy = diag.h_y.diag();
    let ox = permutation_order(&dx);
    let oy = permutation_order(&dy);
    let u = Matrix::identity(dx.len()).select_columns(&ox);
    let v = Matrix::identity(dy.len()).select_columns(&oy);
    let sx: Vec<T> = ox.iter().map(|&i| dx[i]).collect();
    let sy: Vec<T> = oy.iter().map(|&i| dy[i]).collect();
    Reduction::new(ReductionKind::Permutation, u, v, clip_nonneg(&sx), clip_nonneg(&sy))
}

/// Trace-tail term `Σ_{i>r} x_scores[i] + Σ_{i>s} y_scores[i]`.
pub fn bound<T: Real>(red: &Reduction<T>, r: usize, s: usize) -> Result<T> {
    Ok(red.tail_x(r)? + red.tail_y(s)?)
}

/// Cost of keeping `r` parameter and `s` data directions.
pub enum CostModel<T> {
    Linear { ax: T, ay: T },
    Quadratic { ax: T, ay: T },
    /// Caller-supplied cost; must be nondecreasing in each argument.
    Custom(Box<dyn Fn(usize, usize) -> T + Send + Sync>),
}

impl<T: Real> fmt::Debug for CostModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostModel::Linear { ax, ay } => write!(f, "Linear {{ ax: {ax}, ay: {ay} }}"),
            CostModel::Quadratic { ax, ay } => write!(f, "Quadratic {{ ax: {ax}, ay: {ay} }}"),
            CostModel::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl<T: Real> CostModel<T> {
    pub fn eval(&self, r: usize, s: usize) -> T {
        let (rt, st) = (T::from_usize_lossy(r), T::from_usize_lossy(s));
        match self {
            CostModel::Linear { ax, ay } => *ax * rt + *ay * st,
            CostModel::Quadratic { ax, ay } => *ax * rt * rt + *ay * st * st,
            CostModel::Custom(f) => f(r, s),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            CostModel::Linear { ax, ay } | CostModel::Quadratic { ax, ay } => {
                for (name, v) in [("ax", *ax), ("ay", *ay)] {
                    if !(v >= T::zero()) {
                        return Err(Error::NegativeInput { name, value: v.to_f64_lossy() });
                    }
                }
                Ok(())
            }
            CostModel::Custom(_) => Ok(()),
        }
    }
}

fn check_eps<T: Real>(eps: T) -> Result<()> {
    if !(eps > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "select_dims requires eps > 0, got {eps}"
        )));
    }
    Ok(())
}

/// For every r, the smallest s with `B(r, s) ≤ eps`.
fn minimal_feasible_s<T: Real>(red: &Reduction<T>, eps: T) -> Vec<usize> {
    let m = red.dim_y();
    let mut out = Vec::with_capacity(red.dim_x() + 1);
    // As r grows the x-tail shrinks, so the minimal s can only move left.
    let mut s = m;
    for r in 0..=red.dim_x() {
        let tx = red.x_tails[r];
        while s > 0 && tx + red.y_tails[s - 1] <= eps {
            s -= 1;
        }
        if tx + red.y_tails[s] <= eps {
            out.push(s);
        } else {
            out.push(usize::MAX);
        }
    }
    out
}

/// Minimizes `c(r, s)` subject to `B(r, s) ≤ eps`.
///
/// Because B is nonincreasing and c nondecreasing in each argument, only
/// the minimal feasible s of each r needs to be examined. Ties are broken
/// by smaller `r + s`, then smaller `r`.
pub fn select_dims<T: Real>(red: &Reduction<T>, cost: &CostModel<T>, eps: T) -> Result<ReducedDims<T>> {
    check_eps(eps)?;
    cost.validate()?;
    let mut best: Option<ReducedDims<T>> = None;
    for (r, s) in minimal_feasible_s(red, eps).into_iter().enumerate() {
        if s == usize::MAX {
            continue;
        }
        let cand = ReducedDims {
            r,
            s,
            bound: bound(red, r, s)?,
            cost: cost.eval(r, s),
        };
        best = Some(match best {
            None => cand,
            Some(b) => {
                if better(&cand, &b) {
                    cand
                } else {
                    b
                }
            }
        });
    }
    best.ok_or_else(|| Error::InvalidArgument("no feasible dimensions".into()))
}

fn better<T: Real>(a: &ReducedDims<T>, b: &ReducedDims<T>) -> bool {
    if a.cost != b.cost {
        return a.cost < b.cost;
    }
    if a.r + a.s != b.r + b.s {
        return a.r + a.s < b.r + b.s;
    }
    a.r < b.r
}

/// Feasible pairs `(r, s)` not dominated in both coordinates by another
/// feasible pair, in increasing r.
pub fn pareto_front<T: Real>(red: &Reduction<T>, cost: &CostModel<T>, eps: T) -> Result<Vec<ReducedDims<T>>> {
    check_eps(eps)?;
    cost.validate()?;
    let mut out = Vec::new();
    let mut last_s = usize::MAX;
    for (r, s) in minimal_feasible_s(red, eps).into_iter().enumerate() {
        if s == usize::MAX || s >= last_s {
            continue;
        }
        last_s = s;
        out.push(ReducedDims {
            r,
            s,
            bound: bound(red, r, s)?,
            cost: cost.eval(r, s),
        });
    }
    Ok(out)
}

/// Splits the budget: the smallest r with `tail_x(r) ≤ α_X/(α_X+α_Y)·ε`
/// and the smallest s with `tail_y(s) ≤ α_Y/(α_X+α_Y)·ε`.
pub fn select_dims_split<T: Real>(red: &Reduction<T>, ax: T, ay: T, eps: T) -> Result<ReducedDims<T>> {
    for (name, v) in [("alpha_x", ax), ("alpha_y", ay)] {
        if !(v >= T::zero()) {
            return Err(Error::NegativeInput { name, value: v.to_f64_lossy() });
        }
    }
    if ax + ay == T::zero() {
        return Err(Error::InvalidArgument("alpha_x and alpha_y cannot both be zero".into()));
    }
    if !(eps >= T::zero()) {
        return Err(Error::NegativeInput { name: "eps", value: eps.to_f64_lossy() });
    }
    let bx = ax / (ax + ay) * eps;
    let by = ay / (ax + ay) * eps;
    let r = (0..=red.dim_x()).find(|&r| red.x_tails[r] <= bx).unwrap_or(red.dim_x());
    let s = (0..=red.dim_y()).find(|&s| red.y_tails[s] <= by).unwrap_or(red.dim_y());
    Ok(ReducedDims {
        r,
        s,
        bound: bound(red, r, s)?,
        cost: CostModel::Linear { ax, ay }.eval(r, s),
    })
}

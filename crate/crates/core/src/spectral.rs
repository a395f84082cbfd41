//! Dense symmetric eigensolver, SVD and subspace utilities.

use crate::error::{check_dim, shape_err, Error, Result};
use crate::linalg::{dot, norm, Matrix};
use crate::scalar::Real;

/// Eigenpairs sorted by decreasing eigenvalue.
#[derive(Clone, Debug)]
pub struct EigenSystem<T> {
    pub values: Vec<T>,
    /// Eigenvectors stored as columns.
    pub vectors: Matrix<T>,
    /// Largest `‖H v_i − λ_i v_i‖` (or `‖A w_i − λ_i B w_i‖` for generalized problems).
    pub residual_norm: T,
}

impl<T: Real> EigenSystem<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `V f(Λ) Vᵀ`.
    pub fn apply(&self, f: impl Fn(T) -> T) -> Matrix<T> {
        let n = self.vectors.rows();
        let k = self.values.len();
        let fv: Vec<T> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            let vi = self.vectors.row(i);
            for j in i..n {
                let vj = self.vectors.row(j);
                let mut s = T::zero();
                for t in 0..k {
                    s += vi[t] * fv[t] * vj[t];
                }
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }

    pub fn max_value(&self) -> T {
        self.values.first().copied().unwrap_or(T::zero())
    }

    pub fn min_value(&self) -> T {
        self.values.last().copied().unwrap_or(T::zero())
    }
}

/// Tolerance used to accept a matrix as symmetric.
pub fn symmetry_tolerance<T: Real>(h: &Matrix<T>) -> T {
    let base = T::c(1e-8).max(T::epsilon() * T::c(64.0));
    base * h.max_abs().max(T::min_positive_value())
}

pub fn check_symmetric<T: Real>(h: &Matrix<T>) -> Result<()> {
    if !h.is_square() {
        return Err(shape_err("symmetric matrix", "square", h.shape_str()));
    }
    let asym = h.asymmetry();
    let tol = symmetry_tolerance(h);
    if asym > tol {
        return Err(Error::NotSymmetric {
            asymmetry: asym.to_f64_lossy(),
            tolerance: tol.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Householder tridiagonalization followed by implicit QL iterations.
/// Only the lower triangle is read after the symmetry check, which is
/// symmetrized first.
pub fn sym_eig<T: Real>(h: &Matrix<T>) -> Result<EigenSystem<T>> {
    check_symmetric(h)?;
    let n = h.rows();
    if n == 0 {
        return Ok(EigenSystem {
            values: vec![],
            vectors: Matrix::zeros(0, 0),
            residual_norm: T::zero(),
        });
    }
    let mut v = h.clone();
    v.symmetrize();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(&mut v, &mut d, &mut e);
    let mut vt = v;
    tql2(&mut vt, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    let lead: Vec<usize> = (0..n).map(|k| argmax_abs(vt.row(k))).collect();
    order.sort_by(|&a, &b| {
        d[b].partial_cmp(&d[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(lead[a].cmp(&lead[b]))
            .then(a.cmp(&b))
    });
    let values: Vec<T> = order.iter().map(|&k| d[k]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (j, &k) in order.iter().enumerate() {
        let row = vt.row(k);
        let flip = row[argmax_abs(row)] < T::zero();
        for i in 0..n {
            vectors[(i, j)] = if flip { -row[i] } else { row[i] };
        }
    }
    let residual_norm = residual(h, None, &values, &vectors)?;
    Ok(EigenSystem {
        values,
        vectors,
        residual_norm,
    })
}

fn argmax_abs<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    let mut best_val = T::neg_infinity();
    for (i, &x) in v.iter().enumerate() {
        // Small slack so that near-equal magnitudes resolve to the first index.
        if x.abs() > best_val * (T::one() + T::epsilon() * T::c(16.0)) {
            best = i;
            best_val = x.abs();
        }
    }
    best
}

fn residual<T: Real>(
    a: &Matrix<T>,
    b: Option<&Matrix<T>>,
    values: &[T],
    vectors: &Matrix<T>,
) -> Result<T> {
    let av = a.matmul(vectors)?;
    let bv = match b {
        Some(b) => b.matmul(vectors)?,
        None => vectors.clone(),
    };
    let mut worst = T::zero();
    for (j, &lam) in values.iter().enumerate() {
        let mut s = T::zero();
        for i in 0..a.rows() {
            let r = av[(i, j)] - lam * bv[(i, j)];
            s += r * r;
        }
        worst = worst.max(s.sqrt());
    }
    Ok(worst)
}

// Symmetric Householder reduction to tridiagonal form (EISPACK tred2 as laid
// out in the public-domain JAMA package), on transposed storage so the inner
// loops run along rows. On exit `v` holds the accumulated transform as rows.
fn tred2<T: Real>(v: &mut Matrix<T>, d: &mut [T], e: &mut [T]) {
    let n = d.len();
    let zero = T::zero();
    for j in 0..n {
        d[j] = v[(j, n - 1)];
    }
    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(j, i - 1)];
                v[(j, i)] = zero;
                v[(i, j)] = zero;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = zero;
            }
            for j in 0..i {
                f = d[j];
                v[(i, j)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[(j, k)] * d[k];
                    e[k] += v[(j, k)] * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    v[(j, k)] -= upd;
                }
                d[j] = v[(j, i - 1)];
                v[(j, i)] = zero;
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        v[(i, n - 1)] = v[(i, i)];
        v[(i, i)] = T::one();
        let h = d[i + 1];
        if h != zero {
            for k in 0..=i {
                d[k] = v[(i + 1, k)] / h;
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g += v[(i + 1, k)] * v[(j, k)];
                }
                for k in 0..=i {
                    let upd = g * d[k];
                    v[(j, k)] -= upd;
                }
            }
        }
        for k in 0..=i {
            v[(i + 1, k)] = zero;
        }
    }
    for j in 0..n {
        d[j] = v[(j, n - 1)];
        v[(j, n - 1)] = zero;
    }
    v[(n - 1, n - 1)] = T::one();
    e[0] = zero;
}

// Implicit QL on the tridiagonal matrix; `vt` holds eigenvectors as rows.
fn tql2<T: Real>(vt: &mut Matrix<T>, d: &mut [T], e: &mut [T]) -> Result<()> {
    let n = d.len();
    let zero = T::zero();
    let one = T::one();
    const MAX_ITER: usize = 200;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;
    let mut f = zero;
    let mut tst1 = zero;
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_ITER {
                    return Err(Error::NoConvergence {
                        routine: "sym_eig",
                        iterations: MAX_ITER,
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (e[l] + e[l]);
                let mut r = p.hypot(one);
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = vt.as_mut_slice().split_at_mut((i + 1) * n);
                    let row_i = &mut lo[i * n..];
                    let row_i1 = &mut hi[..n];
                    for k in 0..n {
                        let hk = row_i1[k];
                        row_i1[k] = s * row_i[k] + c * hk;
                        row_i[k] = c * row_i[k] - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }
    Ok(())
}

/// Basis of the trailing eigenvectors `t+1..p` and the corresponding tail sum.
pub fn trailing_subspace<T: Real>(sys: &EigenSystem<T>, t: usize) -> Result<(Matrix<T>, T)> {
    let p = sys.values.len();
    check_dim("t", t, p)?;
    let basis = sys.vectors.columns(t, p);
    let tail = sys.values[t..].iter().rev().copied().sum();
    Ok((basis, tail))
}

/// Symmetric square root and inverse square root of an SPD matrix.
///
/// Eigenvalues below `floor` are raised to `floor`. Returns the roots along
/// with the eigensystem that produced them.
pub fn spd_roots<T: Real>(
    a: &Matrix<T>,
    floor: T,
) -> Result<(Matrix<T>, Matrix<T>, EigenSystem<T>)> {
    let sys = sym_eig(a)?;
    let lmax = sys.max_value();
    let tol = T::c(1e-10).max(T::epsilon() * T::c(100.0)) * lmax.abs().max(T::one());
    let lmin = sys.min_value();
    if lmin < -tol || lmax <= T::zero() {
        return Err(Error::Indefinite {
            min_eigenvalue: lmin.to_f64_lossy(),
        });
    }
    let clamp = |l: T| l.max(floor);
    if clamp(lmin) <= T::zero() {
        return Err(Error::Indefinite {
            min_eigenvalue: lmin.to_f64_lossy(),
        });
    }
    let sqrt = sys.apply(|l| clamp(l).sqrt());
    let inv_sqrt = sys.apply(|l| T::one() / clamp(l).sqrt());
    Ok((sqrt, inv_sqrt, sys))
}

/// Solves `A w = λ B w` for symmetric A and SPD B by whitening with `B^{-1/2}`.
/// The returned vectors satisfy `Wᵀ B W = I`.
pub fn gen_eig<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<EigenSystem<T>> {
    check_symmetric(a)?;
    check_symmetric(b)?;
    if a.shape() != b.shape() {
        return Err(shape_err("gen_eig", a.shape_str(), b.shape_str()));
    }
    let (_, b_inv_sqrt, _) = spd_roots(b, T::zero())?;
    let mut c = b_inv_sqrt.matmul(a)?.matmul(&b_inv_sqrt)?;
    c.symmetrize();
    let sys = sym_eig(&c)?;
    let mut w = b_inv_sqrt.matmul(&sys.vectors)?;
    for j in 0..w.cols() {
        let col = w.col(j);
        if col[argmax_abs(&col)] < T::zero() {
            for i in 0..w.rows() {
                w[(i, j)] = -w[(i, j)];
            }
        }
    }
    let residual_norm = residual(a, Some(b), &sys.values, &w)?;
    Ok(EigenSystem {
        values: sys.values,
        vectors: w,
        residual_norm,
    })
}

/// Thin singular value decomposition.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    /// p×k left singular vectors, k = min(p, q).
    pub u: Matrix<T>,
    pub sigma: Vec<T>,
    /// q×k right singular vectors.
    pub v: Matrix<T>,
}

/// Thin SVD by one-sided Jacobi rotations, singular values descending.
pub fn svd_rect<T: Real>(a: &Matrix<T>) -> Result<Svd<T>> {
    let (p, q) = a.shape();
    if p < q {
        let t = svd_rect(&a.transpose())?;
        let mut out = Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        };
        fix_signs(&mut out);
        return Ok(out);
    }
    // Columns of A (and of V) are stored as contiguous vectors.
    let mut cols: Vec<Vec<T>> = (0..q).map(|j| a.col(j)).collect();
    let mut vcols: Vec<Vec<T>> = (0..q)
        .map(|j| {
            let mut e = vec![T::zero(); q];
            e[j] = T::one();
            e
        })
        .collect();
    let eps = T::epsilon();
    const MAX_SWEEPS: usize = 80;
    let mut converged = q <= 1;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for i in 0..q {
            for j in (i + 1)..q {
                let alpha = dot(&cols[i], &cols[i]);
                let beta = dot(&cols[j], &cols[j]);
                let gamma = dot(&cols[i], &cols[j]);
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, i, j, c, s);
                rotate(&mut vcols, i, j, c, s);
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            routine: "svd_rect",
            iterations: MAX_SWEEPS,
        });
    }
    let mut sigma: Vec<T> = cols.iter().map(|c| norm(c)).collect();
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&x, &y| {
        sigma[y]
            .partial_cmp(&sigma[x])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.cmp(&y))
    });
    let smax = order.first().map(|&k| sigma[k]).unwrap_or(T::zero());
    let tiny = smax * eps * T::from_usize_lossy(p.max(1));
    let mut ucols: Vec<Vec<T>> = Vec::with_capacity(q);
    let mut vout: Vec<Vec<T>> = Vec::with_capacity(q);
    let mut sout = Vec::with_capacity(q);
    let mut deficient = Vec::new();
    for (slot, &k) in order.iter().enumerate() {
        let s = sigma[k];
        if s > tiny && s > T::zero() {
            ucols.push(cols[k].iter().map(|&x| x / s).collect());
        } else {
            ucols.push(vec![T::zero(); p]);
            deficient.push(slot);
        }
        vout.push(vcols[k].clone());
        sout.push(s);
    }
    // Complete U for (numerically) zero singular values.
    for &slot in &deficient {
        let mut e = 0;
        loop {
            let mut cand = vec![T::zero(); p];
            cand[e % p] = T::one();
            for _ in 0..2 {
                for (t, u) in ucols.iter().enumerate() {
                    if t == slot || (deficient.contains(&t) && t > slot) {
                        continue;
                    }
                    let pr = dot(u, &cand);
                    for (c, &uu) in cand.iter_mut().zip(u) {
                        *c -= pr * uu;
                    }
                }
            }
            let nc = norm(&cand);
            if nc > T::c(0.5) {
                ucols[slot] = cand.iter().map(|&x| x / nc).collect();
                break;
            }
            e += 1;
        }
    }
    sigma.clear();
    let mut out = Svd {
        u: Matrix::from_columns(p, &ucols)?,
        sigma: sout,
        v: Matrix::from_columns(q, &vout)?,
    };
    fix_signs(&mut out);
    Ok(out)
}

fn rotate<T: Real>(cols: &mut [Vec<T>], i: usize, j: usize, c: T, s: T) {
    let (lo, hi) = cols.split_at_mut(j);
    let ci = &mut lo[i];
    let cj = &mut hi[0];
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let xi = *x;
        let yj = *y;
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

fn fix_signs<T: Real>(svd: &mut Svd<T>) {
    for j in 0..svd.u.cols() {
        let col = svd.u.col(j);
        if col[argmax_abs(&col)] < T::zero() {
            for i in 0..svd.u.rows() {
                svd.u[(i, j)] = -svd.u[(i, j)];
            }
            for i in 0..svd.v.rows() {
                svd.v[(i, j)] = -svd.v[(i, j)];
            }
        }
    }
}

/// Principal angles (ascending) between the column spans of two
/// column-orthonormal matrices.
///
/// Cosines come from the singular values of `AᵀB`; angles whose cosine is
/// close to one are recomputed from the sines (singular values of the part
/// of B orthogonal to A), which keeps tiny angles accurate.
pub fn principal_angles<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Vec<T>> {
    if a.rows() != b.rows() {
        return Err(shape_err(
            "principal_angles",
            format!("{} rows", a.rows()),
            format!("{} rows", b.rows()),
        ));
    }
    let (a, b) = if a.cols() >= b.cols() { (a, b) } else { (b, a) };
    if b.cols() == 0 {
        return Ok(vec![]);
    }
    let atb = a.t_matmul(b)?;
    let cos = svd_rect(&atb)?.sigma;
    let resid = b.sub(&a.matmul(&atb)?)?;
    let mut sin = svd_rect(&resid)?.sigma;
    sin.reverse();
    let half = T::c(0.5);
    let angles = cos
        .iter()
        .zip(&sin)
        .map(|(&c, &s)| {
            let c = c.max(T::zero()).min(T::one());
            if c * c >= half {
                s.max(T::zero()).min(T::one()).asin()
            } else {
                c.acos()
            }
        })
        .collect();
    Ok(angles)
}

/// Largest principal angle between two subspaces (0 for empty input).
pub fn max_principal_angle<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<T> {
    Ok(principal_angles(a, b)?
        .into_iter()
        .fold(T::zero(), |acc, x| acc.max(x)))
}

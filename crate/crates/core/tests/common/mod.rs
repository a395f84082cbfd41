#![allow(dead_code)]

use std::io::Write;
use std::sync::{Mutex, MutexGuard};

use bdr_core::linalg::Matrix;
use bdr_core::model::BayesModel;

static SERIAL: Mutex<()> = Mutex::new(());

/// Runs timed checks one at a time so wall-clock budgets are not skewed by
/// sibling tests competing for the same cores.
pub fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Writes straight to stderr so the line survives libtest output capture.
pub fn report(criterion: u32, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let line = format!("[criterion {criterion}] {tag} {detail}\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
}

pub fn note(text: &str) {
    let _ = std::io::stderr().write_all(format!("    {text}\n").as_bytes());
}

/// Central second difference of the scalar log-likelihood in `(x_j, y_i)`.
pub fn fd_mixed_grad(model: &dyn BayesModel<f64>, x: &[f64], y: &[f64], h: f64) -> Matrix<f64> {
    let (d, m) = (model.dim_x(), model.dim_y());
    let mut out = Matrix::zeros(m, d);
    let mut xp = x.to_vec();
    let mut yp = y.to_vec();
    for j in 0..d {
        for i in 0..m {
            let mut acc = 0.0;
            for (sx, sy, w) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                xp[j] = x[j] + sx * h;
                yp[i] = y[i] + sy * h;
                acc += w * model.log_likelihood(&yp, &xp).unwrap();
            }
            xp[j] = x[j];
            yp[i] = y[i];
            out[(i, j)] = acc / (4.0 * h * h);
        }
    }
    out
}

pub fn rel_frobenius(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm()
}

/// Mean within-row variance over mean within-column variance of an image
/// stored row-major on a `grid × grid` lattice.
pub fn axis_variance_ratio(v: &[f64], grid: usize) -> f64 {
    let var = |xs: &[f64]| {
        let n = xs.len() as f64;
        let mu = xs.iter().sum::<f64>() / n;
        xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n
    };
    let mut within_row = 0.0;
    let mut within_col = 0.0;
    for k in 0..grid {
        let row: Vec<f64> = (0..grid).map(|j| v[k * grid + j]).collect();
        let col: Vec<f64> = (0..grid).map(|i| v[i * grid + k]).collect();
        within_row += var(&row);
        within_col += var(&col);
    }
    within_row / within_col
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

pub const MIN_CHAIN_LEN: usize = 100;

/// Integrated autocorrelation times of each chain coordinate.
#[derive(Clone, Debug)]
pub struct Iact<T> {
    pub values: Vec<T>,
    /// Coordinates with zero variance; their IACT is reported as the chain length.
    pub degenerate: Vec<bool>,
}

/// IACT per column of an n×k chain, truncated by Geyer's initial positive
/// (and monotone) sequence rule.
pub fn iact<T: Real>(chain: &Matrix<T>) -> Result<Iact<T>> {
    let n = chain.rows();
    if n < MIN_CHAIN_LEN {
        return Err(Error::ChainTooShort { required: MIN_CHAIN_LEN, found: n });
    }
    let mut values = Vec::with_capacity(chain.cols());
    let mut degenerate = Vec::with_capacity(chain.cols());
    for j in 0..chain.cols() {
        let x = chain.col(j);
        let (tau, degen) = iact_1d(&x);
        values.push(tau);
        degenerate.push(degen);
    }
    Ok(Iact { values, degenerate })
}

fn iact_1d<T: Real>(x: &[T]) -> (T, bool) {
    let n = x.len();
    let nt = T::from_usize_lossy(n);
    let mean = x.iter().copied().sum::<T>() / nt;
    let c: Vec<T> = x.iter().map(|&v| v - mean).collect();
    let autocov = |k: usize| -> T {
        let mut s = T::zero();
        for i in 0..n - k {
            s += c[i] * c[i + k];
        }
        s / nt
    };
    let g0 = autocov(0);
    if !(g0 > T::zero()) {
        return (nt, true);
    }
    let mut sum = T::zero();
    let mut prev = T::infinity();
    let mut k = 0;
    while k + 1 < n {
        let pair = autocov(k) + autocov(k + 1);
        if pair <= T::zero() {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        k += 2;
    }
    let tau = (T::c(2.0) * sum - g0) / g0;
    (tau.max(T::one() / nt), false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn column(v: Vec<f64>) -> Matrix<f64> {
        let n = v.len();
        Matrix::from_vec(n, 1, v).unwrap()
    }

    #[test]
    fn iid_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<f64> = (0..20000).map(|_| f64::sample_standard_normal(&mut rng)).collect();
        let t = iact(&column(v)).unwrap().values[0];
        assert!((0.8..=1.3).contains(&t), "{t}");
    }

    #[test]
    fn ar1_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = 0.9;
        let mut x = 0.0;
        let v: Vec<f64> = (0..200000)
            .map(|_| {
                x = rho * x + (1.0f64 - rho * rho).sqrt() * f64::sample_standard_normal(&mut rng);
                x
            })
            .collect();
        let t = iact(&column(v)).unwrap().values[0];
        assert!((15.0..=24.0).contains(&t), "{t}");
    }

    #[test]
    fn constant_and_short_chains() {
        let r = iact(&column(vec![2.0; 150])).unwrap();
        assert!(r.degenerate[0]);
        assert_eq!(r.values[0], 150.0);
        assert!(matches!(iact(&column(vec![0.0; 99])), Err(Error::ChainTooShort { .. })));
    }
}

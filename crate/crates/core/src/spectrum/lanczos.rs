//! Lanczos iteration for one extreme eigenvalue of a Hermitian operator.

use faer::{Mat, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extreme {
    Largest,
    Smallest,
}

const MAX_ITER: usize = 400;
const REL_TOL: f64 = 1e-13;

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Deterministic pseudo-random start vector, so that symmetry cannot hide
/// the wanted eigenvector.
pub(crate) fn start_vector(n: usize) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a2c_05);
    let mut v: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect();
    let s = norm(&v);
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Ritz value at the requested end of the tridiagonal spectrum and its
/// residual bound |β_k e_kᵀ y|.
fn ritz(alpha: &[f64], beta: &[f64], which: Extreme) -> (f64, f64) {
    let k = alpha.len();
    let t = Mat::<f64>::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 {
            beta[j]
        } else if j == i + 1 {
            beta[i]
        } else {
            0.0
        }
    });
    let eig = t.self_adjoint_eigen(Side::Lower).expect("tridiagonal eigensolver");
    let idx = match which {
        Extreme::Largest => k - 1,
        Extreme::Smallest => 0,
    };
    let theta = eig.S()[idx];
    let bound = beta.get(k - 1).copied().unwrap_or(0.0) * eig.U()[(k - 1, idx)].abs();
    (theta, bound)
}

/// Extreme eigenvalue of the Hermitian map `op` on C^n.
pub fn extreme_eigenvalue(n: usize, op: impl Fn(&[Complex64]) -> Vec<Complex64>, which: Extreme) -> f64 {
    let mut q = vec![start_vector(n)];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut scale = 0.0f64;
    let limit = n.min(MAX_ITER);
    loop {
        let k = q.len() - 1;
        let mut w = op(&q[k]);
        let a = dot(&q[k], &w).re;
        alpha.push(a);
        // full reorthogonalization, twice for safety
        for _ in 0..2 {
            for qi in &q {
                let c = dot(qi, &w);
                w.iter_mut().zip(qi).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = norm(&w);
        scale = scale.max(a.abs()).max(b);
        beta.push(b);
        let exhausted = b <= 1e-14 * scale.max(f64::MIN_POSITIVE) || alpha.len() >= limit;
        if exhausted || alpha.len() % 4 == 0 {
            let (theta, bound) = ritz(&alpha, &beta, which);
            if exhausted || bound <= REL_TOL * scale.max(theta.abs()) {
                return theta;
            }
        }
        w.iter_mut().for_each(|x| *x /= b);
        q.push(w);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_extremes() {
        let d: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let op = |x: &[Complex64]| x.iter().zip(&d).map(|(x, d)| x * *d).collect::<Vec<_>>();
        let max = d.iter().cloned().fold(f64::MIN, f64::max);
        let min = d.iter().cloned().fold(f64::MAX, f64::min);
        assert!((extreme_eigenvalue(50, op, Extreme::Largest) - max).abs() < 1e-12);
        assert!((extreme_eigenvalue(50, op, Extreme::Smallest) - min).abs() < 1e-12);
    }

    #[test]
    fn zero_operator() {
        let op = |x: &[Complex64]| vec![Complex64::new(0.0, 0.0); x.len()];
        assert_eq!(extreme_eigenvalue(10, op, Extreme::Largest), 0.0);
    }
}

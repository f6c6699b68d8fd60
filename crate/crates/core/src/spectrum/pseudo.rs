//! Smallest singular values of zI − M and ε-pseudospectral abscissae.
//!
//! σ_min is obtained from a banded LU factorization of zI − M (the
//! truncations couple only nearby modes in lexicographic order) followed by
//! Lanczos on (A*A)^{-1}. Near an eigenvalue of a diagonalizable matrix the
//! ε-pseudospectrum is, to first order, a disk of radius κ ε where κ is the
//! condition number of the eigenvalue's spectral projector, so the abscissa
//! search starts from the eigenvalues with the largest κ and refines along
//! the horizontal ray with exact σ_min evaluations.

use faer::{Mat, Side};

use super::eigen::SkewEigen;
use super::lanczos::{extreme_eigenvalue, Extreme};
use super::operator::{sobolev_weight, OperatorMatrix};
use crate::error::{ElaxError, Result};
use crate::par::par_map;
use crate::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest grid resolution per axis.
pub const MAX_RESOLUTION: usize = 256;

/// LU factors of a band matrix with partial pivoting, LAPACK band layout:
/// A(i, j) lives at `ab[kv + i − j + j·ldab]` with kv = kl + ku.
pub struct BandLu {
    n: usize,
    kl: usize,
    kv: usize,
    ldab: usize,
    ab: Vec<Complex64>,
    ipiv: Vec<usize>,
    singular: bool,
}

impl BandLu {
    /// Factors zI − M.
    pub fn shifted(m: &OperatorMatrix, z: Complex64) -> Self {
        let n = m.dim();
        let (kl, ku) = m.bandwidths();
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![ZERO; ldab * n];
        for &(r, c, v) in &m.entries {
            ab[kv + r - c + c * ldab] -= v;
        }
        for j in 0..n {
            ab[kv + j * ldab] += z;
        }
        let mut lu = Self { n, kl, kv, ldab, ab, ipiv: vec![0; n], singular: false };
        lu.factor();
        lu
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        self.kv + i - j + j * self.ldab
    }

    fn factor(&mut self) {
        let n = self.n;
        let mut ju = 0usize;
        for j in 0..n {
            let km = self.kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = -1.0;
            for i in 0..=km {
                let a = self.ab[self.at(j + i, j)].norm();
                if a > best {
                    best = a;
                    jp = i;
                }
            }
            self.ipiv[j] = j + jp;
            if best == 0.0 {
                self.singular = true;
                continue;
            }
            ju = ju.max((j + self.kv - self.kl + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let (a, b) = (self.at(j, c), self.at(j + jp, c));
                    self.ab.swap(a, b);
                }
            }
            if km > 0 {
                let inv = 1.0 / self.ab[self.at(j, j)];
                for i in 1..=km {
                    let k = self.at(j + i, j);
                    self.ab[k] *= inv;
                }
                for c in j + 1..=ju {
                    let a = self.ab[self.at(j, c)];
                    if a == ZERO {
                        continue;
                    }
                    for i in 1..=km {
                        let l = self.ab[self.at(j + i, j)];
                        let k = self.at(j + i, c);
                        self.ab[k] -= l * a;
                    }
                }
            }
        }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// Solves A x = b in place.
    pub fn solve(&self, b: &mut [Complex64]) {
        let n = self.n;
        for j in 0..n {
            let km = self.kl.min(n - 1 - j);
            b.swap(j, self.ipiv[j]);
            let bj = b[j];
            if bj != ZERO {
                for i in 1..=km {
                    b[j + i] -= self.ab[self.at(j + i, j)] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[self.at(j, j)];
            let bj = b[j];
            for i in j.saturating_sub(self.kv)..j {
                b[i] -= self.ab[self.at(i, j)] * bj;
            }
        }
    }

    /// Solves A* x = b in place.
    pub fn solve_adjoint(&self, b: &mut [Complex64]) {
        let n = self.n;
        for j in 0..n {
            let mut acc = b[j];
            for i in j.saturating_sub(self.kv)..j {
                acc -= self.ab[self.at(i, j)].conj() * b[i];
            }
            b[j] = acc / self.ab[self.at(j, j)].conj();
        }
        for j in (0..n).rev() {
            let km = self.kl.min(n - 1 - j);
            let mut acc = b[j];
            for i in 1..=km {
                acc -= self.ab[self.at(j + i, j)].conj() * b[j + i];
            }
            b[j] = acc;
            b.swap(j, self.ipiv[j]);
        }
    }
}

/// σ_min(zI − M).
pub fn sigma_min(m: &OperatorMatrix, z: Complex64) -> f64 {
    if m.dim() == 0 {
        return f64::INFINITY;
    }
    let lu = BandLu::shifted(m, z);
    if lu.is_singular() {
        return 0.0;
    }
    let op = |x: &[Complex64]| {
        let mut y = x.to_vec();
        lu.solve_adjoint(&mut y);
        lu.solve(&mut y);
        y
    };
    let mu = extreme_eigenvalue(m.dim(), op, Extreme::Largest);
    if mu.is_finite() && mu > 0.0 {
        1.0 / mu.sqrt()
    } else {
        0.0
    }
}

/// Rectangle [re_min, re_max] × [im_min, im_max] in the complex plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

#[derive(Clone, Debug)]
pub struct PseudospectrumReport {
    /// (Re z, Im z, σ_min(zI − M)), rows with Re z fastest.
    pub grid: Vec<(f64, f64, f64)>,
    /// (ε, abscissa): max Re z with σ_min ≤ ε; −∞ if nothing qualifies.
    pub abscissae: Vec<(f64, f64)>,
}

/// σ_min over a rectangular grid plus the abscissa for each ε. Eigenpairs
/// of the unweighted operator, when given, seed the abscissa search near
/// the spectrum where the grid is too coarse to resolve ε-disks.
pub fn pseudospectrum(
    m: &OperatorMatrix,
    rect: Rect,
    resolution: (usize, usize),
    eps_levels: &[f64],
    eigen: Option<&SkewEigen>,
) -> Result<PseudospectrumReport> {
    let (nx, ny) = resolution;
    if nx == 0 || ny == 0 || nx > MAX_RESOLUTION || ny > MAX_RESOLUTION {
        return Err(ElaxError::Config(format!("resolution must be within 1..={MAX_RESOLUTION} per axis")));
    }
    if ![rect.re.0, rect.re.1, rect.im.0, rect.im.1].iter().all(|v| v.is_finite())
        || rect.re.0 > rect.re.1
        || rect.im.0 > rect.im.1
    {
        return Err(ElaxError::Config("pseudospectrum rectangle must be finite and ordered".into()));
    }
    let axis = |(a, b): (f64, f64), k: usize, i: usize| if k == 1 { a } else { a + (b - a) * i as f64 / (k - 1) as f64 };
    let points: Vec<Complex64> =
        (0..ny).flat_map(|j| (0..nx).map(move |i| (i, j))).map(|(i, j)| Complex64::new(axis(rect.re, nx, i), axis(rect.im, ny, j))).collect();
    let sig = par_map(&points, |&z| sigma_min(m, z));
    let grid: Vec<(f64, f64, f64)> = points.iter().zip(&sig).map(|(z, &s)| (z.re, z.im, s)).collect();
    let mut abscissae = Vec::with_capacity(eps_levels.len());
    for &eps in eps_levels {
        let from_grid = grid.iter().filter(|p| p.2 <= eps).map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let from_eigen = match eigen {
            Some(e) => pseudospectral_abscissa(m, e, eps, DEFAULT_CANDIDATES)?,
            None => f64::NEG_INFINITY,
        };
        abscissae.push((eps, from_grid.max(from_eigen)));
    }
    Ok(PseudospectrumReport { grid, abscissae })
}

/// Eigenvalue clusters refined along their rays.
pub const DEFAULT_CANDIDATES: usize = 6;

/// An eigenvalue cluster of the unweighted operator and the condition
/// number of its spectral projector in the weighted representation.
#[derive(Clone, Debug)]
pub struct ClusterCondition {
    pub mu: f64,
    pub size: usize,
    pub kappa: f64,
}

/// Groups the eigenvalues i μ_j of a skew-Hermitian truncation into
/// clusters and returns ‖P_c‖ for W^{1/2} M W^{−1/2}, where P_c is the
/// cluster's spectral projector, sorted by decreasing κ.
pub fn cluster_conditions(m: &OperatorMatrix, eig: &SkewEigen) -> Result<Vec<ClusterCondition>> {
    let n = m.dim();
    let ds = m.s - eig.s;
    let half: Vec<f64> = m.modes.iter().map(|&k| sobolev_weight(k, ds).sqrt()).collect();
    let mut order: Vec<usize> = (0..eig.mu.len()).collect();
    order.sort_by(|&a, &b| eig.mu[a].total_cmp(&eig.mu[b]));
    let spread = eig.mu.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1.0);
    let tol = 1e-9 * spread;
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &j in &order {
        match clusters.last_mut() {
            Some(c) if (eig.mu[j] - eig.mu[*c.last().unwrap()]).abs() <= tol => c.push(j),
            _ => clusters.push(vec![j]),
        }
    }
    let mut out = Vec::with_capacity(clusters.len());
    for c in clusters {
        let k = c.len();
        let a = Mat::<Complex64>::from_fn(n, k, |i, j| eig.vectors[(i, c[j])] * half[i]);
        let b = Mat::<Complex64>::from_fn(n, k, |i, j| eig.vectors[(i, c[j])] / half[i]);
        let kappa = if k == 1 {
            let na: f64 = (0..n).map(|i| a[(i, 0)].norm_sqr()).sum();
            let nb: f64 = (0..n).map(|i| b[(i, 0)].norm_sqr()).sum();
            (na * nb).sqrt()
        } else {
            // ‖A B*‖² = λ_max(G_a^{1/2} G_b G_a^{1/2})
            let ga = a.adjoint() * &a;
            let gb = b.adjoint() * &b;
            let ea = ga.self_adjoint_eigen(Side::Lower).map_err(|e| ElaxError::Numerical(format!("{e:?}")))?;
            let root = {
                let u = ea.U();
                let d = Mat::<Complex64>::from_fn(k, k, |i, j| {
                    if i == j {
                        Complex64::new(ea.S()[i].re.max(0.0).sqrt(), 0.0)
                    } else {
                        ZERO
                    }
                });
                u * d * u.adjoint()
            };
            let x = &root * gb * &root;
            let top = x
                .self_adjoint_eigenvalues(Side::Lower)
                .map_err(|e| ElaxError::Numerical(format!("{e:?}")))?
                .into_iter()
                .fold(0.0f64, f64::max);
            top.sqrt()
        };
        let mu = c.iter().map(|&j| eig.mu[j]).sum::<f64>() / k as f64;
        out.push(ClusterCondition { mu, size: k, kappa });
    }
    out.sort_by(|a, b| b.kappa.total_cmp(&a.kappa).then(a.mu.total_cmp(&b.mu)));
    Ok(out)
}

/// Largest x ≥ 0 with σ_min(x + iμ − M) ≤ ε, assuming σ_min grows along the
/// ray up to the boundary (true near a well-separated cluster).
fn ray_abscissa(m: &OperatorMatrix, mu: f64, eps: f64, guess: f64) -> f64 {
    let f = |x: f64| sigma_min(m, Complex64::new(x, mu)) - eps;
    let mut lo = 0.0;
    let mut flo = f(lo);
    if flo > 0.0 {
        return f64::NEG_INFINITY;
    }
    let mut hi = guess.max(eps) * 2.0;
    let mut fhi = f(hi);
    let mut expand = 0;
    while fhi <= 0.0 && expand < 60 {
        lo = hi;
        flo = fhi;
        hi *= 2.0;
        fhi = f(hi);
        expand += 1;
    }
    // Illinois regula falsi
    let mut side = 0;
    for _ in 0..100 {
        if (hi - lo) <= 1e-10 * hi {
            break;
        }
        let x = (lo * fhi - hi * flo) / (fhi - flo);
        let x = if x > lo && x < hi { x } else { 0.5 * (lo + hi) };
        let fx = f(x);
        if fx <= 0.0 {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    lo
}

/// ε-pseudospectral abscissa of the (weighted) skew-type truncation `m`,
/// from the eigenpairs of its unweighted version.
pub fn pseudospectral_abscissa(m: &OperatorMatrix, eig: &SkewEigen, eps: f64, candidates: usize) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(ElaxError::Config("ε must be positive".into()));
    }
    let clusters = cluster_conditions(m, eig)?;
    let picks: Vec<&ClusterCondition> = clusters.iter().take(candidates.max(1)).collect();
    let xs = par_map(&picks, |c| ray_abscissa(m, c.mu, eps, c.kappa * eps));
    Ok(xs.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

//! Dense eigenvalue computations for truncated operators.

use std::collections::VecDeque;

use faer::{Mat, Side};

use super::operator::OperatorMatrix;
use crate::error::{ElaxError, Result};
use crate::spectral::{FourierField, GridSpec};
use crate::Complex64;

/// Largest dimension handed to a dense eigensolver unless configured otherwise.
pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Relative skew-Hermitian defect accepted by [`skew_eigenpairs`].
pub const SKEW_TOLERANCE: f64 = 1e-12;

fn check_cap(dim: usize, cap: usize) -> Result<()> {
    if dim > cap {
        return Err(ElaxError::Config(format!("matrix dimension {dim} exceeds the dense solver cap {cap}")));
    }
    Ok(())
}

/// All eigenvalues from the general (non-Hermitian) dense solver, so that
/// any real parts are measured rather than assumed away.
pub fn eigen_spectrum(m: &OperatorMatrix, cap: usize) -> Result<Vec<Complex64>> {
    check_cap(m.dim(), cap)?;
    if m.dim() == 0 {
        return Ok(Vec::new());
    }
    m.to_dense()
        .eigenvalues()
        .map_err(|e| ElaxError::Numerical(format!("eigensolver did not converge at dimension {}: {e:?}", m.dim())))
}

/// Eigen-decomposition of a skew-Hermitian truncation: M v_j = i μ_j v_j with
/// orthonormal columns v_j.
#[derive(Clone, Debug)]
pub struct SkewEigen {
    pub mu: Vec<f64>,
    pub vectors: Mat<Complex64>,
    /// Sobolev weight of the matrix the pairs belong to.
    pub s: f64,
}

impl SkewEigen {
    pub fn eigenvalue(&self, j: usize) -> Complex64 {
        Complex64::new(0.0, self.mu[j])
    }

    /// The j-th eigenvector as a field on `grid`, unit ‖·‖_0 norm.
    pub fn field(&self, m: &OperatorMatrix, j: usize, grid: GridSpec) -> Result<FourierField> {
        let mut f = FourierField::scalar(grid, false);
        for (r, &k) in m.modes.iter().enumerate() {
            if grid.dim() == 2 && k[2] != 0 {
                return Err(ElaxError::Usage("3D mode on a 2D grid".into()));
            }
            if grid.flat_index(k).map_or(true, |j| grid.touches_nyquist(j)) {
                return Err(ElaxError::Usage(format!("mode {k:?} does not fit on an n = {} grid", grid.n())));
            }
            f.set_coeff(0, k, self.vectors[(r, j)])?;
        }
        Ok(f)
    }
}

/// Two-colouring of the coupling graph, if it has one.
fn bipartition(m: &OperatorMatrix) -> Option<Vec<bool>> {
    let n = m.dim();
    let mut adj = vec![Vec::new(); n];
    for &(r, c, v) in &m.entries {
        if v.norm() != 0.0 {
            if r == c {
                return None;
            }
            adj[r].push(c);
            adj[c].push(r);
        }
    }
    let mut colour: Vec<Option<bool>> = vec![None; n];
    for s in 0..n {
        if colour[s].is_some() {
            continue;
        }
        colour[s] = Some(false);
        let mut queue = VecDeque::from([s]);
        while let Some(a) = queue.pop_front() {
            let ca = colour[a].unwrap();
            for &b in &adj[a] {
                match colour[b] {
                    None => {
                        colour[b] = Some(!ca);
                        queue.push_back(b);
                    }
                    Some(cb) if cb == ca => return None,
                    _ => {}
                }
            }
        }
    }
    Some(colour.into_iter().map(|c| c.unwrap()).collect())
}

/// Orthonormal eigenpairs of a skew-Hermitian truncation.
///
/// When the coupling graph is bipartite, M = [[0, B], [−B*, 0]] and the
/// pairs follow from the SVD of the off-diagonal block (half the size);
/// otherwise iM is diagonalized as a Hermitian matrix.
pub fn skew_eigenpairs(m: &OperatorMatrix, cap: usize) -> Result<SkewEigen> {
    let defect = m.skew_hermitian_defect();
    if defect > SKEW_TOLERANCE {
        return Err(ElaxError::Usage(format!("matrix is not skew-Hermitian (defect {defect:e})")));
    }
    let n = m.dim();
    if let Some(colour) = bipartition(m) {
        let p: Vec<usize> = (0..n).filter(|&r| !colour[r]).collect();
        let q: Vec<usize> = (0..n).filter(|&r| colour[r]).collect();
        if !p.is_empty() && !q.is_empty() {
            check_cap(p.len().max(q.len()), cap)?;
            return Ok(bipartite_pairs(m, &colour, &p, &q));
        }
    }
    check_cap(n, cap)?;
    let d = m.to_dense();
    // H = iM is Hermitian; M v = −i h v
    let h = Mat::<Complex64>::from_fn(n, n, |i, j| Complex64::new(0.0, 1.0) * d[(i, j)]);
    let eig = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| ElaxError::Numerical(format!("Hermitian eigensolver failed: {e:?}")))?;
    let mu = (0..n).map(|j| -eig.S()[j].re).collect();
    Ok(SkewEigen { mu, vectors: eig.U().to_owned(), s: m.s })
}

fn bipartite_pairs(m: &OperatorMatrix, colour: &[bool], p: &[usize], q: &[usize]) -> SkewEigen {
    let n = m.dim();
    let mut local = vec![0usize; n];
    for (i, &r) in p.iter().enumerate() {
        local[r] = i;
    }
    for (i, &r) in q.iter().enumerate() {
        local[r] = i;
    }
    let real = m.entries.iter().all(|e| e.2.im == 0.0);
    let (np, nq) = (p.len(), q.len());
    let mut b = Mat::<Complex64>::zeros(np, nq);
    for &(r, c, v) in &m.entries {
        if !colour[r] && colour[c] {
            b[(local[r], local[c])] += v;
        }
    }
    let (u, sigma, v) = if real {
        let br = Mat::<f64>::from_fn(np, nq, |i, j| b[(i, j)].re);
        let svd = br.svd().expect("real SVD");
        let s: Vec<f64> = (0..np.min(nq)).map(|i| svd.S()[i]).collect();
        let lift = |x: faer::MatRef<'_, f64>| Mat::<Complex64>::from_fn(x.nrows(), x.ncols(), |i, j| Complex64::new(x[(i, j)], 0.0));
        (lift(svd.U()), s, lift(svd.V()))
    } else {
        let svd = b.svd().expect("complex SVD");
        let s: Vec<f64> = (0..np.min(nq)).map(|i| svd.S()[i].re).collect();
        (svd.U().to_owned(), s, svd.V().to_owned())
    };
    let r = np.min(nq);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let iu = Complex64::new(0.0, 1.0);
    let mut vectors = Mat::<Complex64>::zeros(n, n);
    let mut mu = Vec::with_capacity(n);
    let mut col = 0;
    for (j, &sj) in sigma.iter().enumerate().take(r) {
        for sign in [1.0, -1.0] {
            for (i, &row) in p.iter().enumerate() {
                vectors[(row, col)] = u[(i, j)] * h;
            }
            for (i, &row) in q.iter().enumerate() {
                vectors[(row, col)] = iu * sign * v[(i, j)] * h;
            }
            mu.push(sign * sj);
            col += 1;
        }
    }
    for j in r..np {
        for (i, &row) in p.iter().enumerate() {
            vectors[(row, col)] = u[(i, j)];
        }
        mu.push(0.0);
        col += 1;
    }
    for j in r..nq {
        for (i, &row) in q.iter().enumerate() {
            vectors[(row, col)] = v[(i, j)];
        }
        mu.push(0.0);
        col += 1;
    }
    SkewEigen { mu, vectors, s: m.s }
}

/// Largest gap between consecutive imaginary parts inside [lo, hi],
/// counting the band ends as points.
pub fn coverage_gap(eigenvalues: &[Complex64], lo: f64, hi: f64) -> f64 {
    let mut ys: Vec<f64> = eigenvalues.iter().map(|z| z.im).filter(|&y| y >= lo && y <= hi).collect();
    ys.push(lo);
    ys.push(hi);
    ys.sort_by(f64::total_cmp);
    ys.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

//! Galerkin truncation of the frozen-coefficient Lax operator.

use std::collections::HashMap;

use faer::Mat;

use crate::error::{ElaxError, Result};
use crate::spectral::FourierField;
use crate::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Coefficients of Ω below this fraction of the largest are treated as zero.
const SUPPORT_FRACTION: f64 = 1e-14;

/// Sparse truncated operator over a finite Fourier index set.
///
/// Row r stands for the mode `modes[r]`; `entries` holds (row, col, value)
/// with at most one entry per position. The dense form is built on demand.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub modes: Vec<[i64; 3]>,
    pub entries: Vec<(usize, usize, Complex64)>,
    /// Name of the frozen Ω that generated the matrix.
    pub omega_name: String,
    /// Fixed x-wavenumber, when restricted to one sector.
    pub sector: Option<i64>,
    /// Sobolev weight of the representation.
    pub s: f64,
    index: HashMap<[i64; 3], usize>,
}

impl OperatorMatrix {
    pub fn new(
        modes: Vec<[i64; 3]>,
        entries: Vec<(usize, usize, Complex64)>,
        omega_name: impl Into<String>,
        sector: Option<i64>,
        s: f64,
    ) -> Self {
        let index = modes.iter().enumerate().map(|(r, &k)| (k, r)).collect();
        Self { modes, entries, omega_name: omega_name.into(), sector, s, index }
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    pub fn row_of(&self, k: [i64; 3]) -> Option<usize> {
        self.index.get(&k).copied()
    }

    pub fn to_dense(&self) -> Mat<Complex64> {
        let n = self.dim();
        let mut m = Mat::<Complex64>::zeros(n, n);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    /// y = M x
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![ZERO; self.dim()];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    /// y = M* x
    pub fn apply_adjoint(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![ZERO; self.dim()];
        for &(r, c, v) in &self.entries {
            y[c] += v.conj() * x[r];
        }
        y
    }

    /// Lower and upper bandwidths in the current row order.
    pub fn bandwidths(&self) -> (usize, usize) {
        self.entries.iter().fold((0, 0), |(kl, ku), &(r, c, _)| {
            if r > c {
                (kl.max(r - c), ku)
            } else {
                (kl, ku.max(c - r))
            }
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.2.norm()).fold(0.0, f64::max)
    }

    /// max |M + M*| entrywise, relative to max |M| (0 for the zero matrix).
    pub fn skew_hermitian_defect(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut sum: HashMap<(usize, usize), Complex64> = HashMap::new();
        for &(r, c, v) in &self.entries {
            *sum.entry((r, c)).or_insert(ZERO) += v;
            *sum.entry((c, r)).or_insert(ZERO) += v.conj();
        }
        sum.values().map(|v| v.norm()).fold(0.0, f64::max) / scale
    }

    /// ‖M*M − MM*‖_F computed densely.
    pub fn departure_from_normality(&self) -> f64 {
        let m = self.to_dense();
        let a = m.adjoint() * &m;
        let b = &m * m.adjoint();
        (a - b).norm_l2()
    }

    /// The restriction of M to the x-wavenumber sector `kx`, provided the
    /// sector is invariant.
    pub fn restrict_to_sector(&self, kx: i64) -> Result<OperatorMatrix> {
        let rows: Vec<usize> = (0..self.dim()).filter(|&r| self.modes[r][0] == kx).collect();
        let mut new_index = vec![usize::MAX; self.dim()];
        for (i, &r) in rows.iter().enumerate() {
            new_index[r] = i;
        }
        let mut entries = Vec::new();
        for &(r, c, v) in &self.entries {
            match (new_index[r] != usize::MAX, new_index[c] != usize::MAX) {
                (true, true) => entries.push((new_index[r], new_index[c], v)),
                (false, false) => {}
                _ if v.norm() == 0.0 => {}
                _ => return Err(ElaxError::Usage(format!("sector k_x = {kx} is not invariant"))),
            }
        }
        let modes = rows.iter().map(|&r| self.modes[r]).collect();
        Ok(OperatorMatrix::new(modes, entries, self.omega_name.clone(), Some(kx), self.s))
    }
}

/// The Sobolev weight (1 + |k|²)^s.
pub fn sobolev_weight(k: [i64; 3], s: f64) -> f64 {
    let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
    (1.0 + k2).powf(s)
}

/// W^{1/2} M W^{−1/2} with W = diag((1+|k|²)^s), relative to the current
/// weight of `m` so that repeated calls compose.
pub fn weighted_similarity(m: &OperatorMatrix, s: f64) -> OperatorMatrix {
    let ds = s - m.s;
    let half: Vec<f64> = m.modes.iter().map(|&k| sobolev_weight(k, ds).sqrt()).collect();
    let entries = m.entries.iter().map(|&(r, c, v)| (r, c, v * (half[r] / half[c]))).collect();
    OperatorMatrix::new(m.modes.clone(), entries, m.omega_name.clone(), m.sector, s)
}

/// Modes of the truncation box |k_i| ≤ K in `dim` dimensions, optionally
/// with k_x fixed; lexicographic with the last axis fastest.
pub fn truncation_modes(dim: usize, truncation: i64, sector: Option<i64>) -> Vec<[i64; 3]> {
    let r: Vec<i64> = (-truncation..=truncation).collect();
    let xs: Vec<i64> = sector.map(|kx| vec![kx]).unwrap_or_else(|| r.clone());
    let mut out = Vec::new();
    for &kx in &xs {
        for &ky in &r {
            if dim == 2 {
                out.push([kx, ky, 0]);
            } else {
                for &kz in &r {
                    out.push([kx, ky, kz]);
                }
            }
        }
    }
    out
}

fn support(field: &FourierField, comps: usize) -> Vec<([i64; 3], Vec<Complex64>)> {
    let grid = *field.grid();
    let scale = field.max_abs();
    let mut out = Vec::new();
    if scale == 0.0 {
        return out;
    }
    for j in 0..grid.len() {
        let vals: Vec<Complex64> = (0..comps).map(|c| field.component_coeffs(c)[j]).collect();
        if vals.iter().any(|v| v.norm() > SUPPORT_FRACTION * scale) {
            out.push((grid.wavevector(j), vals));
        }
    }
    out
}

fn assemble(
    modes: Vec<[i64; 3]>,
    supp: &[([i64; 3], Vec<Complex64>)],
    name: &str,
    sector: Option<i64>,
    entry: impl Fn(&[Complex64], [i64; 3], [i64; 3]) -> Complex64,
) -> OperatorMatrix {
    let mut m = OperatorMatrix::new(modes, Vec::new(), name, sector, 0.0);
    let mut entries = Vec::new();
    for (c, &kp) in m.modes.iter().enumerate() {
        for (q, w) in supp {
            let k = [kp[0] + q[0], kp[1] + q[1], kp[2] + q[2]];
            if let Some(r) = m.row_of(k) {
                let v = entry(w, *q, kp);
                if v.norm() != 0.0 {
                    entries.push((r, c, v));
                }
            }
        }
    }
    m.entries = entries;
    m
}

/// Truncation of φ ↦ {Ω, φ} to the box |k_i| ≤ `truncation`.
///
/// M[k, k′] = −ω_{k−k′} (k_x k′_y − k_y k′_x). A sector restriction keeps
/// only modes with the given k_x and needs Ω to depend on y alone.
pub fn assemble_l2d(
    omega: &FourierField,
    name: &str,
    sector: Option<i64>,
    truncation: i64,
) -> Result<OperatorMatrix> {
    if omega.grid().dim() != 2 || omega.components() != 1 {
        return Err(ElaxError::Usage("assemble_l2d needs a 2D scalar vorticity".into()));
    }
    if truncation < 0 {
        return Err(ElaxError::Config("truncation must be nonnegative".into()));
    }
    let supp = support(omega, 1);
    if sector.is_some() && supp.iter().any(|(q, _)| q[0] != 0) {
        return Err(ElaxError::Usage(
            "sector restriction needs a vorticity that depends on y only".into(),
        ));
    }
    let modes = truncation_modes(2, truncation, sector);
    Ok(assemble(modes, &supp, name, sector, |w, q, kp| {
        -w[0] * (q[0] * kp[1] - q[1] * kp[0]) as f64
    }))
}

/// Truncation of the 3D operator φ ↦ (Ω·∇)φ on scalars:
/// M[k, k′] = i (ω_{k−k′} · k′).
pub fn assemble_l3d_ms(omega: &FourierField, name: &str, truncation: i64) -> Result<OperatorMatrix> {
    if omega.grid().dim() != 3 || omega.components() != 3 {
        return Err(ElaxError::Usage("assemble_l3d_ms needs a 3D vector vorticity".into()));
    }
    let supp = support(omega, 3);
    let modes = truncation_modes(3, truncation, None);
    Ok(assemble(modes, &supp, name, None, |w, _q, kp| {
        let dot = w[0] * kp[0] as f64 + w[1] * kp[1] as f64 + w[2] * kp[2] as f64;
        Complex64::new(0.0, 1.0) * dot
    }))
}

/// Largest eigenvalue of (M + M*)/2.
///
/// Lanczos with full reorthogonalization on the sparse Hermitian part;
/// exact once the Krylov space is exhausted.
pub fn numerical_abscissa(m: &OperatorMatrix) -> f64 {
    let n = m.dim();
    if n == 0 {
        return f64::NEG_INFINITY;
    }
    let h = |x: &[Complex64]| -> Vec<Complex64> {
        let a = m.apply(x);
        let b = m.apply_adjoint(x);
        a.iter().zip(&b).map(|(a, b)| (a + b) * 0.5).collect()
    };
    super::lanczos::extreme_eigenvalue(n, h, super::lanczos::Extreme::Largest)
}

use crate::error::{ElaxError, Result};

/// Largest supported total point count of a grid (per component).
pub const MAX_POINTS: usize = 1 << 24;

/// A square (2D) or cubic (3D) periodic grid on [0, 2π)^dim.
///
/// Index `i` along an axis carries wavenumber `i` for `i < n/2` and `i - n`
/// otherwise; `i = n/2` is the Nyquist mode, which is never populated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridSpec {
    dim: usize,
    n: usize,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(ElaxError::Config(format!("dimension must be 2 or 3, got {dim}")));
        }
        if n < 8 || n % 2 != 0 {
            return Err(ElaxError::Config(format!(
                "modes per axis must be even and at least 8, got {n}"
            )));
        }
        match n.checked_pow(dim as u32) {
            Some(len) if len <= MAX_POINTS => Ok(Self { dim, n }),
            _ => Err(ElaxError::Config(format!(
                "grid {n}^{dim} exceeds the transform backend limit of {MAX_POINTS} points"
            ))),
        }
    }

    pub fn d2(n: usize) -> Result<Self> {
        Self::new(2, n)
    }

    pub fn d3(n: usize) -> Result<Self> {
        Self::new(3, n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of points (or coefficients) per component.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Signed wavenumber stored at axis index `i`.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Axis index of wavenumber `k`, if it is representable (Nyquist included).
    #[inline]
    pub fn axis_index(&self, k: i64) -> Option<usize> {
        let h = (self.n / 2) as i64;
        if k < -h || k >= h {
            None
        } else if k >= 0 {
            Some(k as usize)
        } else {
            Some((k + self.n as i64) as usize)
        }
    }

    #[inline]
    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.n / 2
    }

    /// Largest wavenumber magnitude kept by the 2/3 rule.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.n / 3) as i64
    }

    #[inline]
    pub fn kept_by_dealias(&self, k: i64) -> bool {
        3 * k.unsigned_abs() as usize <= self.n
    }

    /// Wavevector at a flat index; unused trailing axes are 0.
    #[inline]
    pub fn wavevector(&self, flat: usize) -> [i64; 3] {
        let n = self.n;
        if self.dim == 2 {
            [self.wavenumber(flat / n), self.wavenumber(flat % n), 0]
        } else {
            [
                self.wavenumber(flat / (n * n)),
                self.wavenumber((flat / n) % n),
                self.wavenumber(flat % n),
            ]
        }
    }

    /// Axis indices at a flat index.
    #[inline]
    pub fn axis_indices(&self, flat: usize) -> [usize; 3] {
        let n = self.n;
        if self.dim == 2 {
            [flat / n, flat % n, 0]
        } else {
            [flat / (n * n), (flat / n) % n, flat % n]
        }
    }

    /// Flat index of a wavevector, or `None` when it lies outside the grid.
    pub fn flat_index(&self, k: [i64; 3]) -> Option<usize> {
        let n = self.n;
        let a = self.axis_index(k[0])?;
        let b = self.axis_index(k[1])?;
        if self.dim == 2 {
            if k[2] != 0 {
                return None;
            }
            Some(a * n + b)
        } else {
            let c = self.axis_index(k[2])?;
            Some((a * n + b) * n + c)
        }
    }

    /// True if any axis index is the Nyquist index.
    #[inline]
    pub fn touches_nyquist(&self, flat: usize) -> bool {
        let idx = self.axis_indices(flat);
        idx[..self.dim].iter().any(|&i| self.is_nyquist(i))
    }

    /// Physical coordinates of a flat grid point.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let h = 2.0 * std::f64::consts::PI / self.n as f64;
        let idx = self.axis_indices(flat);
        [idx[0] as f64 * h, idx[1] as f64 * h, idx[2] as f64 * h]
    }

    pub fn k_squared(&self, flat: usize) -> f64 {
        let k = self.wavevector(flat);
        (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(2, 7).is_err());
        assert!(GridSpec::new(2, 6).is_err());
        assert!(GridSpec::new(4, 16).is_err());
        assert!(GridSpec::new(3, 1024).is_err());
        assert!(GridSpec::new(3, 32).is_ok());
    }

    #[test]
    fn wavenumber_layout() {
        let g = GridSpec::d2(8).unwrap();
        let ks: Vec<i64> = (0..8).map(|i| g.wavenumber(i)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        for k in -4..4 {
            assert_eq!(g.wavenumber(g.axis_index(k).unwrap()), k);
        }
        assert!(g.axis_index(4).is_none());
        assert!(g.is_nyquist(4));
    }

    #[test]
    fn flat_roundtrip_3d() {
        let g = GridSpec::d3(8).unwrap();
        for flat in 0..g.len() {
            assert_eq!(g.flat_index(g.wavevector(flat)), Some(flat));
        }
    }

    #[test]
    fn dealias_cutoff_n12() {
        let g = GridSpec::d2(12).unwrap();
        assert!(g.kept_by_dealias(4));
        assert!(!g.kept_by_dealias(5));
        assert!(!g.kept_by_dealias(-5));
    }
}

/// Per-grid lookup tables, built once per grid and shared.
pub struct GridTables {
    /// Wavevector components per flat index, as floats.
    pub k: [Vec<f64>; 3],
    pub k2: Vec<f64>,
    /// Flat indices cleared by the 2/3 rule (Nyquist included).
    pub aliased: Vec<usize>,
    /// Flat indices touching a Nyquist index.
    pub nyquist: Vec<usize>,
}

impl GridSpec {
    /// Shared lookup tables for this grid.
    pub fn tables(&self) -> std::sync::Arc<GridTables> {
        use std::collections::HashMap;
        use std::sync::{Arc, Mutex, OnceLock};
        static CACHE: OnceLock<Mutex<HashMap<GridSpec, Arc<GridTables>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().expect("grid table cache poisoned");
        map.entry(*self)
            .or_insert_with(|| {
                let len = self.len();
                let mut k: [Vec<f64>; 3] = std::array::from_fn(|_| Vec::with_capacity(len));
                let mut k2 = Vec::with_capacity(len);
                let mut aliased = Vec::new();
                let mut nyquist = Vec::new();
                for i in 0..len {
                    let w = self.wavevector(i);
                    for a in 0..3 {
                        k[a].push(w[a] as f64);
                    }
                    k2.push((w[0] * w[0] + w[1] * w[1] + w[2] * w[2]) as f64);
                    if !w.iter().all(|&ki| self.kept_by_dealias(ki)) {
                        aliased.push(i);
                    }
                    if self.touches_nyquist(i) {
                        nyquist.push(i);
                    }
                }
                Arc::new(GridTables { k, k2, aliased, nyquist })
            })
            .clone()
    }
}

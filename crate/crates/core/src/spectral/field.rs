use num_complex::Complex64;

use super::grid::GridSpec;
use super::transform;
use crate::error::{ElaxError, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Spectral representation of a scalar or vector field on T² / T³.
///
/// Coefficients are stored component-major, each component in row-major
/// FFT order (see [`GridSpec::wavevector`]). `real` marks fields whose
/// physical values are real, i.e. coeff(−k) = conj(coeff(k)).
#[derive(Clone, Debug, PartialEq)]
pub struct FourierField {
    grid: GridSpec,
    components: usize,
    real: bool,
    coeffs: Vec<Complex64>,
}

impl FourierField {
    pub fn zeros(grid: GridSpec, components: usize, real: bool) -> Self {
        assert!(components == 1 || components == grid.dim(), "components must be 1 or dim");
        Self { grid, components, real, coeffs: vec![ZERO; components * grid.len()] }
    }

    pub fn scalar(grid: GridSpec, real: bool) -> Self {
        Self::zeros(grid, 1, real)
    }

    pub fn vector(grid: GridSpec, real: bool) -> Self {
        Self::zeros(grid, grid.dim(), real)
    }

    /// Wraps raw coefficients; Nyquist modes are cleared.
    pub fn from_coeffs(grid: GridSpec, components: usize, real: bool, coeffs: Vec<Complex64>) -> Result<Self> {
        if components != 1 && components != grid.dim() {
            return Err(ElaxError::Usage(format!("{components} components on a {}D grid", grid.dim())));
        }
        if coeffs.len() != components * grid.len() {
            return Err(ElaxError::Usage(format!(
                "expected {} coefficients, got {}",
                components * grid.len(),
                coeffs.len()
            )));
        }
        let mut f = Self { grid, components, real, coeffs };
        f.zero_nyquist();
        Ok(f)
    }

    /// Transforms physical samples (component-major) to a field.
    pub fn from_physical(grid: GridSpec, components: usize, real: bool, mut data: Vec<Complex64>) -> Result<Self> {
        if data.len() != components * grid.len() {
            return Err(ElaxError::Usage("physical data length does not match grid".into()));
        }
        for chunk in data.chunks_mut(grid.len()) {
            transform::forward(chunk, &grid);
        }
        Self::from_coeffs(grid, components, real, data)
    }

    /// Samples a closure at the grid points and transforms. `f` writes one
    /// value per component.
    pub fn from_fn<F>(grid: GridSpec, components: usize, real: bool, f: F) -> Self
    where
        F: Fn([f64; 3], &mut [Complex64]),
    {
        let len = grid.len();
        let mut data = vec![ZERO; components * len];
        let mut buf = vec![ZERO; components];
        for j in 0..len {
            f(grid.point(j), &mut buf);
            for c in 0..components {
                data[c * len + j] = buf[c];
            }
        }
        Self::from_physical(grid, components, real, data).expect("length checked")
    }

    /// Real scalar field from a real function of position.
    pub fn from_real_fn<F: Fn([f64; 3]) -> f64>(grid: GridSpec, f: F) -> Self {
        Self::from_fn(grid, 1, true, |x, out| out[0] = Complex64::new(f(x), 0.0))
    }

    /// Complex scalar field from a complex function of position.
    pub fn from_complex_fn<F: Fn([f64; 3]) -> Complex64>(grid: GridSpec, f: F) -> Self {
        Self::from_fn(grid, 1, false, |x, out| out[0] = f(x))
    }

    /// Single Fourier mode `amplitude · e^{ik·x}` (complex scalar).
    pub fn mode(grid: GridSpec, k: [i64; 3], amplitude: Complex64) -> Result<Self> {
        let mut f = Self::scalar(grid, false);
        let idx = grid
            .flat_index(k)
            .filter(|&i| !grid.touches_nyquist(i))
            .ok_or_else(|| ElaxError::Usage(format!("wavevector {k:?} not representable")))?;
        f.coeffs[idx] = amplitude;
        Ok(f)
    }

    /// Inverse transform of every component (component-major samples).
    pub fn to_physical(&self) -> Vec<Complex64> {
        let mut data = self.coeffs.clone();
        for chunk in data.chunks_mut(self.grid.len()) {
            transform::inverse(chunk, &self.grid);
        }
        data
    }

    /// Physical samples of one component.
    pub fn component_physical(&self, c: usize) -> Vec<Complex64> {
        let mut data = self.component_coeffs(c).to_vec();
        transform::inverse(&mut data, &self.grid);
        data
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn set_real(&mut self, real: bool) {
        self.real = real;
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn component_coeffs(&self, c: usize) -> &[Complex64] {
        let len = self.grid.len();
        &self.coeffs[c * len..(c + 1) * len]
    }

    pub fn component_coeffs_mut(&mut self, c: usize) -> &mut [Complex64] {
        let len = self.grid.len();
        &mut self.coeffs[c * len..(c + 1) * len]
    }

    /// Scalar field holding component `c`.
    pub fn component(&self, c: usize) -> FourierField {
        FourierField {
            grid: self.grid,
            components: 1,
            real: self.real,
            coeffs: self.component_coeffs(c).to_vec(),
        }
    }

    /// Stacks `dim` scalar fields into a vector field.
    pub fn from_components(parts: &[FourierField]) -> Result<Self> {
        let grid = *parts
            .first()
            .ok_or_else(|| ElaxError::Usage("no components given".into()))?
            .grid();
        if parts.len() != grid.dim() {
            return Err(ElaxError::Usage(format!("need {} components, got {}", grid.dim(), parts.len())));
        }
        let mut coeffs = Vec::with_capacity(grid.len() * parts.len());
        for p in parts {
            if *p.grid() != grid || p.components != 1 {
                return Err(ElaxError::Usage("components must be scalar fields on one grid".into()));
            }
            coeffs.extend_from_slice(&p.coeffs);
        }
        let real = parts.iter().all(|p| p.real);
        Ok(Self { grid, components: parts.len(), real, coeffs })
    }

    /// Coefficient of wavevector `k` in component `c` (zero if not on the grid).
    pub fn coeff(&self, c: usize, k: [i64; 3]) -> Complex64 {
        match self.grid.flat_index(k) {
            Some(i) => self.component_coeffs(c)[i],
            None => ZERO,
        }
    }

    pub fn set_coeff(&mut self, c: usize, k: [i64; 3], v: Complex64) -> Result<()> {
        let i = self
            .grid
            .flat_index(k)
            .filter(|&i| !self.grid.touches_nyquist(i))
            .ok_or_else(|| ElaxError::Usage(format!("wavevector {k:?} not representable")))?;
        self.component_coeffs_mut(c)[i] = v;
        Ok(())
    }

    pub fn mean(&self, c: usize) -> Complex64 {
        self.component_coeffs(c)[0]
    }

    pub fn zero_nyquist(&mut self) {
        let tables = self.grid.tables();
        for chunk in self.coeffs.chunks_mut(self.grid.len()) {
            for &i in &tables.nyquist {
                chunk[i] = ZERO;
            }
        }
    }

    /// 2/3-rule truncation: clears every mode with some |k_i| > n/3.
    pub fn dealias(&mut self) {
        let tables = self.grid.tables();
        for chunk in self.coeffs.chunks_mut(self.grid.len()) {
            for &i in &tables.aliased {
                chunk[i] = ZERO;
            }
        }
    }

    pub fn dealiased(mut self) -> Self {
        self.dealias();
        self
    }

    pub fn is_dealiased(&self) -> bool {
        let tables = self.grid.tables();
        self.coeffs
            .chunks(self.grid.len())
            .all(|chunk| tables.aliased.iter().all(|&i| chunk[i] == ZERO))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Largest relative violation of coeff(−k) = conj(coeff(k)).
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let len = self.grid.len();
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for c in 0..self.components {
            let data = self.component_coeffs(c);
            for (i, v) in data.iter().enumerate() {
                if self.grid.touches_nyquist(i) {
                    continue;
                }
                let k = self.grid.wavevector(i);
                let j = self.grid.flat_index([-k[0], -k[1], -k[2]]).expect("mirror on grid");
                debug_assert!(j < len);
                worst = worst.max((v - data[j].conj()).norm());
            }
        }
        worst / scale
    }

    /// Replaces coefficients by their conjugate-symmetric part and flags the field real.
    pub fn symmetrize_real(&mut self) {
        let grid = self.grid;
        for c in 0..self.components {
            let src = self.component_coeffs(c).to_vec();
            let dst = self.component_coeffs_mut(c);
            for (i, v) in dst.iter_mut().enumerate() {
                if grid.touches_nyquist(i) {
                    *v = ZERO;
                    continue;
                }
                let k = grid.wavevector(i);
                let j = grid.flat_index([-k[0], -k[1], -k[2]]).expect("mirror on grid");
                *v = 0.5 * (src[i] + src[j].conj());
            }
        }
        self.real = true;
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// ‖f‖_0 with ‖e^{ik·x}‖_0 = 1; vector fields sum over components.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ⟨self, other⟩ = Σ conj(self_k) other_k (the normalized L² product).
    pub fn inner(&self, other: &FourierField) -> Complex64 {
        debug_assert!(self.same_shape(other));
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn same_shape(&self, other: &FourierField) -> bool {
        self.grid == other.grid && self.components == other.components
    }

    pub fn check_same_shape(&self, other: &FourierField, what: &str) -> Result<()> {
        if self.grid != other.grid {
            return Err(ElaxError::Usage(format!("{what}: grid mismatch")));
        }
        if self.components != other.components {
            return Err(ElaxError::Usage(format!("{what}: component count mismatch")));
        }
        Ok(())
    }

    pub fn scale(&mut self, a: Complex64) {
        self.coeffs.iter_mut().for_each(|c| *c *= a);
        if a.im != 0.0 {
            self.real = false;
        }
    }

    pub fn scaled(mut self, a: f64) -> Self {
        self.coeffs.iter_mut().for_each(|c| *c *= a);
        self
    }

    /// self += a · other
    pub fn axpy(&mut self, a: f64, other: &FourierField) {
        debug_assert!(self.same_shape(other));
        self.coeffs.iter_mut().zip(&other.coeffs).for_each(|(x, y)| *x += a * y);
        self.real &= other.real;
    }

    /// self += a · other, complex factor
    pub fn axpy_complex(&mut self, a: Complex64, other: &FourierField) {
        debug_assert!(self.same_shape(other));
        self.coeffs.iter_mut().zip(&other.coeffs).for_each(|(x, y)| *x += a * y);
        self.real = false;
    }

    pub fn sub(&self, other: &FourierField) -> FourierField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn add(&self, other: &FourierField) -> FourierField {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    /// Discards the flag-only distinction and treats the field as complex.
    pub fn into_complex(mut self) -> Self {
        self.real = false;
        self
    }
}

//! Spectral differential operators and norms.

use num_complex::Complex64;

use super::field::FourierField;
use crate::error::{ElaxError, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Inverse-then-forward transform. Must reproduce the input to 1e-12
/// relative in max norm for every supported grid.
pub fn transform_roundtrip(field: &FourierField) -> Result<FourierField> {
    let phys = field.to_physical();
    FourierField::from_physical(*field.grid(), field.components(), field.is_real(), phys)
}

/// ∂/∂x_axis applied to every component: coeff(k) ↦ i·k_axis·coeff(k).
pub fn derivative(field: &FourierField, axis: usize) -> Result<FourierField> {
    let grid = *field.grid();
    if axis >= grid.dim() {
        return Err(ElaxError::Usage(format!("axis {axis} out of range for {}D grid", grid.dim())));
    }
    let tables = grid.tables();
    let k = &tables.k[axis];
    let mut out = field.clone();
    for chunk in out.coeffs_mut().chunks_mut(grid.len()) {
        for (c, &ka) in chunk.iter_mut().zip(k) {
            *c = Complex64::new(-ka * c.im, ka * c.re);
        }
    }
    // The Nyquist wavenumber is −n/2 along the axis; clear it explicitly.
    out.zero_nyquist();
    Ok(out)
}

/// Inverts the Laplacian in the zero-mean gauge: coeff(k) ↦ −coeff(k)/|k|².
pub fn solve_poisson(omega: &FourierField) -> FourierField {
    let grid = *omega.grid();
    let tables = grid.tables();
    let mut out = omega.clone();
    for chunk in out.coeffs_mut().chunks_mut(grid.len()) {
        for (c, &k2) in chunk.iter_mut().zip(&tables.k2) {
            *c = if k2 == 0.0 { Complex64::new(0.0, 0.0) } else { *c / -k2 };
        }
    }
    out
}

pub fn laplacian(field: &FourierField) -> FourierField {
    let grid = *field.grid();
    let len = grid.len();
    let mut out = field.clone();
    for (i, c) in out.coeffs_mut().iter_mut().enumerate() {
        *c *= -grid.k_squared(i % len);
    }
    out
}

/// ( Σ_k (1+|k|²)^s |coeff(k)|² )^{1/2}, summed over components.
pub fn sobolev_norm(field: &FourierField, s: f64) -> f64 {
    let grid = *field.grid();
    let tables = grid.tables();
    field
        .coeffs()
        .chunks(grid.len())
        .flat_map(|chunk| chunk.iter().zip(&tables.k2))
        .map(|(c, &k2)| if s == 0.0 { c.norm_sqr() } else { (1.0 + k2).powf(s) * c.norm_sqr() })
        .sum::<f64>()
        .sqrt()
}

/// 2/3-rule truncation (idempotent).
pub fn dealias(field: &FourierField) -> FourierField {
    field.clone().dealiased()
}

/// Divergence of a vector field.
pub fn divergence(field: &FourierField) -> Result<FourierField> {
    let grid = *field.grid();
    if field.components() != grid.dim() {
        return Err(ElaxError::Usage("divergence needs a vector field".into()));
    }
    let len = grid.len();
    let mut out = FourierField::scalar(grid, field.is_real());
    let dst = out.coeffs_mut();
    for c in 0..grid.dim() {
        let src = field.component_coeffs(c);
        for i in 0..len {
            if !grid.touches_nyquist(i) {
                dst[i] += I * grid.wavevector(i)[c] as f64 * src[i];
            }
        }
    }
    Ok(out)
}

/// Curl of a 3D vector field.
pub fn curl(field: &FourierField) -> Result<FourierField> {
    let grid = *field.grid();
    if grid.dim() != 3 || field.components() != 3 {
        return Err(ElaxError::Usage("curl needs a 3D vector field".into()));
    }
    let len = grid.len();
    let mut out = FourierField::vector(grid, field.is_real());
    let (a, b, c) = (field.component_coeffs(0), field.component_coeffs(1), field.component_coeffs(2));
    let mut res = vec![Complex64::new(0.0, 0.0); 3 * len];
    for i in 0..len {
        if grid.touches_nyquist(i) {
            continue;
        }
        let k = grid.wavevector(i);
        let (kx, ky, kz) = (k[0] as f64, k[1] as f64, k[2] as f64);
        res[i] = I * (ky * c[i] - kz * b[i]);
        res[len + i] = I * (kz * a[i] - kx * c[i]);
        res[2 * len + i] = I * (kx * b[i] - ky * a[i]);
    }
    out.coeffs_mut().copy_from_slice(&res);
    Ok(out)
}

/// Leray projection onto divergence-free fields: v ↦ v − k (k·v)/|k|².
pub fn solenoidal_projection(field: &FourierField) -> Result<FourierField> {
    let grid = *field.grid();
    if field.components() != grid.dim() {
        return Err(ElaxError::Usage("projection needs a vector field".into()));
    }
    let len = grid.len();
    let dim = grid.dim();
    let mut out = field.clone();
    let coeffs = out.coeffs_mut();
    for i in 0..len {
        let k = grid.wavevector(i);
        let k2 = grid.k_squared(i);
        if k2 == 0.0 {
            continue;
        }
        let mut kv = Complex64::new(0.0, 0.0);
        for c in 0..dim {
            kv += k[c] as f64 * coeffs[c * len + i];
        }
        for c in 0..dim {
            coeffs[c * len + i] -= k[c] as f64 * kv / k2;
        }
    }
    Ok(out)
}

/// Gradient of a scalar field as a vector field.
pub fn gradient(field: &FourierField) -> Result<FourierField> {
    if field.components() != 1 {
        return Err(ElaxError::Usage("gradient needs a scalar field".into()));
    }
    let parts: Vec<FourierField> =
        (0..field.grid().dim()).map(|a| derivative(field, a)).collect::<Result<_>>()?;
    FourierField::from_components(&parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::GridSpec;

    fn close(a: &FourierField, b: &FourierField, tol: f64) {
        let d = a.sub(b).max_abs();
        assert!(d < tol, "fields differ by {d}");
    }

    #[test]
    fn derivative_examples() {
        let g = GridSpec::d2(16).unwrap();
        let s = FourierField::from_real_fn(g, |x| x[0].sin());
        close(&derivative(&s, 0).unwrap(), &FourierField::from_real_fn(g, |x| x[0].cos()), 1e-14);
        let e = FourierField::mode(g, [1, 2, 0], Complex64::new(1.0, 0.0)).unwrap();
        let de = derivative(&e, 1).unwrap();
        assert!((de.coeff(0, [1, 2, 0]) - Complex64::new(0.0, 2.0)).norm() < 1e-15);
        let c = FourierField::from_real_fn(g, |_| 3.0);
        assert_eq!(derivative(&c, 0).unwrap().max_abs(), 0.0);
        assert!(derivative(&c, 2).is_err());
    }

    #[test]
    fn poisson_examples() {
        let g = GridSpec::d2(16).unwrap();
        let w = FourierField::from_real_fn(g, |x| x[1].cos());
        close(&solve_poisson(&w), &FourierField::from_real_fn(g, |x| -x[1].cos()), 1e-14);
        let w = FourierField::from_real_fn(g, |x| x[0].cos() + x[1].cos());
        close(&solve_poisson(&w), &FourierField::from_real_fn(g, |x| -x[0].cos() - x[1].cos()), 1e-14);
        assert_eq!(solve_poisson(&FourierField::scalar(g, true)).max_abs(), 0.0);
    }

    #[test]
    fn sobolev_examples() {
        let g = GridSpec::d2(16).unwrap();
        let e = FourierField::mode(g, [1, 0, 0], Complex64::new(1.0, 0.0)).unwrap();
        assert!((sobolev_norm(&e, 1.0) - 2f64.sqrt()).abs() < 1e-14);
        let c = FourierField::from_real_fn(g, |_| -2.5);
        for s in [0.0, 1.0, 3.5] {
            assert!((sobolev_norm(&c, s) - 2.5).abs() < 1e-14);
        }
        let mut f = e.clone();
        f.axpy(1.0, &FourierField::mode(g, [0, 2, 0], Complex64::new(1.0, 0.0)).unwrap());
        assert!((sobolev_norm(&f, 2.0) - 29f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn dealias_examples() {
        let g = GridSpec::d2(12).unwrap();
        let f5 = FourierField::mode(g, [5, 0, 0], Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(dealias(&f5).max_abs(), 0.0);
        let f4 = FourierField::mode(g, [4, 0, 0], Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(dealias(&f4), f4);
        let mix = f4.add(&f5);
        assert_eq!(dealias(&dealias(&mix)), dealias(&mix));
    }

    #[test]
    fn curl_and_projection() {
        let g = GridSpec::d3(8).unwrap();
        let u = FourierField::from_fn(g, 3, true, |x, out| {
            out[0] = Complex64::new(x[2].sin(), 0.0);
            out[1] = Complex64::new(0.0, 0.0);
            out[2] = Complex64::new(0.0, 0.0);
        });
        let w = curl(&u).unwrap();
        let expected = FourierField::from_fn(g, 3, true, |x, out| {
            out[0] = Complex64::new(0.0, 0.0);
            out[1] = Complex64::new(x[2].cos(), 0.0);
            out[2] = Complex64::new(0.0, 0.0);
        });
        close(&w, &expected, 1e-14);
        let p = solenoidal_projection(&u).unwrap();
        close(&p, &u, 1e-15);
        let grad = gradient(&FourierField::from_real_fn(g, |x| (x[0] + x[1]).sin())).unwrap();
        assert!(solenoidal_projection(&grad).unwrap().max_abs() < 1e-15);
    }
}

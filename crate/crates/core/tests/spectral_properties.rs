use proptest::prelude::*;

use elax_core::euler2d::poisson_bracket;
use elax_core::spectral::{
    dealias, derivative, divergence, solenoidal_projection, sobolev_norm, solve_poisson, transform_roundtrip,
    FourierField, GridSpec,
};
use elax_core::Complex64;

fn field_2d(n: usize, samples: &[(f64, f64)], real: bool) -> FourierField {
    let g = GridSpec::d2(n).unwrap();
    let data = samples.iter().map(|&(a, b)| Complex64::new(a, if real { 0.0 } else { b })).collect();
    FourierField::from_physical(g, 1, real, data).unwrap()
}

fn samples(n: usize, dim: u32) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n.pow(dim))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parseval_holds_for_noise(s in samples(16, 2), real in any::<bool>()) {
        let f = field_2d(16, &s, real);
        let phys = f.to_physical();
        let mean_sq = phys.iter().map(|z| z.norm_sqr()).sum::<f64>() / phys.len() as f64;
        // Nyquist rows are cleared on construction, so compare against the stored field
        prop_assert!(rel(mean_sq, f.l2_norm().powi(2)) < 1e-12);
    }

    #[test]
    fn transform_roundtrip_is_exact(s in samples(32, 2)) {
        let f = field_2d(32, &s, false);
        let back = transform_roundtrip(&f).unwrap();
        prop_assert!(back.sub(&f).l2_norm() <= 1e-12 * f.l2_norm());
    }

    #[test]
    fn laplacian_of_poisson_solution_is_omega_minus_mean(s in samples(16, 2)) {
        let omega = field_2d(16, &s, true);
        let psi = solve_poisson(&omega);
        let lap = derivative(&derivative(&psi, 0).unwrap(), 0).unwrap()
            .add(&derivative(&derivative(&psi, 1).unwrap(), 1).unwrap());
        let mut gauged = omega.clone();
        let m = gauged.mean(0);
        gauged.set_coeff(0, [0, 0, 0], gauged.coeff(0, [0, 0, 0]) - m).unwrap();
        prop_assert!(lap.sub(&gauged).l2_norm() <= 1e-12 * omega.l2_norm().max(1e-300));
    }

    #[test]
    fn sobolev_norm_is_monotone(s in samples(16, 2), shrink in prop::collection::vec(0.0f64..=1.0, 256), s_lo in 0.0f64..2.0, ds in 0.0f64..2.0) {
        let f = field_2d(16, &s, false);
        let mut g = f.clone();
        for (c, w) in g.coeffs_mut().iter_mut().zip(&shrink) {
            *c *= *w;
        }
        prop_assert!(sobolev_norm(&g, 0.0) <= sobolev_norm(&f, 0.0) * (1.0 + 1e-15));
        prop_assert!(sobolev_norm(&f, s_lo) <= sobolev_norm(&f, s_lo + ds) * (1.0 + 1e-15));
    }

    #[test]
    fn dealiasing_is_idempotent(s in samples(12, 2)) {
        let once = dealias(&field_2d(12, &s, false));
        prop_assert!(once.is_dealiased());
        let twice = dealias(&once);
        prop_assert_eq!(twice.coeffs(), once.coeffs());
    }

    #[test]
    fn bracket_is_antisymmetric_with_zero_mean(a in samples(16, 2), b in samples(16, 2)) {
        let (f, g) = (field_2d(16, &a, true), field_2d(16, &b, true));
        let fg = poisson_bracket(&f, &g).unwrap();
        let gf = poisson_bracket(&g, &f).unwrap();
        let scale = (sobolev_norm(&f, 1.0) * sobolev_norm(&g, 1.0)).max(1e-300);
        prop_assert!(fg.add(&gf).l2_norm() <= 1e-12 * scale);
        prop_assert!(fg.mean(0).norm() <= 1e-12 * scale);
    }

    #[test]
    fn solenoidal_projection_is_idempotent_and_kills_divergence(s in samples(8, 3), t in samples(8, 3), u in samples(8, 3)) {
        let g = GridSpec::d3(8).unwrap();
        let parts: Vec<FourierField> = [s, t, u]
            .iter()
            .map(|v| FourierField::from_physical(g, 1, true, v.iter().map(|&(a, _)| Complex64::new(a, 0.0)).collect()).unwrap())
            .collect();
        let v = FourierField::from_components(&parts).unwrap();
        let p = solenoidal_projection(&v).unwrap();
        let pp = solenoidal_projection(&p).unwrap();
        prop_assert!(pp.sub(&p).l2_norm() <= 1e-13 * v.l2_norm());
        prop_assert!(divergence(&p).unwrap().l2_norm() <= 1e-12 * sobolev_norm(&v, 1.0));
    }
}

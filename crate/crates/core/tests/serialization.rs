use proptest::prelude::*;

use elax_core::csv::{fmt_f64, Table};
use elax_core::euler2d::random_smooth;
use elax_core::snapshot::{read_snapshot, write_snapshot, MAGIC, NORMALIZATION_NOTE};
use elax_core::spectral::{FourierField, GridSpec};
use elax_core::Complex64;

#[test]
fn snapshot_bytes_follow_the_documented_layout() {
    let g = GridSpec::d2(8).unwrap();
    let f = FourierField::mode(g, [1, 0, 0], Complex64::new(0.5, -2.0)).unwrap();
    let mut bytes = Vec::new();
    write_snapshot(&mut bytes, &f, 1.25).unwrap();

    let note = NORMALIZATION_NOTE.as_bytes();
    let mut want = Vec::new();
    want.extend_from_slice(b"ELAX1");
    want.push(2);
    want.extend_from_slice(&8u32.to_le_bytes());
    want.push(1);
    want.push(0);
    want.extend_from_slice(&1.25f64.to_le_bytes());
    want.extend_from_slice(&(note.len() as u16).to_le_bytes());
    want.extend_from_slice(note);
    // flat index of k = (1, 0) on n = 8 is 1·8 + 0
    for j in 0..64 {
        let v = if j == 8 { (0.5f64, -2.0f64) } else { (0.0, 0.0) };
        want.extend_from_slice(&v.0.to_le_bytes());
        want.extend_from_slice(&v.1.to_le_bytes());
    }
    assert_eq!(&bytes[..5], MAGIC);
    assert_eq!(bytes, want);
}

#[test]
fn csv_rows_use_seventeen_significant_digits() {
    let mut t = Table::new(["t", "x"]);
    t.push(vec![0.1, -1.0 / 3.0]);
    let mut out = Vec::new();
    t.write(&mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), "t,x\n1.0000000000000001e-1,-3.3333333333333331e-1\n");
}

proptest! {
    #[test]
    fn snapshots_roundtrip_bit_exactly(seed in any::<u64>(), t in -1e3f64..1e3, three_d in any::<bool>()) {
        let f = if three_d {
            let g = GridSpec::d3(8).unwrap();
            let c: Vec<FourierField> = (0..3).map(|i| random_smooth(g, 1.0, 2.0, seed.wrapping_add(i))).collect();
            FourierField::from_components(&c).unwrap()
        } else {
            random_smooth(GridSpec::d2(16).unwrap(), 1.0, 3.0, seed).into_complex()
        };
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &f, t).unwrap();
        let (back, t_back) = read_snapshot(bytes.as_slice()).unwrap();
        prop_assert_eq!(t_back.to_bits(), t.to_bits());
        prop_assert_eq!(back.components(), f.components());
        prop_assert_eq!(back.is_real(), f.is_real());
        let same = back.coeffs().iter().zip(f.coeffs()).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits());
        prop_assert!(same);
    }

    #[test]
    fn csv_floats_roundtrip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}

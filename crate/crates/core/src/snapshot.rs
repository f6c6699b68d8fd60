//! ELAX1 field snapshots.
//!
//! Byte layout (all integers and floats little-endian):
//!
//! | offset | size | content                                          |
//! |--------|------|--------------------------------------------------|
//! | 0      | 5    | ASCII magic `ELAX1`                              |
//! | 5      | 1    | dim (2 or 3)                                     |
//! | 6      | 4    | n, u32                                           |
//! | 10     | 1    | component count (1 or dim)                       |
//! | 11     | 1    | flags: bit 0 set = real-valued field             |
//! | 12     | 8    | time t, f64                                      |
//! | 20     | 2    | note length L, u16                               |
//! | 22     | L    | UTF-8 note describing the normalization          |
//! | 22+L   | …    | coefficients as (re, im) f64 pairs               |
//!
//! Coefficients are written component-major; within a component the flat
//! index runs row-major over axes in FFT order (axis index i carries
//! wavenumber i for i < n/2 and i − n otherwise; the last axis varies fastest).

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{ElaxError, Result};
use crate::spectral::{FourierField, GridSpec};

pub const MAGIC: &[u8; 5] = b"ELAX1";

/// Normalization note written into every snapshot.
pub const NORMALIZATION_NOTE: &str =
    "coeffs scaled so ||exp(ik.x)||_0 = 1; H^s weight (1+|k|^2)^s; FFT index order";

pub fn write_snapshot<W: Write>(mut w: W, field: &FourierField, t: f64) -> Result<()> {
    let grid = field.grid();
    let note = NORMALIZATION_NOTE.as_bytes();
    w.write_all(MAGIC)?;
    w.write_all(&[grid.dim() as u8])?;
    w.write_all(&(grid.n() as u32).to_le_bytes())?;
    w.write_all(&[field.components() as u8])?;
    w.write_all(&[u8::from(field.is_real())])?;
    w.write_all(&t.to_le_bytes())?;
    w.write_all(&(note.len() as u16).to_le_bytes())?;
    w.write_all(note)?;
    let mut buf = Vec::with_capacity(field.coeffs().len() * 16);
    for c in field.coeffs() {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads a snapshot back; returns the field and its time stamp.
pub fn read_snapshot<R: Read>(mut r: R) -> Result<(FourierField, f64)> {
    let mut head = [0u8; 22];
    r.read_exact(&mut head)?;
    if &head[..5] != MAGIC {
        return Err(ElaxError::Config("not an ELAX1 snapshot".into()));
    }
    let dim = head[5] as usize;
    let n = u32::from_le_bytes(head[6..10].try_into().expect("4 bytes")) as usize;
    let components = head[10] as usize;
    let real = head[11] & 1 == 1;
    let t = f64::from_le_bytes(head[12..20].try_into().expect("8 bytes"));
    let note_len = u16::from_le_bytes(head[20..22].try_into().expect("2 bytes")) as usize;
    let mut note = vec![0u8; note_len];
    r.read_exact(&mut note)?;
    let grid = GridSpec::new(dim, n)?;
    let count = components * grid.len();
    let mut raw = vec![0u8; count * 16];
    r.read_exact(&mut raw)?;
    let coeffs = raw
        .chunks_exact(16)
        .map(|b| {
            Complex64::new(
                f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
                f64::from_le_bytes(b[8..].try_into().expect("8 bytes")),
            )
        })
        .collect();
    Ok((FourierField::from_coeffs(grid, components, real, coeffs)?, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_header_bytes() {
        let g = GridSpec::d2(8).unwrap();
        let f = FourierField::from_real_fn(g, |x| x[0].cos() + 0.5 * x[1].sin());
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &f, 0.25).unwrap();
        assert_eq!(&bytes[..5], b"ELAX1");
        assert_eq!(bytes[5], 2);
        assert_eq!(&bytes[6..10], &8u32.to_le_bytes());
        assert_eq!(bytes[10], 1);
        assert_eq!(bytes[11], 1);
        let note_len = NORMALIZATION_NOTE.len();
        assert_eq!(bytes.len(), 22 + note_len + 64 * 16);
        // coefficient of k = (1, 0) sits at flat index 8
        let off = 22 + note_len + 8 * 16;
        let re = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        assert!((re - 0.5).abs() < 1e-15);
        let (back, t) = read_snapshot(bytes.as_slice()).unwrap();
        assert_eq!(t, 0.25);
        assert_eq!(back, f);
    }

    #[test]
    fn rejects_bad_magic() {
        let bytes = vec![0u8; 64];
        assert!(read_snapshot(bytes.as_slice()).is_err());
    }
}

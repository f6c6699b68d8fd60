//! Multi-dimensional complex FFTs on square/cubic grids.
//!
//! Coefficients are normalized so that the forward transform of e^{ik·x}
//! has a single unit coefficient at k (probability-measure convention).

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::GridSpec;
use crate::par::par_chunks;

/// Forward and inverse 1D plans for one axis length. Immutable and shared.
pub struct AxisPlan {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl AxisPlan {
    pub fn n(&self) -> usize {
        self.n
    }
}

fn plan_cache() -> &'static Mutex<HashMap<usize, Arc<AxisPlan>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<AxisPlan>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Shared plan for axis length `n`, built on first use.
pub fn axis_plan(n: usize) -> Arc<AxisPlan> {
    let mut cache = plan_cache().lock().expect("fft plan cache poisoned");
    cache
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::<f64>::new();
            Arc::new(AxisPlan {
                n,
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Inverse,
}

/// Rows handed to one task; keeps per-task scratch allocation amortized.
const ROWS_PER_TASK: usize = 16;

fn rows(data: &mut [Complex64], plan: &AxisPlan, dir: Direction) {
    let n = plan.n;
    let fft = match dir {
        Direction::Forward => &plan.forward,
        Direction::Inverse => &plan.inverse,
    };
    par_chunks(data, n * ROWS_PER_TASK, |chunk| {
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(chunk, &mut scratch);
    });
}

/// Out-of-place transpose of a `rows × cols` row-major matrix.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows_: usize, cols: usize) {
    const B: usize = 32;
    for rb in (0..rows_).step_by(B) {
        for cb in (0..cols).step_by(B) {
            for r in rb..(rb + B).min(rows_) {
                for c in cb..(cb + B).min(cols) {
                    dst[c * rows_ + r] = src[r * cols + c];
                }
            }
        }
    }
}

fn transform(data: &mut [Complex64], grid: &GridSpec, dir: Direction) {
    let n = grid.n();
    debug_assert_eq!(data.len(), grid.len());
    let plan = axis_plan(n);
    thread_local! {
        static SCRATCH: std::cell::RefCell<Vec<Complex64>> = const { std::cell::RefCell::new(Vec::new()) };
    }
    // A nested transform on the same worker (rayon work stealing) finds the
    // buffer borrowed and falls back to a fresh allocation.
    SCRATCH.with(|cell| match cell.try_borrow_mut() {
        Ok(mut scratch) => {
            scratch.resize(data.len(), Complex64::new(0.0, 0.0));
            transform_with(data, grid, &plan, dir, &mut scratch);
        }
        Err(_) => {
            let mut scratch = vec![Complex64::new(0.0, 0.0); data.len()];
            transform_with(data, grid, &plan, dir, &mut scratch);
        }
    });
    if dir == Direction::Forward {
        let scale = 1.0 / grid.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
    }
}

fn transform_with(data: &mut [Complex64], grid: &GridSpec, plan: &AxisPlan, dir: Direction, scratch: &mut [Complex64]) {
    let n = grid.n();
    // Last axis is contiguous.
    rows(data, plan, dir);
    if grid.dim() == 2 {
        transpose(data, scratch, n, n);
        rows(scratch, plan, dir);
        transpose(scratch, data, n, n);
    } else {
        let slab = n * n;
        // Middle axis: transpose each (y, z) slab.
        for s in 0..n {
            let src = &mut data[s * slab..(s + 1) * slab];
            let tmp = &mut scratch[s * slab..(s + 1) * slab];
            transpose(src, tmp, n, n);
        }
        rows(scratch, plan, dir);
        for s in 0..n {
            let dst = &mut data[s * slab..(s + 1) * slab];
            let tmp = &scratch[s * slab..(s + 1) * slab];
            transpose(tmp, dst, n, n);
        }
        // First axis: view as n × n² and transpose.
        transpose(data, scratch, n, slab);
        rows(scratch, plan, dir);
        transpose(scratch, data, slab, n);
    }
}

/// Physical samples → normalized spectral coefficients, in place.
pub fn forward(data: &mut [Complex64], grid: &GridSpec) {
    transform(data, grid, Direction::Forward);
}

/// Normalized spectral coefficients → physical samples, in place.
pub fn inverse(data: &mut [Complex64], grid: &GridSpec) {
    transform(data, grid, Direction::Inverse);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_dft(phys: &[Complex64], grid: &GridSpec) -> Vec<Complex64> {
        let len = grid.len();
        (0..len)
            .map(|kf| {
                let k = grid.wavevector(kf);
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, v) in phys.iter().enumerate() {
                    let x = grid.point(j);
                    let phase = -(k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2]);
                    acc += v * Complex64::from_polar(1.0, phase);
                }
                acc / len as f64
            })
            .collect()
    }

    #[test]
    fn matches_direct_sum_2d_and_3d() {
        for grid in [GridSpec::d2(8).unwrap(), GridSpec::d3(8).unwrap()] {
            let phys: Vec<Complex64> = (0..grid.len())
                .map(|j| Complex64::new((j as f64 * 0.37).sin(), (j as f64 * 0.11).cos()))
                .collect();
            let expected = direct_dft(&phys, &grid);
            let mut data = phys.clone();
            forward(&mut data, &grid);
            for (a, b) in data.iter().zip(&expected) {
                assert!((a - b).norm() < 1e-13);
            }
            inverse(&mut data, &grid);
            for (a, b) in data.iter().zip(&phys) {
                assert!((a - b).norm() < 1e-13);
            }
        }
    }
}

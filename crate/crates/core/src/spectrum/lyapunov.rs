//! Stagnation points and finite-time Lyapunov exponents of the flow
//! generated by (Ω_y, −Ω_x) for a frozen Ω.

use crate::error::{ElaxError, Result};
use crate::spectral::FourierField;
use crate::Complex64;

use std::f64::consts::TAU;

/// Grid used to seed the stagnation-point search, per axis.
pub const SCAN_RESOLUTION: usize = 64;
/// Newton stops once |F| falls below this.
pub const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 60;
/// Points closer than this (modulo 2π) are merged.
const MERGE_DISTANCE: f64 = 1e-6;
/// |det J| below this marks a degenerate (nilpotent or zero) Jacobian.
const DEGENERATE_DET: f64 = 1e-10;

/// Ω and its derivatives at a point.
#[derive(Clone, Copy, Debug, Default)]
pub struct Jet {
    pub w: f64,
    pub wx: f64,
    pub wy: f64,
    pub wxx: f64,
    pub wxy: f64,
    pub wyy: f64,
}

impl Jet {
    /// The advecting field (Ω_y, −Ω_x).
    pub fn velocity(&self) -> [f64; 2] {
        [self.wy, -self.wx]
    }

    /// [[Ω_xy, Ω_yy], [−Ω_xx, −Ω_xy]]
    pub fn jacobian(&self) -> [[f64; 2]; 2] {
        [[self.wxy, self.wyy], [-self.wxx, -self.wxy]]
    }
}

/// Direct Fourier summation of a truncated field at arbitrary points.
#[derive(Clone, Debug)]
pub struct PointEvaluator {
    modes: Vec<(f64, f64, Complex64)>,
}

impl PointEvaluator {
    pub fn new(omega: &FourierField) -> Result<Self> {
        if omega.grid().dim() != 2 || omega.components() != 1 {
            return Err(ElaxError::Usage("point evaluation needs a 2D scalar field".into()));
        }
        let grid = *omega.grid();
        let modes = omega
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() != 0.0)
            .map(|(j, &c)| {
                let k = grid.wavevector(j);
                (k[0] as f64, k[1] as f64, c)
            })
            .collect();
        Ok(Self { modes })
    }

    pub fn jet(&self, x: [f64; 2]) -> Jet {
        let mut j = Jet::default();
        for &(kx, ky, c) in &self.modes {
            let e = c * Complex64::from_polar(1.0, kx * x[0] + ky * x[1]);
            // d/dx → i kx
            let ie = Complex64::new(-e.im, e.re);
            j.w += e.re;
            j.wx += kx * ie.re;
            j.wy += ky * ie.re;
            j.wxx -= kx * kx * e.re;
            j.wxy -= kx * ky * e.re;
            j.wyy -= ky * ky * e.re;
        }
        j
    }

    pub fn velocity(&self, x: [f64; 2]) -> [f64; 2] {
        self.jet(x).velocity()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StagnationKind {
    Saddle,
    Center,
    Degenerate,
}

#[derive(Clone, Debug)]
pub struct StagnationPoint {
    pub position: [f64; 2],
    pub jacobian: [[f64; 2]; 2],
    /// Eigenvalues ±√(−det J) of the trace-free Jacobian.
    pub eigenvalues: [Complex64; 2],
    pub kind: StagnationKind,
}

#[derive(Clone, Debug, Default)]
pub struct StagnationReport {
    pub points: Vec<StagnationPoint>,
    /// Scan minima where Newton did not reach the tolerance.
    pub unresolved: Vec<[f64; 2]>,
    /// The advecting field vanishes on the whole scan grid.
    pub everywhere: bool,
}

fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if TAU - y < 1e-13 {
        0.0
    } else {
        y
    }
}

fn periodic_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = |u: f64, v: f64| {
        let t = (u - v).rem_euclid(TAU);
        t.min(TAU - t)
    };
    d(a[0], b[0]).hypot(d(a[1], b[1]))
}

fn classify(jac: [[f64; 2]; 2], scale: f64) -> ([Complex64; 2], StagnationKind) {
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    let root = Complex64::new(-det, 0.0).sqrt();
    let kind = if det.abs() <= DEGENERATE_DET * scale.max(1.0) {
        StagnationKind::Degenerate
    } else if det < 0.0 {
        StagnationKind::Saddle
    } else {
        StagnationKind::Center
    };
    ([root, -root], kind)
}

/// Newton with a pseudo-inverse step, so that lines of stagnation points
/// (singular Jacobian) are approached along their normal.
fn newton(ev: &PointEvaluator, mut x: [f64; 2]) -> Option<[f64; 2]> {
    for _ in 0..NEWTON_MAX_ITER {
        let jet = ev.jet(x);
        let f = jet.velocity();
        if f[0].hypot(f[1]) <= NEWTON_TOL {
            return Some([wrap(x[0]), wrap(x[1])]);
        }
        let j = jet.jacobian();
        let step = pinv_solve(j, f);
        x = [x[0] - step[0], x[1] - step[1]];
    }
    let f = ev.velocity(x);
    (f[0].hypot(f[1]) <= NEWTON_TOL).then(|| [wrap(x[0]), wrap(x[1])])
}

/// Minimum-norm least-squares solution of J s = f for a 2×2 J.
fn pinv_solve(j: [[f64; 2]; 2], f: [f64; 2]) -> [f64; 2] {
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let norm2 = j.iter().flatten().map(|v| v * v).sum::<f64>();
    if norm2 == 0.0 {
        return [0.0, 0.0];
    }
    if det.abs() > 1e-12 * norm2 {
        return [(j[1][1] * f[0] - j[0][1] * f[1]) / det, (j[0][0] * f[1] - j[1][0] * f[0]) / det];
    }
    // rank one: J = σ u vᵀ, J⁺ = Jᵀ / ‖J‖_F²
    let jt_f = [j[0][0] * f[0] + j[1][0] * f[1], j[0][1] * f[0] + j[1][1] * f[1]];
    [jt_f[0] / norm2, jt_f[1] / norm2]
}

/// Scans a 64×64 grid for local minima of |F|, refines them with Newton to
/// |F| ≤ 1e−12 and classifies each distinct zero by its Jacobian.
pub fn stagnation_analysis(omega: &FourierField) -> Result<StagnationReport> {
    let ev = PointEvaluator::new(omega)?;
    let n = SCAN_RESOLUTION;
    let h = TAU / n as f64;
    let speed: Vec<f64> = (0..n * n)
        .map(|p| {
            let f = ev.velocity([(p / n) as f64 * h, (p % n) as f64 * h]);
            f[0].hypot(f[1])
        })
        .collect();
    let mut report = StagnationReport::default();
    let top = speed.iter().cloned().fold(0.0, f64::max);
    if top <= NEWTON_TOL {
        report.everywhere = true;
        return Ok(report);
    }
    let scale = ev.modes.iter().map(|m| m.2.norm() * (m.0 * m.0 + m.1 * m.1)).sum::<f64>();
    for i in 0..n {
        for j in 0..n {
            let v = speed[i * n + j];
            let is_min = (-1i64..=1).all(|di| {
                (-1i64..=1).all(|dj| {
                    let a = (i as i64 + di).rem_euclid(n as i64) as usize;
                    let b = (j as i64 + dj).rem_euclid(n as i64) as usize;
                    speed[a * n + b] >= v
                })
            });
            if !is_min {
                continue;
            }
            let seed = [i as f64 * h, j as f64 * h];
            match newton(&ev, seed) {
                Some(x) => {
                    if report.points.iter().all(|p| periodic_distance(p.position, x) > MERGE_DISTANCE) {
                        let jac = ev.jet(x).jacobian();
                        let (eigenvalues, kind) = classify(jac, scale);
                        report.points.push(StagnationPoint { position: x, jacobian: jac, eigenvalues, kind });
                    }
                }
                None => report.unresolved.push(seed),
            }
        }
    }
    report.points.sort_by(|a, b| a.position[0].total_cmp(&b.position[0]).then(a.position[1].total_cmp(&b.position[1])));
    Ok(report)
}

/// Settings for [`lyapunov_qr`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovSettings {
    pub horizon: f64,
    pub dt: f64,
    /// Time between QR renormalizations.
    pub renorm_interval: f64,
    /// Initial stretch excluded from the averages; `None` means horizon/10.
    pub warmup: Option<f64>,
}

impl LyapunovSettings {
    pub fn new(horizon: f64) -> Self {
        Self { horizon, dt: 1e-3, renorm_interval: 0.5, warmup: None }
    }
}

#[derive(Clone, Debug)]
pub struct LyapunovRun {
    pub x0: [f64; 2],
    pub horizon: f64,
    pub warmup: f64,
    /// Finite-time exponents, largest first.
    pub exponents: [f64; 2],
    /// (t, λ₁(t), λ₂(t)) at every renormalization after the warmup.
    pub history: Vec<(f64, f64, f64)>,
    /// dλ_i / d log₁₀ t fitted over the last decade of the history.
    pub last_decade_slope: [f64; 2],
    /// The start point is a resolved stagnation point and was held fixed.
    pub stationary: bool,
    pub warning: Option<String>,
}

fn rhs(ev: &PointEvaluator, x: [f64; 2], y: &[[f64; 2]; 2], frozen: bool) -> ([f64; 2], [[f64; 2]; 2]) {
    let jet = ev.jet(x);
    let j = jet.jacobian();
    let dy = [
        [j[0][0] * y[0][0] + j[0][1] * y[1][0], j[0][0] * y[0][1] + j[0][1] * y[1][1]],
        [j[1][0] * y[0][0] + j[1][1] * y[1][0], j[1][0] * y[0][1] + j[1][1] * y[1][1]],
    ];
    let f = if frozen { [0.0, 0.0] } else { jet.velocity() };
    (f, dy)
}

fn rk4(ev: &PointEvaluator, x: [f64; 2], y: [[f64; 2]; 2], dt: f64, frozen: bool) -> ([f64; 2], [[f64; 2]; 2]) {
    let add = |x: [f64; 2], y: [[f64; 2]; 2], k: &([f64; 2], [[f64; 2]; 2]), a: f64| {
        (
            [x[0] + a * k.0[0], x[1] + a * k.0[1]],
            [[y[0][0] + a * k.1[0][0], y[0][1] + a * k.1[0][1]], [y[1][0] + a * k.1[1][0], y[1][1] + a * k.1[1][1]]],
        )
    };
    let k1 = rhs(ev, x, &y, frozen);
    let s = add(x, y, &k1, 0.5 * dt);
    let k2 = rhs(ev, s.0, &s.1, frozen);
    let s = add(x, y, &k2, 0.5 * dt);
    let k3 = rhs(ev, s.0, &s.1, frozen);
    let s = add(x, y, &k3, dt);
    let k4 = rhs(ev, s.0, &s.1, frozen);
    let mut out = (x, y);
    for (k, w) in [(&k1, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)] {
        out = add(out.0, out.1, k, w * dt / 6.0);
    }
    out
}

/// Gram–Schmidt on the columns of y; returns Q and the logs of diag R.
fn qr(y: [[f64; 2]; 2]) -> ([[f64; 2]; 2], [f64; 2]) {
    let c0 = [y[0][0], y[1][0]];
    let c1 = [y[0][1], y[1][1]];
    let r00 = c0[0].hypot(c0[1]);
    let q0 = [c0[0] / r00, c0[1] / r00];
    let r01 = q0[0] * c1[0] + q0[1] * c1[1];
    let w = [c1[0] - r01 * q0[0], c1[1] - r01 * q0[1]];
    let r11 = w[0].hypot(w[1]);
    let q1 = [w[0] / r11, w[1] / r11];
    ([[q0[0], q1[0]], [q0[1], q1[1]]], [r00.ln(), r11.ln()])
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return 0.0;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let sxy = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Finite-time Lyapunov exponents by RK4 on the trajectory and its tangent
/// dynamics, with QR renormalization every `renorm_interval`.
///
/// A start point that is already a resolved stagnation point is its own
/// trajectory and is held fixed; integrating it would let rounding push it
/// onto the unstable manifold.
pub fn lyapunov_qr(omega: &FourierField, x0: [f64; 2], settings: LyapunovSettings) -> Result<LyapunovRun> {
    let LyapunovSettings { horizon, dt, renorm_interval, warmup } = settings;
    if !(horizon > 0.0) || !(dt > 0.0) || !(renorm_interval >= dt) {
        return Err(ElaxError::Config("lyapunov_qr needs horizon > 0 and renorm_interval ≥ dt > 0".into()));
    }
    let warmup = warmup.unwrap_or(horizon / 10.0);
    if !(warmup >= 0.0 && warmup < horizon) {
        return Err(ElaxError::Config("warmup must lie in [0, horizon)".into()));
    }
    let ev = PointEvaluator::new(omega)?;
    let f0 = ev.velocity(x0);
    let stationary = f0[0].hypot(f0[1]) <= NEWTON_TOL;
    let per_block = ((renorm_interval / dt).round() as usize).max(1);
    let dt = renorm_interval / per_block as f64;
    let blocks = (horizon / renorm_interval).round() as usize;
    let warm_blocks = (warmup / renorm_interval).round() as usize;

    let mut x = x0;
    let mut y = [[1.0, 0.0], [0.0, 1.0]];
    let mut sums = [0.0, 0.0];
    let mut history = Vec::new();
    let mut worst_err = 0.0f64;
    for b in 1..=blocks {
        for step in 0..per_block {
            let (nx, ny) = rk4(&ev, x, y, dt, stationary);
            if step == 0 && !stationary {
                // step-doubling estimate of the local position error
                let half = rk4(&ev, x, y, 0.5 * dt, false);
                let two = rk4(&ev, half.0, half.1, 0.5 * dt, false);
                worst_err = worst_err.max((two.0[0] - nx[0]).hypot(two.0[1] - nx[1]));
            }
            x = nx;
            y = ny;
        }
        let (q, logs) = qr(y);
        y = q;
        if b > warm_blocks {
            sums[0] += logs[0];
            sums[1] += logs[1];
            let t = b as f64 * renorm_interval;
            let span = t - warm_blocks as f64 * renorm_interval;
            history.push((t, sums[0] / span, sums[1] / span));
        }
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(ElaxError::BlowUp { t: horizon, reason: "trajectory is not finite".into() });
    }
    let last = history.last().copied().unwrap_or((horizon, 0.0, 0.0));
    let decade: Vec<(f64, f64, f64)> = history.iter().copied().filter(|h| h.0 >= last.0 / 10.0).collect();
    let fit = |i: usize| slope(&decade.iter().map(|h| (h.0.log10(), if i == 0 { h.1 } else { h.2 })).collect::<Vec<_>>());
    let mut exponents = [last.1, last.2];
    if exponents[1] > exponents[0] {
        exponents.swap(0, 1);
    }
    let warning = (worst_err > 1e-8).then(|| format!("trajectory local error reached {worst_err:e}; reduce dt"));
    Ok(LyapunovRun {
        x0,
        horizon,
        warmup: warm_blocks as f64 * renorm_interval,
        exponents,
        history,
        last_decade_slope: [fit(0), fit(1)],
        stationary,
        warning,
    })
}

//! 2D incompressible Euler in vorticity form, ∂_tΩ + {Ψ, Ω} = 0, ΔΨ = Ω.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::csv::Table;
use crate::error::{ElaxError, Result};
use crate::par::par_map;
use crate::spectral::{derivative, solve_poisson, FourierField, GridSpec};

/// Runs are stopped once enstrophy exceeds this multiple of its initial value.
pub const ENSTROPHY_CEILING: f64 = 1e6;

/// Vorticity and its stream function at one instant.
#[derive(Clone, Debug)]
pub struct FlowState2D {
    pub t: f64,
    omega: FourierField,
    psi: FourierField,
}

impl FlowState2D {
    /// Builds a state from vorticity; the mean is gauged to zero and Ψ derived.
    pub fn new(mut omega: FourierField, t: f64) -> Result<Self> {
        if omega.grid().dim() != 2 || omega.components() != 1 {
            return Err(ElaxError::Usage("2D flow state needs a scalar field on a 2D grid".into()));
        }
        omega.coeffs_mut()[0] = Complex64::new(0.0, 0.0);
        let psi = solve_poisson(&omega);
        Ok(Self { t, omega, psi })
    }

    pub fn omega(&self) -> &FourierField {
        &self.omega
    }

    pub fn psi(&self) -> &FourierField {
        &self.psi
    }

    pub fn grid(&self) -> &GridSpec {
        self.omega.grid()
    }

    /// ‖∇Ψ‖_0².
    pub fn energy(&self) -> f64 {
        let grid = self.grid();
        self.psi
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| grid.k_squared(i) * c.norm_sqr())
            .sum()
    }

    /// ‖Ω‖_0².
    pub fn enstrophy(&self) -> f64 {
        self.omega.l2_norm().powi(2)
    }

    /// Velocity (u, v) = (−∂_yΨ, ∂_xΨ) as physical samples.
    pub fn velocity(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        let u = derivative(&self.psi, 1).expect("2D").scaled(-1.0).to_physical();
        let v = derivative(&self.psi, 0).expect("2D").to_physical();
        (u, v)
    }

    pub fn max_speed(&self) -> f64 {
        let (u, v) = self.velocity();
        u.iter().zip(&v).map(|(a, b)| (a.re * a.re + b.re * b.re).sqrt()).fold(0.0, f64::max)
    }

    /// Largest step satisfying dt ≤ 0.5 / (n · max|u|).
    pub fn cfl_dt(&self) -> f64 {
        0.5 / (self.grid().n() as f64 * self.max_speed().max(1e-12))
    }
}

/// Named initial vorticity fields.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition2D {
    /// amplitude · cos y (steady).
    Shear { amplitude: f64 },
    /// amplitude · (cos x + cos y) (steady).
    Cellular { amplitude: f64 },
    /// Gaussian-spectrum noise, coefficients ∝ e^{−|k|²/κ²}, scaled to ‖Ω‖_0 = amplitude.
    RandomSmooth { amplitude: f64, kappa: f64, seed: u64 },
}

impl InitialCondition2D {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Shear { .. } => "shear",
            Self::Cellular { .. } => "cellular",
            Self::RandomSmooth { .. } => "random_smooth",
        }
    }

    pub fn vorticity(&self, grid: GridSpec) -> Result<FourierField> {
        if grid.dim() != 2 {
            return Err(ElaxError::Usage("2D initial condition on a non-2D grid".into()));
        }
        Ok(match *self {
            Self::Shear { amplitude } => FourierField::from_real_fn(grid, |x| amplitude * x[1].cos()),
            Self::Cellular { amplitude } => {
                FourierField::from_real_fn(grid, |x| amplitude * (x[0].cos() + x[1].cos()))
            }
            Self::RandomSmooth { amplitude, kappa, seed } => random_smooth(grid, amplitude, kappa, seed),
        })
    }

    pub fn state(&self, grid: GridSpec) -> Result<FlowState2D> {
        FlowState2D::new(self.vorticity(grid)?, 0.0)
    }
}

/// Seeded smooth random real field with zero mean, dealiased, ‖·‖_0 = amplitude.
/// Draws two standard normals per grid index in storage order from ChaCha8.
pub fn random_smooth(grid: GridSpec, amplitude: f64, kappa: f64, seed: u64) -> FourierField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = FourierField::scalar(grid, true);
    let len = grid.len();
    for i in 0..len {
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        let k2 = grid.k_squared(i);
        f.coeffs_mut()[i] = Complex64::new(a, b) * (-k2 / (kappa * kappa)).exp();
    }
    f.coeffs_mut()[0] = Complex64::new(0.0, 0.0);
    f.dealias();
    f.symmetrize_real();
    let norm = f.l2_norm();
    if norm > 0.0 {
        f = f.scaled(amplitude / norm);
    }
    f
}

fn check_scalar_pair(f: &FourierField, g: &FourierField) -> Result<()> {
    f.check_same_shape(g, "poisson bracket")?;
    if f.components() != 1 || f.grid().dim() != 2 {
        return Err(ElaxError::Usage("poisson bracket needs 2D scalar fields".into()));
    }
    Ok(())
}

/// {f, g} = ∂_x f ∂_y g − ∂_y f ∂_x g, products in physical space, dealiased.
pub fn poisson_bracket(f: &FourierField, g: &FourierField) -> Result<FourierField> {
    check_scalar_pair(f, g)?;
    Ok(Advector2D::new(f).bracket(g))
}

/// Physical samples of (∂_x f, ∂_y f). Real fields share one inverse
/// transform: the spectra are packed as ∂_x f + i ∂_y f.
fn gradient_samples(f: &FourierField) -> (Vec<Complex64>, Vec<Complex64>) {
    let fx = derivative(f, 0).expect("2D");
    let fy = derivative(f, 1).expect("2D");
    if f.is_real() {
        let mut packed = fx;
        packed.axpy_complex(Complex64::new(0.0, 1.0), &fy);
        let phys = packed.to_physical();
        let re = phys.iter().map(|z| Complex64::new(z.re, 0.0)).collect();
        let im = phys.iter().map(|z| Complex64::new(z.im, 0.0)).collect();
        (re, im)
    } else {
        (fx.to_physical(), fy.to_physical())
    }
}

/// Physical-space gradient of a fixed scalar `h`, so that {h, ·} can be
/// applied to many fields with few transforms each.
pub struct Advector2D {
    grid: GridSpec,
    real: bool,
    hx: Vec<Complex64>,
    hy: Vec<Complex64>,
}

impl Advector2D {
    pub fn new(h: &FourierField) -> Self {
        let (hx, hy) = gradient_samples(h);
        Self { grid: *h.grid(), real: h.is_real(), hx, hy }
    }

    /// {h, φ}, dealiased.
    pub fn bracket(&self, phi: &FourierField) -> FourierField {
        debug_assert_eq!(*phi.grid(), self.grid);
        let (px, py) = gradient_samples(phi);
        let real = self.real && phi.is_real();
        let prod: Vec<Complex64> = if real {
            (0..self.grid.len())
                .map(|j| Complex64::new(self.hx[j].re * py[j].re - self.hy[j].re * px[j].re, 0.0))
                .collect()
        } else {
            (0..self.grid.len()).map(|j| self.hx[j] * py[j] - self.hy[j] * px[j]).collect()
        };
        let mut out = FourierField::from_physical(self.grid, 1, real, prod).expect("length");
        out.dealias();
        out
    }
}

/// −{Ψ, Ω}.
pub fn rhs_euler2d(state: &FlowState2D) -> FourierField {
    Advector2D::new(&state.psi).bracket(&state.omega).scaled(-1.0)
}

fn stage(omega: &FourierField, passengers: &[FourierField]) -> (FourierField, Vec<FourierField>) {
    let psi = solve_poisson(omega);
    let adv = Advector2D::new(&psi);
    let k_omega = adv.bracket(omega).scaled(-1.0);
    let k_pass = par_map(passengers, |p| adv.bracket(p).scaled(-1.0));
    (k_omega, k_pass)
}

fn combine(base: &FourierField, k: &FourierField, a: f64) -> FourierField {
    let mut out = base.clone();
    out.axpy(a, k);
    out
}

fn combine_all(base: &[FourierField], k: &[FourierField], a: f64) -> Vec<FourierField> {
    base.iter().zip(k).map(|(b, k)| combine(b, k, a)).collect()
}

/// One classical RK4 step of Ω together with fields transported by the same
/// stream function, ∂_tφ = −{Ψ, φ}, evaluated with the per-stage Ψ.
pub fn step_coupled(
    state: &FlowState2D,
    passengers: &[FourierField],
    dt: f64,
) -> Result<(FlowState2D, Vec<FourierField>)> {
    if !(dt > 0.0) {
        return Err(ElaxError::Config(format!("time step must be positive, got {dt}")));
    }
    for p in passengers {
        if p.grid() != state.grid() || p.components() != 1 {
            return Err(ElaxError::Usage("transported field must be a scalar on the flow grid".into()));
        }
    }
    let w0 = &state.omega;
    let (k1, p1) = stage(w0, passengers);
    let (k2, p2) = stage(&combine(w0, &k1, 0.5 * dt), &combine_all(passengers, &p1, 0.5 * dt));
    let (k3, p3) = stage(&combine(w0, &k2, 0.5 * dt), &combine_all(passengers, &p2, 0.5 * dt));
    let (k4, p4) = stage(&combine(w0, &k3, dt), &combine_all(passengers, &p3, dt));

    let mut omega = w0.clone();
    omega.axpy(dt / 6.0, &k1);
    omega.axpy(dt / 3.0, &k2);
    omega.axpy(dt / 3.0, &k3);
    omega.axpy(dt / 6.0, &k4);
    let t = state.t + dt;
    let mut out = Vec::with_capacity(passengers.len());
    for (j, p) in passengers.iter().enumerate() {
        let mut q = p.clone();
        q.axpy(dt / 6.0, &p1[j]);
        q.axpy(dt / 3.0, &p2[j]);
        q.axpy(dt / 3.0, &p3[j]);
        q.axpy(dt / 6.0, &p4[j]);
        if !q.is_finite() {
            return Err(ElaxError::BlowUp { t, reason: format!("transported field {j} is not finite") });
        }
        out.push(q);
    }
    if !omega.is_finite() {
        return Err(ElaxError::BlowUp { t, reason: "vorticity is not finite".into() });
    }
    Ok((FlowState2D::new(omega, t)?, out))
}

/// One RK4 step of the Euler equation alone.
pub fn step_rk4(state: &FlowState2D, dt: f64) -> Result<FlowState2D> {
    step_coupled(state, &[], dt).map(|(s, _)| s)
}

/// Something recorded alongside a 2D run. Observers may ask for fields to be
/// transported in lockstep with Ω; the runner advances them inside the same
/// RK4 stages and hands them back before each observation.
pub trait Observer2D {
    fn columns(&self) -> Vec<String>;

    fn transported(&self) -> Vec<FourierField> {
        Vec::new()
    }

    fn set_transported(&mut self, _fields: Vec<FourierField>) {}

    fn observe(&mut self, state: &FlowState2D) -> Result<Vec<f64>>;
}

/// Time-stepping controls shared by the 2D and 3D runners.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunControl {
    pub dt: f64,
    pub t_end: f64,
    /// Spacing of time-series rows; `None` records every step.
    pub output_interval: Option<f64>,
    /// Spacing of stored snapshots; `None` keeps initial and final only.
    pub snapshot_interval: Option<f64>,
}

impl RunControl {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self { dt, t_end, output_interval: None, snapshot_interval: None }
    }

    pub fn with_output(mut self, every: f64) -> Self {
        self.output_interval = Some(every);
        self
    }

    pub fn with_snapshots(mut self, every: f64) -> Self {
        self.snapshot_interval = Some(every);
        self
    }

    /// Step count and the step actually used, so that the final time is hit exactly.
    pub fn schedule(&self) -> Result<(usize, f64)> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(ElaxError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(ElaxError::Config(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        let steps = (self.t_end / self.dt).round() as usize;
        let steps = if steps == 0 && self.t_end > 0.0 { 1 } else { steps };
        let dt = if steps == 0 { self.dt } else { self.t_end / steps as f64 };
        Ok((steps, dt))
    }

    pub(crate) fn every(interval: Option<f64>, dt: f64) -> usize {
        interval.map(|iv| ((iv / dt).round() as usize).max(1)).unwrap_or(1)
    }
}

/// Output of a run: time series, stored snapshots, and the final state.
pub struct Simulation2D {
    pub series: Table,
    pub snapshots: Vec<(f64, FourierField)>,
    pub final_state: FlowState2D,
}

/// Integrates from `initial` to `control.t_end`, recording t, energy,
/// enstrophy and every observer's columns.
pub fn run_simulation2d(
    initial: FlowState2D,
    control: RunControl,
    observers: &mut [&mut dyn Observer2D],
) -> Result<Simulation2D> {
    let (steps, dt) = control.schedule()?;
    let out_every = RunControl::every(control.output_interval, dt);
    let snap_every = control.snapshot_interval.map(|iv| RunControl::every(Some(iv), dt));

    let mut columns = vec!["t".to_string(), "energy".into(), "enstrophy".into()];
    for o in observers.iter() {
        columns.extend(o.columns());
    }
    let mut series = Table::new(columns);
    let mut snapshots = vec![(initial.t, initial.omega.clone())];
    let z0 = initial.enstrophy();
    let ceiling = ENSTROPHY_CEILING * z0.max(f64::MIN_POSITIVE);

    let record = |state: &FlowState2D, series: &mut Table, observers: &mut [&mut dyn Observer2D]| -> Result<()> {
        let mut row = vec![state.t, state.energy(), state.enstrophy()];
        for o in observers.iter_mut() {
            row.extend(o.observe(state)?);
        }
        series.push(row);
        Ok(())
    };

    let t0 = initial.t;
    let mut state = initial;
    record(&state, &mut series, observers)?;
    for step in 1..=steps {
        let mut counts = Vec::with_capacity(observers.len());
        let mut passengers = Vec::new();
        for o in observers.iter() {
            let fields = o.transported();
            counts.push(fields.len());
            passengers.extend(fields);
        }
        let (next, mut moved) = step_coupled(&state, &passengers, dt)?;
        for (o, count) in observers.iter_mut().zip(counts).rev() {
            let tail = moved.split_off(moved.len() - count);
            o.set_transported(tail);
        }
        state = next;
        // stamp from the step count so the final time is exactly t_end
        state.t = if step == steps { t0 + control.t_end } else { t0 + step as f64 * dt };
        if state.enstrophy() > ceiling {
            return Err(ElaxError::BlowUp {
                t: state.t,
                reason: format!("enstrophy exceeded {ENSTROPHY_CEILING:e} times its initial value"),
            });
        }
        if step % out_every == 0 || step == steps {
            record(&state, &mut series, observers)?;
        }
        if let Some(every) = snap_every {
            if step % every == 0 && step != steps {
                snapshots.push((state.t, state.omega.clone()));
            }
        }
    }
    if steps > 0 {
        snapshots.push((state.t, state.omega.clone()));
    }
    Ok(Simulation2D { series, snapshots, final_state: state })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(n: usize) -> GridSpec {
        GridSpec::d2(n).unwrap()
    }

    #[test]
    fn bracket_examples() {
        let grid = g(32);
        let sx = FourierField::from_real_fn(grid, |x| x[0].sin());
        let sy = FourierField::from_real_fn(grid, |x| x[1].sin());
        let expected = FourierField::from_real_fn(grid, |x| x[0].cos() * x[1].cos());
        assert!(poisson_bracket(&sx, &sy).unwrap().sub(&expected).max_abs() < 1e-14);
        let r = random_smooth(grid, 1.0, 3.0, 5);
        assert!(poisson_bracket(&r, &r).unwrap().max_abs() < 1e-12);
        let cy = FourierField::from_real_fn(grid, |x| x[1].cos());
        assert!(poisson_bracket(&cy, &cy.clone().scaled(-1.0)).unwrap().max_abs() < 1e-15);
        assert!(poisson_bracket(&cy, &FourierField::scalar(g(16), true)).is_err());
    }

    #[test]
    fn steady_states_are_fixed_points() {
        for ic in [InitialCondition2D::Shear { amplitude: 1.0 }, InitialCondition2D::Cellular { amplitude: 1.0 }] {
            let s = ic.state(g(32)).unwrap();
            assert!(rhs_euler2d(&s).max_abs() < 1e-15, "{}", ic.name());
        }
    }

    #[test]
    fn random_smooth_is_deterministic_real_and_normalized() {
        let a = random_smooth(g(32), 2.0, 3.0, 11);
        let b = random_smooth(g(32), 2.0, 3.0, 11);
        assert_eq!(a, b);
        assert!(a.conjugate_symmetry_defect() < 1e-15);
        assert!((a.l2_norm() - 2.0).abs() < 1e-13);
        assert!(a.is_dealiased());
        assert_eq!(a.mean(0), Complex64::new(0.0, 0.0));
        assert_ne!(a, random_smooth(g(32), 2.0, 3.0, 12));
    }

    #[test]
    fn zero_field_stays_zero() {
        let s = FlowState2D::new(FourierField::scalar(g(16), true), 0.0).unwrap();
        let s = step_rk4(&s, 0.01).unwrap();
        assert_eq!(s.omega().max_abs(), 0.0);
    }

    #[test]
    fn nan_is_reported_as_blow_up() {
        let mut w = random_smooth(g(16), 1.0, 3.0, 1);
        w.coeffs_mut()[5] = Complex64::new(f64::NAN, 0.0);
        let s = FlowState2D::new(w, 0.3).unwrap();
        match step_rk4(&s, 0.01) {
            Err(ElaxError::BlowUp { t, .. }) => assert!((t - 0.31).abs() < 1e-12),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn t_end_zero_gives_initial_state_only() {
        let s = InitialCondition2D::Shear { amplitude: 1.0 }.state(g(16)).unwrap();
        let run = run_simulation2d(s, RunControl::new(1e-3, 0.0), &mut []).unwrap();
        assert_eq!(run.series.rows.len(), 1);
        assert_eq!(run.snapshots.len(), 1);
    }
}

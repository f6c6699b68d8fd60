//! 3D incompressible Euler in vorticity form,
//! ∂_tΩ + (u·∇)Ω − (Ω·∇)u = 0, with u recovered from Ω by Biot–Savart.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::csv::Table;
use crate::error::{ElaxError, Result};
use crate::euler2d::{RunControl, ENSTROPHY_CEILING};
use crate::par::par_map;
use crate::spectral::{curl, derivative, divergence, solenoidal_projection, FourierField, GridSpec};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Vorticity and the velocity it induces.
#[derive(Clone, Debug)]
pub struct FlowState3D {
    pub t: f64,
    omega: FourierField,
    u: FourierField,
}

impl FlowState3D {
    /// Projects Ω onto divergence-free fields, clears its mean and derives u.
    pub fn new(omega: FourierField, t: f64) -> Result<Self> {
        if omega.grid().dim() != 3 || omega.components() != 3 {
            return Err(ElaxError::Usage("3D flow state needs a vector field on a 3D grid".into()));
        }
        let mut omega = solenoidal_projection(&omega)?;
        for c in 0..3 {
            omega.component_coeffs_mut(c)[0] = ZERO;
        }
        let u = biot_savart(&omega)?;
        Ok(Self { t, omega, u })
    }

    /// State whose vorticity is the curl of the given velocity.
    pub fn from_velocity(u: &FourierField, t: f64) -> Result<Self> {
        Self::new(curl(u)?, t)
    }

    pub fn omega(&self) -> &FourierField {
        &self.omega
    }

    pub fn velocity(&self) -> &FourierField {
        &self.u
    }

    pub fn grid(&self) -> &GridSpec {
        self.omega.grid()
    }

    /// ‖u‖_0².
    pub fn energy(&self) -> f64 {
        self.u.l2_norm().powi(2)
    }

    /// ⟨u, Ω⟩ (real part of the normalized L² product).
    pub fn helicity(&self) -> f64 {
        self.u.inner(&self.omega).re
    }

    pub fn enstrophy(&self) -> f64 {
        self.omega.l2_norm().powi(2)
    }

    /// ‖∇·u‖_0 / ‖u‖_0 (0 for a zero field).
    pub fn divergence_defect_u(&self) -> f64 {
        relative_divergence(&self.u)
    }

    /// ‖∇·Ω‖_0 / ‖Ω‖_0 (0 for a zero field).
    pub fn divergence_defect_omega(&self) -> f64 {
        relative_divergence(&self.omega)
    }

    pub fn max_speed(&self) -> f64 {
        let phys = self.u.to_physical();
        let len = self.grid().len();
        (0..len)
            .map(|j| (phys[j].re.powi(2) + phys[len + j].re.powi(2) + phys[2 * len + j].re.powi(2)).sqrt())
            .fold(0.0, f64::max)
    }
}

fn relative_divergence(f: &FourierField) -> f64 {
    let norm = f.l2_norm();
    if norm == 0.0 {
        return 0.0;
    }
    divergence(f).expect("vector field").l2_norm() / norm
}

/// u(k) = i k × Ω(k) / |k|² after solenoidal projection of Ω; zero mean mode.
pub fn biot_savart(omega: &FourierField) -> Result<FourierField> {
    let grid = *omega.grid();
    if grid.dim() != 3 || omega.components() != 3 {
        return Err(ElaxError::Usage("Biot-Savart needs a 3D vector field".into()));
    }
    let w = solenoidal_projection(omega)?;
    let len = grid.len();
    let (a, b, c) = (w.component_coeffs(0), w.component_coeffs(1), w.component_coeffs(2));
    let mut out = vec![ZERO; 3 * len];
    for i in 0..len {
        let k2 = grid.k_squared(i);
        if k2 == 0.0 || grid.touches_nyquist(i) {
            continue;
        }
        let k = grid.wavevector(i);
        let (kx, ky, kz) = (k[0] as f64, k[1] as f64, k[2] as f64);
        out[i] = I * (ky * c[i] - kz * b[i]) / k2;
        out[len + i] = I * (kz * a[i] - kx * c[i]) / k2;
        out[2 * len + i] = I * (kx * b[i] - ky * a[i]) / k2;
    }
    FourierField::from_coeffs(grid, 3, omega.is_real(), out)
}

/// Named 3D initial data.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition3D {
    /// u = A (sin x cos y cos z, −cos x sin y cos z, 0).
    TaylorGreen { amplitude: f64 },
    /// u = A (sin z, 0, 0), Ω = A (0, cos z, 0); steady.
    Shear { amplitude: f64 },
}

impl InitialCondition3D {
    pub fn name(&self) -> &'static str {
        match self {
            Self::TaylorGreen { .. } => "taylor_green",
            Self::Shear { .. } => "shear3d",
        }
    }

    pub fn velocity(&self, grid: GridSpec) -> Result<FourierField> {
        if grid.dim() != 3 {
            return Err(ElaxError::Usage("3D initial condition on a non-3D grid".into()));
        }
        Ok(match *self {
            Self::TaylorGreen { amplitude } => FourierField::from_fn(grid, 3, true, |x, out| {
                out[0] = Complex64::new(amplitude * x[0].sin() * x[1].cos() * x[2].cos(), 0.0);
                out[1] = Complex64::new(-amplitude * x[0].cos() * x[1].sin() * x[2].cos(), 0.0);
                out[2] = ZERO;
            }),
            Self::Shear { amplitude } => FourierField::from_fn(grid, 3, true, |x, out| {
                out[0] = Complex64::new(amplitude * x[2].sin(), 0.0);
                out[1] = ZERO;
                out[2] = ZERO;
            }),
        })
    }

    pub fn state(&self, grid: GridSpec) -> Result<FlowState3D> {
        FlowState3D::from_velocity(&self.velocity(grid)?, 0.0)
    }
}

/// Physical samples of a vector field, one Vec per component.
pub(crate) fn vector_physical(f: &FourierField) -> [Vec<Complex64>; 3] {
    [f.component_physical(0), f.component_physical(1), f.component_physical(2)]
}

/// Physical samples of ∂_j f_i, indexed [i][j].
pub(crate) fn gradient_physical(f: &FourierField) -> [[Vec<Complex64>; 3]; 3] {
    let comp = |i: usize| f.component(i);
    std::array::from_fn(|i| {
        let fi = comp(i);
        std::array::from_fn(|j| derivative(&fi, j).expect("3D").to_physical())
    })
}

/// Physical samples of the three partial derivatives of a scalar.
pub(crate) fn scalar_gradient_physical(f: &FourierField) -> [Vec<Complex64>; 3] {
    std::array::from_fn(|j| derivative(f, j).expect("3D").to_physical())
}

pub(crate) fn vector_from_physical(grid: GridSpec, real: bool, parts: [Vec<Complex64>; 3]) -> FourierField {
    let mut data = Vec::with_capacity(3 * grid.len());
    for p in parts {
        data.extend(p);
    }
    FourierField::from_physical(grid, 3, real, data).expect("length").dealiased()
}

/// (a·∇)b − (b·∇)a for vector fields with precomputed physical data.
pub(crate) fn lie_bracket_physical(
    a: &[Vec<Complex64>; 3],
    grad_b: &[[Vec<Complex64>; 3]; 3],
    b: &[Vec<Complex64>; 3],
    grad_a: &[[Vec<Complex64>; 3]; 3],
) -> [Vec<Complex64>; 3] {
    let len = a[0].len();
    std::array::from_fn(|i| {
        (0..len)
            .map(|p| {
                let mut acc = ZERO;
                for j in 0..3 {
                    acc += a[j][p] * grad_b[i][j][p] - b[j][p] * grad_a[i][j][p];
                }
                acc
            })
            .collect()
    })
}

/// −(u·∇)Ω + (Ω·∇)u, each product dealiased, then solenoidal-projected.
pub fn rhs_euler3d(state: &FlowState3D) -> FourierField {
    let grid = *state.grid();
    let u = vector_physical(&state.u);
    let w = vector_physical(&state.omega);
    let gu = gradient_physical(&state.u);
    let gw = gradient_physical(&state.omega);
    let bracket = lie_bracket_physical(&w, &gu, &u, &gw);
    let f = vector_from_physical(grid, state.omega.is_real(), bracket);
    solenoidal_projection(&f).expect("vector")
}

/// ∇×(u×Ω) with the cross product dealiased, then projected. Equal to
/// [`rhs_euler3d`] for divergence-free data at a third of the transform cost.
pub fn rhs_euler3d_rotational(state: &FlowState3D) -> FourierField {
    rotational_rhs(&state.u, &state.omega, &vector_physical(&state.u))
}

fn rotational_rhs(u: &FourierField, omega: &FourierField, u_phys: &[Vec<Complex64>; 3]) -> FourierField {
    let grid = *omega.grid();
    let w = vector_physical(omega);
    let len = grid.len();
    let mut cross: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![ZERO; len]);
    for p in 0..len {
        cross[0][p] = u_phys[1][p] * w[2][p] - u_phys[2][p] * w[1][p];
        cross[1][p] = u_phys[2][p] * w[0][p] - u_phys[0][p] * w[2][p];
        cross[2][p] = u_phys[0][p] * w[1][p] - u_phys[1][p] * w[0][p];
    }
    let uxw = vector_from_physical(grid, u.is_real() && omega.is_real(), cross);
    solenoidal_projection(&curl(&uxw).expect("3D")).expect("vector")
}

/// Per-stage velocity data shared by every transported field.
pub(crate) struct Stage3D {
    pub(crate) grid: GridSpec,
    pub(crate) u: FourierField,
    pub(crate) u_phys: [Vec<Complex64>; 3],
    grad_u: OnceLock<[[Vec<Complex64>; 3]; 3]>,
}

impl Stage3D {
    pub(crate) fn new(u: FourierField) -> Self {
        let u_phys = vector_physical(&u);
        Self { grid: *u.grid(), u, u_phys, grad_u: OnceLock::new() }
    }

    pub(crate) fn grad_u(&self) -> &[[Vec<Complex64>; 3]; 3] {
        self.grad_u.get_or_init(|| gradient_physical(&self.u))
    }

    /// A φ: (u·∇)φ for scalars, (u·∇)φ − (φ·∇)u for vectors.
    pub(crate) fn apply_a(&self, phi: &FourierField) -> FourierField {
        if phi.components() == 1 {
            let g = scalar_gradient_physical(phi);
            let len = self.grid.len();
            let prod: Vec<Complex64> = (0..len)
                .map(|p| self.u_phys[0][p] * g[0][p] + self.u_phys[1][p] * g[1][p] + self.u_phys[2][p] * g[2][p])
                .collect();
            FourierField::from_physical(self.grid, 1, phi.is_real(), prod).expect("length").dealiased()
        } else {
            let ph = vector_physical(phi);
            let gph = gradient_physical(phi);
            let out = lie_bracket_physical(&self.u_phys, &gph, &ph, self.grad_u());
            vector_from_physical(self.grid, phi.is_real() && self.u.is_real(), out)
        }
    }
}

fn stage3d(omega: &FourierField, passengers: &[FourierField]) -> Result<(FourierField, Vec<FourierField>)> {
    let omega = solenoidal_projection(omega)?;
    let u = biot_savart(&omega)?;
    let st = Stage3D::new(u);
    let k_omega = rotational_rhs(&st.u, &omega, &st.u_phys);
    let k_pass = par_map(passengers, |p| st.apply_a(p).scaled(-1.0));
    Ok((k_omega, k_pass))
}

fn combine(base: &FourierField, k: &FourierField, a: f64) -> FourierField {
    let mut out = base.clone();
    out.axpy(a, k);
    out
}

/// One RK4 step of Ω with per-stage projection, advancing the passengers by
/// ∂_tφ = −Aφ with the stage velocity. Scalar passengers use A = u·∇,
/// vector passengers A φ = (u·∇)φ − (φ·∇)u.
pub fn step_coupled3d(
    state: &FlowState3D,
    passengers: &[FourierField],
    dt: f64,
) -> Result<(FlowState3D, Vec<FourierField>)> {
    if !(dt > 0.0) {
        return Err(ElaxError::Config(format!("time step must be positive, got {dt}")));
    }
    for p in passengers {
        if p.grid() != state.grid() {
            return Err(ElaxError::Usage("transported field must live on the flow grid".into()));
        }
    }
    let w0 = &state.omega;
    let mix = |k: &[FourierField], a: f64| -> Vec<FourierField> {
        passengers.iter().zip(k).map(|(p, k)| combine(p, k, a)).collect()
    };
    let (k1, p1) = stage3d(w0, passengers)?;
    let (k2, p2) = stage3d(&combine(w0, &k1, 0.5 * dt), &mix(&p1, 0.5 * dt))?;
    let (k3, p3) = stage3d(&combine(w0, &k2, 0.5 * dt), &mix(&p2, 0.5 * dt))?;
    let (k4, p4) = stage3d(&combine(w0, &k3, dt), &mix(&p3, dt))?;
    let t = state.t + dt;
    let mut omega = w0.clone();
    omega.axpy(dt / 6.0, &k1);
    omega.axpy(dt / 3.0, &k2);
    omega.axpy(dt / 3.0, &k3);
    omega.axpy(dt / 6.0, &k4);
    if !omega.is_finite() {
        return Err(ElaxError::BlowUp { t, reason: "vorticity is not finite".into() });
    }
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
    Ok((FlowState3D::new(omega, t)?, out))
}

pub fn step_rk4_3d(state: &FlowState3D, dt: f64) -> Result<FlowState3D> {
    step_coupled3d(state, &[], dt).map(|(s, _)| s)
}

/// 3D counterpart of [`crate::euler2d::Observer2D`].
pub trait Observer3D {
    fn columns(&self) -> Vec<String>;

    fn transported(&self) -> Vec<FourierField> {
        Vec::new()
    }

    fn set_transported(&mut self, _fields: Vec<FourierField>) {}

    fn observe(&mut self, state: &FlowState3D) -> Result<Vec<f64>>;
}

pub struct Simulation3D {
    pub series: Table,
    pub snapshots: Vec<(f64, FourierField)>,
    pub final_state: FlowState3D,
    /// Largest ‖∇·Ω‖_0/‖Ω‖_0 seen at any step.
    pub max_divergence_defect: f64,
}

/// Integrates and records t, energy, helicity, div_u, div_omega and observer columns.
pub fn run_simulation3d(
    initial: FlowState3D,
    control: RunControl,
    observers: &mut [&mut dyn Observer3D],
) -> Result<Simulation3D> {
    let (steps, dt) = control.schedule()?;
    let out_every = RunControl::every(control.output_interval, dt);
    let snap_every = control.snapshot_interval.map(|iv| RunControl::every(Some(iv), dt));

    let mut columns = vec!["t".to_string(), "energy".into(), "helicity".into(), "div_u".into(), "div_omega".into()];
    for o in observers.iter() {
        columns.extend(o.columns());
    }
    let mut series = Table::new(columns);
    let mut snapshots = vec![(initial.t, initial.omega.clone())];
    let ceiling = ENSTROPHY_CEILING * initial.enstrophy().max(f64::MIN_POSITIVE);
    let mut max_div = initial.divergence_defect_omega();

    let record = |s: &FlowState3D, series: &mut Table, observers: &mut [&mut dyn Observer3D]| -> Result<()> {
        let mut row = vec![s.t, s.energy(), s.helicity(), s.divergence_defect_u(), s.divergence_defect_omega()];
        for o in observers.iter_mut() {
            row.extend(o.observe(s)?);
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
            let f = o.transported();
            counts.push(f.len());
            passengers.extend(f);
        }
        let (next, mut moved) = step_coupled3d(&state, &passengers, dt)?;
        for (o, count) in observers.iter_mut().zip(counts).rev() {
            let tail = moved.split_off(moved.len() - count);
            o.set_transported(tail);
        }
        state = next;
        // stamp from the step count so the final time is exactly t_end
        state.t = if step == steps { t0 + control.t_end } else { t0 + step as f64 * dt };
        max_div = max_div.max(state.divergence_defect_omega());
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
    Ok(Simulation3D { series, snapshots, final_state: state, max_divergence_defect: max_div })
}

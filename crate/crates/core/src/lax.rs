//! Lax-pair auxiliary fields carried along with a flow.
//!
//! The checks here never look for exact eigenfunctions of L (the continuum
//! operator generically has none). Instead they exploit the compatibility
//! condition: if φ is transported by A then so is Lφ, so an independently
//! transported copy η of Lφ₀ must keep agreeing with L applied to φ(t).

use std::sync::Arc;

use faer::{Mat, Side};

use crate::error::{ElaxError, Result};
use crate::euler2d::{poisson_bracket, run_simulation2d, step_coupled, FlowState2D, Observer2D, RunControl};
use crate::euler3d::{
    gradient_physical, lie_bracket_physical, run_simulation3d, scalar_gradient_physical, vector_from_physical,
    vector_physical, FlowState3D, Observer3D,
};
use crate::spectral::{sobolev_norm, FourierField};
use crate::spectrum::{OperatorMatrix, SkewEigen};
use crate::Complex64;

/// Gram matrices worse than this are refused by the least-squares fit.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// L φ = {Ω, φ}.
pub fn l2d(omega: &FourierField, phi: &FourierField) -> Result<FourierField> {
    poisson_bracket(omega, phi)
}

/// Advances Ω and φ together by one RK4 step, φ obeying ∂_tφ = −{Ψ, φ}
/// with the stage stream functions of the flow step.
pub fn transport_step_2d(flow: &FlowState2D, phi: &FourierField, dt: f64) -> Result<(FlowState2D, FourierField)> {
    let (next, mut moved) = step_coupled(flow, std::slice::from_ref(phi), dt)?;
    Ok((next, moved.pop().expect("one passenger")))
}

fn ratio(num: f64, den: f64, what: &str) -> Result<f64> {
    if den == 0.0 || !den.is_finite() {
        return Err(ElaxError::Degenerate(format!("{what}: zero denominator")));
    }
    Ok(num / den)
}

/// I = ‖{Ω, φ}‖_s / ‖φ‖_s.
pub fn invariant_i_2d(omega: &FourierField, phi: &FourierField, s: f64) -> Result<f64> {
    let l = l2d(omega, phi)?;
    ratio(sobolev_norm(&l, s), sobolev_norm(phi, s), "invariant I")
}

/// Auxiliary field of the 2D pair. `lambda` and `residual` are set only
/// for probes built from a discrete eigenvector.
#[derive(Clone, Debug)]
pub struct LaxState2D {
    pub phi: FourierField,
    pub lambda: Option<Complex64>,
    pub residual: Option<f64>,
    pub s: f64,
}

impl LaxState2D {
    pub fn new(phi: FourierField, s: f64) -> Result<Self> {
        check_scalar_2d(&phi)?;
        if phi.l2_norm() == 0.0 {
            return Err(ElaxError::Degenerate("auxiliary field is identically zero".into()));
        }
        Ok(Self { phi: phi.into_complex(), lambda: None, residual: None, s })
    }

    /// Eigen-probe; refuses it when ‖{Ω,φ} − λφ‖_0/‖φ‖_0 exceeds `tol`.
    pub fn eigen(omega: &FourierField, phi: FourierField, lambda: Complex64, s: f64, tol: f64) -> Result<Self> {
        let mut st = Self::new(phi, s)?;
        let r = eigen_residual(omega, &st.phi, lambda, l2d)?;
        if !(r <= tol) {
            return Err(ElaxError::Numerical(format!("eigen-probe residual {r:e} exceeds {tol:e}")));
        }
        st.lambda = Some(lambda);
        st.residual = Some(r);
        Ok(st)
    }
}

/// Eigen-probes built from the discrete eigenvectors of an unweighted
/// truncation of {Ω, ·}: one probe per requested column of `eig`.
///
/// The truncation box cuts couplings at its edge, so the probes are only
/// approximate eigenfunctions; their residuals are measured, not assumed.
pub fn eigen_probes_2d(
    omega: &FourierField,
    m: &OperatorMatrix,
    eig: &SkewEigen,
    columns: &[usize],
    s: f64,
    tol: f64,
) -> Result<Vec<LaxState2D>> {
    if eig.s != 0.0 {
        return Err(ElaxError::Usage("eigen-probes need eigenpairs of the unweighted operator".into()));
    }
    columns
        .iter()
        .map(|&j| LaxState2D::eigen(omega, eig.field(m, j, *omega.grid())?, eig.eigenvalue(j), s, tol))
        .collect()
}

fn check_scalar_2d(phi: &FourierField) -> Result<()> {
    if phi.grid().dim() != 2 || phi.components() != 1 {
        return Err(ElaxError::Usage("2D auxiliary field must be a scalar on a 2D grid".into()));
    }
    Ok(())
}

fn eigen_residual(
    omega: &FourierField,
    phi: &FourierField,
    lambda: Complex64,
    l: fn(&FourierField, &FourierField) -> Result<FourierField>,
) -> Result<f64> {
    let mut d = l(omega, phi)?;
    d.axpy_complex(-lambda, phi);
    ratio(d.l2_norm(), phi.l2_norm(), "eigen residual")
}

/// ‖Lφ‖_0 below this fraction of ‖Ω‖_1‖φ‖_1 counts as vanishing.
const DEGENERATE_FRACTION: f64 = 1e-12;

fn vanishes(l: &FourierField, omega: &FourierField, phi: &FourierField) -> bool {
    l.l2_norm() <= DEGENERATE_FRACTION * sobolev_norm(omega, 1.0) * sobolev_norm(phi, 1.0)
}

fn sobolev_label(s: f64) -> String {
    if s.fract() == 0.0 {
        format!("I_s{}", s as i64)
    } else {
        format!("I_s{s}")
    }
}

/// Residual series of a commutation or pushforward check.
#[derive(Clone, Debug)]
pub struct ResidualSeries {
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    /// Unnormalized defect field at the final time.
    pub final_defect: FourierField,
}

impl ResidualSeries {
    pub fn last(&self) -> f64 {
        *self.r.last().expect("at least the initial row")
    }
}

/// Co-evolves φ and η = Lφ₀ with a 2D flow and reports r_commutation,
/// I at each requested Sobolev index, and ‖φ‖_0.
pub struct CommutationObserver2D {
    phi: FourierField,
    eta: FourierField,
    eta0: f64,
    sobolev: Vec<f64>,
    history: Vec<(f64, f64)>,
    defect: Option<FourierField>,
}

impl CommutationObserver2D {
    /// φ₀ is dealiased first so that transport and L act on the same modes.
    pub fn new(omega0: &FourierField, phi0: &FourierField, sobolev: Vec<f64>) -> Result<Self> {
        check_scalar_2d(phi0)?;
        let phi = phi0.clone().into_complex().dealiased();
        let eta = l2d(omega0, &phi)?;
        let eta0 = eta.l2_norm();
        if vanishes(&eta, omega0, &phi) {
            return Err(ElaxError::Degenerate(
                "{Ω₀, φ₀} vanishes; pick a φ₀ that is not a function of Ω₀".into(),
            ));
        }
        Ok(Self { phi, eta, eta0, sobolev, history: Vec::new(), defect: None })
    }

    pub fn phi(&self) -> &FourierField {
        &self.phi
    }

    pub fn history(&self) -> &[(f64, f64)] {
        &self.history
    }

    pub fn into_series(self) -> ResidualSeries {
        let (t, r) = self.history.into_iter().unzip();
        ResidualSeries { t, r, final_defect: self.defect.expect("observed at least once") }
    }
}

impl Observer2D for CommutationObserver2D {
    fn columns(&self) -> Vec<String> {
        let mut c = vec!["r_commutation".to_string()];
        c.extend(self.sobolev.iter().map(|&s| sobolev_label(s)));
        c.push("norm_phi".into());
        c
    }

    fn transported(&self) -> Vec<FourierField> {
        vec![self.phi.clone(), self.eta.clone()]
    }

    fn set_transported(&mut self, mut fields: Vec<FourierField>) {
        self.eta = fields.pop().expect("eta");
        self.phi = fields.pop().expect("phi");
    }

    fn observe(&mut self, state: &FlowState2D) -> Result<Vec<f64>> {
        let l = l2d(state.omega(), &self.phi)?;
        let defect = l.sub(&self.eta);
        let r = defect.l2_norm() / self.eta0;
        self.history.push((state.t, r));
        self.defect = Some(defect);
        let mut row = vec![r];
        for &s in &self.sobolev {
            row.push(ratio(sobolev_norm(&l, s), sobolev_norm(&self.phi, s), "invariant I")?);
        }
        row.push(self.phi.l2_norm());
        Ok(row)
    }
}

/// Runs the flow with φ₀ and η₀ = {Ω₀, φ₀} in tow and returns
/// r(t) = ‖{Ω(t), φ(t)} − η(t)‖_0 / ‖η₀‖_0.
pub fn commutation_check_2d(initial: &FlowState2D, control: RunControl, phi0: &FourierField) -> Result<ResidualSeries> {
    let mut obs = CommutationObserver2D::new(initial.omega(), phi0, vec![0.0])?;
    run_simulation2d(initial.clone(), control, &mut [&mut obs])?;
    Ok(obs.into_series())
}

/// Pointwise map applied in physical space.
pub type PointFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// f(φ) sampled on the grid, dealiased.
pub fn apply_pointwise(phi: &FourierField, f: &PointFn) -> FourierField {
    let data = phi.to_physical().into_iter().map(|z| f(z)).collect();
    FourierField::from_physical(*phi.grid(), phi.components(), false, data).expect("length").dealiased()
}

/// Carries φ and ζ = f(φ₀) and reports ‖f(φ(t)) − ζ(t)‖_0 / ‖ζ₀‖_0.
pub struct PushforwardObserver2D {
    phi: FourierField,
    zeta: FourierField,
    zeta0: f64,
    f: PointFn,
    history: Vec<(f64, f64)>,
    defect: Option<FourierField>,
    column: String,
}

impl PushforwardObserver2D {
    pub fn new(phi0: &FourierField, f: PointFn) -> Result<Self> {
        check_scalar_2d(phi0)?;
        let phi = phi0.clone().into_complex().dealiased();
        let zeta = apply_pointwise(&phi, &f);
        let zeta0 = zeta.l2_norm();
        if zeta0 == 0.0 {
            return Err(ElaxError::Degenerate("f(φ₀) vanishes identically".into()));
        }
        Ok(Self { phi, zeta, zeta0, f, history: Vec::new(), defect: None, column: "r_pushforward".into() })
    }

    /// Renames the series column, so several maps can share one run.
    pub fn with_column(mut self, name: impl Into<String>) -> Self {
        self.column = name.into();
        self
    }

    pub fn into_series(self) -> ResidualSeries {
        let (t, r) = self.history.into_iter().unzip();
        ResidualSeries { t, r, final_defect: self.defect.expect("observed at least once") }
    }
}

impl Observer2D for PushforwardObserver2D {
    fn columns(&self) -> Vec<String> {
        vec![self.column.clone()]
    }

    fn transported(&self) -> Vec<FourierField> {
        vec![self.phi.clone(), self.zeta.clone()]
    }

    fn set_transported(&mut self, mut fields: Vec<FourierField>) {
        self.zeta = fields.pop().expect("zeta");
        self.phi = fields.pop().expect("phi");
    }

    fn observe(&mut self, state: &FlowState2D) -> Result<Vec<f64>> {
        let defect = apply_pointwise(&self.phi, &self.f).sub(&self.zeta);
        let r = defect.l2_norm() / self.zeta0;
        self.history.push((state.t, r));
        self.defect = Some(defect);
        Ok(vec![r])
    }
}

pub fn pushforward_check(
    initial: &FlowState2D,
    control: RunControl,
    phi0: &FourierField,
    f: PointFn,
) -> Result<ResidualSeries> {
    let mut obs = PushforwardObserver2D::new(phi0, f)?;
    run_simulation2d(initial.clone(), control, &mut [&mut obs])?;
    Ok(obs.into_series())
}

/// Keeps only the modes with the given x-wavenumber.
pub fn sector_projection(field: &FourierField, kx: i64) -> FourierField {
    let grid = *field.grid();
    let mut out = field.clone();
    for c in 0..field.components() {
        for (j, v) in out.component_coeffs_mut(c).iter_mut().enumerate() {
            if grid.wavevector(j)[0] != kx {
                *v = Complex64::new(0.0, 0.0);
            }
        }
    }
    out.set_real(field.is_real() && kx == 0);
    out
}

/// Least-squares coefficients of `target` in span(basis) through the Gram
/// matrix, together with its condition number.
pub fn least_squares(basis: &[FourierField], target: &FourierField) -> Result<(Vec<Complex64>, f64)> {
    let m = basis.len();
    if m == 0 {
        return Err(ElaxError::Usage("expansion basis is empty".into()));
    }
    for b in basis {
        b.check_same_shape(target, "expansion")?;
    }
    let gram = Mat::<Complex64>::from_fn(m, m, |i, j| basis[i].inner(&basis[j]));
    let rhs: Vec<Complex64> = basis.iter().map(|b| b.inner(target)).collect();
    let eig = gram
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| ElaxError::Numerical(format!("Gram eigensolver failed: {e:?}")))?;
    let lam: Vec<f64> = (0..m).map(|i| eig.S()[i].re).collect();
    let lmax = lam.iter().cloned().fold(f64::MIN, f64::max);
    let lmin = lam.iter().cloned().fold(f64::MAX, f64::min);
    let cond = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    if !(cond <= MAX_GRAM_CONDITION) {
        return Err(ElaxError::Degenerate(format!(
            "basis Gram matrix condition number {cond:e} exceeds {MAX_GRAM_CONDITION:e}"
        )));
    }
    let u = eig.U();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); m];
    for q in 0..m {
        let proj: Complex64 = (0..m).map(|i| u[(i, q)].conj() * rhs[i]).sum::<Complex64>() / lam[q];
        for (i, c) in coeffs.iter_mut().enumerate() {
            *c += u[(i, q)] * proj;
        }
    }
    Ok((coeffs, cond))
}

fn combination(basis: &[FourierField], coeffs: &[Complex64]) -> FourierField {
    let mut out = FourierField::zeros(*basis[0].grid(), basis[0].components(), false);
    for (b, &a) in basis.iter().zip(coeffs) {
        out.axpy_complex(a, b);
    }
    out
}

/// What the basis is fitted to.
#[derive(Clone, Debug)]
pub enum ExpansionTarget {
    /// Ω itself, optionally projected onto one x-wavenumber sector.
    Vorticity { sector: Option<i64> },
    /// A field transported alongside the basis.
    Transported(FourierField),
}

#[derive(Clone, Debug)]
pub struct ExpansionReport {
    pub coefficients: Vec<Complex64>,
    pub gram_condition: f64,
    /// (t, ‖target(t) − Σ a_j φ_j(t)‖_0) with a_j frozen at t = 0.
    pub residual_history: Vec<(f64, f64)>,
    /// (t, max_j |a_j(t) − a_j(0)|) where a_j(t) refits target(t) on the basis at t.
    pub coefficient_drift: Vec<(f64, f64)>,
}

/// Freezes a_j at t = 0 and follows the residual as basis and target evolve.
pub struct ExpansionObserver2D {
    basis: Vec<FourierField>,
    target: ExpansionTarget,
    report: ExpansionReport,
}

impl ExpansionObserver2D {
    pub fn new(omega0: &FourierField, basis: &[LaxState2D], target: ExpansionTarget) -> Result<Self> {
        let basis: Vec<FourierField> = basis.iter().map(|b| b.phi.clone()).collect();
        let target = match target {
            ExpansionTarget::Transported(f) => ExpansionTarget::Transported(f.into_complex()),
            v => v,
        };
        let t0 = Self::target_field(&target, omega0);
        let (coefficients, gram_condition) = least_squares(&basis, &t0)?;
        let report =
            ExpansionReport { coefficients, gram_condition, residual_history: Vec::new(), coefficient_drift: Vec::new() };
        Ok(Self { basis, target, report })
    }

    fn target_field(target: &ExpansionTarget, omega: &FourierField) -> FourierField {
        match target {
            ExpansionTarget::Vorticity { sector: Some(kx) } => sector_projection(omega, *kx).into_complex(),
            ExpansionTarget::Vorticity { sector: None } => omega.clone().into_complex(),
            ExpansionTarget::Transported(f) => f.clone(),
        }
    }

    pub fn report(&self) -> &ExpansionReport {
        &self.report
    }

    pub fn into_report(self) -> ExpansionReport {
        self.report
    }
}

impl Observer2D for ExpansionObserver2D {
    fn columns(&self) -> Vec<String> {
        vec!["residual_expansion".into(), "coefficient_drift".into()]
    }

    fn transported(&self) -> Vec<FourierField> {
        let mut v = self.basis.clone();
        if let ExpansionTarget::Transported(f) = &self.target {
            v.push(f.clone());
        }
        v
    }

    fn set_transported(&mut self, mut fields: Vec<FourierField>) {
        if let ExpansionTarget::Transported(f) = &mut self.target {
            *f = fields.pop().expect("target");
        }
        self.basis = fields;
    }

    fn observe(&mut self, state: &FlowState2D) -> Result<Vec<f64>> {
        let target = Self::target_field(&self.target, state.omega());
        let residual = target.sub(&combination(&self.basis, &self.report.coefficients)).l2_norm();
        let (refit, _) = least_squares(&self.basis, &target)?;
        let drift = refit
            .iter()
            .zip(&self.report.coefficients)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        self.report.residual_history.push((state.t, residual));
        self.report.coefficient_drift.push((state.t, drift));
        Ok(vec![residual, drift])
    }
}

/// Fits the target on the basis at t = 0, then transports every basis
/// field with the flow and records the frozen-coefficient residual.
pub fn expand_vorticity(
    initial: &FlowState2D,
    control: RunControl,
    basis: &[LaxState2D],
    target: ExpansionTarget,
) -> Result<ExpansionReport> {
    let mut obs = ExpansionObserver2D::new(initial.omega(), basis, target)?;
    run_simulation2d(initial.clone(), control, &mut [&mut obs])?;
    Ok(obs.into_report())
}

// ---------------------------------------------------------------- 3D pairs

/// Which 3D Lax pair a check uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pair3D {
    /// Scalar φ, L = Ω·∇, A = u·∇.
    MontgomerySmith,
    /// Vector φ, L φ = (Ω·∇)φ − (φ·∇)Ω, A likewise with u.
    Childress,
}

impl Pair3D {
    pub fn name(self) -> &'static str {
        match self {
            Pair3D::MontgomerySmith => "montgomery_smith",
            Pair3D::Childress => "childress",
        }
    }

    pub fn components(self) -> usize {
        match self {
            Pair3D::MontgomerySmith => 1,
            Pair3D::Childress => 3,
        }
    }

    pub fn apply(self, omega: &FourierField, phi: &FourierField) -> Result<FourierField> {
        match self {
            Pair3D::MontgomerySmith => l3d_ms(omega, phi),
            Pair3D::Childress => l3d_childress(omega, phi),
        }
    }
}

fn check_3d(v: &FourierField, phi: &FourierField, phi_comps: usize) -> Result<()> {
    if v.grid() != phi.grid() {
        return Err(ElaxError::Usage("3D Lax operator: grid mismatch".into()));
    }
    if v.grid().dim() != 3 || v.components() != 3 || phi.components() != phi_comps {
        return Err(ElaxError::Usage(format!(
            "3D Lax operator needs a vector field and a {phi_comps}-component field on a 3D grid"
        )));
    }
    Ok(())
}

/// (Ω·∇)φ for scalar φ, dealiased.
pub fn l3d_ms(omega: &FourierField, phi: &FourierField) -> Result<FourierField> {
    check_3d(omega, phi, 1)?;
    let w = vector_physical(omega);
    let g = scalar_gradient_physical(phi);
    let prod = (0..omega.grid().len()).map(|p| w[0][p] * g[0][p] + w[1][p] * g[1][p] + w[2][p] * g[2][p]).collect();
    Ok(FourierField::from_physical(*omega.grid(), 1, omega.is_real() && phi.is_real(), prod)?.dealiased())
}

fn lie(v: &FourierField, phi: &FourierField) -> Result<FourierField> {
    check_3d(v, phi, 3)?;
    let out = lie_bracket_physical(&vector_physical(v), &gradient_physical(phi), &vector_physical(phi), &gradient_physical(v));
    Ok(vector_from_physical(*v.grid(), v.is_real() && phi.is_real(), out))
}

/// (Ω·∇)φ − (φ·∇)Ω, dealiased.
pub fn l3d_childress(omega: &FourierField, phi: &FourierField) -> Result<FourierField> {
    lie(omega, phi)
}

/// (u·∇)φ − (φ·∇)u, dealiased.
pub fn a3d_childress(u: &FourierField, phi: &FourierField) -> Result<FourierField> {
    lie(u, phi)
}

/// I = ‖Lφ‖_s / ‖φ‖_s with the pair picked by the shape of φ.
pub fn invariant_i_3d(omega: &FourierField, phi: &FourierField, s: f64) -> Result<f64> {
    let pair = if phi.components() == 1 { Pair3D::MontgomerySmith } else { Pair3D::Childress };
    let l = pair.apply(omega, phi)?;
    ratio(sobolev_norm(&l, s), sobolev_norm(phi, s), "invariant I")
}

/// Auxiliary field of a 3D pair.
#[derive(Clone, Debug)]
pub struct LaxState3D {
    pub pair: Pair3D,
    pub phi: FourierField,
    pub lambda: Option<Complex64>,
    pub residual: Option<f64>,
    pub s: f64,
}

impl LaxState3D {
    pub fn new(pair: Pair3D, phi: FourierField, s: f64) -> Result<Self> {
        if phi.grid().dim() != 3 || phi.components() != pair.components() {
            return Err(ElaxError::Usage(format!("{} pair needs a {}-component 3D field", pair.name(), pair.components())));
        }
        if phi.l2_norm() == 0.0 {
            return Err(ElaxError::Degenerate("auxiliary field is identically zero".into()));
        }
        Ok(Self { pair, phi: phi.into_complex(), lambda: None, residual: None, s })
    }

    pub fn eigen(omega: &FourierField, pair: Pair3D, phi: FourierField, lambda: Complex64, s: f64, tol: f64) -> Result<Self> {
        let mut st = Self::new(pair, phi, s)?;
        let mut d = pair.apply(omega, &st.phi)?;
        d.axpy_complex(-lambda, &st.phi);
        let r = ratio(d.l2_norm(), st.phi.l2_norm(), "eigen residual")?;
        if !(r <= tol) {
            return Err(ElaxError::Numerical(format!("eigen-probe residual {r:e} exceeds {tol:e}")));
        }
        st.lambda = Some(lambda);
        st.residual = Some(r);
        Ok(st)
    }
}

/// 3D counterpart of [`CommutationObserver2D`].
pub struct CommutationObserver3D {
    pair: Pair3D,
    phi: FourierField,
    eta: FourierField,
    eta0: f64,
    sobolev: Vec<f64>,
    history: Vec<(f64, f64)>,
    defect: Option<FourierField>,
}

impl CommutationObserver3D {
    pub fn new(omega0: &FourierField, phi0: &FourierField, pair: Pair3D, sobolev: Vec<f64>) -> Result<Self> {
        let phi = LaxState3D::new(pair, phi0.clone(), 0.0)?.phi.dealiased();
        let eta = pair.apply(omega0, &phi)?;
        let eta0 = eta.l2_norm();
        if vanishes(&eta, omega0, &phi) {
            return Err(ElaxError::Degenerate(format!("L φ₀ vanishes for the {} pair; pick another φ₀", pair.name())));
        }
        Ok(Self { pair, phi, eta, eta0, sobolev, history: Vec::new(), defect: None })
    }

    pub fn into_series(self) -> ResidualSeries {
        let (t, r) = self.history.into_iter().unzip();
        ResidualSeries { t, r, final_defect: self.defect.expect("observed at least once") }
    }
}

impl Observer3D for CommutationObserver3D {
    fn columns(&self) -> Vec<String> {
        let mut c = vec!["r_commutation".to_string()];
        c.extend(self.sobolev.iter().map(|&s| sobolev_label(s)));
        c.push("norm_phi".into());
        c
    }

    fn transported(&self) -> Vec<FourierField> {
        vec![self.phi.clone(), self.eta.clone()]
    }

    fn set_transported(&mut self, mut fields: Vec<FourierField>) {
        self.eta = fields.pop().expect("eta");
        self.phi = fields.pop().expect("phi");
    }

    fn observe(&mut self, state: &FlowState3D) -> Result<Vec<f64>> {
        let l = self.pair.apply(state.omega(), &self.phi)?;
        let defect = l.sub(&self.eta);
        let r = defect.l2_norm() / self.eta0;
        self.history.push((state.t, r));
        self.defect = Some(defect);
        let mut row = vec![r];
        for &s in &self.sobolev {
            row.push(ratio(sobolev_norm(&l, s), sobolev_norm(&self.phi, s), "invariant I")?);
        }
        row.push(self.phi.l2_norm());
        Ok(row)
    }
}

/// Normalized ‖Lφ(t) − η(t)‖_0 for the chosen pair, η₀ = Lφ₀.
pub fn commutation_check_3d(
    initial: &FlowState3D,
    control: RunControl,
    phi0: &FourierField,
    pair: Pair3D,
) -> Result<ResidualSeries> {
    let mut obs = CommutationObserver3D::new(initial.omega(), phi0, pair, vec![0.0])?;
    run_simulation3d(initial.clone(), control, &mut [&mut obs])?;
    Ok(obs.into_series())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler2d::InitialCondition2D;
    use crate::spectral::GridSpec;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn l2d_on_shear_and_plane_wave() {
        let g = GridSpec::d2(32).unwrap();
        let omega = FourierField::from_real_fn(g, |x| x[1].cos());
        let phi = FourierField::from_complex_fn(g, |x| c(0.0, x[0]).exp());
        let got = l2d(&omega, &phi).unwrap();
        let want = FourierField::from_complex_fn(g, |x| c(0.0, x[1].sin()) * c(0.0, x[0]).exp());
        assert!(got.sub(&want).max_abs() < 1e-13);
        let one = FourierField::from_complex_fn(g, |_| c(1.0, 0.0));
        assert!(l2d(&omega, &one).unwrap().max_abs() < 1e-15);
        assert!(l2d(&one, &phi).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn degenerate_inputs_are_refused() {
        let g = GridSpec::d2(16).unwrap();
        let omega = FourierField::from_real_fn(g, |x| x[1].cos());
        let f_of_omega = FourierField::from_real_fn(g, |x| 2.0 * x[1].cos());
        assert!(matches!(CommutationObserver2D::new(&omega, &f_of_omega, vec![0.0]), Err(ElaxError::Degenerate(_))));
        let zero = FourierField::scalar(g, false);
        assert!(matches!(invariant_i_2d(&omega, &zero, 0.0), Err(ElaxError::Degenerate(_))));
        assert!(LaxState2D::new(zero, 0.0).is_err());
    }

    #[test]
    fn invariant_is_scale_free() {
        let g = GridSpec::d2(32).unwrap();
        let st = InitialCondition2D::RandomSmooth { amplitude: 1.0, kappa: 3.0, seed: 5 }.state(g).unwrap();
        let phi = FourierField::from_complex_fn(g, |x| c(0.0, x[0] + 2.0 * x[1]).exp());
        for s in [0.0, 1.0, 2.0] {
            let a = invariant_i_2d(st.omega(), &phi, s).unwrap();
            let b = invariant_i_2d(st.omega(), &phi.clone().scaled(10.0), s).unwrap();
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn least_squares_recovers_a_scale() {
        let g = GridSpec::d2(16).unwrap();
        let omega = FourierField::from_real_fn(g, |x| x[0].cos() + 0.5 * x[1].sin());
        let basis = vec![omega.clone().scaled(0.25).into_complex()];
        let (a, cond) = least_squares(&basis, &omega.clone().into_complex()).unwrap();
        assert!((a[0] - c(4.0, 0.0)).norm() < 1e-14);
        assert_eq!(cond, 1.0);
        let dup = vec![basis[0].clone(), basis[0].clone()];
        assert!(matches!(least_squares(&dup, &omega), Err(ElaxError::Degenerate(_))));
    }

    #[test]
    fn sector_projection_keeps_one_column() {
        let g = GridSpec::d2(16).unwrap();
        let f = FourierField::from_real_fn(g, |x| x[0].cos() + x[1].cos());
        let p = sector_projection(&f, 1);
        assert!((p.coeff(0, [1, 0, 0]) - c(0.5, 0.0)).norm() < 1e-15);
        assert!(p.coeff(0, [-1, 0, 0]).norm() == 0.0);
        assert!(p.coeff(0, [0, 1, 0]).norm() == 0.0);
    }

    #[test]
    fn ms_operator_on_example() {
        let g = GridSpec::d3(16).unwrap();
        let omega = FourierField::from_fn(g, 3, true, |x, out| {
            out[0] = c(0.0, 0.0);
            out[1] = c(x[2].cos(), 0.0);
            out[2] = c(0.0, 0.0);
        });
        let phi = FourierField::from_complex_fn(g, |x| c(0.0, x[1]).exp());
        let got = l3d_ms(&omega, &phi).unwrap();
        let want = FourierField::from_complex_fn(g, |x| c(0.0, x[2].cos()) * c(0.0, x[1]).exp());
        assert!(got.sub(&want).max_abs() < 1e-13);
    }

    #[test]
    fn childress_operator_annihilates_omega_and_constants() {
        let g = GridSpec::d3(16).unwrap();
        let omega = FourierField::from_fn(g, 3, true, |x, out| {
            out[0] = c(x[1].sin() * x[2].cos(), 0.0);
            out[1] = c(x[2].sin(), 0.0);
            out[2] = c(x[0].cos(), 0.0);
        });
        assert!(l3d_childress(&omega, &omega).unwrap().max_abs() < 1e-13);
        let k = FourierField::from_fn(g, 3, false, |_, out| out.copy_from_slice(&[c(1.0, 0.0), c(0.0, 2.0), c(3.0, 0.0)]));
        assert!(l3d_childress(&k, &k).unwrap().max_abs() < 1e-15);
        assert!(l3d_ms(&k, &k.component(0)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn shear_eigen_probes_have_small_residual_and_conserve_i() {
        use crate::spectrum::{assemble_l2d, skew_eigenpairs, DEFAULT_DENSE_CAP};
        let g = GridSpec::d2(64).unwrap();
        let omega = FourierField::from_real_fn(g, |x| x[1].cos());
        let m = assemble_l2d(&omega, "shear", Some(1), 16).unwrap();
        let eig = skew_eigenpairs(&m, DEFAULT_DENSE_CAP).unwrap();
        let j = (0..m.dim()).max_by(|&a, &b| eig.mu[a].total_cmp(&eig.mu[b])).unwrap();
        let probes = eigen_probes_2d(&omega, &m, &eig, &[j], 0.0, 0.1).unwrap();
        let p = &probes[0];
        let i0 = invariant_i_2d(&omega, &p.phi, 0.0).unwrap();
        assert!((i0 - p.lambda.unwrap().norm()).abs() <= p.residual.unwrap() + 1e-12);
    }
}

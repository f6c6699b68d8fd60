//! Executes one configured experiment and writes its artifacts.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use elax_core::csv::{fmt_f64, Table};
use elax_core::euler2d::{run_simulation2d, FlowState2D, InitialCondition2D, Observer2D, RunControl};
use elax_core::euler3d::{run_simulation3d, FlowState3D, InitialCondition3D, Observer3D};
use elax_core::lax::{
    eigen_probes_2d, expand_vorticity, CommutationObserver2D, CommutationObserver3D, ExpansionTarget, Pair3D, PointFn,
    PushforwardObserver2D,
};
use elax_core::snapshot::write_snapshot;
use elax_core::spectral::{FourierField, GridSpec};
use elax_core::spectrum::{
    assemble_l2d, coverage_gap, eigen_spectrum, lyapunov_qr, numerical_abscissa, pseudospectral_abscissa,
    pseudospectrum, skew_eigenpairs, stagnation_analysis, weighted_similarity, LyapunovSettings, OperatorMatrix,
    Rect, StagnationKind,
};
use elax_core::{Complex64, ElaxError, Result};

use crate::config::{ExperimentConfig, ExpansionTargetSpec, Kind, PointMap};

/// Files written by a run, relative to its output directory, in write order.
#[derive(Clone, Debug, Default)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    /// Non-fatal diagnostics, one line each.
    pub warnings: Vec<String>,
}

struct Writer {
    dir: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn table(&mut self, name: &str, table: &Table) -> Result<()> {
        let f = fs::File::create(self.dir.join(name))?;
        table.write(BufWriter::new(f))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn summary(&mut self, name: &str, rows: &[(&str, f64)]) -> Result<()> {
        let mut text = String::from("quantity,value\n");
        for (k, v) in rows {
            text.push_str(&format!("{k},{}\n", fmt_f64(*v)));
        }
        fs::write(self.dir.join(name), text)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn snapshots(&mut self, prefix: &str, snaps: &[(f64, FourierField)]) -> Result<()> {
        fs::create_dir_all(self.dir.join("snapshots"))?;
        for (i, (t, f)) in snaps.iter().enumerate() {
            let name = format!("snapshots/{prefix}_{i:04}.elax");
            let file = fs::File::create(self.dir.join(&name))?;
            write_snapshot(BufWriter::new(file), f, *t)?;
            self.files.push(name);
        }
        Ok(())
    }

    /// MANIFEST.txt in `sha256sum` format, sorted by path.
    fn manifest(mut self) -> Result<Vec<String>> {
        let mut names = self.files.clone();
        names.sort();
        let mut text = String::new();
        for name in &names {
            let bytes = fs::read(self.dir.join(name))?;
            text.push_str(&format!("{}  {name}\n", hex::encode(Sha256::digest(&bytes))));
        }
        fs::write(self.dir.join("MANIFEST.txt"), text)?;
        self.files.push("MANIFEST.txt".into());
        Ok(self.files)
    }
}

fn grid(cfg: &ExperimentConfig, dim: usize) -> Result<GridSpec> {
    GridSpec::new(dim, cfg.n)
}

fn control(cfg: &ExperimentConfig) -> RunControl {
    RunControl { dt: cfg.dt, t_end: cfg.t_end, output_interval: cfg.output_interval, snapshot_interval: cfg.snapshot_interval }
}

pub fn initial_2d(cfg: &ExperimentConfig) -> Result<InitialCondition2D> {
    Ok(match cfg.initial.as_str() {
        "shear" => InitialCondition2D::Shear { amplitude: cfg.amplitude },
        "cellular" => InitialCondition2D::Cellular { amplitude: cfg.amplitude },
        "random_smooth" => InitialCondition2D::RandomSmooth { amplitude: cfg.amplitude, kappa: cfg.kappa, seed: cfg.seed },
        other => return Err(ElaxError::Config(format!("`{other}` is not a 2D initial condition"))),
    })
}

pub fn initial_3d(cfg: &ExperimentConfig) -> Result<InitialCondition3D> {
    Ok(match cfg.initial.as_str() {
        "taylor_green" => InitialCondition3D::TaylorGreen { amplitude: cfg.amplitude },
        "shear3d" | "shear" => InitialCondition3D::Shear { amplitude: cfg.amplitude },
        other => return Err(ElaxError::Config(format!("`{other}` is not a 3D initial condition"))),
    })
}

fn plane_waves(g: GridSpec, ks: &[[i64; 3]]) -> Result<FourierField> {
    let mut phi = FourierField::scalar(g, false);
    for &k in ks {
        phi = phi.add(&FourierField::mode(g, k, Complex64::new(1.0, 0.0))?);
    }
    Ok(phi)
}

/// φ₀ for the configured pair: Σ e^{ik·x}, times the polarization for vector pairs.
pub fn phi0_3d(cfg: &ExperimentConfig, g: GridSpec) -> Result<FourierField> {
    let scalar = plane_waves(g, &cfg.phi0)?;
    match cfg.pair {
        Pair3D::MontgomerySmith => Ok(scalar),
        Pair3D::Childress => {
            let parts: Vec<FourierField> =
                cfg.polarization.iter().map(|&p| scalar.clone().scaled(p)).collect();
            FourierField::from_components(&parts)
        }
    }
}

pub fn point_fn(map: PointMap) -> PointFn {
    match map {
        PointMap::Identity => Arc::new(|z| z),
        PointMap::Square => Arc::new(|z| z * z),
        PointMap::Cube => Arc::new(|z| z * z * z),
        PointMap::Constant => Arc::new(|_| Complex64::new(1.0, 0.0)),
    }
}

fn truncation(cfg: &ExperimentConfig, set: Option<i64>) -> i64 {
    set.unwrap_or_else(|| cfg.default_truncation())
}

fn operator(cfg: &ExperimentConfig) -> Result<(FourierField, OperatorMatrix)> {
    let init = initial_2d(cfg)?;
    let omega = init.vorticity(grid(cfg, 2)?)?;
    let m = assemble_l2d(&omega, init.name(), cfg.spectrum_sector, truncation(cfg, cfg.truncation))?;
    Ok((omega, m))
}

/// Runs `kind` with `cfg`, writing every artifact and MANIFEST.txt to `out`.
pub fn run_experiment(kind: Kind, cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    let mut w = Writer::new(out)?;
    let mut warnings = Vec::new();
    match kind {
        Kind::Simulate2d => {
            let state = initial_2d(cfg)?.state(grid(cfg, 2)?)?;
            let sim = run_simulation2d(state, control(cfg), &mut [])?;
            w.table("series.csv", &sim.series)?;
            w.snapshots("omega", &sim.snapshots)?;
        }
        Kind::Simulate3d => {
            let state = initial_3d(cfg)?.state(grid(cfg, 3)?)?;
            let sim = run_simulation3d(state, control(cfg), &mut [])?;
            w.table("series.csv", &sim.series)?;
            w.snapshots("omega", &sim.snapshots)?;
        }
        Kind::Laxcheck2d => laxcheck_2d(cfg, &mut w)?,
        Kind::Laxcheck3d => laxcheck_3d(cfg, &mut w)?,
        Kind::Spectrum => spectrum(cfg, &mut w)?,
        Kind::Pseudospec => pseudospec(cfg, &mut w)?,
        Kind::Lyapunov => lyapunov(cfg, &mut w, &mut warnings)?,
        Kind::Expand => expand(cfg, &mut w)?,
    }
    let files = w.manifest()?;
    Ok(RunOutcome { out_dir: out.to_path_buf(), files, warnings })
}

/// lax.csv: t, r_commutation, I_s…, norm_phi, residual_expansion.
fn lax_table(series: &Table, sobolev_columns: &[String]) -> Table {
    let mut names = vec!["t".to_string(), "r_commutation".into()];
    names.extend(sobolev_columns.iter().cloned());
    names.push("norm_phi".into());
    let cols: Vec<Vec<f64>> = names.iter().map(|c| series.column(c).expect("observer column")).collect();
    names.push("residual_expansion".into());
    let mut t = Table::new(names);
    for i in 0..series.rows.len() {
        let mut row: Vec<f64> = cols.iter().map(|c| c[i]).collect();
        row.push(f64::NAN);
        t.push(row);
    }
    t
}

fn sobolev_columns(columns: &[String]) -> Vec<String> {
    columns.iter().filter(|c| c.starts_with("I_s")).cloned().collect()
}

fn laxcheck_2d(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let g = grid(cfg, 2)?;
    let state: FlowState2D = initial_2d(cfg)?.state(g)?;
    let phi0 = plane_waves(g, &cfg.phi0)?;
    let mut comm = CommutationObserver2D::new(state.omega(), &phi0, cfg.sobolev.clone())?;
    let mut push: Vec<PushforwardObserver2D> =
        cfg.pushforward.iter().map(|&m| PushforwardObserver2D::new(&phi0, point_fn(m)).map(|o| o.with_column(format!("r_{}", m.name())))).collect::<Result<_>>()?;
    let sim = {
        let mut obs: Vec<&mut dyn Observer2D> = vec![&mut comm];
        obs.extend(push.iter_mut().map(|p| p as &mut dyn Observer2D));
        run_simulation2d(state, control(cfg), &mut obs)?
    };
    let cols = sobolev_columns(&sim.series.columns);
    w.table("lax.csv", &lax_table(&sim.series, &cols))?;
    if !push.is_empty() {
        let mut names = vec!["t".to_string()];
        names.extend(push.iter().flat_map(|p| p.columns()));
        let series: Vec<_> = push.into_iter().map(|p| p.into_series()).collect();
        let mut t = Table::new(names);
        for i in 0..series[0].t.len() {
            let mut row = vec![series[0].t[i]];
            row.extend(series.iter().map(|s| s.r[i]));
            t.push(row);
        }
        w.table("pushforward.csv", &t)?;
    }
    w.table("series.csv", &sim.series)?;
    w.snapshots("omega", &sim.snapshots)
}

fn laxcheck_3d(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let g = grid(cfg, 3)?;
    let state: FlowState3D = initial_3d(cfg)?.state(g)?;
    let phi0 = phi0_3d(cfg, g)?;
    let mut comm = CommutationObserver3D::new(state.omega(), &phi0, cfg.pair, cfg.sobolev.clone())?;
    let sim = run_simulation3d(state, control(cfg), &mut [&mut comm as &mut dyn Observer3D])?;
    let cols = sobolev_columns(&sim.series.columns);
    w.table("lax.csv", &lax_table(&sim.series, &cols))?;
    w.table("series.csv", &sim.series)?;
    w.snapshots("omega", &sim.snapshots)
}

fn spectrum(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let (_, m) = operator(cfg)?;
    let mut eigs = eigen_spectrum(&m, cfg.dense_cap)?;
    eigs.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    let mut t = Table::new(["re", "im"]);
    for z in &eigs {
        t.push(vec![z.re, z.im]);
    }
    w.table("eigenvalues.csv", &t)?;
    let max_re = eigs.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let (lo, hi) = cfg.band;
    w.summary(
        "summary.csv",
        &[
            ("dimension", m.dim() as f64),
            ("truncation", truncation(cfg, cfg.truncation) as f64),
            ("sector", cfg.spectrum_sector.map_or(f64::NAN, |s| s as f64)),
            ("s", cfg.s),
            ("skew_hermitian_defect", m.skew_hermitian_defect()),
            ("max_abs_real_part", max_re),
            ("band_lo", lo),
            ("band_hi", hi),
            ("coverage_gap", coverage_gap(&eigs, lo, hi)),
            ("numerical_abscissa", numerical_abscissa(&weighted_similarity(&m, cfg.s))),
        ],
    )
}

fn pseudospec(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let (_, m) = operator(cfg)?;
    let weighted = weighted_similarity(&m, cfg.s);
    let eig = skew_eigenpairs(&m, cfg.dense_cap)?;
    let rect = Rect { re: cfg.re_range, im: cfg.im_range };
    let report = pseudospectrum(&weighted, rect, cfg.resolution, &cfg.eps, None)?;
    let mut t = Table::new(["re", "im", "sigma_min"]);
    for &(x, y, s) in &report.grid {
        t.push(vec![x, y, s]);
    }
    w.table("pseudospectrum.csv", &t)?;
    let mut a = Table::new(["eps", "abscissa"]);
    for &(eps, from_grid) in &report.abscissae {
        let refined = pseudospectral_abscissa(&weighted, &eig, eps, cfg.candidates)?;
        a.push(vec![eps, from_grid.max(refined)]);
    }
    w.table("abscissa.csv", &a)?;
    w.summary(
        "summary.csv",
        &[
            ("dimension", m.dim() as f64),
            ("truncation", truncation(cfg, cfg.truncation) as f64),
            ("s", cfg.s),
            ("numerical_abscissa", numerical_abscissa(&weighted)),
        ],
    )
}

fn kind_code(k: StagnationKind) -> f64 {
    match k {
        StagnationKind::Saddle => 0.0,
        StagnationKind::Center => 1.0,
        StagnationKind::Degenerate => 2.0,
    }
}

fn lyapunov(cfg: &ExperimentConfig, w: &mut Writer, warnings: &mut Vec<String>) -> Result<()> {
    let omega = initial_2d(cfg)?.vorticity(grid(cfg, 2)?)?;
    let report = stagnation_analysis(&omega)?;
    let mut st = Table::new(["x", "y", "kind", "eig_re", "eig_im", "det_jacobian"]);
    for p in &report.points {
        let j = p.jacobian;
        let e = p.eigenvalues[0];
        st.push(vec![p.position[0], p.position[1], kind_code(p.kind), e.re.abs(), e.im.abs(), j[0][0] * j[1][1] - j[0][1] * j[1][0]]);
    }
    w.table("stagnation.csv", &st)?;
    for u in &report.unresolved {
        warnings.push(format!("stagnation search did not converge near ({}, {})", u[0], u[1]));
    }

    let starts: Vec<[f64; 2]> =
        if cfg.points.is_empty() { report.points.iter().map(|p| p.position).collect() } else { cfg.points.clone() };
    let settings = LyapunovSettings { horizon: cfg.horizon, dt: cfg.lyap_dt, renorm_interval: cfg.renorm_interval, warmup: cfg.warmup };
    let mut ex = Table::new(["x0", "y0", "lambda1", "lambda2", "slope1", "slope2", "stationary", "warmup", "horizon"]);
    let mut hist = Table::new(["point", "t", "lambda1", "lambda2"]);
    for (i, &x0) in starts.iter().enumerate() {
        let run = lyapunov_qr(&omega, x0, settings)?;
        if let Some(msg) = &run.warning {
            warnings.push(format!("point {i}: {msg}"));
        }
        ex.push(vec![
            x0[0],
            x0[1],
            run.exponents[0],
            run.exponents[1],
            run.last_decade_slope[0],
            run.last_decade_slope[1],
            f64::from(u8::from(run.stationary)),
            run.warmup,
            run.horizon,
        ]);
        for &(t, l1, l2) in &run.history {
            hist.push(vec![i as f64, t, l1, l2]);
        }
    }
    w.table("exponents.csv", &ex)?;
    w.table("lyapunov_history.csv", &hist)?;
    w.summary(
        "summary.csv",
        &[
            ("stagnation_points", report.points.len() as f64),
            ("unresolved_minima", report.unresolved.len() as f64),
            ("field_vanishes", f64::from(u8::from(report.everywhere))),
            ("trajectories", starts.len() as f64),
            ("warnings", warnings.len() as f64),
        ],
    )
}

fn expand(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let g = grid(cfg, 2)?;
    let init = initial_2d(cfg)?;
    let state = init.state(g)?;
    let m = assemble_l2d(state.omega(), init.name(), Some(cfg.expand_sector), truncation(cfg, cfg.expand_truncation))?;
    let eig = skew_eigenpairs(&m, cfg.dense_cap)?;
    let columns: Vec<usize> = (0..m.dim()).collect();
    let basis = eigen_probes_2d(state.omega(), &m, &eig, &columns, 0.0, f64::INFINITY)?;
    let target = match &cfg.expand_target {
        ExpansionTargetSpec::Vorticity => ExpansionTarget::Vorticity { sector: Some(cfg.expand_sector) },
        ExpansionTargetSpec::PlaneWaves(ks) => ExpansionTarget::Transported(plane_waves(g, ks)?),
    };
    let report = expand_vorticity(&state, control(cfg), &basis, target)?;
    let mut c = Table::new(["j", "re", "im", "mu", "probe_residual"]);
    for (j, (a, b)) in report.coefficients.iter().zip(&basis).enumerate() {
        c.push(vec![j as f64, a.re, a.im, eig.mu[j], b.residual.unwrap_or(f64::NAN)]);
    }
    w.table("coefficients.csv", &c)?;
    let mut r = Table::new(["t", "residual_expansion", "coefficient_drift"]);
    for (&(t, res), &(_, drift)) in report.residual_history.iter().zip(&report.coefficient_drift) {
        r.push(vec![t, res, drift]);
    }
    w.table("residual.csv", &r)?;
    w.summary(
        "summary.csv",
        &[("basis_size", basis.len() as f64), ("sector", cfg.expand_sector as f64), ("gram_condition", report.gram_condition)],
    )
}

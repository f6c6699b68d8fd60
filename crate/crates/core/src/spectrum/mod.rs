//! Spectral analysis of the frozen-coefficient Lax operator and Lyapunov
//! analysis of the flow it generates.
//!
//! A finite truncation has the same eigenvalues in every norm, so the
//! L² versus H¹ distinction cannot show up in raw eigenvalues. It is
//! probed through the norm-dependent objects instead: weighted
//! pseudospectra and the numerical abscissa.

mod eigen;
mod lanczos;
mod lyapunov;
mod operator;
mod pseudo;

pub use eigen::{coverage_gap, eigen_spectrum, skew_eigenpairs, SkewEigen, DEFAULT_DENSE_CAP, SKEW_TOLERANCE};
pub use lanczos::{extreme_eigenvalue, Extreme};
pub use lyapunov::{
    lyapunov_qr, stagnation_analysis, Jet, LyapunovRun, LyapunovSettings, PointEvaluator, StagnationKind,
    StagnationPoint, StagnationReport, NEWTON_TOL, SCAN_RESOLUTION,
};
pub use operator::{
    assemble_l2d, assemble_l3d_ms, numerical_abscissa, sobolev_weight, truncation_modes, weighted_similarity,
    OperatorMatrix,
};
pub use pseudo::{
    cluster_conditions, pseudospectral_abscissa, pseudospectrum, sigma_min, BandLu, ClusterCondition,
    PseudospectrumReport, Rect, DEFAULT_CANDIDATES, MAX_RESOLUTION,
};

use crate::Complex64;

/// Everything computed about one truncated operator.
#[derive(Clone, Debug, Default)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex64>,
    /// Band [lo, hi] on the imaginary axis and the largest gap inside it.
    pub coverage_gap: Option<((f64, f64), f64)>,
    pub pseudospectrum: Option<PseudospectrumReport>,
    pub numerical_abscissa: Option<f64>,
}

/// Stagnation points and trajectory exponents of one frozen Ω.
#[derive(Clone, Debug, Default)]
pub struct LyapunovReport {
    pub stagnation: StagnationReport,
    pub runs: Vec<LyapunovRun>,
}

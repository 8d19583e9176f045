//! Temporal complexity of gradient trajectories.
//!
//! Given a logged gradient sequence `g_0..g_T`, this crate measures how
//! predictable it is from its own history:
//!
//! * [`metrics`]: prediction-based path-length `P_T(m) = Σ‖g_t − m_t‖²`, the
//!   predictability index `κ_T(m) = P_T(m)/Σ‖g_t‖²` and windowed variants;
//! * [`spectral`]: singular spectra of the increment matrix and the
//!   predictable rank `r*(ε)`;
//! * [`projection`]: seeded Gaussian sketches for high-dimensional traces.
//!
//! [`harness`] holds small optimization testbeds that check the regret and
//! stationarity guarantees these quantities control.

pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod numeric;
pub mod predictors;
pub mod projection;
pub mod rng;
pub mod spectral;
pub mod trace;

pub use error::{Error, Result};
pub use metrics::{
    magnitude_ratio_diagnostic, path_length, predictability_index, predictability_report,
    windowed_kappa, PredictabilityReport, WindowedKappaSeries,
};
pub use predictors::{residuals, run_predictor, PredictionSeries, PredictorConfig, ResidualSeries};
pub use projection::{apply_projection, distortion_check, make_projection, ProjectionSpec};
pub use spectral::{
    best_rank_r_residual, increment_matrix, predictable_rank, singular_spectrum, tail_energy,
    windowed_rank, IncrementMatrix, Spectrum,
};
pub use trace::{
    load_trace, save_trace, validate_trace, GradientTrace, TraceDiagnostics, TraceFormat,
};

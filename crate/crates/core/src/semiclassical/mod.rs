//! Mean-field dynamics and closed-form lasing estimators.

pub mod estimates;
pub mod meanfield;
pub mod state;
pub mod sweep;

pub use estimates::{
    effective_kappa, lasing_threshold, linewidth_estimate, optimal_pump_heuristic, phonon_number_estimate,
    purcell_kappa, rate_balance_residual, LasingEstimates,
};
pub use meanfield::{
    integrate_mean_field, mean_field_rhs, mean_field_steady, mean_field_steady_with, MeanField, MeanFieldOptions,
    MeanFieldSteady,
};
pub use state::{Populations, SemiclassicalState};
pub use sweep::{lasing_onset, log_space, optimal_pump, optimal_pump_with, pump_sweep, steady_at_pump, OptimalPump, PumpSearch};

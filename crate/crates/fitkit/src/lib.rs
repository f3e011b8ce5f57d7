//! Spectroscopy line shapes (notch S21 of the g↔e and g↔f transitions,
//! resonator |S21|², Voigt emission peak), bounded Levenberg–Marquardt
//! fitting and model-free FWHM extraction.

pub mod data;
pub mod error;
pub mod faddeeva;
pub mod fit;
pub mod lm;
pub mod models;
pub mod peak;
pub mod synthetic;

pub use data::{CurveData, FreqUnit, YKind};
pub use error::{FitError, Result};
pub use faddeeva::faddeeva;
pub use fit::{fit_curve, fit_curve_with, Bounds, FitOptions, FitResult};
pub use lm::{levenberg_marquardt, LmOptions, LmOutcome, Problem};
pub use models::{
    eval_lorentzian_resonator, eval_notch_ge, eval_notch_gf, eval_voigt, voigt_fwhm_approx, Model, NotchGe, NotchGf,
    Resonator, Voigt,
};
pub use peak::{edge_background, fwhm, fwhm_of};
pub use synthetic::{round_trip, RoundTrip, SyntheticCase};

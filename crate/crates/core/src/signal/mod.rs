//! Signal preparation: ECG → beats → RR → Morlet CWT magnitudes → windows.

mod beats;
mod cwt;
mod rpeak;
mod window;

pub use beats::{derive_bradycardia_onsets, rr_series, BeatSeries, EcgSeries};
pub use cwt::{morlet, morlet_cwt, resample_rr, uniform_cwt, CwtConfig, CwtOutput};
pub use rpeak::detect_r_peaks;
pub use window::{apply_scaler, fit_scaler, segment_windows, FeatureScaler, FeatureWindow};

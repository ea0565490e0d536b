//! Time-frequency analysis: Gabor-wavelet scalograms, Welch PSD, energy-peak
//! windowing and rasterization to square images.

mod bank;
mod cwt;
mod pgm;
mod psd;
mod raster;
mod window;

pub use bank::{build_bank, WaveletBank};
pub use cwt::{cwt, cwt_with, gabor_kernel, CwtMethod, Scalogram, ScalogramOrigin, SUPPORT_SIGMAS, VALIDITY_SIGMAS};
pub use pgm::{read_pgm, write_pgm, Pgm};
pub use psd::{psd_welch, Spectrum};
pub use raster::{bilinear_resample, rasterize, ScalogramImage};
pub use window::{energy_peak, extract_window, EnergyPeakWindower, WindowedSample, Windower};

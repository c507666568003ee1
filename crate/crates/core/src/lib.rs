//! Simulation and modeling library for equalization-enhanced phase noise
//! (EEPN) in high symbol-rate coherent optical links.
//!
//! Receiver-side chromatic dispersion compensation smears local-oscillator
//! phase noise across the dispersion memory, turning it into a
//! frequency-dependent phase error and burst-like SNR degradation. This
//! crate provides:
//!
//! - [`signal`]: QAM generation, root-raised-cosine shaping/matched
//!   filtering, windowed spectra;
//! - [`channel`]: dispersion, Wiener or replayed LO phase noise, AWGN,
//!   phase-trace file I/O and preprocessing;
//! - [`rx_dsp`]: dispersion compensation, data-aided carrier phase
//!   recovery, blockwise distortion/SNR metrics;
//! - [`models`]: dispersion memory, the frequency-dependent phase error,
//!   and distortion-power predictors — the time-varying model (moving
//!   variance of the LO phase over the memory window), its
//!   frequency-domain twin, and the constant-variance baseline;
//! - [`analysis`]: correlation, histograms, SNR traces, CSV interchange.
//!
//! All operations are deterministic for fixed seeds and pure with respect
//! to their inputs.

pub mod analysis;
pub mod channel;
pub mod error;
mod fft;
pub mod models;
pub mod rx_dsp;
pub mod signal;

pub use analysis::Correlation;
pub use channel::{LinkParams, PhaseTrace};
pub use error::{Error, Result};
pub use models::{CdMemory, MovingSeries, SpectralPhaseError};
pub use rx_dsp::{BlockMetrics, BlockSeries};
pub use signal::{ComplexSignal, Constellation};

//! Multicarrier waveform simulation: CP-OFDM, GFDM and WCP-COQAM
//! transmitters, receivers, spectral estimation and link-level experiments.

pub mod dsp;
pub mod error;
pub mod harness;
pub mod link;
pub mod modem;
pub mod pulse;
pub mod spectral;

pub use dsp::ComplexSignal;
pub use error::{Error, Result};
pub use modem::{ModemConfig, Scheme, SymbolGrid};
pub use pulse::{PulseKind, PulsePrototype};

//! Jamming-based protection of transmitter RF fingerprints: signal
//! generation, device impairments, jammer and channel models, the
//! eavesdropper's receive chain, I/Q fingerprint imaging, classifiers and the
//! experiment harness tying them together.

pub mod channel;
pub mod error;
pub mod harness;
pub mod imaging;
pub mod impairments;
pub mod nn;
pub mod classifiers;
pub mod receiver;
pub mod signal;

pub use error::{Error, Result};

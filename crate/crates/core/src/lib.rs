//! Simulation and analysis of two-photon (Hong-Ou-Mandel) interference.
//!
//! * [`linalg`]: dense complex vectors, operators and density matrices.
//! * [`interference`]: the momentum-basis beamsplitter model and Werner-like mixtures.
//! * [`wavepacket`]: coherence length, wavepacket overlap and the coincidence dip.
//! * [`polarization`]: the 16-dimensional momentum ⊗ polarization model with half-wave plates.
//! * [`detector`]: Monte Carlo count generation for dip and polarization scans.
//! * [`fit`]: weighted Levenberg-Marquardt fits of dip and cosine models.
//! * [`io`]: CSV and JSON formats for scan records and fit results.
//! * [`run`]: scan configurations and replayable run manifests.

pub mod detector;
pub mod error;
pub mod fit;
pub mod interference;
pub mod io;
pub mod linalg;
pub mod polarization;
pub mod run;
pub mod wavepacket;

pub use error::{Error, Result};

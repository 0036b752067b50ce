//! Zero-shot reconstruction of dynamical systems with a mixture of
//! almost-linear RNN experts.
//!
//! The crate covers the full pipeline: simulating benchmark systems into
//! training corpora ([`systems`]), lifting low-dimensional observations
//! ([`embedding`]), the gated expert model ([`model`]), sparse teacher forcing
//! training ([`training`]), long-term evaluation ([`metrics`]), and the
//! on-disk formats ([`io`]).

pub mod embedding;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod seed;
pub mod systems;
pub mod training;
pub mod trajectory;

pub use error::{Error, Result};
pub use trajectory::Trajectory;

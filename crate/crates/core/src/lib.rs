//! Entanglement concentration for qutrit pairs: state algebra, linear-optics
//! networks, cross-Kerr parity probes with homodyne detection, and the
//! unknown- and known-parameter concentration protocols.

pub mod error;
pub mod format;
pub mod grid;
pub mod homodyne;
pub mod known;
pub mod linalg;
pub mod optics;
pub mod protocol;
pub mod reference;
pub mod special;
pub mod state;

pub use error::{Error, Result};

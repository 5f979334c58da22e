//! Syzygies of P1 x P1 under Segre-Veronese embeddings.
//!
//! The pipeline plans the strands whose ranks cannot be read off the Hilbert
//! function, builds the Koszul boundary matrices for them, computes their ranks
//! over a prime field and assembles multigraded and standard Betti tables.
//! Post-processing covers GL2 x GL2 Schur decompositions, Boij-Soderberg
//! decompositions and statistics over the resulting tables.

pub mod betti;
pub mod bs;
pub mod error;
pub mod grading;
pub mod hilbert;
pub mod io;
pub mod linalg;
pub mod orchestrator;
pub mod pipeline;
pub mod schur;
pub mod stats;
pub mod strands;

pub use error::{Error, Result};
pub use grading::{Bidegree, EmbeddingSpec, Multidegree};

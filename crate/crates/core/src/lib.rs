//! Verification of noisy quantum computations against an ideal unitary.
//!
//! Channels are held as Kraus sets with Choi and Liouville caches; vectorization
//! stacks columns, so `vec(AXB) = (Bᵀ ⊗ A) vec(X)`.

pub mod channel;
pub mod config;
pub mod dynamics;
pub mod linalg;
pub mod norm;
pub mod pipeline;
pub mod qcc;
pub mod random;
pub mod report;
pub mod run;

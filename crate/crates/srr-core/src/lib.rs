//! Online multiframe video super-resolution.
//!
//! The engine reconstructs a high-resolution video sequence from blurred,
//! decimated, noisy low-resolution observations. The per-frame linear solve
//! is carried out by a precomputed FIR approximate inverse of the system's
//! polyphase transfer matrix, optionally combined with an edge-preserving
//! wavelet shrinkage step applied through alternating projections.
//!
//! Crate layout:
//! - [`frame`], [`kernel`], [`imaging`]: frames and the basic degradation
//!   operators (convolution, decimation, warping) plus their adjoints.
//! - [`motion`]: global-shift and dense optical-flow registration.
//! - [`polyphase`]: coset decomposition and polyphase transfer matrices.
//! - [`design`], [`cache`]: least-squares FIR inverse design and persistence.
//! - [`wavelet`]: orthogonal and shift-invariant wavelet transforms with
//!   thresholding.
//! - [`engine`]: the per-frame reconstruction loops.
//! - [`metrics`], [`synth`], [`io`], [`harness`]: evaluation, synthetic data
//!   generation, sequence I/O and experiment orchestration.

pub mod cache;
pub mod design;
pub mod engine;
pub mod error;
pub mod frame;
pub mod harness;
pub mod imaging;
pub mod io;
pub mod kernel;
pub mod metrics;
pub mod motion;
pub mod polyphase;
pub mod synth;
pub mod wavelet;

pub use error::SrrError;
pub use frame::{BoundaryRule, Frame};
pub use kernel::Kernel2D;

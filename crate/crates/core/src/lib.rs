//! Asymptotic spectral equivalents (ASE) of symmetric analytic perturbations K(ε).
//!
//! The pipeline reads the leading eigenvalue terms and limiting eigenvectors of K(ε)
//! as ε → 0 from diagonal scalings, Schur complements and block QR factorizations,
//! and checks them against brute-force eigendecompositions.

pub mod ase;
pub mod degenerate;
pub mod error;
pub mod exponent;
pub mod gkf;
pub mod kernels;
pub mod linalg;
pub mod oracle;
pub mod scaling;
pub mod series;

pub use ase::{ase_from_scaled, eigen_readout, schur_chain, Ase, AseGroup, SchurChain, SpectralGroup};
pub use degenerate::{auto_scaled_ase, iterative_ase, schur_reduce, PartitionedScaledSeries};
pub use error::{AseError, Result};
pub use exponent::Exponent;
pub use gkf::{ase_from_gkf, block_rrqr, build_h, simplified_schur, BlockQr, GkfForm};
pub use kernels::{kernel_ase, KernelModel, KernelName, NodeSet, Regularity};
pub use oracle::{eigen_sweep, estimate_valuations, match_ase, MatchReport, SweepResult, SweepSource};
pub use scaling::{auto_scale, check_valid, extract_h, tight_entries, AutoScaling, DiagonalScaling, ScaledForm};
pub use series::{MatrixSeries, ScalarSeries, ValuationMatrix};

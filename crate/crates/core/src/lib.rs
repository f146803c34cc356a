//! Monte-Carlo simulation and analysis of post-selected two-qubit ensembles.
//!
//! Two independent sources each emit one of two orthogonal qubit states with
//! equal probability. Every qubit is hit by a random Pauli tomography
//! measurement, the pair is then measured in the Bell basis, and each
//! emerging qubit gets a second random Pauli measurement. Sub-ensembles
//! selected on the Bell outcome are reconstructed by linear-inversion
//! tomography from either the earlier or the later measurement record and
//! certified for entanglement, alongside the separable state built from the
//! preparation labels of the very same runs.
//!
//! The numerical core is generic over [`Scalar`] (`f32` / `f64`); the
//! aliases below fix it to `f64`, which is what the simulator and CLI use.

pub mod analysis;
pub mod cli;
pub mod protocol;
pub mod qmath;
pub mod scalar;
pub mod states;
pub mod tomography;

pub use scalar::Scalar;

pub type Matrix = qmath::ComplexMatrix<f64>;
pub type Density = qmath::DensityMatrix<f64>;
pub type Spectrum = qmath::HermitianSpectrum<f64>;
pub type StateKet = states::Ket<f64>;

pub type Matrix32 = qmath::ComplexMatrix<f32>;
pub type Density32 = qmath::DensityMatrix<f32>;
pub type Reconstruction = tomography::ReconstructionResult<f64>;
pub type Certification = analysis::CertificationReport<f64>;

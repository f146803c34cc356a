//! Dense complex linear algebra for the small Hilbert spaces used here
//! (dimension 2, 4 and 16).
//!
//! Basis ordering is fixed throughout the crate: for a product of factors
//! the left-most factor is the slowest index, so a qubit pair is ordered
//! `|00⟩, |01⟩, |10⟩, |11⟩` with qubit A on the left.

mod density;
mod eig;
mod matrix;

pub use density::DensityMatrix;
pub use eig::{canonical_phase, hermitian_eig, HermitianSpectrum, SWEEP_BUDGET};
pub use matrix::ComplexMatrix;

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QmathError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid subsystem index {index} for {factors} tensor factors")]
    BadSubsystem { index: usize, factors: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not Hermitian (‖M − M†‖_F = {defect:e})")]
    NotHermitian { defect: f64 },
    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal mass {off_diagonal:e})")]
    NoConvergence { sweeps: usize, off_diagonal: f64 },
    #[error("not a density matrix: {0}")]
    NotDensity(String),
}

/// Kronecker product `a ⊗ b`; `a` is the slow index.
pub fn tensor<T: Scalar>(
    a: &ComplexMatrix<T>,
    b: &ComplexMatrix<T>,
) -> Result<ComplexMatrix<T>, QmathError> {
    if !a.is_finite() || !b.is_finite() {
        return Err(QmathError::NonFinite);
    }
    let (da, db) = (a.dim(), b.dim());
    let mut out = ComplexMatrix::zeros(da * db);
    for i in 0..da {
        for j in 0..da {
            let aij = a[(i, j)];
            for k in 0..db {
                for l in 0..db {
                    out[(i * db + k, j * db + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    Ok(out)
}

/// Tensor product of kets, same ordering as [`tensor`].
pub fn tensor_vec<T: Scalar>(a: &[Complex<T>], b: &[Complex<T>]) -> Vec<Complex<T>> {
    a.iter()
        .flat_map(|&x| b.iter().map(move |&y| x * y))
        .collect()
}

/// Embed `op` acting on consecutive factors starting at `first` into a
/// register of `n_qubits` qubits.
pub fn embed<T: Scalar>(
    op: &ComplexMatrix<T>,
    first: usize,
    n_qubits: usize,
) -> Result<ComplexMatrix<T>, QmathError> {
    let width = op.dim().trailing_zeros() as usize;
    if !op.dim().is_power_of_two() || first + width > n_qubits {
        return Err(QmathError::BadSubsystem {
            index: first,
            factors: n_qubits,
        });
    }
    let left = ComplexMatrix::identity(1 << first);
    let right = ComplexMatrix::identity(1 << (n_qubits - first - width));
    tensor(&tensor(&left, op)?, &right)
}

fn check_dims(total: usize, dims: &[usize]) -> Result<(), QmathError> {
    let product: usize = dims.iter().product();
    if dims.is_empty() || dims.contains(&0) || product != total {
        return Err(QmathError::DimensionMismatch {
            expected: total,
            found: product,
        });
    }
    Ok(())
}

fn split_index(mut idx: usize, dims: &[usize], digits: &mut [usize]) {
    for (k, &d) in dims.iter().enumerate().rev() {
        digits[k] = idx % d;
        idx /= d;
    }
}

fn join_index(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&x, &d)| acc * d + x)
}

/// Transpose on tensor factor `subsystem` only.
pub fn partial_transpose<T: Scalar>(
    rho: &ComplexMatrix<T>,
    subsystem: usize,
    dims: &[usize],
) -> Result<ComplexMatrix<T>, QmathError> {
    check_dims(rho.dim(), dims)?;
    if subsystem >= dims.len() {
        return Err(QmathError::BadSubsystem {
            index: subsystem,
            factors: dims.len(),
        });
    }
    let n = rho.dim();
    let mut out = ComplexMatrix::zeros(n);
    let mut ri = vec![0; dims.len()];
    let mut ci = vec![0; dims.len()];
    for i in 0..n {
        split_index(i, dims, &mut ri);
        for j in 0..n {
            split_index(j, dims, &mut ci);
            std::mem::swap(&mut ri[subsystem], &mut ci[subsystem]);
            out[(join_index(&ri, dims), join_index(&ci, dims))] = rho[(i, j)];
            std::mem::swap(&mut ri[subsystem], &mut ci[subsystem]);
        }
    }
    Ok(out)
}

/// Trace out every factor not listed in `keep`. Kept factors stay in their
/// original order.
pub fn partial_trace<T: Scalar>(
    rho: &ComplexMatrix<T>,
    keep: &[usize],
    dims: &[usize],
) -> Result<ComplexMatrix<T>, QmathError> {
    check_dims(rho.dim(), dims)?;
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if let Some(&bad) = kept.iter().find(|&&k| k >= dims.len()) {
        return Err(QmathError::BadSubsystem {
            index: bad,
            factors: dims.len(),
        });
    }
    let kept_dims: Vec<usize> = kept.iter().map(|&k| dims[k]).collect();
    let out_dim: usize = kept_dims.iter().product();
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !kept.contains(k)).collect();

    let n = rho.dim();
    let mut out = ComplexMatrix::zeros(out_dim);
    let mut ri = vec![0; dims.len()];
    let mut ci = vec![0; dims.len()];
    let mut rk = vec![0; kept.len()];
    let mut ck = vec![0; kept.len()];
    for i in 0..n {
        split_index(i, dims, &mut ri);
        for j in 0..n {
            split_index(j, dims, &mut ci);
            if traced.iter().any(|&t| ri[t] != ci[t]) {
                continue;
            }
            for (slot, &k) in kept.iter().enumerate() {
                rk[slot] = ri[k];
                ck[slot] = ci[k];
            }
            let (a, b) = (join_index(&rk, &kept_dims), join_index(&ck, &kept_dims));
            out[(a, b)] = out[(a, b)] + rho[(i, j)];
        }
    }
    Ok(out)
}

/// `½ Σ |λᵢ(ρ − σ)|`
pub fn trace_distance<T: Scalar>(
    rho: &ComplexMatrix<T>,
    sigma: &ComplexMatrix<T>,
) -> Result<T, QmathError> {
    if rho.dim() != sigma.dim() {
        return Err(QmathError::DimensionMismatch {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    let spectrum = hermitian_eig(&(rho - sigma))?;
    let sum: T = spectrum.eigenvalues.iter().map(|l| l.abs()).sum();
    Ok(sum * T::lit(0.5))
}

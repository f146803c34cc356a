use num_complex::Complex;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{hermitian_eig, ComplexMatrix, QmathError};
use crate::scalar::Scalar;

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T>(ComplexMatrix<T>);

impl<T: Scalar> DensityMatrix<T> {
    /// Validate `m` as a state. Tolerance is `T::HERMITIAN_TOL` for the
    /// Hermitian defect, trace and smallest eigenvalue.
    pub fn new(m: ComplexMatrix<T>) -> Result<Self, QmathError> {
        let tol = T::lit(T::HERMITIAN_TOL);
        let spectrum = hermitian_eig(&m)?;
        let tr = m.trace();
        if (tr.re - T::one()).abs() > tol || tr.im.abs() > tol {
            return Err(QmathError::NotDensity(format!(
                "trace {} + {}i",
                tr.re, tr.im
            )));
        }
        if spectrum.min() < -tol {
            return Err(QmathError::NotDensity(format!(
                "negative eigenvalue {}",
                spectrum.min()
            )));
        }
        Ok(Self(m.hermitian_part()))
    }

    /// Wrap without validation; callers guarantee the invariants.
    pub(crate) fn new_unchecked(m: ComplexMatrix<T>) -> Self {
        Self(m)
    }

    /// `|v⟩⟨v|` for a normalized ket.
    pub fn pure(amplitudes: &[Complex<T>]) -> Self {
        Self(ComplexMatrix::outer(amplitudes, amplitudes))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(ComplexMatrix::identity(dim).scale_real(T::one() / T::from_usize(dim).unwrap()))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix<T> {
        self.0
    }

    /// `tr ρ²`
    pub fn purity(&self) -> T {
        self.0.trace_product(&self.0).re
    }

    pub fn min_eigenvalue(&self) -> Result<T, QmathError> {
        Ok(hermitian_eig(&self.0)?.min())
    }
}

impl<T: Scalar> AsRef<ComplexMatrix<T>> for DensityMatrix<T> {
    fn as_ref(&self) -> &ComplexMatrix<T> {
        &self.0
    }
}

impl<T: Scalar> Serialize for DensityMatrix<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for DensityMatrix<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let m = ComplexMatrix::<T>::deserialize(deserializer)?;
        DensityMatrix::new(m).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = ComplexMatrix<f64>;

    #[test]
    fn validation() {
        assert!(DensityMatrix::new(M::identity(4).scale_real(0.25)).is_ok());
        assert!(DensityMatrix::new(M::identity(2)).is_err());
        assert!(DensityMatrix::new(M::diagonal(&[1.2, -0.2])).is_err());
        assert!(DensityMatrix::new(M::from_real_rows(&[&[0.5, 0.5], &[0.0, 0.5]])).is_err());
    }

    #[test]
    fn purity_of_mixed_and_pure() {
        assert!((DensityMatrix::<f64>::maximally_mixed(4).purity() - 0.25).abs() < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = [Complex::new(h, 0.0), Complex::new(0.0, h)];
        assert!((DensityMatrix::pure(&v).purity() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn serde_round_trip() {
        let rho = DensityMatrix::<f64>::maximally_mixed(2);
        let s = serde_json::to_string(&rho).unwrap();
        assert_eq!(s, "[[[0.5,0.0],[0.0,0.0]],[[0.0,0.0],[0.5,0.0]]]");
        let back: DensityMatrix<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, rho);
        assert!(serde_json::from_str::<DensityMatrix<f64>>(
            "[[[1.0,0.0],[0.0,0.0]],[[0.0,0.0],[1.0,0.0]]]"
        )
        .is_err());
    }
}

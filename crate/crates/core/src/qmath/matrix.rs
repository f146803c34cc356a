use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::QmathError;
use crate::scalar::Scalar;

/// Dense square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix<T> {
    dim: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> ComplexMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex::one();
        }
        m
    }

    pub fn from_vec(dim: usize, data: Vec<Complex<T>>) -> Result<Self, QmathError> {
        if dim == 0 || data.len() != dim * dim {
            return Err(QmathError::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    /// Build from row slices; panics on ragged input (intended for literals).
    pub fn from_rows(rows: &[&[Complex<T>]]) -> Self {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            assert_eq!(row.len(), dim, "ragged matrix literal");
            data.extend_from_slice(row);
        }
        Self { dim, data }
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "ragged matrix literal");
            for (j, &x) in row.iter().enumerate() {
                m[(i, j)] = Complex::new(T::lit(x), T::zero());
            }
        }
        m
    }

    pub fn diagonal(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex::new(v, T::zero());
        }
        m
    }

    /// `|v⟩⟨w|`
    pub fn outer(v: &[Complex<T>], w: &[Complex<T>]) -> Self {
        assert_eq!(v.len(), w.len());
        let dim = v.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = v[i] * w[j].conj();
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(j, i)] = self[(i, j)];
            }
        }
        m
    }

    pub fn conj(&self) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn scale(&self, k: Complex<T>) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * k).collect(),
        }
    }

    pub fn scale_real(&self, k: T) -> Self {
        self.scale(Complex::new(k, T::zero()))
    }

    /// `‖M − M†‖_F`
    pub fn hermitian_defect(&self) -> T {
        let n = self.dim;
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                acc = acc + (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.hermitian_defect() <= tol
    }

    /// `(M + M†)/2`
    pub fn hermitian_part(&self) -> Self {
        let half = T::lit(0.5);
        let n = self.dim;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = (self[(i, j)] + self[(j, i)].conj()).scale(half);
            }
        }
        m
    }

    /// `tr(A B)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> Complex<T> {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut acc = Complex::zero();
        for i in 0..n {
            for k in 0..n {
                acc = acc + self[(i, k)] * other[(k, i)];
            }
        }
        acc
    }

    /// Matrix product that skips zero entries of `self`; cheap when the left
    /// operand is an embedded local operator.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                let row = &other.data[k * n..(k + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d = *d + a * b;
                }
            }
        }
        out
    }

    /// `Π M Π` for Hermitian `Π` and `M`, computed as `Π (Π M)†`.
    pub fn sandwich_hermitian(projector: &Self, m: &Self) -> Self {
        let pm = projector.matmul(m);
        projector.matmul(&pm.adjoint())
    }

    /// `⟨v|M|v⟩`
    pub fn expectation(&self, v: &[Complex<T>]) -> Complex<T> {
        assert_eq!(v.len(), self.dim);
        let n = self.dim;
        let mut acc = Complex::zero();
        for i in 0..n {
            let mut row = Complex::zero();
            for j in 0..n {
                row = row + self[(i, j)] * v[j];
            }
            acc = acc + v[i].conj() * row;
        }
        acc
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).norm())
            .fold(T::zero(), T::max)
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> ComplexMatrix<U> {
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .map(|z| Complex::new(f(z.re), f(z.im)))
                .collect(),
        }
    }
}

impl<T> Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = Complex<T>;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.dim + j]
    }
}

impl<T> IndexMut<(usize, usize)> for ComplexMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.dim + j]
    }
}

impl<T: Scalar> Add for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;

    fn add(self, rhs: Self) -> ComplexMatrix<T> {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl<T: Scalar> Sub for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;

    fn sub(self, rhs: Self) -> ComplexMatrix<T> {
        assert_eq!(self.dim, rhs.dim);
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl<T: Scalar> Mul for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;

    fn mul(self, rhs: Self) -> ComplexMatrix<T> {
        self.matmul(rhs)
    }
}

impl<T: fmt::Debug> fmt::Debug for ComplexMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  [")?;
            for j in 0..self.dim {
                let z = &self.data[i * self.dim + j];
                write!(f, " ({:?}, {:?})", z.re, z.im)?;
            }
            writeln!(f, " ]")?;
        }
        Ok(())
    }
}

/// Rows of `[re, im]` pairs.
impl<T: Scalar> Serialize for ComplexMatrix<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.dim)
            .map(|i| {
                (0..self.dim)
                    .map(|j| {
                        let z = self[(i, j)];
                        [z.re.as_f64(), z.im.as_f64()]
                    })
                    .collect()
            })
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for ComplexMatrix<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(deserializer)?;
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(D::Error::custom("matrix rows must be square"));
            }
            data.extend(
                row.iter()
                    .map(|&[re, im]| Complex::new(T::lit(re), T::lit(im))),
            );
        }
        ComplexMatrix::from_vec(dim, data).map_err(D::Error::custom)
    }
}

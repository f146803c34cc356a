use num_complex::Complex;
use num_traits::{One, Zero};

use super::{ComplexMatrix, QmathError};
use crate::scalar::Scalar;

/// Maximum number of cyclic Jacobi sweeps before giving up.
pub const SWEEP_BUDGET: usize = 100;

/// Eigenvalues in descending order with their orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct HermitianSpectrum<T> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: Vec<Vec<Complex<T>>>,
}

impl<T: Scalar> HermitianSpectrum<T> {
    pub fn min(&self) -> T {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    pub fn max(&self) -> T {
        self.eigenvalues[0]
    }

    /// `Σ λᵢ vᵢ vᵢ†`
    pub fn reconstruct(&self) -> ComplexMatrix<T> {
        self.rebuild(|l| l)
    }

    /// `Σ f(λᵢ) vᵢ vᵢ†`
    pub fn rebuild(&self, f: impl Fn(T) -> T) -> ComplexMatrix<T> {
        let n = self.eigenvalues.len();
        let mut out = ComplexMatrix::zeros(n);
        for (&l, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            let w = f(l);
            if w.is_zero() {
                continue;
            }
            for i in 0..n {
                let vi = v[i].scale(w);
                for j in 0..n {
                    out[(i, j)] = out[(i, j)] + vi * v[j].conj();
                }
            }
        }
        out
    }
}

/// Cyclic complex Jacobi eigensolver for Hermitian matrices.
///
/// Input is symmetrized to `(M + M†)/2` when its Hermitian defect is below
/// `T::HERMITIAN_TOL`, and rejected otherwise. Each rotation first removes
/// the phase of the pivot `a_pq` with a diagonal unitary, then applies the
/// real symmetric Jacobi rotation.
pub fn hermitian_eig<T: Scalar>(m: &ComplexMatrix<T>) -> Result<HermitianSpectrum<T>, QmathError> {
    if !m.is_finite() {
        return Err(QmathError::NonFinite);
    }
    let defect = m.hermitian_defect();
    if defect > T::lit(T::HERMITIAN_TOL) {
        return Err(QmathError::NotHermitian {
            defect: defect.as_f64(),
        });
    }
    let n = m.dim();
    let mut a = m.hermitian_part();
    let mut v = ComplexMatrix::<T>::identity(n);
    let tol = T::lit(T::EIG_TOL) * T::one().max(a.frobenius_norm());

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_mass(&a);
        if off < tol {
            break;
        }
        if sweeps == SWEEP_BUDGET {
            return Err(QmathError::NoConvergence {
                sweeps,
                off_diagonal: off.as_f64(),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut pairs: Vec<(T, Vec<Complex<T>>)> = (0..n)
        .map(|k| {
            let col: Vec<Complex<T>> = (0..n).map(|i| v[(i, k)]).collect();
            (a[(k, k)].re, canonical_phase(col))
        })
        .collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).expect("finite eigenvalues"));
    let (eigenvalues, eigenvectors) = pairs.into_iter().unzip();
    Ok(HermitianSpectrum {
        eigenvalues,
        eigenvectors,
    })
}

fn off_diagonal_mass<T: Scalar>(a: &ComplexMatrix<T>) -> T {
    let n = a.dim();
    let mut acc = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc = acc + a[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

fn rotate<T: Scalar>(a: &mut ComplexMatrix<T>, v: &mut ComplexMatrix<T>, p: usize, q: usize) {
    let apq = a[(p, q)];
    let g = apq.norm();
    if g <= T::min_positive_value() {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    // D = diag(1, e^{-iφ}) makes the pivot real and positive; R is the real
    // Jacobi rotation. U = D·R acts on columns p, q.
    let phase = apq.unscale(g).conj();
    let theta = (aqq - app) / (g + g);
    let t = if theta.abs() > T::lit(1e150) {
        T::one() / (theta + theta)
    } else {
        let s = if theta < T::zero() {
            -T::one()
        } else {
            T::one()
        };
        s / (theta.abs() + (theta * theta + T::one()).sqrt())
    };
    let cs = T::one() / (t * t + T::one()).sqrt();
    let sn = t * cs;

    let u_pp = Complex::new(cs, T::zero());
    let u_pq = Complex::new(sn, T::zero());
    let u_qp = phase.scale(-sn);
    let u_qq = phase.scale(cs);

    let n = a.dim();
    // A ← A U
    for k in 0..n {
        let (akp, akq) = (a[(k, p)], a[(k, q)]);
        a[(k, p)] = akp * u_pp + akq * u_qp;
        a[(k, q)] = akp * u_pq + akq * u_qq;
    }
    // A ← U† A
    for k in 0..n {
        let (apk, aqk) = (a[(p, k)], a[(q, k)]);
        a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
        a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
    }
    a[(p, q)] = Complex::zero();
    a[(q, p)] = Complex::zero();
    a[(p, p)] = Complex::new(a[(p, p)].re, T::zero());
    a[(q, q)] = Complex::new(a[(q, q)].re, T::zero());
    // V ← V U
    for k in 0..n {
        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = vkp * u_pp + vkq * u_qp;
        v[(k, q)] = vkp * u_pq + vkq * u_qq;
    }
}

/// Rotate the global phase so the first non-negligible amplitude is real
/// and non-negative.
pub fn canonical_phase<T: Scalar>(mut v: Vec<Complex<T>>) -> Vec<Complex<T>> {
    let eps = T::lit(T::UNIT_TOL);
    if let Some(first) = v.iter().find(|z| z.norm() > eps).copied() {
        let phase = first.unscale(first.norm()).conj();
        if phase != Complex::one() {
            for z in &mut v {
                *z = *z * phase;
            }
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{partial_transpose, ComplexMatrix};
    use crate::scalar::c;

    type M = ComplexMatrix<f64>;

    #[test]
    fn identity_and_diagonal() {
        let s = hermitian_eig(&M::identity(4)).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0; 4]);
        let s = hermitian_eig(&M::diagonal(&[1.0, -1.0])).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, -1.0]);
    }

    #[test]
    fn partial_transpose_phi_plus_spectrum() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = vec![c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)];
        let pt = partial_transpose(&M::outer(&v, &v), 1, &[2, 2]).unwrap();
        let s = hermitian_eig(&pt).unwrap();
        for (got, want) in s.eigenvalues.iter().zip([0.5, 0.5, 0.5, -0.5]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(s.reconstruct().max_abs_diff(&pt) < 1e-12);
    }

    #[test]
    fn complex_pivot() {
        // σy has eigenvalues ±1 with eigenvectors (1, ±i)/√2
        let sy = M::from_rows(&[&[c(0.0, 0.0), c(0.0, -1.0)], &[c(0.0, 1.0), c(0.0, 0.0)]]);
        let s = hermitian_eig(&sy).unwrap();
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((s.eigenvalues[1] + 1.0).abs() < 1e-14);
        let v = &s.eigenvectors[0];
        assert!(v[0].im.abs() < 1e-15 && v[0].re > 0.0);
        assert!((v[1] - c(0.0, std::f64::consts::FRAC_1_SQRT_2)).norm() < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = M::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(
            hermitian_eig(&m),
            Err(QmathError::NotHermitian { .. })
        ));
    }

    #[test]
    fn symmetrizes_small_defects() {
        let mut m = M::diagonal(&[2.0, 1.0]);
        m[(0, 1)] = c(1e-12, 0.0);
        let s = hermitian_eig(&m).unwrap();
        assert!((s.eigenvalues[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_spectrum() {
        let mut m = M::identity(16).scale_real(0.25);
        m[(3, 3)] = c(-1.0, 0.0);
        let s = hermitian_eig(&m).unwrap();
        assert_eq!(s.min(), -1.0);
        assert!(s.reconstruct().max_abs_diff(&m) < 1e-14);
    }

    #[test]
    fn works_in_f32() {
        let m = ComplexMatrix::<f32>::from_real_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let s = hermitian_eig(&m).unwrap();
        assert!((s.eigenvalues[0] - 3.0).abs() < 1e-5);
        assert!((s.eigenvalues[1] - 1.0).abs() < 1e-5);
    }
}

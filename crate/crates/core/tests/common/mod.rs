#![allow(dead_code)]

use num_complex::Complex;
use preentangle::qmath::{tensor, ComplexMatrix, DensityMatrix};
use preentangle::states::bloch_to_ket;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn random_hermitian(rng: &mut impl Rng, dim: usize) -> ComplexMatrix<f64> {
    let mut m = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        m[(i, i)] = Complex::new(rng.random_range(-1.0..1.0), 0.0);
        for j in i + 1..dim {
            let z = Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// `G G† / tr(G G†)` with Gaussian entries; full rank almost surely.
pub fn random_density(rng: &mut impl Rng, dim: usize) -> DensityMatrix<f64> {
    let mut g = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            g[(i, j)] = Complex::new(normal(rng), normal(rng));
        }
    }
    let m = g.matmul(&g.adjoint());
    let tr = m.trace().re;
    DensityMatrix::new(m.scale_real(1.0 / tr)).expect("valid density")
}

/// Rank-`rank` mixture: random pure states with random weights.
pub fn random_low_rank_density(rng: &mut impl Rng, rank: usize) -> DensityMatrix<f64> {
    let mut m = ComplexMatrix::zeros(4);
    let mut total = 0.0;
    for _ in 0..rank {
        let mut v: Vec<Complex<f64>> = (0..4)
            .map(|_| Complex::new(normal(rng), normal(rng)))
            .collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= norm);
        let w: f64 = rng.random_range(0.05..1.0);
        total += w;
        m = &m + &ComplexMatrix::outer(&v, &v).scale_real(w);
    }
    DensityMatrix::new(m.scale_real(1.0 / total)).expect("valid density")
}

/// Mixture of `k` random pure product states.
pub fn random_separable(rng: &mut impl Rng, k: usize) -> DensityMatrix<f64> {
    let mut m = ComplexMatrix::zeros(4);
    let mut total = 0.0;
    for _ in 0..k {
        let a = bloch_to_ket::<f64>(
            rng.random_range(0.0..std::f64::consts::PI),
            rng.random_range(0.0..6.3),
        );
        let b = bloch_to_ket::<f64>(
            rng.random_range(0.0..std::f64::consts::PI),
            rng.random_range(0.0..6.3),
        );
        let w: f64 = rng.random_range(0.0..1.0);
        total += w;
        let prod = tensor(a.projector().matrix(), b.projector().matrix()).unwrap();
        m = &m + &prod.scale_real(w);
    }
    DensityMatrix::new(m.scale_real(1.0 / total)).expect("valid density")
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

//! Kets, projectors, Pauli observables, the Bell basis and preparation bases.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::qmath::{self, ComplexMatrix, QmathError};
use crate::scalar::{c, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("ket is not normalized (‖v‖ = {norm})")]
    NotNormalized { norm: f64 },
    #[error("preparation basis kets are not orthogonal (|⟨a|b⟩| = {overlap:e})")]
    NotOrthogonal { overlap: f64 },
    #[error("Bell index {0} out of range 0..4")]
    BellIndex(usize),
    #[error(transparent)]
    Qmath(#[from] QmathError),
}

/// Normalized state vector, stored with its first non-zero amplitude real
/// and non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket<T> {
    amplitudes: Vec<Complex<T>>,
}

impl<T: Scalar> Ket<T> {
    pub fn new(amplitudes: Vec<Complex<T>>) -> Result<Self, StateError> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if (norm - T::one()).abs() > T::lit(T::UNIT_TOL) {
            return Err(StateError::NotNormalized {
                norm: norm.as_f64(),
            });
        }
        Ok(Self {
            amplitudes: qmath::canonical_phase(amplitudes),
        })
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amplitudes = vec![Complex::zero(); dim];
        amplitudes[index] = Complex::new(T::one(), T::zero());
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Ket<T>) -> Complex<T> {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn tensor(&self, other: &Ket<T>) -> Ket<T> {
        Ket {
            amplitudes: qmath::tensor_vec(&self.amplitudes, &other.amplitudes),
        }
    }

    /// `|v⟩⟨v|`
    pub fn projector(&self) -> Projector<T> {
        Projector {
            matrix: ComplexMatrix::outer(&self.amplitudes, &self.amplitudes),
            rank: 1,
        }
    }
}

/// `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩`
pub fn bloch_to_ket<T: Scalar>(theta: T, phi: T) -> Ket<T> {
    let half = theta * T::lit(0.5);
    let a = Complex::new(half.cos(), T::zero());
    let b = Complex::from_polar(half.sin(), phi);
    Ket {
        amplitudes: qmath::canonical_phase(vec![a, b]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    pub fn index(self) -> usize {
        match self {
            PauliAxis::X => 0,
            PauliAxis::Y => 1,
            PauliAxis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for PauliAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for PauliAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "X" | "x" => Ok(PauliAxis::X),
            "Y" | "y" => Ok(PauliAxis::Y),
            "Z" | "z" => Ok(PauliAxis::Z),
            other => Err(format!("unknown Pauli axis `{other}`")),
        }
    }
}

/// Eigenvalue of a Pauli measurement; serialized as `+1` / `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub const BOTH: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

    pub fn index(self) -> usize {
        match self {
            Outcome::Plus => 0,
            Outcome::Minus => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }

    pub fn value(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Plus => "+",
            Outcome::Minus => "-",
        })
    }
}

impl Serialize for Outcome {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i8(self.value())
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match i8::deserialize(d)? {
            1 => Ok(Outcome::Plus),
            -1 => Ok(Outcome::Minus),
            other => Err(serde::de::Error::custom(format!(
                "outcome must be +1 or -1, got {other}"
            ))),
        }
    }
}

pub fn pauli_matrix<T: Scalar>(axis: PauliAxis) -> ComplexMatrix<T> {
    match axis {
        PauliAxis::X => ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]),
        PauliAxis::Y => {
            ComplexMatrix::from_rows(&[&[c(0.0, 0.0), c(0.0, -1.0)], &[c(0.0, 1.0), c(0.0, 0.0)]])
        }
        PauliAxis::Z => ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]),
    }
}

/// `|i±⟩` with `σᵢ|i±⟩ = ±|i±⟩`.
pub fn pauli_eigenket<T: Scalar>(axis: PauliAxis, sign: Outcome) -> Ket<T> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let amplitudes = match (axis, sign) {
        (PauliAxis::Z, Outcome::Plus) => vec![c(1.0, 0.0), c(0.0, 0.0)],
        (PauliAxis::Z, Outcome::Minus) => vec![c(0.0, 0.0), c(1.0, 0.0)],
        (PauliAxis::X, Outcome::Plus) => vec![c(h, 0.0), c(h, 0.0)],
        (PauliAxis::X, Outcome::Minus) => vec![c(h, 0.0), c(-h, 0.0)],
        (PauliAxis::Y, Outcome::Plus) => vec![c(h, 0.0), c(0.0, h)],
        (PauliAxis::Y, Outcome::Minus) => vec![c(h, 0.0), c(0.0, -h)],
    };
    Ket { amplitudes }
}

/// Orthogonal projector with its rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector<T> {
    matrix: ComplexMatrix<T>,
    rank: usize,
}

impl<T: Scalar> Projector<T> {
    /// Validate idempotence, Hermiticity and `tr P = rank`.
    pub fn new(matrix: ComplexMatrix<T>) -> Result<Self, StateError> {
        let tol = T::lit(T::HERMITIAN_TOL);
        if !matrix.is_hermitian(tol) {
            return Err(QmathError::NotHermitian {
                defect: matrix.hermitian_defect().as_f64(),
            }
            .into());
        }
        let defect = (&matrix.matmul(&matrix) - &matrix).frobenius_norm();
        if defect > tol {
            return Err(QmathError::NotDensity(format!("not idempotent ({defect})")).into());
        }
        let rank = matrix.trace().re.round().to_usize().unwrap_or(0);
        Ok(Self { matrix, rank })
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Lift onto `n_qubits`, acting on consecutive qubits from `first`.
    pub fn embed(&self, first: usize, n_qubits: usize) -> Result<Projector<T>, QmathError> {
        let matrix = qmath::embed(&self.matrix, first, n_qubits)?;
        let rank = self.rank << (n_qubits - (self.matrix.dim().trailing_zeros() as usize));
        Ok(Projector { matrix, rank })
    }
}

pub fn pauli_projector<T: Scalar>(axis: PauliAxis, sign: Outcome) -> Projector<T> {
    pauli_eigenket(axis, sign).projector()
}

/// `[P₊, P₋]` for a Pauli axis, indexed by [`Outcome::index`].
pub fn pauli_projectors<T: Scalar>(axis: PauliAxis) -> Vec<Projector<T>> {
    Outcome::BOTH
        .iter()
        .map(|&s| pauli_projector(axis, s))
        .collect()
}

/// Eigenstates of the entangling observable, indexed 0..4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellState {
    pub const ALL: [BellState; 4] = [
        BellState::PhiPlus,
        BellState::PhiMinus,
        BellState::PsiPlus,
        BellState::PsiMinus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(n: usize) -> Result<Self, StateError> {
        Self::ALL.get(n).copied().ok_or(StateError::BellIndex(n))
    }

    /// Diagonal of the correlation matrix `T_ii = ⟨σᵢ⊗σᵢ⟩`.
    pub fn correlations(self) -> [i8; 3] {
        match self {
            BellState::PhiPlus => [1, -1, 1],
            BellState::PhiMinus => [-1, 1, 1],
            BellState::PsiPlus => [1, 1, -1],
            BellState::PsiMinus => [-1, -1, -1],
        }
    }
}

impl fmt::Display for BellState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for BellState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "PhiPlus" | "0" => Ok(BellState::PhiPlus),
            "PhiMinus" | "1" => Ok(BellState::PhiMinus),
            "PsiPlus" | "2" => Ok(BellState::PsiPlus),
            "PsiMinus" | "3" => Ok(BellState::PsiMinus),
            other => Err(format!("unknown Bell state `{other}`")),
        }
    }
}

pub fn bell_state<T: Scalar>(which: BellState) -> Ket<T> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (a, b, s) = match which {
        BellState::PhiPlus => (0, 3, 1.0),
        BellState::PhiMinus => (0, 3, -1.0),
        BellState::PsiPlus => (1, 2, 1.0),
        BellState::PsiMinus => (1, 2, -1.0),
    };
    let mut amplitudes = vec![Complex::zero(); 4];
    amplitudes[a] = c(h, 0.0);
    amplitudes[b] = c(s * h, 0.0);
    Ket { amplitudes }
}

pub fn bell_projectors<T: Scalar>() -> Vec<Projector<T>> {
    BellState::ALL
        .iter()
        .map(|&b| bell_state(b).projector())
        .collect()
}

/// Preparation record label within a basis; serialized as `1` / `2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PrepLabel {
    One,
    Two,
}

impl PrepLabel {
    pub const BOTH: [PrepLabel; 2] = [PrepLabel::One, PrepLabel::Two];

    pub fn index(self) -> usize {
        match self {
            PrepLabel::One => 0,
            PrepLabel::Two => 1,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }
}

impl fmt::Display for PrepLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for PrepLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "1" => Ok(PrepLabel::One),
            "2" => Ok(PrepLabel::Two),
            other => Err(format!("preparation label must be 1 or 2, got `{other}`")),
        }
    }
}

impl Serialize for PrepLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.number())
    }
}

impl<'de> Deserialize<'de> for PrepLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match u8::deserialize(d)? {
            1 => Ok(PrepLabel::One),
            2 => Ok(PrepLabel::Two),
            other => Err(serde::de::Error::custom(format!(
                "preparation label must be 1 or 2, got {other}"
            ))),
        }
    }
}

/// Direction on the Bloch sphere, in radians. Used in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochDirection {
    pub theta: f64,
    pub phi: f64,
}

impl BlochDirection {
    pub const Z_PLUS: BlochDirection = BlochDirection {
        theta: 0.0,
        phi: 0.0,
    };
    pub const X_PLUS: BlochDirection = BlochDirection {
        theta: std::f64::consts::FRAC_PI_2,
        phi: 0.0,
    };
}

/// Two orthonormal single-qubit kets, labelled 1 and 2.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparationBasis<T> {
    kets: [Ket<T>; 2],
}

impl<T: Scalar> PreparationBasis<T> {
    pub fn new(first: Ket<T>, second: Ket<T>) -> Result<Self, StateError> {
        let overlap = first.inner(&second).norm();
        if first.dim() != 2 || second.dim() != 2 || overlap > T::lit(T::UNIT_TOL) {
            return Err(StateError::NotOrthogonal {
                overlap: overlap.as_f64(),
            });
        }
        Ok(Self {
            kets: [first, second],
        })
    }

    /// Label 1 points along `dir`, label 2 along the antipode.
    pub fn from_bloch(dir: BlochDirection) -> Self {
        let theta = T::lit(dir.theta);
        let phi = T::lit(dir.phi);
        let first = bloch_to_ket(theta, phi);
        let second = bloch_to_ket(T::PI() - theta, phi + T::PI());
        Self {
            kets: [first, second],
        }
    }

    pub fn computational() -> Self {
        Self::from_bloch(BlochDirection::Z_PLUS)
    }

    pub fn ket(&self, label: PrepLabel) -> &Ket<T> {
        &self.kets[label.index()]
    }
}

//! The experiment engine: sources, tomography measurements before and after
//! a Bell measurement, and the D-CES and PBR-style variants.
//!
//! Every random choice in a run is drawn from a counter-based stream keyed by
//! `(master_seed, run_id, draw slot)`, so the record list does not depend on
//! how runs are scheduled across threads.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qmath::{ComplexMatrix, DensityMatrix, QmathError};
use crate::scalar::Scalar;
use crate::states::{
    bell_projectors, bell_state, pauli_projectors, BellState, BlochDirection, Ket, Outcome,
    PauliAxis, PrepLabel, PreparationBasis, Projector, StateError,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("projectors do not sum to the identity (deviation {deviation:e})")]
    IncompleteProjectors { deviation: f64 },
    #[error("state has no support on any measurement outcome")]
    InvalidState,
    #[error(transparent)]
    Qmath(#[from] QmathError),
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Two independent maximally-mixed sources (the basic experiment).
    #[default]
    Standard,
    /// Each source first picks one of two bases, then a label within it.
    Pbr,
    /// Two singlet pairs; the inner qubits go to the Bell measurement.
    Dces,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Standard => "standard",
            Scenario::Pbr => "pbr",
            Scenario::Dces => "dces",
        })
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "standard" => Ok(Scenario::Standard),
            "pbr" | "pbrvariant" => Ok(Scenario::Pbr),
            "dces" => Ok(Scenario::Dces),
            other => Err(format!(
                "unknown scenario `{other}` (expected standard, pbr or dces)"
            )),
        }
    }
}

fn default_axes() -> Vec<PauliAxis> {
    PauliAxis::ALL.to_vec()
}

fn default_basis() -> BlochDirection {
    BlochDirection::Z_PLUS
}

fn default_pbr_bases() -> [BlochDirection; 2] {
    [BlochDirection::Z_PLUS, BlochDirection::X_PLUS]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_runs: u64,
    pub master_seed: u64,
    /// Direction of Alice's label-1 state; label 2 is the antipode.
    #[serde(default = "default_basis")]
    pub alice_basis: BlochDirection,
    #[serde(default = "default_basis")]
    pub bob_basis: BlochDirection,
    /// `ψ₀` and `ψ₁` for the PBR scenario, shared by both sources.
    #[serde(default = "default_pbr_bases")]
    pub pbr_bases: [BlochDirection; 2],
    #[serde(default = "default_axes")]
    pub tomography_axes: Vec<PauliAxis>,
    #[serde(default)]
    pub scenario: Scenario,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario, n_runs: u64, master_seed: u64) -> Self {
        Self {
            n_runs,
            master_seed,
            alice_basis: default_basis(),
            bob_basis: default_basis(),
            pbr_bases: default_pbr_bases(),
            tomography_axes: default_axes(),
            scenario,
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.n_runs == 0 {
            return Err(ProtocolError::InvalidConfig {
                field: "nRuns",
                reason: "must be at least 1".into(),
            });
        }
        if self.tomography_axes.is_empty() {
            return Err(ProtocolError::InvalidConfig {
                field: "tomographyAxes",
                reason: "must name at least one axis".into(),
            });
        }
        let mut axes = self.tomography_axes.clone();
        axes.sort();
        axes.dedup();
        if axes.len() != self.tomography_axes.len() {
            return Err(ProtocolError::InvalidConfig {
                field: "tomographyAxes",
                reason: "axes must be distinct".into(),
            });
        }
        let directions = [
            ("aliceBasis", self.alice_basis),
            ("bobBasis", self.bob_basis),
            ("pbrBases", self.pbr_bases[0]),
            ("pbrBases", self.pbr_bases[1]),
        ];
        for (field, dir) in directions {
            if !dir.theta.is_finite() || !dir.phi.is_finite() {
                return Err(ProtocolError::InvalidConfig {
                    field,
                    reason: "angles must be finite".into(),
                });
            }
        }
        Ok(())
    }
}

/// Position of a draw within a run's random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum DrawSlot {
    AliceLabel = 0,
    BobLabel = 1,
    PaAxis = 2,
    PaOutcome = 3,
    PbAxis = 4,
    PbOutcome = 5,
    BellOutcome = 6,
    RcAxis = 7,
    RcOutcome = 8,
    RdAxis = 9,
    RdOutcome = 10,
    AliceBasis = 11,
    BobBasis = 12,
}

/// Counter-based uniform stream for one run: ChaCha8 keyed by the master
/// seed, stream id = run id, word position = draw slot.
#[derive(Clone)]
pub struct RngStream {
    base: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, run_id: u64) -> Self {
        let mut base = ChaCha8Rng::seed_from_u64(master_seed);
        base.set_stream(run_id);
        Self { base }
    }

    /// Uniform in `[0, 1)`; a pure function of `(seed, run_id, slot)`.
    pub fn uniform(&self, slot: DrawSlot) -> f64 {
        let mut rng = self.base.clone();
        // one f64 consumes two 32-bit words
        rng.set_word_pos(u128::from(slot as u64) * 2);
        rng.random::<f64>()
    }

    fn pick<U: Copy>(&self, slot: DrawSlot, items: &[U]) -> U {
        let k = (self.uniform(slot) * items.len() as f64) as usize;
        items[k.min(items.len() - 1)]
    }
}

/// A complete set of orthogonal projectors on one register.
#[derive(Debug, Clone)]
pub struct ProjectiveMeasurement<T> {
    projectors: Vec<Projector<T>>,
}

impl<T: Scalar> ProjectiveMeasurement<T> {
    pub fn new(projectors: Vec<Projector<T>>) -> Result<Self, ProtocolError> {
        let dim = projectors
            .first()
            .map(|p| p.matrix().dim())
            .ok_or(ProtocolError::IncompleteProjectors { deviation: 1.0 })?;
        let mut sum = ComplexMatrix::zeros(dim);
        for p in &projectors {
            if p.matrix().dim() != dim {
                return Err(QmathError::DimensionMismatch {
                    expected: dim,
                    found: p.matrix().dim(),
                }
                .into());
            }
            sum = &sum + p.matrix();
        }
        let deviation = (&sum - &ComplexMatrix::identity(dim)).frobenius_norm();
        if deviation > T::lit(T::HERMITIAN_TOL) {
            return Err(ProtocolError::IncompleteProjectors {
                deviation: deviation.as_f64(),
            });
        }
        Ok(Self { projectors })
    }

    pub fn projectors(&self) -> &[Projector<T>] {
        &self.projectors
    }

    /// Born probabilities `tr(Πₖ ρ)`, with values below `1e-14` zeroed.
    pub fn probabilities(&self, state: &DensityMatrix<T>) -> Vec<T> {
        let floor = T::lit(1e-14);
        self.projectors
            .iter()
            .map(|p| {
                let pk = p.matrix().trace_product(state.matrix()).re;
                if pk < floor {
                    T::zero()
                } else {
                    pk
                }
            })
            .collect()
    }
}

/// Sample an outcome with `u ∈ [0,1)` and collapse.
pub fn measure_with_uniform<T: Scalar>(
    state: &DensityMatrix<T>,
    measurement: &ProjectiveMeasurement<T>,
    u: f64,
) -> Result<(usize, DensityMatrix<T>), ProtocolError> {
    let probs = measurement.probabilities(state);
    let total: T = probs.iter().copied().sum();
    if total < T::lit(1e-14) {
        return Err(ProtocolError::InvalidState);
    }
    let target = T::lit(u) * total;
    let mut acc = T::zero();
    let mut chosen = None;
    let mut last_supported = 0;
    for (k, &pk) in probs.iter().enumerate() {
        if pk.is_zero() {
            continue;
        }
        last_supported = k;
        acc = acc + pk;
        if target < acc {
            chosen = Some(k);
            break;
        }
    }
    let k = chosen.unwrap_or(last_supported);
    let projector = measurement.projectors[k].matrix();
    let collapsed = ComplexMatrix::sandwich_hermitian(projector, state.matrix())
        .scale_real(T::one() / probs[k]);
    Ok((k, DensityMatrix::new_unchecked(collapsed.hermitian_part())))
}

/// Projective measurement with the Born rule, drawing from `rng` at `slot`.
pub fn measure_projective<T: Scalar>(
    state: &DensityMatrix<T>,
    measurement: &ProjectiveMeasurement<T>,
    rng: &RngStream,
    slot: DrawSlot,
) -> Result<(usize, DensityMatrix<T>), ProtocolError> {
    measure_with_uniform(state, measurement, rng.uniform(slot))
}

/// Bell-basis measurement of a two-qubit state.
pub fn bell_measure<T: Scalar>(
    pair_state: &DensityMatrix<T>,
    rng: &RngStream,
) -> Result<(BellState, DensityMatrix<T>), ProtocolError> {
    if pair_state.dim() != 4 {
        return Err(QmathError::DimensionMismatch {
            expected: 4,
            found: pair_state.dim(),
        }
        .into());
    }
    let measurement = ProjectiveMeasurement::new(bell_projectors())?;
    let (k, post) = measure_projective(pair_state, &measurement, rng, DrawSlot::BellOutcome)?;
    Ok((BellState::from_index(k)?, post))
}

/// One line of the run log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunRecord {
    pub run_id: u64,
    /// Basis index (0 or 1) chosen by Alice in the PBR scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alice_basis: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bob_basis: Option<u8>,
    /// Absent in the D-CES scenario, which has no preparation step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alice_label: Option<PrepLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bob_label: Option<PrepLabel>,
    pub p_a_axis: PauliAxis,
    pub p_a_out: Outcome,
    pub p_b_axis: PauliAxis,
    pub p_b_out: Outcome,
    pub q_out: BellState,
    pub r_c_axis: PauliAxis,
    pub r_c_out: Outcome,
    pub r_d_axis: PauliAxis,
    pub r_d_out: Outcome,
}

/// States passed through during one run, for inspection in tests.
#[derive(Debug, Clone)]
pub struct RunTrace<T> {
    pub prepared: DensityMatrix<T>,
    /// State entering the Bell measurement.
    pub before_bell: DensityMatrix<T>,
    pub after_bell: DensityMatrix<T>,
    pub after_r: DensityMatrix<T>,
}

struct Site<T> {
    by_axis: [ProjectiveMeasurement<T>; 3],
}

impl<T: Scalar> Site<T> {
    fn new(qubit: usize, n_qubits: usize) -> Result<Self, ProtocolError> {
        let make = |axis| -> Result<ProjectiveMeasurement<T>, ProtocolError> {
            let ps = pauli_projectors::<T>(axis)
                .iter()
                .map(|p| p.embed(qubit, n_qubits))
                .collect::<Result<Vec<_>, _>>()?;
            ProjectiveMeasurement::new(ps)
        };
        Ok(Self {
            by_axis: [
                make(PauliAxis::X)?,
                make(PauliAxis::Y)?,
                make(PauliAxis::Z)?,
            ],
        })
    }

    fn get(&self, axis: PauliAxis) -> &ProjectiveMeasurement<T> {
        &self.by_axis[axis.index()]
    }
}

/// Pre-built measurement operators for one scenario.
pub struct Apparatus<T> {
    config: ExperimentConfig,
    alice: PreparationBasis<T>,
    bob: PreparationBasis<T>,
    pbr: [PreparationBasis<T>; 2],
    left: Site<T>,
    right: Site<T>,
    bell: ProjectiveMeasurement<T>,
    dces_initial: Option<DensityMatrix<T>>,
}

impl<T: Scalar> Apparatus<T> {
    pub fn new(config: &ExperimentConfig) -> Result<Self, ProtocolError> {
        config.validate()?;
        let (n_qubits, left_q, right_q, bell_first) = match config.scenario {
            Scenario::Standard | Scenario::Pbr => (2, 0, 1, 0),
            // A1, A2, B1, B2: P/R act on A1 and B2, Q on (A2, B1)
            Scenario::Dces => (4, 0, 3, 1),
        };
        let bell = bell_projectors::<T>()
            .iter()
            .map(|p| p.embed(bell_first, n_qubits))
            .collect::<Result<Vec<_>, _>>()?;
        let dces_initial = match config.scenario {
            Scenario::Dces => {
                let singlet = bell_state::<T>(BellState::PsiMinus);
                Some(DensityMatrix::pure(singlet.tensor(&singlet).amplitudes()))
            }
            _ => None,
        };
        Ok(Self {
            config: config.clone(),
            alice: PreparationBasis::from_bloch(config.alice_basis),
            bob: PreparationBasis::from_bloch(config.bob_basis),
            pbr: [
                PreparationBasis::from_bloch(config.pbr_bases[0]),
                PreparationBasis::from_bloch(config.pbr_bases[1]),
            ],
            left: Site::new(left_q, n_qubits)?,
            right: Site::new(right_q, n_qubits)?,
            bell: ProjectiveMeasurement::new(bell)?,
            dces_initial,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    /// Single-qubit ket for a recorded preparation.
    pub fn prepared_ket(&self, party: Party, basis: Option<u8>, label: PrepLabel) -> &Ket<T> {
        match (self.config.scenario, basis) {
            (Scenario::Pbr, Some(b)) => self.pbr[usize::from(b.min(1))].ket(label),
            _ => match party {
                Party::Alice => self.alice.ket(label),
                Party::Bob => self.bob.ket(label),
            },
        }
    }

    pub fn run(&self, run_id: u64) -> Result<RunRecord, ProtocolError> {
        self.run_inner(run_id, None)
    }

    pub fn run_traced(&self, run_id: u64) -> Result<(RunRecord, RunTrace<T>), ProtocolError> {
        let mut trace = None;
        let record = self.run_inner(run_id, Some(&mut trace))?;
        Ok((record, trace.expect("trace filled")))
    }

    fn run_inner(
        &self,
        run_id: u64,
        trace: Option<&mut Option<RunTrace<T>>>,
    ) -> Result<RunRecord, ProtocolError> {
        let rng = RngStream::new(self.config.master_seed, run_id);
        let axes = &self.config.tomography_axes;
        let labels = PrepLabel::BOTH;

        let (alice_basis, bob_basis) = match self.config.scenario {
            Scenario::Pbr => (
                Some(rng.pick(DrawSlot::AliceBasis, &[0u8, 1])),
                Some(rng.pick(DrawSlot::BobBasis, &[0u8, 1])),
            ),
            _ => (None, None),
        };
        let (alice_label, bob_label, prepared) = match &self.dces_initial {
            Some(initial) => (None, None, initial.clone()),
            None => {
                let la = rng.pick(DrawSlot::AliceLabel, &labels);
                let lb = rng.pick(DrawSlot::BobLabel, &labels);
                let ket = self
                    .prepared_ket(Party::Alice, alice_basis, la)
                    .tensor(self.prepared_ket(Party::Bob, bob_basis, lb));
                (Some(la), Some(lb), DensityMatrix::pure(ket.amplitudes()))
            }
        };

        let p_a_axis = rng.pick(DrawSlot::PaAxis, axes);
        let (k, state) = measure_projective(
            &prepared,
            self.left.get(p_a_axis),
            &rng,
            DrawSlot::PaOutcome,
        )?;
        let p_a_out = Outcome::from_index(k);
        let p_b_axis = rng.pick(DrawSlot::PbAxis, axes);
        let (k, before_bell) =
            measure_projective(&state, self.right.get(p_b_axis), &rng, DrawSlot::PbOutcome)?;
        let p_b_out = Outcome::from_index(k);

        let (k, after_bell) =
            measure_projective(&before_bell, &self.bell, &rng, DrawSlot::BellOutcome)?;
        let q_out = BellState::from_index(k)?;

        let r_c_axis = rng.pick(DrawSlot::RcAxis, axes);
        let (k, state) = measure_projective(
            &after_bell,
            self.left.get(r_c_axis),
            &rng,
            DrawSlot::RcOutcome,
        )?;
        let r_c_out = Outcome::from_index(k);
        let r_d_axis = rng.pick(DrawSlot::RdAxis, axes);
        let (k, after_r) =
            measure_projective(&state, self.right.get(r_d_axis), &rng, DrawSlot::RdOutcome)?;
        let r_d_out = Outcome::from_index(k);

        if let Some(slot) = trace {
            *slot = Some(RunTrace {
                prepared,
                before_bell,
                after_bell,
                after_r,
            });
        }

        Ok(RunRecord {
            run_id,
            alice_basis,
            bob_basis,
            alice_label,
            bob_label,
            p_a_axis,
            p_a_out,
            p_b_axis,
            p_b_out,
            q_out,
            r_c_axis,
            r_c_out,
            r_d_axis,
            r_d_out,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    Alice,
    Bob,
}

/// Simulate runs `0..n_runs` in parallel; output is in run-id order and
/// independent of the thread count.
pub fn run_experiment<T: Scalar>(
    config: &ExperimentConfig,
) -> Result<Vec<RunRecord>, ProtocolError> {
    let apparatus = Apparatus::<T>::new(config)?;
    (0..config.n_runs)
        .into_par_iter()
        .map(|i| apparatus.run(i))
        .collect()
}

/// Bell-outcome frequencies in `BellState::ALL` order.
pub fn bell_frequencies(records: &[RunRecord]) -> [f64; 4] {
    let mut counts = [0u64; 4];
    for r in records {
        counts[r.q_out.index()] += 1;
    }
    let n = records.len().max(1) as f64;
    counts.map(|c| c as f64 / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{partial_trace, tensor};
    use crate::states::{pauli_eigenket, PauliAxis};

    type D = DensityMatrix<f64>;

    fn z_meas() -> ProjectiveMeasurement<f64> {
        ProjectiveMeasurement::new(pauli_projectors(PauliAxis::Z)).unwrap()
    }

    #[test]
    fn eigenstate_measurement_is_certain() {
        let rho = D::pure(Ket::<f64>::basis(2, 0).amplitudes());
        for u in [0.0, 0.3, 0.999_999] {
            let (k, post) = measure_with_uniform(&rho, &z_meas(), u).unwrap();
            assert_eq!(k, 0);
            assert!(post.matrix().max_abs_diff(rho.matrix()) < 1e-15);
        }
    }

    #[test]
    fn maximally_mixed_probabilities() {
        let rho = D::maximally_mixed(2);
        let p = z_meas().probabilities(&rho);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        let (k, _) = measure_with_uniform(&rho, &z_meas(), 0.49).unwrap();
        assert_eq!(k, 0);
        let (k, _) = measure_with_uniform(&rho, &z_meas(), 0.51).unwrap();
        assert_eq!(k, 1);
    }

    #[test]
    fn x_measurement_of_zero() {
        let rho = D::pure(Ket::<f64>::basis(2, 0).amplitudes());
        let x = ProjectiveMeasurement::new(pauli_projectors(PauliAxis::X)).unwrap();
        let p = x.probabilities(&rho);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        let (k, post) = measure_with_uniform(&rho, &x, 0.7).unwrap();
        assert_eq!(k, 1);
        let want = D::pure(pauli_eigenket::<f64>(PauliAxis::X, Outcome::Minus).amplitudes());
        assert!(post.matrix().max_abs_diff(want.matrix()) < 1e-15);
    }

    #[test]
    fn zero_probability_outcome_never_sampled() {
        let rho = D::pure(Ket::<f64>::basis(2, 1).amplitudes());
        let (k, _) = measure_with_uniform(&rho, &z_meas(), 0.0).unwrap();
        assert_eq!(k, 1);
    }

    #[test]
    fn incomplete_projectors_rejected() {
        let only_plus = vec![pauli_projectors::<f64>(PauliAxis::Z).remove(0)];
        assert!(matches!(
            ProjectiveMeasurement::new(only_plus),
            Err(ProtocolError::IncompleteProjectors { .. })
        ));
    }

    #[test]
    fn bell_measure_probabilities() {
        let bell = ProjectiveMeasurement::<f64>::new(bell_projectors()).unwrap();
        let p = bell.probabilities(&D::pure(Ket::<f64>::basis(4, 0).amplitudes()));
        let want = [0.5, 0.5, 0.0, 0.0];
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let phi = D::pure(bell_state::<f64>(BellState::PhiPlus).amplitudes());
        let rng = RngStream::new(9, 9);
        let (b, post) = bell_measure(&phi, &rng).unwrap();
        assert_eq!(b, BellState::PhiPlus);
        assert!(post.matrix().max_abs_diff(phi.matrix()) < 1e-15);
        for pk in bell.probabilities(&D::maximally_mixed(4)) {
            assert!((pk - 0.25).abs() < 1e-15);
        }
        assert!(bell_measure(&D::maximally_mixed(2), &rng).is_err());
    }

    #[test]
    fn bell_post_state_is_the_bell_projector() {
        let mixed = D::maximally_mixed(4);
        for u in [0.1, 0.3, 0.6, 0.9] {
            let bell = ProjectiveMeasurement::<f64>::new(bell_projectors()).unwrap();
            let (k, post) = measure_with_uniform(&mixed, &bell, u).unwrap();
            let want = bell_state::<f64>(BellState::from_index(k).unwrap()).projector();
            assert!(post.matrix().max_abs_diff(want.matrix()) < 1e-15);
        }
    }

    #[test]
    fn rng_stream_is_counter_based() {
        let a = RngStream::new(7, 42);
        let b = RngStream::new(7, 42);
        assert_eq!(a.uniform(DrawSlot::PbAxis), b.uniform(DrawSlot::PbAxis));
        // order of evaluation does not matter
        let late = a.uniform(DrawSlot::RdOutcome);
        let _ = a.uniform(DrawSlot::AliceLabel);
        assert_eq!(late, b.uniform(DrawSlot::RdOutcome));
        assert_ne!(a.uniform(DrawSlot::PaAxis), a.uniform(DrawSlot::PaOutcome));
        assert_ne!(
            a.uniform(DrawSlot::PaAxis),
            RngStream::new(7, 43).uniform(DrawSlot::PaAxis)
        );
        assert_ne!(
            a.uniform(DrawSlot::PaAxis),
            RngStream::new(8, 42).uniform(DrawSlot::PaAxis)
        );
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::new(Scenario::Standard, 0, 1);
        assert!(matches!(
            cfg.validate(),
            Err(ProtocolError::InvalidConfig { field: "nRuns", .. })
        ));
        cfg.n_runs = 5;
        cfg.tomography_axes.clear();
        assert!(matches!(
            cfg.validate(),
            Err(ProtocolError::InvalidConfig {
                field: "tomographyAxes",
                ..
            })
        ));
        cfg.tomography_axes = vec![PauliAxis::X, PauliAxis::X];
        assert!(cfg.validate().is_err());
        cfg.tomography_axes = vec![PauliAxis::Z];
        cfg.alice_basis.theta = f64::NAN;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_json_defaults() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"nRuns": 10, "masterSeed": 3}"#).unwrap();
        assert_eq!(cfg, ExperimentConfig::new(Scenario::Standard, 10, 3));
        assert!(serde_json::from_str::<ExperimentConfig>(
            r#"{"nRuns": 10, "masterSeed": 3, "bogus": 1}"#
        )
        .is_err());
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"nRuns": 1, "masterSeed": 3, "scenario": "dces"}"#).unwrap();
        assert_eq!(cfg.scenario, Scenario::Dces);
    }

    #[test]
    fn standard_state_entering_bell_is_pure_product() {
        let app = Apparatus::<f64>::new(&ExperimentConfig::new(Scenario::Standard, 1, 5)).unwrap();
        for run in 0..200 {
            let (_, trace) = app.run_traced(run).unwrap();
            let rho = trace.before_bell.matrix();
            assert!((trace.before_bell.purity() - 1.0).abs() < 1e-12);
            let a = partial_trace(rho, &[0], &[2, 2]).unwrap();
            let b = partial_trace(rho, &[1], &[2, 2]).unwrap();
            assert!((a.trace_product(&a).re - 1.0).abs() < 1e-12);
            assert!((b.trace_product(&b).re - 1.0).abs() < 1e-12);
            assert!(tensor(&a, &b).unwrap().max_abs_diff(rho) < 1e-12);
        }
    }

    #[test]
    fn dces_records_have_no_labels() {
        let cfg = ExperimentConfig::new(Scenario::Dces, 20, 2);
        let records = run_experiment::<f64>(&cfg).unwrap();
        assert!(records
            .iter()
            .all(|r| r.alice_label.is_none() && r.alice_basis.is_none()));
        let app = Apparatus::<f64>::new(&cfg).unwrap();
        let (_, trace) = app.run_traced(3).unwrap();
        assert_eq!(trace.after_r.dim(), 16);
    }

    #[test]
    fn pbr_records_carry_basis_and_label() {
        let cfg = ExperimentConfig::new(Scenario::Pbr, 50, 2);
        let records = run_experiment::<f64>(&cfg).unwrap();
        assert!(records
            .iter()
            .all(|r| r.alice_basis.is_some() && r.bob_label.is_some()));
    }

    #[test]
    fn record_json_field_names() {
        let cfg = ExperimentConfig::new(Scenario::Standard, 1, 1);
        let r = &run_experiment::<f64>(&cfg).unwrap()[0];
        let v: serde_json::Value = serde_json::to_value(r).unwrap();
        for key in [
            "runId",
            "aliceLabel",
            "bobLabel",
            "pAAxis",
            "pAOut",
            "pBAxis",
            "pBOut",
            "qOut",
            "rCAxis",
            "rCOut",
            "rDAxis",
            "rDOut",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert!(v.get("aliceBasis").is_none());
    }

    #[test]
    fn f32_engine_runs() {
        let cfg = ExperimentConfig::new(Scenario::Standard, 100, 4);
        let records = run_experiment::<f32>(&cfg).unwrap();
        assert_eq!(records.len(), 100);
    }
}

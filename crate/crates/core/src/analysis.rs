//! Entanglement certification, the preparation-label ensemble state, the
//! closed-form conditional probabilities and the reports that put them side
//! by side.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::protocol::{Apparatus, ExperimentConfig, Party, ProtocolError, RunRecord, Scenario};
use crate::qmath::{
    self, hermitian_eig, partial_transpose, trace_distance, ComplexMatrix, DensityMatrix,
    HermitianSpectrum, QmathError,
};
use crate::scalar::Scalar;
use crate::states::{
    bell_state, pauli_matrix, pauli_projector, BellState, BlochDirection, Ket, Outcome, PauliAxis,
    PrepLabel, PreparationBasis,
};
use crate::tomography::{
    self, fidelity_pure, reconstruct, reconstruct_single_qubit, CorrelatorTable,
    JointProbabilities, ReconstructOptions, ReconstructionResult, SelectionCriterion,
    SingleQubitResult, Site, Stage, TomographyError,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("expected a two-qubit state, got dimension {0}")]
    NotTwoQubit(usize),
    #[error("empty selection for criterion `{criterion}`")]
    EmptySelection { criterion: String },
    #[error("run {run_id} has no preparation labels")]
    MissingLabels { run_id: u64 },
    #[error("records come from the {found} scenario, expected {expected}")]
    WrongScenario { expected: Scenario, found: Scenario },
    #[error(transparent)]
    Qmath(#[from] QmathError),
    #[error(transparent)]
    Tomography(#[from] TomographyError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

fn require_two_qubit<T: Scalar>(rho: &DensityMatrix<T>) -> Result<(), AnalysisError> {
    if rho.dim() != 4 {
        return Err(AnalysisError::NotTwoQubit(rho.dim()));
    }
    Ok(())
}

/// Spectrum of `ρ^{T_B}`.
pub fn partial_transpose_spectrum<T: Scalar>(
    rho: &DensityMatrix<T>,
) -> Result<HermitianSpectrum<T>, AnalysisError> {
    require_two_qubit(rho)?;
    Ok(hermitian_eig(&partial_transpose(
        rho.matrix(),
        1,
        &[2, 2],
    )?)?)
}

pub fn ppt_min_eigenvalue<T: Scalar>(rho: &DensityMatrix<T>) -> Result<T, AnalysisError> {
    Ok(partial_transpose_spectrum(rho)?.min())
}

/// `Σ max(0, −λᵢ)` over the partial-transpose spectrum.
pub fn negativity<T: Scalar>(rho: &DensityMatrix<T>) -> Result<T, AnalysisError> {
    Ok(partial_transpose_spectrum(rho)?
        .eigenvalues
        .iter()
        .map(|&l| (-l).max(T::zero()))
        .sum())
}

/// Wootters concurrence. The eigenvalues of `ρ ρ̃` are taken from the
/// Hermitian form `√ρ ρ̃ √ρ`, which has the same spectrum.
pub fn concurrence<T: Scalar>(rho: &DensityMatrix<T>) -> Result<T, AnalysisError> {
    require_two_qubit(rho)?;
    let sy = pauli_matrix::<T>(PauliAxis::Y);
    let yy = qmath::tensor(&sy, &sy)?;
    let tilde = yy.matmul(&rho.matrix().conj()).matmul(&yy);
    let sqrt_rho = hermitian_eig(rho.matrix())?.rebuild(|l| l.max(T::zero()).sqrt());
    let m = sqrt_rho.matmul(&tilde).matmul(&sqrt_rho);
    let mu = hermitian_eig(&m.hermitian_part())?.eigenvalues;
    let r: Vec<T> = mu.iter().map(|&x| x.max(T::zero()).sqrt()).collect();
    Ok((r[0] - r[1] - r[2] - r[3]).max(T::zero()))
}

/// `T_ij = tr(ρ σᵢ⊗σⱼ)` for `i, j ∈ {X, Y, Z}`.
pub fn correlation_matrix<T: Scalar>(rho: &DensityMatrix<T>) -> Result<[[T; 3]; 3], AnalysisError> {
    require_two_qubit(rho)?;
    let mut t = [[T::zero(); 3]; 3];
    for a in PauliAxis::ALL {
        for b in PauliAxis::ALL {
            let op = qmath::tensor(&pauli_matrix::<T>(a), &pauli_matrix::<T>(b))?;
            t[a.index()][b.index()] = op.trace_product(rho.matrix()).re;
        }
    }
    Ok(t)
}

/// Largest CHSH value over all settings: `2√(t₁ + t₂)` with `t₁ ≥ t₂` the
/// top eigenvalues of `TᵀT`.
pub fn chsh_max<T: Scalar>(rho: &DensityMatrix<T>) -> Result<T, AnalysisError> {
    let t = correlation_matrix(rho)?;
    let mut ttt = ComplexMatrix::zeros(3);
    for i in 0..3 {
        for j in 0..3 {
            let v: T = (0..3).map(|k| t[k][i] * t[k][j]).sum();
            ttt[(i, j)] = Complex::new(v, T::zero());
        }
    }
    let ev = hermitian_eig(&ttt)?.eigenvalues;
    Ok(T::lit(2.0) * (ev[0] + ev[1]).max(T::zero()).sqrt())
}

/// First-order standard error of the smallest partial-transpose eigenvalue
/// given standard errors on the 16 Pauli coefficients of `ρ`.
pub fn pt_min_standard_error<T: Scalar>(
    rho: &DensityMatrix<T>,
    se: &CorrelatorTable<T>,
) -> Result<T, AnalysisError> {
    let spectrum = partial_transpose_spectrum(rho)?;
    let v = spectrum.eigenvectors.last().expect("non-empty");
    let basis = |i: usize| -> ComplexMatrix<T> {
        match i {
            0 => ComplexMatrix::identity(2),
            k => pauli_matrix(PauliAxis::from_index(k - 1).expect("axis")),
        }
    };
    let mut var = T::zero();
    for (i, row) in se.iter().enumerate() {
        for (j, &s) in row.iter().enumerate() {
            if (i == 0 && j == 0) || s.is_zero() {
                continue;
            }
            // ∂λ/∂t_ij = ¼ ⟨v| σᵢ ⊗ σⱼᵀ |v⟩
            let op = qmath::tensor(&basis(i), &basis(j).transpose())?;
            let d = op.expectation(v).re * T::lit(0.25);
            var = var + d * d * s * s;
        }
    }
    Ok(var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    EntangledNpt,
    SeparablePptConsistent,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::EntangledNpt => "Entangled-NPT",
            Verdict::SeparablePptConsistent => "Separable-PPT-consistent",
        })
    }
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Smallest margin below zero that counts as a negative PT eigenvalue.
pub const MIN_NPT_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CertificationReport<T: Scalar> {
    /// Descending.
    pub pt_spectrum: Vec<T>,
    pub min_pt_eigenvalue: T,
    pub negativity: T,
    pub concurrence: T,
    pub chsh_max: T,
    pub pt_standard_error: T,
    /// `max(3·SE, 1e-6)`; NPT requires the minimum PT eigenvalue below `−threshold`.
    pub threshold: T,
    pub verdict: Verdict,
}

/// Certify a two-qubit state. With `se` the verdict accounts for sampling
/// error on the reconstructed correlators.
pub fn certify<T: Scalar>(
    rho: &DensityMatrix<T>,
    se: Option<&CorrelatorTable<T>>,
) -> Result<CertificationReport<T>, AnalysisError> {
    let spectrum = partial_transpose_spectrum(rho)?;
    let min = spectrum.min();
    let negativity = spectrum
        .eigenvalues
        .iter()
        .map(|&l| (-l).max(T::zero()))
        .sum();
    let pt_standard_error = match se {
        Some(se) => pt_min_standard_error(rho, se)?,
        None => T::zero(),
    };
    let threshold = (T::lit(3.0) * pt_standard_error).max(T::lit(MIN_NPT_MARGIN));
    let verdict = if min < -threshold {
        Verdict::EntangledNpt
    } else {
        Verdict::SeparablePptConsistent
    };
    Ok(CertificationReport {
        pt_spectrum: spectrum.eigenvalues,
        min_pt_eigenvalue: min,
        negativity,
        concurrence: concurrence(rho)?,
        chsh_max: chsh_max(rho)?,
        pt_standard_error,
        threshold,
        verdict,
    })
}

/// Which recorded preparation a qubit came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrepKey {
    pub basis: Option<u8>,
    pub label: PrepLabel,
}

impl fmt::Display for PrepKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.basis {
            Some(b) => write!(f, "b{b}:{}", self.label),
            None => write!(f, "{}", self.label),
        }
    }
}

impl Serialize for PrepKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct LabelWeight {
    pub alice: PrepKey,
    pub bob: PrepKey,
    pub count: u64,
    pub frequency: f64,
}

fn prep_keys(r: &RunRecord) -> Result<(PrepKey, PrepKey), AnalysisError> {
    match (r.alice_label, r.bob_label) {
        (Some(la), Some(lb)) => Ok((
            PrepKey {
                basis: r.alice_basis,
                label: la,
            },
            PrepKey {
                basis: r.bob_basis,
                label: lb,
            },
        )),
        _ => Err(AnalysisError::MissingLabels { run_id: r.run_id }),
    }
}

/// `(1/N_η) Σ_{i∈η} |ψ_{mᵢ}⟩⟨ψ_{mᵢ}| ⊗ |φ_{mᵢ}⟩⟨φ_{mᵢ}|` from the recorded
/// labels, with the empirical label-pair frequencies.
pub fn ensemble_state_from_preps<T: Scalar>(
    records: &[RunRecord],
    config: &ExperimentConfig,
    criterion: &SelectionCriterion,
) -> Result<(DensityMatrix<T>, Vec<LabelWeight>), AnalysisError> {
    let apparatus = Apparatus::<T>::new(config)?;
    let mut tally: BTreeMap<(PrepKey, PrepKey), u64> = BTreeMap::new();
    for r in criterion.select(records) {
        *tally.entry(prep_keys(r)?).or_default() += 1;
    }
    let n: u64 = tally.values().sum();
    if n == 0 {
        return Err(AnalysisError::EmptySelection {
            criterion: criterion.to_string(),
        });
    }
    let mut rho = ComplexMatrix::zeros(4);
    let mut weights = Vec::with_capacity(tally.len());
    for (&(ka, kb), &count) in &tally {
        let ket = apparatus
            .prepared_ket(Party::Alice, ka.basis, ka.label)
            .tensor(apparatus.prepared_ket(Party::Bob, kb.basis, kb.label));
        let w = T::from_u64(count).unwrap() / T::from_u64(n).unwrap();
        rho = &rho + &ket.projector().matrix().scale_real(w);
        weights.push(LabelWeight {
            alice: ka,
            bob: kb,
            count,
            frequency: count as f64 / n as f64,
        });
    }
    Ok((DensityMatrix::new_unchecked(rho.hermitian_part()), weights))
}

/// Prior over the preparations of one source.
fn source_preparations<T: Scalar>(
    config: &ExperimentConfig,
    party: Party,
) -> Vec<(PrepKey, T, Ket<T>)> {
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    let entries = |basis: Option<u8>, dir: BlochDirection, w: T| {
        let b = PreparationBasis::<T>::from_bloch(dir);
        PrepLabel::BOTH
            .iter()
            .map(|&label| (PrepKey { basis, label }, w, b.ket(label).clone()))
            .collect::<Vec<_>>()
    };
    match config.scenario {
        Scenario::Pbr => {
            let mut v = entries(Some(0), config.pbr_bases[0], quarter);
            v.extend(entries(Some(1), config.pbr_bases[1], quarter));
            v
        }
        _ => match party {
            Party::Alice => entries(None, config.alice_basis, half),
            Party::Bob => entries(None, config.bob_basis, half),
        },
    }
}

/// `ρ ↦ (1/|axes|) Σ_axis Σ_± P ρ P`, the P-stage measurement averaged over
/// the setting choice.
fn averaged_measurement_channel<T: Scalar>(
    rho: &ComplexMatrix<T>,
    axes: &[PauliAxis],
) -> ComplexMatrix<T> {
    let mut out = ComplexMatrix::zeros(2);
    for &axis in axes {
        for sign in Outcome::BOTH {
            let p = pauli_projector::<T>(axis, sign);
            out = &out + &ComplexMatrix::sandwich_hermitian(p.matrix(), rho);
        }
    }
    out.scale_real(T::one() / T::from_usize(axes.len()).unwrap())
}

/// Predicted preparation-label frequencies within the sub-ensemble whose
/// Bell outcome is `bell`: `P(labels | bell) ∝ P(labels) ⟨b| 𝓜(ψ)⊗𝓜(φ) |b⟩`
/// with `𝓜` the axis-averaged P measurement.
pub fn predicted_label_weights<T: Scalar>(
    config: &ExperimentConfig,
    bell: BellState,
) -> Vec<(PrepKey, PrepKey, T)> {
    let target = bell_state::<T>(bell);
    let alice = source_preparations::<T>(config, Party::Alice);
    let bob = source_preparations::<T>(config, Party::Bob);
    let mut out = Vec::new();
    let mut total = T::zero();
    for (ka, wa, psi) in &alice {
        let ra = averaged_measurement_channel(psi.projector().matrix(), &config.tomography_axes);
        for (kb, wb, phi) in &bob {
            let rb =
                averaged_measurement_channel(phi.projector().matrix(), &config.tomography_axes);
            let joint = qmath::tensor(&ra, &rb).expect("finite");
            let w = *wa * *wb * joint.expectation(target.amplitudes()).re;
            total = total + w;
            out.push((*ka, *kb, w));
        }
    }
    for entry in &mut out {
        entry.2 = entry.2 / total;
    }
    out
}

/// `P[j± & k± | b] = tr(P_b (P_{j±} ⊗ P_{k±}))`: the same closed form for
/// both stages because the sources are unbiased.
pub fn analytic_conditional<T: Scalar>(
    _stage: Stage,
    axes: (PauliAxis, PauliAxis),
    outcomes: (Outcome, Outcome),
    bell: BellState,
) -> T {
    closed_form(axes, outcomes, bell, false)
}

fn closed_form<T: Scalar>(
    axes: (PauliAxis, PauliAxis),
    outcomes: (Outcome, Outcome),
    bell: BellState,
    flip_y: bool,
) -> T {
    let out_a = if flip_y && axes.0 == PauliAxis::Y {
        outcomes.0.flip()
    } else {
        outcomes.0
    };
    let pa = pauli_projector::<T>(axes.0, out_a);
    let pb = pauli_projector::<T>(axes.1, outcomes.1);
    let op = qmath::tensor(pa.matrix(), pb.matrix()).expect("finite");
    op.expectation(bell_state::<T>(bell).amplitudes()).re
}

/// Sequential evaluation with the maximally-mixed input.
///
/// Stage P: `tr((P⊗P)(Î/4)(P⊗P) P_b) / tr((Î/4) P_b)`.
/// Stage R: Bell outcome first (`p_b = tr((Î/4)P_b)`, collapse), then
/// `tr(ρ_b (P⊗P))`.
pub fn brute_force_conditional<T: Scalar>(
    stage: Stage,
    axes: (PauliAxis, PauliAxis),
    outcomes: (Outcome, Outcome),
    bell: BellState,
) -> T {
    let mixed = DensityMatrix::<T>::maximally_mixed(4);
    let pb = bell_state::<T>(bell).projector();
    let local = qmath::tensor(
        pauli_projector::<T>(axes.0, outcomes.0).matrix(),
        pauli_projector::<T>(axes.1, outcomes.1).matrix(),
    )
    .expect("finite");
    let p_bell = pb.matrix().trace_product(mixed.matrix()).re;
    match stage {
        Stage::P => {
            let collapsed = ComplexMatrix::sandwich_hermitian(&local, mixed.matrix());
            collapsed.trace_product(pb.matrix()).re / p_bell
        }
        Stage::R => {
            let post = ComplexMatrix::sandwich_hermitian(pb.matrix(), mixed.matrix())
                .scale_real(T::one() / p_bell);
            post.trace_product(&local).re
        }
    }
}

/// Born-rule outcome table of a known two-qubit state.
pub fn exact_probabilities<T: Scalar>(rho: &ComplexMatrix<T>) -> JointProbabilities<T> {
    let mut probs = [[[[T::zero(); 2]; 2]; 3]; 3];
    for a in PauliAxis::ALL {
        for b in PauliAxis::ALL {
            for oa in Outcome::BOTH {
                for ob in Outcome::BOTH {
                    let op = qmath::tensor(
                        pauli_projector::<T>(a, oa).matrix(),
                        pauli_projector::<T>(b, ob).matrix(),
                    )
                    .expect("finite");
                    probs[a.index()][b.index()][oa.index()][ob.index()] = op.trace_product(rho).re;
                }
            }
        }
    }
    JointProbabilities {
        probs,
        weights: [[T::one(); 3]; 3],
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OracleOptions {
    /// Negative control: evaluate the closed form with Alice's Y outcome swapped.
    pub inject_sign_flip: bool,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OracleCheck {
    pub stage: Stage,
    pub axis_a: PauliAxis,
    pub axis_b: PauliAxis,
    pub out_a: Outcome,
    pub out_b: Outcome,
    pub bell: BellState,
    pub closed_form: f64,
    pub brute_force: f64,
    pub abs_diff: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RoundTripCheck {
    pub name: String,
    pub max_abs_diff: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OracleReport {
    pub tolerance: f64,
    /// `tr((Î/4) P_b)` for each Bell state.
    pub bell_probabilities: [f64; 4],
    pub pre_checks: Vec<OracleCheck>,
    pub post_checks: Vec<OracleCheck>,
    pub round_trips: Vec<RoundTripCheck>,
}

impl OracleReport {
    pub fn failures(&self) -> impl Iterator<Item = &OracleCheck> {
        self.pre_checks
            .iter()
            .chain(&self.post_checks)
            .filter(move |c| c.abs_diff.is_nan() || c.abs_diff > self.tolerance)
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
            && self
                .round_trips
                .iter()
                .all(|r| r.max_abs_diff <= self.tolerance)
    }
}

pub const ORACLE_TOLERANCE: f64 = 1e-12;

/// Fixed two-qubit states used for the exact-moment inversion round trip.
pub fn round_trip_states() -> Vec<(String, ComplexMatrix<f64>)> {
    let mut out: Vec<(String, ComplexMatrix<f64>)> = BellState::ALL
        .iter()
        .map(|&b| {
            (
                b.to_string(),
                bell_state::<f64>(b).projector().matrix().clone(),
            )
        })
        .collect();
    out.push((
        "maximallyMixed".into(),
        ComplexMatrix::identity(4).scale_real(0.25),
    ));
    let a = crate::states::bloch_to_ket(0.7, 1.9);
    let b = crate::states::bloch_to_ket(2.3, -0.6);
    out.push(("product".into(), a.tensor(&b).projector().matrix().clone()));
    let phi = bell_state::<f64>(BellState::PsiMinus)
        .projector()
        .matrix()
        .clone();
    let werner = &phi.scale_real(0.6) + &ComplexMatrix::identity(4).scale_real(0.1);
    out.push(("werner0.6".into(), werner));
    out
}

/// Check the closed-form conditional against the sequential evaluation for
/// every setting pair, outcome pair and Bell state at both stages, and the
/// exact-moment inversion round trip.
pub fn run_oracle(options: OracleOptions) -> OracleReport {
    let mut pre_checks = Vec::with_capacity(144);
    let mut post_checks = Vec::with_capacity(144);
    for bell in BellState::ALL {
        for a in PauliAxis::ALL {
            for b in PauliAxis::ALL {
                for oa in Outcome::BOTH {
                    for ob in Outcome::BOTH {
                        let closed: f64 =
                            closed_form((a, b), (oa, ob), bell, options.inject_sign_flip);
                        for stage in [Stage::P, Stage::R] {
                            let brute: f64 = brute_force_conditional(stage, (a, b), (oa, ob), bell);
                            let check = OracleCheck {
                                stage,
                                axis_a: a,
                                axis_b: b,
                                out_a: oa,
                                out_b: ob,
                                bell,
                                closed_form: closed,
                                brute_force: brute,
                                abs_diff: (closed - brute).abs(),
                            };
                            match stage {
                                Stage::P => pre_checks.push(check),
                                Stage::R => post_checks.push(check),
                            }
                        }
                    }
                }
            }
        }
    }
    let mixed = DensityMatrix::<f64>::maximally_mixed(4);
    let bell_probabilities = BellState::ALL.map(|b| {
        bell_state::<f64>(b)
            .projector()
            .matrix()
            .trace_product(mixed.matrix())
            .re
    });
    let round_trips = round_trip_states()
        .into_iter()
        .map(|(name, rho)| {
            let back = tomography::invert_probabilities(&exact_probabilities(&rho))
                .expect("complete exact table");
            RoundTripCheck {
                name,
                max_abs_diff: back.max_abs_diff(&rho),
            }
        })
        .collect();
    OracleReport {
        tolerance: ORACLE_TOLERANCE,
        bell_probabilities,
        pre_checks,
        post_checks,
        round_trips,
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PredictedWeight {
    pub alice: PrepKey,
    pub bob: PrepKey,
    pub probability: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ContradictionReport<T: Scalar> {
    pub bell: BellState,
    pub criterion: String,
    /// P-stage reconstruction of the Bell-selected runs.
    pub tomographic_state: DensityMatrix<T>,
    pub tomographic_fidelity: T,
    pub tomographic_certification: CertificationReport<T>,
    /// Mixture of the recorded preparations of the same runs.
    pub prep_label_state: DensityMatrix<T>,
    pub prep_label_certification: CertificationReport<T>,
    pub prep_label_weights: Vec<LabelWeight>,
    pub predicted_label_weights: Vec<PredictedWeight>,
    pub trace_distance: T,
}

/// Pair the tomographic state of the `bell`-selected runs (measured before
/// the Bell measurement) with the state built from their preparation labels.
pub fn contradiction_report<T: Scalar>(
    records: &[RunRecord],
    config: &ExperimentConfig,
    bell: BellState,
    options: ReconstructOptions,
) -> Result<ContradictionReport<T>, AnalysisError> {
    let criterion = SelectionCriterion::bell(bell);
    let recon: ReconstructionResult<T> = reconstruct(records, Stage::P, &criterion, options)?;
    let tomographic_certification = certify(&recon.physical, Some(&recon.standard_errors))?;
    let tomographic_fidelity = fidelity_pure(&recon.physical, bell_state::<T>(bell).amplitudes())?;
    let (prep_label_state, prep_label_weights) =
        ensemble_state_from_preps::<T>(records, config, &criterion)?;
    let prep_label_certification = certify(&prep_label_state, None)?;
    let predicted_label_weights = predicted_label_weights::<f64>(config, bell)
        .into_iter()
        .map(|(alice, bob, probability)| PredictedWeight {
            alice,
            bob,
            probability,
        })
        .collect();
    let trace_distance = trace_distance(recon.physical.matrix(), prep_label_state.matrix())?;
    Ok(ContradictionReport {
        bell,
        criterion: criterion.to_string(),
        tomographic_state: recon.physical,
        tomographic_fidelity,
        tomographic_certification,
        prep_label_state,
        prep_label_certification,
        prep_label_weights,
        predicted_label_weights,
        trace_distance,
    })
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SubEnsembleState<T: Scalar> {
    pub condition_axis: PauliAxis,
    pub condition_sign: Outcome,
    pub expected_bloch: [T; 3],
    pub result: SingleQubitResult<T>,
    pub max_abs_deviation: T,
}

/// Condition the `bell`-selected runs on the outcome at `condition` and
/// reconstruct the partner qubit at `target`, for every axis and sign.
/// The expected Bloch vector is `sign · T_ii · eᵢ`.
pub fn selection_dependence<T: Scalar>(
    records: &[RunRecord],
    bell: BellState,
    condition: Site,
    target: Site,
) -> Result<Vec<SubEnsembleState<T>>, AnalysisError> {
    let corr = bell.correlations();
    let mut out = Vec::with_capacity(6);
    for axis in PauliAxis::ALL {
        for sign in Outcome::BOTH {
            let criterion = SelectionCriterion::bell(bell).with_outcome(condition, axis, sign);
            let result: SingleQubitResult<T> =
                reconstruct_single_qubit(records, target, &criterion)?;
            let mut expected = [T::zero(); 3];
            expected[axis.index()] =
                T::lit(f64::from(sign.value()) * f64::from(corr[axis.index()]));
            let max_abs_deviation = (0..3)
                .map(|k| (result.bloch[k] - expected[k]).abs())
                .fold(T::zero(), T::max);
            out.push(SubEnsembleState {
                condition_axis: axis,
                condition_sign: sign,
                expected_bloch: expected,
                result,
                max_abs_deviation,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PbrSummary<T: Scalar> {
    /// Fraction of single-source preparations that were `ψ₀⊥` or `ψ₁⊥`.
    pub eliminated_preparation_fraction: f64,
    /// Fraction of runs in which neither source produced a `⊥` state.
    pub surviving_run_fraction: f64,
    pub bell: BellState,
    pub fidelity: T,
    pub reconstruction: ReconstructionResult<T>,
    pub certification: CertificationReport<T>,
}

/// Label 2 in either PBR basis is the orthogonal complement state.
pub fn pbr_summary<T: Scalar>(
    records: &[RunRecord],
    bell: BellState,
    options: ReconstructOptions,
) -> Result<PbrSummary<T>, AnalysisError> {
    let mut perp = 0u64;
    let mut surviving = 0u64;
    for r in records {
        let (a, b) = prep_keys(r)?;
        let (pa, pb) = (a.label == PrepLabel::Two, b.label == PrepLabel::Two);
        perp += u64::from(pa) + u64::from(pb);
        surviving += u64::from(!pa && !pb);
    }
    if records.is_empty() {
        return Err(AnalysisError::EmptySelection {
            criterion: "all".into(),
        });
    }
    let n = records.len() as f64;
    let reconstruction: ReconstructionResult<T> =
        reconstruct(records, Stage::P, &SelectionCriterion::bell(bell), options)?;
    let certification = certify(
        &reconstruction.physical,
        Some(&reconstruction.standard_errors),
    )?;
    let fidelity = fidelity_pure(&reconstruction.physical, bell_state::<T>(bell).amplitudes())?;
    Ok(PbrSummary {
        eliminated_preparation_fraction: perp as f64 / (2.0 * n),
        surviving_run_fraction: surviving as f64 / n,
        bell,
        fidelity,
        reconstruction,
        certification,
    })
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StageComparison<T: Scalar> {
    pub bell: BellState,
    pub n_selected: u64,
    pub pre_fidelity: T,
    pub post_fidelity: T,
    pub pre_certification: CertificationReport<T>,
    pub post_certification: CertificationReport<T>,
    pub trace_distance: T,
}

/// Reconstruct the `bell`-selected runs at both stages and compare.
pub fn compare_stages<T: Scalar>(
    records: &[RunRecord],
    bell: BellState,
    options: ReconstructOptions,
) -> Result<StageComparison<T>, AnalysisError> {
    let criterion = SelectionCriterion::bell(bell);
    let pre: ReconstructionResult<T> = reconstruct(records, Stage::P, &criterion, options)?;
    let post: ReconstructionResult<T> = reconstruct(records, Stage::R, &criterion, options)?;
    let target = bell_state::<T>(bell);
    Ok(StageComparison {
        bell,
        n_selected: pre.n_selected,
        pre_fidelity: fidelity_pure(&pre.physical, target.amplitudes())?,
        post_fidelity: fidelity_pure(&post.physical, target.amplitudes())?,
        pre_certification: certify(&pre.physical, Some(&pre.standard_errors))?,
        post_certification: certify(&post.physical, Some(&post.standard_errors))?,
        trace_distance: trace_distance(pre.physical.matrix(), post.physical.matrix())?,
    })
}

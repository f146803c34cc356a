//! Linear-inversion state tomography of selected sub-ensembles.
//!
//! Either measurement stage can be used: `P` reads the records taken before
//! the Bell measurement, `R` the ones taken after it.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::protocol::RunRecord;
use crate::qmath::{self, hermitian_eig, ComplexMatrix, DensityMatrix, QmathError};
use crate::scalar::Scalar;
use crate::states::{pauli_matrix, BellState, Outcome, PauliAxis, PrepLabel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TomographyError {
    #[error("empty selection for criterion `{criterion}`")]
    EmptySelection { criterion: String },
    #[error("no data for setting pair ({axis_a}, {axis_b})")]
    MissingSetting {
        axis_a: PauliAxis,
        axis_b: PauliAxis,
    },
    #[error("no data for axis {axis}")]
    MissingAxis { axis: PauliAxis },
    #[error("insufficient counts for setting pair ({axis_a}, {axis_b}): {count} < {min}")]
    InsufficientCounts {
        axis_a: PauliAxis,
        axis_b: PauliAxis,
        count: u64,
        min: u64,
    },
    #[error("physical projection clipped every eigenvalue")]
    Degenerate,
    #[error("bad criterion `{input}`: {reason}")]
    BadCriterion { input: String, reason: String },
    #[error(transparent)]
    Qmath(#[from] QmathError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    /// Before the Bell measurement.
    P,
    /// After the Bell measurement.
    R,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "P" | "p" => Ok(Stage::P),
            "R" | "r" => Ok(Stage::R),
            other => Err(format!("stage must be P or R, got `{other}`")),
        }
    }
}

/// One of the four tomography measurements in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Site {
    PA,
    PB,
    RC,
    RD,
}

impl Site {
    pub fn key(self) -> &'static str {
        match self {
            Site::PA => "pA",
            Site::PB => "pB",
            Site::RC => "rC",
            Site::RD => "rD",
        }
    }

    pub fn pair(stage: Stage) -> (Site, Site) {
        match stage {
            Stage::P => (Site::PA, Site::PB),
            Stage::R => (Site::RC, Site::RD),
        }
    }

    pub fn read(self, r: &RunRecord) -> (PauliAxis, Outcome) {
        match self {
            Site::PA => (r.p_a_axis, r.p_a_out),
            Site::PB => (r.p_b_axis, r.p_b_out),
            Site::RC => (r.r_c_axis, r.r_c_out),
            Site::RD => (r.r_d_axis, r.r_d_out),
        }
    }
}

impl FromStr for Site {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pA" => Ok(Site::PA),
            "pB" => Ok(Site::PB),
            "rC" => Ok(Site::RC),
            "rD" => Ok(Site::RD),
            other => Err(format!("unknown measurement site `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutcomeFilter {
    pub site: Site,
    pub axis: PauliAxis,
    pub sign: Outcome,
}

/// Conjunction of per-run predicates. The default selects every run.
///
/// Text form: `key=value` terms joined by `&`, e.g. `q=PhiPlus&aliceLabel=1`
/// or `q=PhiPlus&rC=X+`. `q` accepts a `|`-separated set of Bell states.
/// `all` (or an empty string) is the trivial criterion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SelectionCriterion {
    pub bell: Option<Vec<BellState>>,
    pub alice_label: Option<PrepLabel>,
    pub bob_label: Option<PrepLabel>,
    pub alice_basis: Option<u8>,
    pub bob_basis: Option<u8>,
    pub outcomes: Vec<OutcomeFilter>,
}

impl SelectionCriterion {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn bell(b: BellState) -> Self {
        Self {
            bell: Some(vec![b]),
            ..Self::default()
        }
    }

    pub fn with_outcome(mut self, site: Site, axis: PauliAxis, sign: Outcome) -> Self {
        self.outcomes.push(OutcomeFilter { site, axis, sign });
        self
    }

    pub fn with_labels(mut self, alice: Option<PrepLabel>, bob: Option<PrepLabel>) -> Self {
        self.alice_label = alice;
        self.bob_label = bob;
        self
    }

    /// The single Bell outcome this criterion conditions on, if any.
    pub fn single_bell(&self) -> Option<BellState> {
        match self.bell.as_deref() {
            Some([b]) => Some(*b),
            _ => None,
        }
    }

    pub fn matches(&self, r: &RunRecord) -> bool {
        if let Some(set) = &self.bell {
            if !set.contains(&r.q_out) {
                return false;
            }
        }
        if self.alice_label.is_some() && self.alice_label != r.alice_label {
            return false;
        }
        if self.bob_label.is_some() && self.bob_label != r.bob_label {
            return false;
        }
        if self.alice_basis.is_some() && self.alice_basis != r.alice_basis {
            return false;
        }
        if self.bob_basis.is_some() && self.bob_basis != r.bob_basis {
            return false;
        }
        self.outcomes
            .iter()
            .all(|f| f.site.read(r) == (f.axis, f.sign))
    }

    pub fn select<'a>(
        &'a self,
        records: &'a [RunRecord],
    ) -> impl Iterator<Item = &'a RunRecord> + 'a {
        records.iter().filter(move |r| self.matches(r))
    }
}

impl fmt::Display for SelectionCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        if let Some(set) = &self.bell {
            let names: Vec<String> = set.iter().map(|b| b.to_string()).collect();
            terms.push(format!("q={}", names.join("|")));
        }
        if let Some(l) = self.alice_label {
            terms.push(format!("aliceLabel={l}"));
        }
        if let Some(l) = self.bob_label {
            terms.push(format!("bobLabel={l}"));
        }
        if let Some(b) = self.alice_basis {
            terms.push(format!("aliceBasis={b}"));
        }
        if let Some(b) = self.bob_basis {
            terms.push(format!("bobBasis={b}"));
        }
        for o in &self.outcomes {
            terms.push(format!("{}={}{}", o.site.key(), o.axis, o.sign));
        }
        if terms.is_empty() {
            f.write_str("all")
        } else {
            f.write_str(&terms.join("&"))
        }
    }
}

impl FromStr for SelectionCriterion {
    type Err = TomographyError;

    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let bad = |reason: String| TomographyError::BadCriterion {
            input: input.to_string(),
            reason,
        };
        let mut c = SelectionCriterion::default();
        let trimmed = input.trim();
        if trimmed.is_empty() || trimmed == "all" || trimmed == "*" {
            return Ok(c);
        }
        for term in trimmed.split('&') {
            let (key, value) = term
                .split_once('=')
                .ok_or_else(|| bad(format!("term `{term}` is not key=value")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "q" => {
                    let set = value
                        .split('|')
                        .map(BellState::from_str)
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(bad)?;
                    c.bell = Some(set);
                }
                "aliceLabel" => c.alice_label = Some(value.parse().map_err(bad)?),
                "bobLabel" => c.bob_label = Some(value.parse().map_err(bad)?),
                "aliceBasis" | "bobBasis" => {
                    let b: u8 = match value {
                        "0" => 0,
                        "1" => 1,
                        _ => return Err(bad(format!("basis index must be 0 or 1, got `{value}`"))),
                    };
                    if key == "aliceBasis" {
                        c.alice_basis = Some(b);
                    } else {
                        c.bob_basis = Some(b);
                    }
                }
                "pA" | "pB" | "rC" | "rD" => {
                    let site: Site = key.parse().map_err(bad)?;
                    let mut chars = value.chars();
                    let axis: PauliAxis = chars
                        .next()
                        .ok_or_else(|| bad("missing axis".into()))?
                        .to_string()
                        .parse()
                        .map_err(bad)?;
                    let sign = match chars.as_str() {
                        "+" | "+1" => Outcome::Plus,
                        "-" | "-1" => Outcome::Minus,
                        other => {
                            return Err(bad(format!("outcome sign must be + or -, got `{other}`")))
                        }
                    };
                    c.outcomes.push(OutcomeFilter { site, axis, sign });
                }
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        Ok(c)
    }
}

/// Joint outcome tallies for one stage, `counts[axis_a][axis_b][out_a][out_b]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    pub stage: Stage,
    counts: [[[[u64; 2]; 2]; 3]; 3],
}

impl CountTable {
    pub fn new(stage: Stage) -> Self {
        Self {
            stage,
            counts: [[[[0; 2]; 2]; 3]; 3],
        }
    }

    pub fn record(&mut self, axis_a: PauliAxis, axis_b: PauliAxis, out_a: Outcome, out_b: Outcome) {
        self.counts[axis_a.index()][axis_b.index()][out_a.index()][out_b.index()] += 1;
    }

    pub fn count(
        &self,
        axis_a: PauliAxis,
        axis_b: PauliAxis,
        out_a: Outcome,
        out_b: Outcome,
    ) -> u64 {
        self.counts[axis_a.index()][axis_b.index()][out_a.index()][out_b.index()]
    }

    pub fn setting_count(&self, axis_a: PauliAxis, axis_b: PauliAxis) -> u64 {
        self.counts[axis_a.index()][axis_b.index()]
            .iter()
            .flatten()
            .sum()
    }

    /// `N_η`
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().flatten().flatten().sum()
    }

    /// Counts are additive across shards.
    pub fn merge(&mut self, other: &CountTable) {
        for (a, b) in self
            .counts
            .iter_mut()
            .flatten()
            .flatten()
            .flatten()
            .zip(other.counts.iter().flatten().flatten().flatten())
        {
            *a += b;
        }
    }

    pub fn frequency(
        &self,
        axis_a: PauliAxis,
        axis_b: PauliAxis,
        out_a: Outcome,
        out_b: Outcome,
    ) -> f64 {
        let n = self.setting_count(axis_a, axis_b);
        if n == 0 {
            0.0
        } else {
            self.count(axis_a, axis_b, out_a, out_b) as f64 / n as f64
        }
    }
}

impl Serialize for CountTable {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        #[serde(rename_all = "camelCase")]
        struct Entry {
            axis_a: PauliAxis,
            axis_b: PauliAxis,
            out_a: Outcome,
            out_b: Outcome,
            count: u64,
        }
        let mut entries = Vec::with_capacity(36);
        for a in PauliAxis::ALL {
            for b in PauliAxis::ALL {
                for oa in Outcome::BOTH {
                    for ob in Outcome::BOTH {
                        entries.push(Entry {
                            axis_a: a,
                            axis_b: b,
                            out_a: oa,
                            out_b: ob,
                            count: self.count(a, b, oa, ob),
                        });
                    }
                }
            }
        }
        let mut st = s.serialize_struct("CountTable", 3)?;
        st.serialize_field("stage", &self.stage)?;
        st.serialize_field("total", &self.total())?;
        st.serialize_field("entries", &entries)?;
        st.end()
    }
}

/// Tally the chosen stage over the runs matching `criterion`.
pub fn conditional_counts(
    records: &[RunRecord],
    stage: Stage,
    criterion: &SelectionCriterion,
) -> Result<CountTable, TomographyError> {
    let (sa, sb) = Site::pair(stage);
    let mut table = CountTable::new(stage);
    for r in criterion.select(records) {
        let (axis_a, out_a) = sa.read(r);
        let (axis_b, out_b) = sb.read(r);
        table.record(axis_a, axis_b, out_a, out_b);
    }
    if table.total() == 0 {
        return Err(TomographyError::EmptySelection {
            criterion: criterion.to_string(),
        });
    }
    Ok(table)
}

/// Outcome distributions per setting pair with their sample weights.
/// Exact tables (from a known state) use unit weights.
#[derive(Debug, Clone)]
pub struct JointProbabilities<T> {
    pub probs: [[[[T; 2]; 2]; 3]; 3],
    pub weights: [[T; 3]; 3],
}

impl<T: Scalar> JointProbabilities<T> {
    pub fn from_counts(table: &CountTable) -> Self {
        let mut probs = [[[[T::zero(); 2]; 2]; 3]; 3];
        let mut weights = [[T::zero(); 3]; 3];
        for a in PauliAxis::ALL {
            for b in PauliAxis::ALL {
                let n = table.setting_count(a, b);
                weights[a.index()][b.index()] = T::from_u64(n).unwrap();
                if n == 0 {
                    continue;
                }
                for oa in Outcome::BOTH {
                    for ob in Outcome::BOTH {
                        probs[a.index()][b.index()][oa.index()][ob.index()] =
                            T::from_u64(table.count(a, b, oa, ob)).unwrap()
                                / T::from_u64(n).unwrap();
                    }
                }
            }
        }
        Self { probs, weights }
    }
}

/// Pauli expectation values `t[i][j] = ⟨σᵢ ⊗ σⱼ⟩` with index 0 the identity.
pub type CorrelatorTable<T> = [[T; 4]; 4];

fn sign<T: Scalar>(o: usize) -> T {
    if o == 0 {
        T::one()
    } else {
        -T::one()
    }
}

/// Estimate all 16 Pauli expectations. Single-sided terms pool every
/// partner setting, weighted by sample size.
pub fn estimate_correlators<T: Scalar>(
    table: &JointProbabilities<T>,
) -> Result<CorrelatorTable<T>, TomographyError> {
    for a in PauliAxis::ALL {
        for b in PauliAxis::ALL {
            if table.weights[a.index()][b.index()] <= T::zero() {
                return Err(TomographyError::MissingSetting {
                    axis_a: a,
                    axis_b: b,
                });
            }
        }
    }
    let mut t = [[T::zero(); 4]; 4];
    t[0][0] = T::one();
    let mut a_num = [T::zero(); 3];
    let mut a_den = [T::zero(); 3];
    let mut b_num = [T::zero(); 3];
    let mut b_den = [T::zero(); 3];
    for i in 0..3 {
        for j in 0..3 {
            let p = &table.probs[i][j];
            let w = table.weights[i][j];
            let mut corr = T::zero();
            let mut ma = T::zero();
            let mut mb = T::zero();
            for (oa, row) in p.iter().enumerate() {
                for (ob, &pr) in row.iter().enumerate() {
                    corr = corr + sign::<T>(oa) * sign::<T>(ob) * pr;
                    ma = ma + sign::<T>(oa) * pr;
                    mb = mb + sign::<T>(ob) * pr;
                }
            }
            t[i + 1][j + 1] = corr;
            a_num[i] = a_num[i] + w * ma;
            a_den[i] = a_den[i] + w;
            b_num[j] = b_num[j] + w * mb;
            b_den[j] = b_den[j] + w;
        }
    }
    for k in 0..3 {
        t[k + 1][0] = a_num[k] / a_den[k];
        t[0][k + 1] = b_num[k] / b_den[k];
    }
    Ok(t)
}

fn pauli_or_identity<T: Scalar>(i: usize) -> ComplexMatrix<T> {
    match PauliAxis::from_index(i.wrapping_sub(1)) {
        Some(axis) if i > 0 => pauli_matrix(axis),
        _ => ComplexMatrix::identity(2),
    }
}

/// `(1/4) Σ t_ij σᵢ ⊗ σⱼ`
pub fn state_from_correlators<T: Scalar>(t: &CorrelatorTable<T>) -> ComplexMatrix<T> {
    let quarter = T::lit(0.25);
    let mut out = ComplexMatrix::zeros(4);
    for (i, row) in t.iter().enumerate() {
        for (j, &tij) in row.iter().enumerate() {
            if tij.is_zero() {
                continue;
            }
            let term = qmath::tensor(&pauli_or_identity::<T>(i), &pauli_or_identity::<T>(j))
                .expect("finite Pauli matrices");
            out = &out + &term.scale_real(tij * quarter);
        }
    }
    out
}

pub fn invert_probabilities<T: Scalar>(
    table: &JointProbabilities<T>,
) -> Result<ComplexMatrix<T>, TomographyError> {
    Ok(state_from_correlators(&estimate_correlators(table)?))
}

/// Raw (possibly non-PSD) linear-inversion estimate; Hermitian, trace 1.
pub fn linear_inversion<T: Scalar>(
    table: &CountTable,
) -> Result<ComplexMatrix<T>, TomographyError> {
    invert_probabilities(&JointProbabilities::<T>::from_counts(table))
}

/// Clip negative eigenvalues and renormalize the trace to 1.
pub fn project_to_physical<T: Scalar>(
    raw: &ComplexMatrix<T>,
) -> Result<DensityMatrix<T>, TomographyError> {
    let spectrum = hermitian_eig(raw)?;
    let kept: T = spectrum.eigenvalues.iter().map(|&l| l.max(T::zero())).sum();
    if kept <= T::zero() {
        return Err(TomographyError::Degenerate);
    }
    let m = spectrum.rebuild(|l| l.max(T::zero()) / kept);
    Ok(DensityMatrix::new_unchecked(m.hermitian_part()))
}

/// `⟨target|ρ|target⟩`
pub fn fidelity_pure<T: Scalar>(
    rho: &DensityMatrix<T>,
    target: &[Complex<T>],
) -> Result<T, TomographyError> {
    if rho.dim() != target.len() {
        return Err(QmathError::DimensionMismatch {
            expected: rho.dim(),
            found: target.len(),
        }
        .into());
    }
    Ok(rho.matrix().expectation(target).re)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReconstructOptions {
    /// Smallest per-setting-pair sample accepted without `force`.
    pub min_counts: u64,
    pub force: bool,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            min_counts: 50,
            force: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReconstructionResult<T: Scalar> {
    pub stage: Stage,
    pub criterion: String,
    pub n_selected: u64,
    pub counts: CountTable,
    pub correlators: CorrelatorTable<T>,
    /// `√((1 − ⟨c⟩²)/n)` per correlator, with `n` the sample behind it.
    pub standard_errors: CorrelatorTable<T>,
    pub raw: ComplexMatrix<T>,
    pub physical: DensityMatrix<T>,
}

fn standard_errors<T: Scalar>(t: &CorrelatorTable<T>, table: &CountTable) -> CorrelatorTable<T> {
    let se = |c: T, n: u64| -> T {
        if n == 0 {
            return T::infinity();
        }
        ((T::one() - c * c).max(T::zero()) / T::from_u64(n).unwrap()).sqrt()
    };
    let mut out = [[T::zero(); 4]; 4];
    for a in PauliAxis::ALL {
        let (i, pooled_a): (usize, u64) = (
            a.index() + 1,
            PauliAxis::ALL
                .iter()
                .map(|&b| table.setting_count(a, b))
                .sum(),
        );
        out[i][0] = se(t[i][0], pooled_a);
        for b in PauliAxis::ALL {
            let j = b.index() + 1;
            out[i][j] = se(t[i][j], table.setting_count(a, b));
        }
    }
    for b in PauliAxis::ALL {
        let j = b.index() + 1;
        let pooled_b: u64 = PauliAxis::ALL
            .iter()
            .map(|&a| table.setting_count(a, b))
            .sum();
        out[0][j] = se(t[0][j], pooled_b);
    }
    out
}

/// Counts, linear inversion and physical projection in one pass.
pub fn reconstruct<T: Scalar>(
    records: &[RunRecord],
    stage: Stage,
    criterion: &SelectionCriterion,
    options: ReconstructOptions,
) -> Result<ReconstructionResult<T>, TomographyError> {
    let counts = conditional_counts(records, stage, criterion)?;
    for a in PauliAxis::ALL {
        for b in PauliAxis::ALL {
            let n = counts.setting_count(a, b);
            if n == 0 {
                return Err(TomographyError::MissingSetting {
                    axis_a: a,
                    axis_b: b,
                });
            }
            if n < options.min_counts && !options.force {
                return Err(TomographyError::InsufficientCounts {
                    axis_a: a,
                    axis_b: b,
                    count: n,
                    min: options.min_counts,
                });
            }
        }
    }
    let correlators = estimate_correlators(&JointProbabilities::<T>::from_counts(&counts))?;
    let raw = state_from_correlators(&correlators);
    let physical = project_to_physical(&raw)?;
    Ok(ReconstructionResult {
        stage,
        criterion: criterion.to_string(),
        n_selected: counts.total(),
        standard_errors: standard_errors(&correlators, &counts),
        counts,
        correlators,
        raw,
        physical,
    })
}

/// Single-qubit tallies at one site, `counts[axis][outcome]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SingleCountTable {
    pub counts: [[u64; 2]; 3],
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SingleQubitResult<T: Scalar> {
    pub criterion: String,
    pub n_selected: u64,
    pub bloch: [T; 3],
    pub standard_errors: [T; 3],
    pub physical: DensityMatrix<T>,
}

/// Reconstruct the qubit measured at `site` over the selected runs.
pub fn reconstruct_single_qubit<T: Scalar>(
    records: &[RunRecord],
    site: Site,
    criterion: &SelectionCriterion,
) -> Result<SingleQubitResult<T>, TomographyError> {
    let mut table = SingleCountTable {
        counts: [[0; 2]; 3],
    };
    let mut n_selected = 0;
    for r in criterion.select(records) {
        let (axis, out) = site.read(r);
        table.counts[axis.index()][out.index()] += 1;
        n_selected += 1;
    }
    if n_selected == 0 {
        return Err(TomographyError::EmptySelection {
            criterion: criterion.to_string(),
        });
    }
    let mut bloch = [T::zero(); 3];
    let mut se = [T::zero(); 3];
    for axis in PauliAxis::ALL {
        let [plus, minus] = table.counts[axis.index()];
        let n = plus + minus;
        if n == 0 {
            return Err(TomographyError::MissingAxis { axis });
        }
        let nt = T::from_u64(n).unwrap();
        let m = (T::from_u64(plus).unwrap() - T::from_u64(minus).unwrap()) / nt;
        bloch[axis.index()] = m;
        se[axis.index()] = ((T::one() - m * m).max(T::zero()) / nt).sqrt();
    }
    let mut raw = ComplexMatrix::identity(2).scale_real(T::lit(0.5));
    for axis in PauliAxis::ALL {
        raw = &raw + &pauli_matrix::<T>(axis).scale_real(bloch[axis.index()] * T::lit(0.5));
    }
    Ok(SingleQubitResult {
        criterion: criterion.to_string(),
        n_selected,
        bloch,
        standard_errors: se,
        physical: project_to_physical(&raw)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::bell_state;

    type M = ComplexMatrix<f64>;

    /// Exact probabilities of a known state, computed directly with the Born rule.
    fn exact_table(rho: &M) -> JointProbabilities<f64> {
        use crate::states::pauli_projector;
        let mut probs = [[[[0.0; 2]; 2]; 3]; 3];
        for a in PauliAxis::ALL {
            for b in PauliAxis::ALL {
                for oa in Outcome::BOTH {
                    for ob in Outcome::BOTH {
                        let p = qmath::tensor(
                            pauli_projector::<f64>(a, oa).matrix(),
                            pauli_projector::<f64>(b, ob).matrix(),
                        )
                        .unwrap();
                        probs[a.index()][b.index()][oa.index()][ob.index()] =
                            p.trace_product(rho).re;
                    }
                }
            }
        }
        JointProbabilities {
            probs,
            weights: [[1.0; 3]; 3],
        }
    }

    #[test]
    fn exact_inversion_of_phi_plus_and_mixed() {
        let phi = bell_state::<f64>(BellState::PhiPlus)
            .projector()
            .matrix()
            .clone();
        let got = invert_probabilities(&exact_table(&phi)).unwrap();
        assert!(got.max_abs_diff(&phi) < 1e-12);
        let q = M::identity(4).scale_real(0.25);
        assert!(
            invert_probabilities(&exact_table(&q))
                .unwrap()
                .max_abs_diff(&q)
                < 1e-12
        );
    }

    #[test]
    fn correlators_diag_1_m1_1_give_phi_plus() {
        let mut t = [[0.0; 4]; 4];
        t[0][0] = 1.0;
        t[1][1] = 1.0;
        t[2][2] = -1.0;
        t[3][3] = 1.0;
        let phi = bell_state::<f64>(BellState::PhiPlus)
            .projector()
            .matrix()
            .clone();
        assert!(state_from_correlators(&t).max_abs_diff(&phi) < 1e-15);
    }

    #[test]
    fn missing_setting_is_reported() {
        let mut table = CountTable::new(Stage::P);
        table.record(PauliAxis::X, PauliAxis::X, Outcome::Plus, Outcome::Plus);
        assert!(matches!(
            linear_inversion::<f64>(&table),
            Err(TomographyError::MissingSetting { .. })
        ));
    }

    #[test]
    fn projection_cases() {
        let psd = M::diagonal(&[0.7, 0.2, 0.1, 0.0]);
        assert!(
            project_to_physical(&psd)
                .unwrap()
                .matrix()
                .max_abs_diff(&psd)
                < 1e-12
        );
        let got = project_to_physical(&M::diagonal(&[0.6, 0.5, -0.1, 0.0])).unwrap();
        let want = M::diagonal(&[6.0 / 11.0, 5.0 / 11.0, 0.0, 0.0]);
        assert!(got.matrix().max_abs_diff(&want) < 1e-12);
        let q = M::identity(4).scale_real(0.25);
        assert!(project_to_physical(&q).unwrap().matrix().max_abs_diff(&q) < 1e-12);
        assert_eq!(
            project_to_physical(&M::diagonal(&[-0.5, -0.5])).unwrap_err(),
            TomographyError::Degenerate
        );
    }

    #[test]
    fn fidelity_cases() {
        let phi = bell_state::<f64>(BellState::PhiPlus);
        let rho = DensityMatrix::pure(phi.amplitudes());
        assert!((fidelity_pure(&rho, phi.amplitudes()).unwrap() - 1.0).abs() < 1e-15);
        let mixed = DensityMatrix::<f64>::maximally_mixed(4);
        assert!((fidelity_pure(&mixed, phi.amplitudes()).unwrap() - 0.25).abs() < 1e-15);
        let minus = DensityMatrix::pure(bell_state::<f64>(BellState::PhiMinus).amplitudes());
        assert!(fidelity_pure(&minus, phi.amplitudes()).unwrap().abs() < 1e-15);
        assert!(
            fidelity_pure(&DensityMatrix::<f64>::maximally_mixed(2), phi.amplitudes()).is_err()
        );
    }

    #[test]
    fn criterion_parse_and_echo() {
        let c: SelectionCriterion = "q=PhiPlus&aliceLabel=1".parse().unwrap();
        assert_eq!(c.single_bell(), Some(BellState::PhiPlus));
        assert_eq!(c.alice_label, Some(PrepLabel::One));
        assert_eq!(c.to_string(), "q=PhiPlus&aliceLabel=1");
        let c: SelectionCriterion = "q=PhiPlus|PsiMinus&rC=X-&aliceBasis=1".parse().unwrap();
        assert_eq!(c.bell.as_ref().unwrap().len(), 2);
        assert_eq!(c.outcomes[0].sign, Outcome::Minus);
        assert_eq!(c.to_string().parse::<SelectionCriterion>().unwrap(), c);
        assert_eq!(
            "all".parse::<SelectionCriterion>().unwrap(),
            SelectionCriterion::all()
        );
        for bad in [
            "q",
            "q=Nope",
            "aliceLabel=3",
            "foo=1",
            "rC=W+",
            "rC=X",
            "aliceBasis=2",
        ] {
            assert!(bad.parse::<SelectionCriterion>().is_err(), "{bad}");
        }
    }

    #[test]
    fn empty_selection_echoes_criterion() {
        let err = conditional_counts(&[], Stage::P, &SelectionCriterion::bell(BellState::PsiPlus))
            .unwrap_err();
        assert_eq!(err.to_string(), "empty selection for criterion `q=PsiPlus`");
    }

    #[test]
    fn count_table_merge_is_additive() {
        let mut a = CountTable::new(Stage::R);
        a.record(PauliAxis::Y, PauliAxis::Z, Outcome::Minus, Outcome::Plus);
        let mut b = a.clone();
        b.record(PauliAxis::X, PauliAxis::X, Outcome::Plus, Outcome::Plus);
        a.merge(&b);
        assert_eq!(a.total(), 3);
        assert_eq!(
            a.count(PauliAxis::Y, PauliAxis::Z, Outcome::Minus, Outcome::Plus),
            2
        );
        assert_eq!(a.setting_count(PauliAxis::X, PauliAxis::X), 1);
    }
}

//! Command-line pipeline: simulate, reconstruct, certify, oracle, report.
//!
//! Records are JSONL: a header line carrying the schema version, scenario,
//! full config and its SHA-256, then one [`RunRecord`] per line. Reports are
//! single JSON documents with run metadata.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{
    certify, compare_stages, contradiction_report, ensemble_state_from_preps, pbr_summary,
    run_oracle, selection_dependence, AnalysisError, CertificationReport, ContradictionReport,
    LabelWeight, OracleOptions, OracleReport, PbrSummary, StageComparison, SubEnsembleState,
};
use crate::protocol::{
    bell_frequencies, run_experiment, ExperimentConfig, ProtocolError, RunRecord, Scenario,
};
use crate::qmath::{trace_distance, DensityMatrix};
use crate::states::BellState;
use crate::tomography::{
    reconstruct, CorrelatorTable, ReconstructOptions, ReconstructionResult, SelectionCriterion,
    Site, Stage, TomographyError,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("oracle failed: {0} identities out of tolerance")]
    OracleFailed(usize),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Tomography(#[from] TomographyError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

impl CliError {
    /// 1 for analytic failures, 2 for usage errors and empty selections.
    pub fn exit_code(&self) -> i32 {
        use TomographyError as T;
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Parse { .. } => 2,
            CliError::Protocol(ProtocolError::InvalidConfig { .. }) => 2,
            CliError::Tomography(
                T::EmptySelection { .. } | T::BadCriterion { .. } | T::InsufficientCounts { .. },
            )
            | CliError::Analysis(
                AnalysisError::EmptySelection { .. } | AnalysisError::MissingLabels { .. },
            )
            | CliError::Analysis(AnalysisError::Tomography(
                T::EmptySelection { .. } | T::BadCriterion { .. } | T::InsufficientCounts { .. },
            )) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "preentangle",
    version,
    about = "Simulate and analyse post-selected two-qubit ensembles"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Monte-Carlo experiment and write a JSONL record file.
    Simulate {
        #[command(flatten)]
        overrides: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tomographic reconstruction of a selected sub-ensemble.
    Reconstruct {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value = "P")]
        stage: Stage,
        #[arg(long, default_value = "all")]
        criterion: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Reconstruct even when a setting pair has fewer than 50 counts.
        #[arg(long)]
        force: bool,
    },
    /// Entanglement certification of a records file or reconstruction report.
    Certify {
        /// Records file (JSONL) or a report written by `reconstruct`.
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value = "P")]
        stage: Stage,
        #[arg(long, default_value = "all")]
        criterion: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the closed-form conditionals and the inversion round trip.
    Oracle {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, hide = true)]
        inject_sign_flip: bool,
    },
    /// Full analysis of a records file.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub runs: Option<u64>,
    #[arg(long)]
    pub scenario: Option<Scenario>,
}

/// Read the config file if given, apply overrides, validate.
pub fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(io_err(path))?;
            serde_json::from_str(&text).map_err(|e| CliError::Parse {
                path: path.clone(),
                line: e.line(),
                message: e.to_string(),
            })?
        }
        None => match (args.runs, args.seed) {
            (Some(n), Some(seed)) => ExperimentConfig::new(Scenario::Standard, n, seed),
            _ => {
                return Err(CliError::Usage(
                    "either --config or both --runs and --seed are required".into(),
                ))
            }
        },
    };
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(n) = args.runs {
        config.n_runs = n;
    }
    if let Some(s) = args.scenario {
        config.scenario = s;
    }
    config.validate()?;
    Ok(config)
}

/// Hex SHA-256 of the compact JSON form of the config.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&json)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RecordHeader {
    pub schema_version: u32,
    pub kind: String,
    pub config_hash: String,
    pub scenario: Scenario,
    pub config: ExperimentConfig,
}

impl RecordHeader {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: "records".into(),
            config_hash: config_hash(config),
            scenario: config.scenario,
            config: config.clone(),
        }
    }
}

fn write_line<T: Serialize>(w: &mut impl Write, value: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")
}

pub fn write_records(
    path: &Path,
    config: &ExperimentConfig,
    records: &[RunRecord],
) -> Result<(), CliError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    write_line(&mut w, &RecordHeader::new(config)).map_err(io_err(path))?;
    for r in records {
        write_line(&mut w, r).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Parse a record file, checking the header hash and run-id order.
pub fn read_records(path: &Path) -> Result<(RecordHeader, Vec<RunRecord>), CliError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines();
    let parse_err = |line: usize, message: String| CliError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let first = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?
        .map_err(io_err(path))?;
    let header: RecordHeader =
        serde_json::from_str(&first).map_err(|e| parse_err(1, format!("bad header: {e}")))?;
    if header.kind != "records" {
        return Err(parse_err(
            1,
            format!("expected kind `records`, found `{}`", header.kind),
        ));
    }
    if header.schema_version != SCHEMA_VERSION {
        return Err(parse_err(
            1,
            format!("unsupported schema version {}", header.schema_version),
        ));
    }
    if header.config_hash != config_hash(&header.config) {
        return Err(parse_err(
            1,
            "config hash does not match the embedded config".into(),
        ));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: RunRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(lineno, e.to_string()))?;
        if let Some(prev) = records.last().map(|p: &RunRecord| p.run_id) {
            if r.run_id <= prev {
                return Err(parse_err(
                    lineno,
                    format!("run id {} not above {prev}", r.run_id),
                ));
            }
        }
        records.push(r);
    }
    Ok((header, records))
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportMetadata {
    pub seed: u64,
    pub n_runs: u64,
    pub scenario: Scenario,
    pub config_hash: String,
    pub wall_time_seconds: f64,
}

impl ReportMetadata {
    fn new(header: &RecordHeader, started: Instant) -> Self {
        Self {
            seed: header.config.master_seed,
            n_runs: header.config.n_runs,
            scenario: header.scenario,
            config_hash: header.config_hash.clone(),
            wall_time_seconds: started.elapsed().as_secs_f64(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LabelStateSection {
    pub state: DensityMatrix<f64>,
    pub certification: CertificationReport<f64>,
    pub weights: Vec<LabelWeight>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AllRunsSection {
    pub reconstruction: ReconstructionResult<f64>,
    pub certification: CertificationReport<f64>,
    pub trace_distance_to_mixed: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FullSummary {
    /// In `PhiPlus, PhiMinus, PsiPlus, PsiMinus` order.
    pub bell_frequencies: [f64; 4],
    pub all_runs: AllRunsSection,
    pub stages: Vec<StageComparison<f64>>,
    pub contradictions: Vec<ContradictionReport<f64>>,
    /// Partner qubit conditioned on the other qubit's outcome within the
    /// headline Bell sub-ensemble (R stage, or P stage for D-CES).
    pub selection_dependence: Vec<SubEnsembleState<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pbr: Option<PbrSummary<f64>>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportFile {
    pub schema_version: u32,
    pub kind: &'static str,
    pub command: &'static str,
    pub metadata: ReportMetadata,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<ReconstructionResult<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certification: Option<CertificationReport<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_state: Option<LabelStateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contradiction: Option<ContradictionReport<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<FullSummary>,
}

impl ReportFile {
    fn new(command: &'static str, metadata: ReportMetadata) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: "report",
            command,
            metadata,
            reconstruction: None,
            certification: None,
            label_state: None,
            contradiction: None,
            summary: None,
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(io_err(path))
}

fn parse_criterion(expr: &str) -> Result<SelectionCriterion, CliError> {
    Ok(expr.parse()?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulationSummary {
    pub n_runs: u64,
    pub scenario: Scenario,
    pub config_hash: String,
    pub bell_frequencies: [f64; 4],
}

pub fn cmd_simulate(
    args: &ConfigArgs,
    out: &Path,
    log: &mut dyn Write,
) -> Result<SimulationSummary, CliError> {
    let config = load_config(args)?;
    let records = run_experiment::<f64>(&config)?;
    write_records(out, &config, &records)?;
    let summary = SimulationSummary {
        n_runs: config.n_runs,
        scenario: config.scenario,
        config_hash: config_hash(&config),
        bell_frequencies: bell_frequencies(&records),
    };
    let _ = writeln!(
        log,
        "wrote {} {} runs to {}",
        summary.n_runs,
        summary.scenario,
        out.display()
    );
    for (b, f) in BellState::ALL.iter().zip(summary.bell_frequencies) {
        let _ = writeln!(log, "  {b:<9} {f:.4}");
    }
    Ok(summary)
}

pub fn cmd_reconstruct(
    records_path: &Path,
    stage: Stage,
    criterion: &str,
    options: ReconstructOptions,
    out: Option<&Path>,
    log: &mut dyn Write,
) -> Result<ReportFile, CliError> {
    let started = Instant::now();
    let criterion = parse_criterion(criterion)?;
    let (header, records) = read_records(records_path)?;
    let result: ReconstructionResult<f64> = reconstruct(&records, stage, &criterion, options)?;
    let _ = writeln!(
        log,
        "stage {stage}, criterion `{criterion}`: {} runs selected",
        result.n_selected
    );
    if let Some(b) = criterion.single_bell() {
        let f = crate::tomography::fidelity_pure(
            &result.physical,
            crate::states::bell_state::<f64>(b).amplitudes(),
        )?;
        let _ = writeln!(log, "  fidelity to {b}: {f:.4}");
    }
    let mut report = ReportFile::new("reconstruct", ReportMetadata::new(&header, started));
    report.reconstruction = Some(result);
    if let Some(path) = out {
        write_json(path, &report)?;
    }
    Ok(report)
}

/// A report input must carry a reconstruction; its physical state and
/// correlator errors are certified as they stand.
fn certification_input_from_report(
    path: &Path,
    text: &str,
) -> Result<(DensityMatrix<f64>, CorrelatorTable<f64>), CliError> {
    let bad = |message: String| CliError::Parse {
        path: path.to_path_buf(),
        line: 1,
        message,
    };
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let recon = value
        .get("reconstruction")
        .ok_or_else(|| bad("report has no `reconstruction` section".into()))?;
    let physical: DensityMatrix<f64> =
        serde_json::from_value(recon["physical"].clone()).map_err(|e| bad(e.to_string()))?;
    let se: CorrelatorTable<f64> =
        serde_json::from_value(recon["standardErrors"].clone()).map_err(|e| bad(e.to_string()))?;
    Ok((physical, se))
}

pub fn cmd_certify(
    input: &Path,
    stage: Stage,
    criterion: &str,
    out: Option<&Path>,
    log: &mut dyn Write,
) -> Result<ReportFile, CliError> {
    let started = Instant::now();
    let text = std::fs::read_to_string(input).map_err(io_err(input))?;
    let first_line = text.lines().next().unwrap_or_default();
    let is_records = serde_json::from_str::<RecordHeader>(first_line).is_ok();
    let report = if is_records {
        let criterion = parse_criterion(criterion)?;
        let (header, records) = read_records(input)?;
        let recon: ReconstructionResult<f64> =
            reconstruct(&records, stage, &criterion, ReconstructOptions::default())?;
        let cert = certify(&recon.physical, Some(&recon.standard_errors))?;
        let has_labels = records.first().is_some_and(|r| r.alice_label.is_some());
        let label_state = if has_labels {
            let (state, weights) =
                ensemble_state_from_preps::<f64>(&records, &header.config, &criterion)?;
            let certification = certify(&state, None)?;
            Some(LabelStateSection {
                state,
                certification,
                weights,
            })
        } else {
            None
        };
        let contradiction = match criterion.single_bell() {
            Some(b)
                if has_labels && stage == Stage::P && criterion == SelectionCriterion::bell(b) =>
            {
                Some(contradiction_report(
                    &records,
                    &header.config,
                    b,
                    ReconstructOptions::default(),
                )?)
            }
            _ => None,
        };
        let mut report = ReportFile::new("certify", ReportMetadata::new(&header, started));
        report.reconstruction = Some(recon);
        report.certification = Some(cert);
        report.label_state = label_state;
        report.contradiction = contradiction;
        report
    } else {
        let (physical, se) = certification_input_from_report(input, &text)?;
        let value: serde_json::Value = serde_json::from_str(&text).expect("parsed above");
        let meta = &value["metadata"];
        let metadata = ReportMetadata {
            seed: meta["seed"].as_u64().unwrap_or_default(),
            n_runs: meta["nRuns"].as_u64().unwrap_or_default(),
            scenario: serde_json::from_value(meta["scenario"].clone()).unwrap_or_default(),
            config_hash: meta["configHash"].as_str().unwrap_or_default().to_string(),
            wall_time_seconds: started.elapsed().as_secs_f64(),
        };
        let mut report = ReportFile::new("certify", metadata);
        report.certification = Some(certify(&physical, Some(&se))?);
        report
    };
    if let Some(c) = &report.certification {
        let _ = writeln!(
            log,
            "tomographic state: {} (min PT eigenvalue {:.4}, negativity {:.4}, concurrence {:.4}, CHSH {:.4})",
            c.verdict, c.min_pt_eigenvalue, c.negativity, c.concurrence, c.chsh_max
        );
    }
    if let Some(l) = &report.label_state {
        let c = &l.certification;
        let _ = writeln!(
            log,
            "label-built state: {} (min PT eigenvalue {:.4}, negativity {:.4})",
            c.verdict, c.min_pt_eigenvalue, c.negativity
        );
    }
    if let Some(path) = out {
        write_json(path, &report)?;
    }
    Ok(report)
}

pub fn cmd_oracle(
    options: OracleOptions,
    out: Option<&Path>,
    log: &mut dyn Write,
) -> Result<OracleReport, CliError> {
    let report = run_oracle(options);
    let _ = writeln!(
        log,
        "{:<5} {:<9} {:<6} {:<5} {:>12} {:>12} {:>10}",
        "stage", "bell", "axes", "out", "closed", "brute", "diff"
    );
    let failures: Vec<_> = report.failures().collect();
    for c in &failures {
        let _ = writeln!(
            log,
            "{:<5} {:<9} {}{:<5} {}{:<4} {:>12.9} {:>12.9} {:>10.2e}",
            c.stage.to_string(),
            c.bell.to_string(),
            c.axis_a,
            c.axis_b,
            c.out_a,
            c.out_b,
            c.closed_form,
            c.brute_force,
            c.abs_diff
        );
    }
    let total = report.pre_checks.len() + report.post_checks.len();
    let _ = writeln!(
        log,
        "P-stage: {} identities, R-stage: {} identities, {} of {total} within {:e}",
        report.pre_checks.len(),
        report.post_checks.len(),
        total - failures.len(),
        report.tolerance
    );
    for (b, p) in BellState::ALL.iter().zip(report.bell_probabilities) {
        let _ = writeln!(log, "P[{b}] = {p:.15}");
    }
    for rt in &report.round_trips {
        let _ = writeln!(
            log,
            "round trip {:<15} max |Δ| = {:.2e}",
            rt.name, rt.max_abs_diff
        );
    }
    if let Some(path) = out {
        write_json(path, &report)?;
    }
    let bad_round_trips = report
        .round_trips
        .iter()
        .filter(|r| r.max_abs_diff > report.tolerance)
        .count();
    if !failures.is_empty() || bad_round_trips > 0 {
        return Err(CliError::OracleFailed(failures.len() + bad_round_trips));
    }
    Ok(report)
}

/// The Bell sub-ensemble singled out per scenario: `Φ⁺` for the two
/// preparation scenarios, `Ψ⁻` for D-CES with singlet inputs.
pub fn headline_bell(scenario: Scenario) -> BellState {
    match scenario {
        Scenario::Dces => BellState::PsiMinus,
        _ => BellState::PhiPlus,
    }
}

pub fn full_summary(header: &RecordHeader, records: &[RunRecord]) -> Result<FullSummary, CliError> {
    let options = ReconstructOptions::default();
    let all: ReconstructionResult<f64> =
        reconstruct(records, Stage::P, &SelectionCriterion::all(), options)?;
    let mixed = DensityMatrix::<f64>::maximally_mixed(4);
    let all_runs = AllRunsSection {
        certification: certify(&all.physical, Some(&all.standard_errors))?,
        trace_distance_to_mixed: trace_distance(all.physical.matrix(), mixed.matrix())
            .map_err(AnalysisError::from)?,
        reconstruction: all,
    };
    let mut stages = Vec::with_capacity(4);
    for b in BellState::ALL {
        stages.push(compare_stages::<f64>(records, b, options)?);
    }
    let has_labels = header.scenario != Scenario::Dces;
    let contradictions = if has_labels {
        BellState::ALL
            .iter()
            .map(|&b| contradiction_report(records, &header.config, b, options))
            .collect::<Result<_, _>>()?
    } else {
        Vec::new()
    };
    // In D-CES the outer qubits are already collapsed by P when R measures them.
    let (condition, target) = match header.scenario {
        Scenario::Dces => (Site::PA, Site::PB),
        _ => (Site::RC, Site::RD),
    };
    let selection_dependence =
        selection_dependence(records, headline_bell(header.scenario), condition, target)?;
    let pbr = match header.scenario {
        Scenario::Pbr => Some(pbr_summary(records, BellState::PhiPlus, options)?),
        _ => None,
    };
    Ok(FullSummary {
        bell_frequencies: bell_frequencies(records),
        all_runs,
        stages,
        contradictions,
        selection_dependence,
        pbr,
    })
}

pub fn cmd_report(
    records_path: &Path,
    out: &Path,
    log: &mut dyn Write,
) -> Result<ReportFile, CliError> {
    let started = Instant::now();
    let (header, records) = read_records(records_path)?;
    let summary = full_summary(&header, &records)?;
    let _ = writeln!(log, "{} runs, scenario {}", records.len(), header.scenario);
    for s in &summary.stages {
        let _ = writeln!(
            log,
            "  {:<9} n={:<7} F(P)={:.4} F(R)={:.4} D(P,R)={:.4} {}",
            s.bell.to_string(),
            s.n_selected,
            s.pre_fidelity,
            s.post_fidelity,
            s.trace_distance,
            s.pre_certification.verdict
        );
    }
    for c in &summary.contradictions {
        let _ = writeln!(
            log,
            "  {:<9} tomographic {} vs label-built {}",
            c.bell.to_string(),
            c.tomographic_certification.verdict,
            c.prep_label_certification.verdict
        );
    }
    let mut report = ReportFile::new("report", ReportMetadata::new(&header, started));
    report.summary = Some(summary);
    report.metadata.wall_time_seconds = started.elapsed().as_secs_f64();
    write_json(out, &report)?;
    Ok(report)
}

/// Dispatch a parsed command line; returns the process exit code.
pub fn run(cli: Cli, log: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Simulate { overrides, out } => cmd_simulate(&overrides, &out, log).map(drop),
        Command::Reconstruct {
            records,
            stage,
            criterion,
            out,
            force,
        } => {
            let options = ReconstructOptions {
                force,
                ..ReconstructOptions::default()
            };
            cmd_reconstruct(&records, stage, &criterion, options, out.as_deref(), log).map(drop)
        }
        Command::Certify {
            records,
            stage,
            criterion,
            out,
        } => cmd_certify(&records, stage, &criterion, out.as_deref(), log).map(drop),
        Command::Oracle {
            out,
            inject_sign_flip,
        } => cmd_oracle(OracleOptions { inject_sign_flip }, out.as_deref(), log).map(drop),
        Command::Report { records, out } => cmd_report(&records, &out, log).map(drop),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::new(Scenario::Standard, 10, 1);
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
        b.master_seed = 2;
        assert_ne!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn overrides_apply_and_validate() {
        let args = ConfigArgs {
            seed: Some(3),
            runs: Some(5),
            scenario: Some(Scenario::Pbr),
            ..ConfigArgs::default()
        };
        let cfg = load_config(&args).unwrap();
        assert_eq!(
            (cfg.master_seed, cfg.n_runs, cfg.scenario),
            (3, 5, Scenario::Pbr)
        );
        let err = load_config(&ConfigArgs {
            seed: Some(1),
            runs: Some(0),
            ..ConfigArgs::default()
        })
        .unwrap_err();
        assert!(err.to_string().contains("nRuns"));
        assert_eq!(err.exit_code(), 2);
        assert_eq!(
            load_config(&ConfigArgs::default()).unwrap_err().exit_code(),
            2
        );
    }

    #[test]
    fn exit_codes() {
        let empty = CliError::Tomography(TomographyError::EmptySelection {
            criterion: "q=PhiPlus".into(),
        });
        assert_eq!(empty.exit_code(), 2);
        assert!(empty.to_string().contains("empty selection"));
        assert_eq!(CliError::OracleFailed(3).exit_code(), 1);
        let analytic =
            CliError::Analysis(AnalysisError::Qmath(crate::qmath::QmathError::NonFinite));
        assert_eq!(analytic.exit_code(), 1);
    }

    #[test]
    fn headline_bell_per_scenario() {
        assert_eq!(headline_bell(Scenario::Standard), BellState::PhiPlus);
        assert_eq!(headline_bell(Scenario::Dces), BellState::PsiMinus);
    }
}

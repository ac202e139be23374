//! Batch command-line front end with JSON input and output.
//!
//! A command line resolves to a [`Manifest`] — the verb, its input files,
//! the tolerance, the seed, and an optional output path — which [`run`]
//! dispatches to the library and answers with a [`Report`]: the command
//! echo, a table of named verification items (each carrying the measured
//! residual and the cut it was held to, never a bare boolean), timing, and
//! the library version. Reports are deterministic for a fixed seed and
//! fixed inputs, timing aside.
//!
//! Exit codes: `0` when every item passes, `1` when any item fails, `2`
//! when the inputs themselves are unusable (unknown verbs, missing or
//! malformed files, models that do not validate, non-isometric dilation
//! certificates).
//!
//! # Verbs
//!
//! - `chsh score|selftest|extract-pvm|counterexample`
//! - `clifford rep|correlation|witness|ac-check` (sized by `--n`)
//! - `qcolor verify|extract`
//! - `scenario check`
//! - `schur build|hypotheses|selftest`
//! - `som validate|factor|dilate`
//! - `model correlation|support|split`
//! - `dilate verify`
//!
//! # JSON conventions
//!
//! Complex scalars are two-element `[re, im]` arrays, matrices row-major
//! nested arrays of them, and state vectors flat arrays of them. Reals
//! print as shortest round-trip decimals; NaN and infinities are rejected
//! on input and never produced on output.
//!
//! Model documents (`parse_model`):
//!
//! ```json
//! { "flavor": "tensor" | "commuting",
//!   "dims": [dA, dB] | [dH],
//!   "alice": { "kind": "povm"|"pvm"|"som"|"usom", "X": 2, "A": 2,
//!              "blocks": E[x][a] or E[x][x'][a][a'] },
//!   "bob":   { ... },
//!   "state": [[re, im], ...] }
//! ```
//!
//! Correlation documents carry `"kind": "ns"|"qns"|"cqns"`, a `"shape"`
//! (`[X, Y, A, B]` for ns/qns, `[X, Y, d]` for cqns), and a `"table"`
//! nested in index order — `[x][y][a][b]` of reals for ns,
//! `[x][x'][y][y'][a][a'][b][b']` of complex pairs for qns,
//! `[x][y][a][a'][b][b']` for cqns. Unit-family documents (`qcolor`) hold
//! `"units"` as `u[x][a][a']` matrices plus a `"traceState"` density
//! matrix. Scenario documents hold `"vertices"`, `"edges"` (vertex lists),
//! and an `"assignment"`; a product scenario instead holds two such
//! scenarios under `"factors"`. Schur ideal documents hold `"theta"`,
//! `"alpha"`, `"beta"` for the rotated S₃ state family. Matrix files are
//! bare row-major nested arrays.
//!
//! The default tolerance is `1e-9`; the `SELFTEST_TOL` environment
//! variable overrides it and the `--tol` flag wins over both. All
//! randomized internals are driven by `--seed` (default 0).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::chsh::{
    chsh_score, counterexample_som, extract_pvm, ideal_model, swap_selftest, OPTIMAL_BIAS,
};
use crate::clifford::{
    ac_words, check_ac, clifford_correlation, clifford_rep, moment_matrix_with_words,
    tracial_completion, witness_kernel, CorrelationMode,
};
use crate::dilation::{som_isometry, usom_dilate, verify_local_dilation, DilationReport, DilationVerdict};
use crate::games::{
    extract_pauli_form_seeded, gamma_correlation, product_scenario_check, scenario_check,
    verify_perfect, HomModel, Scenario,
};
use crate::matcore::{cr, CMatrix, C64};
use crate::models::{
    correlation_ns_tol, correlation_qns_tol, split_commuting_with_seed, support_data, validate,
    CqnsCorrelation, FamilyKind, Flavor, MeasurementFamily, Model, NsCorrelation, QnsCorrelation,
    Verdict,
};
use crate::schur::{rotated_psi, s3_irrep, schur_channel, schur_dilation_seeded, selftest_hypotheses};
use crate::{Error, Result};

/// A fully resolved run request: what to do, on which files, and under
/// which parameters. The `command` phrase includes any verb-level flags
/// (for example `clifford witness --n 2`); input files are listed
/// separately so paths never pass through tokenization.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub command: String,
    pub inputs: Vec<PathBuf>,
    pub tolerance: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

/// One named verification item: the measured value and/or residual, the
/// cut it was compared against (when one applies), and the local verdict.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Item {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cut: Option<f64>,
    pub verdict: String,
}

/// The serialized outcome of a run: command echo, per-item residual
/// table, overall verdict, timing, and library version.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub command: String,
    pub inputs: Vec<PathBuf>,
    pub tolerance: f64,
    pub seed: u64,
    pub version: String,
    pub elapsed_ms: f64,
    pub verdict: String,
    pub items: Vec<Item>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<Value>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.verdict == "pass")
    }
}

const PASS: &str = "pass";
const FAIL: &str = "fail";

fn verdict_str(pass: bool) -> String {
    (if pass { PASS } else { FAIL }).to_string()
}

/// A residual held to a cut.
fn residual_item(name: impl Into<String>, residual: f64, cut: f64) -> Item {
    Item {
        name: name.into(),
        value: None,
        residual: Some(residual),
        cut: Some(cut),
        verdict: verdict_str(residual <= cut),
    }
}

/// A reported quantity with no cut (always passes).
fn value_item(name: impl Into<String>, value: Value) -> Item {
    Item { name: name.into(), value: Some(value), residual: None, cut: None, verdict: verdict_str(true) }
}

/// A residual reported for auditability without a cut (always passes).
fn info_item(name: impl Into<String>, residual: f64) -> Item {
    Item { name: name.into(), value: None, residual: Some(residual), cut: None, verdict: verdict_str(true) }
}

/// A value judged by an explicit predicate (e.g. a lower-bound gate).
fn gate_item(name: impl Into<String>, value: Value, pass: bool) -> Item {
    Item { name: name.into(), value: Some(value), residual: None, cut: None, verdict: verdict_str(pass) }
}

/// Renders a [`Verdict`] as an item: the residual is the worst offending
/// magnitude (zero when valid), with the offending constraint named.
fn verdict_item(name: &str, v: &Verdict, cut: f64) -> Item {
    match v {
        Verdict::Valid => residual_item(name, 0.0, cut),
        Verdict::Violation { description, magnitude } => Item {
            name: format!("{name}: {description}"),
            value: None,
            residual: Some(*magnitude),
            cut: Some(cut),
            verdict: verdict_str(false),
        },
    }
}

/// Converts a verification-stage failure into a failing item so the run
/// exits 1 with the residual on record; input-stage errors (I/O, schema,
/// dimension, malformed artifacts) stay hard errors and exit 2.
fn soft_fail(name: &str, e: Error) -> Result<Item> {
    let fail = |name: String, residual: Option<f64>, cut: Option<f64>| Item {
        name,
        value: None,
        residual,
        cut,
        verdict: verdict_str(false),
    };
    match e {
        Error::Violation { description, magnitude } => {
            Ok(fail(format!("{name}: {description}"), Some(magnitude), None))
        }
        Error::NotOptimal { gap, gate } => {
            Ok(fail(format!("{name}: bias is not optimal"), Some(gap), Some(gate)))
        }
        Error::NotPsd { min_eigenvalue } => Ok(fail(
            format!("{name}: not positive semidefinite"),
            Some((-min_eigenvalue).max(0.0)),
            None,
        )),
        Error::NotHermitian { residual, tol } => {
            Ok(fail(format!("{name}: not Hermitian"), Some(residual), Some(tol)))
        }
        Error::NotEquivalent(detail) => Ok(fail(format!("{name}: {detail}"), None, None)),
        Error::NotConverged { max_word_len, detail } => Ok(fail(
            format!("{name}: word algebra not closed at length {max_word_len} ({detail})"),
            None,
            None,
        )),
        other => Err(other),
    }
}

/// Entry point for the `qst` binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let tolerance = match resolve_tolerance(cli.tol) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let (command, inputs) = verb_phrase(&cli.command);
    let manifest = Manifest {
        command,
        inputs,
        tolerance,
        seed: cli.seed.unwrap_or(0),
        output_path: cli.out.clone(),
    };
    match execute(&cli.command, &manifest) {
        Ok(report) => match emit(&report, manifest.output_path.as_deref()) {
            Ok(()) => ExitCode::from(u8::from(!report.passed())),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Runs a manifest through the same verb tree as the binary. The command
/// phrase is re-parsed, so `run` accepts exactly what the command line
/// accepts; unknown verbs come back as input errors.
pub fn run(manifest: &Manifest) -> Result<Report> {
    let mut argv: Vec<String> = vec!["qst".into()];
    argv.extend(manifest.command.split_whitespace().map(str::to_string));
    argv.extend(manifest.inputs.iter().map(|p| p.display().to_string()));
    let cli = Cli::try_parse_from(argv)
        .map_err(|e| Error::Invalid(format!("unknown command {:?}: {}", manifest.command, e.kind())))?;
    if !(manifest.tolerance > 0.0) || !manifest.tolerance.is_finite() {
        return Err(Error::Invalid(format!("tolerance must be positive, got {}", manifest.tolerance)));
    }
    execute(&cli.command, manifest)
}

/// Serializes the report to the output path, or to standard output.
fn emit(report: &Report, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

/// Tolerance resolution: `--tol` flag, then `SELFTEST_TOL`, then the
/// library default. Must be finite and positive.
fn resolve_tolerance(flag: Option<f64>) -> Result<f64> {
    let t = match flag {
        Some(t) => t,
        None => match std::env::var("SELFTEST_TOL") {
            Ok(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Invalid(format!("SELFTEST_TOL is not a number: {s:?}")))?,
            Err(_) => crate::DEFAULT_TOL,
        },
    };
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Invalid(format!("tolerance must be positive, got {t}")));
    }
    Ok(t)
}

#[derive(Parser)]
#[command(
    name = "qst",
    version,
    about = "Verification toolkit for operator-model self-testing",
    propagate_version = true
)]
struct Cli {
    /// Verification tolerance; overrides SELFTEST_TOL (default 1e-9).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Seed for all randomized internals (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the JSON report to this path instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// CHSH game: scoring, swap self-test, projective extraction, and the
    /// stochastic-operator-matrix counterexample.
    #[command(subcommand)]
    Chsh(ChshCmd),
    /// Clifford-algebra correlations, the entanglement witness, and
    /// anticommutation moment constraints.
    #[command(subcommand)]
    Clifford(CliffordCmd),
    /// The quantum graph-coloring game Hom(K4, Q2).
    #[command(subcommand)]
    Qcolor(QcolorCmd),
    /// Contextuality scenarios and their assignments.
    #[command(subcommand)]
    Scenario(ScenarioCmd),
    /// Schur-multiplier channels on S3 and their self-testing data.
    #[command(subcommand)]
    Schur(SchurCmd),
    /// Stochastic operator matrices: validation, Gram factorization, and
    /// unistochastic dilation.
    #[command(subcommand)]
    Som(SomCmd),
    /// Model-level utilities: correlations, support reduction, splitting.
    #[command(subcommand)]
    Model(ModelCmd),
    /// Local dilation verification against explicit isometries.
    #[command(subcommand)]
    Dilate(DilateCmd),
}

#[derive(Subcommand)]
enum ChshCmd {
    /// Win probability and bias of the model's correlation.
    Score { model: PathBuf },
    /// Swap-isometry self-test against the ideal CHSH model.
    Selftest { model: PathBuf },
    /// Projective regularization of an optimal model.
    ExtractPvm { model: PathBuf },
    /// SOM model with the ideal diagonal correlation but a non-vanishing
    /// off-diagonal obstruction.
    Counterexample,
}

#[derive(Subcommand)]
enum CliffordCmd {
    /// Generator relations of the 2^(n/2)-dimensional representation.
    Rep {
        #[arg(long)]
        n: usize,
    },
    /// The n-input Clifford correlation (canonical trace state, or an
    /// explicit bipartite state file).
    Correlation {
        #[arg(long)]
        n: usize,
        state: Option<PathBuf>,
    },
    /// Kernel of the witness n·I − Σ u_x ⊗ u_x.
    Witness {
        #[arg(long)]
        n: usize,
    },
    /// Anticommutation moment constraints m_ee − m_ww = 1/8 on the
    /// canonical correlation, or on the independent-commuting
    /// counterexample.
    AcCheck {
        #[arg(long)]
        n: usize,
        /// Replace the canonical model by the commuting pair of diagonal
        /// projections on C^4 (violates every pair constraint by 1/8).
        #[arg(long)]
        independent: bool,
    },
}

#[derive(Subcommand)]
enum QcolorCmd {
    /// Perfect-coloring conditions of the model's correlation.
    Verify { units: PathBuf },
    /// Recover the Pauli form of a faithful model.
    Extract { units: PathBuf },
}

#[derive(Subcommand)]
enum ScenarioCmd {
    /// Edge normalization (and, for products, no-signalling) of an
    /// assignment.
    Check { scenario: PathBuf },
}

#[derive(Subcommand)]
enum SchurCmd {
    /// Build the S3 Schur channel from an ideal-state file and certify it
    /// unital CPTP.
    Build { ideal: PathBuf },
    /// Marginal cyclicity and extremality rank of the ideal data.
    Hypotheses { ideal: PathBuf },
    /// Recover the ideal S3 data from a diagonal-USOM model by local
    /// dilation.
    Selftest { model: PathBuf, ideal: PathBuf },
}

#[derive(Subcommand)]
enum SomCmd {
    /// Family and state invariants, reported per side.
    Validate { model: PathBuf },
    /// Gram isometry factorization E[x][x'][a][a'] = V[a][x]† V[a'][x'].
    Factor { model: PathBuf },
    /// Halmos-type dilation to a compression of a block unitary.
    Dilate { model: PathBuf },
}

#[derive(Subcommand)]
enum ModelCmd {
    /// The model's correlation (classical table for POVM/PVM sides,
    /// quantum table for SOM sides).
    Correlation { model: PathBuf },
    /// Support projections, central support, and the reduced model.
    Support { model: PathBuf },
    /// Split a commuting model into a convex combination of components.
    Split { model: PathBuf },
}

#[derive(Subcommand)]
enum DilateCmd {
    /// Check that (model, isometries) locally dilate to the ideal model.
    Verify {
        model: PathBuf,
        ideal: PathBuf,
        v_a: PathBuf,
        v_b: PathBuf,
    },
}

/// The command phrase (verb plus inline flags) and input files, as echoed
/// in manifests and reports.
fn verb_phrase(c: &Command) -> (String, Vec<PathBuf>) {
    let one = |s: &str, p: &PathBuf| (s.to_string(), vec![p.clone()]);
    match c {
        Command::Chsh(ChshCmd::Score { model }) => one("chsh score", model),
        Command::Chsh(ChshCmd::Selftest { model }) => one("chsh selftest", model),
        Command::Chsh(ChshCmd::ExtractPvm { model }) => one("chsh extract-pvm", model),
        Command::Chsh(ChshCmd::Counterexample) => ("chsh counterexample".into(), vec![]),
        Command::Clifford(CliffordCmd::Rep { n }) => (format!("clifford rep --n {n}"), vec![]),
        Command::Clifford(CliffordCmd::Correlation { n, state }) => {
            (format!("clifford correlation --n {n}"), state.iter().cloned().collect())
        }
        Command::Clifford(CliffordCmd::Witness { n }) => (format!("clifford witness --n {n}"), vec![]),
        Command::Clifford(CliffordCmd::AcCheck { n, independent }) => {
            let flag = if *independent { " --independent" } else { "" };
            (format!("clifford ac-check --n {n}{flag}"), vec![])
        }
        Command::Qcolor(QcolorCmd::Verify { units }) => one("qcolor verify", units),
        Command::Qcolor(QcolorCmd::Extract { units }) => one("qcolor extract", units),
        Command::Scenario(ScenarioCmd::Check { scenario }) => one("scenario check", scenario),
        Command::Schur(SchurCmd::Build { ideal }) => one("schur build", ideal),
        Command::Schur(SchurCmd::Hypotheses { ideal }) => one("schur hypotheses", ideal),
        Command::Schur(SchurCmd::Selftest { model, ideal }) => {
            ("schur selftest".into(), vec![model.clone(), ideal.clone()])
        }
        Command::Som(SomCmd::Validate { model }) => one("som validate", model),
        Command::Som(SomCmd::Factor { model }) => one("som factor", model),
        Command::Som(SomCmd::Dilate { model }) => one("som dilate", model),
        Command::Model(ModelCmd::Correlation { model }) => one("model correlation", model),
        Command::Model(ModelCmd::Support { model }) => one("model support", model),
        Command::Model(ModelCmd::Split { model }) => one("model split", model),
        Command::Dilate(DilateCmd::Verify { model, ideal, v_a, v_b }) => (
            "dilate verify".into(),
            vec![model.clone(), ideal.clone(), v_a.clone(), v_b.clone()],
        ),
    }
}

fn execute(cmd: &Command, man: &Manifest) -> Result<Report> {
    let start = Instant::now();
    let (tol, seed) = (man.tolerance, man.seed);
    let (items, output) = match cmd {
        Command::Chsh(ChshCmd::Score { model }) => chsh_score_verb(model, tol)?,
        Command::Chsh(ChshCmd::Selftest { model }) => chsh_selftest_verb(model, tol)?,
        Command::Chsh(ChshCmd::ExtractPvm { model }) => chsh_extract_verb(model, tol)?,
        Command::Chsh(ChshCmd::Counterexample) => chsh_counterexample_verb(tol)?,
        Command::Clifford(CliffordCmd::Rep { n }) => clifford_rep_verb(*n, tol)?,
        Command::Clifford(CliffordCmd::Correlation { n, state }) => {
            clifford_correlation_verb(*n, state.as_deref(), tol)?
        }
        Command::Clifford(CliffordCmd::Witness { n }) => clifford_witness_verb(*n, tol)?,
        Command::Clifford(CliffordCmd::AcCheck { n, independent }) => {
            clifford_ac_verb(*n, *independent, tol)?
        }
        Command::Qcolor(QcolorCmd::Verify { units }) => qcolor_verify_verb(units, tol)?,
        Command::Qcolor(QcolorCmd::Extract { units }) => qcolor_extract_verb(units, tol, seed)?,
        Command::Scenario(ScenarioCmd::Check { scenario }) => scenario_check_verb(scenario, tol)?,
        Command::Schur(SchurCmd::Build { ideal }) => schur_build_verb(ideal, tol)?,
        Command::Schur(SchurCmd::Hypotheses { ideal }) => schur_hypotheses_verb(ideal, tol)?,
        Command::Schur(SchurCmd::Selftest { model, ideal }) => {
            schur_selftest_verb(model, ideal, tol, seed)?
        }
        Command::Som(SomCmd::Validate { model }) => som_validate_verb(model, tol)?,
        Command::Som(SomCmd::Factor { model }) => som_factor_verb(model, tol)?,
        Command::Som(SomCmd::Dilate { model }) => som_dilate_verb(model, tol)?,
        Command::Model(ModelCmd::Correlation { model }) => model_correlation_verb(model, tol)?,
        Command::Model(ModelCmd::Support { model }) => model_support_verb(model, tol)?,
        Command::Model(ModelCmd::Split { model }) => model_split_verb(model, tol, seed)?,
        Command::Dilate(DilateCmd::Verify { model, ideal, v_a, v_b }) => {
            dilate_verify_verb(model, ideal, v_a, v_b, tol)?
        }
    };
    let verdict = verdict_str(items.iter().all(|i| i.verdict == PASS));
    Ok(Report {
        command: man.command.clone(),
        inputs: man.inputs.clone(),
        tolerance: tol,
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        elapsed_ms: (start.elapsed().as_secs_f64() * 1e6).round() / 1e3,
        verdict,
        items,
        output,
    })
}

type VerbOut = Result<(Vec<Item>, Option<Value>)>;

// ---------------------------------------------------------------------------
// chsh

fn chsh_score_verb(path: &Path, tol: f64) -> VerbOut {
    let m = load_model(path, tol)?;
    let p = correlation_ns_tol(&m, tol)?;
    let (win, bias) = chsh_score(&p)?;
    let items = vec![
        value_item("winProb", json!(win)),
        value_item("bias", json!(bias)),
        info_item("optimalityGap", (bias - OPTIMAL_BIAS).abs()),
    ];
    Ok((items, None))
}

fn chsh_selftest_verb(path: &Path, tol: f64) -> VerbOut {
    let m = load_model(path, tol)?;
    match swap_selftest(&m, tol) {
        Ok(rep) => Ok(dilation_outcome(&rep, tol)),
        Err(e) => Ok((vec![soft_fail("selftest", e)?], None)),
    }
}

fn chsh_extract_verb(path: &Path, tol: f64) -> VerbOut {
    let m = load_model(path, tol)?;
    match extract_pvm(&m, tol) {
        Ok(ext) => {
            let shift = ns_max_diff(&correlation_ns_tol(&ext, tol)?, &correlation_ns_tol(&m, tol)?)?;
            let items = vec![
                verdict_item("alicePvm", &validate(&ext.alice, tol)?, tol),
                verdict_item("bobPvm", &validate(&ext.bob, tol)?, tol),
                info_item("correlationShift", shift),
            ];
            Ok((items, Some(model_to_json(&ext))))
        }
        Err(e) => Ok((vec![soft_fail("extraction", e)?], None)),
    }
}

fn chsh_counterexample_verb(tol: f64) -> VerbOut {
    let (m, obs) = counterexample_som()?;
    let diag = correlation_qns_tol(&m, tol)?.diagonal_ns()?;
    let ideal = correlation_ns_tol(&ideal_model(), tol)?;
    let items = vec![
        verdict_item("aliceSom", &validate(&m.alice, tol)?, tol),
        verdict_item("bobSom", &validate(&m.bob, tol)?, tol),
        residual_item("qnsDiagonalAgreement", ns_max_diff(&diag, &ideal)?, tol),
        gate_item(
            format!(
                "obstructionNorm(x={}, y={}, a={:?}, b={:?})",
                obs.x, obs.y, obs.a_pair, obs.b_pair
            ),
            json!(obs.norm),
            obs.norm > 0.1,
        ),
    ];
    Ok((items, Some(model_to_json(&m))))
}

// ---------------------------------------------------------------------------
// clifford

fn clifford_rep_verb(n: usize, tol: f64) -> VerbOut {
    let rep = clifford_rep(n)?;
    let (sq, anti) = rep.residuals();
    let items = vec![
        value_item("dim", json!(rep.dim())),
        residual_item("squareResidual", sq, tol),
        residual_item("anticommutationResidual", anti, tol),
    ];
    Ok((items, None))
}

fn clifford_correlation_verb(n: usize, state: Option<&Path>, tol: f64) -> VerbOut {
    let mode = match state {
        None => CorrelationMode::Canonical,
        Some(p) => CorrelationMode::State(load_state(p)?),
    };
    let corr = clifford_correlation(n, &mode)?;
    let items = vec![verdict_item("noSignalling", &corr.validate(tol), tol)];
    Ok((items, Some(ns_to_json(&corr))))
}

fn clifford_witness_verb(n: usize, tol: f64) -> VerbOut {
    let wk = witness_kernel(n)?;
    let mut items = vec![
        gate_item("kernelDim", json!(wk.kernel_dim), wk.kernel_dim == 1),
        residual_item("minEigenvalue", (-wk.min_eigenvalue).max(0.0), tol),
    ];
    if n == 2 && wk.kernel_dim >= 1 {
        let d = 1usize << (n / 2);
        let omega = CMatrix::from_fn(d * d, 1, |i, _| {
            cr(if i / d == i % d { 1.0 / (d as f64).sqrt() } else { 0.0 })
        });
        let overlap = wk.basis.column(0).inner(&omega).norm_sqr();
        items.push(residual_item("kernelOmegaOverlap", (1.0 - overlap).abs(), tol));
    }
    Ok((items, None))
}

fn clifford_ac_verb(n: usize, independent: bool, tol: f64) -> VerbOut {
    let (fams, corr) = if independent {
        if n != 2 {
            return Err(Error::Invalid(
                "the independent-commuting counterexample has two inputs; use --n 2".into(),
            ));
        }
        independent_pair()?
    } else {
        let rep = clifford_rep(n)?;
        (rep.projections(), clifford_correlation(n, &CorrelationMode::Canonical)?)
    };
    let labels: Vec<usize> = (0..n).collect();
    let words = ac_words(&labels);
    let completion = tracial_completion(&fams, &fams, &words)?;
    let mm = moment_matrix_with_words(&corr, &completion, &words)?;
    let ac = check_ac(&mm, &labels, tol)?;
    let items = ac
        .residuals
        .iter()
        .map(|((x, y), r)| residual_item(format!("acResidual({x},{y})"), *r, tol))
        .collect();
    Ok((items, Some(json!({ "moments": matrix_json(&mm.entries) }))))
}

/// Two commuting diagonal projections on C^4 with the tracial state: a
/// classical (hence anticommutation-free) binary model.
fn independent_pair() -> Result<(Vec<Vec<CMatrix>>, NsCorrelation)> {
    let diag = |d: [f64; 4]| CMatrix::from_fn(4, 4, |i, j| cr(if i == j { d[i] } else { 0.0 }));
    let p = diag([1.0, 1.0, 0.0, 0.0]);
    let q = diag([1.0, 0.0, 1.0, 0.0]);
    let id = CMatrix::identity(4);
    let fams = vec![vec![p.clone(), id.sub(&p)], vec![q.clone(), id.sub(&q)]];
    let mut t = vec![0.0; 16];
    for x in 0..2 {
        for y in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    t[((x * 2 + y) * 2 + a) * 2 + b] = fams[x][a].mul(&fams[y][b]).trace().re / 4.0;
                }
            }
        }
    }
    Ok((fams, NsCorrelation::new(2, 2, 2, 2, t)?))
}

// ---------------------------------------------------------------------------
// qcolor, scenario

fn qcolor_verify_verb(path: &Path, tol: f64) -> VerbOut {
    let hm = load_hom_model(path)?;
    let g = gamma_correlation(&hm)?;
    match verify_perfect(&g, 2, tol) {
        Ok(pc) => {
            let diag = pc.diagonal_residuals.iter().cloned().fold(0.0, f64::max);
            let off = pc.offdiagonal_residuals.iter().map(|(_, r)| *r).fold(0.0, f64::max);
            let items = vec![
                residual_item("diagonalWorst", diag, tol),
                residual_item("offdiagonalWorst", off, tol),
            ];
            Ok((items, None))
        }
        Err(e) => Ok((vec![soft_fail("perfectColoring", e)?], None)),
    }
}

fn qcolor_extract_verb(path: &Path, tol: f64, seed: u64) -> VerbOut {
    let hm = load_hom_model(path)?;
    match extract_pauli_form_seeded(&hm, tol, seed) {
        Ok((v, ndim, rep)) => {
            let cut = 100.0 * tol;
            let items = vec![
                value_item("nDim", json!(ndim)),
                residual_item("unitResidual", rep.unit_residual, cut),
                residual_item("structureResidualZ", rep.structure_residuals[0], cut),
                residual_item("structureResidualX", rep.structure_residuals[1], cut),
                residual_item("structureResidualY", rep.structure_residuals[2], cut),
                residual_item("traceResidual", rep.trace_residual, cut),
                residual_item("unitarityResidual", rep.unitarity_residual, cut),
            ];
            Ok((items, Some(json!({ "isometry": matrix_json(&v) }))))
        }
        Err(e) => Ok((vec![soft_fail("extraction", e)?], None)),
    }
}

fn scenario_check_verb(path: &Path, tol: f64) -> VerbOut {
    let (check, vertices, edges) = match load_scenario(path)? {
        ScenarioDoc::Single(s, p) => {
            let c = scenario_check(&s, &p, tol)?;
            (c, s.vertices, s.edges.len())
        }
        ScenarioDoc::Product(g, h, p) => {
            let c = product_scenario_check(&g, &h, &p, tol)?;
            (c, g.vertices * h.vertices, g.edges.len() + h.edges.len())
        }
    };
    let mut items = vec![
        value_item("vertices", json!(vertices)),
        value_item("edges", json!(edges)),
    ];
    for (k, r) in check.edge_residuals.iter().enumerate() {
        items.push(residual_item(format!("edgeResidual({k})"), *r, tol));
    }
    if !check.ns_residuals.is_empty() {
        let worst = check.ns_residuals.iter().cloned().fold(0.0, f64::max);
        items.push(residual_item("noSignallingWorst", worst, tol));
    }
    items.push(verdict_item("assignment", &check.verdict, tol));
    Ok((items, None))
}

// ---------------------------------------------------------------------------
// schur

fn schur_build_verb(path: &Path, tol: f64) -> VerbOut {
    let psi = load_ideal_state(path)?;
    let rep = s3_irrep();
    let data = schur_channel(&rep, &rep, &psi)?;
    let items = vec![
        verdict_item("channel", &data.validate(tol)?, tol),
        residual_item("normalizationAtIdentity", (data.u[0][0] - cr(1.0)).norm(), tol),
    ];
    let u_rows: Vec<Value> = data
        .u
        .iter()
        .map(|row| Value::Array(row.iter().map(|z| complex_json(*z)).collect()))
        .collect();
    Ok((items, Some(json!({ "u": Value::Array(u_rows) }))))
}

fn schur_hypotheses_verb(path: &Path, tol: f64) -> VerbOut {
    let psi = load_ideal_state(path)?;
    let rep = s3_irrep();
    let h = selftest_hypotheses(&rep, &rep, &psi, tol)?;
    let full = (rep.dim() * rep.dim()).pow(2);
    let items = vec![
        gate_item("marginallyCyclic", json!(h.marginally_cyclic), h.marginally_cyclic),
        gate_item(
            format!("extremalityRank(target={full})"),
            json!(h.extremality_rank),
            h.extremality_rank == full,
        ),
    ];
    Ok((items, None))
}

fn schur_selftest_verb(model: &Path, ideal: &Path, tol: f64, seed: u64) -> VerbOut {
    let m = load_model(model, tol)?;
    let psi = load_ideal_state(ideal)?;
    let rep = s3_irrep();
    match schur_dilation_seeded(&m, &rep, &rep, &psi, tol, seed) {
        Ok(rep) => Ok(dilation_outcome(&rep, tol)),
        Err(e) => Ok((vec![soft_fail("schurSelftest", e)?], None)),
    }
}

// ---------------------------------------------------------------------------
// som

fn som_validate_verb(path: &Path, tol: f64) -> VerbOut {
    let m = load_model_unchecked(path)?;
    let items = vec![
        verdict_item("model", &m.validate(tol)?, tol),
        verdict_item("alice", &validate(&m.alice, tol)?, tol),
        verdict_item("bob", &validate(&m.bob, tol)?, tol),
        residual_item("stateNorm", (m.state.norm() - 1.0).abs(), tol),
    ];
    Ok((items, None))
}

fn som_factor_verb(path: &Path, tol: f64) -> VerbOut {
    let m = load_model(path, tol)?;
    let mut items = Vec::new();
    let mut payload = serde_json::Map::new();
    let mut done = 0;
    for (name, fam) in [("alice", &m.alice), ("bob", &m.bob)] {
        if fam.kind().is_flat() {
            continue;
        }
        done += 1;
        match som_isometry(fam, tol) {
            Ok(iso) => {
                let scale = 100.0 * tol * ((fam.x_count() * fam.h()) as f64).sqrt().max(1.0);
                items.push(value_item(format!("{name}.auxDim"), json!(iso.k)));
                items.push(residual_item(
                    format!("{name}.isometryResidual"),
                    iso.isometry_residual(),
                    scale,
                ));
                items.push(residual_item(
                    format!("{name}.reconstructionResidual"),
                    iso.reconstruction_residual(fam),
                    scale,
                ));
                payload.insert(name.to_string(), json!({ "stacked": matrix_json(&iso.stacked()) }));
            }
            Err(e) => items.push(soft_fail(&format!("{name}.factorization"), e)?),
        }
    }
    if done == 0 {
        return Err(Error::Invalid("som factor needs a SOM/USOM family on at least one side".into()));
    }
    Ok((items, Some(Value::Object(payload))))
}

fn som_dilate_verb(path: &Path, tol: f64) -> VerbOut {
    let m = load_model(path, tol)?;
    let mut items = Vec::new();
    let mut payload = serde_json::Map::new();
    let mut done = 0;
    for (name, fam) in [("alice", &m.alice), ("bob", &m.bob)] {
        if fam.kind().is_flat() {
            continue;
        }
        done += 1;
        match usom_dilate(fam) {
            Ok((w, u)) => {
                let l = w.rows();
                let xc = fam.x_count();
                let id = CMatrix::identity(u.rows());
                let unit = u.dagger().mul(&u).dist(&id).max(u.mul(&u.dagger()).dist(&id));
                let mut rec = 0.0f64;
                for x in 0..xc {
                    for xp in 0..xc {
                        for a in 0..xc {
                            for ap in 0..xc {
                                let ua = u.block(a * l, x * l, l, l);
                                let ub = u.block(ap * l, xp * l, l, l);
                                let got = w.dagger().mul(&ua.dagger()).mul(&ub).mul(&w);
                                rec = rec.max(got.dist(fam.som_block(x, xp, a, ap)));
                            }
                        }
                    }
                }
                items.push(value_item(format!("{name}.auxDim"), json!(l - fam.h())));
                items.push(residual_item(format!("{name}.unitarityResidual"), unit, tol));
                items.push(residual_item(format!("{name}.reconstructionResidual"), rec, tol));
                payload.insert(
                    name.to_string(),
                    json!({ "w": matrix_json(&w), "u": matrix_json(&u) }),
                );
            }
            Err(e) => items.push(soft_fail(&format!("{name}.dilation"), e)?),
        }
    }
    if done == 0 {
        return Err(Error::Invalid("som dilate needs a SOM/USOM family on at least one side".into()));
    }
    Ok((items, Some(Value::Object(payload))))
}

// ---------------------------------------------------------------------------
// model

fn model_correlation_verb(path: &Path, tol: f64) -> VerbOut {
    let m = load_model(path, tol)?;
    match (m.alice.kind().is_flat(), m.bob.kind().is_flat()) {
        (true, true) => {
            let p = correlation_ns_tol(&m, tol)?;
            Ok((vec![verdict_item("noSignalling", &p.validate(tol), tol)], Some(ns_to_json(&p))))
        }
        (false, false) => {
            let q = correlation_qns_tol(&m, tol)?;
            Ok((vec![verdict_item("qnsValidity", &q.validate(tol)?, tol)], Some(qns_to_json(&q))))
        }
        _ => Err(Error::Invalid(
            "model correlation needs both sides flat (POVM/PVM) or both paired (SOM/USOM)".into(),
        )),
    }
}

fn model_support_verb(path: &Path, tol: f64) -> VerbOut {
    let m = load_model(path, tol)?;
    match support_data(&m, 8, tol) {
        Ok(sd) => {
            let shift = correlation_max_diff(&m, &sd.reduced, tol)?;
            let items = vec![
                value_item("fullRank", json!(sd.full_rank)),
                value_item("centrallySupported", json!(sd.centrally_supported)),
                value_item("supportRankA", json!(sd.eps_a.trace().re.round() as i64)),
                value_item("supportRankB", json!(sd.eps_b.trace().re.round() as i64)),
                residual_item("reducedCorrelationShift", shift, tol),
            ];
            Ok((items, Some(model_to_json(&sd.reduced))))
        }
        Err(e) => Ok((vec![soft_fail("support", e)?], None)),
    }
}

fn model_split_verb(path: &Path, tol: f64, seed: u64) -> VerbOut {
    let m = load_model(path, tol)?;
    match split_commuting_with_seed(&m, tol, seed) {
        Ok(parts) => {
            let wsum: f64 = parts.iter().map(|(w, _)| *w).sum();
            let wmin = parts.iter().map(|(w, _)| *w).fold(f64::INFINITY, f64::min);
            let reassembly = reassembly_residual(&m, &parts, tol)?;
            let items = vec![
                value_item("componentCount", json!(parts.len())),
                value_item("weightMin", json!(wmin)),
                residual_item("weightSum", (wsum - 1.0).abs(), tol),
                residual_item("reassemblyResidual", reassembly, tol),
            ];
            let weights: Vec<Value> = parts.iter().map(|(w, _)| json!(w)).collect();
            Ok((items, Some(json!({ "weights": Value::Array(weights) }))))
        }
        Err(e) => Ok((vec![soft_fail("split", e)?], None)),
    }
}

fn dilate_verify_verb(model: &Path, ideal: &Path, v_a: &Path, v_b: &Path, tol: f64) -> VerbOut {
    let s = load_model(model, tol)?;
    let s_tilde = load_model(ideal, tol)?;
    let va = load_matrix_file(v_a)?;
    let vb = load_matrix_file(v_b)?;
    let rep = verify_local_dilation(&s, &s_tilde, &va, &vb, tol)?;
    Ok(dilation_outcome(&rep, tol))
}

// ---------------------------------------------------------------------------
// shared renderers and comparisons

/// Items and payload for a dilation report: the worst generator pair, the
/// per-pair residual table when it is small enough to read, and the
/// auxiliary state.
fn dilation_outcome(rep: &DilationReport, tol: f64) -> (Vec<Item>, Option<Value>) {
    if rep.verdict == DilationVerdict::StateMisaligned {
        let item = Item {
            name: "auxiliaryStateOverlap: state misaligned with the ideal".into(),
            value: Some(json!(rep.xi_aux.norm())),
            residual: None,
            cut: None,
            verdict: verdict_str(false),
        };
        return (vec![item], None);
    }
    let mut items = Vec::new();
    if let Some(((i, j), r)) = rep.worst_pair {
        items.push(residual_item(format!("worstGeneratorResidual(a={i}, b={j})"), r, tol));
    }
    if rep.residuals.len() <= 16 {
        for (k, r) in rep.residuals.iter().enumerate() {
            items.push(residual_item(format!("generatorResidual({k})"), *r, tol));
        }
    } else {
        items.push(value_item("generatorPairs", json!(rep.residuals.len())));
    }
    let payload = json!({
        "residuals": rep.residuals,
        "xiAux": state_json(&rep.xi_aux),
    });
    (items, Some(payload))
}

fn ns_max_diff(p: &NsCorrelation, q: &NsCorrelation) -> Result<f64> {
    if p.table().len() != q.table().len() {
        return Err(Error::Dimension("correlation tables differ in shape".into()));
    }
    Ok(p.table()
        .iter()
        .zip(q.table())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

fn qns_max_diff(p: &QnsCorrelation, q: &QnsCorrelation) -> Result<f64> {
    let shape = (p.x_count, p.y_count, p.a_count, p.b_count);
    if shape != (q.x_count, q.y_count, q.a_count, q.b_count) {
        return Err(Error::Dimension("quantum correlation tables differ in shape".into()));
    }
    let mut worst = 0.0f64;
    for x in 0..p.x_count {
        for xp in 0..p.x_count {
            for y in 0..p.y_count {
                for yp in 0..p.y_count {
                    for a in 0..p.a_count {
                        for ap in 0..p.a_count {
                            for b in 0..p.b_count {
                                for bp in 0..p.b_count {
                                    let d = p.value(x, xp, y, yp, a, ap, b, bp)
                                        - q.value(x, xp, y, yp, a, ap, b, bp);
                                    worst = worst.max(d.norm());
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(worst)
}

/// Largest entrywise difference between the correlations of two models of
/// the same measurement kind.
fn correlation_max_diff(a: &Model, b: &Model, tol: f64) -> Result<f64> {
    if a.alice.kind().is_flat() && a.bob.kind().is_flat() {
        ns_max_diff(&correlation_ns_tol(a, tol)?, &correlation_ns_tol(b, tol)?)
    } else {
        qns_max_diff(&correlation_qns_tol(a, tol)?, &correlation_qns_tol(b, tol)?)
    }
}

/// `max |f_S − Σ w_i f_{S_i}|` over the correlation table.
fn reassembly_residual(m: &Model, parts: &[(f64, Model)], tol: f64) -> Result<f64> {
    if m.alice.kind().is_flat() && m.bob.kind().is_flat() {
        let whole = correlation_ns_tol(m, tol)?;
        let mut acc = vec![0.0; whole.table().len()];
        for (w, part) in parts {
            let p = correlation_ns_tol(part, tol)?;
            if p.table().len() != acc.len() {
                return Err(Error::Dimension("component correlation has a different shape".into()));
            }
            for (s, v) in acc.iter_mut().zip(p.table()) {
                *s += w * v;
            }
        }
        Ok(whole
            .table()
            .iter()
            .zip(&acc)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    } else {
        let whole = correlation_qns_tol(m, tol)?;
        let mut worst = 0.0f64;
        let qs: Vec<(f64, QnsCorrelation)> = parts
            .iter()
            .map(|(w, part)| Ok((*w, correlation_qns_tol(part, tol)?)))
            .collect::<Result<_>>()?;
        for x in 0..whole.x_count {
            for xp in 0..whole.x_count {
                for y in 0..whole.y_count {
                    for yp in 0..whole.y_count {
                        for a in 0..whole.a_count {
                            for ap in 0..whole.a_count {
                                for b in 0..whole.b_count {
                                    for bp in 0..whole.b_count {
                                        let mut acc = C64::new(0.0, 0.0);
                                        for (w, q) in &qs {
                                            acc += q.value(x, xp, y, yp, a, ap, b, bp).scale(*w);
                                        }
                                        let d = whole.value(x, xp, y, yp, a, ap, b, bp) - acc;
                                        worst = worst.max(d.norm());
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(worst)
    }
}

// ---------------------------------------------------------------------------
// JSON parsing

fn schema(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema { path: path.into(), message: message.into() }
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a serde_json::Map<String, Value>> {
    v.as_object().ok_or_else(|| schema(path, "expected an object"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| schema(path, "expected an array"))
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| schema(path, "expected a string"))
}

fn as_finite(v: &Value, path: &str) -> Result<f64> {
    let x = v.as_f64().ok_or_else(|| schema(path, "expected a number"))?;
    if !x.is_finite() {
        return Err(schema(path, "non-finite numbers are not permitted"));
    }
    Ok(x)
}

fn as_usize(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| schema(path, "expected a non-negative integer"))
}

fn field<'a>(v: &'a Value, path: &str, key: &str) -> Result<&'a Value> {
    as_object(v, path)?
        .get(key)
        .ok_or_else(|| schema(format!("{path}.{key}"), "missing field"))
}

fn parse_complex(v: &Value, path: &str) -> Result<C64> {
    let arr = as_array(v, path)?;
    if arr.len() != 2 {
        return Err(schema(path, format!("a complex scalar is [re, im]; got {} entries", arr.len())));
    }
    Ok(C64::new(as_finite(&arr[0], &format!("{path}[0]"))?, as_finite(&arr[1], &format!("{path}[1]"))?))
}

fn parse_matrix(v: &Value, path: &str) -> Result<CMatrix> {
    let rows = as_array(v, path)?;
    if rows.is_empty() {
        return Err(schema(path, "matrix needs at least one row"));
    }
    let mut data = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let rpath = format!("{path}[{i}]");
        let cols = as_array(row, &rpath)?;
        let mut out = Vec::with_capacity(cols.len());
        for (j, z) in cols.iter().enumerate() {
            out.push(parse_complex(z, &format!("{rpath}[{j}]"))?);
        }
        data.push(out);
    }
    CMatrix::from_rows(&data)
}

fn parse_state(v: &Value, path: &str) -> Result<CMatrix> {
    let entries = as_array(v, path)?;
    if entries.is_empty() {
        return Err(schema(path, "state needs at least one entry"));
    }
    let mut out = CMatrix::zeros(entries.len(), 1);
    for (i, z) in entries.iter().enumerate() {
        out.set(i, 0, parse_complex(z, &format!("{path}[{i}]"))?);
    }
    Ok(out)
}

fn parse_family(v: &Value, path: &str) -> Result<MeasurementFamily> {
    let kind = as_str(field(v, path, "kind")?, &format!("{path}.kind"))?;
    let x_count = as_usize(field(v, path, "X")?, &format!("{path}.X"))?;
    let a_count = as_usize(field(v, path, "A")?, &format!("{path}.A"))?;
    let blocks = field(v, path, "blocks")?;
    let bpath = format!("{path}.blocks");
    let outer = as_array(blocks, &bpath)?;
    if outer.len() != x_count {
        return Err(schema(&bpath, format!("expected {x_count} inputs, got {}", outer.len())));
    }
    let flat = |ctor: fn(Vec<Vec<CMatrix>>) -> Result<MeasurementFamily>| -> Result<MeasurementFamily> {
        let mut all = Vec::with_capacity(x_count);
        for (x, row) in outer.iter().enumerate() {
            let rpath = format!("{bpath}[{x}]");
            let row = as_array(row, &rpath)?;
            if row.len() != a_count {
                return Err(schema(&rpath, format!("expected {a_count} outcomes, got {}", row.len())));
            }
            let mut mats = Vec::with_capacity(a_count);
            for (a, m) in row.iter().enumerate() {
                mats.push(parse_matrix(m, &format!("{rpath}[{a}]"))?);
            }
            all.push(mats);
        }
        ctor(all)
    };
    let paired = |ctor: fn(Vec<Vec<Vec<Vec<CMatrix>>>>) -> Result<MeasurementFamily>| -> Result<MeasurementFamily> {
        let mut all = Vec::with_capacity(x_count);
        for (x, lvl1) in outer.iter().enumerate() {
            let p1 = format!("{bpath}[{x}]");
            let lvl1 = as_array(lvl1, &p1)?;
            if lvl1.len() != x_count {
                return Err(schema(&p1, format!("expected {x_count} entries, got {}", lvl1.len())));
            }
            let mut by_xp = Vec::with_capacity(x_count);
            for (xp, lvl2) in lvl1.iter().enumerate() {
                let p2 = format!("{p1}[{xp}]");
                let lvl2 = as_array(lvl2, &p2)?;
                if lvl2.len() != a_count {
                    return Err(schema(&p2, format!("expected {a_count} entries, got {}", lvl2.len())));
                }
                let mut by_a = Vec::with_capacity(a_count);
                for (a, lvl3) in lvl2.iter().enumerate() {
                    let p3 = format!("{p2}[{a}]");
                    let lvl3 = as_array(lvl3, &p3)?;
                    if lvl3.len() != a_count {
                        return Err(schema(&p3, format!("expected {a_count} entries, got {}", lvl3.len())));
                    }
                    let mut by_ap = Vec::with_capacity(a_count);
                    for (ap, m) in lvl3.iter().enumerate() {
                        by_ap.push(parse_matrix(m, &format!("{p3}[{ap}]"))?);
                    }
                    by_a.push(by_ap);
                }
                by_xp.push(by_a);
            }
            all.push(by_xp);
        }
        ctor(all)
    };
    match kind {
        "povm" => flat(MeasurementFamily::povm),
        "pvm" => flat(MeasurementFamily::pvm),
        "som" => paired(MeasurementFamily::som),
        "usom" => paired(MeasurementFamily::usom),
        other => Err(schema(
            format!("{path}.kind"),
            format!("unknown kind {other:?} (expected povm, pvm, som, or usom)"),
        )),
    }
}

fn parse_model_value(v: &Value) -> Result<Model> {
    let flavor_s = as_str(field(v, "$", "flavor")?, "$.flavor")?;
    let dims_v = as_array(field(v, "$", "dims")?, "$.dims")?;
    let dims: Vec<usize> = dims_v
        .iter()
        .enumerate()
        .map(|(i, d)| as_usize(d, &format!("$.dims[{i}]")))
        .collect::<Result<_>>()?;
    let flavor = match (flavor_s, dims.as_slice()) {
        ("tensor", [a, b]) => Flavor::TensorSplit { dim_a: *a, dim_b: *b },
        ("commuting", [h]) => Flavor::Commuting { dim_h: *h },
        ("tensor", _) => return Err(schema("$.dims", "tensor flavor needs dims [dA, dB]")),
        ("commuting", _) => return Err(schema("$.dims", "commuting flavor needs dims [dH]")),
        (other, _) => {
            return Err(schema("$.flavor", format!("unknown flavor {other:?} (expected tensor or commuting)")))
        }
    };
    let alice = parse_family(field(v, "$", "alice")?, "$.alice")?;
    let bob = parse_family(field(v, "$", "bob")?, "$.bob")?;
    let state = parse_state(field(v, "$", "state")?, "$.state")?;
    Model::new(flavor, alice, bob, state)
}

/// Parses a model document and validates it eagerly at the library default
/// tolerance. Schema problems carry the offending path; validation
/// problems carry the offending residual.
pub fn parse_model(bytes: &[u8]) -> Result<Model> {
    parse_model_with_tol(bytes, crate::DEFAULT_TOL)
}

/// [`parse_model`] with an explicit validation tolerance.
pub fn parse_model_with_tol(bytes: &[u8], tol: f64) -> Result<Model> {
    let m = parse_model_unchecked(bytes)?;
    m.require_valid(tol)?;
    Ok(m)
}

/// Parses a model document without running numeric validation (used by
/// `som validate`, whose whole purpose is rendering the verdicts).
pub fn parse_model_unchecked(bytes: &[u8]) -> Result<Model> {
    let v: Value = serde_json::from_slice(bytes)?;
    parse_model_value(&v)
}

fn load_model(path: &Path, tol: f64) -> Result<Model> {
    parse_model_with_tol(&std::fs::read(path)?, tol)
}

fn load_model_unchecked(path: &Path) -> Result<Model> {
    parse_model_unchecked(&std::fs::read(path)?)
}

fn load_matrix_file(path: &Path) -> Result<CMatrix> {
    let v: Value = serde_json::from_slice(&std::fs::read(path)?)?;
    parse_matrix(&v, "$")
}

fn load_state(path: &Path) -> Result<CMatrix> {
    let v: Value = serde_json::from_slice(&std::fs::read(path)?)?;
    parse_state(&v, "$")
}

/// Unit-family document for the coloring game: `units[x][a][a']` matrices
/// and the trace state.
fn load_hom_model(path: &Path) -> Result<HomModel> {
    let v: Value = serde_json::from_slice(&std::fs::read(path)?)?;
    let outer = as_array(field(&v, "$", "units")?, "$.units")?;
    let mut units = Vec::with_capacity(outer.len());
    for (x, per_x) in outer.iter().enumerate() {
        let p1 = format!("$.units[{x}]");
        let per_x = as_array(per_x, &p1)?;
        let mut by_a = Vec::with_capacity(per_x.len());
        for (a, per_a) in per_x.iter().enumerate() {
            let p2 = format!("{p1}[{a}]");
            let per_a = as_array(per_a, &p2)?;
            let mut by_ap = Vec::with_capacity(per_a.len());
            for (ap, m) in per_a.iter().enumerate() {
                by_ap.push(parse_matrix(m, &format!("{p2}[{ap}]"))?);
            }
            by_a.push(by_ap);
        }
        units.push(by_a);
    }
    let trace_state = parse_matrix(field(&v, "$", "traceState")?, "$.traceState")?;
    HomModel::new(units, trace_state)
}

enum ScenarioDoc {
    Single(Scenario, Vec<f64>),
    Product(Scenario, Scenario, Vec<f64>),
}

fn parse_scenario_value(v: &Value, path: &str) -> Result<Scenario> {
    let vertices = as_usize(field(v, path, "vertices")?, &format!("{path}.vertices"))?;
    let edges_v = as_array(field(v, path, "edges")?, &format!("{path}.edges"))?;
    let mut edges = Vec::with_capacity(edges_v.len());
    for (k, e) in edges_v.iter().enumerate() {
        let epath = format!("{path}.edges[{k}]");
        let e = as_array(e, &epath)?;
        let edge: Vec<usize> = e
            .iter()
            .enumerate()
            .map(|(i, x)| as_usize(x, &format!("{epath}[{i}]")))
            .collect::<Result<_>>()?;
        edges.push(edge);
    }
    Scenario::new(vertices, edges)
}

fn load_scenario(path: &Path) -> Result<ScenarioDoc> {
    let v: Value = serde_json::from_slice(&std::fs::read(path)?)?;
    let assignment_v = as_array(field(&v, "$", "assignment")?, "$.assignment")?;
    let assignment: Vec<f64> = assignment_v
        .iter()
        .enumerate()
        .map(|(i, x)| as_finite(x, &format!("$.assignment[{i}]")))
        .collect::<Result<_>>()?;
    if let Some(factors) = as_object(&v, "$")?.get("factors") {
        let factors = as_array(factors, "$.factors")?;
        if factors.len() != 2 {
            return Err(schema("$.factors", format!("expected 2 factors, got {}", factors.len())));
        }
        let g = parse_scenario_value(&factors[0], "$.factors[0]")?;
        let h = parse_scenario_value(&factors[1], "$.factors[1]")?;
        return Ok(ScenarioDoc::Product(g, h, assignment));
    }
    Ok(ScenarioDoc::Single(parse_scenario_value(&v, "$")?, assignment))
}

/// Ideal-state document for the S₃ Schur family: the rotated state
/// `ψ = α e_θ ⊗ e_θ + β f_θ ⊗ f_θ`.
fn load_ideal_state(path: &Path) -> Result<CMatrix> {
    let v: Value = serde_json::from_slice(&std::fs::read(path)?)?;
    let theta = as_finite(field(&v, "$", "theta")?, "$.theta")?;
    let alpha = parse_complex(field(&v, "$", "alpha")?, "$.alpha")?;
    let beta = parse_complex(field(&v, "$", "beta")?, "$.beta")?;
    rotated_psi(theta, alpha, beta)
}

// ---------------------------------------------------------------------------
// JSON rendering

fn complex_json(z: C64) -> Value {
    json!([z.re, z.im])
}

fn matrix_json(m: &CMatrix) -> Value {
    Value::Array(
        (0..m.rows())
            .map(|i| Value::Array((0..m.cols()).map(|j| complex_json(m.at(i, j))).collect()))
            .collect(),
    )
}

fn state_json(v: &CMatrix) -> Value {
    Value::Array((0..v.rows()).map(|i| complex_json(v.at(i, 0))).collect())
}

fn family_to_json(f: &MeasurementFamily) -> Value {
    let kind = match f.kind() {
        FamilyKind::Povm => "povm",
        FamilyKind::Pvm => "pvm",
        FamilyKind::Som => "som",
        FamilyKind::Usom => "usom",
    };
    let blocks = if f.kind().is_flat() {
        Value::Array(
            (0..f.x_count())
                .map(|x| {
                    Value::Array((0..f.a_count()).map(|a| matrix_json(f.flat_block(x, a))).collect())
                })
                .collect(),
        )
    } else {
        Value::Array(
            (0..f.x_count())
                .map(|x| {
                    Value::Array(
                        (0..f.x_count())
                            .map(|xp| {
                                Value::Array(
                                    (0..f.a_count())
                                        .map(|a| {
                                            Value::Array(
                                                (0..f.a_count())
                                                    .map(|ap| matrix_json(f.som_block(x, xp, a, ap)))
                                                    .collect(),
                                            )
                                        })
                                        .collect(),
                                )
                            })
                            .collect(),
                    )
                })
                .collect(),
        )
    };
    json!({ "kind": kind, "X": f.x_count(), "A": f.a_count(), "blocks": blocks })
}

/// Serializes a model in the document schema accepted by [`parse_model`];
/// the two are mutually inverse at the bit level.
pub fn model_to_json(m: &Model) -> Value {
    let (flavor, dims) = match m.flavor {
        Flavor::TensorSplit { dim_a, dim_b } => ("tensor", vec![dim_a, dim_b]),
        Flavor::Commuting { dim_h } => ("commuting", vec![dim_h]),
    };
    json!({
        "flavor": flavor,
        "dims": dims,
        "alice": family_to_json(&m.alice),
        "bob": family_to_json(&m.bob),
        "state": state_json(&m.state),
    })
}

fn ns_to_json(p: &NsCorrelation) -> Value {
    let table = Value::Array(
        (0..p.x_count)
            .map(|x| {
                Value::Array(
                    (0..p.y_count)
                        .map(|y| {
                            Value::Array(
                                (0..p.a_count)
                                    .map(|a| {
                                        Value::Array(
                                            (0..p.b_count).map(|b| json!(p.value(x, y, a, b))).collect(),
                                        )
                                    })
                                    .collect(),
                            )
                        })
                        .collect(),
                )
            })
            .collect(),
    );
    json!({ "kind": "ns", "shape": [p.x_count, p.y_count, p.a_count, p.b_count], "table": table })
}

fn qns_to_json(q: &QnsCorrelation) -> Value {
    fn nest(counts: &[usize], idx: &mut Vec<usize>, q: &QnsCorrelation) -> Value {
        if counts.is_empty() {
            let i = idx.as_slice();
            return complex_json(q.value(i[0], i[1], i[2], i[3], i[4], i[5], i[6], i[7]));
        }
        Value::Array(
            (0..counts[0])
                .map(|k| {
                    idx.push(k);
                    let v = nest(&counts[1..], idx, q);
                    idx.pop();
                    v
                })
                .collect(),
        )
    }
    let counts = [
        q.x_count, q.x_count, q.y_count, q.y_count, q.a_count, q.a_count, q.b_count, q.b_count,
    ];
    let table = nest(&counts, &mut Vec::new(), q);
    json!({ "kind": "qns", "shape": [q.x_count, q.y_count, q.a_count, q.b_count], "table": table })
}

fn cqns_to_json(g: &CqnsCorrelation) -> Value {
    fn nest(counts: &[usize], idx: &mut Vec<usize>, g: &CqnsCorrelation) -> Value {
        if counts.is_empty() {
            let i = idx.as_slice();
            return complex_json(g.value(i[0], i[1], i[2], i[3], i[4], i[5]));
        }
        Value::Array(
            (0..counts[0])
                .map(|k| {
                    idx.push(k);
                    let v = nest(&counts[1..], idx, g);
                    idx.pop();
                    v
                })
                .collect(),
        )
    }
    let counts = [g.x_count, g.y_count, g.d, g.d, g.d, g.d];
    let table = nest(&counts, &mut Vec::new(), g);
    json!({ "kind": "cqns", "shape": [g.x_count, g.y_count, g.d], "table": table })
}

/// Parsed correlation document of any of the three kinds.
pub enum CorrelationDoc {
    Ns(NsCorrelation),
    Qns(QnsCorrelation),
    Cqns(CqnsCorrelation),
}

/// Parses a correlation document (`kind` ∈ {ns, qns, cqns}).
pub fn parse_correlation(bytes: &[u8]) -> Result<CorrelationDoc> {
    let v: Value = serde_json::from_slice(bytes)?;
    let kind = as_str(field(&v, "$", "kind")?, "$.kind")?;
    let shape_v = as_array(field(&v, "$", "shape")?, "$.shape")?;
    let shape: Vec<usize> = shape_v
        .iter()
        .enumerate()
        .map(|(i, s)| as_usize(s, &format!("$.shape[{i}]")))
        .collect::<Result<_>>()?;
    let table = field(&v, "$", "table")?;
    match (kind, shape.as_slice()) {
        ("ns", [x, y, a, b]) => {
            let mut flat = Vec::with_capacity(x * y * a * b);
            walk_reals(table, "$.table", &[*x, *y, *a, *b], &mut flat)?;
            Ok(CorrelationDoc::Ns(NsCorrelation::new(*x, *y, *a, *b, flat)?))
        }
        ("qns", [x, y, a, b]) => {
            let mut flat = Vec::with_capacity(x * x * y * y * a * a * b * b);
            walk_complex(table, "$.table", &[*x, *x, *y, *y, *a, *a, *b, *b], &mut flat)?;
            Ok(CorrelationDoc::Qns(QnsCorrelation::new(*x, *y, *a, *b, flat)?))
        }
        ("cqns", [x, y, d]) => {
            let mut flat = Vec::with_capacity(x * y * d * d * d * d);
            walk_complex(table, "$.table", &[*x, *y, *d, *d, *d, *d], &mut flat)?;
            Ok(CorrelationDoc::Cqns(CqnsCorrelation::new(*x, *y, *d, flat)?))
        }
        ("ns", _) | ("qns", _) => Err(schema("$.shape", "expected shape [X, Y, A, B]")),
        ("cqns", _) => Err(schema("$.shape", "expected shape [X, Y, d]")),
        (other, _) => Err(schema("$.kind", format!("unknown kind {other:?} (expected ns, qns, or cqns)"))),
    }
}

/// Serializes a correlation document; inverse of [`parse_correlation`].
pub fn correlation_to_json(doc: &CorrelationDoc) -> Value {
    match doc {
        CorrelationDoc::Ns(p) => ns_to_json(p),
        CorrelationDoc::Qns(q) => qns_to_json(q),
        CorrelationDoc::Cqns(g) => cqns_to_json(g),
    }
}

fn walk_reals(v: &Value, path: &str, counts: &[usize], out: &mut Vec<f64>) -> Result<()> {
    if counts.is_empty() {
        out.push(as_finite(v, path)?);
        return Ok(());
    }
    let arr = as_array(v, path)?;
    if arr.len() != counts[0] {
        return Err(schema(path, format!("expected {} entries, got {}", counts[0], arr.len())));
    }
    for (k, e) in arr.iter().enumerate() {
        walk_reals(e, &format!("{path}[{k}]"), &counts[1..], out)?;
    }
    Ok(())
}

fn walk_complex(v: &Value, path: &str, counts: &[usize], out: &mut Vec<C64>) -> Result<()> {
    if counts.is_empty() {
        out.push(parse_complex(v, path)?);
        return Ok(());
    }
    let arr = as_array(v, path)?;
    if arr.len() != counts[0] {
        return Err(schema(path, format!("expected {} entries, got {}", counts[0], arr.len())));
    }
    for (k, e) in arr.iter().enumerate() {
        walk_complex(e, &format!("{path}[{k}]"), &counts[1..], out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chsh::ideal_model;
    use crate::models::{correlation_ns, lift_classical};

    fn manifest(command: &str, inputs: Vec<PathBuf>) -> Manifest {
        Manifest {
            command: command.into(),
            inputs,
            tolerance: crate::DEFAULT_TOL,
            seed: 0,
            output_path: None,
        }
    }

    fn write_temp(name: &str, content: &str) -> PathBuf {
        let path = std::env::temp_dir().join(format!("qst-cli-test-{name}-{}", std::process::id()));
        std::fs::write(&path, content).unwrap();
        path
    }

    #[test]
    fn model_json_round_trip_is_bit_identical() {
        let m = ideal_model();
        let first = serde_json::to_string(&model_to_json(&m)).unwrap();
        let back = parse_model(first.as_bytes()).unwrap();
        let second = serde_json::to_string(&model_to_json(&back)).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn correlation_json_round_trips_for_all_kinds() {
        let p = correlation_ns(&ideal_model()).unwrap();
        let ns = serde_json::to_string(&ns_to_json(&p)).unwrap();
        let CorrelationDoc::Ns(p2) = parse_correlation(ns.as_bytes()).unwrap() else {
            panic!("kind changed in round trip");
        };
        assert_eq!(ns, serde_json::to_string(&ns_to_json(&p2)).unwrap());

        let q = lift_classical(&p).unwrap();
        let qns = serde_json::to_string(&qns_to_json(&q)).unwrap();
        let CorrelationDoc::Qns(q2) = parse_correlation(qns.as_bytes()).unwrap() else {
            panic!("kind changed in round trip");
        };
        assert_eq!(qns, serde_json::to_string(&qns_to_json(&q2)).unwrap());

        let g = gamma_correlation(&crate::games::pauli_hom_model()).unwrap();
        let cq = serde_json::to_string(&cqns_to_json(&g)).unwrap();
        let CorrelationDoc::Cqns(g2) = parse_correlation(cq.as_bytes()).unwrap() else {
            panic!("kind changed in round trip");
        };
        assert_eq!(cq, serde_json::to_string(&cqns_to_json(&g2)).unwrap());
    }

    #[test]
    fn schema_errors_carry_the_offending_path() {
        let doc = serde_json::to_string(&json!({
            "flavor": "tensor",
            "dims": [2, 2],
            "alice": { "kind": "pvm", "X": 2, "A": 2, "blocks": [] },
        }))
        .unwrap();
        let err = parse_model(doc.as_bytes()).unwrap_err();
        match err {
            Error::Schema { path, message } => {
                assert_eq!(path, "$.alice.blocks");
                assert!(message.contains("expected 2 inputs"), "{message}");
            }
            other => panic!("expected a schema error, got {other}"),
        }

        let truncated = r#"{ "flavor": "tensor", "dims": [2, 2] }"#;
        let err = parse_model(truncated.as_bytes()).unwrap_err();
        match err {
            Error::Schema { path, .. } => assert_eq!(path, "$.alice"),
            other => panic!("expected a schema error, got {other}"),
        }
    }

    #[test]
    fn short_state_fails_validation_with_the_norm_residual() {
        let mut m = ideal_model();
        m.state = m.state.scale(cr(0.99));
        let doc = serde_json::to_string(&model_to_json(&m)).unwrap();
        let err = parse_model(doc.as_bytes()).unwrap_err();
        match err {
            Error::Violation { magnitude, .. } => assert!((magnitude - 0.01).abs() < 1e-12),
            other => panic!("expected a validation error, got {other}"),
        }
    }

    #[test]
    fn run_scores_the_ideal_model_from_a_manifest() {
        let doc = serde_json::to_string(&model_to_json(&ideal_model())).unwrap();
        let path = write_temp("ideal", &doc);
        let report = run(&manifest("chsh score", vec![path.clone()])).unwrap();
        std::fs::remove_file(&path).unwrap();
        assert_eq!(report.verdict, "pass");
        let win = report.items.iter().find(|i| i.name == "winProb").unwrap();
        let got = win.value.as_ref().unwrap().as_f64().unwrap();
        assert!((got - (0.5 + 0.5 / 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn run_rejects_unknown_commands() {
        let err = run(&manifest("chsh frobnicate", vec![])).unwrap_err();
        assert!(matches!(err, Error::Invalid(_)));
    }

    #[test]
    fn independent_ac_check_fails_by_exactly_one_eighth() {
        let report = run(&manifest("clifford ac-check --n 2 --independent", vec![])).unwrap();
        assert_eq!(report.verdict, "fail");
        let item = &report.items[0];
        assert!((item.residual.unwrap() - 0.125).abs() < 1e-12);
    }

    #[test]
    fn canonical_ac_check_passes_for_small_sizes() {
        for n in [2usize, 4] {
            let report = run(&manifest(&format!("clifford ac-check --n {n}"), vec![])).unwrap();
            assert_eq!(report.verdict, "pass", "n={n}");
            for item in &report.items {
                assert!(item.residual.unwrap() <= 1e-12, "n={n}: {}", item.name);
            }
        }
    }

    #[test]
    fn witness_report_carries_kernel_dimension_one() {
        let report = run(&manifest("clifford witness --n 2", vec![])).unwrap();
        assert_eq!(report.verdict, "pass");
        let dim = report.items.iter().find(|i| i.name == "kernelDim").unwrap();
        assert_eq!(dim.value.as_ref().unwrap().as_u64(), Some(1));
        let overlap = report.items.iter().find(|i| i.name == "kernelOmegaOverlap").unwrap();
        assert!(overlap.residual.unwrap() <= 1e-12);
    }

    #[test]
    fn counterexample_reports_agreement_and_obstruction() {
        let report = run(&manifest("chsh counterexample", vec![])).unwrap();
        assert_eq!(report.verdict, "pass");
        let agree = report
            .items
            .iter()
            .find(|i| i.name == "qnsDiagonalAgreement")
            .unwrap();
        assert!(agree.residual.unwrap() <= 1e-10);
        let obs = report
            .items
            .iter()
            .find(|i| i.name.starts_with("obstructionNorm"))
            .unwrap();
        assert!(obs.value.as_ref().unwrap().as_f64().unwrap() > 0.1);
    }

    #[test]
    fn tolerance_resolution_prefers_the_flag() {
        assert_eq!(resolve_tolerance(Some(1e-6)).unwrap(), 1e-6);
        assert!(resolve_tolerance(Some(-1.0)).is_err());
        assert!(resolve_tolerance(Some(f64::NAN)).is_err());
    }
}

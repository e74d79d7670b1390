//! Command-line front end.
//!
//! `dissipacert check --kind <kind> --system <doc> [...]` runs one check and
//! writes a JSON report; `dissipacert explain <report>` renders one as text.
//!
//! Exit status: 0 CERTIFIED, 1 REFUTED, 2 INCONCLUSIVE, 64 usage error,
//! 65 input data error, 70 numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use thiserror::Error;

use crate::certify::{
    self, Certificate, CertifyError, Hypothesis, HypothesisStatus, Margin, NiFamily, Property, SearchOptions,
    SofOptions, StorageTarget, Verdict,
};
use crate::matcore::{SymMatrix, DEFAULT_TOL};
use crate::simulate::{self, InputSignal, SimError, Trajectory};
use crate::supply::{L2Supply, SupplyIntegrand, SupplyRate};
use crate::sysmodel::{lift_lti, AffineSystem, GridSpec, LtiSystem, StorageCandidate, StorageScale, SystemModel};

pub mod document;
pub mod explain;

pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_NUMERICAL: i32 = 70;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<CertifyError> for CliError {
    fn from(e: CertifyError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Diverged { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckKind {
    Dissipative,
    Ni,
    Isni,
    Osni,
    L2,
    Thm38,
    Thm39,
    Sof,
    Simulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SupplyChoice {
    Ni,
    Isni,
    Osni,
    Beta,
    L2,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleChoice {
    Half,
    One,
}

/// One job: a check kind plus everything it needs.
#[derive(Debug, Clone, Args)]
pub struct JobConfig {
    #[arg(long, value_enum)]
    pub kind: CheckKind,
    /// System document, as a path or inline JSON.
    #[arg(long)]
    pub system: String,
    /// Storage matrix: `identity`, a path, or inline JSON (`{"P", "scale"}`,
    /// `{"V"}` or bare rows).
    #[arg(long = "P", value_name = "P")]
    pub p: Option<String>,
    /// Storage function as an expression in x1..xn.
    #[arg(long = "V", value_name = "EXPR", conflicts_with = "p")]
    pub v: Option<String>,
    /// Storage scale when the storage document does not set one.
    #[arg(long, value_enum)]
    pub scale: Option<ScaleChoice>,
    #[arg(long = "T", value_name = "T")]
    pub t: Option<String>,
    /// Output feedback gain for `--kind simulate`.
    #[arg(long = "K", value_name = "K")]
    pub k: Option<String>,
    #[arg(long = "Q", value_name = "Q")]
    pub q: Option<String>,
    #[arg(long = "S", value_name = "S")]
    pub s: Option<String>,
    #[arg(long = "R", value_name = "R")]
    pub r: Option<String>,
    /// Supply rate for `dissipative` and `simulate`.
    #[arg(long, value_enum)]
    pub supply: Option<SupplyChoice>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub grid_radius: f64,
    #[arg(long, default_value_t = 5)]
    pub grid_points: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 5.0)]
    pub t_end: f64,
    /// Seed for storage search and input ensembles.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of random piecewise-constant inputs for `simulate`.
    #[arg(long, default_value_t = 20)]
    pub trajectories: usize,
    /// Input signal document for `simulate` (replaces the random ensemble).
    #[arg(long)]
    pub input: Option<String>,
    /// Initial state, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Largest tolerated dissipation-inequality violation in `simulate`.
    #[arg(long, default_value_t = 1e-4)]
    pub audit_tol: f64,
    /// Report path; the report goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV dump of the worst simulated trajectory.
    #[arg(long)]
    pub dump_traj: Option<PathBuf>,
}

#[derive(Debug, Parser)]
#[command(name = "dissipacert", version, about = "Dissipativity, NI and L2-gain certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one check and write its report.
    Check(Box<JobConfig>),
    /// Render a report as text.
    Explain { report: PathBuf },
}

/// Result of a job: the report and, for simulations, the trajectory CSV.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Certificate,
    pub trajectory_csv: Option<String>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn lti_only(sys: &SystemModel, kind: &str) -> Result<LtiSystem, CliError> {
    match sys {
        SystemModel::Lti(s) => Ok(s.clone()),
        SystemModel::Affine(_) => Err(usage(format!("--kind {kind} needs an LTI system"))),
    }
}

fn as_affine(sys: &SystemModel) -> AffineSystem {
    match sys {
        SystemModel::Lti(s) => lift_lti(s),
        SystemModel::Affine(s) => s.clone(),
    }
}

fn storage(cfg: &JobConfig, n: usize, default: StorageScale) -> Result<Option<StorageCandidate>, CliError> {
    let scale = match cfg.scale {
        Some(ScaleChoice::Half) => Some(StorageScale::Half),
        Some(ScaleChoice::One) => Some(StorageScale::One),
        None => None,
    };
    let v = match (&cfg.p, &cfg.v) {
        (Some(p), _) => document::load_storage(p, n, scale.unwrap_or(default))?,
        (None, Some(v)) => document::storage_expr(v, n)?,
        (None, None) => return Ok(None),
    };
    // an explicit --scale overrides the document
    Ok(Some(match (v, scale) {
        (StorageCandidate::Quadratic { p, .. }, Some(s)) => StorageCandidate::quadratic(p, s),
        (v, _) => v,
    }))
}

fn required<T: Copy>(v: Option<T>, flag: &str, kind: &str) -> Result<T, CliError> {
    v.ok_or_else(|| usage(format!("--{flag} is required for {kind}")))
}

fn supply_rate(cfg: &JobConfig, choice: SupplyChoice, n: usize) -> Result<SupplyRate, CliError> {
    let sr = match choice {
        SupplyChoice::Ni => Ok(SupplyRate::ni(n)),
        SupplyChoice::Isni => SupplyRate::isni(n, required(cfg.epsilon, "epsilon", "the isni supply")?),
        SupplyChoice::Osni => SupplyRate::osni(n, required(cfg.delta, "delta", "the osni supply")?),
        SupplyChoice::Beta => SupplyRate::beta(n, required(cfg.beta, "beta", "the beta supply")?),
        SupplyChoice::General => {
            let arg = |arg: &Option<String>, key: &str| -> Result<String, CliError> {
                arg.clone()
                    .ok_or_else(|| usage(format!("--{key} is required for the general supply")))
            };
            let q = document::sym_arg(&arg(&cfg.q, "Q")?, "Q", n)?.into_matrix();
            let s = document::matrix_arg(&arg(&cfg.s, "S")?, "S", n)?;
            let r = document::sym_arg(&arg(&cfg.r, "R")?, "R", n)?.into_matrix();
            SupplyRate::general(q, s, r)
        }
        SupplyChoice::L2 => unreachable!("L2 is not a (Q, S, R) supply"),
    };
    sr.map_err(|e| CliError::Data(format!("supply: {e}")))
}

/// Supply for `dissipative`: explicit `--supply`, else inferred from the
/// parameters that were given.
fn dissipative_choice(cfg: &JobConfig) -> Result<SupplyChoice, CliError> {
    if let Some(c) = cfg.supply {
        return Ok(c);
    }
    if cfg.q.is_some() || cfg.s.is_some() || cfg.r.is_some() {
        Ok(SupplyChoice::General)
    } else if cfg.beta.is_some() {
        Ok(SupplyChoice::Beta)
    } else {
        Err(usage("--kind dissipative needs --supply (or --beta, or --Q/--S/--R)"))
    }
}

fn grid(cfg: &JobConfig) -> Result<GridSpec, CliError> {
    if !(cfg.grid_radius >= 0.0 && cfg.grid_radius.is_finite()) || cfg.grid_points == 0 {
        return Err(usage("--grid-radius must be ≥ 0 and --grid-points ≥ 1"));
    }
    Ok(GridSpec::uniform(cfg.grid_radius, cfg.grid_points))
}

fn gamma(cfg: &JobConfig) -> Result<L2Supply, CliError> {
    L2Supply::new(cfg.gamma.unwrap_or(1.0)).map_err(|e| usage(format!("--gamma: {e}")))
}

/// Search for `P` when none was given, then run `check` with the result.
/// A failed search downgrades a REFUTED verdict to INCONCLUSIVE: the
/// refutation only covers the best iterate.
fn with_searched_p(
    sys: &LtiSystem,
    target: StorageTarget,
    cfg: &JobConfig,
    check: impl FnOnce(&SymMatrix) -> Result<Certificate, CertifyError>,
) -> Result<Certificate, CliError> {
    let opts = SearchOptions {
        tol: cfg.tol,
        seed: cfg.seed,
        ..SearchOptions::default()
    };
    let found = certify::find_storage_p(sys, &target, &opts)?;
    let mut cert = check(&found.p)?;
    cert.metric("search_margin", found.margin);
    cert.metric("search_iterations", found.iterations as f64);
    if found.feasible {
        cert.notes.push(format!(
            "storage matrix found by search in {} iterations (seed {})",
            found.iterations, cfg.seed
        ));
    } else {
        cert.notes.push(format!(
            "search found no feasible storage matrix (best max eigenvalue {:e}, threshold {:e}); \
             the verdict applies to the best iterate only",
            found.margin, found.threshold
        ));
        if cert.verdict == Verdict::Refuted {
            cert.verdict = Verdict::Inconclusive;
            cert.conclusion = "no feasible storage matrix found by search".into();
        }
    }
    Ok(cert)
}

fn ni_family(cfg: &JobConfig) -> Result<NiFamily, CliError> {
    Ok(match cfg.kind {
        CheckKind::Ni => NiFamily::Ni,
        CheckKind::Isni => NiFamily::Isni(required(cfg.epsilon, "epsilon", "--kind isni")?),
        CheckKind::Osni => NiFamily::Osni(required(cfg.delta, "delta", "--kind osni")?),
        _ => unreachable!(),
    })
}

fn check_ni_kind(cfg: &JobConfig, sys: &SystemModel) -> Result<Certificate, CliError> {
    let n = sys.n();
    let fam = ni_family(cfg)?;
    let v = storage(cfg, n, StorageScale::Half)?;
    match (sys, v) {
        (SystemModel::Lti(s), Some(StorageCandidate::Quadratic { p, scale })) => {
            if fam == NiFamily::Ni && scale == StorageScale::Half {
                Ok(certify::check_ni_lti(s, &p, cfg.tol)?)
            } else {
                let sr = fam.supply(n)?;
                Ok(certify::check_supply_lti(s, &sr, &p, scale, None, cfg.tol)?)
            }
        }
        (SystemModel::Lti(s), None) => {
            let sr = fam.supply(n)?;
            let target = StorageTarget::Supply {
                sr: sr.clone(),
                scale: StorageScale::Half,
                t: None,
            };
            with_searched_p(s, target, cfg, |p| {
                if fam == NiFamily::Ni {
                    certify::check_ni_lti(s, p, cfg.tol)
                } else {
                    certify::check_supply_lti(s, &sr, p, StorageScale::Half, None, cfg.tol)
                }
            })
        }
        (_, Some(v)) => Ok(certify::check_ni_family_affine(
            &as_affine(sys),
            &v,
            fam,
            &grid(cfg)?,
            cfg.tol,
        )?),
        (SystemModel::Affine(_), None) => Err(usage("affine systems need a storage candidate (--P or --V)")),
    }
}

fn check_l2_kind(cfg: &JobConfig, sys: &SystemModel) -> Result<Certificate, CliError> {
    let l2 = gamma(cfg)?;
    let v = storage(cfg, sys.n(), StorageScale::Half)?;
    match (sys, v) {
        (
            SystemModel::Lti(s),
            Some(StorageCandidate::Quadratic {
                p,
                scale: StorageScale::Half,
            }),
        ) => Ok(certify::check_l2_lti(s, &p, l2.gamma, cfg.tol)?),
        (SystemModel::Lti(s), None) => with_searched_p(s, StorageTarget::L2 { gamma: l2.gamma }, cfg, |p| {
            certify::check_l2_lti(s, p, l2.gamma, cfg.tol)
        }),
        (_, Some(v)) => Ok(certify::check_l2_affine(&as_affine(sys), &v, l2, &grid(cfg)?, cfg.tol)?),
        (SystemModel::Affine(_), None) => Err(usage("affine systems need a storage candidate (--P or --V)")),
    }
}

fn check_dissipative_kind(cfg: &JobConfig, sys: &SystemModel) -> Result<Certificate, CliError> {
    let n = sys.n();
    let choice = dissipative_choice(cfg)?;
    if choice == SupplyChoice::L2 {
        return check_l2_kind(cfg, sys);
    }
    let sr = supply_rate(cfg, choice, n)?;
    let t = cfg.t.as_deref().map(|t| document::sym_arg(t, "T", n)).transpose()?;
    let v = storage(cfg, n, StorageScale::Half)?;
    match (sys, v) {
        (SystemModel::Lti(s), Some(StorageCandidate::Quadratic { p, scale })) => {
            Ok(certify::check_supply_lti(s, &sr, &p, scale, t.as_ref(), cfg.tol)?)
        }
        (SystemModel::Lti(s), None) => {
            let target = StorageTarget::Supply {
                sr: sr.clone(),
                scale: StorageScale::Half,
                t: t.clone(),
            };
            with_searched_p(s, target, cfg, |p| {
                certify::check_supply_lti(s, &sr, p, StorageScale::Half, t.as_ref(), cfg.tol)
            })
        }
        (_, Some(v)) => {
            if t.is_some() {
                return Err(usage("--T applies to LTI systems with a quadratic storage only"));
            }
            Ok(certify::check_dissipative_affine(
                &as_affine(sys),
                &sr,
                &v,
                &grid(cfg)?,
                cfg.tol,
            )?)
        }
        (SystemModel::Affine(_), None) => Err(usage("affine systems need a storage candidate (--P or --V)")),
    }
}

fn quadratic_p(v: Option<StorageCandidate>, kind: &str) -> Result<SymMatrix, CliError> {
    match v {
        Some(StorageCandidate::Quadratic { p, .. }) => Ok(p),
        Some(StorageCandidate::Symbolic { .. }) => Err(usage(format!("--kind {kind} needs a matrix P, not V"))),
        None => Err(usage(format!("--P is required for --kind {kind}"))),
    }
}

enum Integrand {
    Quadratic(SupplyRate),
    L2(L2Supply),
}

impl Integrand {
    fn as_dyn(&self) -> &dyn SupplyIntegrand {
        match self {
            Integrand::Quadratic(sr) => sr,
            Integrand::L2(l2) => l2,
        }
    }
}

fn check_simulate(cfg: &JobConfig, sys: &SystemModel) -> Result<Outcome, CliError> {
    let n = sys.n();
    let v = storage(cfg, n, StorageScale::Half)?
        .ok_or_else(|| usage("--kind simulate needs a storage candidate (--P or --V)"))?;
    let choice = cfg.supply.unwrap_or(SupplyChoice::Ni);
    let integrand = match choice {
        SupplyChoice::L2 => Integrand::L2(gamma(cfg)?),
        c => Integrand::Quadratic(supply_rate(cfg, c, n)?),
    };
    if cfg.audit_tol.is_nan() || cfg.audit_tol < 0.0 {
        return Err(usage("--audit-tol must be non-negative"));
    }
    let k = cfg.k.as_deref().map(|k| document::matrix_arg(k, "K", n)).transpose()?;
    let x0 = match &cfg.x0 {
        Some(x) if x.len() != n => {
            return Err(usage(format!("--x0 needs {n} entries, got {}", x.len())));
        }
        Some(x) => x.clone(),
        None if k.is_some() => vec![1.0; n],
        None => vec![0.0; n],
    };

    let runs: Vec<Result<Trajectory, SimError>> = if let Some(k) = &k {
        vec![simulate::integrate_feedback(sys, k, &x0, cfg.dt, cfg.t_end)]
    } else {
        let inputs: Vec<InputSignal> = match &cfg.input {
            Some(arg) => {
                let text = document::load_text(arg, "input")?;
                let u: InputSignal = serde_json::from_str(&text).map_err(|e| CliError::Data(format!("input: {e}")))?;
                vec![u]
            }
            None => (0..cfg.trajectories as u64)
                .map(|i| simulate::random_piecewise(n, 10, cfg.t_end, 1.0, cfg.seed.wrapping_add(i)))
                .collect(),
        };
        if inputs.is_empty() {
            return Err(usage("--trajectories must be at least 1"));
        }
        crate::thread_pool().install(|| {
            inputs
                .par_iter()
                .map(|u| simulate::integrate(sys, u, &x0, cfg.dt, cfg.t_end))
                .collect()
        })
    };
    let runs: Vec<Trajectory> = runs.into_iter().collect::<Result<_, _>>()?;
    let audits = runs
        .iter()
        .map(|t| simulate::audit_dissipation(t, integrand.as_dyn(), &v))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Data(format!("storage evaluation: {e}")))?;

    // worst run, lowest index on ties
    let mut worst = 0;
    for (i, a) in audits.iter().enumerate() {
        if a.max_violation > audits[worst].max_violation {
            worst = i;
        }
    }
    let mut cert = Certificate::new(Property::TrajectoryAudit, cfg.audit_tol);
    cert.witness.storage = Some((&v).into());
    match &integrand {
        Integrand::Quadratic(sr) => cert.witness.supply = Some(sr.into()),
        Integrand::L2(l2) => cert.witness.gamma = Some(l2.gamma),
    }
    if let Some(k) = &k {
        cert.witness.k = Some(crate::matcore::matrix_to_rows(k));
    }
    let a = &audits[worst];
    cert.margins
        .push(Margin::at_most("max_violation", a.max_violation, cfg.audit_tol));
    cert.metric("trajectories", runs.len() as f64);
    cert.metric("worst_trajectory", worst as f64);
    cert.metric("worst_time", a.max_at);
    cert.metric("dt", cfg.dt);
    cert.metric("t_end", cfg.t_end);
    cert.hypotheses.push(Hypothesis::new(
        "inputs limited to the simulated ensemble",
        HypothesisStatus::Assumed,
        "a trajectory audit can refute a storage function but not prove it",
    ));
    cert.notes.push(format!(
        "V(x(t)) − V(x(0)) − ∫ω ≤ {:e} along every simulated run",
        cfg.audit_tol
    ));
    cert.settle_from_margins();
    if cert.verdict == Verdict::Refuted {
        cert.conclusion = format!(
            "dissipation inequality violated by {:e} at t = {} on run {worst}",
            a.max_violation, a.max_at
        );
    }

    let trajectory_csv = if cfg.dump_traj.is_some() {
        let mut buf = Vec::new();
        simulate::write_csv(&mut buf, &runs[worst], Some(a))
            .map_err(|e| CliError::Numerical(format!("trajectory dump: {e}")))?;
        Some(String::from_utf8(buf).expect("CSV is UTF-8"))
    } else {
        None
    };
    Ok(Outcome {
        report: cert,
        trajectory_csv,
    })
}

/// Run one job without touching the filesystem for output.
pub fn run(cfg: &JobConfig) -> Result<Outcome, CliError> {
    if !(cfg.tol > 0.0 && cfg.tol.is_finite()) {
        return Err(usage("--tol must be positive"));
    }
    let sys = document::load_system(&cfg.system)?;
    let n = sys.n();
    let report = match cfg.kind {
        CheckKind::Ni | CheckKind::Isni | CheckKind::Osni => check_ni_kind(cfg, &sys)?,
        CheckKind::L2 => check_l2_kind(cfg, &sys)?,
        CheckKind::Dissipative => check_dissipative_kind(cfg, &sys)?,
        CheckKind::Thm39 => {
            let s = lti_only(&sys, "thm39")?;
            let p = quadratic_p(storage(cfg, n, StorageScale::Half)?, "thm39")?;
            certify::check_equivalence_thm39(&s, &p, cfg.tol)?
        }
        CheckKind::Thm38 => {
            let v = storage(cfg, n, StorageScale::Half)?
                .ok_or_else(|| usage("--kind thm38 needs a storage candidate (--P or --V)"))?;
            certify::check_equivalence_thm38(&as_affine(&sys), &v, &grid(cfg)?, cfg.tol)?
        }
        CheckKind::Sof => {
            let s = lti_only(&sys, "sof")?;
            let p = match storage(cfg, n, StorageScale::One)? {
                Some(v) => Some(quadratic_p(Some(v), "sof")?),
                None => None,
            };
            let t = cfg.t.as_deref().map(|t| document::sym_arg(t, "T", n)).transpose()?;
            let opts = SofOptions { beta: cfg.beta, p, t };
            certify::check_sof_thm44(&s, &opts, cfg.tol)?
        }
        CheckKind::Simulate => return check_simulate(cfg, &sys),
    };
    Ok(Outcome {
        report,
        trajectory_csv: None,
    })
}

/// Pretty JSON with a trailing newline.
pub fn report_json(cert: &Certificate) -> String {
    let mut s = serde_json::to_string_pretty(cert).expect("certificates serialize");
    s.push('\n');
    s
}

/// Write via a temporary file in the target directory and rename.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn explain_file(path: &Path) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read report {}: {e}", path.display())))?;
    let cert: Certificate = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{} is not a valid report: {e}", path.display())))?;
    Ok(explain::render(&cert))
}

fn summary(cert: &Certificate) -> String {
    let prop = serde_json::to_value(cert.property)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default();
    format!("{prop}: {} ({})", cert.verdict, cert.conclusion)
}

fn execute(cfg: &JobConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let outcome = run(cfg)?;
    let json = report_json(&outcome.report);
    let io = |e: std::io::Error| CliError::Numerical(format!("writing output: {e}"));
    if let (Some(path), Some(csv)) = (&cfg.dump_traj, &outcome.trajectory_csv) {
        write_atomic(path, csv).map_err(io)?;
    }
    match &cfg.out {
        Some(path) => {
            write_atomic(path, &json).map_err(io)?;
            writeln!(out, "{}", summary(&outcome.report)).map_err(io)?;
        }
        None => {
            out.write_all(json.as_bytes()).map_err(io)?;
            writeln!(err, "{}", summary(&outcome.report)).map_err(io)?;
        }
    }
    Ok(outcome.report.verdict.exit_code())
}

/// Parse `args` (including the program name), run, and return the exit
/// status.
pub fn run_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Check(cfg) => execute(&cfg, out, err),
        Command::Explain { report } => explain_file(&report).and_then(|text| {
            out.write_all(text.as_bytes())
                .map_err(|e| CliError::Numerical(format!("writing output: {e}")))?;
            Ok(0)
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn main_entry() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_args(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SEC31: &str = r#"{"type":"lti","A":[[-1,0],[0,-0.5]],"B":[[1,0],[0,2]],"C":[[1,0],[0,0.5]]}"#;
    const SEC41: &str = r#"{"type":"lti","A":[[1,0],[0,2]],"B":[[1,0],[0,0.5]],"C":[[1,0],[0,2]]}"#;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["dissipacert"];
        full.extend_from_slice(args);
        let code = run_args(full, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn thm39_on_two_channel_lag() {
        let p = format!("[[{},0],[0,{}]]", 2f64.sqrt(), 14f64.sqrt() / 8.0);
        let (code, out, _) = call(&["check", "--kind", "thm39", "--system", SEC31, "--P", &p]);
        assert_eq!(code, 0, "{out}");
        let cert: Certificate = serde_json::from_str(&out).unwrap();
        assert!(cert.conclusion.starts_with("CONFIRMED"));
        assert!(cert.sub_checks.iter().all(|c| c.verdict == Verdict::Refuted));
    }

    #[test]
    fn sof_on_unstable_plant() {
        let (code, out, _) = call(&[
            "check",
            "--kind",
            "sof",
            "--system",
            SEC41,
            "--beta",
            "0.5",
            "--P",
            "identity",
            "--T",
            "[[0.5,0],[0,3.75]]",
        ]);
        assert_eq!(code, 0);
        let cert: Certificate = serde_json::from_str(&out).unwrap();
        assert_eq!(cert.witness.k, Some(vec![vec![-2.0, 0.0], vec![0.0, -4.0]]));
    }

    #[test]
    fn usage_errors() {
        assert_eq!(call(&["check", "--kind", "bogus", "--system", SEC31]).0, EXIT_USAGE);
        assert_eq!(call(&["check", "--kind", "thm39", "--system", SEC31]).0, EXIT_USAGE);
        assert_eq!(call(&["check", "--kind", "isni", "--system", SEC31]).0, EXIT_USAGE);
        assert_eq!(call(&[]).0, EXIT_USAGE);
        assert_eq!(call(&["--help"]).0, 0);
    }

    #[test]
    fn data_errors() {
        let bad = r#"{"type":"affine","n":1,"f":["x1 +* 2"],"g":[["1"]],"h":["x1"]}"#;
        let (code, _, err) = call(&["check", "--kind", "ni", "--system", bad, "--V", "x1^2"]);
        assert_eq!(code, EXIT_DATA);
        assert!(err.contains("at byte 4"), "{err}");
        assert_eq!(call(&["explain", "/nonexistent/report.json"]).0, EXIT_DATA);
        // C ≠ B⁻¹ violates the feedback preconditions
        let sys = r#"{"type":"lti","A":[[1]],"B":[[2]],"C":[[1]]}"#;
        assert_eq!(call(&["check", "--kind", "sof", "--system", sys]).0, EXIT_DATA);
    }

    #[test]
    fn ni_search_on_stable_lti() {
        let sys = r#"{"type":"lti","A":[[-1,0],[0,-1]],"B":[[1,0],[0,1]],"C":[[1,0],[0,1]]}"#;
        let (code, out, _) = call(&["check", "--kind", "ni", "--system", sys]);
        assert_eq!(code, 0, "{out}");
    }

    #[test]
    fn simulate_audit_passes_and_dumps() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("traj.csv");
        let report = dir.path().join("report.json");
        let (code, _, _) = call(&[
            "check",
            "--kind",
            "simulate",
            "--system",
            SEC41,
            "--P",
            "identity",
            "--scale",
            "one",
            "--supply",
            "beta",
            "--beta",
            "0.5",
            "--K",
            "[[-2,0],[0,-4]]",
            "--dt",
            "1e-3",
            "--t-end",
            "2",
            "--out",
            report.to_str().unwrap(),
            "--dump-traj",
            csv.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let text = std::fs::read_to_string(&csv).unwrap();
        assert!(text.starts_with("t,x1,x2,u1,u2,y1,y2,ydot1,ydot2,V,int_omega,violation\n"));
        let (code, rendered, _) = call(&["explain", report.to_str().unwrap()]);
        assert_eq!(code, 0);
        assert!(rendered.contains("TRAJECTORY_AUDIT"));
    }

    #[test]
    fn simulate_refutes_wrong_storage() {
        // ẋ = −x + u, y = x: V = 10x² fails the L2 inequality away from u = 10x
        let sys = r#"{"type":"lti","A":[[-1]],"B":[[1]],"C":[[1]]}"#;
        let (code, _, _) = call(&[
            "check",
            "--kind",
            "simulate",
            "--system",
            sys,
            "--V",
            "10*x1^2",
            "--supply",
            "l2",
            "--trajectories",
            "4",
            "--t-end",
            "1",
            "--dt",
            "1e-2",
        ]);
        assert_eq!(code, 1);
    }
}

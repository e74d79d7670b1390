//! Assemble and verify matrix conditions, and package the outcome as a
//! [`Certificate`].
//!
//! Submodules:
//! - [`pointwise`]: the `(1+n)` pointwise forms for input-affine systems and
//!   their grid sweeps, plus `(L, W)` recovery.
//! - [`lti`]: the `2n` LMIs for LTI systems and the NI/L2 equivalence check
//!   built on the residual condition.
//! - [`equivalence`]: the staged NI/L2 equivalence check for affine systems.
//! - [`feedback`]: static output feedback `u = −2Ay` and its strict
//!   dissipativity counterpart.
//! - [`search`]: projected-subgradient search for a storage matrix `P`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::EvalError;
use crate::matcore::{matrix_to_rows, DefinitenessVerdict, MatError, SymMatrix};
use crate::supply::{SupplyError, SupplyKind, SupplyRate};
use crate::sysmodel::{ModelError, StorageCandidate, StorageScale};

pub mod equivalence;
pub mod feedback;
pub mod lti;
pub mod pointwise;
pub mod search;

pub use equivalence::check_equivalence_thm38;
pub use feedback::{check_sof_thm44, optimal_feedback, FeedbackLaw, SofOptions};
pub use lti::{
    check_equivalence_thm39, check_l2_lti, check_ni_lti, check_supply_lti, l2_lmi, lti_lmi, ni_lmi, thm39_residual,
};
pub use pointwise::{
    check_dissipative_affine, check_l2_affine, check_ni_family_affine, isni_matrix_affine, l2_matrix_affine,
    ni_matrix_affine, osni_matrix_affine, pointwise_dissipation_matrix, pointwise_forms, recover_lw, NiFamily,
    PointwiseForms,
};
pub use search::{find_storage_p, SearchOptions, SearchResult, StorageTarget};

/// Version of the serialized [`Certificate`] layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertifyError {
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("{0}")]
    Matrix(#[from] MatError),
    #[error("{0}")]
    Supply(#[from] SupplyError),
    #[error("evaluation: {0}")]
    Eval(#[from] EvalError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("dimension mismatch: {what} expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

impl CertifyError {
    /// Numerical breakdowns as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            CertifyError::Matrix(MatError::NoConvergence { .. } | MatError::NoUniqueSolution | MatError::SchurFailed)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Property {
    Dissipative,
    Ni,
    Isni,
    Osni,
    #[serde(rename = "L2GAIN")]
    L2Gain,
    #[serde(rename = "THM39_EQUIV")]
    Thm39Equiv,
    #[serde(rename = "THM38_EQUIV")]
    Thm38Equiv,
    SofStable,
    /// Empirical check of the dissipation inequality along simulated runs.
    TrajectoryAudit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Certified,
    Refuted,
    Inconclusive,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Certified => 0,
            Verdict::Refuted => 1,
            Verdict::Inconclusive => 2,
        }
    }

    pub fn is_definite(self) -> bool {
        self != Verdict::Inconclusive
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Certified => "CERTIFIED",
            Verdict::Refuted => "REFUTED",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// What a margin has to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Requirement {
    /// max eigenvalue ≤ tol
    Nsd,
    /// max eigenvalue < −tol
    Nd,
    /// min eigenvalue ≥ −tol
    Psd,
    /// min eigenvalue > tol
    Pd,
    /// scalar residual ≤ tol
    AtMost,
}

/// One recorded check. `value` is the quantity compared against `tol`:
/// the max eigenvalue for `Nsd`/`Nd`, the min eigenvalue for `Psd`/`Pd`,
/// the residual for `AtMost`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub name: String,
    pub requirement: Requirement,
    pub value: f64,
    pub tol: f64,
    pub satisfied: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definiteness: Option<DefinitenessVerdict>,
}

impl Margin {
    pub fn from_verdict(name: impl Into<String>, requirement: Requirement, d: DefinitenessVerdict) -> Self {
        let (value, satisfied) = match requirement {
            Requirement::Nsd => (d.max_eig, d.is_nsd()),
            Requirement::Nd => (d.max_eig, d.is_nd()),
            Requirement::Psd => (d.min_eig, d.is_psd()),
            Requirement::Pd => (d.min_eig, d.is_pd()),
            Requirement::AtMost => (d.max_eig, d.max_eig <= d.tol),
        };
        Margin {
            name: name.into(),
            requirement,
            value,
            tol: d.tol,
            satisfied,
            definiteness: Some(d),
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Margin {
            name: name.into(),
            requirement: Requirement::AtMost,
            value,
            tol,
            satisfied: value <= tol,
            definiteness: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HypothesisStatus {
    Checked,
    Violated,
    Assumed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub name: String,
    pub status: HypothesisStatus,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Hypothesis {
    pub fn new(name: impl Into<String>, status: HypothesisStatus, detail: impl Into<String>) -> Self {
        Hypothesis {
            name: name.into(),
            status,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum StorageWitness {
    Quadratic { p: Vec<Vec<f64>>, scale: StorageScale },
    Symbolic { v: String },
}

impl From<&StorageCandidate> for StorageWitness {
    fn from(v: &StorageCandidate) -> Self {
        match v {
            StorageCandidate::Quadratic { p, scale } => StorageWitness::Quadratic {
                p: p.to_rows(),
                scale: *scale,
            },
            StorageCandidate::Symbolic { v, .. } => StorageWitness::Symbolic { v: v.to_string() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplyWitness {
    #[serde(flatten)]
    pub kind: SupplyKind,
    pub q: Vec<Vec<f64>>,
    pub s: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
}

impl From<&SupplyRate> for SupplyWitness {
    fn from(sr: &SupplyRate) -> Self {
        SupplyWitness {
            kind: sr.kind,
            q: sr.q.to_rows(),
            s: matrix_to_rows(&sr.s),
            r: sr.r.to_rows(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Witness {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub storage: Option<StorageWitness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supply: Option<SupplyWitness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstPoint {
    /// Position in the enumerated grid.
    pub index: usize,
    pub x: Vec<f64>,
    /// Signed violation: positive means the requirement fails there.
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub points: usize,
    pub evaluated: usize,
    pub skipped: usize,
    /// First few skip reasons, as `(index, message)`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skip_reasons: Vec<(usize, String)>,
}

/// `d(x, u) = ‖L + Wu‖²` at one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LwSample {
    pub x: Vec<f64>,
    pub l: Vec<f64>,
    /// `q × n`, row-major.
    pub w: Vec<Vec<f64>>,
    /// Factor rank.
    pub q: usize,
    /// Largest `|‖L + Wu‖² − d(x, u)|` over the sampled inputs.
    pub identity_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub schema_version: u32,
    pub property: Property,
    pub verdict: Verdict,
    /// One-line outcome, e.g. `CONFIRMED` for equivalence checks.
    pub conclusion: String,
    pub tol: f64,
    pub witness: Witness,
    pub margins: Vec<Margin>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sub_checks: Vec<Certificate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hypotheses: Vec<Hypothesis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_point: Option<WorstPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lw_samples: Vec<LwSample>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub matrices: BTreeMap<String, Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Certificate {
    pub fn new(property: Property, tol: f64) -> Self {
        Certificate {
            schema_version: SCHEMA_VERSION,
            property,
            verdict: Verdict::Inconclusive,
            conclusion: String::new(),
            tol,
            witness: Witness::default(),
            margins: Vec::new(),
            sub_checks: Vec::new(),
            hypotheses: Vec::new(),
            worst_point: None,
            grid: None,
            lw_samples: Vec::new(),
            metrics: BTreeMap::new(),
            matrices: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    /// Verdict from the recorded margins alone: all satisfied gives
    /// CERTIFIED, any violated gives REFUTED, no margins gives INCONCLUSIVE.
    pub fn verdict_from_margins(&self) -> Verdict {
        if self.margins.is_empty() {
            Verdict::Inconclusive
        } else if self.margins.iter().all(|m| m.satisfied) {
            Verdict::Certified
        } else {
            Verdict::Refuted
        }
    }

    pub fn settle_from_margins(&mut self) {
        self.verdict = self.verdict_from_margins();
        if self.hypotheses.iter().any(|h| h.status == HypothesisStatus::Violated) {
            self.verdict = Verdict::Inconclusive;
        }
        if self.conclusion.is_empty() {
            self.conclusion = self.verdict.to_string();
        }
    }

    pub fn margin(&self, name: &str) -> Option<&Margin> {
        self.margins.iter().find(|m| m.name == name)
    }

    pub fn sub_check(&self, property: Property) -> Option<&Certificate> {
        self.sub_checks.iter().find(|c| c.property == property)
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    pub(crate) fn matrix(&mut self, name: &str, m: &nalgebra::DMatrix<f64>) {
        self.matrices.insert(name.to_string(), matrix_to_rows(m));
    }

    pub(crate) fn sym(&mut self, name: &str, m: &SymMatrix) {
        self.matrices.insert(name.to_string(), m.to_rows());
    }
}

/// Property tag matching a supply kind.
pub fn property_for(kind: &SupplyKind) -> Property {
    match kind {
        SupplyKind::Ni => Property::Ni,
        SupplyKind::Isni { .. } => Property::Isni,
        SupplyKind::Osni { .. } => Property::Osni,
        SupplyKind::General | SupplyKind::Beta { .. } => Property::Dissipative,
    }
}

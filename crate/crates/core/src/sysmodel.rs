//! System classes: square LTI systems `ẋ = Ax + Bu, y = Cx` and nonlinear
//! input-affine systems `ẋ = f(x) + g(x)u, y = h(x)`, plus candidate storage
//! functions and the sampling grids used for pointwise checks.
//!
//! Both classes are square (inputs, outputs and states all have dimension
//! `n`).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, EvalError, Expr, MatrixField, ParseError, VectorField};
use crate::matcore::{reciprocal_condition, SymMatrix};

/// Threshold below which `B` is treated as singular.
pub const MIN_RCOND: f64 = 1e-12;
/// Residual allowed for `f(0) = 0`, `h(0) = 0`, `V(0) = 0` and `C = B⁻¹`.
pub const ORIGIN_TOL: f64 = 1e-9;
/// Default cap on the number of grid points.
pub const DEFAULT_GRID_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("state dimension must be at least 1")]
    EmptyState,
    #[error("B is singular (reciprocal condition {rcond:e})")]
    SingularB { rcond: f64 },
    #[error("grid needs {required} points but the cap is {cap}")]
    GridTooLarge { required: String, cap: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("expression: {0}")]
    Parse(#[from] ParseError),
    #[error("evaluation: {0}")]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl LtiSystem {
    /// Shape-checks only; invertibility of `B` is reported by [`validate`].
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self, ModelError> {
        let n = a.nrows();
        if n == 0 {
            return Err(ModelError::EmptyState);
        }
        for (what, m) in [("A", &a), ("B", &b), ("C", &c)] {
            if m.nrows() != n {
                return Err(ModelError::Dimension {
                    what,
                    expected: n,
                    got: m.nrows(),
                });
            }
            if m.ncols() != n {
                return Err(ModelError::Dimension {
                    what,
                    expected: n,
                    got: m.ncols(),
                });
            }
        }
        Ok(LtiSystem { a, b, c })
    }

    pub fn diagonal(a: &[f64], b: &[f64], c: &[f64]) -> Result<Self, ModelError> {
        let d = |v: &[f64]| DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v));
        Self::new(d(a), d(b), d(c))
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn b_inverse(&self) -> Result<DMatrix<f64>, ModelError> {
        let rcond = reciprocal_condition(&self.b);
        if rcond < MIN_RCOND {
            return Err(ModelError::SingularB { rcond });
        }
        self.b.clone().try_inverse().ok_or(ModelError::SingularB { rcond })
    }

    /// Largest elementwise `|C − B⁻¹|`.
    pub fn c_inverse_residual(&self) -> Result<f64, ModelError> {
        let binv = self.b_inverse()?;
        Ok((&self.c - binv).amax())
    }

    /// Largest elementwise `|AB − BA|`.
    pub fn commutator_residual(&self) -> f64 {
        (&self.a * &self.b - &self.b * &self.a).amax()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineSystem {
    n: usize,
    pub f: VectorField,
    pub g: MatrixField,
    pub h: VectorField,
    /// `∇h`, entry `(i, j) = ∂h_j/∂x_i`.
    pub jac_h: MatrixField,
}

impl AffineSystem {
    pub fn new(n: usize, f: VectorField, g: MatrixField, h: VectorField) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::EmptyState);
        }
        if f.len() != n {
            return Err(ModelError::Dimension {
                what: "f",
                expected: n,
                got: f.len(),
            });
        }
        if h.len() != n {
            return Err(ModelError::Dimension {
                what: "h",
                expected: n,
                got: h.len(),
            });
        }
        if g.rows != n || g.cols != n {
            return Err(ModelError::Dimension {
                what: "g",
                expected: n,
                got: if g.rows != n { g.rows } else { g.cols },
            });
        }
        let all = f.exprs.iter().chain(&g.exprs).chain(&h.exprs);
        for e in all {
            if let Some(i) = e.max_var() {
                if i >= n {
                    return Err(ModelError::Dimension {
                        what: "variable index",
                        expected: n,
                        got: i + 1,
                    });
                }
            }
        }
        let jac_h = expr::jacobian(&h, n);
        Ok(AffineSystem { n, f, g, h, jac_h })
    }

    /// Parse each component; `g` is given row by row.
    pub fn parse(
        n: usize,
        f: &[impl AsRef<str>],
        g: &[Vec<String>],
        h: &[impl AsRef<str>],
    ) -> Result<Self, ModelError> {
        let f = VectorField::parse(f, n)?;
        let h = VectorField::parse(h, n)?;
        let rows = g.len();
        let cols = g.first().map_or(0, Vec::len);
        let mut exprs = Vec::with_capacity(rows * cols);
        for row in g {
            if row.len() != cols {
                return Err(ModelError::Dimension {
                    what: "g row",
                    expected: cols,
                    got: row.len(),
                });
            }
            for t in row {
                exprs.push(expr::parse(t, n)?);
            }
        }
        Self::new(n, f, MatrixField::new(rows, cols, exprs), h)
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemModel {
    Lti(LtiSystem),
    Affine(AffineSystem),
}

impl SystemModel {
    pub fn n(&self) -> usize {
        match self {
            SystemModel::Lti(s) => s.n(),
            SystemModel::Affine(s) => s.n(),
        }
    }
}

/// Coefficient in front of `xᵀPx`. Non-strict NI and L2 checks use `½xᵀPx`;
/// strict dissipativity uses `xᵀPx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StorageScale {
    Half,
    One,
}

impl StorageScale {
    pub fn factor(self) -> f64 {
        match self {
            StorageScale::Half => 0.5,
            StorageScale::One => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StorageCandidate {
    Quadratic { p: SymMatrix, scale: StorageScale },
    Symbolic { v: Expr, grad: VectorField },
}

impl StorageCandidate {
    pub fn quadratic(p: SymMatrix, scale: StorageScale) -> Self {
        StorageCandidate::Quadratic { p, scale }
    }

    pub fn symbolic(v: Expr, n: usize) -> Self {
        let grad = expr::gradient(&v, n);
        StorageCandidate::Symbolic { v, grad }
    }

    pub fn zero(n: usize) -> Self {
        StorageCandidate::symbolic(Expr::Num(0.0), n)
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, EvalError> {
        match self {
            StorageCandidate::Quadratic { p, scale } => Ok(scale.factor() * p.quad_form(x)),
            StorageCandidate::Symbolic { v, .. } => v.eval(x),
        }
    }

    /// `∇V(x)`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        match self {
            StorageCandidate::Quadratic { p, scale } => {
                // ∇(s·xᵀPx) = 2s·Px
                let k = 2.0 * scale.factor();
                let n = p.dim();
                Ok((0..n)
                    .map(|i| k * (0..n).map(|j| p[(i, j)] * x[j]).sum::<f64>())
                    .collect())
            }
            StorageCandidate::Symbolic { grad, .. } => grad.eval(x),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            StorageCandidate::Quadratic { scale, .. } => match scale {
                StorageScale::Half => "V = ½ xᵀPx".to_string(),
                StorageScale::One => "V = xᵀPx".to_string(),
            },
            StorageCandidate::Symbolic { v, .. } => format!("V = {v}"),
        }
    }
}

/// Uniform box grid `[-radius, radius]ⁿ`, or an explicit sample list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub radius: f64,
    pub points_per_axis: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_cap")]
    pub cap: usize,
}

fn default_cap() -> usize {
    DEFAULT_GRID_CAP
}

impl GridSpec {
    pub fn uniform(radius: f64, points_per_axis: usize) -> Self {
        GridSpec {
            radius,
            points_per_axis,
            samples: None,
            cap: DEFAULT_GRID_CAP,
        }
    }

    pub fn explicit(samples: Vec<Vec<f64>>) -> Self {
        GridSpec {
            radius: 0.0,
            points_per_axis: 2,
            samples: Some(samples),
            cap: DEFAULT_GRID_CAP,
        }
    }
}

/// Lexicographic enumeration (first coordinate varies slowest). Odd
/// `points_per_axis` puts an exact zero on every axis.
pub fn enumerate_grid(spec: &GridSpec, n: usize) -> Result<Vec<Vec<f64>>, ModelError> {
    if let Some(samples) = &spec.samples {
        if samples.len() > spec.cap {
            return Err(ModelError::GridTooLarge {
                required: samples.len().to_string(),
                cap: spec.cap,
            });
        }
        for s in samples {
            if s.len() != n {
                return Err(ModelError::Dimension {
                    what: "grid sample",
                    expected: n,
                    got: s.len(),
                });
            }
        }
        return Ok(samples.clone());
    }
    if !(spec.radius > 0.0 && spec.radius.is_finite()) {
        return Err(ModelError::InvalidGrid(format!(
            "radius must be positive, got {}",
            spec.radius
        )));
    }
    let k = spec.points_per_axis;
    if k < 2 {
        return Err(ModelError::InvalidGrid(format!(
            "points_per_axis must be at least 2, got {k}"
        )));
    }
    let total = u32::try_from(n)
        .ok()
        .and_then(|e| k.checked_pow(e))
        .filter(|&t| t <= spec.cap)
        .ok_or_else(|| ModelError::GridTooLarge {
            required: format!("{k}^{n}"),
            cap: spec.cap,
        })?;
    let axis: Vec<f64> = (0..k)
        .map(|i| spec.radius * (2.0 * i as f64 / (k - 1) as f64 - 1.0))
        .collect();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        out.push(idx.iter().map(|&i| axis[i]).collect());
        for d in (0..n).rev() {
            idx[d] += 1;
            if idx[d] < k {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(out)
}

/// Express an LTI system as an input-affine one: `f = Ax`, `g = B`, `h = Cx`.
pub fn lift_lti(sys: &LtiSystem) -> AffineSystem {
    let n = sys.n();
    let row = |m: &DMatrix<f64>, i: usize| -> Vec<f64> { (0..n).map(|j| m[(i, j)]).collect() };
    let f = VectorField::new((0..n).map(|i| Expr::linear(&row(&sys.a, i))).collect());
    let h = VectorField::new((0..n).map(|i| Expr::linear(&row(&sys.c, i))).collect());
    let g = MatrixField::constant(&sys.b);
    AffineSystem::new(n, f, g, h).expect("lifted LTI dimensions are consistent")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationIssue {
    pub code: &'static str,
    pub message: String,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
    /// For LTI systems with invertible `B`: whether `C = B⁻¹` elementwise
    /// within [`ORIGIN_TOL`], and the residual.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_equals_b_inverse: Option<(bool, f64)>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        self.issues.is_empty()
    }

    fn push(&mut self, code: &'static str, message: String, residual: f64) {
        self.issues.push(ValidationIssue {
            code,
            message,
            residual,
        });
    }
}

pub fn validate(sys: &SystemModel) -> ValidationReport {
    let mut report = ValidationReport::default();
    match sys {
        SystemModel::Lti(s) => {
            let rcond = reciprocal_condition(&s.b);
            if rcond < MIN_RCOND {
                report.push(
                    "b_singular",
                    format!("B is not invertible (reciprocal condition {rcond:e})"),
                    rcond,
                );
            } else if let Ok(r) = s.c_inverse_residual() {
                report.c_equals_b_inverse = Some((r <= ORIGIN_TOL, r));
            }
            for (what, m) in [("A", &s.a), ("B", &s.b), ("C", &s.c)] {
                if m.iter().any(|v| !v.is_finite()) {
                    report.push("non_finite", format!("{what} has a non-finite entry"), f64::NAN);
                }
            }
        }
        SystemModel::Affine(s) => {
            let origin = vec![0.0; s.n()];
            for (what, field) in [("f", &s.f), ("h", &s.h)] {
                match field.eval(&origin) {
                    Ok(v) => {
                        let r = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                        if r > ORIGIN_TOL {
                            report.push("origin", format!("{what}(0) must vanish, |{what}(0)| = {r}"), r);
                        }
                    }
                    Err(e) => report.push(
                        "origin_eval",
                        format!("{what} cannot be evaluated at the origin: {e}"),
                        f64::NAN,
                    ),
                }
            }
            if let Err(e) = s.g.eval(&origin) {
                report.push(
                    "origin_eval",
                    format!("g cannot be evaluated at the origin: {e}"),
                    f64::NAN,
                );
            }
        }
    }
    report
}

/// Checks a storage candidate: `V(0) = 0` and `V ≥ −1e−9` on `samples`.
pub fn validate_storage(v: &StorageCandidate, samples: &[Vec<f64>]) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = samples.first().map_or_else(
        || match v {
            StorageCandidate::Quadratic { p, .. } => p.dim(),
            StorageCandidate::Symbolic { grad, .. } => grad.len(),
        },
        Vec::len,
    );
    match v.value(&vec![0.0; n]) {
        Ok(v0) if v0.abs() > ORIGIN_TOL => report.push("storage_origin", format!("V(0) = {v0}, must vanish"), v0.abs()),
        Ok(_) => {}
        Err(e) => report.push("storage_eval", format!("V(0) cannot be evaluated: {e}"), f64::NAN),
    }
    let mut worst = 0.0f64;
    let mut worst_at: Option<&Vec<f64>> = None;
    for x in samples {
        if let Ok(val) = v.value(x) {
            if val < worst {
                worst = val;
                worst_at = Some(x);
            }
        }
    }
    if worst < -ORIGIN_TOL {
        report.push(
            "storage_negative",
            format!("V = {worst} < 0 at {:?}", worst_at.expect("set with worst")),
            -worst,
        );
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_channel_lag() -> LtiSystem {
        LtiSystem::diagonal(&[-1.0, -0.5], &[1.0, 2.0], &[1.0, 0.5]).unwrap()
    }

    #[test]
    fn two_channel_lag_system_is_admissible_with_c_equal_b_inverse() {
        let report = validate(&SystemModel::Lti(two_channel_lag()));
        assert!(report.is_admissible());
        assert_eq!(report.c_equals_b_inverse.map(|(ok, _)| ok), Some(true));
    }

    #[test]
    fn origin_violation_is_reported() {
        let sys = AffineSystem::parse(1, &["x1 + 1"], &[vec!["1".into()]], &["x1"]).unwrap();
        let report = validate(&SystemModel::Affine(sys));
        assert_eq!(report.issues.len(), 1);
        assert_eq!(report.issues[0].code, "origin");
        assert_eq!(report.issues[0].residual, 1.0);
    }

    #[test]
    fn singular_b_is_rejected() {
        let z = DMatrix::zeros(2, 2);
        let sys = LtiSystem::new(-DMatrix::identity(2, 2), z, DMatrix::identity(2, 2)).unwrap();
        let report = validate(&SystemModel::Lti(sys.clone()));
        assert_eq!(report.issues[0].code, "b_singular");
        assert!(matches!(sys.b_inverse(), Err(ModelError::SingularB { .. })));
    }

    #[test]
    fn lift_identity_system() {
        let eye = DMatrix::<f64>::identity(2, 2);
        let sys = LtiSystem::new(-&eye, eye.clone(), eye.clone()).unwrap();
        let lifted = lift_lti(&sys);
        assert_eq!(lifted.f.exprs[0].to_string(), "((-1.0) * x1)");
        assert_eq!(lifted.h.exprs[1], Expr::Var(1));
        let x = [0.3, -2.0];
        assert_eq!(lifted.f.eval(&x).unwrap(), vec![-0.3, 2.0]);
        assert_eq!(lifted.g.eval(&x).unwrap(), eye);
        assert_eq!(lifted.jac_h.eval(&x).unwrap(), eye);
    }

    #[test]
    fn grid_examples() {
        let g = enumerate_grid(&GridSpec::uniform(1.0, 3), 1).unwrap();
        assert_eq!(g, vec![vec![-1.0], vec![0.0], vec![1.0]]);

        let g = enumerate_grid(&GridSpec::uniform(1.0, 2), 2).unwrap();
        assert_eq!(
            g,
            vec![vec![-1.0, -1.0], vec![-1.0, 1.0], vec![1.0, -1.0], vec![1.0, 1.0]]
        );

        let g = enumerate_grid(&GridSpec::uniform(2.0, 5), 2).unwrap();
        assert_eq!(g.len(), 25);
        assert!(g.contains(&vec![0.0, 0.0]));
        assert_eq!(g[12], vec![0.0, 0.0]);
    }

    #[test]
    fn grid_cap_and_determinism() {
        let mut spec = GridSpec::uniform(1.0, 11);
        spec.cap = 1000;
        assert!(matches!(enumerate_grid(&spec, 3), Err(ModelError::GridTooLarge { .. })));
        let spec = GridSpec::uniform(0.3, 7);
        assert_eq!(enumerate_grid(&spec, 3).unwrap(), enumerate_grid(&spec, 3).unwrap());
        assert!(enumerate_grid(&spec, 3).unwrap().contains(&vec![0.0, 0.0, 0.0]));
    }

    #[test]
    fn storage_checks() {
        let samples = enumerate_grid(&GridSpec::uniform(1.0, 3), 1).unwrap();
        let good = StorageCandidate::symbolic(expr::parse("x1^2", 1).unwrap(), 1);
        assert!(validate_storage(&good, &samples).is_admissible());
        let shifted = StorageCandidate::symbolic(expr::parse("x1^2 + 1", 1).unwrap(), 1);
        assert_eq!(validate_storage(&shifted, &samples).issues[0].code, "storage_origin");
        let neg = StorageCandidate::symbolic(expr::parse("x1^3", 1).unwrap(), 1);
        assert_eq!(validate_storage(&neg, &samples).issues[0].code, "storage_negative");
    }

    #[test]
    fn quadratic_storage_gradient_respects_scale() {
        let p = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let half = StorageCandidate::quadratic(p.clone(), StorageScale::Half);
        let one = StorageCandidate::quadratic(p, StorageScale::One);
        let x = [1.0, -1.0];
        assert_eq!(half.gradient(&x).unwrap(), vec![1.0, -2.0]);
        assert_eq!(one.gradient(&x).unwrap(), vec![2.0, -4.0]);
        assert_eq!(half.value(&x).unwrap(), 1.5);
    }
}

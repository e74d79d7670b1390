//! Quadratic supply rates `ω(u, ẏ) = ẏᵀQẏ + 2ẏᵀSu + uᵀRu` and the
//! output-based L2 supply `γ²uᵀu − yᵀy`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matcore::SymMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SupplyError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("R is singular, ω has no unique stationary input")]
    SingularR,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SupplyKind {
    General,
    Ni,
    Isni { epsilon: f64 },
    Osni { delta: f64 },
    Beta { beta: f64 },
}

impl SupplyKind {
    pub fn label(&self) -> String {
        match self {
            SupplyKind::General => "general".into(),
            SupplyKind::Ni => "ni".into(),
            SupplyKind::Isni { epsilon } => format!("isni(ε={epsilon})"),
            SupplyKind::Osni { delta } => format!("osni(δ={delta})"),
            SupplyKind::Beta { beta } => format!("beta(β={beta})"),
        }
    }
}

/// `(Q, S, R)` with `Q`, `R` symmetric. `S` is never symmetrized.
#[derive(Debug, Clone, PartialEq)]
pub struct SupplyRate {
    pub q: SymMatrix,
    pub s: DMatrix<f64>,
    pub r: SymMatrix,
    pub kind: SupplyKind,
}

fn positive(name: &'static str, value: f64) -> Result<f64, SupplyError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(SupplyError::NonPositive { name, value })
    }
}

fn eye(n: usize, k: f64) -> DMatrix<f64> {
    DMatrix::identity(n, n) * k
}

impl SupplyRate {
    /// Arbitrary triple; `Q` and `R` are symmetrized.
    pub fn general(q: DMatrix<f64>, s: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self, SupplyError> {
        let n = q.nrows();
        for m in [&q, &s, &r] {
            if m.nrows() != n || m.ncols() != n {
                return Err(SupplyError::Dimension {
                    expected: n,
                    got: if m.nrows() != n { m.nrows() } else { m.ncols() },
                });
            }
        }
        let q = SymMatrix::new(q).map_err(|_| SupplyError::Dimension { expected: n, got: 0 })?;
        let r = SymMatrix::new(r).map_err(|_| SupplyError::Dimension { expected: n, got: 0 })?;
        Ok(SupplyRate {
            q,
            s,
            r,
            kind: SupplyKind::General,
        })
    }

    fn named(q: DMatrix<f64>, s: DMatrix<f64>, r: DMatrix<f64>, kind: SupplyKind) -> Self {
        SupplyRate {
            q: SymMatrix::symmetrized(q),
            s,
            r: SymMatrix::symmetrized(r),
            kind,
        }
    }

    /// `(0, ½I, 0)`, i.e. `ω = uᵀẏ`.
    pub fn ni(n: usize) -> Self {
        Self::named(eye(n, 0.0), eye(n, 0.5), eye(n, 0.0), SupplyKind::Ni)
    }

    /// `(0, ½I, −εI)`.
    pub fn isni(n: usize, epsilon: f64) -> Result<Self, SupplyError> {
        let e = positive("epsilon", epsilon)?;
        Ok(Self::named(
            eye(n, 0.0),
            eye(n, 0.5),
            eye(n, -e),
            SupplyKind::Isni { epsilon: e },
        ))
    }

    /// `(−δI, ½I, 0)`.
    pub fn osni(n: usize, delta: f64) -> Result<Self, SupplyError> {
        let d = positive("delta", delta)?;
        Ok(Self::named(
            eye(n, -d),
            eye(n, 0.5),
            eye(n, 0.0),
            SupplyKind::Osni { delta: d },
        ))
    }

    /// `(4/β·I, −2/β·I, 1/β·I)`, so that `ω = ‖2ẏ − u‖²/β`.
    pub fn beta(n: usize, beta: f64) -> Result<Self, SupplyError> {
        let b = positive("beta", beta)?;
        Ok(Self::named(
            eye(n, 4.0 / b),
            eye(n, -2.0 / b),
            eye(n, 1.0 / b),
            SupplyKind::Beta { beta: b },
        ))
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    fn check_dim(&self, v: &[f64]) -> Result<(), SupplyError> {
        if v.len() != self.dim() {
            return Err(SupplyError::Dimension {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(())
    }

    pub fn omega(&self, u: &[f64], ydot: &[f64]) -> Result<f64, SupplyError> {
        self.check_dim(u)?;
        self.check_dim(ydot)?;
        let u = DVector::from_column_slice(u);
        let yd = DVector::from_column_slice(ydot);
        let quad = (yd.transpose() * self.q.as_matrix() * &yd)[0];
        let cross = (yd.transpose() * &self.s * &u)[0];
        let input = (u.transpose() * self.r.as_matrix() * &u)[0];
        Ok(quad + 2.0 * cross + input)
    }

    /// `(∇_u ω, ∇_ẏ ω)`.
    pub fn omega_gradient(&self, u: &[f64], ydot: &[f64]) -> Result<(Vec<f64>, Vec<f64>), SupplyError> {
        self.check_dim(u)?;
        self.check_dim(ydot)?;
        let u = DVector::from_column_slice(u);
        let yd = DVector::from_column_slice(ydot);
        let gu = (self.s.transpose() * &yd + self.r.as_matrix() * &u) * 2.0;
        let gy = (self.q.as_matrix() * &yd + &self.s * &u) * 2.0;
        Ok((gu.as_slice().to_vec(), gy.as_slice().to_vec()))
    }

    /// Gain `G = −R⁻¹Sᵀ` of the input that makes `ω` stationary in `u` at
    /// fixed `ẏ`: `u* = Gẏ`. For the β-family `G = 2I`.
    pub fn stationary_gain(&self) -> Result<DMatrix<f64>, SupplyError> {
        let rinv = self
            .r
            .as_matrix()
            .clone()
            .try_inverse()
            .filter(|m| m.iter().all(|v| v.is_finite()))
            .ok_or(SupplyError::SingularR)?;
        if rinv.amax() * self.r.as_matrix().amax() > 1e12 {
            return Err(SupplyError::SingularR);
        }
        Ok(-(rinv * self.s.transpose()))
    }

    /// `u*` for the given `ẏ`; see [`SupplyRate::stationary_gain`].
    pub fn omega_minimizer(&self, ydot: &[f64]) -> Result<Vec<f64>, SupplyError> {
        self.check_dim(ydot)?;
        let g = self.stationary_gain()?;
        Ok((g * DVector::from_column_slice(ydot)).as_slice().to_vec())
    }
}

/// `γ²uᵀu − yᵀy`, a supply in `(u, y)` rather than `(u, ẏ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Supply {
    pub gamma: f64,
}

impl L2Supply {
    pub fn new(gamma: f64) -> Result<Self, SupplyError> {
        Ok(L2Supply {
            gamma: positive("gamma", gamma)?,
        })
    }

    pub fn eval(&self, u: &[f64], y: &[f64]) -> f64 {
        let uu: f64 = u.iter().map(|v| v * v).sum();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        self.gamma * self.gamma * uu - yy
    }
}

/// Anything that can be integrated along a trajectory sample.
pub trait SupplyIntegrand: Sync {
    fn rate(&self, u: &[f64], y: &[f64], ydot: &[f64]) -> f64;
}

impl SupplyIntegrand for SupplyRate {
    fn rate(&self, u: &[f64], _y: &[f64], ydot: &[f64]) -> f64 {
        self.omega(u, ydot).expect("trajectory dimensions match the supply")
    }
}

impl SupplyIntegrand for L2Supply {
    fn rate(&self, u: &[f64], y: &[f64], _ydot: &[f64]) -> f64 {
        self.eval(u, y)
    }
}

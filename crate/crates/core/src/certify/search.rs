//! Search for a storage matrix `P` making an LTI LMI negative semidefinite.
//!
//! The LMI is affine in `P`, `F(P) = F₀ + Σ P_ij G_ij`, so `λ_max(F(P))` is
//! convex. We minimize it by projected subgradient descent over
//! `{P = Pᵀ, P ⪰ εI}` with an adaptive step, starting from the best of a
//! family of Lyapunov solutions and a few seeded random points.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lti::{l2_lmi, lti_lmi};
use super::CertifyError;
use crate::matcore::{lyapunov_solve, scaled_tol, sym_eigen, SymMatrix};
use crate::supply::{L2Supply, SupplyRate};
use crate::sysmodel::{LtiSystem, StorageScale};

#[derive(Debug, Clone)]
pub enum StorageTarget {
    /// `lti_lmi(sys, sr, P, scale, t) ⪯ 0`.
    Supply {
        sr: SupplyRate,
        scale: StorageScale,
        t: Option<SymMatrix>,
    },
    /// L2-gain `≤ γ` with `V = ½xᵀPx`.
    L2 { gamma: f64 },
}

#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub max_iters: usize,
    /// Lower bound `ε` on the eigenvalues of `P`.
    pub min_eig: f64,
    pub tol: f64,
    pub seed: u64,
    pub random_starts: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            max_iters: 4000,
            min_eig: 1e-6,
            tol: crate::matcore::DEFAULT_TOL,
            seed: 0,
            random_starts: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub feasible: bool,
    /// Best iterate found (the witness when `feasible`).
    pub p: SymMatrix,
    /// `λ_max` of the LMI at `p`.
    pub margin: f64,
    /// Absolute threshold `margin` was compared against.
    pub threshold: f64,
    pub iterations: usize,
}

struct Affine {
    f0: DMatrix<f64>,
    /// `(i, j, G_ij)` for `i ≤ j`.
    basis: Vec<(usize, usize, DMatrix<f64>)>,
}

impl Affine {
    fn build(sys: &LtiSystem, target: &StorageTarget) -> Result<Self, CertifyError> {
        let n = sys.n();
        let eval = |p: &SymMatrix| -> Result<DMatrix<f64>, CertifyError> {
            Ok(match target {
                StorageTarget::Supply { sr, scale, t } => lti_lmi(sys, sr, p, *scale, t.as_ref())?,
                StorageTarget::L2 { gamma } => l2_lmi(sys, p, L2Supply::new(*gamma)?)?,
            }
            .into_matrix())
        };
        let f0 = eval(&SymMatrix::zeros(n))?;
        let mut basis = Vec::new();
        for i in 0..n {
            for j in i..n {
                let mut e = DMatrix::zeros(n, n);
                e[(i, j)] = 1.0;
                e[(j, i)] = 1.0;
                basis.push((i, j, eval(&SymMatrix::symmetrized(e))? - &f0));
            }
        }
        Ok(Affine { f0, basis })
    }

    fn at(&self, p: &SymMatrix) -> SymMatrix {
        let mut m = self.f0.clone();
        for (i, j, g) in &self.basis {
            m += g * p[(*i, *j)];
        }
        SymMatrix::symmetrized(m)
    }

    /// `(λ_max, subgradient)`; the subgradient averages over the top
    /// eigenvalue cluster.
    fn value_and_subgradient(&self, p: &SymMatrix) -> Result<(f64, DMatrix<f64>), CertifyError> {
        let m = self.at(p);
        let eig = sym_eigen(&m)?;
        let k = eig.values.len();
        let top = eig.values[k - 1];
        let cluster = 1e-9 * (1.0 + m.frobenius());
        let members: Vec<usize> = (0..k).filter(|&i| eig.values[i] >= top - cluster).collect();
        let n = p.dim();
        let mut grad = DMatrix::zeros(n, n);
        for (i, j, g) in &self.basis {
            let mut acc = 0.0;
            for &c in &members {
                let v = eig.vectors.column(c);
                acc += (v.transpose() * g * v)[0];
            }
            acc /= members.len() as f64;
            // P_ij and P_ji share one coordinate
            if i == j {
                grad[(*i, *j)] = acc;
            } else {
                grad[(*i, *j)] = 0.5 * acc;
                grad[(*j, *i)] = 0.5 * acc;
            }
        }
        Ok((top, grad))
    }
}

/// Eigenvalue clipping onto `{P ⪰ εI}`.
fn project(p: DMatrix<f64>, eps: f64) -> Result<SymMatrix, CertifyError> {
    let s = SymMatrix::symmetrized(p);
    let eig = sym_eigen(&s)?;
    if eig.values[0] >= eps {
        return Ok(s);
    }
    let n = s.dim();
    let mut out = DMatrix::zeros(n, n);
    for (k, &lam) in eig.values.iter().enumerate() {
        let v = eig.vectors.column(k);
        out += v * v.transpose() * lam.max(eps);
    }
    Ok(SymMatrix::symmetrized(out))
}

fn starts(sys: &LtiSystem, opts: &SearchOptions) -> Result<Vec<SymMatrix>, CertifyError> {
    let n = sys.n();
    let mut out = Vec::new();
    for k in -8..=8 {
        let c = 2f64.powi(k);
        if let Ok(p) = lyapunov_solve(&sys.a, &SymMatrix::identity(n).scale(c)) {
            out.push(project(p.into_matrix(), opts.min_eig)?);
        }
    }
    out.push(SymMatrix::identity(n));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.random_starts {
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        out.push(project(
            &g * g.transpose() + DMatrix::identity(n, n) * 0.1,
            opts.min_eig,
        )?);
    }
    Ok(out)
}

pub fn find_storage_p(
    sys: &LtiSystem,
    target: &StorageTarget,
    opts: &SearchOptions,
) -> Result<SearchResult, CertifyError> {
    let aff = Affine::build(sys, target)?;
    let threshold_of = |p: &SymMatrix| scaled_tol(opts.tol, &aff.at(p));

    let mut best: Option<(SymMatrix, f64)> = None;
    for p in starts(sys, opts)? {
        let (v, _) = aff.value_and_subgradient(&p)?;
        if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
            best = Some((p, v));
        }
    }
    let (mut p, mut val) = best.expect("identity start always present");
    let mut best_p = p.clone();
    let mut best_val = val;
    let mut step = 0.1 * (1.0 + p.frobenius());
    let mut iterations = 0;
    while iterations < opts.max_iters {
        if best_val <= threshold_of(&best_p) {
            break;
        }
        iterations += 1;
        let (_, grad) = aff.value_and_subgradient(&p)?;
        let gnorm = grad.norm();
        if gnorm == 0.0 {
            break;
        }
        let cand = project(p.as_matrix() - grad * (step / gnorm), opts.min_eig)?;
        let (cv, _) = aff.value_and_subgradient(&cand)?;
        if cv < val {
            p = cand;
            val = cv;
            step *= 1.5;
            if val < best_val {
                best_val = val;
                best_p = p.clone();
            }
        } else {
            step *= 0.5;
            if step < 1e-15 * (1.0 + p.frobenius()) {
                break;
            }
        }
    }
    let threshold = threshold_of(&best_p);
    Ok(SearchResult {
        feasible: best_val <= threshold,
        p: best_p,
        margin: best_val,
        threshold,
        iterations,
    })
}

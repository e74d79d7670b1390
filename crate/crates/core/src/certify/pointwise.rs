//! Pointwise forms for input-affine systems.
//!
//! With `ẏ = ∇hᵀ(f + gu)` the dissipation defect
//! `d(x, u) = ω(u, ẏ) − ∇Vᵀ(f + gu)` is a quadratic in `u`, so
//! `d(x, u) = [1; u]ᵀ M(x) [1; u]` for the `(1+n)` matrix
//!
//! ```text
//! M(x) = [[ fᵀ∇hQ∇hᵀf − ∇Vᵀf ,  (Ŝᵀf − ½gᵀ∇V)ᵀ ],
//!         [ Ŝᵀf − ½gᵀ∇V       ,  R̂             ]]
//! Ŝ = ∇hQ∇hᵀg + ∇hS
//! R̂ = gᵀ∇hQ∇hᵀg + gᵀ∇hS + Sᵀ∇hᵀg + R
//! ```
//!
//! and dissipativity at `x` for every `u` is `M(x) ⪰ 0`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    property_for, Certificate, CertifyError, GridSummary, Hypothesis, HypothesisStatus, LwSample, Margin, Property,
    Requirement, Verdict, WorstPoint,
};
use crate::expr::EvalError;
use crate::matcore::{
    definiteness_toward, matrix_to_rows, psd_factor, scaled_tol, DefinitenessVerdict, Sense, SymMatrix,
};
use crate::supply::{L2Supply, SupplyRate};
use crate::sysmodel::{
    enumerate_grid, validate, validate_storage, AffineSystem, GridSpec, StorageCandidate, SystemModel,
};

/// Number of skip reasons kept in a report.
const MAX_SKIP_REASONS: usize = 8;

/// Raw ingredients of the pointwise form at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseForms {
    pub x: Vec<f64>,
    pub fval: DVector<f64>,
    pub g: DMatrix<f64>,
    pub hval: DVector<f64>,
    /// `∇h(x)`, entry `(i, j) = ∂h_j/∂x_i`.
    pub jac_h: DMatrix<f64>,
    pub grad_v: DVector<f64>,
    pub shat: DMatrix<f64>,
    pub rhat: SymMatrix,
}

pub fn pointwise_forms(
    sys: &AffineSystem,
    sr: &SupplyRate,
    v: &StorageCandidate,
    x: &[f64],
) -> Result<PointwiseForms, CertifyError> {
    let n = sys.n();
    if x.len() != n {
        return Err(CertifyError::Dimension {
            what: "state",
            expected: n,
            got: x.len(),
        });
    }
    if sr.dim() != n {
        return Err(CertifyError::Dimension {
            what: "supply",
            expected: n,
            got: sr.dim(),
        });
    }
    let fval = DVector::from_vec(sys.f.eval(x)?);
    let g = sys.g.eval(x)?;
    let hval = DVector::from_vec(sys.h.eval(x)?);
    let jac_h = sys.jac_h.eval(x)?;
    let grad_v = DVector::from_vec(v.gradient(x)?);
    if grad_v.len() != n {
        return Err(CertifyError::Dimension {
            what: "storage gradient",
            expected: n,
            got: grad_v.len(),
        });
    }
    let q = sr.q.as_matrix();
    let jq = &jac_h * q;
    let shat = &jq * jac_h.transpose() * &g + &jac_h * &sr.s;
    let gj = g.transpose() * &jac_h;
    let gjs = &gj * &sr.s;
    let rhat = &gj * q * gj.transpose() + &gjs + gjs.transpose() + sr.r.as_matrix();
    for v in fval.iter().chain(g.iter()).chain(grad_v.iter()).chain(rhat.iter()) {
        if !v.is_finite() {
            return Err(EvalError::NonFinite.into());
        }
    }
    Ok(PointwiseForms {
        x: x.to_vec(),
        fval,
        g,
        hval,
        jac_h,
        grad_v,
        shat,
        rhat: SymMatrix::symmetrized(rhat),
    })
}

impl PointwiseForms {
    /// `M(x)` for the supply the forms were built with.
    pub fn dissipation_matrix(&self, sr: &SupplyRate) -> SymMatrix {
        let jf = self.jac_h.transpose() * &self.fval;
        let c = (jf.transpose() * sr.q.as_matrix() * &jf)[0] - self.grad_v.dot(&self.fval);
        let b = self.shat.transpose() * &self.fval - self.g.transpose() * &self.grad_v * 0.5;
        let n = self.fval.len();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m[(0, 0)] = c;
        for i in 0..n {
            m[(0, i + 1)] = b[i];
            m[(i + 1, 0)] = b[i];
        }
        m.view_mut((1, 1), (n, n)).copy_from(self.rhat.as_matrix());
        SymMatrix::symmetrized(m)
    }

    /// `d(x, u)` evaluated directly from `ω` and `V̇`.
    pub fn defect(&self, sr: &SupplyRate, u: &[f64]) -> f64 {
        let u = DVector::from_column_slice(u);
        let xdot = &self.fval + &self.g * &u;
        let ydot = self.jac_h.transpose() * &xdot;
        let w = sr
            .omega(u.as_slice(), ydot.as_slice())
            .expect("dimensions checked at construction");
        w - self.grad_v.dot(&xdot)
    }
}

pub fn pointwise_dissipation_matrix(
    sys: &AffineSystem,
    sr: &SupplyRate,
    v: &StorageCandidate,
    x: &[f64],
) -> Result<SymMatrix, CertifyError> {
    Ok(pointwise_forms(sys, sr, v, x)?.dissipation_matrix(sr))
}

/// Named members of the NI family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NiFamily {
    Ni,
    Isni(f64),
    Osni(f64),
}

impl NiFamily {
    pub fn supply(self, n: usize) -> Result<SupplyRate, CertifyError> {
        Ok(match self {
            NiFamily::Ni => SupplyRate::ni(n),
            NiFamily::Isni(e) => SupplyRate::isni(n, e)?,
            NiFamily::Osni(d) => SupplyRate::osni(n, d)?,
        })
    }

    pub fn property(self) -> Property {
        match self {
            NiFamily::Ni => Property::Ni,
            NiFamily::Isni(_) => Property::Isni,
            NiFamily::Osni(_) => Property::Osni,
        }
    }
}

/// The NI-family form, required `⪯ 0`. It is `−M(x)` for the matching
/// supply; the `gᵀ∇h` block enters symmetrized.
fn ni_family_matrix(
    sys: &AffineSystem,
    v: &StorageCandidate,
    fam: NiFamily,
    x: &[f64],
) -> Result<SymMatrix, CertifyError> {
    let sr = fam.supply(sys.n())?;
    Ok(pointwise_dissipation_matrix(sys, &sr, v, x)?.scale(-1.0))
}

pub fn ni_matrix_affine(sys: &AffineSystem, v: &StorageCandidate, x: &[f64]) -> Result<SymMatrix, CertifyError> {
    ni_family_matrix(sys, v, NiFamily::Ni, x)
}

pub fn isni_matrix_affine(
    sys: &AffineSystem,
    v: &StorageCandidate,
    epsilon: f64,
    x: &[f64],
) -> Result<SymMatrix, CertifyError> {
    ni_family_matrix(sys, v, NiFamily::Isni(epsilon), x)
}

pub fn osni_matrix_affine(
    sys: &AffineSystem,
    v: &StorageCandidate,
    delta: f64,
    x: &[f64],
) -> Result<SymMatrix, CertifyError> {
    ni_family_matrix(sys, v, NiFamily::Osni(delta), x)
}

/// `[[∇Vᵀf + hᵀh, ½∇Vᵀg], [·, −γ²I]]`, required `⪯ 0`.
pub fn l2_matrix_affine(
    sys: &AffineSystem,
    v: &StorageCandidate,
    l2: L2Supply,
    x: &[f64],
) -> Result<SymMatrix, CertifyError> {
    let n = sys.n();
    let f = DVector::from_vec(sys.f.eval(x)?);
    let g = sys.g.eval(x)?;
    let h = DVector::from_vec(sys.h.eval(x)?);
    let gv = DVector::from_vec(v.gradient(x)?);
    let off = g.transpose() * &gv * 0.5;
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m[(0, 0)] = gv.dot(&f) + h.dot(&h);
    for i in 0..n {
        m[(0, i + 1)] = off[i];
        m[(i + 1, 0)] = off[i];
        m[(i + 1, i + 1)] = -l2.gamma * l2.gamma;
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite.into());
    }
    Ok(SymMatrix::symmetrized(m))
}

/// `(L(x), W(x))` with `d(x, u) = ‖L + Wu‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LwFactor {
    pub l: DVector<f64>,
    /// `q × n`.
    pub w: DMatrix<f64>,
}

impl LwFactor {
    pub fn q(&self) -> usize {
        self.w.nrows()
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        (&self.l + &self.w * DVector::from_column_slice(u)).norm_squared()
    }
}

pub fn recover_lw(
    sys: &AffineSystem,
    sr: &SupplyRate,
    v: &StorageCandidate,
    x: &[f64],
    tol: f64,
) -> Result<LwFactor, CertifyError> {
    let m = pointwise_dissipation_matrix(sys, sr, v, x)?;
    lw_from_matrix(&m, tol)
}

pub(crate) fn lw_from_matrix(m: &SymMatrix, tol: f64) -> Result<LwFactor, CertifyError> {
    let f = psd_factor(m, scaled_tol(tol, m))?;
    let n = m.dim() - 1;
    let q = f.nrows();
    Ok(LwFactor {
        l: DVector::from_iterator(q, f.column(0).iter().copied()),
        w: f.view((0, 1), (q, n)).into_owned(),
    })
}

/// Per-point outcome of a sweep.
pub(crate) enum PointResult {
    Done(DefinitenessVerdict),
    Skipped(String),
}

pub(crate) struct Sweep {
    pub points: Vec<Vec<f64>>,
    pub results: Vec<PointResult>,
}

impl Sweep {
    /// Evaluate `form` at every point in parallel; results stay in grid order.
    pub fn run<F>(points: Vec<Vec<f64>>, tol: f64, sense: Sense, form: F) -> Self
    where
        F: Fn(&[f64]) -> Result<SymMatrix, CertifyError> + Sync,
    {
        let results = crate::thread_pool().install(|| {
            points
                .par_iter()
                .map(|x| match form(x) {
                    Ok(m) => match definiteness_toward(&m, scaled_tol(tol, &m), sense) {
                        Ok(d) => PointResult::Done(d),
                        Err(e) => PointResult::Skipped(e.to_string()),
                    },
                    Err(e) => PointResult::Skipped(e.to_string()),
                })
                .collect()
        });
        Sweep { points, results }
    }

    fn violation(d: &DefinitenessVerdict, req: Requirement) -> f64 {
        match req {
            Requirement::Psd | Requirement::Pd => -d.min_eig,
            _ => d.max_eig,
        }
    }

    /// Worst point under `req`, lowest index on ties.
    pub fn worst(&self, req: Requirement) -> Option<(usize, DefinitenessVerdict)> {
        let mut best: Option<(usize, DefinitenessVerdict)> = None;
        for (i, r) in self.results.iter().enumerate() {
            if let PointResult::Done(d) = r {
                let worse = match &best {
                    None => true,
                    Some((_, b)) => Self::violation(d, req) > Self::violation(b, req),
                };
                if worse {
                    best = Some((i, *d));
                }
            }
        }
        best
    }

    pub fn evaluated(&self) -> usize {
        self.results
            .iter()
            .filter(|r| matches!(r, PointResult::Done(_)))
            .count()
    }

    pub fn summary(&self) -> GridSummary {
        let skip_reasons: Vec<(usize, String)> = self
            .results
            .iter()
            .enumerate()
            .filter_map(|(i, r)| match r {
                PointResult::Skipped(msg) => Some((i, msg.clone())),
                PointResult::Done(_) => None,
            })
            .take(MAX_SKIP_REASONS)
            .collect();
        let evaluated = self.evaluated();
        GridSummary {
            points: self.points.len(),
            evaluated,
            skipped: self.points.len() - evaluated,
            skip_reasons,
        }
    }

    /// Record grid summary, worst point and the worst-point margin, and set
    /// the verdict. Does not override a violated hypothesis.
    pub fn settle(&self, cert: &mut Certificate, name: &str, req: Requirement) {
        let summary = self.summary();
        if summary.skipped > 0 {
            cert.notes.push(format!(
                "{} of {} grid points skipped (expression domain errors)",
                summary.skipped, summary.points
            ));
        }
        if summary.points == 1 {
            cert.notes
                .push("grid has a single point; the check is vacuous away from it".into());
        }
        cert.grid = Some(summary);
        match self.worst(req) {
            Some((i, d)) => {
                cert.worst_point = Some(WorstPoint {
                    index: i,
                    x: self.points[i].clone(),
                    violation: Self::violation(&d, req),
                });
                cert.margins.push(Margin::from_verdict(name, req, d));
                cert.settle_from_margins();
            }
            None => {
                cert.notes.push("every grid point was skipped".into());
                cert.verdict = Verdict::Inconclusive;
                cert.conclusion = "no grid point could be evaluated".into();
            }
        }
    }
}

fn affine_hypotheses(cert: &mut Certificate, sys: &AffineSystem, v: &StorageCandidate, points: &[Vec<f64>]) {
    let report = validate(&SystemModel::Affine(sys.clone()));
    if report.is_admissible() {
        cert.hypotheses
            .push(Hypothesis::new("f(0) = 0 and h(0) = 0", HypothesisStatus::Checked, ""));
    } else {
        for issue in report.issues {
            cert.hypotheses.push(Hypothesis::new(
                "system admissible",
                HypothesisStatus::Violated,
                issue.message,
            ));
        }
    }
    let storage = validate_storage(v, points);
    if storage.is_admissible() {
        cert.hypotheses.push(Hypothesis::new(
            "V(0) = 0 and V ≥ 0 on the grid",
            HypothesisStatus::Checked,
            "",
        ));
    } else {
        for issue in storage.issues {
            cert.hypotheses.push(Hypothesis::new(
                "storage admissible",
                HypothesisStatus::Violated,
                issue.message,
            ));
        }
    }
    cert.hypotheses.push(Hypothesis::new(
        "every state reachable from the origin",
        HypothesisStatus::Assumed,
        "not verifiable for nonlinear systems",
    ));
    cert.notes
        .push("grid certificate: the inequality is verified at the sampled states only".into());
}

/// Number of random inputs used to test `d(x, u) = ‖L + Wu‖²`.
const LW_PROBES: usize = 10;

fn lw_sample(forms: &PointwiseForms, sr: &SupplyRate, tol: f64, seed: u64) -> Result<LwSample, CertifyError> {
    let m = forms.dissipation_matrix(sr);
    let lw = lw_from_matrix(&m, tol)?;
    let n = forms.x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut residual = 0.0f64;
    for _ in 0..LW_PROBES {
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        residual = residual.max((lw.value(&u) - forms.defect(sr, &u)).abs());
    }
    Ok(LwSample {
        x: forms.x.clone(),
        l: lw.l.as_slice().to_vec(),
        w: matrix_to_rows(&lw.w),
        q: lw.q(),
        identity_residual: residual,
    })
}

/// Grid check of `M(x) ⪰ 0`. On success `(L, W)` is recovered at the worst
/// point and at the origin when it lies on the grid.
pub fn check_dissipative_affine(
    sys: &AffineSystem,
    sr: &SupplyRate,
    v: &StorageCandidate,
    grid: &GridSpec,
    tol: f64,
) -> Result<Certificate, CertifyError> {
    let points = enumerate_grid(grid, sys.n())?;
    let mut cert = Certificate::new(property_for(&sr.kind), tol);
    cert.witness.storage = Some(v.into());
    cert.witness.supply = Some(sr.into());
    affine_hypotheses(&mut cert, sys, v, &points);
    let sweep = Sweep::run(points, tol, Sense::Positive, |x| {
        pointwise_dissipation_matrix(sys, sr, v, x)
    });
    sweep.settle(&mut cert, "pointwise dissipation matrix", Requirement::Psd);
    if cert.verdict == Verdict::Certified {
        let mut picks: Vec<usize> = Vec::new();
        if let Some(w) = &cert.worst_point {
            picks.push(w.index);
        }
        if let Some(o) = sweep.points.iter().position(|x| x.iter().all(|&c| c == 0.0)) {
            if !picks.contains(&o) {
                picks.push(o);
            }
        }
        for (k, i) in picks.into_iter().enumerate() {
            let forms = pointwise_forms(sys, sr, v, &sweep.points[i])?;
            cert.lw_samples.push(lw_sample(&forms, sr, tol, k as u64)?);
        }
    }
    Ok(cert)
}

/// Grid check of the NI-family form `⪯ 0`.
pub fn check_ni_family_affine(
    sys: &AffineSystem,
    v: &StorageCandidate,
    fam: NiFamily,
    grid: &GridSpec,
    tol: f64,
) -> Result<Certificate, CertifyError> {
    let points = enumerate_grid(grid, sys.n())?;
    let sr = fam.supply(sys.n())?;
    let mut cert = Certificate::new(fam.property(), tol);
    cert.witness.storage = Some(v.into());
    cert.witness.supply = Some((&sr).into());
    affine_hypotheses(&mut cert, sys, v, &points);
    let sweep = Sweep::run(points, tol, Sense::Negative, |x| ni_family_matrix(sys, v, fam, x));
    sweep.settle(&mut cert, "NI-family matrix", Requirement::Nsd);
    Ok(cert)
}

/// Grid check of the L2 form `⪯ 0`.
pub fn check_l2_affine(
    sys: &AffineSystem,
    v: &StorageCandidate,
    l2: L2Supply,
    grid: &GridSpec,
    tol: f64,
) -> Result<Certificate, CertifyError> {
    let points = enumerate_grid(grid, sys.n())?;
    let mut cert = Certificate::new(Property::L2Gain, tol);
    cert.witness.storage = Some(v.into());
    cert.witness.gamma = Some(l2.gamma);
    affine_hypotheses(&mut cert, sys, v, &points);
    let sweep = Sweep::run(points, tol, Sense::Negative, |x| l2_matrix_affine(sys, v, l2, x));
    sweep.settle(&mut cert, "L2 matrix", Requirement::Nsd);
    Ok(cert)
}

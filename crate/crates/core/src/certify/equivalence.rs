//! Staged NI/L2 equivalence check for input-affine systems.
//!
//! At every grid point:
//! 1. `gᵀ∇h = I`,
//! 2. `fᵀ∇h∇hᵀf − 2∇Vᵀf − 4hᵀh = 0`,
//! 3. the NI form and the L2 form (`γ = 1`) agree on `⪯ 0`.
//!
//! Stages 1 and 2 are hypotheses; if either fails anywhere the result is
//! INCONCLUSIVE. Otherwise the global NI and L2 grid verdicts are compared.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::pointwise::{check_l2_affine, check_ni_family_affine, NiFamily};
use super::{Certificate, CertifyError, Hypothesis, HypothesisStatus, Margin, Property, Verdict, WorstPoint};
use crate::supply::L2Supply;
use crate::sysmodel::{enumerate_grid, AffineSystem, GridSpec, StorageCandidate};

/// Stage residuals at one point: `(‖gᵀ∇h − I‖_F, scale)`, `(|r|, scale)`.
struct StageResiduals {
    coupling: (f64, f64),
    balance: (f64, f64),
}

fn stage_residuals(sys: &AffineSystem, v: &StorageCandidate, x: &[f64]) -> Result<StageResiduals, CertifyError> {
    let n = sys.n();
    let f = DVector::from_vec(sys.f.eval(x)?);
    let g = sys.g.eval(x)?;
    let h = DVector::from_vec(sys.h.eval(x)?);
    let jh = sys.jac_h.eval(x)?;
    let gv = DVector::from_vec(v.gradient(x)?);
    let gj = g.transpose() * &jh;
    let coupling = (&gj - DMatrix::identity(n, n)).norm();
    let jf = jh.transpose() * &f;
    let t1 = jf.norm_squared();
    let t2 = 2.0 * gv.dot(&f);
    let t3 = 4.0 * h.norm_squared();
    Ok(StageResiduals {
        coupling: (coupling, gj.norm()),
        balance: ((t1 - t2 - t3).abs(), t1.abs() + t2.abs() + t3.abs()),
    })
}

pub fn check_equivalence_thm38(
    sys: &AffineSystem,
    v: &StorageCandidate,
    grid: &GridSpec,
    tol: f64,
) -> Result<Certificate, CertifyError> {
    let points = enumerate_grid(grid, sys.n())?;
    let mut cert = Certificate::new(Property::Thm38Equiv, tol);
    cert.witness.storage = Some(v.into());

    let stages: Vec<Option<StageResiduals>> =
        crate::thread_pool().install(|| points.par_iter().map(|x| stage_residuals(sys, v, x).ok()).collect());

    // worst relative excess per stage, lowest index on ties
    let mut stage_ok = [true, true];
    for (k, name) in ["gᵀ∇h = I", "fᵀ∇h∇hᵀf − 2∇Vᵀf − 4hᵀh = 0"].into_iter().enumerate() {
        let mut worst: Option<(usize, f64, f64)> = None;
        for (i, s) in stages.iter().enumerate() {
            if let Some(s) = s {
                let (r, scale) = if k == 0 { s.coupling } else { s.balance };
                let thr = tol * (1.0 + scale);
                if worst.is_none_or(|(_, wr, wt)| r - thr > wr - wt) {
                    worst = Some((i, r, thr));
                }
            }
        }
        let Some((i, r, thr)) = worst else { continue };
        let margin = Margin::at_most(format!("stage {} residual", k + 1), r, thr);
        stage_ok[k] = margin.satisfied;
        let status = if margin.satisfied {
            HypothesisStatus::Checked
        } else {
            HypothesisStatus::Violated
        };
        cert.hypotheses.push(Hypothesis::new(
            name,
            status,
            format!("worst residual {r:e} at {:?} (threshold {thr:e})", points[i]),
        ));
        cert.metric(&format!("stage{}_worst_residual", k + 1), r);
        cert.margins.push(margin);
        if !stage_ok[k] && cert.worst_point.is_none() {
            cert.worst_point = Some(WorstPoint {
                index: i,
                x: points[i].clone(),
                violation: r - thr,
            });
        }
    }
    if stages.iter().all(Option::is_none) {
        cert.verdict = Verdict::Inconclusive;
        cert.conclusion = "no grid point could be evaluated".into();
        return Ok(cert);
    }
    if !stage_ok[0] || !stage_ok[1] {
        cert.verdict = Verdict::Inconclusive;
        let failed: Vec<&str> = [(0, "(i)"), (1, "(ii)")]
            .into_iter()
            .filter(|(k, _)| !stage_ok[*k])
            .map(|(_, s)| s)
            .collect();
        cert.conclusion = format!("hypothesis stage {} violated", failed.join(" and "));
        return Ok(cert);
    }

    let ni = check_ni_family_affine(sys, v, NiFamily::Ni, grid, tol)?;
    let l2 = check_l2_affine(sys, v, L2Supply::new(1.0)?, grid, tol)?;
    let (vn, vl) = (ni.verdict, l2.verdict);
    if let Some(m) = ni.margins.first() {
        cert.metric("ni_worst_max_eig", m.value);
    }
    if let Some(m) = l2.margins.first() {
        cert.metric("l2_worst_max_eig", m.value);
    }
    cert.sub_checks = vec![ni, l2];
    if vn == vl && vn.is_definite() {
        cert.verdict = Verdict::Certified;
        cert.conclusion = format!("CONFIRMED: NI {vn}, L2 {vl}");
    } else if vn.is_definite() && vl.is_definite() {
        cert.verdict = Verdict::Refuted;
        cert.conclusion = format!("NI and L2 verdicts disagree: NI {vn}, L2 {vl}");
    } else {
        cert.verdict = Verdict::Inconclusive;
        cert.conclusion = format!("sub-check inconclusive: NI {vn}, L2 {vl}");
    }
    Ok(cert)
}

//! `2n × 2n` LMIs for `ẋ = Ax + Bu, y = Cx` with `V = s·xᵀPx`.
//!
//! Strict `(Q, S, R)`-dissipation `V̇ + xᵀTx ≤ ω(u, ẏ)` is, after
//! substituting `ẏ = CAx + CBu`, the requirement `[x; u]ᵀ N [x; u] ≤ 0` for
//!
//! ```text
//! N11 = s(AᵀP + PA) + T − AᵀCᵀQCA
//! N12 = sPB − AᵀCᵀ(QCB + S)
//! N22 = −BᵀCᵀQCB − 2·sym(BᵀCᵀS) − R
//! ```

use nalgebra::DMatrix;

use super::{
    property_for, Certificate, CertifyError, Hypothesis, HypothesisStatus, Margin, Property, Requirement,
    StorageWitness, Verdict,
};
use crate::matcore::{block_sym, definiteness_toward, scaled_tol, schur_reduce, Sense, SymMatrix};
use crate::supply::{L2Supply, SupplyRate};
use crate::sysmodel::{LtiSystem, StorageScale, ORIGIN_TOL};

fn check_dims(sys: &LtiSystem, p: &SymMatrix, sr_dim: Option<usize>) -> Result<(), CertifyError> {
    let n = sys.n();
    if p.dim() != n {
        return Err(CertifyError::Dimension {
            what: "P",
            expected: n,
            got: p.dim(),
        });
    }
    if let Some(d) = sr_dim {
        if d != n {
            return Err(CertifyError::Dimension {
                what: "supply",
                expected: n,
                got: d,
            });
        }
    }
    Ok(())
}

/// The matrix `N` above; required `⪯ 0`. `t` defaults to zero.
pub fn lti_lmi(
    sys: &LtiSystem,
    sr: &SupplyRate,
    p: &SymMatrix,
    scale: StorageScale,
    t: Option<&SymMatrix>,
) -> Result<SymMatrix, CertifyError> {
    check_dims(sys, p, Some(sr.dim()))?;
    if let Some(t) = t {
        check_dims(sys, t, None)?;
    }
    let s = scale.factor();
    let (a, b, c) = (&sys.a, &sys.b, &sys.c);
    let pm = p.as_matrix();
    let q = sr.q.as_matrix();
    let ca = c * a;
    let cb = c * b;
    let mut a11 = (a.transpose() * pm + pm * a) * s - ca.transpose() * q * &ca;
    if let Some(t) = t {
        a11 += t.as_matrix();
    }
    let a12 = pm * b * s - ca.transpose() * (q * &cb + &sr.s);
    let cbs = cb.transpose() * &sr.s;
    let a22 = -(cb.transpose() * q * &cb) - &cbs - cbs.transpose() - sr.r.as_matrix();
    Ok(block_sym(&a11, &a12, &a22))
}

/// NI form with `V = ½xᵀPx`, doubled: `[[AᵀP+PA, PB−AᵀCᵀ], [·, −(CB+BᵀCᵀ)]]`.
pub fn ni_lmi(sys: &LtiSystem, p: &SymMatrix) -> Result<SymMatrix, CertifyError> {
    Ok(lti_lmi(sys, &SupplyRate::ni(sys.n()), p, StorageScale::Half, None)?.scale(2.0))
}

/// L2 form with `V = ½xᵀPx`, doubled: `[[AᵀP+PA+2CᵀC, PB], [·, −2γ²I]]`.
pub fn l2_lmi(sys: &LtiSystem, p: &SymMatrix, l2: L2Supply) -> Result<SymMatrix, CertifyError> {
    check_dims(sys, p, None)?;
    let n = sys.n();
    let (a, b, c) = (&sys.a, &sys.b, &sys.c);
    let pm = p.as_matrix();
    let a11 = a.transpose() * pm + pm * a + c.transpose() * c * 2.0;
    let a12 = pm * b;
    let a22 = DMatrix::identity(n, n) * (-2.0 * l2.gamma * l2.gamma);
    Ok(block_sym(&a11, &a12, &a22))
}

/// NSD margin of `m`, with the Schur complement recorded when the lower
/// block is negative definite.
fn record_lmi(cert: &mut Certificate, name: &str, m: &SymMatrix, n: usize) -> Result<(), CertifyError> {
    let tol = scaled_tol(cert.tol, m);
    let d = definiteness_toward(m, tol, Sense::Negative)?;
    cert.margins.push(Margin::from_verdict(name, Requirement::Nsd, d));
    cert.sym(name, m);
    if let Ok(schur) = schur_reduce(m, n, tol) {
        let sd = definiteness_toward(&schur, scaled_tol(cert.tol, &schur), Sense::Negative)?;
        cert.metric("schur_max_eig", sd.max_eig);
        cert.sym("schur_complement", &schur);
        if sd.is_nsd() != d.is_nsd() {
            cert.notes.push(format!(
                "Schur complement and full eigensolve disagree at the boundary (schur max {:e}, full max {:e})",
                sd.max_eig, d.max_eig
            ));
        }
    }
    Ok(())
}

fn quadratic_witness(p: &SymMatrix, scale: StorageScale) -> StorageWitness {
    StorageWitness::Quadratic { p: p.to_rows(), scale }
}

/// NI check for `V = ½xᵀPx`; any output matrix `C` is accepted.
pub fn check_ni_lti(sys: &LtiSystem, p: &SymMatrix, tol: f64) -> Result<Certificate, CertifyError> {
    let m = ni_lmi(sys, p)?;
    let mut cert = Certificate::new(Property::Ni, tol);
    cert.witness.storage = Some(quadratic_witness(p, StorageScale::Half));
    cert.witness.supply = Some((&SupplyRate::ni(sys.n())).into());
    record_lmi(&mut cert, "ni_lmi", &m, sys.n())?;
    cert.settle_from_margins();
    Ok(cert)
}

/// L2-gain `≤ γ` check for `V = ½xᵀPx`.
pub fn check_l2_lti(sys: &LtiSystem, p: &SymMatrix, gamma: f64, tol: f64) -> Result<Certificate, CertifyError> {
    let l2 = L2Supply::new(gamma)?;
    let m = l2_lmi(sys, p, l2)?;
    let mut cert = Certificate::new(Property::L2Gain, tol);
    cert.witness.storage = Some(quadratic_witness(p, StorageScale::Half));
    cert.witness.gamma = Some(gamma);
    record_lmi(&mut cert, "l2_lmi", &m, sys.n())?;
    let n = sys.n();
    let worst_diag = (0..n).map(|i| m[(i, i)]).fold(f64::NEG_INFINITY, f64::max);
    cert.metric("a11_max_diag", worst_diag);
    cert.settle_from_margins();
    Ok(cert)
}

/// General `(Q, S, R)` check with explicit storage scale and optional `T`.
/// `T`, when given, must be positive definite.
pub fn check_supply_lti(
    sys: &LtiSystem,
    sr: &SupplyRate,
    p: &SymMatrix,
    scale: StorageScale,
    t: Option<&SymMatrix>,
    tol: f64,
) -> Result<Certificate, CertifyError> {
    let m = lti_lmi(sys, sr, p, scale, t)?;
    let mut cert = Certificate::new(property_for(&sr.kind), tol);
    cert.witness.storage = Some(quadratic_witness(p, scale));
    cert.witness.supply = Some(sr.into());
    if let Some(t) = t {
        cert.witness.t = Some(t.to_rows());
        let d = definiteness_toward(t, scaled_tol(tol, t), Sense::Positive)?;
        cert.margins.push(Margin::from_verdict("T", Requirement::Pd, d));
    }
    let d = definiteness_toward(p, scaled_tol(tol, p), Sense::Positive)?;
    cert.margins.push(Margin::from_verdict("P", Requirement::Psd, d));
    record_lmi(&mut cert, "supply_lmi", &m, sys.n())?;
    cert.settle_from_margins();
    Ok(cert)
}

/// `½PBBᵀP − 2B⁻ᵀB⁻¹ + (B⁻¹A)ᵀ(B⁻¹A)`.
pub fn thm39_residual(sys: &LtiSystem, p: &SymMatrix) -> Result<SymMatrix, CertifyError> {
    check_dims(sys, p, None)?;
    Ok(SymMatrix::symmetrized(residual_terms(sys, p)?.iter().sum()))
}

fn residual_terms(sys: &LtiSystem, p: &SymMatrix) -> Result<[DMatrix<f64>; 3], CertifyError> {
    let binv = sys.b_inverse()?;
    let pm = p.as_matrix();
    let pb = pm * &sys.b;
    let ba = &binv * &sys.a;
    Ok([
        &pb * pb.transpose() * 0.5,
        binv.transpose() * &binv * -2.0,
        ba.transpose() * ba,
    ])
}

/// Runs the NI and L2 (`γ = 1`) checks with the same `P` once the residual
/// condition holds. The equivalence is CONFIRMED (verdict CERTIFIED) when
/// both sub-verdicts agree and REFUTED when they disagree.
pub fn check_equivalence_thm39(sys: &LtiSystem, p: &SymMatrix, tol: f64) -> Result<Certificate, CertifyError> {
    check_dims(sys, p, None)?;
    let mut cert = Certificate::new(Property::Thm39Equiv, tol);
    cert.witness.storage = Some(quadratic_witness(p, StorageScale::Half));

    let terms = residual_terms(sys, p)?;
    let residual = SymMatrix::symmetrized(terms.iter().sum());
    let norm = residual.frobenius();
    let threshold = tol * (1.0 + terms.iter().map(|t| t.norm()).sum::<f64>());
    cert.metric("residual_norm", norm);
    cert.metric("residual_threshold", threshold);
    cert.sym("residual", &residual);

    match sys.c_inverse_residual() {
        Ok(r) if r <= ORIGIN_TOL => cert.hypotheses.push(Hypothesis::new(
            "C = B⁻¹",
            HypothesisStatus::Checked,
            format!("max |C − B⁻¹| = {r:e}"),
        )),
        Ok(r) => cert.hypotheses.push(Hypothesis::new(
            "C = B⁻¹",
            HypothesisStatus::Violated,
            format!("max |C − B⁻¹| = {r:e}"),
        )),
        Err(e) => return Err(e.into()),
    }

    let res_margin = Margin::at_most("residual_norm", norm, threshold);
    let res_ok = res_margin.satisfied;
    cert.margins.push(res_margin);
    let hyp_ok = cert.hypotheses.iter().all(|h| h.status != HypothesisStatus::Violated);
    if !res_ok || !hyp_ok {
        cert.verdict = Verdict::Inconclusive;
        cert.conclusion = if res_ok {
            "hypothesis C = B⁻¹ violated".into()
        } else {
            format!("residual condition fails: ‖residual‖_F = {norm:e} > {threshold:e}")
        };
        return Ok(cert);
    }

    let ni = check_ni_lti(sys, p, tol)?;
    let l2 = check_l2_lti(sys, p, 1.0, tol)?;
    cert.metric("ni_max_eig", ni.margins[0].value);
    cert.metric("l2_max_eig", l2.margins[0].value);
    let (vn, vl) = (ni.verdict, l2.verdict);
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

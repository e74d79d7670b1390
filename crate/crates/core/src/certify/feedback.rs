//! Static output feedback `u = −2Ay` for `ẋ = Ax + Bu, y = B⁻¹x` with
//! `AB = BA`, and its strict `(Q, S, R)` dissipativity counterpart under the
//! β-family supply.
//!
//! The closed loop is `A_cl = A − 2BAB⁻¹`. With `C = B⁻¹` the strict LMI
//! (`V = xᵀPx`) has lower block `−I/β` and Schur complement
//! `A_clᵀP + PA_cl + T + βPBBᵀP`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lti::lti_lmi;
use super::{
    Certificate, CertifyError, Hypothesis, HypothesisStatus, Margin, Property, Requirement, StorageWitness, Verdict,
};
use crate::matcore::{definiteness_toward, general_eigenvalues, lyapunov_solve, scaled_tol, Sense, SymMatrix};
use crate::supply::SupplyRate;
use crate::sysmodel::{LtiSystem, StorageScale, ORIGIN_TOL};

/// Largest β tried by the search; halved on each failure.
pub const BETA_MAX: f64 = 1.0;
/// Number of halvings before the search gives up.
pub const BETA_HALVINGS: usize = 60;

#[derive(Debug, Clone, Default)]
pub struct SofOptions {
    pub beta: Option<f64>,
    pub p: Option<SymMatrix>,
    pub t: Option<SymMatrix>,
}

fn check_preconditions(sys: &LtiSystem, tol: f64) -> Result<DMatrix<f64>, CertifyError> {
    let binv = sys.b_inverse()?;
    let c_res = (&sys.c - &binv).amax();
    if c_res > ORIGIN_TOL.max(tol) {
        return Err(CertifyError::Precondition(format!(
            "C must equal B⁻¹ (max |C − B⁻¹| = {c_res:e})"
        )));
    }
    let comm = sys.commutator_residual();
    let scale = 1.0 + sys.a.amax() * sys.b.amax();
    if comm > tol * scale {
        return Err(CertifyError::Precondition(format!(
            "A and B must commute (max |AB − BA| = {comm:e})"
        )));
    }
    Ok(binv)
}

/// `K = −2A` for `u = Ky`, together with the largest relative residual of
/// the stationarity relation `u = 2ẏ` along the closed loop.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackLaw {
    pub k: DMatrix<f64>,
    pub stationarity_residual: f64,
}

/// Number of random states used to check `u = 2ẏ`.
const FEEDBACK_PROBES: usize = 100;

pub fn optimal_feedback(sys: &LtiSystem, beta: f64, seed: u64) -> Result<FeedbackLaw, CertifyError> {
    let n = sys.n();
    check_preconditions(sys, 1e-9)?;
    let sr = SupplyRate::beta(n, beta)?;
    // u* = Gẏ with G = −R⁻¹Sᵀ = 2I for this family
    let gain = sr.stationary_gain()?;
    let k = sys.a.map(|v| -2.0 * v + 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..FEEDBACK_PROBES {
        let x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let y = &sys.c * &x;
        let u = &k * &y;
        let ydot = &sys.c * (&sys.a * &x + &sys.b * &u);
        let r = (&u - &gain * &ydot).norm() / (1.0 + u.norm());
        worst = worst.max(r);
    }
    Ok(FeedbackLaw {
        k,
        stationarity_residual: worst,
    })
}

/// `T = ½(N − βPBBᵀP)` with `N = −(A_clᵀP + PA_cl)`. Half the slack goes to
/// `T`, the other half keeps the Schur complement at `−T`.
fn auto_t(a_cl: &DMatrix<f64>, p: &SymMatrix, b: &DMatrix<f64>, beta: f64) -> SymMatrix {
    let pm = p.as_matrix();
    let n_mat = -(a_cl.transpose() * pm + pm * a_cl);
    let pb = pm * b;
    SymMatrix::symmetrized((n_mat - &pb * pb.transpose() * beta) * 0.5)
}

struct DissipativeSide {
    verdict: Verdict,
    beta: Option<f64>,
    t: Option<SymMatrix>,
    margins: Vec<Margin>,
    lmi: Option<SymMatrix>,
    note: Option<String>,
}

fn evaluate(
    sys: &LtiSystem,
    p: &SymMatrix,
    beta: f64,
    t: &SymMatrix,
    tol: f64,
) -> Result<(Vec<Margin>, SymMatrix), CertifyError> {
    let sr = SupplyRate::beta(sys.n(), beta)?;
    let m = lti_lmi(sys, &sr, p, StorageScale::One, Some(t))?;
    let mut margins = Vec::new();
    let dp = definiteness_toward(p, scaled_tol(tol, p), Sense::Positive)?;
    margins.push(Margin::from_verdict("P", Requirement::Pd, dp));
    let dt = definiteness_toward(t, scaled_tol(tol, t), Sense::Positive)?;
    margins.push(Margin::from_verdict("T", Requirement::Pd, dt));
    let dm = definiteness_toward(&m, scaled_tol(tol, &m), Sense::Negative)?;
    margins.push(Margin::from_verdict("strict_lmi", Requirement::Nsd, dm));
    Ok((margins, m))
}

fn dissipative_side(
    sys: &LtiSystem,
    a_cl: &DMatrix<f64>,
    p: Option<&SymMatrix>,
    opts: &SofOptions,
    tol: f64,
) -> Result<DissipativeSide, CertifyError> {
    let Some(p) = p else {
        return Ok(DissipativeSide {
            verdict: Verdict::Inconclusive,
            beta: None,
            t: None,
            margins: Vec::new(),
            lmi: None,
            note: Some("no storage matrix: the closed-loop Lyapunov equation has no unique solution".into()),
        });
    };
    if let (Some(beta), Some(t)) = (opts.beta, &opts.t) {
        let (margins, m) = evaluate(sys, p, beta, t, tol)?;
        let verdict = if margins.iter().all(|m| m.satisfied) {
            Verdict::Certified
        } else {
            Verdict::Refuted
        };
        return Ok(DissipativeSide {
            verdict,
            beta: Some(beta),
            t: Some(t.clone()),
            margins,
            lmi: Some(m),
            note: None,
        });
    }
    // search: fixed β if given, else halve from BETA_MAX
    let betas: Vec<f64> = match opts.beta {
        Some(b) => vec![b],
        None => (0..BETA_HALVINGS).map(|k| BETA_MAX * 0.5f64.powi(k as i32)).collect(),
    };
    let mut last: Option<(f64, SymMatrix, Vec<Margin>, SymMatrix)> = None;
    for beta in betas {
        let t = match &opts.t {
            Some(t) => t.clone(),
            None => auto_t(a_cl, p, &sys.b, beta),
        };
        let (margins, m) = evaluate(sys, p, beta, &t, tol)?;
        if margins.iter().all(|m| m.satisfied) {
            return Ok(DissipativeSide {
                verdict: Verdict::Certified,
                beta: Some(beta),
                t: Some(t),
                margins,
                lmi: Some(m),
                note: None,
            });
        }
        last = Some((beta, t, margins, m));
    }
    let (beta, t, margins, m) = last.expect("at least one β tried");
    // a storage matrix that is not positive definite disqualifies this witness
    let p_bad = !margins[0].satisfied;
    Ok(DissipativeSide {
        verdict: if p_bad { Verdict::Refuted } else { Verdict::Inconclusive },
        beta: Some(beta),
        t: Some(t),
        margins,
        lmi: Some(m),
        note: Some(if p_bad {
            "P is not positive definite, so V = xᵀPx is not a valid storage".into()
        } else {
            "no (β, T) found in the search budget".into()
        }),
    })
}

/// Both directions of the feedback/dissipativity equivalence.
///
/// The stability side checks that `A_cl` is Hurwitz. The dissipativity side
/// checks the strict LMI with `V = xᵀPx`, `P` defaulting to the solution of
/// `A_clᵀP + PA_cl = −I`. Overall: CERTIFIED when both sides are certified,
/// REFUTED when stability is refuted and dissipativity is not certified,
/// INCONCLUSIVE otherwise (a definite disagreement is flagged in the notes).
pub fn check_sof_thm44(sys: &LtiSystem, opts: &SofOptions, tol: f64) -> Result<Certificate, CertifyError> {
    let n = sys.n();
    let binv = check_preconditions(sys, tol)?;
    let mut cert = Certificate::new(Property::SofStable, tol);
    cert.hypotheses
        .push(Hypothesis::new("C = B⁻¹", HypothesisStatus::Checked, ""));
    cert.hypotheses
        .push(Hypothesis::new("AB = BA", HypothesisStatus::Checked, ""));

    let k = sys.a.map(|v| -2.0 * v + 0.0);
    let a_cl = &sys.a - &sys.b * &sys.a * &binv * 2.0;
    cert.witness.k = Some(crate::matcore::matrix_to_rows(&k));
    cert.matrix("closed_loop", &a_cl);

    let eigs = general_eigenvalues(&a_cl)?;
    let max_re = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    for (i, z) in eigs.iter().enumerate() {
        cert.metric(&format!("closed_loop_eig_{i}_re"), z.re);
        cert.metric(&format!("closed_loop_eig_{i}_im"), z.im);
    }
    let stab_tol = tol * (1.0 + a_cl.norm());
    let stable = max_re < -stab_tol;
    cert.margins.push(Margin {
        name: "closed_loop_max_real_part".into(),
        requirement: Requirement::Nd,
        value: max_re,
        tol: stab_tol,
        satisfied: stable,
        definiteness: None,
    });
    let stab_verdict = if stable { Verdict::Certified } else { Verdict::Refuted };

    let p = match &opts.p {
        Some(p) => Some(p.clone()),
        None => lyapunov_solve(&a_cl, &SymMatrix::identity(n)).ok(),
    };
    let side = dissipative_side(sys, &a_cl, p.as_ref(), opts, tol)?;
    if let Some(p) = &p {
        cert.witness.storage = Some(StorageWitness::Quadratic {
            p: p.to_rows(),
            scale: StorageScale::One,
        });
    }
    cert.witness.beta = side.beta;
    if let Some(beta) = side.beta {
        cert.witness.supply = Some((&SupplyRate::beta(n, beta)?).into());
    }
    cert.witness.t = side.t.as_ref().map(SymMatrix::to_rows);
    if let Some(m) = &side.lmi {
        cert.sym("strict_lmi", m);
        if let Ok(schur) = crate::matcore::schur_reduce(m, n, scaled_tol(tol, m)) {
            cert.sym("schur_complement", &schur);
        }
    }
    cert.margins.extend(side.margins);
    if let Some(note) = side.note {
        cert.notes.push(note);
    }
    cert.metric("stability_side", verdict_code(stab_verdict));
    cert.metric("dissipativity_side", verdict_code(side.verdict));

    use Verdict::*;
    let (verdict, conclusion) = match (stab_verdict, side.verdict) {
        (Certified, Certified) => (Certified, "closed loop stable and strictly dissipative".to_string()),
        (Refuted, Refuted | Inconclusive) => (
            Refuted,
            "closed loop not asymptotically stable; no strict dissipativity witness".to_string(),
        ),
        (Certified, Inconclusive) => (
            Inconclusive,
            "closed loop stable but no strict dissipativity witness found".to_string(),
        ),
        (s, d) => {
            cert.notes.push(format!(
                "directions disagree: stability {s}, dissipativity {d}; check tolerances"
            ));
            (
                Inconclusive,
                format!("directions disagree: stability {s}, dissipativity {d}"),
            )
        }
    };
    cert.verdict = verdict;
    cert.conclusion = conclusion;
    Ok(cert)
}

fn verdict_code(v: Verdict) -> f64 {
    v.exit_code() as f64
}

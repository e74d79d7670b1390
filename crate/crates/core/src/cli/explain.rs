//! Plain-text rendering of a certificate report.

use std::fmt::Write;

use crate::certify::{Certificate, HypothesisStatus, Requirement, StorageWitness};

fn fmt_rows(rows: &[Vec<f64>]) -> String {
    let inner: Vec<String> = rows
        .iter()
        .map(|r| {
            let cells: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
            format!("[{}]", cells.join(", "))
        })
        .collect();
    format!("[{}]", inner.join(", "))
}

fn requirement(r: Requirement) -> &'static str {
    match r {
        Requirement::Nsd => "max eig <= tol",
        Requirement::Nd => "max eig < -tol",
        Requirement::Psd => "min eig >= -tol",
        Requirement::Pd => "min eig > tol",
        Requirement::AtMost => "value <= tol",
    }
}

/// Closed-loop eigenvalues stored as `closed_loop_eig_{i}_re/_im` metrics.
fn closed_loop_eigs(cert: &Certificate) -> Vec<String> {
    let mut out = Vec::new();
    for i in 0.. {
        let Some(re) = cert.metrics.get(&format!("closed_loop_eig_{i}_re")) else {
            break;
        };
        let im = cert
            .metrics
            .get(&format!("closed_loop_eig_{i}_im"))
            .copied()
            .unwrap_or(0.0);
        out.push(if im == 0.0 {
            format!("{re}")
        } else {
            format!("{re}{im:+}i")
        });
    }
    out
}

fn render_into(out: &mut String, cert: &Certificate, indent: &str) {
    let prop = serde_json::to_value(cert.property)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default();
    let _ = writeln!(out, "{indent}check: {prop}");
    let _ = writeln!(out, "{indent}verdict: {}", cert.verdict);
    if !cert.conclusion.is_empty() {
        let _ = writeln!(out, "{indent}conclusion: {}", cert.conclusion);
    }
    let _ = writeln!(out, "{indent}tolerance: {:e}", cert.tol);

    if !cert.hypotheses.is_empty() {
        let _ = writeln!(out, "{indent}hypotheses:");
        for h in &cert.hypotheses {
            let status = match h.status {
                HypothesisStatus::Checked => "checked",
                HypothesisStatus::Violated => "VIOLATED",
                HypothesisStatus::Assumed => "assumed",
            };
            let detail = if h.detail.is_empty() {
                String::new()
            } else {
                format!(" ({})", h.detail)
            };
            let _ = writeln!(out, "{indent}  [{status}] {}{detail}", h.name);
        }
    }

    if !cert.margins.is_empty() {
        let _ = writeln!(out, "{indent}margins:");
        for m in &cert.margins {
            let mark = if m.satisfied { "ok" } else { "FAIL" };
            let _ = writeln!(
                out,
                "{indent}  [{mark}] {}: {} (need {}, tol {:e})",
                m.name,
                m.value,
                requirement(m.requirement),
                m.tol
            );
        }
    }

    let eigs = closed_loop_eigs(cert);
    if !eigs.is_empty() {
        let _ = writeln!(out, "{indent}closed-loop eigenvalues: {}", eigs.join(", "));
    }
    if let (Some(r), Some(t)) = (
        cert.metrics.get("residual_norm"),
        cert.metrics.get("residual_threshold"),
    ) {
        let _ = writeln!(out, "{indent}residual norm: {r:e} (threshold {t:e})");
    }
    if let Some(g) = &cert.grid {
        let _ = writeln!(
            out,
            "{indent}grid: {} points, {} evaluated, {} skipped",
            g.points, g.evaluated, g.skipped
        );
        for (i, why) in &g.skip_reasons {
            let _ = writeln!(out, "{indent}  skipped #{i}: {why}");
        }
    }
    if let Some(w) = &cert.worst_point {
        let _ = writeln!(
            out,
            "{indent}worst grid point: #{} at {:?} (violation {:e})",
            w.index, w.x, w.violation
        );
    }
    if !cert.metrics.is_empty() {
        let _ = writeln!(out, "{indent}metrics:");
        for (k, v) in &cert.metrics {
            let _ = writeln!(out, "{indent}  {k} = {v}");
        }
    }

    let w = &cert.witness;
    let mut witness = Vec::new();
    match &w.storage {
        Some(StorageWitness::Quadratic { p, scale }) => {
            let s = match scale {
                crate::sysmodel::StorageScale::Half => "V = 1/2 x'Px",
                crate::sysmodel::StorageScale::One => "V = x'Px",
            };
            witness.push(format!("storage {s}, P = {}", fmt_rows(p)));
        }
        Some(StorageWitness::Symbolic { v }) => witness.push(format!("storage V = {v}")),
        None => {}
    }
    if let Some(s) = &w.supply {
        witness.push(format!(
            "supply {}: Q = {}, S = {}, R = {}",
            s.kind.label(),
            fmt_rows(&s.q),
            fmt_rows(&s.s),
            fmt_rows(&s.r)
        ));
    }
    if let Some(t) = &w.t {
        witness.push(format!("T = {}", fmt_rows(t)));
    }
    if let Some(b) = w.beta {
        witness.push(format!("beta = {b}"));
    }
    if let Some(g) = w.gamma {
        witness.push(format!("gamma = {g}"));
    }
    if let Some(k) = &w.k {
        witness.push(format!("K = {}", fmt_rows(k)));
    }
    if !witness.is_empty() {
        let _ = writeln!(out, "{indent}witness:");
        for line in witness {
            let _ = writeln!(out, "{indent}  {line}");
        }
    }
    if !cert.matrices.is_empty() {
        let _ = writeln!(out, "{indent}matrices:");
        for (k, m) in &cert.matrices {
            let _ = writeln!(out, "{indent}  {k} = {}", fmt_rows(m));
        }
    }
    if !cert.lw_samples.is_empty() {
        let _ = writeln!(out, "{indent}factorizations d(x, u) = |L + Wu|^2:");
        for s in &cert.lw_samples {
            let _ = writeln!(
                out,
                "{indent}  x = {:?}: q = {}, L = {:?}, W = {}, identity residual {:e}",
                s.x,
                s.q,
                s.l,
                fmt_rows(&s.w),
                s.identity_residual
            );
        }
    }
    for n in &cert.notes {
        let _ = writeln!(out, "{indent}note: {n}");
    }
    for (i, sub) in cert.sub_checks.iter().enumerate() {
        let _ = writeln!(out, "{indent}sub-check {}:", i + 1);
        render_into(out, sub, &format!("{indent}  "));
    }
}

pub fn render(cert: &Certificate) -> String {
    let mut out = String::new();
    render_into(&mut out, cert, "");
    out
}

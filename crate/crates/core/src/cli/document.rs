//! JSON input documents: systems, storage candidates and matrices.
//!
//! Every argument that names a document may also be given inline: a value
//! starting with `{` or `[` is parsed directly instead of read from disk.

use std::path::Path;

use nalgebra::DMatrix;
use serde_json::Value;

use super::CliError;
use crate::expr::{self, Expr, MatrixField, VectorField};
use crate::matcore::{matrix_from_rows, SymMatrix};
use crate::sysmodel::{AffineSystem, LtiSystem, StorageCandidate, StorageScale, SystemModel};

/// Raw text of an inline document or a file.
pub fn load_text(arg: &str, what: &str) -> Result<String, CliError> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('{') || trimmed.starts_with('[') {
        return Ok(arg.to_string());
    }
    std::fs::read_to_string(Path::new(arg)).map_err(|e| CliError::Data(format!("cannot read {what} file {arg}: {e}")))
}

pub fn load_json(arg: &str, what: &str) -> Result<Value, CliError> {
    let text = load_text(arg, what)?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{what}: invalid JSON: {e}")))
}

fn rows_of(v: &Value, what: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let bad = || CliError::Data(format!("{what}: expected an array of numeric rows"));
    let rows = v.as_array().ok_or_else(bad)?;
    rows.iter()
        .map(|r| {
            r.as_array()
                .ok_or_else(bad)?
                .iter()
                .map(|c| c.as_f64().ok_or_else(bad))
                .collect()
        })
        .collect()
}

fn dense(v: &Value, what: &str) -> Result<DMatrix<f64>, CliError> {
    matrix_from_rows(&rows_of(v, what)?).map_err(|e| CliError::Data(format!("{what}: {e}")))
}

/// A matrix given bare, as `{"<key>": rows}`, or as a one-entry object.
pub fn matrix_arg(arg: &str, key: &str, n: usize) -> Result<DMatrix<f64>, CliError> {
    if arg.trim() == "identity" {
        return Ok(DMatrix::identity(n, n));
    }
    let v = load_json(arg, key)?;
    let inner = match &v {
        Value::Object(map) => match map.get(key) {
            Some(m) => m,
            None if map.len() == 1 => map.values().next().expect("one entry"),
            None => return Err(CliError::Data(format!("{key}: object has no field \"{key}\""))),
        },
        other => other,
    };
    let m = dense(inner, key)?;
    if m.nrows() != n || m.ncols() != n {
        return Err(CliError::Data(format!(
            "{key}: expected {n}×{n}, got {}×{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m)
}

/// Rejects matrices whose asymmetry exceeds `1e-9·(1 + max|m|)`.
fn symmetric(m: DMatrix<f64>, what: &str) -> Result<SymMatrix, CliError> {
    let asym = (&m - m.transpose()).amax();
    if asym > 1e-9 * (1.0 + m.amax()) {
        return Err(CliError::Data(format!(
            "{what} is not symmetric (max |m − mᵀ| = {asym:e})"
        )));
    }
    SymMatrix::new(m).map_err(|e| CliError::Data(format!("{what}: {e}")))
}

pub fn sym_arg(arg: &str, key: &str, n: usize) -> Result<SymMatrix, CliError> {
    symmetric(matrix_arg(arg, key, n)?, key)
}

fn entry_text(v: &Value, label: &str) -> Result<String, CliError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(x) => Ok(x.to_string()),
        _ => Err(CliError::Data(format!(
            "{label}: expected an expression string or a number"
        ))),
    }
}

fn parse_entry(v: &Value, label: &str, n: usize) -> Result<Expr, CliError> {
    let text = entry_text(v, label)?;
    expr::parse(&text, n).map_err(|e| CliError::Data(format!("{label} = {text:?}: {e}")))
}

fn vector_field(doc: &Value, key: &str, n: usize) -> Result<VectorField, CliError> {
    let items = doc
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| CliError::Data(format!("system: \"{key}\" must be an array")))?;
    let exprs = items
        .iter()
        .enumerate()
        .map(|(i, v)| parse_entry(v, &format!("system {key}[{i}]"), n))
        .collect::<Result<_, _>>()?;
    Ok(VectorField::new(exprs))
}

fn matrix_field(doc: &Value, n: usize) -> Result<MatrixField, CliError> {
    let bad = || CliError::Data("system: \"g\" must be an array of rows".into());
    let rows = doc.get("g").and_then(Value::as_array).ok_or_else(bad)?;
    let cols = rows.first().and_then(Value::as_array).map_or(0, Vec::len);
    let mut exprs = Vec::with_capacity(rows.len() * cols);
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().ok_or_else(bad)?;
        if row.len() != cols {
            return Err(CliError::Data(format!(
                "system g[{i}]: expected {cols} entries, got {}",
                row.len()
            )));
        }
        for (j, v) in row.iter().enumerate() {
            exprs.push(parse_entry(v, &format!("system g[{i}][{j}]"), n)?);
        }
    }
    Ok(MatrixField::new(rows.len(), cols, exprs))
}

pub fn parse_system(doc: &Value) -> Result<SystemModel, CliError> {
    let kind = doc
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| CliError::Data("system: missing \"type\" (\"lti\" or \"affine\")".into()))?;
    match kind {
        "lti" => {
            let get = |k: &str| {
                doc.get(k)
                    .ok_or_else(|| CliError::Data(format!("system: missing \"{k}\"")))
                    .and_then(|v| dense(v, &format!("system {k}")))
            };
            let sys =
                LtiSystem::new(get("A")?, get("B")?, get("C")?).map_err(|e| CliError::Data(format!("system: {e}")))?;
            Ok(SystemModel::Lti(sys))
        }
        "affine" => {
            let n = doc
                .get("n")
                .and_then(Value::as_u64)
                .ok_or_else(|| CliError::Data("system: \"n\" must be a positive integer".into()))?
                as usize;
            let f = vector_field(doc, "f", n)?;
            let g = matrix_field(doc, n)?;
            let h = vector_field(doc, "h", n)?;
            let sys = AffineSystem::new(n, f, g, h).map_err(|e| CliError::Data(format!("system: {e}")))?;
            Ok(SystemModel::Affine(sys))
        }
        other => Err(CliError::Data(format!("system: unknown type {other:?}"))),
    }
}

pub fn load_system(arg: &str) -> Result<SystemModel, CliError> {
    parse_system(&load_json(arg, "system")?)
}

fn parse_scale(v: &Value) -> Result<StorageScale, CliError> {
    serde_json::from_value(v.clone())
        .map_err(|_| CliError::Data(format!("storage: scale must be \"half\" or \"one\", got {v}")))
}

/// Storage from `identity`, `{"P", "scale"}`, `{"V"}` or bare rows. The
/// scale falls back to `default_scale` when the document does not set one.
pub fn load_storage(arg: &str, n: usize, default_scale: StorageScale) -> Result<StorageCandidate, CliError> {
    if arg.trim() == "identity" {
        return Ok(StorageCandidate::quadratic(SymMatrix::identity(n), default_scale));
    }
    let doc = load_json(arg, "storage")?;
    if let Some(v) = doc.get("V") {
        let e = parse_entry(v, "storage V", n)?;
        return Ok(StorageCandidate::symbolic(e, n));
    }
    let (rows, scale) = match &doc {
        Value::Object(map) => {
            let p = map
                .get("P")
                .ok_or_else(|| CliError::Data("storage: expected a \"P\" or \"V\" field".into()))?;
            let scale = map.get("scale").map(parse_scale).transpose()?;
            (p, scale.unwrap_or(default_scale))
        }
        other => (other, default_scale),
    };
    let p = dense(rows, "storage P")?;
    if p.nrows() != n || p.ncols() != n {
        return Err(CliError::Data(format!(
            "storage P: expected {n}×{n}, got {}×{}",
            p.nrows(),
            p.ncols()
        )));
    }
    let p = symmetric(p, "storage P")?;
    Ok(StorageCandidate::quadratic(p, scale))
}

/// Symbolic storage from an inline expression.
pub fn storage_expr(text: &str, n: usize) -> Result<StorageCandidate, CliError> {
    let e = expr::parse(text, n).map_err(|e| CliError::Data(format!("storage V = {text:?}: {e}")))?;
    Ok(StorageCandidate::symbolic(e, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lti_document() {
        let sys = load_system(r#"{"type":"lti","A":[[-1,0],[0,-0.5]],"B":[[1,0],[0,2]],"C":[[1,0],[0,0.5]]}"#).unwrap();
        assert_eq!(sys.n(), 2);
    }

    #[test]
    fn affine_document_accepts_numbers() {
        let sys = load_system(r#"{"type":"affine","n":1,"f":["-x1^3"],"g":[[1]],"h":["x1"]}"#).unwrap();
        assert_eq!(sys.n(), 1);
    }

    #[test]
    fn malformed_expression_reports_offset() {
        let err = load_system(r#"{"type":"affine","n":1,"f":["x1 +* 2"],"g":[["1"]],"h":["x1"]}"#).unwrap_err();
        let CliError::Data(msg) = err else { panic!() };
        assert!(msg.contains("f[0]") && msg.contains("at byte 4"), "{msg}");
    }

    #[test]
    fn storage_forms() {
        let s = load_storage(r#"{"P":[[2,0],[0,1]],"scale":"one"}"#, 2, StorageScale::Half).unwrap();
        assert_eq!(s.value(&[1.0, 1.0]).unwrap(), 3.0);
        let s = load_storage("[[2,0],[0,1]]", 2, StorageScale::Half).unwrap();
        assert_eq!(s.value(&[1.0, 1.0]).unwrap(), 1.5);
        let s = load_storage(r#"{"V":"x1^2 + x2^4"}"#, 2, StorageScale::Half).unwrap();
        assert_eq!(s.value(&[1.0, 2.0]).unwrap(), 17.0);
        assert!(load_storage(r#"{"P":[[1,2],[0,1]]}"#, 2, StorageScale::Half).is_err());
        assert!(load_storage(r#"{"P":[[1]],"scale":"third"}"#, 1, StorageScale::Half).is_err());
    }

    #[test]
    fn matrix_forms() {
        assert_eq!(matrix_arg(r#"{"T":[[1,0],[0,2]]}"#, "T", 2).unwrap()[(1, 1)], 2.0);
        assert_eq!(matrix_arg("identity", "K", 3).unwrap(), DMatrix::identity(3, 3));
        assert!(matrix_arg("[[1,0]]", "T", 2).is_err());
        assert!(matrix_arg("/nonexistent/file.json", "T", 2).is_err());
    }
}

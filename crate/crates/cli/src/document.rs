//! The JSON document format shared by every command.
//!
//! Every document is an object with `"schema": 1` and a `"kind"`. Complex
//! numbers are `[re, im]` pairs and matrices are arrays of rows.
//!
//! ```json
//! {"schema": 1, "kind": "commutative", "label": "A", "points": 3, "delta": [0, 1, 2], "gamma": [0, 0, 2]}
//! {"schema": 1, "kind": "matrix", "label": "D", "blocks": [2, 1], "map": [[[0, 0], ...], ...]}
//! {"schema": 1, "kind": "isometry", "label": "C", "n": 2, "d": 1, "D": 2, "i0": 1, "isometries": [...]}
//! {"schema": 1, "kind": "operator", "label": "L", "matrix": [[[0, 0], ...], ...]}
//! ```
//!
//! A `matrix` system gives the coordinate matrix of `α` in the matrix-unit
//! basis (block by block, row-major inside each block), optionally with
//! `codomain_blocks` when the codomain differs from the domain. Object keys
//! are emitted in sorted order.

use num_complex::Complex64;
use serde_json::{json, Map, Value};

use transferlab::bh::{endo_from_isometries, IsometryFamily};
use transferlab::commutative::{endo_from_system, FiniteDynSystem};
use transferlab::cstar::verify_star_homomorphism;
use transferlab::linalg::CMat;
use transferlab::{BlockAlgebra, OperatorMap, Tolerance};

use crate::error::CliError;

pub const SCHEMA_VERSION: u64 = 1;

/// A parsed and validated system.
#[derive(Clone, Debug)]
pub struct SystemDocument {
    pub label: String,
    pub system: System,
}

#[derive(Clone, Debug)]
pub enum System {
    Commutative(FiniteDynSystem),
    Matrix(OperatorMap),
    Isometry(IsometryFamily),
}

impl SystemDocument {
    pub fn kind(&self) -> &'static str {
        match self.system {
            System::Commutative(_) => "commutative",
            System::Matrix(_) => "matrix",
            System::Isometry(_) => "isometry",
        }
    }

    /// The verified *-homomorphism described by the document.
    pub fn endo(&self) -> OperatorMap {
        match &self.system {
            System::Commutative(s) => endo_from_system(s),
            System::Matrix(m) => m.clone(),
            System::Isometry(f) => endo_from_isometries(f),
        }
    }
}

/// A bare linear map, given by its coordinate matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorDocument {
    pub label: String,
    pub matrix: CMat,
}

#[derive(Clone, Debug)]
pub enum Document {
    System(SystemDocument),
    Operator(OperatorDocument),
}

fn schema(field: &str, msg: impl Into<String>) -> CliError {
    CliError::Schema {
        field: field.to_string(),
        message: msg.into(),
    }
}

fn get<'a>(obj: &'a Map<String, Value>, field: &str) -> Result<&'a Value, CliError> {
    obj.get(field).ok_or_else(|| schema(field, "missing"))
}

fn as_usize(v: &Value, field: &str) -> Result<usize, CliError> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| schema(field, "expected a nonnegative integer"))
}

fn usize_array(v: &Value, field: &str) -> Result<Vec<usize>, CliError> {
    v.as_array()
        .ok_or_else(|| schema(field, "expected an array of integers"))?
        .iter()
        .enumerate()
        .map(|(i, x)| as_usize(x, &format!("{field}[{i}]")))
        .collect()
}

fn complex(v: &Value, field: &str) -> Result<Complex64, CliError> {
    let pair = v.as_array().ok_or_else(|| schema(field, "expected a [re, im] pair"))?;
    if pair.len() != 2 {
        return Err(schema(field, "expected a [re, im] pair"));
    }
    let re = pair[0].as_f64().ok_or_else(|| schema(field, "real part is not a number"))?;
    let im = pair[1].as_f64().ok_or_else(|| schema(field, "imaginary part is not a number"))?;
    Ok(Complex64::new(re, im))
}

/// A matrix of `[re, im]` pairs, given as an array of rows.
pub fn complex_matrix(v: &Value, field: &str) -> Result<CMat, CliError> {
    let rows = v.as_array().ok_or_else(|| schema(field, "expected an array of rows"))?;
    let ncols = match rows.first() {
        Some(r) => r.as_array().ok_or_else(|| schema(&format!("{field}[0]"), "expected a row"))?.len(),
        None => 0,
    };
    let mut entries = Vec::with_capacity(rows.len() * ncols);
    for (i, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| schema(&format!("{field}[{i}]"), "expected a row"))?;
        if row.len() != ncols {
            return Err(schema(&format!("{field}[{i}]"), format!("row has {} entries, expected {ncols}", row.len())));
        }
        for (j, z) in row.iter().enumerate() {
            entries.push(complex(z, &format!("{field}[{i}][{j}]"))?);
        }
    }
    Ok(CMat::from_row_slice(rows.len(), ncols, &entries))
}

pub fn complex_to_json(z: Complex64) -> Value {
    json!([z.re, z.im])
}

pub fn matrix_to_json(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| complex_to_json(m[(i, j)])).collect()))
            .collect(),
    )
}

fn parse_value(text: &str) -> Result<Map<String, Value>, CliError> {
    let value: Value = serde_json::from_str(text).map_err(|e| CliError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let Value::Object(obj) = value else {
        return Err(schema("(root)", "expected a JSON object"));
    };
    match obj.get("schema") {
        None => return Err(schema("schema", "missing; this reader understands schema 1")),
        Some(v) if v.as_u64() == Some(SCHEMA_VERSION) => {}
        Some(v) => return Err(schema("schema", format!("unsupported version {v}"))),
    }
    Ok(obj)
}

fn label_of(obj: &Map<String, Value>) -> Result<String, CliError> {
    match obj.get("label") {
        None => Ok(String::new()),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(schema("label", "expected a string")),
    }
}

fn check_fields(obj: &Map<String, Value>, allowed: &[&str]) -> Result<(), CliError> {
    for key in obj.keys() {
        if !["schema", "kind", "label"].contains(&key.as_str()) && !allowed.contains(&key.as_str()) {
            return Err(schema(key, "unknown field"));
        }
    }
    Ok(())
}

fn parse_commutative(obj: &Map<String, Value>) -> Result<System, CliError> {
    check_fields(obj, &["points", "delta", "gamma"])?;
    let points = as_usize(get(obj, "points")?, "points")?;
    let delta = usize_array(get(obj, "delta")?, "delta")?;
    let gamma = usize_array(get(obj, "gamma")?, "gamma")?;
    Ok(System::Commutative(FiniteDynSystem::new(points, &delta, &gamma)?))
}

fn parse_matrix(obj: &Map<String, Value>, tol: &Tolerance) -> Result<System, CliError> {
    check_fields(obj, &["blocks", "codomain_blocks", "map"])?;
    let blocks = usize_array(get(obj, "blocks")?, "blocks")?;
    let domain = BlockAlgebra::new(blocks)?;
    let codomain = match obj.get("codomain_blocks") {
        Some(v) => BlockAlgebra::new(usize_array(v, "codomain_blocks")?)?,
        None => domain.clone(),
    };
    let m = complex_matrix(get(obj, "map")?, "map")?;
    let phi = OperatorMap::new(&domain, &codomain, m)?;
    Ok(System::Matrix(verify_star_homomorphism(phi, tol)?))
}

fn parse_isometry(obj: &Map<String, Value>, tol: &Tolerance) -> Result<System, CliError> {
    check_fields(obj, &["n", "d", "D", "i0", "isometries"])?;
    let n = as_usize(get(obj, "n")?, "n")?;
    let d = as_usize(get(obj, "d")?, "d")?;
    let big_d = as_usize(get(obj, "D")?, "D")?;
    let i0 = match obj.get("i0") {
        Some(v) => as_usize(v, "i0")?,
        None => 1,
    };
    let list = get(obj, "isometries")?
        .as_array()
        .ok_or_else(|| schema("isometries", "expected an array of matrices"))?;
    if list.len() != n {
        return Err(schema("isometries", format!("{} matrices for n = {n}", list.len())));
    }
    let mut us = Vec::with_capacity(n);
    for (i, u) in list.iter().enumerate() {
        let field = format!("isometries[{i}]");
        let m = complex_matrix(u, &field)?;
        if m.shape() != (big_d, d) {
            return Err(schema(&field, format!("matrix is {}x{}, expected {big_d}x{d}", m.nrows(), m.ncols())));
        }
        us.push(m);
    }
    Ok(System::Isometry(IsometryFamily::new(us, i0, tol)?))
}

/// Parses any document kind.
pub fn parse_document(text: &str, tol: &Tolerance) -> Result<Document, CliError> {
    let obj = parse_value(text)?;
    let label = label_of(&obj)?;
    let kind = get(&obj, "kind")?
        .as_str()
        .ok_or_else(|| schema("kind", "expected a string"))?;
    let system = match kind {
        "commutative" => parse_commutative(&obj)?,
        "matrix" => parse_matrix(&obj, tol)?,
        "isometry" => parse_isometry(&obj, tol)?,
        "operator" => {
            check_fields(&obj, &["matrix"])?;
            let matrix = complex_matrix(get(&obj, "matrix")?, "matrix")?;
            return Ok(Document::Operator(OperatorDocument { label, matrix }));
        }
        other => return Err(schema("kind", format!("unknown kind `{other}`"))),
    };
    Ok(Document::System(SystemDocument { label, system }))
}

pub fn parse_system_document(text: &str, tol: &Tolerance) -> Result<SystemDocument, CliError> {
    match parse_document(text, tol)? {
        Document::System(s) => Ok(s),
        Document::Operator(_) => Err(schema("kind", "expected a system document, found an operator")),
    }
}

pub fn parse_operator_document(text: &str, tol: &Tolerance) -> Result<OperatorDocument, CliError> {
    match parse_document(text, tol)? {
        Document::Operator(o) => Ok(o),
        Document::System(_) => Err(schema("kind", "expected an operator document, found a system")),
    }
}

pub fn system_to_json(doc: &SystemDocument) -> Value {
    let mut obj = Map::new();
    obj.insert("schema".into(), json!(SCHEMA_VERSION));
    obj.insert("kind".into(), json!(doc.kind()));
    obj.insert("label".into(), json!(doc.label));
    match &doc.system {
        System::Commutative(s) => {
            let delta = s.delta();
            let gamma: Vec<usize> = delta.iter().map(|&x| s.gamma(x).expect("x in delta")).collect();
            obj.insert("points".into(), json!(s.n_points()));
            obj.insert("delta".into(), json!(delta));
            obj.insert("gamma".into(), json!(gamma));
        }
        System::Matrix(m) => {
            obj.insert("blocks".into(), json!(m.domain().block_dims()));
            if m.codomain() != m.domain() {
                obj.insert("codomain_blocks".into(), json!(m.codomain().block_dims()));
            }
            obj.insert("map".into(), matrix_to_json(m.matrix()));
        }
        System::Isometry(f) => {
            obj.insert("n".into(), json!(f.n()));
            obj.insert("d".into(), json!(f.d()));
            obj.insert("D".into(), json!(f.big_d()));
            obj.insert("i0".into(), json!(f.i0()));
            obj.insert(
                "isometries".into(),
                Value::Array(f.isometries().iter().map(matrix_to_json).collect()),
            );
        }
    }
    Value::Object(obj)
}

pub fn operator_to_json(doc: &OperatorDocument) -> Value {
    json!({
        "schema": SCHEMA_VERSION,
        "kind": "operator",
        "label": doc.label,
        "matrix": matrix_to_json(&doc.matrix),
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

pub fn emit_system_document(doc: &SystemDocument) -> String {
    to_text(&system_to_json(doc))
}

pub fn emit_operator_document(doc: &OperatorDocument) -> String {
    to_text(&operator_to_json(doc))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn commutative_document() {
        let text = r#"{"schema": 1, "kind": "commutative", "label": "A", "points": 3, "delta": [0, 1, 2], "gamma": [0, 0, 2]}"#;
        let doc = parse_system_document(text, &tol()).unwrap();
        let System::Commutative(s) = &doc.system else { panic!("wrong kind") };
        assert_eq!(s, &transferlab::corpus::sys_a());
        let again = parse_system_document(&emit_system_document(&doc), &tol()).unwrap();
        assert_eq!(emit_system_document(&again), emit_system_document(&doc));
    }

    #[test]
    fn isometry_document() {
        let text = r#"{"schema": 1, "kind": "isometry", "n": 2, "d": 1, "D": 2,
            "isometries": [[[[1, 0]], [[0, 0]]], [[[0, 0]], [[1, 0]]]]}"#;
        let doc = parse_system_document(text, &tol()).unwrap();
        let System::Isometry(f) = &doc.system else { panic!("wrong kind") };
        assert_eq!(f.isometries(), transferlab::corpus::sys_c().isometries());
        assert_eq!(f.i0(), 1);
    }

    #[test]
    fn gamma_out_of_range() {
        let text = r#"{"schema": 1, "kind": "commutative", "points": 3, "delta": [0], "gamma": [5]}"#;
        let err = parse_system_document(text, &tol()).unwrap_err();
        assert!(err.to_string().contains("gamma image out of range"), "{err}");
    }

    #[test]
    fn schema_errors_name_the_field() {
        let missing = r#"{"kind": "commutative", "points": 1, "delta": [], "gamma": []}"#;
        assert!(parse_system_document(missing, &tol()).unwrap_err().to_string().contains("schema"));
        let bad = r#"{"schema": 1, "kind": "matrix", "blocks": [1], "map": [[[1, 0, 0]]]}"#;
        assert!(parse_system_document(bad, &tol()).unwrap_err().to_string().contains("map[0][0]"));
        let syntax = "{\n  \"schema\": 1,\n  \"kind\": }";
        match parse_system_document(syntax, &tol()).unwrap_err() {
            CliError::Syntax { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        let extra = r#"{"schema": 1, "kind": "commutative", "points": 1, "delta": [], "gamma": [], "rho": 1}"#;
        assert!(parse_system_document(extra, &tol()).unwrap_err().to_string().contains("rho"));
    }

    #[test]
    fn non_isometries_report_their_residual() {
        let text = r#"{"schema": 1, "kind": "isometry", "n": 2, "d": 1, "D": 2,
            "isometries": [[[[1, 0]], [[0, 0]]], [[[1, 0]], [[0, 0]]]]}"#;
        let err = parse_system_document(text, &tol()).unwrap_err();
        assert!(err.to_string().contains("residual"), "{err}");
    }

    #[test]
    fn matrix_maps_must_be_homomorphisms() {
        // the transpose on M_2
        let text = r#"{"schema": 1, "kind": "matrix", "blocks": [2], "map": [
            [[1,0],[0,0],[0,0],[0,0]], [[0,0],[0,0],[1,0],[0,0]],
            [[0,0],[1,0],[0,0],[0,0]], [[0,0],[0,0],[0,0],[1,0]]]}"#;
        assert!(matches!(parse_system_document(text, &tol()), Err(CliError::Core(_))));
    }

    #[test]
    fn floats_survive_round_trips_bit_for_bit() {
        let x = 0.1f64 + 0.2;
        let doc = OperatorDocument {
            label: "L".into(),
            matrix: CMat::from_element(1, 1, Complex64::new(x, -1.0 / 3.0)),
        };
        let back = parse_operator_document(&emit_operator_document(&doc), &tol()).unwrap();
        assert_eq!(back.matrix[(0, 0)].re.to_bits(), x.to_bits());
        assert_eq!(back, doc);
    }
}

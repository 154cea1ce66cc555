//! Reports and their two renderings: aligned plain text for people and
//! sorted-key JSON for machines.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use transferlab::linalg::CMat;
use transferlab::Tolerance;

use crate::document::{matrix_to_json, to_text, SCHEMA_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Human,
    Machine,
}

/// Kernel unit as the set of blocks it covers.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelUnit {
    pub support: Vec<usize>,
    pub num_blocks: usize,
}

impl KernelUnit {
    pub fn kind(&self) -> &'static str {
        if self.support.is_empty() {
            "zero"
        } else if self.support.len() == self.num_blocks {
            "identity"
        } else {
            "proper"
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BimoduleSummary {
    pub imprimitivity: bool,
    pub max_residual: f64,
    pub round_trip_residual: f64,
}

/// Results for a transfer operator built from a density, diagonal weights
/// or a rotated diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct DensitySummary {
    pub form: &'static str,
    pub rho: CMat,
    pub trace: f64,
    pub transfer: CMat,
    pub coordinate_norm: f64,
    pub transfer_norm: f64,
    pub nondegenerate: bool,
    pub state: CMat,
    pub residuals: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisReport {
    pub label: String,
    pub system_kind: &'static str,
    pub tolerance: Tolerance,
    pub kernel_blocks: Vec<usize>,
    pub kernel_unit: KernelUnit,
    pub annihilator: Vec<usize>,
    pub range_dim: usize,
    pub corner_dim: usize,
    pub hereditary: bool,
    pub complete: bool,
    pub complete_transfer: Option<CMat>,
    pub nonexistence_reason: Option<String>,
    pub bimodule: Option<BimoduleSummary>,
    pub expectation_summary: Option<String>,
    pub parameter_dimension: Option<usize>,
    pub fibers: Option<Vec<(usize, Vec<usize>)>>,
    pub density: Option<DensitySummary>,
    pub transfer_norm: Option<f64>,
    pub nondegenerate: Option<bool>,
    pub residuals: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

fn opt<T: Into<Value>>(x: Option<T>) -> Value {
    x.map_or(Value::Null, Into::into)
}

fn residuals_json(r: &BTreeMap<String, f64>) -> Value {
    Value::Object(r.iter().map(|(k, v)| (k.clone(), json!(v))).collect())
}

impl AnalysisReport {
    pub fn to_json(&self) -> Value {
        let mut o = Map::new();
        o.insert("schema".into(), json!(SCHEMA_VERSION));
        o.insert("kind".into(), json!("analysis"));
        o.insert("label".into(), json!(self.label));
        o.insert("system_kind".into(), json!(self.system_kind));
        o.insert(
            "tolerance".into(),
            json!({"eq_tol": self.tolerance.eq_tol, "psd_tol": self.tolerance.psd_tol}),
        );
        o.insert("kernel_blocks".into(), json!(self.kernel_blocks));
        o.insert(
            "kernel_unit".into(),
            json!({"support": self.kernel_unit.support, "kind": self.kernel_unit.kind()}),
        );
        o.insert("annihilator".into(), json!(self.annihilator));
        o.insert("range_dim".into(), json!(self.range_dim));
        o.insert("corner_dim".into(), json!(self.corner_dim));
        o.insert("hereditary".into(), json!(self.hereditary));
        o.insert("complete".into(), json!(self.complete));
        o.insert(
            "complete_transfer".into(),
            self.complete_transfer.as_ref().map_or(Value::Null, matrix_to_json),
        );
        o.insert("nonexistence_reason".into(), opt(self.nonexistence_reason.clone()));
        o.insert(
            "bimodule".into(),
            self.bimodule.as_ref().map_or(Value::Null, |b| {
                json!({
                    "imprimitivity": b.imprimitivity,
                    "max_residual": b.max_residual,
                    "round_trip_residual": b.round_trip_residual,
                })
            }),
        );
        o.insert("expectation_summary".into(), opt(self.expectation_summary.clone()));
        o.insert("parameter_dimension".into(), opt(self.parameter_dimension));
        o.insert(
            "fibers".into(),
            self.fibers
                .as_ref()
                .map_or(Value::Null, |f| Value::Array(f.iter().map(|(x, ys)| json!([x, ys])).collect())),
        );
        o.insert(
            "density".into(),
            self.density.as_ref().map_or(Value::Null, |d| {
                json!({
                    "form": d.form,
                    "rho": matrix_to_json(&d.rho),
                    "trace": d.trace,
                    "transfer": matrix_to_json(&d.transfer),
                    "coordinate_norm": d.coordinate_norm,
                    "transfer_norm": d.transfer_norm,
                    "nondegenerate": d.nondegenerate,
                    "state": matrix_to_json(&d.state),
                    "residuals": residuals_json(&d.residuals),
                })
            }),
        );
        o.insert("transfer_norm".into(), opt(self.transfer_norm));
        o.insert("nondegenerate".into(), opt(self.nondegenerate));
        o.insert("residuals".into(), residuals_json(&self.residuals));
        o.insert("notes".into(), json!(self.notes));
        Value::Object(o)
    }

    pub fn to_human(&self) -> String {
        let mut t = Table::default();
        t.row("system", format!("{} ({})", display_label(&self.label), self.system_kind));
        t.row("kernel blocks", list(&self.kernel_blocks));
        t.row("kernel unit", format!("{} on {}", self.kernel_unit.kind(), list(&self.kernel_unit.support)));
        t.row("annihilator", list(&self.annihilator));
        t.row("range / corner dim", format!("{} / {}", self.range_dim, self.corner_dim));
        t.row("hereditary range", yes_no(self.hereditary));
        t.row("complete", yes_no(self.complete));
        if let Some(reason) = &self.nonexistence_reason {
            t.row("no complete operator", reason.clone());
        }
        if let Some(b) = &self.bimodule {
            t.row(
                "imprimitivity",
                format!("{} (max residual {})", if b.imprimitivity { "holds" } else { "fails" }, sci(b.max_residual)),
            );
        }
        if let Some(s) = &self.expectation_summary {
            t.row("expectations", s.clone());
        }
        if let Some(p) = self.parameter_dimension {
            t.row("parameter dimension", p.to_string());
        }
        if let Some(f) = &self.fibers {
            let parts: Vec<String> = f.iter().map(|(x, ys)| format!("{x} <- {}", list(ys))).collect();
            t.row("fibers", if parts.is_empty() { "none".into() } else { parts.join("; ") });
        }
        if let Some(d) = &self.density {
            t.row("density form", d.form.to_string());
            t.row("trace of rho", num(d.trace));
        }
        if let Some(n) = self.transfer_norm {
            t.row("transfer norm", num(n));
        }
        if let Some(n) = self.nondegenerate {
            t.row("non-degenerate", n.to_string());
        }
        if let Some(d) = &self.density {
            for (k, v) in &d.residuals {
                t.row(&format!("density residual {k}"), sci(*v));
            }
        }
        for (k, v) in &self.residuals {
            t.row(&format!("residual {k}"), sci(*v));
        }
        let mut out = t.render();
        if let Some(m) = &self.complete_transfer {
            out.push_str("complete transfer operator (coordinates):\n");
            out.push_str(&matrix_table(m));
        }
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Human => self.to_human(),
            Format::Machine => to_text(&self.to_json()),
        }
    }
}

/// Outcome of checking a candidate operator against a system.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub label: String,
    pub passed: bool,
    pub positivity: Option<&'static str>,
    pub failed_axiom: Option<&'static str>,
    pub message: Option<String>,
    pub witness: Option<Value>,
    pub nondegenerate: Option<bool>,
    pub residuals: BTreeMap<String, f64>,
}

impl VerifyReport {
    pub fn to_json(&self) -> Value {
        json!({
            "schema": SCHEMA_VERSION,
            "kind": "verification",
            "label": self.label,
            "passed": self.passed,
            "positivity": opt(self.positivity),
            "failed_axiom": opt(self.failed_axiom),
            "message": opt(self.message.clone()),
            "witness": self.witness.clone().unwrap_or(Value::Null),
            "nondegenerate": opt(self.nondegenerate),
            "residuals": residuals_json(&self.residuals),
        })
    }

    pub fn to_human(&self) -> String {
        let mut t = Table::default();
        t.row("system", display_label(&self.label));
        t.row("transfer operator", if self.passed { "pass".into() } else { "FAIL".to_string() });
        if let Some(p) = self.positivity {
            t.row("positivity", p.to_string());
        }
        if let Some(a) = self.failed_axiom {
            t.row("failed axiom", a.to_string());
        }
        if let Some(m) = &self.message {
            t.row("detail", m.clone());
        }
        if let Some(w) = &self.witness {
            t.row("witness", w.to_string());
        }
        if let Some(n) = self.nondegenerate {
            t.row("non-degenerate", if n { "pass".into() } else { "fail".to_string() });
        }
        for (k, v) in &self.residuals {
            t.row(&format!("residual {k}"), sci(*v));
        }
        t.render()
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Human => self.to_human(),
            Format::Machine => to_text(&self.to_json()),
        }
    }
}

#[derive(Default)]
pub struct Table {
    rows: Vec<(String, String)>,
}

impl Table {
    pub fn row(&mut self, key: &str, value: impl Into<String>) {
        self.rows.push((key.to_string(), value.into()));
    }

    pub fn render(&self) -> String {
        let width = self.rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in &self.rows {
            let pad = width - k.chars().count();
            out.push_str(&format!("{k}:{} {v}\n", " ".repeat(pad)));
        }
        out
    }
}

pub fn display_label(label: &str) -> String {
    if label.is_empty() {
        "(unlabelled)".into()
    } else {
        label.to_string()
    }
}

pub fn yes_no(b: bool) -> String {
    if b { "yes" } else { "no" }.to_string()
}

pub fn list(xs: &[usize]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
    format!("{{{}}}", parts.join(", "))
}

/// Six significant decimals, trailing zeros trimmed.
pub fn num(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

pub fn sci(x: f64) -> String {
    format!("{x:.2e}")
}

/// Real parts when the matrix is real, `re+imi` otherwise; columns aligned.
pub fn matrix_table(m: &CMat) -> String {
    let real = m.iter().all(|z| z.im == 0.0);
    let cells: Vec<Vec<String>> = (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| {
                    let z = m[(i, j)];
                    if real {
                        num(z.re)
                    } else {
                        format!("{}{:+}i", num(z.re), num(z.im).parse::<f64>().unwrap_or(z.im))
                    }
                })
                .collect()
        })
        .collect();
    let width = cells.iter().flatten().map(|c| c.len()).max().unwrap_or(1);
    let mut out = String::new();
    for row in cells {
        let padded: Vec<String> = row.iter().map(|c| format!("{c:>width$}")).collect();
        out.push_str(&format!("  [{}]\n", padded.join(" ")));
    }
    out
}

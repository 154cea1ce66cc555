//! The work behind each subcommand, independent of argument parsing.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde_json::{json, Value};

use transferlab::bh::{
    diagonal_transfer, expectation_from_state, make_isometry_family_in, rotate_basis, state_from_transfer,
    tensor_join, tensor_split, transfer_from_density, transfer_norm, DensityMatrix, IsometryFamily,
};
use transferlab::bimodule::{build_correspondence, check_imprimitivity, left_inner_from_transfer, transfer_from_left_inner};
use transferlab::commutative::{
    complete_exists_commutative, nondegenerate_parameter_space, sample_nondegenerate, weights_from_transfer,
    FiniteDynSystem,
};
use transferlab::cstar::{homomorphism_residual, kernel_blocks, AlgebraElement};
use transferlab::linalg::{max_abs, CMat};
use transferlab::transfer::{
    annihilator_projection, complete_transfer, nondegeneracy_residuals, range_structure, transfer_from_expectation,
    verify_expectation_exhaustive, verify_transfer, RangeAlgebra, TransferOperator,
};
use transferlab::{Error, OperatorMap, Tolerance};

use crate::document::{emit_operator_document, to_text, OperatorDocument, System, SystemDocument, SCHEMA_VERSION};
use crate::error::{CliError, EXIT_FAIL, EXIT_OK};
use crate::report::{
    display_label, list, matrix_table, num, sci, yes_no, AnalysisReport, BimoduleSummary, DensitySummary, Format,
    KernelUnit, Table, VerifyReport,
};
use crate::spec::{parse_density, parse_unitary, parse_weights};

/// Text to print and the exit status to finish with.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub text: String,
    pub code: i32,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Outcome { text, code: EXIT_OK }
    }
}

/// How the density of an isometry system is given on the command line.
#[derive(Clone, Debug, PartialEq)]
pub enum DensityChoice {
    Rho(String),
    Mu { mu: String, unitary: Option<String> },
}

const DEFAULT_DENSITY: &str = "uniform";

/// Full structural analysis of a system.
///
/// Isometry systems always get a density section; without an explicit
/// choice the normalized trace `I/n` is used.
pub fn run_analyze(
    doc: &SystemDocument,
    tol: &Tolerance,
    density: Option<&DensityChoice>,
) -> Result<AnalysisReport, CliError> {
    if density.is_some() && !matches!(doc.system, System::Isometry(_)) {
        return Err(CliError::Usage("--rho and --mu apply only to isometry systems".into()));
    }
    let endo = doc.endo();
    let n_blocks = endo.domain().num_blocks();
    let kernel: Vec<usize> = kernel_blocks(&endo, tol)?.blocks().iter().copied().collect();
    let annihilator: Vec<usize> = annihilator_projection(&endo, tol)?.blocks().iter().copied().collect();
    let rs = range_structure(&endo, tol)?;
    let hereditary = rs.is_hereditary();

    let mut residuals = BTreeMap::new();
    residuals.insert("homomorphism".to_string(), homomorphism_residual(&endo));
    residuals.insert("range_containment".to_string(), rs.containment_residual);

    let mut report = AnalysisReport {
        label: doc.label.clone(),
        system_kind: doc.kind(),
        tolerance: *tol,
        kernel_unit: KernelUnit { support: kernel.clone(), num_blocks: n_blocks },
        kernel_blocks: kernel,
        annihilator,
        range_dim: rs.range_dim(),
        corner_dim: rs.corner_dim(),
        hereditary,
        complete: false,
        complete_transfer: None,
        nonexistence_reason: None,
        bimodule: None,
        expectation_summary: None,
        parameter_dimension: None,
        fibers: None,
        density: None,
        transfer_norm: None,
        nondegenerate: None,
        residuals,
        notes: Vec::new(),
    };

    if hereditary {
        let t = complete_transfer(&endo, tol).map_err(CliError::Analysis)?;
        record_transfer_residuals(&mut report.residuals, &t);
        let defining = endo.compose(t.map())?.distance(&rs.corner.compression());
        report.residuals.insert("defining_identity".into(), defining);
        let c = build_correspondence(&endo, tol)?;
        let l = left_inner_from_transfer(&c, &t, tol).map_err(CliError::Analysis)?;
        let verdict = check_imprimitivity(&c, &l, tol);
        let round_trip = match transfer_from_left_inner(&c, &l, tol) {
            Ok(back) => back.distance(&t),
            Err(e) => return Err(CliError::Analysis(e)),
        };
        report.bimodule = Some(BimoduleSummary {
            imprimitivity: verdict.holds,
            max_residual: verdict.max_residual,
            round_trip_residual: round_trip,
        });
        report.complete = true;
        report.transfer_norm = Some(t.unit_image().norm());
        report.nondegenerate = t.nondegenerate();
        report.complete_transfer = Some(t.map().matrix().clone());
    } else {
        report.nonexistence_reason = Some(format!(
            "range of alpha is not hereditary: dim alpha(A) = {} < dim alpha(1) B alpha(1) = {}",
            rs.range_dim(),
            rs.corner_dim()
        ));
        report.expectation_summary = Some(expectation_summary(&doc.system));
    }

    match &doc.system {
        System::Commutative(s) => {
            if complete_exists_commutative(s, tol)? != hereditary {
                return Err(CliError::Analysis(Error::Structural(
                    "fiber criterion and range test disagree".into(),
                )));
            }
            let ps = nondegenerate_parameter_space(s);
            report.parameter_dimension = Some(ps.dimension);
            report.fibers = Some(ps.fibers);
            report.notes.push(
                "on a finite discrete space every fiber section is lower semicontinuous, \
                 so the topological side condition holds automatically"
                    .into(),
            );
        }
        System::Matrix(_) => {}
        System::Isometry(f) => {
            report.parameter_dimension = Some(f.n() * f.n() - 1);
            let default = DensityChoice::Rho(DEFAULT_DENSITY.into());
            let (summary, _) = density_summary(f, density.unwrap_or(&default), tol)?;
            report.transfer_norm = Some(summary.transfer_norm);
            report.nondegenerate = Some(summary.nondegenerate);
            report.density = Some(summary);
        }
    }
    Ok(report)
}

fn record_transfer_residuals(r: &mut BTreeMap<String, f64>, t: &TransferOperator) {
    let res = t.residuals();
    r.insert("transfer_identity".into(), res.identity);
    r.insert("transfer_identity_adjoint".into(), res.symmetrized);
    r.insert("unit_image_centrality".into(), res.centrality);
    let (unit, composite) = nondegeneracy_residuals(t);
    r.insert("nondegeneracy_unit".into(), unit);
    r.insert("nondegeneracy_composite".into(), composite);
}

fn expectation_summary(system: &System) -> String {
    match system {
        System::Commutative(_) => "non-degenerate transfer operators are the fiber-stochastic weightings, \
             one simplex of dimension |fiber| - 1 per point of gamma(Delta)"
            .into(),
        System::Matrix(_) => "non-degenerate transfer operators correspond to conditional expectations \
             from alpha(1) B alpha(1) onto alpha(A), which are not unique here"
            .into(),
        System::Isometry(_) => "non-degenerate transfer operators correspond to the states omega on M_n, \
             through E(a (x) b) = a (x) omega(b)"
            .into(),
    }
}

/// Same family with `V_m = Σ_j u(j,m) U_j`, which diagonalizes `ρ = u diag(μ) u*`.
fn rotated_family(f: &IsometryFamily, u: &CMat, tol: &Tolerance) -> Result<IsometryFamily, CliError> {
    let us = f.isometries();
    let vs = (0..f.n())
        .map(|m| {
            let mut v = CMat::zeros(f.big_d(), f.d());
            for (j, uj) in us.iter().enumerate() {
                v += uj * u[(j, m)];
            }
            v
        })
        .collect();
    Ok(IsometryFamily::new(vs, f.i0(), tol)?)
}

/// A fixed, generic element of the codomain used for spot checks.
fn probe_element(f: &IsometryFamily) -> AlgebraElement {
    let alg = f.codomain_algebra();
    let coords: Vec<Complex64> = (0..alg.dim())
        .map(|k| Complex64::new(((k + 1) as f64).sin(), ((2 * k + 1) as f64).cos()))
        .collect();
    AlgebraElement::from_coords(&alg, &coords).expect("dimension matches")
}

pub fn density_summary(
    f: &IsometryFamily,
    choice: &DensityChoice,
    tol: &Tolerance,
) -> Result<(DensitySummary, TransferOperator), CliError> {
    let n = f.n();
    let mut residuals = BTreeMap::new();
    let (form, rho, t) = match choice {
        DensityChoice::Rho(text) => {
            let r = parse_density(text, n, tol)?;
            let t = transfer_from_density(f, &r, tol)?;
            ("rho", r, t)
        }
        DensityChoice::Mu { mu, unitary: None } => {
            let w = parse_weights(mu)?;
            let t = diagonal_transfer(f, &w, tol)?;
            let r = DensityMatrix::diagonal(&w);
            residuals.insert("form_agreement".into(), t.distance(&transfer_from_density(f, &r, tol)?));
            ("diagonal", r, t)
        }
        DensityChoice::Mu { mu, unitary: Some(u) } => {
            let w = parse_weights(mu)?;
            let u = parse_unitary(u, n, tol)?;
            let t = rotate_basis(f, &u, &w, tol)?;
            let r = DensityMatrix::rotated(&u, &w)?;
            let g = rotated_family(f, u.matrix(), tol)?;
            residuals.insert("form_agreement".into(), t.distance(&diagonal_transfer(&g, &w, tol)?));
            ("rotated", r, t)
        }
    };
    let trace = rho.trace();
    let cod = f.domain_algebra();
    let unit = t.unit_image();
    let scalar = cod.identity().scale(Complex64::new(trace, 0.0));
    residuals.insert("unit_image".into(), unit.distance(&scalar));
    let state = state_from_transfer(f, &t, tol)?;
    residuals.insert("state".into(), max_abs(&(state.density() - rho.matrix())));

    let alpha = t.endo();
    let p = alpha.apply(&alpha.domain().identity());
    let corner = &(&p * &probe_element(f)) * &p;
    let split = tensor_split(f, &corner, tol)?;
    residuals.insert("tensor_round_trip".into(), tensor_join(f, &split).distance(&corner));

    if (trace - 1.0).abs() <= tol.eq_tol {
        let e = expectation_from_state(f, &rho, tol).map_err(CliError::Analysis)?;
        let composite = alpha.compose(t.map())?;
        residuals.insert("expectation_idempotence".into(), e.residuals().idempotence);
        residuals.insert("expectation_vs_alpha_lambda".into(), composite.distance(e.map()));
    }
    let summary = DensitySummary {
        form,
        rho: rho.matrix().clone(),
        trace,
        transfer: t.map().matrix().clone(),
        coordinate_norm: t.map().coordinate_norm(),
        transfer_norm: transfer_norm(&t),
        nondegenerate: t.nondegenerate() == Some(true),
        state: state.density().clone(),
        residuals,
    };
    Ok((summary, t))
}

fn describe_unit(alg: &transferlab::BlockAlgebra, index: usize) -> String {
    let u = alg.unit_at(index);
    format!("e{index} = block {} unit ({}, {})", u.block, u.row, u.col)
}

fn element_json(a: &AlgebraElement) -> Value {
    Value::Array(a.blocks().iter().map(crate::document::matrix_to_json).collect())
}

/// Checks `operator` against the transfer axioms for the system.
///
/// Exit status is 0 when the axioms hold and 2 when they fail. With
/// `require_nondegenerate`, a degenerate operator also counts as a failure.
pub fn run_verify(
    doc: &SystemDocument,
    operator: &OperatorDocument,
    tol: &Tolerance,
    require_nondegenerate: bool,
) -> Result<(VerifyReport, i32), CliError> {
    let endo = doc.endo();
    let cand = OperatorMap::new(endo.codomain(), endo.domain(), operator.matrix.clone()).map_err(|_| {
        CliError::Usage(format!(
            "operator must be {}x{} for this system, found {}x{}",
            endo.domain().dim(),
            endo.codomain().dim(),
            operator.matrix.nrows(),
            operator.matrix.ncols()
        ))
    })?;
    let mut report = VerifyReport {
        label: doc.label.clone(),
        passed: false,
        positivity: None,
        failed_axiom: None,
        message: None,
        witness: None,
        nondegenerate: None,
        residuals: BTreeMap::new(),
    };
    match verify_transfer(&endo, &cand, tol) {
        Ok(t) => {
            report.passed = true;
            report.positivity = Some(if t.certified_cp() { "certified_cp" } else { "sampled_positive" });
            report.nondegenerate = t.nondegenerate();
            record_transfer_residuals(&mut report.residuals, &t);
        }
        Err(Error::IdentityViolation { a, b, residual }) => {
            report.positivity = Some("passed");
            report.failed_axiom = Some("transfer_identity");
            report.message = Some(format!(
                "L(alpha(a) b) != a L(b) for a = {}, b = {}",
                describe_unit(endo.domain(), a),
                describe_unit(endo.codomain(), b)
            ));
            report.witness = Some(json!({"a": a, "b": b}));
            report.residuals.insert("transfer_identity".into(), residual);
        }
        Err(Error::PositivityFailure { what, witness }) => {
            report.positivity = Some("not_positive");
            report.failed_axiom = Some("positivity");
            report.message = Some(what);
            report.witness = Some(json!({"x": element_json(&witness)}));
        }
        Err(e @ Error::EquivalenceViolation { .. }) => {
            report.failed_axiom = Some("nondegeneracy_equivalence");
            report.message = Some(e.to_string());
        }
        Err(Error::Structural(msg)) => {
            report.positivity = Some("passed");
            report.failed_axiom =
                Some(if msg.contains("central") { "unit_image_centrality" } else { "transfer_identity_adjoint" });
            report.message = Some(msg);
        }
        Err(e) => return Err(e.into()),
    }
    let fail = !report.passed || (require_nondegenerate && report.nondegenerate != Some(true));
    Ok((report, if fail { EXIT_FAIL } else { EXIT_OK }))
}

fn operator_outcome(doc: OperatorDocument, format: Format) -> Outcome {
    match format {
        Format::Machine => Outcome::ok(emit_operator_document(&doc)),
        Format::Human => {
            let mut t = Table::default();
            t.row("operator", display_label(&doc.label));
            t.row("shape", format!("{}x{}", doc.matrix.nrows(), doc.matrix.ncols()));
            let mut text = t.render();
            text.push_str(&matrix_table(&doc.matrix));
            Outcome::ok(text)
        }
    }
}

pub fn run_construct_complete(doc: &SystemDocument, tol: &Tolerance, format: Format) -> Result<Outcome, CliError> {
    let t = complete_transfer(&doc.endo(), tol).map_err(CliError::Analysis)?;
    Ok(operator_outcome(
        OperatorDocument {
            label: format!("complete transfer operator of {}", display_label(&doc.label)),
            matrix: t.map().matrix().clone(),
        },
        format,
    ))
}

/// Builds `Λ` from a conditional expectation given as an operator on the codomain.
pub fn run_construct_from_expectation(
    doc: &SystemDocument,
    expectation: &OperatorDocument,
    tol: &Tolerance,
    format: Format,
) -> Result<Outcome, CliError> {
    let endo = doc.endo();
    let b = endo.codomain();
    let map = OperatorMap::new(b, b, expectation.matrix.clone())
        .map_err(|_| CliError::Usage(format!("expectation must be {0}x{0} for this system", b.dim())))?;
    let range = RangeAlgebra::of_homomorphism(&endo);
    let e = verify_expectation_exhaustive(&map, &range, tol).map_err(CliError::Analysis)?;
    let t = transfer_from_expectation(&endo, &e, tol).map_err(CliError::Analysis)?;
    Ok(operator_outcome(
        OperatorDocument {
            label: format!("transfer operator of {} from {}", display_label(&doc.label), display_label(&expectation.label)),
            matrix: t.map().matrix().clone(),
        },
        format,
    ))
}

pub const MAX_ENUMERATION_POINTS: usize = 6;

/// Every partial self-map of `{0, .., n-1}` with its completeness verdict.
pub fn run_enumerate(n: usize, tol: &Tolerance, format: Format) -> Result<Outcome, CliError> {
    if n == 0 || n > MAX_ENUMERATION_POINTS {
        return Err(CliError::Usage(format!("--points must lie in 1..={MAX_ENUMERATION_POINTS}")));
    }
    let mut rows = Vec::new();
    let mut complete_count = 0usize;
    for s in FiniteDynSystem::enumerate(n) {
        let complete = complete_exists_commutative(&s, tol)?;
        complete_count += complete as usize;
        let dim = nondegenerate_parameter_space(&s).dimension;
        rows.push((s, complete, dim));
    }
    let text = match format {
        Format::Machine => {
            let systems: Vec<Value> = rows
                .iter()
                .map(|(s, complete, dim)| {
                    let delta = s.delta();
                    let gamma: Vec<usize> = delta.iter().map(|&x| s.gamma(x).expect("x in delta")).collect();
                    json!({"delta": delta, "gamma": gamma, "complete": complete, "parameter_dimension": dim})
                })
                .collect();
            to_text(&json!({
                "schema": SCHEMA_VERSION,
                "kind": "enumeration",
                "points": n,
                "count": rows.len(),
                "complete_count": complete_count,
                "systems": systems,
            }))
        }
        Format::Human => {
            let mut t = Table::default();
            t.row("points", n.to_string());
            t.row("systems", rows.len().to_string());
            t.row("with complete operator", complete_count.to_string());
            let mut out = t.render();
            for (s, complete, dim) in &rows {
                let gamma: Vec<String> =
                    s.partial_map().iter().map(|g| g.map_or("-".to_string(), |y| y.to_string())).collect();
                out.push_str(&format!(
                    "  gamma = [{}]  complete: {:<3}  parameter dimension: {dim}\n",
                    gamma.join(" "),
                    yes_no(*complete)
                ));
            }
            out
        }
    };
    Ok(Outcome::ok(text))
}

/// A random non-degenerate transfer operator of a commutative system.
pub fn run_sample(doc: &SystemDocument, seed: u64, tol: &Tolerance, format: Format) -> Result<Outcome, CliError> {
    let System::Commutative(s) = &doc.system else {
        return Err(CliError::Usage("`commutative sample` needs a commutative system".into()));
    };
    let t = sample_nondegenerate(s, seed, tol).map_err(CliError::Analysis)?;
    let label = format!("sample of {} (seed {seed})", display_label(&doc.label));
    Ok(match format {
        Format::Machine => {
            Outcome::ok(emit_operator_document(&OperatorDocument { label, matrix: t.map().matrix().clone() }))
        }
        Format::Human => {
            let w = weights_from_transfer(s, &t)?;
            let mut table = Table::default();
            table.row("operator", label);
            table.row("non-degenerate", yes_no(t.nondegenerate() == Some(true)));
            table.row("identity residual", sci(t.residuals().identity));
            for (x, fiber) in s.fibers() {
                let ws: Vec<String> = fiber.iter().map(|&y| format!("rho({y}) = {}", num(w.rho(y)))).collect();
                table.row(&format!("fiber over {x}"), format!("{}  {}", list(&fiber), ws.join(", ")));
            }
            Outcome::ok(table.render())
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemoParams {
    pub n: usize,
    pub d: usize,
    pub big_d: Option<usize>,
    pub seed: u64,
}

/// Analysis of a random isometry family.
pub fn run_bh_demo(
    p: &DemoParams,
    density: Option<&DensityChoice>,
    tol: &Tolerance,
) -> Result<AnalysisReport, CliError> {
    if p.n == 0 || p.d == 0 {
        return Err(CliError::Usage("--n and --d must be positive".into()));
    }
    let big_d = p.big_d.unwrap_or(p.n * p.d);
    let f = make_isometry_family_in(p.n, p.d, big_d, p.seed)?;
    let doc = SystemDocument {
        label: format!("random isometries n={} d={} D={big_d} seed={}", p.n, p.d, p.seed),
        system: System::Isometry(f),
    };
    run_analyze(&doc, tol, density)
}

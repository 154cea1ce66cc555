//! Short textual specifications of densities, weights and unitaries used by
//! the `bh` and `analyze` commands.
//!
//! * density: `diag 0.5 0.5`, `uniform` (`I/n`), or a JSON matrix of `[re, im]` pairs;
//! * weights: numbers separated by spaces or commas;
//! * unitary: `identity`, `hadamard`, `fourier`, or a JSON matrix.

use transferlab::bh::{BasisUnitary, DensityMatrix, DiagonalWeights};
use transferlab::linalg::CMat;
use transferlab::Tolerance;

use crate::document::complex_matrix;
use crate::error::CliError;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn parse_weights(text: &str) -> Result<DiagonalWeights, CliError> {
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| usage(format!("`{t}` is not a number"))))
        .collect::<Result<Vec<f64>, CliError>>()?;
    Ok(DiagonalWeights::new(values)?)
}

fn json_matrix(text: &str, what: &str) -> Result<CMat, CliError> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| usage(format!("{what}: {e}")))?;
    complex_matrix(&v, what)
}

pub fn parse_density(text: &str, n: usize, tol: &Tolerance) -> Result<DensityMatrix, CliError> {
    let t = text.trim();
    let rho = if let Some(rest) = t.strip_prefix("diag") {
        let w = parse_weights(rest)?;
        DensityMatrix::diagonal(&w).matrix().clone()
    } else if t == "uniform" {
        CMat::identity(n, n).scale(1.0 / n as f64)
    } else if t.starts_with('[') {
        json_matrix(t, "rho")?
    } else {
        return Err(usage(format!("cannot read density `{t}`; use `diag ...`, `uniform` or a JSON matrix")));
    };
    if rho.nrows() != n {
        return Err(usage(format!("density is {}x{} but the family has n = {n}", rho.nrows(), rho.ncols())));
    }
    Ok(DensityMatrix::new(rho, tol)?)
}

pub fn parse_unitary(text: &str, n: usize, tol: &Tolerance) -> Result<BasisUnitary, CliError> {
    let t = text.trim();
    let u = match t {
        "identity" => BasisUnitary::identity(n),
        "hadamard" => BasisUnitary::hadamard(n)?,
        "fourier" => BasisUnitary::fourier(n),
        _ if t.starts_with('[') => BasisUnitary::new(json_matrix(t, "unitary")?, tol)?,
        _ => return Err(usage(format!("cannot read unitary `{t}`"))),
    };
    if u.matrix().nrows() != n {
        return Err(usage(format!("unitary has size {} but the family has n = {n}", u.matrix().nrows())));
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use transferlab::linalg::max_abs;

    #[test]
    fn densities() {
        let tol = Tolerance::default();
        let r = parse_density("diag 0.5 0.5", 2, &tol).unwrap();
        assert_eq!(r.trace(), 1.0);
        let u = parse_density("uniform", 4, &tol).unwrap();
        assert!((u.trace() - 1.0).abs() < 1e-15);
        let j = parse_density("[[[0.5,0],[0.5,0]],[[0.5,0],[0.5,0]]]", 2, &tol).unwrap();
        assert!(max_abs(&(j.matrix() - CMat::from_element(2, 2, (0.5).into()))) == 0.0);
        assert!(parse_density("diag 1 -1", 2, &tol).is_err());
        assert!(parse_density("diag 1", 2, &tol).is_err());
        assert!(parse_density("banana", 2, &tol).is_err());
    }

    #[test]
    fn unitaries_and_weights() {
        let tol = Tolerance::default();
        assert!(parse_unitary("hadamard", 2, &tol).is_ok());
        assert!(parse_unitary("hadamard", 3, &tol).is_err());
        assert!(parse_unitary("fourier", 3, &tol).is_ok());
        assert!(parse_unitary("[[[1,0],[1,0]],[[0,0],[1,0]]]", 2, &tol).is_err());
        assert_eq!(parse_weights("0.25, 0.75").unwrap().values(), &[0.25, 0.75]);
    }
}

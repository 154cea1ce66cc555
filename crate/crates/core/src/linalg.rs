//! Dense complex linear algebra used by the rest of the crate.
//!
//! Hermitian spectra come from a cyclic Jacobi solver. Rank, subspace and
//! least-squares questions go through an SVD.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Singular values at or below `RANK_THRESHOLD * max(sigma_max, 1)` count as zero.
pub const RANK_THRESHOLD: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 64;
const JACOBI_REL_THRESHOLD: f64 = 1e-13;

/// Matrices above this order are certified positive by a shifted Cholesky
/// factorization instead of a full eigensolve.
pub const JACOBI_MAX_ORDER: usize = 64;

/// Spectrum of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Columns are the eigenvectors, in the order of `values`.
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Cyclic Jacobi eigensolver for Hermitian matrices.
///
/// The input is symmetrized as `(m + m*)/2` first. Sweeps run in row-major
/// pair order until the off-diagonal Frobenius norm drops below
/// `1e-13 * ||m||_F`.
pub fn hermitian_eigen(m: &CMat) -> HermitianEigen {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "hermitian_eigen needs a square matrix");
    let mut a = (m + m.adjoint()).scale(0.5);
    let mut v = CMat::identity(n, n);
    let scale = a.norm();
    if n == 0 || scale == 0.0 {
        return HermitianEigen {
            values: vec![0.0; n],
            vectors: v,
        };
    }
    let threshold = JACOBI_REL_THRESHOLD * scale;

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let phase = (apq / mag).conj();
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * mag);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // G = diag(1, phase) * [[c, s], [-s, c]] acting on columns p, q.
                let g_pp = Complex64::new(c, 0.0);
                let g_pq = Complex64::new(s, 0.0);
                let g_qp = phase * (-s);
                let g_qq = phase * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * g_pp + akq * g_qp;
                    a[(k, q)] = akp * g_pq + akq * g_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
                    a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * g_pp + vkq * g_qp;
                    v[(k, q)] = vkp * g_pq + vkq * g_qq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = CMat::from_fn(n, n, |r, c| v[(r, order[c])]);
    HermitianEigen { values, vectors }
}

fn off_diagonal_norm(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)].norm_sqr();
            }
        }
    }
    sum.sqrt()
}

/// Largest entrywise deviation of `m` from its adjoint.
pub fn hermitian_residual(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `true` when `m + shift * I` admits a Cholesky factorization, i.e. when the
/// smallest eigenvalue of the Hermitian matrix `m` is above `-shift`.
pub fn shifted_cholesky_succeeds(m: &CMat, shift: f64) -> bool {
    let n = m.nrows();
    let mut l = (m + m.adjoint()).scale(0.5);
    for i in 0..n {
        l[(i, i)] += Complex64::new(shift, 0.0);
    }
    for j in 0..n {
        let mut d = l[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        l[(j, j)] = Complex64::new(d, 0.0);
        for i in (j + 1)..n {
            let mut s = l[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    true
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Largest singular value (coordinate operator 2-norm).
pub fn spectral_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn rank(m: &CMat, threshold: f64) -> usize {
    let s = singular_values(m);
    let cut = threshold * s.first().copied().unwrap_or(0.0).max(1.0);
    s.iter().filter(|&&x| x > cut).count()
}

/// A linear subspace of `C^ambient`, stored through an orthonormal basis.
#[derive(Clone, Debug)]
pub struct Subspace {
    basis: CMat,
}

impl Subspace {
    pub fn zero(ambient: usize) -> Self {
        Subspace {
            basis: CMat::zeros(ambient, 0),
        }
    }

    /// Column space of `m`, with numerical rank decided at `threshold`.
    pub fn column_space(m: &CMat, threshold: f64) -> Self {
        let ambient = m.nrows();
        if m.ncols() == 0 || ambient == 0 {
            return Subspace::zero(ambient);
        }
        let svd = m.clone().svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let s = &svd.singular_values;
        let smax = s.iter().fold(0.0f64, |a, &b| a.max(b));
        let cut = threshold * smax.max(1.0);
        let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > cut).collect();
        let basis = CMat::from_fn(ambient, keep.len(), |r, c| u[(r, keep[c])]);
        Subspace { basis }
    }

    /// Span of the given coordinate axes.
    pub fn coordinate(ambient: usize, axes: &[usize]) -> Self {
        let mut basis = CMat::zeros(ambient, axes.len());
        for (c, &r) in axes.iter().enumerate() {
            basis[(r, c)] = ONE;
        }
        Subspace { basis }
    }

    /// Wraps columns that are already orthonormal.
    pub fn from_orthonormal(basis: CMat) -> Self {
        Subspace { basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    pub fn projector(&self) -> CMat {
        &self.basis * self.basis.adjoint()
    }

    /// Norm of the component of `v` orthogonal to the subspace.
    pub fn residual(&self, v: &CVec) -> f64 {
        let coeff = self.basis.adjoint() * v;
        (v - &self.basis * coeff).norm()
    }

    /// Spectral norm of the difference of the orthogonal projectors.
    pub fn distance(&self, other: &Subspace) -> f64 {
        assert_eq!(self.ambient(), other.ambient());
        spectral_norm(&(self.projector() - other.projector()))
    }
}

/// Solves `a x = b` in the least-squares sense and rejects the answer unless
/// `||a x - b||_F <= rel_bound * ||b||_F + 1e-14`.
pub fn solve_checked(a: &CMat, b: &CMat, rel_bound: f64) -> Result<CMat> {
    let bound = rel_bound * b.norm() + 1e-14;
    let x = if a.ncols() == 0 || a.nrows() == 0 {
        CMat::zeros(a.ncols(), b.ncols())
    } else {
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
        let eps = RANK_THRESHOLD * smax.max(1.0);
        svd.solve(b, eps).map_err(|e| Error::Structural(e.to_string()))?
    };
    let residual = (a * &x - b).norm();
    if residual > bound {
        return Err(Error::SingularSolve { residual, bound });
    }
    Ok(x)
}

/// Orthonormalizes the columns of `m` (modified Gram-Schmidt, two passes),
/// dropping columns whose remainder falls below `threshold` times their
/// original norm.
pub fn orthonormalize_columns(m: &CMat, threshold: f64) -> CMat {
    let mut kept: Vec<CVec> = Vec::new();
    for c in 0..m.ncols() {
        let original = m.column(c).into_owned();
        let norm0 = original.norm();
        if norm0 == 0.0 {
            continue;
        }
        let mut v = original;
        for _ in 0..2 {
            for q in &kept {
                let proj = q.dotc(&v);
                v -= q * proj;
            }
        }
        let nv = v.norm();
        if nv > threshold * norm0 {
            kept.push(v / Complex64::new(nv, 0.0));
        }
    }
    if kept.is_empty() {
        return CMat::zeros(m.nrows(), 0);
    }
    CMat::from_columns(&kept)
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn random_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Haar-ish random unitary: Gram-Schmidt on a Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    loop {
        let q = orthonormalize_columns(&random_gaussian(n, n, rng), 1e-6);
        if q.ncols() == n {
            return q;
        }
    }
}

/// Random positive semidefinite matrix `g g*` with `g` Gaussian `n x rank`.
pub fn random_psd<R: Rng + ?Sized>(n: usize, rank: usize, rng: &mut R) -> CMat {
    let g = random_gaussian(n, rank, rng);
    &g * g.adjoint()
}

pub fn trace(m: &CMat) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Deviation of `u` from being unitary: `max(||u*u - 1||, ||uu* - 1||)`.
pub fn unitary_residual(u: &CMat) -> f64 {
    let n = u.nrows();
    if n != u.ncols() {
        return f64::INFINITY;
    }
    let id = CMat::identity(n, n);
    max_abs(&(u.adjoint() * u - &id)).max(max_abs(&(u * u.adjoint() - id)))
}

//! Endomorphisms of matrix algebras implemented by isometry families.
//!
//! `U_1, ..., U_n: C^d → C^D` with `U_i* U_j = δ_ij I` give
//! `α(a) = Σ U_i a U_i*` from `M_d` to `M_D`. The corner `α(1) M_D α(1)` is
//! identified with `M_d ⊗ M_n` through `a ⊗ b = Σ b(i,j) U_i a U_j*`, and
//! every transfer operator of the form used here is
//! `Λ(a) = Σ_{i,j} ρ(j,i) U_i* a U_j` for a positive `n x n` matrix `ρ`.
//! With that index placement `Λ(1 ⊗ b) = Tr(ρ b)`; for real symmetric `ρ`
//! it coincides with the transposed placement.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cstar::{verify_star_homomorphism, AlgebraElement, BlockAlgebra, OperatorMap, Tolerance};
use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eigen, hermitian_residual, max_abs, orthonormalize_columns, random_gaussian, trace,
    unitary_residual, CMat, ONE, ZERO,
};
use crate::transfer::{
    verify_expectation_exhaustive, verify_transfer, ConditionalExpectation, RangeAlgebra,
    TransferOperator,
};

/// Isometries `U_1, ..., U_n: C^d → C^D` with mutually orthogonal ranges.
#[derive(Clone, Debug)]
pub struct IsometryFamily {
    d: usize,
    big_d: usize,
    us: Vec<CMat>,
    i0: usize,
}

impl IsometryFamily {
    /// `i0` is 1-based.
    pub fn new(us: Vec<CMat>, i0: usize, tol: &Tolerance) -> Result<Self> {
        let first = us.first().ok_or_else(|| Error::InvalidSystem("empty isometry family".into()))?;
        let (big_d, d) = first.shape();
        if d == 0 {
            return Err(Error::InvalidSystem("isometries need a nonzero domain".into()));
        }
        if us.iter().any(|u| u.shape() != (big_d, d)) {
            return Err(Error::ShapeMismatch("isometries must share one shape".into()));
        }
        if i0 == 0 || i0 > us.len() {
            return Err(Error::InvalidSystem(format!("distinguished index {i0} outside 1..={}", us.len())));
        }
        if big_d < us.len() * d {
            return Err(Error::NotIsometryFamily(f64::INFINITY));
        }
        let family = IsometryFamily { d, big_d, us, i0 };
        let r = family.residual();
        if r > tol.eq_tol {
            return Err(Error::NotIsometryFamily(r));
        }
        Ok(family)
    }

    /// `U_i = e_{(i-1)d+1}, ..., e_{id}` in `C^{nd}`.
    pub fn canonical(n: usize, d: usize) -> Self {
        assert!(n >= 1 && d >= 1);
        let big_d = n * d;
        let us = (0..n)
            .map(|i| CMat::from_fn(big_d, d, |r, c| if r == i * d + c { ONE } else { ZERO }))
            .collect();
        IsometryFamily { d, big_d, us, i0: 1 }
    }

    pub fn n(&self) -> usize {
        self.us.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn big_d(&self) -> usize {
        self.big_d
    }

    pub fn isometries(&self) -> &[CMat] {
        &self.us
    }

    pub fn i0(&self) -> usize {
        self.i0
    }

    /// The distinguished isometry `U_{i0}`.
    pub fn u(&self) -> &CMat {
        &self.us[self.i0 - 1]
    }

    pub fn with_i0(mut self, i0: usize) -> Result<Self> {
        if i0 == 0 || i0 > self.n() {
            return Err(Error::InvalidSystem(format!("distinguished index {i0} outside 1..={}", self.n())));
        }
        self.i0 = i0;
        Ok(self)
    }

    /// `max_{i,j} ||U_i* U_j - δ_ij I||`.
    pub fn residual(&self) -> f64 {
        let id = CMat::identity(self.d, self.d);
        let mut worst = 0.0f64;
        for (i, ui) in self.us.iter().enumerate() {
            for (j, uj) in self.us.iter().enumerate() {
                let g = ui.adjoint() * uj;
                let r = if i == j { max_abs(&(g - &id)) } else { max_abs(&g) };
                worst = worst.max(r);
            }
        }
        worst
    }

    pub fn domain_algebra(&self) -> BlockAlgebra {
        BlockAlgebra::full_matrix(self.d).expect("d >= 1")
    }

    pub fn codomain_algebra(&self) -> BlockAlgebra {
        BlockAlgebra::full_matrix(self.big_d).expect("D >= 1")
    }
}

/// Random family with `D = n d`: orthonormalize a Gaussian `D x nd` matrix
/// and cut it into `n` column slices.
pub fn make_isometry_family(n: usize, d: usize, seed: u64) -> Result<IsometryFamily> {
    make_isometry_family_in(n, d, n * d, seed)
}

/// As [`make_isometry_family`] with a codomain of dimension `big_d ≥ n d`.
pub fn make_isometry_family_in(n: usize, d: usize, big_d: usize, seed: u64) -> Result<IsometryFamily> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidSystem("n and d must be positive".into()));
    }
    if big_d < n * d {
        return Err(Error::InvalidSystem(format!("D = {big_d} is smaller than n d = {}", n * d)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = loop {
        let q = orthonormalize_columns(&random_gaussian(big_d, n * d, &mut rng), 1e-6);
        if q.ncols() == n * d {
            break q;
        }
    };
    let us = (0..n).map(|i| q.columns(i * d, d).into_owned()).collect();
    IsometryFamily::new(us, 1, &Tolerance::default())
}

/// A positive semidefinite `n x n` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    rho: CMat,
}

impl DensityMatrix {
    pub fn new(rho: CMat, tol: &Tolerance) -> Result<Self> {
        if rho.nrows() != rho.ncols() || rho.nrows() == 0 {
            return Err(Error::ShapeMismatch("density matrix must be square and nonempty".into()));
        }
        let h = hermitian_residual(&rho);
        if h > tol.eq_tol {
            return Err(Error::NotHermitian(h));
        }
        let min = hermitian_eigen(&rho).min();
        if min < -tol.psd_tol {
            return Err(Error::NotPsd(min));
        }
        Ok(DensityMatrix { rho })
    }

    pub fn diagonal(w: &DiagonalWeights) -> Self {
        let n = w.mu.len();
        DensityMatrix {
            rho: CMat::from_fn(n, n, |i, j| if i == j { ONE * w.mu[i] } else { ZERO }),
        }
    }

    /// `u diag(μ) u*`.
    pub fn rotated(u: &BasisUnitary, w: &DiagonalWeights) -> Result<Self> {
        if u.u.nrows() != w.mu.len() {
            return Err(Error::ShapeMismatch("unitary and weights differ in size".into()));
        }
        let d = Self::diagonal(w).rho;
        let rho = &u.u * d * u.u.adjoint();
        Ok(DensityMatrix {
            rho: (&rho + rho.adjoint()).scale(0.5),
        })
    }

    pub fn matrix(&self) -> &CMat {
        &self.rho
    }

    pub fn n(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> f64 {
        trace(&self.rho).re
    }

    /// Eigenvectors and eigenvalues with `ρ = u diag(μ) u*`; round-off
    /// negatives are clipped to zero.
    pub fn spectral(&self) -> (BasisUnitary, DiagonalWeights) {
        let eig = hermitian_eigen(&self.rho);
        let mu = eig.values.iter().map(|&v| v.max(0.0)).collect();
        (BasisUnitary { u: eig.vectors }, DiagonalWeights { mu })
    }
}

/// Nonnegative weights `μ_1, ..., μ_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalWeights {
    mu: Vec<f64>,
}

impl DiagonalWeights {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::InvalidSystem("weights must be nonempty".into()));
        }
        if let Some((index, &value)) = mu.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeWeight { index, value });
        }
        Ok(DiagonalWeights { mu })
    }

    pub fn values(&self) -> &[f64] {
        &self.mu
    }

    pub fn total(&self) -> f64 {
        self.mu.iter().sum()
    }
}

/// A unitary `n x n` matrix; its columns `u e_i` are the rotated basis.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisUnitary {
    u: CMat,
}

impl BasisUnitary {
    pub fn new(u: CMat, tol: &Tolerance) -> Result<Self> {
        let r = unitary_residual(&u);
        if r > tol.eq_tol {
            return Err(Error::NotUnitary(r));
        }
        Ok(BasisUnitary { u })
    }

    pub fn identity(n: usize) -> Self {
        BasisUnitary { u: CMat::identity(n, n) }
    }

    /// The normalized discrete Fourier matrix `ω^{jk} / √n`.
    pub fn fourier(n: usize) -> Self {
        let s = 1.0 / (n as f64).sqrt();
        let u = CMat::from_fn(n, n, |j, k| {
            let theta = 2.0 * std::f64::consts::PI * (j * k) as f64 / n as f64;
            Complex64::from_polar(s, theta)
        });
        BasisUnitary { u }
    }

    /// Sylvester–Hadamard matrix divided by `√n`; `n` must be a power of two.
    pub fn hadamard(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::InvalidSystem(format!("no Hadamard matrix of order {n}")));
        }
        let s = 1.0 / (n as f64).sqrt();
        let u = CMat::from_fn(n, n, |i, j| {
            let sign = if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            Complex64::new(sign * s, 0.0)
        });
        Ok(BasisUnitary { u })
    }

    pub fn matrix(&self) -> &CMat {
        &self.u
    }
}

/// `α(a) = Σ U_i a U_i*`, verified as a *-homomorphism `M_d → M_D`.
pub fn endo_from_isometries(f: &IsometryFamily) -> OperatorMap {
    let dom = f.domain_algebra();
    let cod = f.codomain_algebra();
    let phi = OperatorMap::from_fn(&dom, &cod, |a| {
        let mut out = CMat::zeros(f.big_d, f.big_d);
        for u in &f.us {
            out += u * a.block(0) * u.adjoint();
        }
        AlgebraElement::new(&cod, vec![out]).expect("D x D block")
    })
    .expect("shapes agree");
    verify_star_homomorphism(phi, &Tolerance::default()).expect("isometry families give homomorphisms")
}

/// The coordinate map `a ↦ Σ_{i,j} ρ(j,i) U_i* a U_j`.
pub fn density_operator_map(f: &IsometryFamily, rho: &CMat) -> OperatorMap {
    let dom = f.codomain_algebra();
    let cod = f.domain_algebra();
    OperatorMap::from_fn(&dom, &cod, |a| {
        let mut out = CMat::zeros(f.d, f.d);
        for (i, ui) in f.us.iter().enumerate() {
            let left = ui.adjoint() * a.block(0);
            for (j, uj) in f.us.iter().enumerate() {
                let c = rho[(j, i)];
                if c != ZERO {
                    out += (&left * uj) * c;
                }
            }
        }
        AlgebraElement::new(&cod, vec![out]).expect("d x d block")
    })
    .expect("shapes agree")
}

fn require_size(f: &IsometryFamily, n: usize) -> Result<()> {
    if n != f.n() {
        return Err(Error::ShapeMismatch(format!("expected {} parameters, got {n}", f.n())));
    }
    Ok(())
}

/// `Λ(a) = Σ ρ(j,i) U_i* a U_j`, verified for `endo_from_isometries(f)`.
pub fn transfer_from_density(f: &IsometryFamily, r: &DensityMatrix, tol: &Tolerance) -> Result<TransferOperator> {
    require_size(f, r.n())?;
    verify_transfer(&endo_from_isometries(f), &density_operator_map(f, r.matrix()), tol)
}

/// `||Λ|| = ||Λ(1)||`, valid because `Λ` is positive.
pub fn transfer_norm(t: &TransferOperator) -> f64 {
    t.unit_image().norm()
}

/// Coefficients `T_ij = U_i* a U_j ∈ M_d` of a corner element, so that
/// `a = Σ U_i T_ij U_j*`. Viewed as an element of `M_n(M_d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorCoefficients {
    n: usize,
    d: usize,
    blocks: Vec<CMat>,
}

impl TensorCoefficients {
    pub fn from_blocks(n: usize, d: usize, blocks: Vec<CMat>) -> Result<Self> {
        if blocks.len() != n * n || blocks.iter().any(|b| b.shape() != (d, d)) {
            return Err(Error::ShapeMismatch("expected an n x n grid of d x d blocks".into()));
        }
        Ok(TensorCoefficients { n, d, blocks })
    }

    /// `a ⊗ b` has coefficients `T_ij = b(i,j) a`.
    pub fn product(a: &CMat, b: &CMat) -> Self {
        let n = b.nrows();
        let blocks = (0..n * n).map(|k| a * b[(k / n, k % n)]).collect();
        TensorCoefficients { n, d: a.nrows(), blocks }
    }

    pub fn block(&self, i: usize, j: usize) -> &CMat {
        &self.blocks[i * self.n + j]
    }

    /// The `T(p,q,i,j)` entry: row `p`, column `q` of block `(i,j)`.
    pub fn entry(&self, p: usize, q: usize, i: usize, j: usize) -> Complex64 {
        self.block(i, j)[(p, q)]
    }

    /// The same data as one `nd x nd` matrix in `M_n(M_d)`.
    pub fn to_matrix(&self) -> CMat {
        let (n, d) = (self.n, self.d);
        CMat::from_fn(n * d, n * d, |r, c| self.block(r / d, c / d)[(r % d, c % d)])
    }

    pub fn from_matrix(n: usize, d: usize, m: &CMat) -> Result<Self> {
        if m.shape() != (n * d, n * d) {
            return Err(Error::ShapeMismatch("expected an nd x nd matrix".into()));
        }
        let blocks = (0..n * n).map(|k| m.view(((k / n) * d, (k % n) * d), (d, d)).into_owned()).collect();
        Ok(TensorCoefficients { n, d, blocks })
    }
}

/// Splits a corner element `a = α(1) a α(1)` into its coefficients.
pub fn tensor_split(f: &IsometryFamily, a: &AlgebraElement, tol: &Tolerance) -> Result<TensorCoefficients> {
    if a.algebra() != &f.codomain_algebra() {
        return Err(Error::ShapeMismatch("element is not in M_D".into()));
    }
    let x = a.block(0);
    let n = f.n();
    let blocks: Vec<CMat> = (0..n * n)
        .map(|k| f.us[k / n].adjoint() * x * &f.us[k % n])
        .collect();
    let t = TensorCoefficients { n, d: f.d, blocks };
    let r = tensor_join(f, &t).distance(a);
    if r > tol.eq_tol {
        return Err(Error::NotInCorner(r));
    }
    Ok(t)
}

/// `Σ U_i T_ij U_j*`.
pub fn tensor_join(f: &IsometryFamily, t: &TensorCoefficients) -> AlgebraElement {
    assert_eq!((t.n, t.d), (f.n(), f.d), "coefficients of the wrong size");
    let mut out = CMat::zeros(f.big_d, f.big_d);
    for (i, ui) in f.us.iter().enumerate() {
        for (j, uj) in f.us.iter().enumerate() {
            out += ui * t.block(i, j) * uj.adjoint();
        }
    }
    AlgebraElement::new(&f.codomain_algebra(), vec![out]).expect("D x D block")
}

/// `1 ⊗ b = Σ b(i,j) U_i U_j*`.
pub fn one_tensor(f: &IsometryFamily, b: &CMat) -> AlgebraElement {
    tensor_join(f, &TensorCoefficients::product(&CMat::identity(f.d, f.d), b))
}

/// A linear functional `ω(b) = Tr(σ b)` on `M_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateFunctional {
    density: CMat,
}

impl StateFunctional {
    pub fn density(&self) -> &CMat {
        &self.density
    }

    pub fn eval(&self, b: &CMat) -> Complex64 {
        trace(&(&self.density * b))
    }

    pub fn is_positive(&self, tol: &Tolerance) -> bool {
        DensityMatrix::new(self.density.clone(), tol).is_ok()
    }
}

/// Reads `ω` off `Λ(1 ⊗ b) = ω(b) 1`.
pub fn state_from_transfer(f: &IsometryFamily, t: &TransferOperator, tol: &Tolerance) -> Result<StateFunctional> {
    if t.map().domain() != &f.codomain_algebra() || t.map().codomain() != &f.domain_algebra() {
        return Err(Error::ShapeMismatch("transfer operator does not belong to this family".into()));
    }
    let n = f.n();
    let id = CMat::identity(f.d, f.d);
    let mut density = CMat::zeros(n, n);
    for p in 0..n {
        for q in 0..n {
            let mut e = CMat::zeros(n, n);
            e[(p, q)] = ONE;
            let img = t.apply(&one_tensor(f, &e));
            let c = trace(img.block(0)) / f.d as f64;
            let r = max_abs(&(img.block(0) - &id * c));
            if r > tol.eq_tol {
                return Err(Error::Structural(format!("Λ(1 ⊗ E_{p}{q}) is not scalar, residual {r:.3e}")));
            }
            // ω(E_pq) = Tr(σ E_pq) = σ(q,p)
            density[(q, p)] = c;
        }
    }
    Ok(StateFunctional { density })
}

/// `E(a ⊗ b) = a ⊗ ω(b) 1` on the corner, through the tensor identification.
pub fn expectation_from_state(
    f: &IsometryFamily,
    r: &DensityMatrix,
    tol: &Tolerance,
) -> Result<ConditionalExpectation> {
    require_size(f, r.n())?;
    let tr = r.trace();
    if (tr - 1.0).abs() > tol.eq_tol {
        return Err(Error::NotState(tr));
    }
    let alpha = endo_from_isometries(f);
    let unit = alpha.apply(&f.domain_algebra().identity());
    let cod = f.codomain_algebra();
    let rho = r.matrix();
    let n = f.n();
    let map = OperatorMap::from_fn(&cod, &cod, |b| {
        let corner = &(&unit * b) * &unit;
        let t = tensor_split(f, &corner, tol).expect("compressed element lies in the corner");
        let mut slice = CMat::zeros(f.d, f.d);
        for i in 0..n {
            for j in 0..n {
                slice += t.block(i, j) * rho[(j, i)];
            }
        }
        tensor_join(f, &TensorCoefficients::product(&slice, &CMat::identity(n, n)))
    })?;
    let e = verify_expectation_exhaustive(&map, &RangeAlgebra::of_homomorphism(&alpha), tol)?;
    let lam = transfer_from_density(f, r, tol)?;
    let composite = alpha.compose(lam.map())?;
    let diff = composite.distance(e.map());
    if diff > tol.eq_tol {
        return Err(Error::Structural(format!("E differs from α∘Λ by {diff:.3e}")));
    }
    Ok(e)
}

/// `Λ(a) = Σ μ_i U_i* a U_i`.
pub fn diagonal_transfer(f: &IsometryFamily, w: &DiagonalWeights, tol: &Tolerance) -> Result<TransferOperator> {
    require_size(f, w.mu.len())?;
    let dom = f.codomain_algebra();
    let cod = f.domain_algebra();
    let map = OperatorMap::from_fn(&dom, &cod, |a| {
        let mut out = CMat::zeros(f.d, f.d);
        for (u, &m) in f.us.iter().zip(&w.mu) {
            out += u.adjoint() * a.block(0) * u * Complex64::new(m, 0.0);
        }
        AlgebraElement::new(&cod, vec![out]).expect("d x d block")
    })?;
    verify_transfer(&endo_from_isometries(f), &map, tol)
}

/// `E(a) = Σ_j Σ_i μ_i U_j U_i* a U_i U_j*`.
pub fn diagonal_expectation_map(f: &IsometryFamily, w: &DiagonalWeights) -> OperatorMap {
    let alg = f.codomain_algebra();
    OperatorMap::from_fn(&alg, &alg, |a| {
        let mut out = CMat::zeros(f.big_d, f.big_d);
        for uj in &f.us {
            for (ui, &m) in f.us.iter().zip(&w.mu) {
                let k = uj * ui.adjoint();
                out += &k * a.block(0) * k.adjoint() * Complex64::new(m, 0.0);
            }
        }
        AlgebraElement::new(&alg, vec![out]).expect("D x D block")
    })
    .expect("shapes agree")
}

/// `ω(b) = Σ μ_i b(i,i)`.
pub fn diagonal_state(w: &DiagonalWeights) -> StateFunctional {
    StateFunctional {
        density: DensityMatrix::diagonal(w).rho,
    }
}

/// The transfer operator of `ρ = u diag(μ) u*`, diagonal in the basis `{u e_i}`.
pub fn rotate_basis(
    f: &IsometryFamily,
    u: &BasisUnitary,
    w: &DiagonalWeights,
    tol: &Tolerance,
) -> Result<TransferOperator> {
    require_size(f, w.mu.len())?;
    let r = DensityMatrix::rotated(u, w)?;
    transfer_from_density(f, &r, tol)
}

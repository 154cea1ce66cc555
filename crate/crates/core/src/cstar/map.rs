use num_complex::Complex64;

use super::algebra::{AlgebraElement, BlockAlgebra, IdealBlocks, Tolerance};
use crate::error::{Error, Result};
use crate::linalg::{rank, spectral_norm, CMat, CVec, RANK_THRESHOLD};

/// Roles a map has been verified to play. Only verification routines set them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Roles {
    pub homomorphism: bool,
    pub endomorphism: bool,
    pub positive: bool,
    pub transfer: bool,
    pub expectation: bool,
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Role {
    Homomorphism,
    Positive,
    Transfer,
    Expectation,
}

/// A linear map between block algebras, stored as its coordinate matrix
/// (`dim(codomain) x dim(domain)`) in the matrix-unit bases.
#[derive(Clone, Debug)]
pub struct OperatorMap {
    domain: BlockAlgebra,
    codomain: BlockAlgebra,
    matrix: CMat,
    roles: Roles,
}

impl OperatorMap {
    pub fn new(domain: &BlockAlgebra, codomain: &BlockAlgebra, matrix: CMat) -> Result<Self> {
        if matrix.nrows() != codomain.dim() || matrix.ncols() != domain.dim() {
            return Err(Error::ShapeMismatch(format!(
                "coordinate matrix is {}x{}, expected {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                codomain.dim(),
                domain.dim()
            )));
        }
        Ok(OperatorMap {
            domain: domain.clone(),
            codomain: codomain.clone(),
            matrix,
            roles: Roles::default(),
        })
    }

    /// Builds the map from its action on the matrix units.
    pub fn from_fn(
        domain: &BlockAlgebra,
        codomain: &BlockAlgebra,
        f: impl Fn(&AlgebraElement) -> AlgebraElement,
    ) -> Result<Self> {
        let mut m = CMat::zeros(codomain.dim(), domain.dim());
        for (i, e) in domain.basis().enumerate() {
            let img = f(&e);
            if img.algebra() != codomain {
                return Err(Error::ShapeMismatch("image lies in the wrong algebra".into()));
            }
            m.set_column(i, &img.coords());
        }
        Self::new(domain, codomain, m)
    }

    pub fn identity(algebra: &BlockAlgebra) -> Self {
        let n = algebra.dim();
        Self::new(algebra, algebra, CMat::identity(n, n)).expect("square identity")
    }

    pub fn zero(domain: &BlockAlgebra, codomain: &BlockAlgebra) -> Self {
        Self::new(domain, codomain, CMat::zeros(codomain.dim(), domain.dim())).expect("zero shape")
    }

    pub fn domain(&self) -> &BlockAlgebra {
        &self.domain
    }

    pub fn codomain(&self) -> &BlockAlgebra {
        &self.codomain
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn roles(&self) -> Roles {
        self.roles
    }

    pub fn is_square(&self) -> bool {
        self.domain == self.codomain
    }

    pub(crate) fn with_role(mut self, role: Role) -> Self {
        match role {
            Role::Homomorphism => {
                self.roles.homomorphism = true;
                self.roles.endomorphism = self.domain == self.codomain;
            }
            Role::Positive => self.roles.positive = true,
            Role::Transfer => self.roles.transfer = true,
            Role::Expectation => self.roles.expectation = true,
        }
        self
    }

    /// Drops all verified roles, e.g. after an unchecked transformation.
    pub fn unverified(mut self) -> Self {
        self.roles = Roles::default();
        self
    }

    pub fn apply(&self, a: &AlgebraElement) -> AlgebraElement {
        assert_eq!(a.algebra(), &self.domain, "argument outside the domain");
        let v = &self.matrix * a.coords();
        AlgebraElement::from_coords(&self.codomain, v.as_slice()).expect("codomain shape")
    }

    pub fn apply_coords(&self, v: &CVec) -> CVec {
        &self.matrix * v
    }

    /// Applies the map to a sparse coordinate vector.
    pub(crate) fn apply_sparse_into(&self, entries: &[(usize, Complex64)], out: &mut CVec) {
        out.fill(Complex64::new(0.0, 0.0));
        for &(j, z) in entries {
            out.axpy(z, &self.matrix.column(j), Complex64::new(1.0, 0.0));
        }
    }

    /// Image of the `i`-th matrix unit.
    pub fn image_of_basis(&self, i: usize) -> AlgebraElement {
        let col: Vec<Complex64> = self.matrix.column(i).iter().copied().collect();
        AlgebraElement::from_coords(&self.codomain, &col).expect("codomain shape")
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &OperatorMap) -> Result<OperatorMap> {
        if inner.codomain != self.domain {
            return Err(Error::ShapeMismatch("composition of incompatible maps".into()));
        }
        OperatorMap::new(&inner.domain, &self.codomain, &self.matrix * &inner.matrix)
    }

    pub fn scale(&self, c: f64) -> OperatorMap {
        OperatorMap::new(&self.domain, &self.codomain, self.matrix.scale(c)).expect("same shape")
    }

    /// Frobenius norm of the difference of coordinate matrices.
    pub fn distance(&self, other: &OperatorMap) -> f64 {
        assert_eq!(self.matrix.shape(), other.matrix.shape());
        (&self.matrix - &other.matrix).norm()
    }

    /// Operator 2-norm of the coordinate matrix. This is not the C*-norm of the map.
    pub fn coordinate_norm(&self) -> f64 {
        spectral_norm(&self.matrix)
    }
}

/// Largest deviation from multiplicativity or *-preservation over all
/// pairs of matrix units.
pub fn homomorphism_residual(phi: &OperatorMap) -> f64 {
    let dom = phi.domain();
    let images: Vec<AlgebraElement> = (0..dom.dim()).map(|i| phi.image_of_basis(i)).collect();
    let zero = phi.codomain().zero();
    let mut worst = 0.0f64;
    for i in 0..dom.dim() {
        let ui = dom.unit_at(i);
        let adj = dom.index_of(super::algebra::MatrixUnit {
            block: ui.block,
            row: ui.col,
            col: ui.row,
        });
        worst = worst.max(images[adj].distance(&images[i].adjoint()));
        for j in 0..dom.dim() {
            let uj = dom.unit_at(j);
            let prod = &images[i] * &images[j];
            let expected = if ui.block == uj.block && ui.col == uj.row {
                &images[dom.index_of(super::algebra::MatrixUnit {
                    block: ui.block,
                    row: ui.row,
                    col: uj.col,
                })]
            } else {
                &zero
            };
            worst = worst.max(prod.distance(expected));
        }
    }
    worst
}

pub fn is_star_homomorphism(phi: &OperatorMap, tol: &Tolerance) -> bool {
    homomorphism_residual(phi) <= tol.eq_tol
}

/// Checks the *-homomorphism identities and returns the map flagged as such
/// (and as an endomorphism when domain and codomain agree).
pub fn verify_star_homomorphism(phi: OperatorMap, tol: &Tolerance) -> Result<OperatorMap> {
    let r = homomorphism_residual(&phi);
    if r > tol.eq_tol {
        return Err(Error::NotHomomorphism(format!("basis-pair residual {r:.3e}")));
    }
    Ok(phi.with_role(Role::Homomorphism))
}

pub(crate) fn require_homomorphism(phi: &OperatorMap) -> Result<()> {
    if phi.roles().homomorphism {
        Ok(())
    } else {
        Err(Error::NotHomomorphism("map has not been verified as a *-homomorphism".into()))
    }
}

/// Blocks annihilated by a verified *-homomorphism.
///
/// The kernel of a *-homomorphism is a sum of blocks, so the numerical null
/// space of the coordinate matrix must have dimension `sum_{k in S} d_k^2`.
pub fn kernel_blocks(phi: &OperatorMap, tol: &Tolerance) -> Result<IdealBlocks> {
    require_homomorphism(phi)?;
    let dom = phi.domain();
    let killed: Vec<usize> = (0..dom.num_blocks())
        .filter(|&k| {
            dom.block_range(k)
                .all(|i| phi.matrix().column(i).norm() <= tol.eq_tol)
        })
        .collect();
    let ideal = IdealBlocks::new(dom, killed)?;
    let nullity = dom.dim() - rank(phi.matrix(), RANK_THRESHOLD);
    if nullity != ideal.dim() {
        return Err(Error::Structural(format!(
            "null space has dimension {nullity} but the killed blocks span {}",
            ideal.dim()
        )));
    }
    Ok(ideal)
}

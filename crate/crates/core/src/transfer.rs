//! Transfer operators for a *-homomorphism `α: A → B`, and conditional
//! expectations onto `α(A)`.
//!
//! A transfer operator is a positive linear `Λ: B → A` with
//! `Λ(α(a) b) = a Λ(b)`. For an endomorphism `B = A`; the general form lets
//! isometry-family models live at finite dimension.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cstar::{
    is_positive_map, kernel_blocks, require_homomorphism, AlgebraElement, BlockAlgebra,
    IdealBlocks, MatrixUnit, OperatorMap, PositivityVerdict, Role, Tolerance,
};
use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eigen, max_abs, solve_checked, CMat, CVec, Subspace, RANK_THRESHOLD, ZERO,
};

/// Number of random samples used by positivity checks inside verifications.
pub const POSITIVITY_TRIALS: usize = 32;
const POSITIVITY_SEED: u64 = 0x7472_616e_7366_6572;
/// Relative residual allowed when inverting `α` on the annihilator of its kernel.
pub const SOLVE_REL_BOUND: f64 = 1e-8;

/// Worst residuals observed while verifying a transfer operator.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TransferResiduals {
    /// `max ||Λ(α(e_i) e_j) - e_i Λ(e_j)||` over basis pairs.
    pub identity: f64,
    /// `max ||Λ(e_j α(e_i)) - Λ(e_j) e_i||` over basis pairs.
    pub symmetrized: f64,
    /// Distance of `Λ(1)` from the center.
    pub centrality: f64,
}

/// A verified transfer operator together with the homomorphism it belongs to.
#[derive(Clone, Debug)]
pub struct TransferOperator {
    map: OperatorMap,
    endo: OperatorMap,
    certified_cp: bool,
    nondegenerate: Option<bool>,
    complete: Option<bool>,
    residuals: TransferResiduals,
}

impl TransferOperator {
    /// The map `Λ: B → A`.
    pub fn map(&self) -> &OperatorMap {
        &self.map
    }

    /// The paired homomorphism `α: A → B`.
    pub fn endo(&self) -> &OperatorMap {
        &self.endo
    }

    pub fn apply(&self, b: &AlgebraElement) -> AlgebraElement {
        self.map.apply(b)
    }

    pub fn nondegenerate(&self) -> Option<bool> {
        self.nondegenerate
    }

    pub fn complete(&self) -> Option<bool> {
        self.complete
    }

    pub fn residuals(&self) -> TransferResiduals {
        self.residuals
    }

    /// Whether positivity was certified through the Choi matrices (as opposed
    /// to passing the sampling fallback).
    pub fn certified_cp(&self) -> bool {
        self.certified_cp
    }

    /// `Λ(1)`.
    pub fn unit_image(&self) -> AlgebraElement {
        self.map.apply(&self.map.domain().identity())
    }

    /// Frobenius distance between coordinate matrices.
    pub fn distance(&self, other: &TransferOperator) -> f64 {
        self.map.distance(&other.map)
    }

    pub(crate) fn mark_complete(mut self) -> Self {
        self.complete = Some(true);
        self
    }
}

fn identity_residuals(endo: &OperatorMap, lam: &OperatorMap) -> (f64, usize, usize, f64) {
    let a_alg = endo.domain();
    let b_alg = endo.codomain();
    let alpha_imgs: Vec<AlgebraElement> = (0..a_alg.dim()).map(|i| endo.image_of_basis(i)).collect();
    let lam_imgs: Vec<AlgebraElement> = (0..b_alg.dim()).map(|j| lam.image_of_basis(j)).collect();
    let mut worst = (0.0f64, 0usize, 0usize);
    let mut worst_sym = 0.0f64;
    let mut entries = Vec::new();
    let mut rhs = CVec::zeros(a_alg.dim());
    let mut lhs = CVec::zeros(a_alg.dim());

    for ia in 0..a_alg.dim() {
        let ua = a_alg.unit_at(ia);
        let x = &alpha_imgs[ia];
        for ib in 0..b_alg.dim() {
            let ub = b_alg.unit_at(ib);
            let xl = x.block(ub.block);
            let dl = xl.nrows();
            let y = lam_imgs[ib].block(ua.block);
            let dk = y.nrows();

            // Λ(α(e_a) E_pq) against e_a Λ(E_pq)
            entries.clear();
            for r in 0..dl {
                let z = xl[(r, ub.row)];
                if z != ZERO {
                    entries.push((b_alg.index_of(MatrixUnit { block: ub.block, row: r, col: ub.col }), z));
                }
            }
            lam.apply_sparse_into(&entries, &mut lhs);
            rhs.fill(ZERO);
            for c in 0..dk {
                rhs[a_alg.index_of(MatrixUnit { block: ua.block, row: ua.row, col: c })] = y[(ua.col, c)];
            }
            lhs -= &rhs;
            let r = lhs.norm();
            if r > worst.0 {
                worst = (r, ia, ib);
            }

            // Λ(E_pq α(e_a)) against Λ(E_pq) e_a
            entries.clear();
            for c in 0..dl {
                let z = xl[(ub.col, c)];
                if z != ZERO {
                    entries.push((b_alg.index_of(MatrixUnit { block: ub.block, row: ub.row, col: c }), z));
                }
            }
            lam.apply_sparse_into(&entries, &mut lhs);
            rhs.fill(ZERO);
            for r in 0..dk {
                rhs[a_alg.index_of(MatrixUnit { block: ua.block, row: r, col: ua.col })] = y[(r, ua.row)];
            }
            lhs -= &rhs;
            worst_sym = worst_sym.max(lhs.norm());
        }
    }
    (worst.0, worst.1, worst.2, worst_sym)
}

/// Verifies that `cand: B → A` is a transfer operator for `endo: A → B`.
///
/// Checks positivity, the transfer identity and its adjoint form on every
/// pair of matrix units, and centrality of `Λ(1)`. Non-degeneracy is
/// evaluated as well and recorded on the result.
pub fn verify_transfer(endo: &OperatorMap, cand: &OperatorMap, tol: &Tolerance) -> Result<TransferOperator> {
    require_homomorphism(endo)?;
    if cand.domain() != endo.codomain() || cand.codomain() != endo.domain() {
        return Err(Error::ShapeMismatch(
            "candidate must map the codomain of the endomorphism back to its domain".into(),
        ));
    }
    let verdict = is_positive_map(cand, POSITIVITY_TRIALS, POSITIVITY_SEED, tol);
    if let PositivityVerdict::NotPositive { witness } = verdict {
        return Err(Error::PositivityFailure {
            what: "candidate maps x x* outside the positive cone".into(),
            witness: Box::new(witness),
        });
    }
    let (identity, a, b, symmetrized) = identity_residuals(endo, cand);
    if identity > tol.eq_tol {
        return Err(Error::IdentityViolation { a, b, residual: identity });
    }
    if symmetrized > tol.eq_tol {
        return Err(Error::Structural(format!(
            "adjoint transfer identity fails, residual {symmetrized:.3e}"
        )));
    }
    let unit_image = cand.apply(&cand.domain().identity());
    let centrality = unit_image.centrality_residual();
    if centrality > tol.eq_tol {
        return Err(Error::Structural(format!("Λ(1) is not central, residual {centrality:.3e}")));
    }
    let mut t = TransferOperator {
        map: cand.clone().unverified().with_role(Role::Positive).with_role(Role::Transfer),
        endo: endo.clone(),
        certified_cp: verdict == PositivityVerdict::CertifiedCp,
        nondegenerate: None,
        complete: None,
        residuals: TransferResiduals {
            identity,
            symmetrized,
            centrality,
        },
    };
    t.nondegenerate = Some(is_nondegenerate(&t, tol)?);
    Ok(t)
}

/// Residuals of the two non-degeneracy conditions:
/// `||α(Λ(1)) - α(1)||` and `max_i ||α(Λ(α(e_i))) - α(e_i)||`.
pub fn nondegeneracy_residuals(t: &TransferOperator) -> (f64, f64) {
    let alpha = t.endo();
    let lam = t.map();
    let one_b = lam.domain().identity();
    let unit = alpha.apply(&alpha.domain().identity());
    let r_unit = alpha.apply(&lam.apply(&one_b)).distance(&unit);
    let m = alpha.matrix();
    let composite = m * (lam.matrix() * m) - m;
    let r_comp = (0..composite.ncols())
        .map(|j| composite.column(j).norm())
        .fold(0.0, f64::max);
    (r_unit, r_comp)
}

/// Non-degeneracy, decided by `α(Λ(1)) = α(1)` and cross-checked against
/// `α∘Λ∘α = α`. Disagreement is reported as an error.
pub fn is_nondegenerate(t: &TransferOperator, tol: &Tolerance) -> Result<bool> {
    let (r_unit, r_comp) = nondegeneracy_residuals(t);
    let by_unit = r_unit <= tol.eq_tol;
    let by_comp = r_comp <= tol.eq_tol;
    if by_unit != by_comp {
        return Err(Error::EquivalenceViolation {
            unit_residual: r_unit,
            composite_residual: r_comp,
        });
    }
    Ok(by_unit)
}

/// The unit of `ker α`, a central projection with `α(q) = 0`.
pub fn kernel_unit(endo: &OperatorMap, tol: &Tolerance) -> Result<AlgebraElement> {
    Ok(kernel_blocks(endo, tol)?.unit())
}

/// The annihilator `(ker α)⊥`, i.e. the blocks `α` does not kill.
pub fn annihilator_projection(endo: &OperatorMap, tol: &Tolerance) -> Result<IdealBlocks> {
    Ok(kernel_blocks(endo, tol)?.complement())
}

/// The corner `pBp` cut out by a projection `p`.
#[derive(Clone, Debug)]
pub struct Corner {
    unit: AlgebraElement,
    basis: Vec<AlgebraElement>,
    subspace: Subspace,
}

impl Corner {
    /// Builds the corner from the projection `p`; each block of `p` is
    /// diagonalized and `V E_ij V*` over its range gives an orthonormal basis.
    pub fn from_projection(p: &AlgebraElement, tol: &Tolerance) -> Result<Self> {
        let sq = p * p;
        let r = sq.distance(p).max(p.hermitian_residual());
        if r > tol.eq_tol {
            return Err(Error::Structural(format!("corner unit is not a projection, residual {r:.3e}")));
        }
        let alg = p.algebra();
        let mut basis = Vec::new();
        for l in 0..alg.num_blocks() {
            let eig = hermitian_eigen(p.block(l));
            let cols: Vec<usize> = (0..eig.values.len()).filter(|&i| eig.values[i] > 0.5).collect();
            for &i in &cols {
                for &j in &cols {
                    let vi = eig.vectors.column(i);
                    let vj = eig.vectors.column(j);
                    let mut e = alg.zero();
                    let mut blocks: Vec<CMat> = e.blocks().to_vec();
                    blocks[l] = vi * vj.adjoint();
                    e = AlgebraElement::new(alg, blocks)?;
                    basis.push(e);
                }
            }
        }
        let mut m = CMat::zeros(alg.dim(), basis.len());
        for (c, e) in basis.iter().enumerate() {
            m.set_column(c, &e.coords());
        }
        Ok(Corner {
            unit: p.clone(),
            basis,
            subspace: Subspace::from_orthonormal(m),
        })
    }

    pub fn unit(&self) -> &AlgebraElement {
        &self.unit
    }

    pub fn basis(&self) -> &[AlgebraElement] {
        &self.basis
    }

    pub fn subspace(&self) -> &Subspace {
        &self.subspace
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn compress(&self, b: &AlgebraElement) -> AlgebraElement {
        &(&self.unit * b) * &self.unit
    }

    /// `b ↦ p b p` as a map on the ambient algebra.
    pub fn compression(&self) -> OperatorMap {
        let alg = self.unit.algebra();
        OperatorMap::from_fn(alg, alg, |b| self.compress(b)).expect("compression stays in the algebra")
    }

    /// `||p b p - b||`.
    pub fn residual(&self, b: &AlgebraElement) -> f64 {
        self.compress(b).distance(b)
    }
}

/// The range `α(A)` as a subalgebra with unit `α(1)`.
#[derive(Clone, Debug)]
pub struct RangeAlgebra {
    unit: AlgebraElement,
    spanning: Vec<AlgebraElement>,
    subspace: Subspace,
}

impl RangeAlgebra {
    /// `spanning` must span the subalgebra; `unit` is its unit.
    pub fn new(unit: AlgebraElement, spanning: Vec<AlgebraElement>) -> Result<Self> {
        let alg = unit.algebra().clone();
        let mut m = CMat::zeros(alg.dim(), spanning.len());
        for (c, e) in spanning.iter().enumerate() {
            if e.algebra() != &alg {
                return Err(Error::ShapeMismatch("range element in the wrong algebra".into()));
            }
            m.set_column(c, &e.coords());
        }
        Ok(RangeAlgebra {
            unit,
            spanning,
            subspace: Subspace::column_space(&m, RANK_THRESHOLD),
        })
    }

    pub fn of_homomorphism(endo: &OperatorMap) -> Self {
        let spanning: Vec<AlgebraElement> = (0..endo.domain().dim())
            .map(|i| endo.image_of_basis(i))
            .filter(|e| e.frobenius_norm() > 0.0)
            .collect();
        let unit = endo.apply(&endo.domain().identity());
        RangeAlgebra::new(unit, spanning).expect("images lie in the codomain")
    }

    pub fn unit(&self) -> &AlgebraElement {
        &self.unit
    }

    pub fn spanning(&self) -> &[AlgebraElement] {
        &self.spanning
    }

    pub fn subspace(&self) -> &Subspace {
        &self.subspace
    }

    pub fn dim(&self) -> usize {
        self.subspace.dim()
    }
}

/// Range, corner and the comparison between them.
#[derive(Clone, Debug)]
pub struct RangeStructure {
    pub range: RangeAlgebra,
    pub corner: Corner,
    /// `max_i ||p α(e_i) p - α(e_i)||`; must vanish.
    pub containment_residual: f64,
}

impl RangeStructure {
    pub fn range_dim(&self) -> usize {
        self.range.dim()
    }

    pub fn corner_dim(&self) -> usize {
        self.corner.dim()
    }

    pub fn is_hereditary(&self) -> bool {
        self.range_dim() == self.corner_dim()
    }
}

pub fn range_structure(endo: &OperatorMap, tol: &Tolerance) -> Result<RangeStructure> {
    require_homomorphism(endo)?;
    let range = RangeAlgebra::of_homomorphism(endo);
    let corner = Corner::from_projection(range.unit(), tol)?;
    let containment_residual = range
        .spanning()
        .iter()
        .map(|e| corner.residual(e))
        .fold(0.0, f64::max);
    if containment_residual > tol.eq_tol {
        return Err(Error::Structural(format!(
            "range is not contained in the corner, residual {containment_residual:.3e}"
        )));
    }
    Ok(RangeStructure {
        range,
        corner,
        containment_residual,
    })
}

/// `α(A) = α(1) B α(1)`, decided by comparing dimensions.
pub fn is_hereditary_range(endo: &OperatorMap, tol: &Tolerance) -> Result<bool> {
    Ok(range_structure(endo, tol)?.is_hereditary())
}

/// Solves `α(x) = rhs_j` with `x` in the annihilator of `ker α`, for every
/// column of `rhs`, and assembles `Λ` with those solutions as images.
fn invert_on_annihilator(endo: &OperatorMap, rhs: &CMat, tol: &Tolerance) -> Result<OperatorMap> {
    let ann = annihilator_projection(endo, tol)?;
    let coords = ann.coordinates();
    let a_alg = endo.domain();
    let b_alg = endo.codomain();
    let restricted = CMat::from_fn(b_alg.dim(), coords.len(), |r, c| endo.matrix()[(r, coords[c])]);
    let x = solve_checked(&restricted, rhs, SOLVE_REL_BOUND)?;
    let mut lam = CMat::zeros(a_alg.dim(), b_alg.dim());
    for (row, &i) in coords.iter().enumerate() {
        lam.set_row(i, &x.row(row));
    }
    OperatorMap::new(b_alg, a_alg, lam)
}

/// The complete transfer operator `Λ(b) = α⁻¹(α(1) b α(1))`.
///
/// Exists exactly when the range is hereditary (kernels are always unital
/// here). The result is verified, non-degenerate, and satisfies
/// `α(Λ(b)) = α(1) b α(1)`.
pub fn complete_transfer(endo: &OperatorMap, tol: &Tolerance) -> Result<TransferOperator> {
    let rs = range_structure(endo, tol)?;
    if !rs.is_hereditary() {
        return Err(Error::NotHereditary {
            range_dim: rs.range_dim(),
            corner_dim: rs.corner_dim(),
        });
    }
    let compression = rs.corner.compression();
    let lam = invert_on_annihilator(endo, compression.matrix(), tol)?;
    let t = verify_transfer(endo, &lam, tol)?;
    if t.nondegenerate() != Some(true) {
        return Err(Error::Structural("complete candidate is degenerate".into()));
    }
    let defining = endo.compose(t.map())?.distance(&compression);
    if defining > tol.eq_tol {
        return Err(Error::Structural(format!(
            "α(Λ(b)) differs from α(1) b α(1) by {defining:.3e}"
        )));
    }
    Ok(t.mark_complete())
}

/// Residuals recorded while verifying a conditional expectation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ExpectationResiduals {
    pub idempotence: f64,
    pub range_identity: f64,
    pub range_containment: f64,
    pub module: f64,
}

/// A conditional expectation from the corner `α(1) B α(1)` onto `α(A)`.
///
/// Stored as a map on the whole of `B` that factors through the compression
/// `b ↦ α(1) b α(1)`.
#[derive(Clone, Debug)]
pub struct ConditionalExpectation {
    map: OperatorMap,
    range: RangeAlgebra,
    certified_cp: bool,
    residuals: ExpectationResiduals,
}

impl ConditionalExpectation {
    pub fn map(&self) -> &OperatorMap {
        &self.map
    }

    pub fn range(&self) -> &RangeAlgebra {
        &self.range
    }

    pub fn residuals(&self) -> ExpectationResiduals {
        self.residuals
    }

    pub fn certified_cp(&self) -> bool {
        self.certified_cp
    }

    pub fn apply(&self, b: &AlgebraElement) -> AlgebraElement {
        self.map.apply(b)
    }

    pub fn distance(&self, other: &ConditionalExpectation) -> f64 {
        self.map.distance(&other.map)
    }
}

enum ModuleCheck {
    Exhaustive,
    Sampled { trials: usize, seed: u64 },
}

/// Above this many multiply-adds the module property is checked on random
/// triples instead of basis pairs.
const MODULE_EXHAUSTIVE_BUDGET: usize = 50_000_000;

fn random_combination(elems: &[AlgebraElement], rng: &mut ChaCha8Rng) -> AlgebraElement {
    let mut acc = elems[0].algebra().zero();
    for e in elems {
        let z = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        acc = &acc + &e.scale(z);
    }
    acc
}

fn check_expectation(
    raw: &OperatorMap,
    range: &RangeAlgebra,
    module: ModuleCheck,
    tol: &Tolerance,
) -> Result<ConditionalExpectation> {
    let alg = range.unit().algebra();
    if raw.domain() != alg || raw.codomain() != alg {
        return Err(Error::ShapeMismatch("expectation must act on the algebra containing its range".into()));
    }
    let corner = Corner::from_projection(range.unit(), tol)?;
    let e = raw.compose(&corner.compression())?.unverified();

    let idempotence = (e.matrix() * e.matrix() - e.matrix()).norm();
    if idempotence > tol.eq_tol {
        return Err(Error::ExpectationAxiom { axiom: "idempotence", residual: idempotence });
    }
    let range_containment = (0..e.matrix().ncols())
        .map(|j| range.subspace().residual(&e.matrix().column(j).into_owned()))
        .fold(0.0, f64::max);
    if range_containment > tol.eq_tol {
        return Err(Error::ExpectationAxiom { axiom: "image in range", residual: range_containment });
    }
    let range_identity = range
        .spanning()
        .iter()
        .map(|r| e.apply(r).distance(r))
        .fold(0.0, f64::max);
    if range_identity > tol.eq_tol {
        return Err(Error::ExpectationAxiom { axiom: "identity on range", residual: range_identity });
    }

    let verdict = is_positive_map(&e, POSITIVITY_TRIALS, POSITIVITY_SEED, tol);
    if let PositivityVerdict::NotPositive { witness } = verdict {
        return Err(Error::PositivityFailure {
            what: "conditional expectation is not positive".into(),
            witness: Box::new(witness),
        });
    }

    let n = alg.dim();
    let module = match module {
        ModuleCheck::Exhaustive if range.spanning().len() * corner.dim() * n * n > MODULE_EXHAUSTIVE_BUDGET => {
            ModuleCheck::Sampled { trials: 48, seed: POSITIVITY_SEED }
        }
        m => m,
    };
    let mut worst = 0.0f64;
    match module {
        ModuleCheck::Exhaustive => {
            // E(xa) = xE(a) and E(ax) = E(a)x on spanning x and corner basis a
            // give E(xay) = xE(a)y by linearity.
            for a in corner.basis() {
                let ea = e.apply(a);
                for x in range.spanning() {
                    worst = worst.max(e.apply(&(x * a)).distance(&(x * &ea)));
                    worst = worst.max(e.apply(&(a * x)).distance(&(&ea * x)));
                }
            }
        }
        ModuleCheck::Sampled { trials, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            if !range.spanning().is_empty() && corner.dim() > 0 {
                for _ in 0..trials {
                    let x = random_combination(range.spanning(), &mut rng);
                    let y = random_combination(range.spanning(), &mut rng);
                    let a = random_combination(corner.basis(), &mut rng);
                    let lhs = e.apply(&(&(&x * &a) * &y));
                    let rhs = &(&x * &e.apply(&a)) * &y;
                    worst = worst.max(lhs.distance(&rhs));
                }
            }
        }
    }
    if worst > tol.eq_tol {
        return Err(Error::ExpectationAxiom { axiom: "module property", residual: worst });
    }

    Ok(ConditionalExpectation {
        map: e.with_role(Role::Positive).with_role(Role::Expectation),
        range: range.clone(),
        certified_cp: verdict == PositivityVerdict::CertifiedCp,
        residuals: ExpectationResiduals {
            idempotence,
            range_identity,
            range_containment,
            module: worst,
        },
    })
}

/// Checks that `map`, restricted to the corner cut out by the unit of
/// `range`, is a conditional expectation onto `range`: idempotent, positive,
/// the identity on the range, and a bimodule map over it (tested on
/// `trials` random triples).
pub fn verify_expectation(
    map: &OperatorMap,
    range: &RangeAlgebra,
    trials: usize,
    seed: u64,
    tol: &Tolerance,
) -> Result<ConditionalExpectation> {
    check_expectation(map, range, ModuleCheck::Sampled { trials: trials.max(1), seed }, tol)
}

/// As [`verify_expectation`], with the module property checked on every
/// pair of range spanning element and corner basis element (falling back to
/// sampling when that would be too costly).
pub fn verify_expectation_exhaustive(
    map: &OperatorMap,
    range: &RangeAlgebra,
    tol: &Tolerance,
) -> Result<ConditionalExpectation> {
    check_expectation(map, range, ModuleCheck::Exhaustive, tol)
}

/// `E = α ∘ Λ` on the corner `α(1) B α(1)`.
pub fn expectation_from_transfer(t: &TransferOperator, tol: &Tolerance) -> Result<ConditionalExpectation> {
    if t.nondegenerate() != Some(true) {
        return Err(Error::Degenerate);
    }
    let e = t.endo().compose(t.map())?;
    let range = RangeAlgebra::of_homomorphism(t.endo());
    check_expectation(&e, &range, ModuleCheck::Exhaustive, tol)
}

/// `Λ(b) = α⁻¹(E(α(1) b α(1)))`, verified non-degenerate, with the round
/// trip back to `E` checked.
pub fn transfer_from_expectation(
    endo: &OperatorMap,
    e: &ConditionalExpectation,
    tol: &Tolerance,
) -> Result<TransferOperator> {
    require_homomorphism(endo)?;
    if e.map().domain() != endo.codomain() {
        return Err(Error::ShapeMismatch("expectation acts on the wrong algebra".into()));
    }
    let own = RangeAlgebra::of_homomorphism(endo);
    let mismatch = own
        .subspace()
        .distance(e.range().subspace())
        .max(own.unit().distance(e.range().unit()));
    if mismatch > tol.eq_tol {
        return Err(Error::Structural(format!(
            "expectation range differs from α(A) by {mismatch:.3e}"
        )));
    }
    let lam = invert_on_annihilator(endo, e.map().matrix(), tol)?;
    let t = verify_transfer(endo, &lam, tol)?;
    if t.nondegenerate() != Some(true) {
        return Err(Error::Structural("transfer operator built from an expectation is degenerate".into()));
    }
    let back = endo.compose(t.map())?;
    let r = max_abs(&(back.matrix() - e.map().matrix()));
    if r > tol.eq_tol {
        return Err(Error::Structural(format!("round trip to the expectation is off by {r:.3e}")));
    }
    Ok(t)
}

/// Convenience: does `endo` go between the given algebras?
pub fn is_between(endo: &OperatorMap, domain: &BlockAlgebra, codomain: &BlockAlgebra) -> bool {
    endo.domain() == domain && endo.codomain() == codomain
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn zero_map_is_a_transfer_operator() {
        let alpha = corpus::sys_d_endo();
        let zero = OperatorMap::zero(alpha.codomain(), alpha.domain());
        let t = verify_transfer(&alpha, &zero, &tol()).unwrap();
        assert_eq!(t.nondegenerate(), Some(false));
    }

    #[test]
    fn sys_d_family_is_valid_and_nondegenerate() {
        let alpha = corpus::sys_d_endo();
        for t in [0.0, 0.25, 0.5, 1.0] {
            let lam = corpus::sys_d_transfer(t);
            let op = verify_transfer(&alpha, &lam, &tol()).unwrap();
            assert!(is_nondegenerate(&op, &tol()).unwrap(), "t = {t}");
            // oracle: Λ_t(1) = 0 ⊕ 1, so 1 - Λ_t(1) = 1_{M2} ⊕ 0
            let q = kernel_unit(&alpha, &tol()).unwrap();
            let one = alpha.domain().identity();
            assert!((&one - &op.unit_image()).distance(&q) < 1e-15);
        }
    }

    #[test]
    fn wrong_candidate_is_rejected_with_witness() {
        let alpha = corpus::sys_d_endo();
        // Λ(a ⊕ λ) = 0 ⊕ a22
        let alg = alpha.domain().clone();
        let mut m = CMat::zeros(5, 5);
        m[(4, 3)] = Complex64::new(1.0, 0.0);
        let lam = OperatorMap::new(&alg, &alg, m).unwrap();
        match verify_transfer(&alpha, &lam, &tol()) {
            Err(Error::IdentityViolation { a, b, residual }) => {
                // oracle: brute-force search for a violating pair
                let ea = alg.basis_element(a);
                let eb = alg.basis_element(b);
                let lhs = lam.apply(&(&alpha.apply(&ea) * &eb));
                let rhs = &ea * &lam.apply(&eb);
                assert!((lhs.distance(&rhs) - residual).abs() < 1e-14);
                assert!(residual > 0.5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_positive_candidate_is_rejected() {
        let alpha = corpus::sys_d_endo();
        let lam = corpus::sys_d_transfer(1.5);
        assert!(matches!(verify_transfer(&alpha, &lam, &tol()), Err(Error::PositivityFailure { .. })));
    }

    #[test]
    fn kernel_and_annihilator_of_sys_d() {
        let alpha = corpus::sys_d_endo();
        let ann = annihilator_projection(&alpha, &tol()).unwrap();
        assert_eq!(ann.blocks().iter().copied().collect::<Vec<_>>(), vec![1]);
        let q = kernel_unit(&alpha, &tol()).unwrap();
        assert_eq!(q.block(0), &CMat::identity(2, 2));
        assert_eq!(q.block(1)[(0, 0)], ZERO);
    }

    #[test]
    fn injective_endomorphism_has_trivial_kernel() {
        let alg = BlockAlgebra::new(vec![2, 1]).unwrap();
        let id = crate::cstar::verify_star_homomorphism(OperatorMap::identity(&alg), &tol()).unwrap();
        assert_eq!(kernel_unit(&id, &tol()).unwrap().frobenius_norm(), 0.0);
        assert_eq!(annihilator_projection(&id, &tol()).unwrap().blocks().len(), 2);
        assert!(is_hereditary_range(&id, &tol()).unwrap());
        let t = complete_transfer(&id, &tol()).unwrap();
        assert!(t.map().distance(&OperatorMap::identity(&alg)) < 1e-12);
    }

    #[test]
    fn sys_d_is_not_hereditary() {
        let alpha = corpus::sys_d_endo();
        let rs = range_structure(&alpha, &tol()).unwrap();
        assert_eq!((rs.range_dim(), rs.corner_dim()), (1, 2));
        assert!(matches!(complete_transfer(&alpha, &tol()), Err(Error::NotHereditary { .. })));
    }

    #[test]
    fn sys_d_expectations() {
        let alpha = corpus::sys_d_endo();
        let t = 0.3;
        let op = verify_transfer(&alpha, &corpus::sys_d_transfer(t), &tol()).unwrap();
        let e = expectation_from_transfer(&op, &tol()).unwrap();
        // oracle: E_t(x E11 ⊕ y) = (t x + (1-t) y)(E11 ⊕ 1)
        let alg = alpha.domain();
        let x = Complex64::new(2.0, 0.0);
        let y = Complex64::new(-1.0, 0.5);
        let mut b = alg.zero().coords();
        b[0] = x;
        b[4] = y;
        let arg = AlgebraElement::from_coords(alg, b.as_slice()).unwrap();
        let unit = alpha.apply(&alg.identity());
        let expected = unit.scale(x * t + y * (1.0 - t));
        assert!(e.apply(&arg).distance(&expected) < 1e-14);

        let back = transfer_from_expectation(&alpha, &e, &tol()).unwrap();
        assert!(back.distance(&op) < 1e-12);
    }

    #[test]
    fn expectation_of_sys_d_with_t_above_one_is_rejected() {
        let alpha = corpus::sys_d_endo();
        let alg = alpha.domain().clone();
        let t = 1.3;
        let unit = alpha.apply(&alg.identity());
        let e = OperatorMap::from_fn(&alg, &alg, |b| {
            let c = b.coords();
            unit.scale(c[0] * t + c[4] * (1.0 - t))
        })
        .unwrap();
        let range = RangeAlgebra::of_homomorphism(&alpha);
        match verify_expectation(&e, &range, 16, 3, &tol()) {
            Err(Error::PositivityFailure { witness, .. }) => {
                let image = e.apply(&(&*witness * &witness.adjoint()));
                assert!(!crate::cstar::is_positive_element(&image, &tol()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn normalized_trace_is_an_expectation() {
        // scalars inside M2 via λ ↦ λ I2; the expectation is the normalized trace
        let family = corpus::sys_c();
        let alpha = crate::bh::endo_from_isometries(&family);
        let m2 = alpha.codomain().clone();
        let tr = OperatorMap::from_fn(&m2, &m2, |b| {
            let t = crate::linalg::trace(b.block(0)) * 0.5;
            m2.identity().scale(t)
        })
        .unwrap();
        let range = RangeAlgebra::of_homomorphism(&alpha);
        let e = verify_expectation(&tr, &range, 16, 1, &tol()).unwrap();
        assert!(e.certified_cp());
        let identity_on_corner = OperatorMap::identity(&m2);
        assert!(verify_expectation(&identity_on_corner, &range, 8, 1, &tol()).is_err());
    }

    #[test]
    fn degenerate_operator_has_no_expectation() {
        let alpha = corpus::sys_d_endo();
        let zero = OperatorMap::zero(alpha.codomain(), alpha.domain());
        let t = verify_transfer(&alpha, &zero, &tol()).unwrap();
        assert!(matches!(expectation_from_transfer(&t, &tol()), Err(Error::Degenerate)));
    }

    #[test]
    fn unverified_endomorphism_is_refused() {
        let alg = BlockAlgebra::new(vec![1]).unwrap();
        let id = OperatorMap::identity(&alg);
        assert!(matches!(verify_transfer(&id, &id, &tol()), Err(Error::NotHomomorphism(_))));
    }
}

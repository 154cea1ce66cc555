//! The correspondence `M = α(1) B` over a *-homomorphism `α: A → B`, with
//! left action `a·x = α(a) x`, right action `x·b = x b` and right inner
//! product `⟨x, y⟩ = x* y`. A complete transfer operator supplies the left
//! inner product `_A⟨x, y⟩ = Λ(x y*)`, turning `M` into a Hilbert bimodule.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cstar::{is_positive_element, require_homomorphism, AlgebraElement, OperatorMap, Tolerance};
use crate::error::{Error, Result};
use crate::linalg::{orthonormalize_columns, CMat, RANK_THRESHOLD};
use crate::transfer::{complete_transfer, verify_transfer, TransferOperator};

const FAITHFULNESS_SAMPLES: usize = 16;
const FAITHFULNESS_SEED: u64 = 0x6269_6d6f_6475_6c65;

/// `M = α(1) B` with its module structure.
#[derive(Clone, Debug)]
pub struct Correspondence {
    endo: OperatorMap,
    unit: AlgebraElement,
    basis: Vec<AlgebraElement>,
}

impl Correspondence {
    pub fn endo(&self) -> &OperatorMap {
        &self.endo
    }

    /// `α(1)`.
    pub fn unit(&self) -> &AlgebraElement {
        &self.unit
    }

    /// Orthonormal (in coordinates) basis of `M`.
    pub fn basis(&self) -> &[AlgebraElement] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `a·x = α(a) x`.
    pub fn left_action(&self, a: &AlgebraElement, x: &AlgebraElement) -> AlgebraElement {
        &self.endo.apply(a) * x
    }

    /// `x·b = x b`.
    pub fn right_action(&self, x: &AlgebraElement, b: &AlgebraElement) -> AlgebraElement {
        x * b
    }

    /// `⟨x, y⟩ = x* y`.
    pub fn right_inner(&self, x: &AlgebraElement, y: &AlgebraElement) -> AlgebraElement {
        &x.adjoint() * y
    }

    /// `||α(1) x - x||`.
    pub fn membership_residual(&self, x: &AlgebraElement) -> f64 {
        (&self.unit * x).distance(x)
    }
}

/// Builds `M` from `{α(1) e_i}` reduced to an independent set.
pub fn build_correspondence(endo: &OperatorMap, tol: &Tolerance) -> Result<Correspondence> {
    require_homomorphism(endo)?;
    let alg = endo.codomain();
    let unit = endo.apply(&endo.domain().identity());
    let mut spanning = CMat::zeros(alg.dim(), alg.dim());
    for (i, e) in alg.basis().enumerate() {
        spanning.set_column(i, &(&unit * &e).coords());
    }
    let q = orthonormalize_columns(&spanning, RANK_THRESHOLD);
    let basis: Vec<AlgebraElement> = (0..q.ncols())
        .map(|c| {
            let col: Vec<Complex64> = q.column(c).iter().copied().collect();
            AlgebraElement::from_coords(alg, &col).expect("codomain coordinates")
        })
        .collect();
    let c = Correspondence {
        endo: endo.clone(),
        unit,
        basis,
    };
    for x in c.basis() {
        let r = c.membership_residual(x);
        if r > tol.eq_tol {
            return Err(Error::BimoduleAxiom { axiom: "unit acts trivially", residual: r });
        }
        if !is_positive_element(&c.right_inner(x, x), tol) {
            return Err(Error::BimoduleAxiom { axiom: "right inner positivity", residual: f64::NAN });
        }
    }
    Ok(c)
}

/// A candidate left inner product `_A⟨x, y⟩ = K(x y*)` given by a map `K: B → A`.
#[derive(Clone, Debug)]
pub struct LeftInner {
    form: OperatorMap,
}

impl LeftInner {
    /// Wraps `K` without checking any axiom.
    pub fn candidate(form: OperatorMap) -> Self {
        LeftInner { form }
    }

    pub fn form(&self) -> &OperatorMap {
        &self.form
    }

    pub fn eval(&self, x: &AlgebraElement, y: &AlgebraElement) -> AlgebraElement {
        self.form.apply(&(x * &y.adjoint()))
    }
}

fn random_member(c: &Correspondence, rng: &mut ChaCha8Rng) -> AlgebraElement {
    let mut acc = c.unit.algebra().zero();
    for b in c.basis() {
        let z = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        acc = &acc + &b.scale(z);
    }
    acc
}

/// Checks positivity, faithfulness and left linearity of a candidate on `M`.
pub fn check_left_inner(c: &Correspondence, l: &LeftInner, tol: &Tolerance) -> Result<()> {
    if l.form.domain() != c.endo.codomain() || l.form.codomain() != c.endo.domain() {
        return Err(Error::ShapeMismatch("left inner product has the wrong shape".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(FAITHFULNESS_SEED);
    let mut samples: Vec<AlgebraElement> = c.basis().to_vec();
    if c.dim() > 0 {
        samples.extend((0..FAITHFULNESS_SAMPLES).map(|_| random_member(c, &mut rng)));
    }
    for x in &samples {
        let xx = l.eval(x, x);
        if !is_positive_element(&xx, tol) {
            return Err(Error::BimoduleAxiom { axiom: "left inner positivity", residual: xx.hermitian_residual() });
        }
        let nx = x.norm();
        if xx.norm() <= tol.eq_tol && nx > tol.eq_tol {
            return Err(Error::BimoduleAxiom { axiom: "left inner faithfulness", residual: nx });
        }
    }
    let a_alg = c.endo.domain();
    let mut worst = 0.0f64;
    for a in a_alg.basis() {
        for x in c.basis() {
            let ax = c.left_action(&a, x);
            for y in c.basis() {
                worst = worst.max(l.eval(&ax, y).distance(&(&a * &l.eval(x, y))));
            }
        }
    }
    if worst > tol.eq_tol {
        return Err(Error::BimoduleAxiom { axiom: "left linearity", residual: worst });
    }
    Ok(())
}

/// `_A⟨x, y⟩ = Λ(x y*)` for the complete transfer operator, with its axioms checked.
pub fn left_inner_from_transfer(c: &Correspondence, t: &TransferOperator, tol: &Tolerance) -> Result<LeftInner> {
    if t.complete() != Some(true) {
        return Err(Error::NotComplete);
    }
    let mismatch = t.endo().distance(&c.endo);
    if mismatch > tol.eq_tol {
        return Err(Error::ShapeMismatch("transfer operator belongs to another homomorphism".into()));
    }
    let l = LeftInner::candidate(t.map().clone());
    check_left_inner(c, &l, tol)?;
    Ok(l)
}

/// Outcome of [`check_imprimitivity`].
#[derive(Clone, Debug, PartialEq)]
pub struct ImprimitivityVerdict {
    pub holds: bool,
    /// First basis triple `(x, y, z)` whose residual exceeds the tolerance.
    pub witness: Option<(usize, usize, usize)>,
    pub max_residual: f64,
}

/// `x·⟨y, z⟩ = _A⟨x, y⟩·z` on all basis triples of `M`.
pub fn check_imprimitivity(c: &Correspondence, l: &LeftInner, tol: &Tolerance) -> ImprimitivityVerdict {
    let basis = c.basis();
    let mut witness = None;
    let mut max_residual = 0.0f64;
    for (i, x) in basis.iter().enumerate() {
        for (j, y) in basis.iter().enumerate() {
            let left_ip = c.endo.apply(&l.eval(x, y));
            let xy = x * &y.adjoint();
            for (k, z) in basis.iter().enumerate() {
                let r = (&xy * z).distance(&(&left_ip * z));
                if r > max_residual {
                    max_residual = r;
                }
                if r > tol.eq_tol && witness.is_none() {
                    witness = Some((i, j, k));
                }
            }
        }
    }
    ImprimitivityVerdict {
        holds: witness.is_none(),
        witness,
        max_residual,
    }
}

/// `Λ(b) = _A⟨α(1) b, α(1)⟩`, verified and compared with the complete
/// transfer operator.
pub fn transfer_from_left_inner(c: &Correspondence, l: &LeftInner, tol: &Tolerance) -> Result<TransferOperator> {
    check_left_inner(c, l, tol)?;
    let verdict = check_imprimitivity(c, l, tol);
    if !verdict.holds {
        return Err(Error::BimoduleAxiom { axiom: "imprimitivity", residual: verdict.max_residual });
    }
    let alg = c.endo.codomain();
    let lam = OperatorMap::from_fn(alg, c.endo.domain(), |b| l.eval(&(&c.unit * b), &c.unit))?;
    let t = verify_transfer(&c.endo, &lam, tol)?;
    let reference = complete_transfer(&c.endo, tol)?;
    let r = t.distance(&reference);
    if r > tol.eq_tol {
        return Err(Error::Structural(format!(
            "operator from the left inner product differs from the complete one by {r:.3e}"
        )));
    }
    Ok(reference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bh::{endo_from_isometries, make_isometry_family};
    use crate::commutative::{endo_from_system, sample_nondegenerate};
    use crate::corpus;
    use crate::cstar::{verify_star_homomorphism, BlockAlgebra};
    use crate::linalg::{max_abs, random_gaussian};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn identity_correspondence() {
        let alg = BlockAlgebra::new(vec![2, 1]).unwrap();
        let id = verify_star_homomorphism(OperatorMap::identity(&alg), &tol()).unwrap();
        let c = build_correspondence(&id, &tol()).unwrap();
        assert_eq!(c.dim(), 5);
        let t = complete_transfer(&id, &tol()).unwrap();
        let l = left_inner_from_transfer(&c, &t, &tol()).unwrap();
        assert!(check_imprimitivity(&c, &l, &tol()).holds);
        let back = transfer_from_left_inner(&c, &l, &tol()).unwrap();
        assert!(back.map().distance(&OperatorMap::identity(&alg)) < 1e-12);
    }

    #[test]
    fn sys_b_bimodule() {
        let s = corpus::sys_b();
        let alpha = endo_from_system(&s);
        let c = build_correspondence(&alpha, &tol()).unwrap();
        assert_eq!(c.dim(), 1);
        let unit = c.unit().clone();
        assert_eq!(unit.coords().iter().map(|z| z.re).collect::<Vec<_>>(), vec![1.0, 0.0]);
        let t = complete_transfer(&alpha, &tol()).unwrap();
        let l = left_inner_from_transfer(&c, &t, &tol()).unwrap();
        let ip = l.eval(&unit, &unit);
        assert_eq!(ip.coords().iter().map(|z| z.re).collect::<Vec<_>>(), vec![0.0, 1.0]);
        let zero = alpha.codomain().zero();
        assert_eq!(l.eval(&zero, &zero).frobenius_norm(), 0.0);
        assert!(check_imprimitivity(&c, &l, &tol()).holds);
        let back = transfer_from_left_inner(&c, &l, &tol()).unwrap();
        assert!(back.distance(&t) < 1e-15);

        let doubled = LeftInner::candidate(t.map().scale(2.0));
        let v = check_imprimitivity(&c, &doubled, &tol());
        assert!(!v.holds);
        assert_eq!(v.witness, Some((0, 0, 0)));
        assert!((v.max_residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sys_c_correspondence_is_everything() {
        let f = corpus::sys_c();
        let alpha = endo_from_isometries(&f);
        let c = build_correspondence(&alpha, &tol()).unwrap();
        assert_eq!(c.dim(), 4);
        assert_eq!(c.unit().block(0), &CMat::identity(2, 2));
    }

    #[test]
    fn single_isometry_left_inner_product() {
        let f = make_isometry_family(1, 2, 3).unwrap();
        let alpha = endo_from_isometries(&f);
        let c = build_correspondence(&alpha, &tol()).unwrap();
        let t = complete_transfer(&alpha, &tol()).unwrap();
        let l = left_inner_from_transfer(&c, &t, &tol()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = f.u();
        for _ in 0..5 {
            let x = &c.unit().clone() * &AlgebraElement::new(alpha.codomain(), vec![random_gaussian(2, 2, &mut rng)]).unwrap();
            let y = &c.unit().clone() * &AlgebraElement::new(alpha.codomain(), vec![random_gaussian(2, 2, &mut rng)]).unwrap();
            let expected = u.adjoint() * x.block(0) * y.block(0).adjoint() * u;
            assert!(max_abs(&(l.eval(&x, &y).block(0) - expected)) < 1e-12);
        }
        let back = transfer_from_left_inner(&c, &l, &tol()).unwrap();
        let a = AlgebraElement::new(alpha.codomain(), vec![random_gaussian(2, 2, &mut rng)]).unwrap();
        assert!(max_abs(&(back.apply(&a).block(0) - u.adjoint() * a.block(0) * u)) < 1e-12);
    }

    #[test]
    fn positivity_identity_from_complete_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rep = corpus::random_hereditary_endomorphism(&[2, 2, 1], &mut rng);
        let alpha = rep.endo();
        let c = build_correspondence(&alpha, &tol()).unwrap();
        let t = complete_transfer(&alpha, &tol()).unwrap();
        let l = left_inner_from_transfer(&c, &t, &tol()).unwrap();
        for _ in 0..10 {
            let blocks = alpha.codomain().block_dims().iter().map(|&d| random_gaussian(d, d, &mut rng)).collect();
            let a = AlgebraElement::new(alpha.codomain(), blocks).unwrap();
            let pa = c.unit() * &a;
            let lhs = l.eval(&pa, &pa);
            let rhs = t.apply(&(&(&pa * &a.adjoint()) * c.unit()));
            assert!(lhs.distance(&rhs) < 1e-12);
            assert!(is_positive_element(&lhs, &tol()));
        }
    }

    #[test]
    fn non_hereditary_systems_fail_imprimitivity() {
        let s = corpus::sys_a();
        let alpha = endo_from_system(&s);
        let c = build_correspondence(&alpha, &tol()).unwrap();
        let t = sample_nondegenerate(&s, 1, &tol()).unwrap();
        assert!(matches!(left_inner_from_transfer(&c, &t, &tol()), Err(Error::NotComplete)));
        let v = check_imprimitivity(&c, &LeftInner::candidate(t.map().clone()), &tol());
        assert!(!v.holds);

        let d = corpus::sys_d_endo();
        let c = build_correspondence(&d, &tol()).unwrap();
        for t in [0.0, 0.5, 1.0] {
            let v = check_imprimitivity(&c, &LeftInner::candidate(corpus::sys_d_transfer(t)), &tol());
            assert!(!v.holds, "t = {t}");
        }
    }
}

//! Positivity of elements and of linear maps.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::algebra::{AlgebraElement, BlockAlgebra, Tolerance};
use super::map::OperatorMap;
use crate::linalg::{
    hermitian_eigen, hermitian_residual, random_gaussian, shifted_cholesky_succeeds, CMat,
    JACOBI_MAX_ORDER,
};

/// Outcome of [`is_positive_map`].
#[derive(Clone, Debug, PartialEq)]
pub enum PositivityVerdict {
    /// Every blockwise Choi matrix is positive semidefinite.
    CertifiedCp,
    /// Not certified completely positive, but every sampled `φ(xx*)` was positive.
    SampledPositive,
    /// `φ(xx*)` fails to be positive for the returned `x`.
    NotPositive { witness: AlgebraElement },
}

impl PositivityVerdict {
    pub fn is_positive(&self) -> bool {
        !matches!(self, PositivityVerdict::NotPositive { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            PositivityVerdict::CertifiedCp => "certified_cp",
            PositivityVerdict::SampledPositive => "sampled_positive",
            PositivityVerdict::NotPositive { .. } => "not_positive",
        }
    }
}

fn is_psd_matrix(m: &CMat, tol: &Tolerance) -> bool {
    if m.nrows() == 1 {
        let z = m[(0, 0)];
        return 2.0 * z.im.abs() <= tol.eq_tol && z.re >= -tol.psd_tol;
    }
    if hermitian_residual(m) > tol.eq_tol {
        return false;
    }
    if m.nrows() <= JACOBI_MAX_ORDER {
        hermitian_eigen(m).min() >= -tol.psd_tol
    } else {
        shifted_cholesky_succeeds(m, tol.psd_tol)
    }
}

/// Every block Hermitian within `eq_tol` with spectrum above `-psd_tol`.
pub fn is_positive_element(a: &AlgebraElement, tol: &Tolerance) -> bool {
    a.blocks()
        .iter()
        .all(|b| hermitian_residual(b) <= tol.eq_tol && hermitian_eigen(b).min() >= -tol.psd_tol)
}

/// Blockwise Choi matrices `C_{kl} = sum_ij E_ij ⊗ φ(E^k_ij)_l`, one per pair
/// of domain block `k` and codomain block `l`.
pub fn choi_blocks(phi: &OperatorMap) -> Vec<CMat> {
    let dom = phi.domain();
    let cod = phi.codomain();
    let mut out = Vec::with_capacity(dom.num_blocks() * cod.num_blocks());
    for k in 0..dom.num_blocks() {
        let d = dom.block_dim(k);
        for l in 0..cod.num_blocks() {
            let big = cod.block_dim(l);
            let range = cod.block_range(l);
            let mut c = CMat::zeros(d * big, d * big);
            for i in 0..d {
                for j in 0..d {
                    let col = dom.index_of(super::algebra::MatrixUnit { block: k, row: i, col: j });
                    let img = phi.matrix().column(col);
                    for r in 0..big {
                        for s in 0..big {
                            c[(i * big + r, j * big + s)] = img[range.start + r * big + s];
                        }
                    }
                }
            }
            out.push(c);
        }
    }
    out
}

pub fn is_completely_positive(phi: &OperatorMap, tol: &Tolerance) -> bool {
    choi_blocks(phi).iter().all(|c| is_psd_matrix(c, tol))
}

fn random_element(algebra: &BlockAlgebra, rng: &mut ChaCha8Rng) -> AlgebraElement {
    let blocks = algebra
        .block_dims()
        .iter()
        .map(|&d| random_gaussian(d, d, rng))
        .collect();
    let x = AlgebraElement::new(algebra, blocks).expect("block shapes");
    let n = x.frobenius_norm();
    x.scale(Complex64::new(1.0 / n, 0.0))
}

/// Three-valued positivity test.
///
/// Complete positivity is certified from the Choi matrices. Failing that,
/// `φ(xx*)` is tested for `x = 1`, for the diagonal matrix units, and for
/// `trials` random `x` drawn from a generator seeded with `seed`.
pub fn is_positive_map(
    phi: &OperatorMap,
    trials: usize,
    seed: u64,
    tol: &Tolerance,
) -> PositivityVerdict {
    if is_completely_positive(phi, tol) {
        return PositivityVerdict::CertifiedCp;
    }
    let dom = phi.domain();
    let mut candidates = vec![dom.identity()];
    for k in 0..dom.num_blocks() {
        for i in 0..dom.block_dim(k) {
            candidates.push(dom.basis_element(dom.index_of(super::algebra::MatrixUnit {
                block: k,
                row: i,
                col: i,
            })));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    candidates.extend((0..trials.max(1)).map(|_| random_element(dom, &mut rng)));
    for x in candidates {
        let y = phi.apply(&(&x * &x.adjoint()));
        if !is_positive_element(&y, tol) {
            return PositivityVerdict::NotPositive { witness: x };
        }
    }
    PositivityVerdict::SampledPositive
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_psd;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn identity_element_is_positive() {
        let a = BlockAlgebra::new(vec![2, 1]).unwrap();
        assert!(is_positive_element(&a.identity(), &Tolerance::default()));
    }

    #[test]
    fn negative_eigenvalue_is_detected() {
        let a = BlockAlgebra::new(vec![2, 1]).unwrap();
        let x = AlgebraElement::new(
            &a,
            vec![
                CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]),
                CMat::zeros(1, 1),
            ],
        )
        .unwrap();
        assert!(!is_positive_element(&x, &Tolerance::default()));
    }

    #[test]
    fn gram_elements_are_positive() {
        let a = BlockAlgebra::full_matrix(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x = random_element(&a, &mut rng);
            let xx = &x * &x.adjoint();
            // oracle: eigenvalues of x x* are the squared singular values of x
            let sv = crate::linalg::singular_values(x.block(0));
            let eig = hermitian_eigen(xx.block(0));
            let mut sq: Vec<f64> = sv.iter().map(|s| s * s).collect();
            sq.sort_by(f64::total_cmp);
            for (e, s) in eig.values.iter().zip(&sq) {
                assert!((e - s).abs() < 1e-12);
            }
            assert!(is_positive_element(&xx, &Tolerance::default()));
        }
    }

    #[test]
    fn verdicts_for_reference_maps() {
        let tol = Tolerance::default();
        let a = BlockAlgebra::full_matrix(2).unwrap();
        assert_eq!(is_positive_map(&OperatorMap::identity(&a), 16, 0, &tol), PositivityVerdict::CertifiedCp);

        let t = OperatorMap::from_fn(&a, &a, |x| {
            AlgebraElement::new(x.algebra(), vec![x.block(0).transpose()]).unwrap()
        })
        .unwrap();
        // oracle: the Choi matrix of the transpose is the swap, spectrum {-1, 1, 1, 1}
        let choi = &choi_blocks(&t)[0];
        let eig = hermitian_eigen(choi);
        assert!((eig.min() + 1.0).abs() < 1e-14);
        assert_eq!(is_positive_map(&t, 64, 9, &tol), PositivityVerdict::SampledPositive);

        let neg = OperatorMap::identity(&a).scale(-1.0);
        match is_positive_map(&neg, 16, 0, &tol) {
            PositivityVerdict::NotPositive { witness } => assert_eq!(witness, a.identity()),
            other => panic!("unexpected verdict {other:?}"),
        }
    }

    #[test]
    fn large_choi_matrices_use_cholesky_certificate() {
        // conjugation a ↦ V a V* with V: C^9 -> C^9 has a 81x81 Choi matrix
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = BlockAlgebra::full_matrix(9).unwrap();
        let v = crate::linalg::random_unitary(9, &mut rng);
        let phi = OperatorMap::from_fn(&a, &a, |x| {
            AlgebraElement::new(x.algebra(), vec![&v * x.block(0) * v.adjoint()]).unwrap()
        })
        .unwrap();
        assert!(is_completely_positive(&phi, &Tolerance::default()));
        let p = random_psd(81, 3, &mut rng);
        assert!(is_psd_matrix(&p, &Tolerance::default()));
    }
}

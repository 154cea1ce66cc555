use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use transferlab::bimodule::{build_correspondence, check_imprimitivity, left_inner_from_transfer, transfer_from_left_inner, LeftInner};
use transferlab::commutative::{transfer_from_weights, FiberWeights, FiniteDynSystem};
use transferlab::corpus;
use transferlab::cstar::{is_positive_element, kernel_blocks, AlgebraElement, IdealBlocks};
use transferlab::linalg::{random_gaussian, Subspace, RANK_THRESHOLD};
use transferlab::transfer::{
    annihilator_projection, complete_transfer, expectation_from_transfer, is_hereditary_range, kernel_unit,
    transfer_from_expectation, verify_transfer, TransferOperator,
};
use transferlab::{OperatorMap, Tolerance};

fn tol() -> Tolerance {
    Tolerance::default()
}

fn random_element(alg: &transferlab::BlockAlgebra, rng: &mut ChaCha8Rng) -> AlgebraElement {
    let blocks = alg.block_dims().iter().map(|&d| random_gaussian(d, d, rng)).collect();
    AlgebraElement::new(alg, blocks).unwrap()
}

fn nondegenerate_matrix_system(seed: u64, hereditary: bool) -> (OperatorMap, TransferOperator) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = corpus::random_block_dims(25, &mut rng);
    let rep = if hereditary {
        corpus::random_hereditary_endomorphism(&dims, &mut rng)
    } else {
        corpus::random_endomorphism(&dims, &mut rng)
    };
    let alpha = rep.endo();
    let sigma = rep.random_sigmas(Some(1.0), &mut rng);
    let t = verify_transfer(&alpha, &rep.transfer_map(&sigma), &tol()).unwrap();
    (alpha, t)
}

fn range_of(t: &TransferOperator) -> Subspace {
    Subspace::column_space(t.map().matrix(), RANK_THRESHOLD)
}

#[test]
fn expectation_round_trips_on_matrix_systems() {
    for seed in 0..30 {
        let (alpha, t) = nondegenerate_matrix_system(seed, seed % 3 == 0);
        let e = expectation_from_transfer(&t, &tol()).unwrap();
        let back = transfer_from_expectation(&alpha, &e, &tol()).unwrap();
        assert!(back.distance(&t) < 1e-9, "seed {seed}");
        let e2 = expectation_from_transfer(&back, &tol()).unwrap();
        assert!(e2.distance(&e) < 1e-9, "seed {seed}");
    }
}

#[test]
fn range_is_the_annihilator_and_kernel_unit_is_one_minus_unit_image() {
    for seed in 0..30 {
        let (alpha, t) = nondegenerate_matrix_system(100 + seed, false);
        let ann = annihilator_projection(&alpha, &tol()).unwrap();
        assert!(range_of(&t).distance(&ann.subspace()) < 1e-9, "seed {seed}");
        let q = kernel_unit(&alpha, &tol()).unwrap();
        let one = alpha.domain().identity();
        assert!((&one - &t.unit_image()).distance(&q) < 1e-9);
    }
}

#[test]
fn kernel_unit_is_a_central_projection_killed_by_alpha() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let dims = corpus::random_block_dims(25, &mut rng);
        let rep = corpus::random_endomorphism(&dims, &mut rng);
        let alpha = rep.endo();
        let k = kernel_blocks(&alpha, &tol()).unwrap();
        assert_eq!(k.blocks().iter().copied().collect::<Vec<_>>(), rep.kernel_blocks());
        let q = k.unit();
        assert!(alpha.apply(&q).frobenius_norm() < 1e-12);
        assert!((&q * &q).distance(&q) < 1e-15);
        assert!(q.centrality_residual() < 1e-15);
        let a = random_element(alpha.domain(), &mut rng);
        let supported = &q * &a;
        assert!((&q * &supported).distance(&supported) < 1e-12);
    }
}

#[test]
fn hereditary_systems_have_a_unique_nondegenerate_operator() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let dims = corpus::random_block_dims(25, &mut rng);
        let rep = corpus::random_hereditary_endomorphism(&dims, &mut rng);
        let alpha = rep.endo();
        assert!(is_hereditary_range(&alpha, &tol()).unwrap());
        let c = complete_transfer(&alpha, &tol()).unwrap();
        for _ in 0..2 {
            let sigma = rep.random_sigmas(Some(1.0), &mut rng);
            let t = verify_transfer(&alpha, &rep.transfer_map(&sigma), &tol()).unwrap();
            assert!(t.distance(&c) < 1e-9);
        }
        // Λ∘α is the identity on the annihilator of the kernel
        let ann = annihilator_projection(&alpha, &tol()).unwrap();
        let unit = ann.unit();
        let a = &unit * &random_element(alpha.domain(), &mut rng);
        assert!(c.apply(&alpha.apply(&a)).distance(&a) < 1e-9);
        // α(Λ(b)) = α(1) b α(1)
        let b = random_element(alpha.codomain(), &mut rng);
        let p = alpha.apply(&alpha.domain().identity());
        assert!(alpha.apply(&c.apply(&b)).distance(&(&(&p * &b) * &p)) < 1e-9);
    }
}

#[test]
fn sys_d_admits_distinct_nondegenerate_operators() {
    let alpha = corpus::sys_d_endo();
    let t0 = verify_transfer(&alpha, &corpus::sys_d_transfer(0.0), &tol()).unwrap();
    let t1 = verify_transfer(&alpha, &corpus::sys_d_transfer(1.0), &tol()).unwrap();
    assert_eq!((t0.nondegenerate(), t1.nondegenerate()), (Some(true), Some(true)));
    assert!((t0.distance(&t1) - 2f64.sqrt()).abs() < 1e-15);
    assert!(!is_hereditary_range(&alpha, &tol()).unwrap());
}

#[test]
fn bimodule_exists_exactly_for_hereditary_ranges() {
    for seed in 0..16 {
        let hereditary = seed % 2 == 0;
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let rep = if hereditary {
            let dims = corpus::random_block_dims(16, &mut rng);
            corpus::random_hereditary_endomorphism(&dims, &mut rng)
        } else {
            corpus::random_non_hereditary_endomorphism(16, &mut rng)
        };
        let alpha = rep.endo();
        let c = build_correspondence(&alpha, &tol()).unwrap();
        match complete_transfer(&alpha, &tol()) {
            Ok(t) => {
                assert!(hereditary);
                let l = left_inner_from_transfer(&c, &t, &tol()).unwrap();
                assert!(check_imprimitivity(&c, &l, &tol()).holds);
                assert!(transfer_from_left_inner(&c, &l, &tol()).unwrap().distance(&t) < 1e-10);
            }
            Err(_) => {
                assert!(!hereditary);
                let sigma = rep.random_sigmas(Some(1.0), &mut rng);
                let cand = LeftInner::candidate(rep.transfer_map(&sigma));
                assert!(!check_imprimitivity(&c, &cand, &tol()).holds);
            }
        }
    }
}

fn arb_weighted_system() -> impl Strategy<Value = (FiniteDynSystem, Vec<f64>)> {
    (1usize..=8).prop_flat_map(|n| {
        (
            proptest::collection::vec(proptest::option::of(0..n), n),
            proptest::collection::vec(0.0f64..1.5, n),
        )
            .prop_map(move |(g, w)| {
                let s = FiniteDynSystem::from_partial_map(n, g).unwrap();
                let k = s.delta().len();
                (s, w[..k].to_vec())
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gram_elements_are_positive(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = corpus::random_block_dims(25, &mut rng);
        let alg = transferlab::BlockAlgebra::new(dims).unwrap();
        let x = random_element(&alg, &mut rng);
        prop_assert!(is_positive_element(&(&x * &x.adjoint()), &tol()));
    }

    #[test]
    fn weighted_operators_satisfy_the_transfer_identity((s, w) in arb_weighted_system()) {
        let weights = FiberWeights::new(&s, &w).unwrap();
        let t = transfer_from_weights(&s, &weights, &tol()).unwrap();
        prop_assert!(t.residuals().identity <= 1e-10);
        prop_assert!(t.unit_image().centrality_residual() <= 1e-15);
        // the range of Λ is an ideal: a block sum
        let alg = s.algebra();
        let blocks: Vec<usize> = (0..s.n_points())
            .filter(|&k| t.map().matrix().row(k).norm() > 0.0)
            .collect();
        let ideal = IdealBlocks::new(&alg, blocks).unwrap();
        prop_assert!(range_of(&t).distance(&ideal.subspace()) < 1e-12);
    }

    #[test]
    fn unit_image_is_central_on_matrix_systems(seed in 0u64..500, scale in 0.0f64..1.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = corpus::random_block_dims(25, &mut rng);
        let rep = corpus::random_endomorphism(&dims, &mut rng);
        let sigma = rep.random_sigmas(Some(scale), &mut rng);
        let t = verify_transfer(&rep.endo(), &rep.transfer_map(&sigma), &tol()).unwrap();
        let u = t.unit_image();
        prop_assert!(u.centrality_residual() < 1e-10);
        prop_assert!(is_positive_element(&u, &tol()));
        let expect_nondeg = rep.kernel_blocks().len() == dims_len(&rep) || (scale - 1.0).abs() < 1e-9;
        prop_assert_eq!(t.nondegenerate(), Some(expect_nondeg));
    }
}

fn dims_len(rep: &corpus::BlockRepresentation) -> usize {
    rep.domain().num_blocks()
}

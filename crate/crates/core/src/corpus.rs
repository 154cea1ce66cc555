//! Reference systems and random generators for tests and demos.
//!
//! * `sys_a`: `X = {0,1,2}`, `Δ = X`, `γ = (0, 0, 2)`; not injective.
//! * `sys_b`: `X = {0,1}`, `Δ = {0}`, `γ(0) = 1`; injective, complete.
//! * `sys_c`: the canonical pair of isometries `C → C^2`.
//! * `sys_d`: `M_2 ⊕ C` with `α(a ⊕ λ) = λ E_11 ⊕ λ`; range not hereditary.
//!
//! Random *-homomorphisms between block algebras are generated from their
//! representation data: `α(a)_l = W_l (⊕_k a_k ⊗ 1_{m_lk} ⊕ 0) W_l*` with
//! multiplicities `m_lk` and unitaries `W_l`.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::commutative::{FiberWeights, FiniteDynSystem};
use crate::cstar::{verify_star_homomorphism, AlgebraElement, BlockAlgebra, OperatorMap, Tolerance};
use crate::error::{Error, Result};
use crate::bh::IsometryFamily;
use crate::linalg::{random_psd, random_unitary, trace, CMat, ONE};

pub fn sys_a() -> FiniteDynSystem {
    FiniteDynSystem::new(3, &[0, 1, 2], &[0, 0, 2]).expect("valid system")
}

pub fn sys_b() -> FiniteDynSystem {
    FiniteDynSystem::new(2, &[0], &[1]).expect("valid system")
}

pub fn sys_c() -> IsometryFamily {
    IsometryFamily::canonical(2, 1)
}

pub fn sys_d_algebra() -> BlockAlgebra {
    BlockAlgebra::new(vec![2, 1]).expect("valid dims")
}

/// `α(a ⊕ λ) = λ E_11 ⊕ λ` before verification.
pub fn sys_d_endo_unverified() -> OperatorMap {
    let alg = sys_d_algebra();
    let mut m = CMat::zeros(5, 5);
    m[(0, 4)] = ONE;
    m[(4, 4)] = ONE;
    OperatorMap::new(&alg, &alg, m).expect("square")
}

pub fn sys_d_endo() -> OperatorMap {
    verify_star_homomorphism(sys_d_endo_unverified(), &Tolerance::default()).expect("homomorphism")
}

/// `Λ_t(a ⊕ λ) = 0 ⊕ (t a_11 + (1 - t) λ)`.
pub fn sys_d_transfer(t: f64) -> OperatorMap {
    let alg = sys_d_algebra();
    let mut m = CMat::zeros(5, 5);
    m[(4, 0)] = ONE * t;
    m[(4, 4)] = ONE * (1.0 - t);
    OperatorMap::new(&alg, &alg, m).expect("square")
}

/// `E_t(b) = (t b_11 + (1 - t) b_C) (E_11 ⊕ 1)`.
pub fn sys_d_expectation(t: f64) -> OperatorMap {
    let alg = sys_d_algebra();
    let mut m = CMat::zeros(5, 5);
    for r in [0, 4] {
        m[(r, 0)] = ONE * t;
        m[(r, 4)] = ONE * (1.0 - t);
    }
    OperatorMap::new(&alg, &alg, m).expect("square")
}

/// Representation data of a *-homomorphism between block algebras.
#[derive(Clone, Debug)]
pub struct BlockRepresentation {
    domain: BlockAlgebra,
    codomain: BlockAlgebra,
    /// `mult[l][k]` copies of domain block `k` inside codomain block `l`.
    mult: Vec<Vec<usize>>,
    unitaries: Vec<CMat>,
}

impl BlockRepresentation {
    pub fn new(domain: &BlockAlgebra, codomain: &BlockAlgebra, mult: Vec<Vec<usize>>, unitaries: Vec<CMat>) -> Result<Self> {
        if mult.len() != codomain.num_blocks() || unitaries.len() != codomain.num_blocks() {
            return Err(Error::ShapeMismatch("one multiplicity row and unitary per codomain block".into()));
        }
        for (l, row) in mult.iter().enumerate() {
            if row.len() != domain.num_blocks() {
                return Err(Error::ShapeMismatch("one multiplicity per domain block".into()));
            }
            let used: usize = row.iter().zip(domain.block_dims()).map(|(m, d)| m * d).sum();
            if used > codomain.block_dim(l) {
                return Err(Error::InvalidSystem(format!("codomain block {l} is too small for its multiplicities")));
            }
            if unitaries[l].shape() != (codomain.block_dim(l), codomain.block_dim(l)) {
                return Err(Error::ShapeMismatch(format!("unitary {l} has the wrong size")));
            }
        }
        Ok(BlockRepresentation {
            domain: domain.clone(),
            codomain: codomain.clone(),
            mult,
            unitaries,
        })
    }

    /// Same data with Haar-random unitaries.
    pub fn with_random_unitaries<R: Rng + ?Sized>(
        domain: &BlockAlgebra,
        codomain: &BlockAlgebra,
        mult: Vec<Vec<usize>>,
        rng: &mut R,
    ) -> Result<Self> {
        let unitaries = codomain.block_dims().iter().map(|&d| random_unitary(d, rng)).collect();
        Self::new(domain, codomain, mult, unitaries)
    }

    pub fn domain(&self) -> &BlockAlgebra {
        &self.domain
    }

    pub fn codomain(&self) -> &BlockAlgebra {
        &self.codomain
    }

    pub fn multiplicity(&self, l: usize, k: usize) -> usize {
        self.mult[l][k]
    }

    /// `Σ_l m_lk`.
    pub fn total_multiplicity(&self, k: usize) -> usize {
        self.mult.iter().map(|row| row[k]).sum()
    }

    /// Domain blocks with no copy anywhere: the kernel.
    pub fn kernel_blocks(&self) -> Vec<usize> {
        (0..self.domain.num_blocks()).filter(|&k| self.total_multiplicity(k) == 0).collect()
    }

    /// The range is hereditary iff every surviving block occurs exactly once
    /// and no codomain block holds two of them.
    pub fn is_hereditary(&self) -> bool {
        let once = (0..self.domain.num_blocks()).all(|k| self.total_multiplicity(k) <= 1);
        let separated = self.mult.iter().all(|row| row.iter().filter(|&&m| m > 0).count() <= 1);
        once && separated
    }

    /// The isometry `C^{d_k} → C^{D_l}` carrying copy `s` of block `k`.
    pub fn embedding(&self, l: usize, k: usize, s: usize) -> CMat {
        let dims = self.domain.block_dims();
        let offset: usize = (0..k).map(|j| self.mult[l][j] * dims[j]).sum::<usize>() + s * dims[k];
        self.unitaries[l].columns(offset, dims[k]).into_owned()
    }

    pub fn endo(&self) -> OperatorMap {
        let phi = OperatorMap::from_fn(&self.domain, &self.codomain, |a| {
            let blocks = (0..self.codomain.num_blocks())
                .map(|l| {
                    let big = self.codomain.block_dim(l);
                    let mut out = CMat::zeros(big, big);
                    for k in 0..self.domain.num_blocks() {
                        for s in 0..self.mult[l][k] {
                            let v = self.embedding(l, k, s);
                            out += &v * a.block(k) * v.adjoint();
                        }
                    }
                    out
                })
                .collect();
            AlgebraElement::new(&self.codomain, blocks).expect("codomain shapes")
        })
        .expect("shapes agree");
        verify_star_homomorphism(phi, &Tolerance::default()).expect("representations are homomorphisms")
    }

    /// `Λ(x)_k = Σ_l Σ_{s,s'} σ[k][l](s,s') V_lks* x_l V_lks'`, where
    /// `σ[k][l]` is `m_lk x m_lk`.
    pub fn transfer_map(&self, sigma: &[Vec<CMat>]) -> OperatorMap {
        OperatorMap::from_fn(&self.codomain, &self.domain, |x| {
            let blocks = (0..self.domain.num_blocks())
                .map(|k| {
                    let d = self.domain.block_dim(k);
                    let mut out = CMat::zeros(d, d);
                    for l in 0..self.codomain.num_blocks() {
                        let m = self.mult[l][k];
                        for s in 0..m {
                            let left = self.embedding(l, k, s).adjoint() * x.block(l);
                            for t in 0..m {
                                out += &left * self.embedding(l, k, t) * sigma[k][l][(s, t)];
                            }
                        }
                    }
                    out
                })
                .collect();
            AlgebraElement::new(&self.domain, blocks).expect("domain shapes")
        })
        .expect("shapes agree")
    }

    /// Random positive coefficients. With `total = Some(c)` the traces for
    /// each surviving block `k` add up to `c`, so `c = 1` gives a
    /// non-degenerate operator.
    pub fn random_sigmas<R: Rng + ?Sized>(&self, total: Option<f64>, rng: &mut R) -> Vec<Vec<CMat>> {
        (0..self.domain.num_blocks())
            .map(|k| {
                let mut row: Vec<CMat> = (0..self.codomain.num_blocks())
                    .map(|l| {
                        let m = self.mult[l][k];
                        if m == 0 {
                            CMat::zeros(0, 0)
                        } else {
                            random_psd(m, rng.random_range(1..=m), rng)
                        }
                    })
                    .collect();
                if let Some(c) = total {
                    let tr: f64 = row.iter().map(|s| trace(s).re).sum();
                    if tr > 0.0 {
                        for s in &mut row {
                            *s = s.scale(c / tr);
                        }
                    }
                }
                row
            })
            .collect()
    }
}

/// A random endomorphism of the algebra with the given block sizes. Each
/// codomain block is filled with random copies of domain blocks that fit.
pub fn random_endomorphism<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> BlockRepresentation {
    let alg = BlockAlgebra::new(dims.to_vec()).expect("valid dims");
    let nb = dims.len();
    let mut mult = vec![vec![0; nb]; nb];
    for (l, row) in mult.iter_mut().enumerate() {
        let mut room = dims[l];
        while rng.random_bool(0.75) {
            let fitting: Vec<usize> = (0..nb).filter(|&k| dims[k] <= room).collect();
            let Some(&k) = fitting.choose(rng) else { break };
            row[k] += 1;
            room -= dims[k];
        }
    }
    BlockRepresentation::with_random_unitaries(&alg, &alg, mult, rng).expect("fits by construction")
}

/// A random endomorphism whose range is hereditary: every block is either
/// killed or sent once into its own codomain block.
pub fn random_hereditary_endomorphism<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> BlockRepresentation {
    let alg = BlockAlgebra::new(dims.to_vec()).expect("valid dims");
    let nb = dims.len();
    let mut mult = vec![vec![0; nb]; nb];
    let mut free: Vec<usize> = (0..nb).collect();
    free.shuffle(rng);
    let mut order: Vec<usize> = (0..nb).collect();
    order.shuffle(rng);
    for k in order {
        if !rng.random_bool(0.85) {
            continue;
        }
        if let Some(pos) = free.iter().position(|&l| dims[l] >= dims[k]) {
            let l = free.remove(pos);
            mult[l][k] = 1;
        }
    }
    BlockRepresentation::with_random_unitaries(&alg, &alg, mult, rng).expect("fits by construction")
}

/// A random endomorphism whose range is not hereditary, on random block
/// sizes with `Σ d_k^2 ≤ max_dim` (at least 5). Only shapes where some block
/// can hold two copies of another are drawn.
pub fn random_non_hereditary_endomorphism<R: Rng + ?Sized>(max_dim: usize, rng: &mut R) -> BlockRepresentation {
    assert!(max_dim >= 5, "M_2 ⊕ C is the smallest algebra with such endomorphisms");
    loop {
        let dims = random_block_dims(max_dim, rng);
        let possible = dims.iter().any(|&l| dims.iter().any(|&k| l >= 2 * k));
        if !possible {
            continue;
        }
        for _ in 0..64 {
            let rep = random_endomorphism(&dims, rng);
            if !rep.is_hereditary() {
                return rep;
            }
        }
    }
}

/// Random block sizes with `Σ d_k^2 ≤ max_dim`.
pub fn random_block_dims<R: Rng + ?Sized>(max_dim: usize, rng: &mut R) -> Vec<usize> {
    loop {
        let nb = rng.random_range(1..=4);
        let dims: Vec<usize> = (0..nb).map(|_| rng.random_range(1..=4)).collect();
        if dims.iter().map(|d| d * d).sum::<usize>() <= max_dim {
            return dims;
        }
    }
}

/// A random partial map on at most `max_points` points.
pub fn random_commutative_system<R: Rng + ?Sized>(max_points: usize, rng: &mut R) -> FiniteDynSystem {
    let n = rng.random_range(1..=max_points);
    let gamma = (0..n)
        .map(|_| if rng.random_bool(0.8) { Some(rng.random_range(0..n)) } else { None })
        .collect();
    FiniteDynSystem::from_partial_map(n, gamma).expect("valid by construction")
}

/// Independent uniform weights in `[0, 2)`.
pub fn random_weights<R: Rng + ?Sized>(system: &FiniteDynSystem, rng: &mut R) -> FiberWeights {
    let values: Vec<f64> = system.delta().iter().map(|_| rng.random_range(0.0..2.0)).collect();
    FiberWeights::new(system, &values).expect("nonnegative")
}

/// A random positive `n x n` matrix with trace `tr`.
pub fn random_density<R: Rng + ?Sized>(n: usize, tr: f64, rng: &mut R) -> CMat {
    let rank = rng.random_range(1..=n);
    let p = random_psd(n, rank, rng);
    let t = trace(&p).re;
    let m = p.scale(tr / t);
    (&m + m.adjoint()).scale(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::{is_hereditary_range, verify_transfer};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sys_d_matches_its_representation() {
        let alg = sys_d_algebra();
        let rep = BlockRepresentation::new(
            &alg,
            &alg,
            vec![vec![0, 1], vec![0, 1]],
            vec![CMat::identity(2, 2), CMat::identity(1, 1)],
        )
        .unwrap();
        assert!(rep.endo().distance(&sys_d_endo()) < 1e-15);
        assert!(!rep.is_hereditary());
        let sigma = vec![
            vec![CMat::zeros(0, 0), CMat::zeros(0, 0)],
            vec![CMat::identity(1, 1).scale(0.25), CMat::identity(1, 1).scale(0.75)],
        ];
        assert!(rep.transfer_map(&sigma).distance(&sys_d_transfer(0.25)) < 1e-15);
    }

    #[test]
    fn random_representations_are_consistent() {
        let tol = Tolerance::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for i in 0..40 {
            let dims = random_block_dims(25, &mut rng);
            let rep = if i % 2 == 0 {
                random_hereditary_endomorphism(&dims, &mut rng)
            } else {
                random_endomorphism(&dims, &mut rng)
            };
            let alpha = rep.endo();
            assert_eq!(is_hereditary_range(&alpha, &tol).unwrap(), rep.is_hereditary());
            let sigma = rep.random_sigmas(Some(1.0), &mut rng);
            let t = verify_transfer(&alpha, &rep.transfer_map(&sigma), &tol).unwrap();
            assert_eq!(t.nondegenerate(), Some(true));
        }
    }

    #[test]
    fn random_density_has_requested_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = random_density(4, 0.7, &mut rng);
        assert!((trace(&r).re - 0.7).abs() < 1e-14);
    }
}

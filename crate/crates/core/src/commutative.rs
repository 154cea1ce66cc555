//! Commutative systems on a finite set `X = {0, ..., N-1}`.
//!
//! A partial map `γ: Δ → X` gives the endomorphism `α(a)(x) = a(γ(x))` on
//! `Δ` and `0` off `Δ`. Transfer operators are weighted sums over fibers,
//! `Λ(a)(x) = Σ_{γ(y)=x} ρ(y) a(y)`. On a discrete finite space every
//! topological hypothesis (clopen, open image, lower semicontinuity) holds
//! automatically, so only the combinatorics of the fibers remains.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::cstar::{verify_star_homomorphism, BlockAlgebra, OperatorMap, Tolerance};
use crate::error::{Error, Result};
use crate::linalg::{CMat, ONE};
use crate::transfer::{is_hereditary_range, verify_transfer, TransferOperator};

/// `(X, Δ, γ)` with `X` finite and discrete.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FiniteDynSystem {
    n_points: usize,
    gamma: Vec<Option<usize>>,
}

impl FiniteDynSystem {
    /// `gamma[i]` is the image of `delta[i]`.
    pub fn new(n_points: usize, delta: &[usize], gamma: &[usize]) -> Result<Self> {
        if delta.len() != gamma.len() {
            return Err(Error::InvalidSystem(format!(
                "delta has {} points but gamma has {} images",
                delta.len(),
                gamma.len()
            )));
        }
        let mut map = vec![None; n_points];
        for (&x, &y) in delta.iter().zip(gamma) {
            if x >= n_points {
                return Err(Error::InvalidSystem(format!("delta point {x} out of range")));
            }
            if map[x].is_some() {
                return Err(Error::InvalidSystem(format!("delta lists point {x} twice")));
            }
            map[x] = Some(y);
        }
        Self::from_partial_map(n_points, map)
    }

    /// `gamma[x] = None` means `x ∉ Δ`.
    pub fn from_partial_map(n_points: usize, gamma: Vec<Option<usize>>) -> Result<Self> {
        if n_points == 0 {
            return Err(Error::InvalidSystem("the space needs at least one point".into()));
        }
        if gamma.len() != n_points {
            return Err(Error::InvalidSystem(format!(
                "partial map has {} entries for {n_points} points",
                gamma.len()
            )));
        }
        if gamma.iter().flatten().any(|&y| y >= n_points) {
            return Err(Error::InvalidSystem("gamma image out of range".into()));
        }
        Ok(FiniteDynSystem { n_points, gamma })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn delta(&self) -> Vec<usize> {
        (0..self.n_points).filter(|&x| self.gamma[x].is_some()).collect()
    }

    pub fn gamma(&self, x: usize) -> Option<usize> {
        self.gamma[x]
    }

    pub fn partial_map(&self) -> &[Option<usize>] {
        &self.gamma
    }

    /// `γ(Δ)`.
    pub fn image(&self) -> BTreeSet<usize> {
        self.gamma.iter().flatten().copied().collect()
    }

    /// `{γ⁻¹(x) : x ∈ γ(Δ)}`, keyed by `x`.
    pub fn fibers(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (y, g) in self.gamma.iter().enumerate() {
            if let Some(x) = g {
                out.entry(*x).or_default().push(y);
            }
        }
        out
    }

    pub fn is_injective(&self) -> bool {
        self.fibers().values().all(|f| f.len() == 1)
    }

    pub fn algebra(&self) -> BlockAlgebra {
        BlockAlgebra::commutative(self.n_points).expect("at least one point")
    }

    /// Every system on `n` points, `(n + 1)^n` of them.
    pub fn enumerate(n: usize) -> impl Iterator<Item = FiniteDynSystem> {
        let total = (n as u64 + 1).pow(n as u32);
        (0..total).map(move |mut code| {
            let gamma = (0..n)
                .map(|_| {
                    let digit = (code % (n as u64 + 1)) as usize;
                    code /= n as u64 + 1;
                    if digit == n {
                        None
                    } else {
                        Some(digit)
                    }
                })
                .collect();
            FiniteDynSystem { n_points: n, gamma }
        })
    }
}

/// Point weights `ρ(y) ≥ 0` on `Δ`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberWeights {
    rho: Vec<f64>,
}

impl FiberWeights {
    /// `values[i]` is the weight of the `i`-th point of `Δ` in increasing order.
    pub fn new(system: &FiniteDynSystem, values: &[f64]) -> Result<Self> {
        let delta = system.delta();
        if values.len() != delta.len() {
            return Err(Error::InvalidSystem(format!(
                "{} weights for {} points of delta",
                values.len(),
                delta.len()
            )));
        }
        let mut rho = vec![0.0; system.n_points()];
        for (i, (&x, &v)) in delta.iter().zip(values).enumerate() {
            if !(v >= 0.0) {
                return Err(Error::NegativeWeight { index: i, value: v });
            }
            rho[x] = v;
        }
        Ok(FiberWeights { rho })
    }

    /// `ρ(x)`, zero off `Δ`.
    pub fn rho(&self, x: usize) -> f64 {
        self.rho[x]
    }

    /// Weights listed over `Δ`.
    pub fn on_delta(&self, system: &FiniteDynSystem) -> Vec<f64> {
        system.delta().into_iter().map(|x| self.rho[x]).collect()
    }

    /// `Σ_{γ(y)=x} ρ(y)` for each `x ∈ γ(Δ)`.
    pub fn fiber_sums(&self, system: &FiniteDynSystem) -> BTreeMap<usize, f64> {
        system
            .fibers()
            .into_iter()
            .map(|(x, fiber)| (x, fiber.iter().map(|&y| self.rho[y]).sum()))
            .collect()
    }

    /// Every fiber sums to one within `tol`.
    pub fn is_fiber_stochastic(&self, system: &FiniteDynSystem, tol: f64) -> bool {
        self.fiber_sums(system).values().all(|s| (s - 1.0).abs() <= tol)
    }
}

/// A set-valued section `Φ(x) ⊆ γ⁻¹(x)` over `γ(Δ)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Section {
    pub phi: BTreeMap<usize, Vec<usize>>,
}

impl Section {
    pub fn is_empty(&self) -> bool {
        self.phi.values().all(|v| v.is_empty())
    }
}

/// Fibers over `γ(Δ)` and the simplex each one contributes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParameterSpace {
    /// `(x, γ⁻¹(x))` in increasing `x`.
    pub fibers: Vec<(usize, Vec<usize>)>,
    /// `|γ⁻¹(x)| - 1` for each fiber.
    pub simplex_dims: Vec<usize>,
    pub dimension: usize,
}

/// `α(a)(x) = a(γ(x))` on `Δ`, `0` elsewhere, verified as a *-homomorphism.
pub fn endo_from_system(system: &FiniteDynSystem) -> OperatorMap {
    let alg = system.algebra();
    let n = system.n_points();
    let mut m = CMat::zeros(n, n);
    for x in 0..n {
        if let Some(y) = system.gamma(x) {
            m[(x, y)] = ONE;
        }
    }
    let phi = OperatorMap::new(&alg, &alg, m).expect("square");
    verify_star_homomorphism(phi, &Tolerance::default()).expect("composition maps are multiplicative")
}

/// Coordinate matrix of `Λ(a)(x) = Σ_{γ(y)=x} ρ(y) a(y)`.
pub fn weighted_operator_map(system: &FiniteDynSystem, w: &FiberWeights) -> OperatorMap {
    let alg = system.algebra();
    let n = system.n_points();
    let mut m = CMat::zeros(n, n);
    for y in 0..n {
        if let Some(x) = system.gamma(y) {
            m[(x, y)] = ONE * w.rho(y);
        }
    }
    OperatorMap::new(&alg, &alg, m).expect("square")
}

/// The weighted-fiber transfer operator, verified against `endo_from_system`.
pub fn transfer_from_weights(
    system: &FiniteDynSystem,
    w: &FiberWeights,
    tol: &Tolerance,
) -> Result<TransferOperator> {
    verify_transfer(&endo_from_system(system), &weighted_operator_map(system, w), tol)
}

/// `ρ(x) = Λ(δ_x)(γ(x))`.
pub fn weights_from_transfer(system: &FiniteDynSystem, t: &TransferOperator) -> Result<FiberWeights> {
    let m = t.map().matrix();
    if m.nrows() != system.n_points() || m.ncols() != system.n_points() {
        return Err(Error::ShapeMismatch("transfer operator does not act on this system".into()));
    }
    let values: Vec<f64> = system
        .delta()
        .into_iter()
        .map(|x| m[(system.gamma(x).expect("x in delta"), x)].re)
        .collect();
    FiberWeights::new(system, &values)
}

pub fn nondegenerate_parameter_space(system: &FiniteDynSystem) -> ParameterSpace {
    let fibers: Vec<(usize, Vec<usize>)> = system.fibers().into_iter().collect();
    let simplex_dims: Vec<usize> = fibers.iter().map(|(_, f)| f.len() - 1).collect();
    let dimension = simplex_dims.iter().sum();
    ParameterSpace {
        fibers,
        simplex_dims,
        dimension,
    }
}

/// Fiber-stochastic weights, uniform on each fiber simplex.
pub fn sample_stochastic_weights(system: &FiniteDynSystem, seed: u64) -> Result<FiberWeights> {
    if system.image().is_empty() {
        return Err(Error::EmptyDelta);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rho = vec![0.0; system.n_points()];
    for fiber in system.fibers().values() {
        let draws: Vec<f64> = fiber.iter().map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = draws.iter().sum();
        for (&y, e) in fiber.iter().zip(draws) {
            rho[y] = e / total;
        }
    }
    Ok(FiberWeights { rho })
}

/// A random non-degenerate transfer operator.
pub fn sample_nondegenerate(system: &FiniteDynSystem, seed: u64, tol: &Tolerance) -> Result<TransferOperator> {
    let w = sample_stochastic_weights(system, seed)?;
    let t = transfer_from_weights(system, &w, tol)?;
    if t.nondegenerate() != Some(true) {
        return Err(Error::Structural("sampled stochastic weights gave a degenerate operator".into()));
    }
    Ok(t)
}

/// A complete transfer operator exists iff `γ` is injective; cross-checked
/// against the hereditary-range test.
pub fn complete_exists_commutative(system: &FiniteDynSystem, tol: &Tolerance) -> Result<bool> {
    let by_fibers = system.is_injective();
    let by_range = is_hereditary_range(&endo_from_system(system), tol)?;
    if by_fibers != by_range {
        return Err(Error::Structural(format!(
            "injectivity of gamma ({by_fibers}) disagrees with the hereditary-range test ({by_range})"
        )));
    }
    Ok(by_fibers)
}

/// The full section `Φ(x) = γ⁻¹(x)`.
///
/// On a finite discrete space it is lower semicontinuous and non-empty on
/// `γ(Δ)`, so it exists whenever `Δ ≠ ∅`.
pub fn section_check(system: &FiniteDynSystem) -> Section {
    Section {
        phi: system.fibers(),
    }
}

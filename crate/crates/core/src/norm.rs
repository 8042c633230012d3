//! Distances between superoperators.
//!
//! Both the self-adjoint superoperator norm
//! `‖Δ‖ = sup { ‖Δ(ρ)‖₁ : ρ = ρ†, ‖ρ‖₁ ≤ 1 }` and the diamond norm
//! `sup_n ‖Δ ⊗ id_n‖` reduce to a maximization over pure states, because
//! `ρ ↦ ‖Δ(ρ)‖₁` is convex and the extreme points of the self-adjoint
//! trace-norm ball are `±|ψ⟩⟨ψ|`. The maximization is non-convex in `ψ`, so
//! it runs projected gradient ascent on the unit sphere from many seeded
//! starting points and keeps the best witness.
//!
//! The ancilla for the diamond norm has the same dimension as the system,
//! which is sufficient for Hermitian-preserving maps.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelError, QuantumChannel};
use crate::linalg::{hermitian_eig, trace_norm, ComplexMatrix, LinalgError, C64};

/// Relative tolerance for the Hermitian-preserving check.
pub const HP_TOL: f64 = 1e-10;
/// Largest dimension accepted by [`so_norm_bruteforce`].
pub const BRUTE_FORCE_MAX_DIM: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("superoperator is not Hermitian preserving (deviation {deviation:e})")]
    NotHermitianPreserving { deviation: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("brute-force search supports dim <= {BRUTE_FORCE_MAX_DIM}, got dim {dim}")]
    BruteForceTooLarge { dim: usize },
    #[error("invalid optimization budget: {0}")]
    InvalidBudget(String),
}

/// Parameters of the multistart optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptBudget {
    pub restarts: usize,
    pub iterations: usize,
    pub step: f64,
    pub seed: u64,
}

impl Default for OptBudget {
    fn default() -> Self {
        Self { restarts: 64, iterations: 200, step: 0.5, seed: 0 }
    }
}

impl OptBudget {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<(), NormError> {
        if self.restarts == 0 {
            return Err(NormError::InvalidBudget("restarts must be positive".into()));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(NormError::InvalidBudget(format!("step must be positive, got {}", self.step)));
        }
        Ok(())
    }
}

/// A Hermitian-preserving linear map on `d × d` matrices, held as its Liouville matrix.
#[derive(Debug, Clone)]
pub struct SuperoperatorDelta {
    dim: usize,
    liouville: ComplexMatrix,
    tag: String,
}

impl SuperoperatorDelta {
    pub fn new(liouville: ComplexMatrix, tag: impl Into<String>) -> Result<Self, NormError> {
        let n = liouville.rows();
        let dim = (n as f64).sqrt().round() as usize;
        if !liouville.is_square() || dim * dim != n {
            return Err(NormError::DimensionMismatch(format!(
                "Liouville matrix must be d²×d², got {}x{}",
                liouville.rows(),
                liouville.cols()
            )));
        }
        let delta = Self { dim, liouville, tag: tag.into() };
        let deviation = delta.hermiticity_preservation_deviation();
        if deviation > HP_TOL * delta.liouville.max_abs().max(1.0) {
            return Err(NormError::NotHermitianPreserving { deviation });
        }
        Ok(delta)
    }

    /// `a - b` for channels with equal square dimensions.
    pub fn between(a: &QuantumChannel, b: &QuantumChannel) -> Result<Self, NormError> {
        if (a.dim_in(), a.dim_out()) != (b.dim_in(), b.dim_out()) || a.dim_in() != a.dim_out() {
            return Err(NormError::DimensionMismatch(format!(
                "channels {}->{} and {}->{} do not form a square difference",
                a.dim_in(),
                a.dim_out(),
                b.dim_in(),
                b.dim_out()
            )));
        }
        Self::new(a.liouville() - b.liouville(), "channel difference")
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = tag.into();
        self
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { dim: self.dim, liouville: self.liouville.scale_real(c), tag: self.tag.clone() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn liouville(&self) -> &ComplexMatrix {
        &self.liouville
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    /// Max entry of `Δ(E_ij)† - Δ(E_ji)` over matrix units.
    pub fn hermiticity_preservation_deviation(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                let a = self.apply(&ComplexMatrix::unit(d, d, i, j));
                let b = self.apply(&ComplexMatrix::unit(d, d, j, i));
                worst = worst.max(a.adjoint().max_abs_diff(&b));
            }
        }
        worst
    }

    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let v = self.liouville.mul_vec(&x.vectorize());
        ComplexMatrix::unvectorize(&v, self.dim, self.dim)
    }

    /// Hilbert–Schmidt adjoint map.
    pub fn apply_adjoint(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let v = self.liouville.adjoint().mul_vec(&x.vectorize());
        ComplexMatrix::unvectorize(&v, self.dim, self.dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    Optimized,
    BruteForce,
}

#[derive(Debug, Clone)]
pub struct NormResult {
    pub value: f64,
    /// Density matrix of the optimizing pure state.
    pub witness: ComplexMatrix,
    /// Exact objective at `witness`.
    pub certified_lower_bound: f64,
    pub method: NormMethod,
    pub seed: u64,
}

/// `Δ ⊗ id_ancilla`, acting on `(d·a) × (d·a)` matrices with the system factor first.
struct ExtendedMap<'a> {
    delta: &'a SuperoperatorDelta,
    ancilla: usize,
}

impl ExtendedMap<'_> {
    fn total_dim(&self) -> usize {
        self.delta.dim * self.ancilla
    }

    fn blockwise(&self, x: &ComplexMatrix, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> ComplexMatrix {
        let (d, a) = (self.delta.dim, self.ancilla);
        if a == 1 {
            return f(x);
        }
        let mut out = ComplexMatrix::zeros(d * a, d * a);
        for p in 0..a {
            for q in 0..a {
                let block = ComplexMatrix::from_fn(d, d, |i, j| x[(i * a + p, j * a + q)]);
                let image = f(&block);
                for i in 0..d {
                    for j in 0..d {
                        out[(i * a + p, j * a + q)] = image[(i, j)];
                    }
                }
            }
        }
        out
    }

    fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.blockwise(x, |b| self.delta.apply(b))
    }

    fn apply_adjoint(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.blockwise(x, |b| self.delta.apply_adjoint(b))
    }

    /// `‖Φ(ψψ†)‖₁` and the subgradient operator `Φ*(S)` with `S = Σ sign(λ) vv†`.
    fn objective(&self, psi: &[C64]) -> (f64, ComplexMatrix) {
        let image = self.apply(&ComplexMatrix::outer(psi, psi)).hermitian_part();
        let eig = hermitian_eig(&image).expect("symmetrized image is Hermitian");
        let value: f64 = eig.eigenvalues.iter().map(|l| l.abs()).sum();
        let scale = eig.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        let cutoff = 1e-14 * scale;
        let sign = eig.apply_fn(|l| {
            if l > cutoff {
                1.0
            } else if l < -cutoff {
                -1.0
            } else {
                0.0
            }
        });
        (value, self.apply_adjoint(&sign).hermitian_part())
    }

    fn value(&self, psi: &[C64]) -> f64 {
        let image = self.apply(&ComplexMatrix::outer(psi, psi));
        trace_norm(&image.hermitian_part()).expect("square")
    }
}

fn normalize(v: &mut [C64]) {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in v.iter_mut() {
        *z /= n;
    }
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

fn random_pure_state(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    let mut v: Vec<C64> = (0..n).map(|_| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))).collect();
    normalize(&mut v);
    v
}

const MAX_STEP: f64 = 64.0;

fn inner_re(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Riemannian (sub)gradient of `ψ ↦ ⟨ψ|B|ψ⟩` on the unit sphere: `2(Bψ − ⟨ψ|B|ψ⟩ψ)`.
fn sphere_gradient(b: &ComplexMatrix, psi: &[C64]) -> Vec<C64> {
    let bpsi = b.mul_vec(psi);
    let along: C64 = psi.iter().zip(&bpsi).map(|(p, g)| p.conj() * g).sum();
    bpsi.iter().zip(psi).map(|(g, p)| (g - along * p) * 2.0).collect()
}

/// Nonlinear conjugate-gradient ascent (Polak–Ribière+, backtracking line
/// search with a carried-over step) from one start, followed by linearization
/// steps that jump to the top eigenvector of the subgradient operator.
fn ascend(map: &ExtendedMap<'_>, mut psi: Vec<C64>, budget: &OptBudget) -> (f64, Vec<C64>) {
    let (mut value, mut b) = map.objective(&psi);
    let mut grad = sphere_gradient(&b, &psi);
    let mut dir = grad.clone();
    let mut step = budget.step;
    for _ in 0..budget.iterations {
        let gnorm = inner_re(&grad, &grad).sqrt();
        if gnorm < 1e-13 {
            break;
        }
        if inner_re(&grad, &dir) <= 0.0 {
            dir = grad.clone();
        }
        step = (step * 2.0).min(MAX_STEP);
        let mut accepted = None;
        for _ in 0..40 {
            let mut cand: Vec<C64> = psi.iter().zip(&dir).map(|(p, d)| p + d * step).collect();
            normalize(&mut cand);
            let (v, nb) = map.objective(&cand);
            if v > value {
                accepted = Some((cand, v, nb));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, v, nb)) = accepted else {
            if dir == grad {
                break;
            }
            // conjugate direction failed; retry from steepest ascent
            dir = grad.clone();
            step = budget.step;
            continue;
        };
        let gain = v - value;
        psi = cand;
        value = v;
        b = nb;
        let new_grad = sphere_gradient(&b, &psi);
        // transport the old direction by projecting onto the new tangent space
        let overlap: C64 = psi.iter().zip(&dir).map(|(p, d)| p.conj() * d).sum();
        let moved: Vec<C64> = dir.iter().zip(&psi).map(|(d, p)| d - overlap * p).collect();
        let diff: Vec<C64> = new_grad.iter().zip(&grad).map(|(n, o)| n - o).collect();
        let beta = (inner_re(&new_grad, &diff) / inner_re(&grad, &grad)).max(0.0);
        dir = new_grad.iter().zip(&moved).map(|(g, d)| g + d * beta).collect();
        grad = new_grad;
        if gain <= 1e-15 * value.max(1.0) {
            break;
        }
    }
    for _ in 0..100 {
        let eig = hermitian_eig(&b).expect("Hermitian");
        let mut cand = eig.eigenvector(eig.eigenvalues.len() - 1);
        normalize(&mut cand);
        let (v, nb) = map.objective(&cand);
        if v <= value + 1e-15 * value.max(1.0) {
            break;
        }
        psi = cand;
        value = v;
        b = nb;
    }
    (value, psi)
}

fn multistart(map: &ExtendedMap<'_>, budget: &OptBudget) -> (f64, Vec<C64>) {
    let n = map.total_dim();
    let runs: Vec<(f64, Vec<C64>)> = (0..budget.restarts)
        .into_par_iter()
        .map(|r| {
            let start = random_pure_state(&mut restart_rng(budget.seed, r), n);
            ascend(map, start, budget)
        })
        .collect();
    // first restart wins ties
    let mut best = 0;
    for (k, run) in runs.iter().enumerate() {
        if run.0 > runs[best].0 {
            best = k;
        }
    }
    runs.into_iter().nth(best).expect("at least one restart")
}

fn result_from(map: &ExtendedMap<'_>, psi: &[C64], seed: u64, method: NormMethod) -> NormResult {
    let exact = map.value(psi);
    NormResult { value: exact, witness: ComplexMatrix::outer(psi, psi), certified_lower_bound: exact, method, seed }
}

/// Self-adjoint superoperator norm by multistart ascent over pure states.
pub fn so_norm_sa(delta: &SuperoperatorDelta, budget: &OptBudget) -> Result<NormResult, NormError> {
    budget.validate()?;
    let map = ExtendedMap { delta, ancilla: 1 };
    let (_, psi) = multistart(&map, budget);
    Ok(result_from(&map, &psi, budget.seed, NormMethod::Optimized))
}

/// Diamond norm with an ancilla of the system's dimension. Two fixed inputs
/// are evaluated next to the optimizer: the maximally entangled state, and the
/// SO^sa optimizer's state with the ancilla in `|0⟩`.
pub fn diamond_norm(delta: &SuperoperatorDelta, budget: &OptBudget) -> Result<NormResult, NormError> {
    budget.validate()?;
    let d = delta.dim();
    let map = ExtendedMap { delta, ancilla: d };
    let (_, psi) = multistart(&map, budget);
    let (_, psi_sys) = multistart(&ExtendedMap { delta, ancilla: 1 }, budget);
    let mut max_ent = vec![C64::new(0.0, 0.0); d * d];
    let mut product = vec![C64::new(0.0, 0.0); d * d];
    for i in 0..d {
        max_ent[i * d + i] = C64::new(1.0 / (d as f64).sqrt(), 0.0);
        product[i * d] = psi_sys[i];
    }
    let best = [psi, max_ent, product]
        .iter()
        .map(|v| result_from(&map, v, budget.seed, NormMethod::Optimized))
        .fold(None::<NormResult>, |best, r| match best {
            Some(b) if b.value >= r.value => Some(b),
            _ => Some(r),
        })
        .expect("three candidates");
    Ok(best)
}

/// `‖Δ(ρ)‖₁` for one input.
pub fn trace_distance_at(delta: &SuperoperatorDelta, rho: &ComplexMatrix) -> Result<f64, NormError> {
    if rho.shape() != (delta.dim(), delta.dim()) {
        return Err(NormError::DimensionMismatch(format!(
            "state is {}x{}, map acts on dim {}",
            rho.rows(),
            rho.cols(),
            delta.dim()
        )));
    }
    Ok(trace_norm(&delta.apply(rho).hermitian_part())?)
}

fn halton(index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Deterministic quasi-uniform pure states: a Fibonacci lattice on the Bloch
/// sphere for qubits, Halton points pushed through Box–Muller otherwise.
pub fn pure_state_grid(dim: usize, count: usize) -> Result<Vec<Vec<C64>>, NormError> {
    if dim == 0 || dim > BRUTE_FORCE_MAX_DIM {
        return Err(NormError::BruteForceTooLarge { dim });
    }
    if dim == 1 {
        return Ok(vec![vec![C64::new(1.0, 0.0)]]);
    }
    if dim == 2 {
        let golden = PI * (3.0 - 5f64.sqrt());
        return Ok((0..count)
            .map(|k| {
                let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
                let theta = z.clamp(-1.0, 1.0).acos();
                let phi = golden * k as f64;
                vec![C64::new((theta / 2.0).cos(), 0.0), C64::from_polar((theta / 2.0).sin(), phi)]
            })
            .collect());
    }
    Ok((1..=count)
        .map(|k| {
            let mut v: Vec<C64> = (0..dim)
                .map(|m| {
                    let u1 = halton(k, PRIMES[2 * m]).max(1e-300);
                    let u2 = halton(k, PRIMES[2 * m + 1]);
                    let r = (-2.0 * u1.ln()).sqrt();
                    C64::from_polar(r, 2.0 * PI * u2)
                })
                .collect();
            normalize(&mut v);
            v
        })
        .collect())
}

/// Grid maximum of `‖Δ(ψψ†)‖₁`, a lower bound on the self-adjoint norm.
pub fn so_norm_bruteforce(delta: &SuperoperatorDelta, resolution: usize) -> Result<NormResult, NormError> {
    let grid = pure_state_grid(delta.dim(), resolution.max(1))?;
    let map = ExtendedMap { delta, ancilla: 1 };
    let values: Vec<f64> = grid.par_iter().map(|psi| map.value(psi)).collect();
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = k;
        }
    }
    Ok(result_from(&map, &grid[best], 0, NormMethod::BruteForce))
}

/// Sampled lower bound on `‖P₁ - P₂‖` through optimal two-outcome measurements.
///
/// For each random pure input the Helstrom measurement (projectors onto the
/// positive and non-positive eigenspaces of `P₁(ρ) - P₂(ρ)`) attains the inner
/// supremum over POVMs, and the outcome statistics are evaluated with
/// `√E` sandwiches.
pub fn povm_distinguishability(
    p1: &QuantumChannel,
    p2: &QuantumChannel,
    trials: usize,
    seed: u64,
) -> Result<f64, NormError> {
    if (p1.dim_in(), p1.dim_out()) != (p2.dim_in(), p2.dim_out()) {
        return Err(NormError::DimensionMismatch(format!(
            "channels {}->{} and {}->{}",
            p1.dim_in(),
            p1.dim_out(),
            p2.dim_in(),
            p2.dim_out()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..trials {
        let psi = random_pure_state(&mut rng, p1.dim_in());
        let rho = ComplexMatrix::outer(&psi, &psi);
        let (out1, out2) = (p1.apply_operator(&rho)?, p2.apply_operator(&rho)?);
        let eig = hermitian_eig(&(&out1 - &out2).hermitian_part())?;
        let positive = eig.apply_fn(|l| if l > 0.0 { 1.0 } else { 0.0 });
        let rest = &ComplexMatrix::identity(p1.dim_out()) - &positive;
        let mut total = 0.0;
        // projectors are their own square roots
        for e in [&positive, &rest] {
            let pr1 = e.matmul(&out1).matmul(e).trace().re;
            let pr2 = e.matmul(&out2).matmul(e).trace().re;
            total += (pr1 - pr2).abs();
        }
        best = best.max(total);
    }
    Ok(best)
}

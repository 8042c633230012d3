//! Markovian dynamics: Lindblad generators, their propagators and resolvents,
//! and parameter scans over generator families.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelError, QuantumChannel, Repair};
use crate::linalg::{kron, matrix_exp, solve, spectral_norm, ComplexMatrix, LinalgError, C64, HERMITIAN_TOL};
use crate::norm::{so_norm_sa, NormError, OptBudget, SuperoperatorDelta};

/// Max-entry tolerance on `(λI - A) R - I`.
pub const RESOLVENT_RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error("Hamiltonian is not Hermitian (deviation {deviation:e})")]
    NonHermitianHamiltonian { deviation: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("resolvent needs lambda > 0, got {0}")]
    NonPositiveLambda(f64),
    #[error("resolvent residual {residual:e} exceeds tolerance")]
    ResolventResidual { residual: f64 },
    #[error("resolvent failed at z = {z}, lambda = {lambda}: {source}")]
    ScanPoint { z: f64, lambda: f64, source: Box<DynamicsError> },
    #[error("parameter grid needs at least {needed} points, got {got}")]
    GridTooSmall { needed: usize, got: usize },
    #[error("baseline z = {0} is not on the parameter grid")]
    BaselineNotOnGrid(f64),
    #[error("generator family: {0}")]
    Family(String),
}

/// `A(ρ) = -i[H, ρ] + Σ_k (L_k ρ L_k† - ½{L_k† L_k, ρ})` with ħ = 1.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    dim: usize,
    hamiltonian: ComplexMatrix,
    jumps: Vec<ComplexMatrix>,
}

impl LindbladGenerator {
    pub fn new(hamiltonian: ComplexMatrix, jumps: Vec<ComplexMatrix>) -> Result<Self, DynamicsError> {
        if !hamiltonian.is_square() {
            return Err(DynamicsError::DimensionMismatch(format!(
                "Hamiltonian is {}x{}",
                hamiltonian.rows(),
                hamiltonian.cols()
            )));
        }
        let deviation = hamiltonian.hermiticity_deviation();
        if deviation > HERMITIAN_TOL {
            return Err(DynamicsError::NonHermitianHamiltonian { deviation });
        }
        let dim = hamiltonian.rows();
        if let Some(bad) = jumps.iter().find(|l| l.shape() != (dim, dim)) {
            return Err(DynamicsError::DimensionMismatch(format!(
                "jump operator is {}x{}, Hamiltonian is {dim}x{dim}",
                bad.rows(),
                bad.cols()
            )));
        }
        Ok(Self { dim, hamiltonian: hamiltonian.hermitian_part(), jumps })
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, hamiltonian: ComplexMatrix::zeros(dim, dim), jumps: Vec::new() }
    }

    /// Qubit decay `|1⟩ → |0⟩` at rate `gamma`.
    pub fn damping(gamma: f64) -> Self {
        let mut l = ComplexMatrix::zeros(2, 2);
        l[(0, 1)] = C64::new(gamma.max(0.0).sqrt(), 0.0);
        Self { dim: 2, hamiltonian: ComplexMatrix::zeros(2, 2), jumps: vec![l] }
    }

    /// Jump `√rate X`: flip probability `(1 - e^{-2 rate t}) / 2` after time `t`.
    pub fn bit_flip_rate(rate: f64) -> Self {
        let l = crate::channel::paulis::x().scale_real(rate.max(0.0).sqrt());
        Self { dim: 2, hamiltonian: ComplexMatrix::zeros(2, 2), jumps: vec![l] }
    }

    /// Jump `√(rate/2) Z`: coherences decay as `e^{-rate t}`.
    pub fn dephasing(rate: f64) -> Self {
        let l = crate::channel::paulis::z().scale_real((rate.max(0.0) / 2.0).sqrt());
        Self { dim: 2, hamiltonian: ComplexMatrix::zeros(2, 2), jumps: vec![l] }
    }

    /// Precession `H = ω Z / 2`.
    pub fn precession(omega: f64) -> Self {
        Self { dim: 2, hamiltonian: crate::channel::paulis::z().scale_real(omega / 2.0), jumps: Vec::new() }
    }

    /// Sum of two generators on the same space.
    pub fn plus(&self, other: &Self) -> Result<Self, DynamicsError> {
        if self.dim != other.dim {
            return Err(DynamicsError::DimensionMismatch(format!("dims {} and {}", self.dim, other.dim)));
        }
        let mut jumps = self.jumps.clone();
        jumps.extend(other.jumps.iter().cloned());
        Ok(Self { dim: self.dim, hamiltonian: &self.hamiltonian + &other.hamiltonian, jumps })
    }

    /// The same local generator acting independently on each of `n` sites.
    pub fn iid(&self, n: usize) -> Self {
        let d = self.dim;
        let total = d.pow(n as u32);
        let embed = |op: &ComplexMatrix, site: usize| {
            let left = ComplexMatrix::identity(d.pow(site as u32));
            let right = ComplexMatrix::identity(d.pow((n - site - 1) as u32));
            kron(&kron(&left, op), &right)
        };
        let mut hamiltonian = ComplexMatrix::zeros(total, total);
        let mut jumps = Vec::new();
        for site in 0..n {
            hamiltonian = &hamiltonian + &embed(&self.hamiltonian, site);
            jumps.extend(self.jumps.iter().map(|l| embed(l, site)));
        }
        Self { dim: total, hamiltonian, jumps }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[ComplexMatrix] {
        &self.jumps
    }

    pub fn liouville(&self) -> ComplexMatrix {
        generator_liouville(self)
    }

    /// Max `|tr A(E_ij)|` over matrix units.
    pub fn trace_preservation_deviation(&self) -> f64 {
        let a = self.liouville();
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for col in 0..d * d {
            let tr: C64 = (0..d).map(|k| a[(k + k * d, col)]).sum();
            worst = worst.max(tr.norm());
        }
        worst
    }
}

/// Liouville matrix of the generator under column stacking:
/// `-i(I⊗H - Hᵀ⊗I) + Σ (L̄⊗L - ½ I⊗L†L - ½ (L†L)ᵀ⊗I)`.
pub fn generator_liouville(g: &LindbladGenerator) -> ComplexMatrix {
    let id = ComplexMatrix::identity(g.dim);
    let minus_i = C64::new(0.0, -1.0);
    let mut a = (&kron(&id, &g.hamiltonian) - &kron(&g.hamiltonian.transpose(), &id)).scale(minus_i);
    for l in &g.jumps {
        let ldl = l.adjoint().matmul(l);
        a = &a + &kron(&l.conj(), l);
        a = &a - &kron(&id, &ldl).scale_real(0.5);
        a = &a - &kron(&ldl.transpose(), &id).scale_real(0.5);
    }
    a
}

/// `exp(tA)` as a validated channel (no repair).
pub fn propagator(g: &LindbladGenerator, t: f64) -> Result<QuantumChannel, DynamicsError> {
    if t < 0.0 || t.is_nan() {
        return Err(DynamicsError::NegativeTime(t));
    }
    let l = matrix_exp(&generator_liouville(g).scale_real(t))?;
    Ok(QuantumChannel::from_liouville(&l, g.dim, g.dim, Repair::Reject)?)
}

/// `(λI - A)⁻¹` as a Liouville-space matrix.
pub fn resolvent(g: &LindbladGenerator, lambda: f64) -> Result<ComplexMatrix, DynamicsError> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(DynamicsError::NonPositiveLambda(lambda));
    }
    let n = g.dim * g.dim;
    let shifted = &ComplexMatrix::identity(n).scale_real(lambda) - &generator_liouville(g);
    let r = solve(&shifted, &ComplexMatrix::identity(n))?;
    let residual = shifted.matmul(&r).max_abs_diff(&ComplexMatrix::identity(n));
    if residual > RESOLVENT_RESIDUAL_TOL {
        return Err(DynamicsError::ResolventResidual { residual });
    }
    Ok(r)
}

type GeneratorBuilder = Arc<dyn Fn(f64) -> Result<LindbladGenerator, DynamicsError> + Send + Sync>;

/// Generators `A_z` indexed by a real parameter on a finite grid.
#[derive(Clone)]
pub struct GeneratorFamily {
    parameter_name: String,
    grid: Vec<f64>,
    builder: GeneratorBuilder,
}

impl fmt::Debug for GeneratorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratorFamily")
            .field("parameter_name", &self.parameter_name)
            .field("grid", &self.grid)
            .finish_non_exhaustive()
    }
}

impl GeneratorFamily {
    pub fn new(
        parameter_name: impl Into<String>,
        grid: Vec<f64>,
        builder: impl Fn(f64) -> Result<LindbladGenerator, DynamicsError> + Send + Sync + 'static,
    ) -> Result<Self, DynamicsError> {
        if grid.is_empty() {
            return Err(DynamicsError::GridTooSmall { needed: 1, got: 0 });
        }
        let family = Self { parameter_name: parameter_name.into(), grid, builder: Arc::new(builder) };
        let dim = family.generator_at(family.grid[0])?.dim();
        for &z in &family.grid[1..] {
            let other = family.generator_at(z)?.dim();
            if other != dim {
                return Err(DynamicsError::DimensionMismatch(format!(
                    "family member at z = {z} has dim {other}, expected {dim}"
                )));
            }
        }
        Ok(family)
    }

    pub fn parameter_name(&self) -> &str {
        &self.parameter_name
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn generator_at(&self, z: f64) -> Result<LindbladGenerator, DynamicsError> {
        (self.builder)(z)
    }

    /// Same family on a different grid.
    pub fn with_grid(&self, grid: Vec<f64>) -> Result<Self, DynamicsError> {
        let builder = Arc::clone(&self.builder);
        Self::new(self.parameter_name.clone(), grid, move |z| builder(z))
    }
}

/// `count` evenly spaced points from `start` to `stop` inclusive.
pub fn uniform_grid(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count).map(|k| start + (stop - start) * k as f64 / (count - 1) as f64).collect(),
    }
}

/// Norm used to compare resolvents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OperatorNorm {
    /// Self-adjoint superoperator norm of the induced map.
    #[default]
    SoSa,
    /// Largest singular value of the Liouville matrix.
    Spectral,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityRow {
    pub lambda: f64,
    pub z_left: f64,
    pub z_right: f64,
    pub gap: f64,
    /// `gap / |z_right - z_left|`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub parameter_name: String,
    pub norm: OperatorNorm,
    pub rows: Vec<ContinuityRow>,
}

impl ContinuityReport {
    /// Largest adjacent gap at `lambda`.
    pub fn max_gap(&self, lambda: f64) -> f64 {
        self.rows.iter().filter(|r| r.lambda == lambda).map(|r| r.gap).fold(0.0, f64::max)
    }

    /// Modulus-of-continuity estimate: max gap-to-spacing ratio at `lambda`.
    pub fn modulus(&self, lambda: f64) -> f64 {
        self.rows.iter().filter(|r| r.lambda == lambda).map(|r| r.ratio).fold(0.0, f64::max)
    }
}

fn superoperator_gap(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    norm: OperatorNorm,
    budget: &OptBudget,
) -> Result<f64, DynamicsError> {
    let diff = a - b;
    Ok(match norm {
        OperatorNorm::Spectral => spectral_norm(&diff),
        OperatorNorm::SoSa => so_norm_sa(&SuperoperatorDelta::new(diff, "resolvent gap")?, budget)?.value,
    })
}

/// Resolvent gaps `‖R(λ, A_z) - R(λ, A_z')‖` for adjacent grid points.
pub fn resolvent_continuity_scan(
    family: &GeneratorFamily,
    lambdas: &[f64],
    norm: OperatorNorm,
    budget: &OptBudget,
) -> Result<ContinuityReport, DynamicsError> {
    let grid = family.grid();
    if grid.len() < 2 {
        return Err(DynamicsError::GridTooSmall { needed: 2, got: grid.len() });
    }
    let mut rows = Vec::new();
    for &lambda in lambdas {
        let resolvents: Vec<ComplexMatrix> = grid
            .par_iter()
            .map(|&z| {
                family.generator_at(z).and_then(|g| resolvent(&g, lambda)).map_err(|e| DynamicsError::ScanPoint {
                    z,
                    lambda,
                    source: Box::new(e),
                })
            })
            .collect::<Result<_, _>>()?;
        let gaps: Vec<f64> = (0..grid.len() - 1)
            .into_par_iter()
            .map(|k| superoperator_gap(&resolvents[k + 1], &resolvents[k], norm, budget))
            .collect::<Result<_, _>>()?;
        for (k, gap) in gaps.into_iter().enumerate() {
            let spacing = (grid[k + 1] - grid[k]).abs();
            rows.push(ContinuityRow {
                lambda,
                z_left: grid[k],
                z_right: grid[k + 1],
                gap,
                ratio: if spacing > 0.0 { gap / spacing } else { 0.0 },
            });
        }
    }
    Ok(ContinuityReport { parameter_name: family.parameter_name().to_string(), norm, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRow {
    pub z: f64,
    /// `‖exp(tA_z) - exp(tA_baseline)‖`.
    pub distance: f64,
    /// `‖A_z - A_baseline‖`.
    pub generator_gap: f64,
    /// `t · generator_gap`, which bounds `distance` for CPTP semigroups.
    pub duhamel_bound: f64,
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub parameter_name: String,
    pub time: f64,
    pub baseline_z: f64,
    pub rows: Vec<StabilityRow>,
}

/// Propagator distances from the baseline member at fixed time.
pub fn stability_sweep(
    family: &GeneratorFamily,
    t: f64,
    baseline_z: f64,
    budget: &OptBudget,
) -> Result<StabilityReport, DynamicsError> {
    if t < 0.0 || t.is_nan() {
        return Err(DynamicsError::NegativeTime(t));
    }
    if !family.grid().iter().any(|&z| (z - baseline_z).abs() <= 1e-12 * z.abs().max(1.0)) {
        return Err(DynamicsError::BaselineNotOnGrid(baseline_z));
    }
    let base_gen = family.generator_at(baseline_z)?;
    let base_prop = propagator(&base_gen, t)?;
    let base_liouville = base_gen.liouville();
    let rows = family
        .grid()
        .par_iter()
        .map(|&z| {
            let generator = family.generator_at(z)?;
            let prop = propagator(&generator, t)?;
            let distance = so_norm_sa(&SuperoperatorDelta::between(&prop, &base_prop)?, budget)?.value;
            let generator_gap = so_norm_sa(
                &SuperoperatorDelta::new(&generator.liouville() - &base_liouville, "generator gap")?,
                budget,
            )?
            .value;
            let duhamel_bound = t * generator_gap;
            Ok(StabilityRow {
                z,
                distance,
                generator_gap,
                duhamel_bound,
                within_bound: distance <= duhamel_bound + 1e-8,
            })
        })
        .collect::<Result<Vec<_>, DynamicsError>>()?;
    Ok(StabilityReport { parameter_name: family.parameter_name().to_string(), time: t, baseline_z, rows })
}

//! The quantum computer condition: dressed maps, the inaccuracy `α̂`, its
//! perturbation transfer, and the diamond-norm variant.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{unitarity_deviation, ChannelError, DensityMatrix, LinkingMapPair, QuantumChannel};
use crate::dynamics::{propagator, DynamicsError, GeneratorFamily};
use crate::linalg::ComplexMatrix;
use crate::norm::{
    diamond_norm, so_norm_bruteforce, so_norm_sa, NormError, OptBudget, SuperoperatorDelta, BRUTE_FORCE_MAX_DIM,
};

/// Absolute slack on `α̂ ≤ budget`.
pub const BUDGET_TOL: f64 = 1e-12;
/// Slack on the perturbation-transfer inequalities.
pub const TRANSFER_TOL: f64 = 1e-8;
/// Brute-force excess over the optimizer that raises the disagreement flag.
pub const DISAGREEMENT_TOL: f64 = 1e-3;
pub const UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QccError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("target is not unitary (deviation {deviation:e})")]
    NotUnitary { deviation: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("alpha budget must be finite and non-negative, got {0}")]
    InvalidBudget(f64),
    #[error(
        "transfer inequality violated: alpha' = {alpha_prime}, alpha = {alpha}, gap = {gap}; \
         the optimizer likely under-estimated a norm, raise restarts or iterations"
    )]
    TransferViolation { alpha: f64, gap: f64, alpha_prime: f64 },
}

/// Target unitary, implementation, linking maps and accuracy budget.
#[derive(Debug, Clone)]
pub struct QccInstance {
    u: ComplexMatrix,
    p: QuantumChannel,
    links: LinkingMapPair,
    alpha_budget: f64,
}

impl QccInstance {
    pub fn new(
        u: ComplexMatrix,
        p: QuantumChannel,
        links: LinkingMapPair,
        alpha_budget: f64,
    ) -> Result<Self, QccError> {
        if !(alpha_budget.is_finite() && alpha_budget >= 0.0) {
            return Err(QccError::InvalidBudget(alpha_budget));
        }
        if !u.is_square() || u.rows() != links.dim_logical() {
            return Err(QccError::DimensionMismatch(format!(
                "unitary is {}x{}, logical space has dim {}",
                u.rows(),
                u.cols(),
                links.dim_logical()
            )));
        }
        let deviation = unitarity_deviation(&u);
        if deviation > UNITARY_TOL {
            return Err(QccError::NotUnitary { deviation });
        }
        if p.dim_in() != links.dim_comp() || p.dim_out() != links.dim_comp() {
            return Err(QccError::DimensionMismatch(format!(
                "implementation maps {} -> {}, computational space has dim {}",
                p.dim_in(),
                p.dim_out(),
                links.dim_comp()
            )));
        }
        Ok(Self { u, p, links, alpha_budget })
    }

    pub fn u(&self) -> &ComplexMatrix {
        &self.u
    }

    pub fn p(&self) -> &QuantumChannel {
        &self.p
    }

    pub fn links(&self) -> &LinkingMapPair {
        &self.links
    }

    pub fn alpha_budget(&self) -> f64 {
        self.alpha_budget
    }

    pub fn dim_logical(&self) -> usize {
        self.links.dim_logical()
    }

    /// Same target and links with a different implementation.
    pub fn with_implementation(&self, p: QuantumChannel) -> Result<Self, QccError> {
        Self::new(self.u.clone(), p, self.links.clone(), self.alpha_budget)
    }

    pub fn with_budget(&self, alpha_budget: f64) -> Result<Self, QccError> {
        Self::new(self.u.clone(), self.p.clone(), self.links.clone(), alpha_budget)
    }

    /// The ideal logical channel `ρ ↦ UρU†`.
    pub fn ideal(&self) -> QuantumChannel {
        QuantumChannel::unitary(&self.u).expect("validated at construction")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QccOptions {
    /// Grid points for the independent brute-force estimate; 0 disables it.
    pub bruteforce_resolution: usize,
    pub with_diamond: bool,
}

impl Default for QccOptions {
    fn default() -> Self {
        Self { bruteforce_resolution: 20_000, with_diamond: false }
    }
}

#[derive(Debug, Clone)]
pub struct QccReport {
    pub alpha_hat: f64,
    pub alpha_budget: f64,
    pub witness_state: DensityMatrix,
    pub passes: bool,
    pub alpha_hat_diamond: Option<f64>,
    pub passes_diamond: Option<bool>,
    /// Brute-force grid estimate, computed when the logical dimension allows.
    pub brute_force: Option<f64>,
    /// Brute force found a value above `alpha_hat` by more than the tolerance.
    pub underestimate_flag: bool,
    pub seed: u64,
}

/// `decode ∘ P ∘ encode`.
pub fn dressed_map(inst: &QccInstance) -> Result<QuantumChannel, QccError> {
    dress(&inst.p, &inst.links)
}

fn dress(p: &QuantumChannel, links: &LinkingMapPair) -> Result<QuantumChannel, QccError> {
    let inner = QuantumChannel::compose(p, links.encode())?;
    Ok(QuantumChannel::compose(links.decode(), &inner)?.canonicalize()?)
}

fn deviation_from_ideal(inst: &QccInstance) -> Result<SuperoperatorDelta, QccError> {
    let delta = SuperoperatorDelta::between(&dressed_map(inst)?, &inst.ideal())?;
    Ok(delta.with_tag("dressed map minus target"))
}

pub fn qcc_alpha(inst: &QccInstance, budget: &OptBudget) -> Result<QccReport, QccError> {
    qcc_alpha_with(inst, budget, &QccOptions::default())
}

pub fn qcc_alpha_with(inst: &QccInstance, budget: &OptBudget, options: &QccOptions) -> Result<QccReport, QccError> {
    let delta = deviation_from_ideal(inst)?;
    let result = so_norm_sa(&delta, budget)?;
    let alpha_hat = result.value;
    let brute_force = if options.bruteforce_resolution > 0 && delta.dim() <= BRUTE_FORCE_MAX_DIM {
        Some(so_norm_bruteforce(&delta, options.bruteforce_resolution)?.value)
    } else {
        None
    };
    let alpha_hat_diamond =
        if options.with_diamond { Some(diamond_norm(&delta, budget)?.value.max(alpha_hat)) } else { None };
    let passes = alpha_hat <= inst.alpha_budget + BUDGET_TOL;
    Ok(QccReport {
        alpha_hat,
        alpha_budget: inst.alpha_budget,
        witness_state: DensityMatrix::new(result.witness)?,
        passes,
        alpha_hat_diamond,
        passes_diamond: alpha_hat_diamond.map(|a| a <= inst.alpha_budget + BUDGET_TOL),
        brute_force,
        underestimate_flag: brute_force.is_some_and(|b| b > alpha_hat + DISAGREEMENT_TOL),
        seed: budget.seed,
    })
}

/// Independent instances checked concurrently; output order follows input order.
pub fn qcc_alpha_batch(
    instances: &[QccInstance],
    budget: &OptBudget,
    options: &QccOptions,
) -> Vec<Result<QccReport, QccError>> {
    instances.par_iter().map(|inst| qcc_alpha_with(inst, budget, options)).collect()
}

/// `‖P^M - G‖` in the diamond norm.
pub fn qcc_diamond_alpha(inst: &QccInstance, budget: &OptBudget) -> Result<f64, QccError> {
    Ok(diamond_norm(&deviation_from_ideal(inst)?, budget)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationReport {
    /// `α̂` for the original implementation.
    pub alpha_hat: f64,
    /// `‖P^M - P'^M‖`.
    pub gap: f64,
    /// `α̂'` computed directly for the perturbed implementation.
    pub alpha_hat_prime: f64,
    /// `α̂ + gap - α̂'`, non-negative up to tolerance.
    pub slack: f64,
}

/// Checks `α̂' ≤ α̂ + ‖P^M - P'^M‖` and `|α̂ - α̂'| ≤ ‖P^M - P'^M‖`.
pub fn perturbation_bound(
    inst: &QccInstance,
    p_prime: &QuantumChannel,
    budget: &OptBudget,
) -> Result<PerturbationReport, QccError> {
    let perturbed = inst.with_implementation(p_prime.clone())?;
    let alpha_hat = so_norm_sa(&deviation_from_ideal(inst)?, budget)?.value;
    let alpha_hat_prime = so_norm_sa(&deviation_from_ideal(&perturbed)?, budget)?.value;
    let gap_delta = SuperoperatorDelta::between(&dressed_map(inst)?, &dressed_map(&perturbed)?)?;
    let gap = so_norm_sa(&gap_delta, budget)?.value;
    if (alpha_hat - alpha_hat_prime).abs() > gap + TRANSFER_TOL {
        return Err(QccError::TransferViolation { alpha: alpha_hat, gap, alpha_prime: alpha_hat_prime });
    }
    Ok(PerturbationReport { alpha_hat, gap, alpha_hat_prime, slack: alpha_hat + gap - alpha_hat_prime })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferRow {
    pub z: f64,
    /// `‖exp(tA_z) - exp(tA_baseline)‖` on the computational space.
    pub distance: f64,
    /// `‖A_z - A_baseline‖`.
    pub generator_gap: f64,
    /// `t · generator_gap`.
    pub duhamel_bound: f64,
    pub within_duhamel_bound: bool,
    pub alpha_hat: f64,
    /// `α̂(baseline) + distance`.
    pub transfer_bound: f64,
    pub within_bound: bool,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferReport {
    pub parameter_name: String,
    pub time: f64,
    pub baseline_z: f64,
    pub baseline_alpha_hat: f64,
    pub alpha_budget: f64,
    pub rows: Vec<TransferRow>,
}

impl TransferReport {
    /// Both the transfer bound and the generator-gap bound hold at every grid point.
    pub fn all_within_bound(&self) -> bool {
        self.rows.iter().all(|r| r.within_bound && r.within_duhamel_bound)
    }
}

/// `α̂(z)` for implementations `exp(tA_z)`, each paired with the transfer bound
/// from the baseline member. The raw propagator distance dominates the dressed
/// one because the linking maps are channels.
pub fn qcc_parameter_sweep(
    template: &QccInstance,
    family: &GeneratorFamily,
    t: f64,
    baseline_z: f64,
    budget: &OptBudget,
) -> Result<TransferReport, QccError> {
    let report = crate::dynamics::stability_sweep(family, t, baseline_z, budget)?;
    let base = template.with_implementation(propagator(&family.generator_at(baseline_z)?, t)?)?;
    let baseline_alpha_hat = so_norm_sa(&deviation_from_ideal(&base)?, budget)?.value;
    let rows = report
        .rows
        .par_iter()
        .map(|row| {
            let inst = template.with_implementation(propagator(&family.generator_at(row.z)?, t)?)?;
            let alpha_hat = so_norm_sa(&deviation_from_ideal(&inst)?, budget)?.value;
            let transfer_bound = baseline_alpha_hat + row.distance;
            Ok(TransferRow {
                z: row.z,
                distance: row.distance,
                generator_gap: row.generator_gap,
                duhamel_bound: row.duhamel_bound,
                within_duhamel_bound: row.within_bound,
                alpha_hat,
                transfer_bound,
                within_bound: alpha_hat <= transfer_bound + TRANSFER_TOL,
                passes: alpha_hat <= template.alpha_budget + BUDGET_TOL,
            })
        })
        .collect::<Result<Vec<_>, QccError>>()?;
    Ok(TransferReport {
        parameter_name: family.parameter_name().to_string(),
        time: t,
        baseline_z,
        baseline_alpha_hat,
        alpha_budget: template.alpha_budget,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::paulis;
    use crate::dynamics::{uniform_grid, LindbladGenerator};
    use crate::linalg::C64;
    use crate::random::{random_channel, random_density, random_unitary};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn budget() -> OptBudget {
        OptBudget { restarts: 16, iterations: 200, step: 0.5, seed: 7 }
    }

    fn repetition(p: QuantumChannel) -> QccInstance {
        QccInstance::new(ComplexMatrix::identity(2), p, LinkingMapPair::repetition_code(), 0.1).unwrap()
    }

    fn logical_flip(q: f64) -> f64 {
        3.0 * q * q - 2.0 * q * q * q
    }

    #[test]
    fn instance_validation() {
        let links = LinkingMapPair::trivial(2);
        let p = QuantumChannel::identity(2);
        let err = QccInstance::new(ComplexMatrix::identity(2).scale_real(2.0), p.clone(), links.clone(), 0.1);
        assert!(matches!(err, Err(QccError::NotUnitary { .. })));
        let err = QccInstance::new(ComplexMatrix::identity(3), p.clone(), links.clone(), 0.1);
        assert!(matches!(err, Err(QccError::DimensionMismatch(_))));
        let err = QccInstance::new(ComplexMatrix::identity(2), QuantumChannel::identity(3), links.clone(), 0.1);
        assert!(matches!(err, Err(QccError::DimensionMismatch(_))));
        let err = QccInstance::new(ComplexMatrix::identity(2), p, links, -0.1);
        assert!(matches!(err, Err(QccError::InvalidBudget(_))));
    }

    #[test]
    fn dressed_map_examples() {
        let trivial =
            QccInstance::new(ComplexMatrix::identity(2), QuantumChannel::identity(2), LinkingMapPair::trivial(2), 0.0)
                .unwrap();
        let d = dressed_map(&trivial).unwrap();
        assert!(d.liouville().max_abs_diff(QuantumChannel::identity(2).liouville()) < 1e-12);

        let noiseless = dressed_map(&repetition(QuantumChannel::identity(8))).unwrap();
        assert!(noiseless.liouville().max_abs_diff(QuantumChannel::identity(2).liouville()) < 1e-12);

        for q in [0.05, 0.1, 0.25] {
            let noisy = repetition(QuantumChannel::iid_noise(&QuantumChannel::bit_flip(q).unwrap(), 3));
            let expected = QuantumChannel::bit_flip(logical_flip(q)).unwrap();
            assert!(dressed_map(&noisy).unwrap().liouville().max_abs_diff(expected.liouville()) < 1e-12);
        }
    }

    #[test]
    fn alpha_examples() {
        let u = paulis::hadamard();
        let exact =
            QccInstance::new(u.clone(), QuantumChannel::unitary(&u).unwrap(), LinkingMapPair::trivial(2), 0.0).unwrap();
        let report = qcc_alpha(&exact, &budget()).unwrap();
        assert!(report.alpha_hat < 1e-9);
        assert!(report.passes);

        let rep = repetition(QuantumChannel::iid_noise(&QuantumChannel::bit_flip(0.1).unwrap(), 3));
        let report = qcc_alpha(&rep, &budget()).unwrap();
        assert!((report.alpha_hat - 0.056).abs() < 1e-6, "{}", report.alpha_hat);
        assert!(report.passes);
        assert!(!report.underestimate_flag);
        assert!((report.brute_force.unwrap() - 0.056).abs() < 2e-3);
        assert_eq!(report.seed, 7);

        let dep = QccInstance::new(
            ComplexMatrix::identity(2),
            QuantumChannel::completely_depolarizing(2),
            LinkingMapPair::trivial(2),
            1.2,
        )
        .unwrap();
        let report = qcc_alpha_with(&dep, &budget(), &QccOptions { with_diamond: true, ..Default::default() }).unwrap();
        assert!((report.alpha_hat - 1.0).abs() < 1e-6);
        assert!(report.passes);
        let diamond = report.alpha_hat_diamond.unwrap();
        assert!(diamond >= 1.5 - 1e-3);
        assert_eq!(report.passes_diamond, Some(false));
    }

    #[test]
    fn budget_boundary_uses_absolute_tolerance() {
        let rep = repetition(QuantumChannel::iid_noise(&QuantumChannel::bit_flip(0.1).unwrap(), 3));
        let alpha = qcc_alpha(&rep, &budget()).unwrap().alpha_hat;
        assert!(qcc_alpha(&rep.with_budget(alpha).unwrap(), &budget()).unwrap().passes);
        assert!(!qcc_alpha(&rep.with_budget(alpha - 1e-9).unwrap(), &budget()).unwrap().passes);
    }

    #[test]
    fn alpha_dominates_every_state_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random_unitary(2, &mut rng);
        let inst =
            QccInstance::new(u.clone(), random_channel(2, 2, &mut rng), LinkingMapPair::trivial(2), 2.0).unwrap();
        let alpha = qcc_alpha(&inst, &budget()).unwrap().alpha_hat;
        assert!((0.0..=2.0 + 1e-12).contains(&alpha));
        let dressed = dressed_map(&inst).unwrap();
        for _ in 0..100 {
            let rho = random_density(2, 2, &mut rng);
            let out = dressed.apply(&rho).unwrap();
            let ideal = u.matmul(rho.matrix()).matmul(&u.adjoint());
            let dist = crate::linalg::trace_norm(&(out.matrix() - &ideal)).unwrap();
            assert!(dist <= alpha + 1e-8);
        }
    }

    #[test]
    fn diamond_examples() {
        let u = paulis::y();
        let exact =
            QccInstance::new(u.clone(), QuantumChannel::unitary(&u).unwrap(), LinkingMapPair::trivial(2), 0.0).unwrap();
        assert!(qcc_diamond_alpha(&exact, &budget()).unwrap() < 1e-9);

        let theta: f64 = 0.7;
        let v = ComplexMatrix::from_diag(&[C64::new(1.0, 0.0), C64::from_polar(1.0, theta)]);
        let inst = QccInstance::new(
            ComplexMatrix::identity(2),
            QuantumChannel::unitary(&v).unwrap(),
            LinkingMapPair::trivial(2),
            2.0,
        )
        .unwrap();
        let so = qcc_alpha(&inst, &budget()).unwrap().alpha_hat;
        let diamond = qcc_diamond_alpha(&inst, &budget()).unwrap();
        assert!((so - diamond).abs() < 2e-3);
        assert!((so - 2.0 * (theta / 2.0).sin()).abs() < 1e-6);
    }

    #[test]
    fn perturbation_examples() {
        let inst = QccInstance::new(
            ComplexMatrix::identity(2),
            QuantumChannel::bit_flip(0.1).unwrap(),
            LinkingMapPair::trivial(2),
            0.3,
        )
        .unwrap();
        let same = perturbation_bound(&inst, inst.p(), &budget()).unwrap();
        assert!(same.gap < 1e-12);
        assert!((same.alpha_hat - same.alpha_hat_prime).abs() < 1e-12);

        let r = perturbation_bound(&inst, &QuantumChannel::bit_flip(0.12).unwrap(), &budget()).unwrap();
        assert!((r.gap - 0.04).abs() < 1e-6);
        assert!((r.alpha_hat - 0.2).abs() < 1e-6);
        assert!((r.alpha_hat_prime - 0.24).abs() < 1e-6);
        assert!(r.slack >= -TRANSFER_TOL);
    }

    #[test]
    fn perturbation_holds_for_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let u = random_unitary(2, &mut rng);
            let inst = QccInstance::new(u, random_channel(2, 2, &mut rng), LinkingMapPair::trivial(2), 1.0).unwrap();
            let r = perturbation_bound(&inst, &random_channel(2, 3, &mut rng), &budget()).unwrap();
            assert!(r.slack >= -TRANSFER_TOL);
        }
    }

    #[test]
    fn batch_matches_sequential() {
        let instances: Vec<_> = [0.0, 0.1, 0.2]
            .iter()
            .map(|&q| repetition(QuantumChannel::iid_noise(&QuantumChannel::bit_flip(q).unwrap(), 3)))
            .collect();
        let options = QccOptions { bruteforce_resolution: 0, with_diamond: false };
        let batch = qcc_alpha_batch(&instances, &budget(), &options);
        for (inst, got) in instances.iter().zip(batch) {
            let seq = qcc_alpha_with(inst, &budget(), &options).unwrap();
            assert_eq!(got.unwrap().alpha_hat.to_bits(), seq.alpha_hat.to_bits());
        }
    }

    #[test]
    fn parameter_sweep_respects_transfer_bound() {
        let template = QccInstance::new(
            ComplexMatrix::identity(2),
            QuantumChannel::identity(8),
            LinkingMapPair::repetition_code(),
            0.1,
        )
        .unwrap();
        let family =
            GeneratorFamily::new("rate", uniform_grid(0.0, 0.2, 5), |r| Ok(LindbladGenerator::bit_flip_rate(r).iid(3)))
                .unwrap();
        let t = 1.0;
        let report = qcc_parameter_sweep(&template, &family, t, 0.0, &budget()).unwrap();
        assert!(report.baseline_alpha_hat < 1e-9);
        assert!(report.all_within_bound());
        for row in &report.rows {
            let q = (1.0 - (-2.0 * row.z * t).exp()) / 2.0;
            assert!((row.alpha_hat - 2.0 * logical_flip(q)).abs() < 1e-6, "{row:?}");
        }
        let alphas: Vec<f64> = report.rows.iter().map(|r| r.alpha_hat).collect();
        assert!(alphas.windows(2).all(|w| w[1] > w[0]));
    }
}

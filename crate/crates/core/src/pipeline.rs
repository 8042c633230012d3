//! Classical problems solved through a noisy device: outcome distributions,
//! near-commutativity margins, the probabilistic guarantee, and majority voting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{povm_sqrt, ChannelError, DensityMatrix, Povm, QuantumChannel};
use crate::linalg::ComplexMatrix;
use crate::norm::{so_norm_sa, NormError, OptBudget, SuperoperatorDelta};
use crate::qcc::{dressed_map, QccError, QccInstance};

/// Largest allowed weight outside the dominant eigenvector of a prepared state.
pub const PURITY_TOL: f64 = 1e-10;
/// Sandwich and trace evaluations of a probability must agree this closely.
pub const SANDWICH_TOL: f64 = 1e-9;
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Slack on the middle-step bound `|tr(√E (P^M - G)(ρ) √E)| ≤ α̂`.
pub const MIDDLE_STEP_TOL: f64 = 1e-8;
/// Rounding slack on the near-commutativity inequalities, which hold with equality at the boundary.
pub const MARGIN_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Qcc(#[from] QccError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error("problem: {0}")]
    InvalidProblem(String),
    #[error("prepared state for input {input:?} is not pure (defect {defect:e})")]
    NotPure { input: String, defect: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("readout outcomes {readout:?} do not match problem outputs {outputs:?}")]
    OutcomeMismatch { readout: Vec<String>, outputs: Vec<String> },
    #[error("unknown input label {0:?}")]
    UnknownInput(String),
    #[error("outcome distribution for input {input:?} sums to {sum}")]
    Normalization { input: String, sum: f64 },
    #[error("sandwich and trace probabilities differ by {discrepancy:e} for input {input:?}, outcome {outcome:?}")]
    SandwichMismatch { input: String, outcome: String, discrepancy: f64 },
    #[error("p budget must lie in [0, 1), got {0}")]
    InvalidPBudget(f64),
    #[error("majority voting needs an odd trial count, got {0}")]
    EvenTrials(usize),
    #[error("majority voting needs exactly 2 outputs, problem has {0}")]
    NonBinaryOutputs(usize),
    #[error("repeat count must be positive")]
    ZeroRepeats,
    #[error("ideal near-commutativity fails at p = {p_budget} for inputs {}", format_failures(.failures))]
    PreconditionFailed { p_budget: f64, failures: Vec<(String, f64)> },
}

fn format_failures(failures: &[(String, f64)]) -> String {
    failures.iter().map(|(x, m)| format!("{x} (margin {m:.3e})")).collect::<Vec<_>>().join(", ")
}

/// A total function `F: X → Y` on finite label sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalProblem {
    inputs: Vec<String>,
    outputs: Vec<String>,
    table: Vec<usize>,
}

impl ClassicalProblem {
    /// `table[k]` is the output label for `inputs[k]`.
    pub fn new(inputs: Vec<String>, outputs: Vec<String>, table: Vec<String>) -> Result<Self, PipelineError> {
        if inputs.is_empty() || outputs.is_empty() {
            return Err(PipelineError::InvalidProblem("input and output sets must be non-empty".into()));
        }
        if let Some(d) = first_duplicate(&inputs) {
            return Err(PipelineError::InvalidProblem(format!("duplicate input label {d:?}")));
        }
        if let Some(d) = first_duplicate(&outputs) {
            return Err(PipelineError::InvalidProblem(format!("duplicate output label {d:?}")));
        }
        if table.len() != inputs.len() {
            return Err(PipelineError::InvalidProblem(format!(
                "function table has {} entries for {} inputs",
                table.len(),
                inputs.len()
            )));
        }
        let table = table
            .iter()
            .map(|y| {
                outputs
                    .iter()
                    .position(|o| o == y)
                    .ok_or_else(|| PipelineError::InvalidProblem(format!("value {y:?} is not an output label")))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { inputs, outputs, table })
    }

    /// `F = id` on labels `"0"`, …, `"d-1"`.
    pub fn identity(d: usize) -> Self {
        let labels: Vec<String> = (0..d).map(|k| k.to_string()).collect();
        Self { inputs: labels.clone(), outputs: labels, table: (0..d).collect() }
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn value(&self, x: &str) -> Result<&str, PipelineError> {
        let k = self.input_index(x)?;
        Ok(&self.outputs[self.table[k]])
    }

    fn input_index(&self, x: &str) -> Result<usize, PipelineError> {
        self.inputs.iter().position(|i| i == x).ok_or_else(|| PipelineError::UnknownInput(x.to_string()))
    }
}

fn first_duplicate(labels: &[String]) -> Option<&String> {
    labels.iter().enumerate().find(|(k, l)| labels[..*k].contains(l)).map(|(_, l)| l)
}

/// Pure logical states prepared for each classical input, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct InitializationMap {
    states: Vec<DensityMatrix>,
}

impl InitializationMap {
    pub fn new(states: Vec<DensityMatrix>) -> Result<Self, PipelineError> {
        let dim = states.first().map(DensityMatrix::dim).unwrap_or(0);
        if states.iter().any(|s| s.dim() != dim) {
            return Err(PipelineError::DimensionMismatch("prepared states have different dimensions".into()));
        }
        Ok(Self { states })
    }

    /// Input `k` prepares `|k⟩`.
    pub fn computational(dim: usize, count: usize) -> Self {
        Self { states: (0..count).map(|k| DensityMatrix::basis(dim, k)).collect() }
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }
}

#[derive(Debug, Clone)]
pub struct PipelineInstance {
    problem: ClassicalProblem,
    init: InitializationMap,
    device: QccInstance,
    readout: Povm,
    p_budget: f64,
}

impl PipelineInstance {
    pub fn new(
        problem: ClassicalProblem,
        init: InitializationMap,
        device: QccInstance,
        readout: Povm,
        p_budget: f64,
    ) -> Result<Self, PipelineError> {
        if !(0.0..1.0).contains(&p_budget) {
            return Err(PipelineError::InvalidPBudget(p_budget));
        }
        if init.states.len() != problem.inputs.len() {
            return Err(PipelineError::InvalidProblem(format!(
                "{} prepared states for {} inputs",
                init.states.len(),
                problem.inputs.len()
            )));
        }
        let dim = device.dim_logical();
        for (x, state) in problem.inputs.iter().zip(&init.states) {
            if state.dim() != dim {
                return Err(PipelineError::DimensionMismatch(format!(
                    "state for input {x:?} has dim {}, logical space has dim {dim}",
                    state.dim()
                )));
            }
            let defect = state.purity_rank_defect();
            if defect > PURITY_TOL {
                return Err(PipelineError::NotPure { input: x.clone(), defect });
            }
        }
        if readout.dim() != dim {
            return Err(PipelineError::DimensionMismatch(format!(
                "readout acts on dim {}, logical space has dim {dim}",
                readout.dim()
            )));
        }
        if readout.outcomes() != problem.outputs.as_slice() {
            return Err(PipelineError::OutcomeMismatch {
                readout: readout.outcomes().to_vec(),
                outputs: problem.outputs.clone(),
            });
        }
        Ok(Self { problem, init, device, readout, p_budget })
    }

    pub fn problem(&self) -> &ClassicalProblem {
        &self.problem
    }

    pub fn device(&self) -> &QccInstance {
        &self.device
    }

    pub fn readout(&self) -> &Povm {
        &self.readout
    }

    pub fn p_budget(&self) -> f64 {
        self.p_budget
    }

    /// Forms the dressed map and computes `α̂` once for all later queries.
    pub fn evaluate(self, budget: &OptBudget) -> Result<EvaluatedPipeline, PipelineError> {
        let dressed = dressed_map(&self.device)?;
        let ideal = self.device.ideal();
        let alpha_hat = so_norm_sa(&SuperoperatorDelta::between(&dressed, &ideal)?, budget)?.value;
        let sqrt_effects = povm_sqrt(&self.readout)?;
        Ok(EvaluatedPipeline { inst: self, dressed, ideal, alpha_hat, sqrt_effects, seed: budget.seed })
    }
}

/// A pipeline with its dressed map, target channel and `α̂` fixed.
#[derive(Debug, Clone)]
pub struct EvaluatedPipeline {
    inst: PipelineInstance,
    dressed: QuantumChannel,
    ideal: QuantumChannel,
    alpha_hat: f64,
    sqrt_effects: Vec<ComplexMatrix>,
    seed: u64,
}

/// Probabilities over the output labels, in label order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    pub outcomes: Vec<String>,
    pub probabilities: Vec<f64>,
}

impl Distribution {
    pub fn probability(&self, label: &str) -> Option<f64> {
        self.outcomes.iter().position(|o| o == label).map(|k| self.probabilities[k])
    }
}

impl EvaluatedPipeline {
    pub fn instance(&self) -> &PipelineInstance {
        &self.inst
    }

    pub fn alpha_hat(&self) -> f64 {
        self.alpha_hat
    }

    pub fn dressed(&self) -> &QuantumChannel {
        &self.dressed
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `α̂ + p < 1/2`.
    pub fn majority_vote_guaranteed(&self) -> bool {
        self.alpha_hat + self.inst.p_budget < 0.5
    }

    fn state(&self, x: &str) -> Result<&DensityMatrix, PipelineError> {
        Ok(&self.inst.init.states[self.inst.problem.input_index(x)?])
    }

    fn distribution_through(&self, channel: &QuantumChannel, x: &str) -> Result<Distribution, PipelineError> {
        let rho = channel.apply(self.state(x)?)?;
        let mut probabilities = Vec::with_capacity(self.sqrt_effects.len());
        for ((label, effect), root) in
            self.inst.readout.outcomes().iter().zip(self.inst.readout.effects()).zip(&self.sqrt_effects)
        {
            let sandwich = root.matmul(rho.matrix()).matmul(root).trace().re;
            let direct = effect.matmul(rho.matrix()).trace().re;
            let discrepancy = (sandwich - direct).abs();
            if discrepancy > SANDWICH_TOL {
                return Err(PipelineError::SandwichMismatch {
                    input: x.to_string(),
                    outcome: label.clone(),
                    discrepancy,
                });
            }
            probabilities.push(sandwich);
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL || probabilities.iter().any(|&p| p < -1e-12) {
            return Err(PipelineError::Normalization { input: x.to_string(), sum });
        }
        Ok(Distribution { outcomes: self.inst.readout.outcomes().to_vec(), probabilities })
    }

    /// `Pr_x(y) = tr(√E_y P^M(ρ_x) √E_y)`.
    pub fn outcome_distribution(&self, x: &str) -> Result<Distribution, PipelineError> {
        self.distribution_through(&self.dressed, x)
    }

    /// The same distribution with the device replaced by the target unitary.
    pub fn ideal_distribution(&self, x: &str) -> Result<Distribution, PipelineError> {
        self.distribution_through(&self.ideal, x)
    }

    fn target_probability(&self, dist: &Distribution, x: &str) -> Result<f64, PipelineError> {
        let y = self.inst.problem.value(x)?;
        Ok(dist.probability(y).expect("readout outcomes equal problem outputs"))
    }

    /// `Pr_x(F(x)) - (1 - (p + α̂))`.
    pub fn near_commutativity_margin(&self, x: &str) -> Result<f64, PipelineError> {
        let pr = self.target_probability(&self.outcome_distribution(x)?, x)?;
        Ok(pr - (1.0 - (self.inst.p_budget + self.alpha_hat)))
    }

    /// Ideal-device margin `Pr^G_x(F(x)) - (1 - p)`.
    pub fn ideal_margin(&self, x: &str) -> Result<f64, PipelineError> {
        let pr = self.target_probability(&self.ideal_distribution(x)?, x)?;
        Ok(pr - (1.0 - self.inst.p_budget))
    }

    /// `tr(√E_{F(x)} (P^M - G)(ρ_x) √E_{F(x)})`.
    pub fn middle_step(&self, x: &str) -> Result<f64, PipelineError> {
        let real = self.target_probability(&self.outcome_distribution(x)?, x)?;
        let ideal = self.target_probability(&self.ideal_distribution(x)?, x)?;
        Ok(real - ideal)
    }

    /// Checks the ideal precondition at every input, then the realistic
    /// near-commutativity and the middle-step bound.
    pub fn near_commutativity_check(&self) -> Result<NearCommutativityReport, PipelineError> {
        let mut rows = Vec::with_capacity(self.inst.problem.inputs.len());
        let mut failures = Vec::new();
        for x in &self.inst.problem.inputs {
            let target = self.inst.problem.value(x)?.to_string();
            let probability = self.target_probability(&self.outcome_distribution(x)?, x)?;
            let ideal_probability = self.target_probability(&self.ideal_distribution(x)?, x)?;
            let ideal_margin = ideal_probability - (1.0 - self.inst.p_budget);
            if ideal_margin < -MARGIN_TOL {
                failures.push((x.clone(), ideal_margin));
            }
            let margin = probability - (1.0 - (self.inst.p_budget + self.alpha_hat));
            let middle_step = probability - ideal_probability;
            rows.push(NearCommutativityRow {
                input: x.clone(),
                target,
                probability,
                ideal_probability,
                margin,
                ideal_margin,
                middle_step,
                middle_step_within_alpha: middle_step.abs() <= self.alpha_hat + MIDDLE_STEP_TOL,
                holds: margin >= -MARGIN_TOL,
            });
        }
        if !failures.is_empty() {
            return Err(PipelineError::PreconditionFailed { p_budget: self.inst.p_budget, failures });
        }
        Ok(NearCommutativityReport {
            alpha_hat: self.alpha_hat,
            p_budget: self.inst.p_budget,
            majority_vote_guaranteed: self.majority_vote_guaranteed(),
            rows,
        })
    }

    /// Repeats `n_trials` samples of the readout and decides by majority, `repeats` times.
    pub fn majority_vote_run(
        &self,
        x: &str,
        n_trials: usize,
        repeats: usize,
        seed: u64,
    ) -> Result<VoteStatistics, PipelineError> {
        let outputs = self.inst.problem.outputs();
        if outputs.len() != 2 {
            return Err(PipelineError::NonBinaryOutputs(outputs.len()));
        }
        if n_trials.is_multiple_of(2) {
            return Err(PipelineError::EvenTrials(n_trials));
        }
        if repeats == 0 {
            return Err(PipelineError::ZeroRepeats);
        }
        let dist = self.outcome_distribution(x)?;
        let target = self.inst.problem.value(x)?.to_string();
        let success_probability = self.target_probability(&dist, x)?;
        let results: Vec<VoteResult> = (0..repeats)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(r as u64);
                let mut tally = vec![0usize; dist.probabilities.len()];
                for _ in 0..n_trials {
                    tally[sample_index(&dist.probabilities, rng.random::<f64>())] += 1;
                }
                let decided = if tally[0] > tally[1] { 0 } else { 1 };
                VoteResult {
                    repeat: r,
                    tally: dist.outcomes.iter().cloned().zip(tally.iter().copied()).collect(),
                    decided: dist.outcomes[decided].clone(),
                    correct: dist.outcomes[decided] == target,
                }
            })
            .collect();
        let successes = results.iter().filter(|v| v.correct).count();
        let empirical_success = successes as f64 / repeats as f64;
        let exact_success = majority_success_probability(success_probability, n_trials);
        let standard_error = (exact_success * (1.0 - exact_success) / repeats as f64).sqrt();
        Ok(VoteStatistics {
            input: x.to_string(),
            target,
            n_trials,
            repeats,
            seed,
            success_probability,
            exact_success,
            empirical_success,
            standard_error,
            within_three_sigma: (empirical_success - exact_success).abs() <= 3.0 * standard_error + 1e-12,
            guaranteed: self.majority_vote_guaranteed(),
            results,
        })
    }
}

/// Inverse-CDF draw over outcomes in their fixed order.
fn sample_index(probabilities: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    for (k, p) in probabilities.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return k;
        }
    }
    probabilities.len() - 1
}

/// `P(Binomial(n, p) > n/2)` for odd `n`, by direct summation of the upper tail.
pub fn majority_success_probability(p: f64, n: usize) -> f64 {
    assert!(n % 2 == 1, "odd trial count required");
    let p = p.clamp(0.0, 1.0);
    let threshold = n / 2 + 1;
    if p == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return 1.0;
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut log_choose = 0.0;
    let mut total = 0.0;
    for k in 0..=n {
        if k > 0 {
            log_choose += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        if k >= threshold {
            total += (log_choose + k as f64 * lp + (n - k) as f64 * lq).exp();
        }
    }
    total.min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearCommutativityRow {
    pub input: String,
    pub target: String,
    /// `Pr_x(F(x))` through the device.
    pub probability: f64,
    /// `Pr_x(F(x))` through the target unitary.
    pub ideal_probability: f64,
    /// `probability - (1 - (p + α̂))`.
    pub margin: f64,
    /// `ideal_probability - (1 - p)`.
    pub ideal_margin: f64,
    /// `probability - ideal_probability`.
    pub middle_step: f64,
    pub middle_step_within_alpha: bool,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearCommutativityReport {
    pub alpha_hat: f64,
    pub p_budget: f64,
    pub majority_vote_guaranteed: bool,
    pub rows: Vec<NearCommutativityRow>,
}

impl NearCommutativityReport {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.holds && r.middle_step_within_alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoteResult {
    pub repeat: usize,
    pub tally: Vec<(String, usize)>,
    pub decided: String,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoteStatistics {
    pub input: String,
    pub target: String,
    pub n_trials: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Single-shot `Pr_x(F(x))`.
    pub success_probability: f64,
    /// Exact majority success probability from the binomial tail.
    pub exact_success: f64,
    pub empirical_success: f64,
    /// Standard error of the empirical rate under the exact probability.
    pub standard_error: f64,
    pub within_three_sigma: bool,
    pub guaranteed: bool,
    pub results: Vec<VoteResult>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::LinkingMapPair;
    use proptest::prelude::*;

    fn budget() -> OptBudget {
        OptBudget { restarts: 16, iterations: 200, step: 0.5, seed: 3 }
    }

    fn bits() -> Vec<String> {
        vec!["0".to_string(), "1".to_string()]
    }

    fn qubit_pipeline(device: QuantumChannel, readout: Povm, p: f64) -> EvaluatedPipeline {
        let device = QccInstance::new(ComplexMatrix::identity(2), device, LinkingMapPair::trivial(2), 1.0).unwrap();
        PipelineInstance::new(ClassicalProblem::identity(2), InitializationMap::computational(2, 2), device, readout, p)
            .unwrap()
            .evaluate(&budget())
            .unwrap()
    }

    fn repetition_pipeline(q: f64, p: f64) -> EvaluatedPipeline {
        let noise = QuantumChannel::iid_noise(&QuantumChannel::bit_flip(q).unwrap(), 3);
        let device =
            QccInstance::new(ComplexMatrix::identity(2), noise, LinkingMapPair::repetition_code(), 0.1).unwrap();
        PipelineInstance::new(
            ClassicalProblem::identity(2),
            InitializationMap::computational(2, 2),
            device,
            Povm::computational(bits()).unwrap(),
            p,
        )
        .unwrap()
        .evaluate(&budget())
        .unwrap()
    }

    fn noisy_readout(r: f64) -> Povm {
        Povm::new(
            bits(),
            vec![ComplexMatrix::from_real_diag(&[r, 1.0 - r]), ComplexMatrix::from_real_diag(&[1.0 - r, r])],
        )
        .unwrap()
    }

    #[test]
    fn problem_validation() {
        let err = ClassicalProblem::new(bits(), bits(), vec!["0".into()]);
        assert!(matches!(err, Err(PipelineError::InvalidProblem(_))));
        let err = ClassicalProblem::new(bits(), bits(), vec!["0".into(), "2".into()]);
        assert!(matches!(err, Err(PipelineError::InvalidProblem(_))));
        let err = ClassicalProblem::new(vec!["a".into(), "a".into()], bits(), vec!["0".into(), "1".into()]);
        assert!(matches!(err, Err(PipelineError::InvalidProblem(_))));
        let not = ClassicalProblem::new(bits(), bits(), vec!["1".into(), "0".into()]).unwrap();
        assert_eq!(not.value("0").unwrap(), "1");
        assert!(matches!(not.value("7"), Err(PipelineError::UnknownInput(_))));
    }

    #[test]
    fn instance_validation() {
        let device =
            QccInstance::new(ComplexMatrix::identity(2), QuantumChannel::identity(2), LinkingMapPair::trivial(2), 0.0)
                .unwrap();
        let mixed =
            InitializationMap::new(vec![DensityMatrix::maximally_mixed(2), DensityMatrix::basis(2, 1)]).unwrap();
        let err = PipelineInstance::new(
            ClassicalProblem::identity(2),
            mixed,
            device.clone(),
            Povm::computational(bits()).unwrap(),
            0.1,
        );
        assert!(matches!(err, Err(PipelineError::NotPure { .. })));
        let relabeled = Povm::computational(vec!["a".into(), "b".into()]).unwrap();
        let err = PipelineInstance::new(
            ClassicalProblem::identity(2),
            InitializationMap::computational(2, 2),
            device.clone(),
            relabeled,
            0.1,
        );
        assert!(matches!(err, Err(PipelineError::OutcomeMismatch { .. })));
        let err = PipelineInstance::new(
            ClassicalProblem::identity(2),
            InitializationMap::computational(2, 2),
            device,
            Povm::computational(bits()).unwrap(),
            1.0,
        );
        assert!(matches!(err, Err(PipelineError::InvalidPBudget(_))));
    }

    #[test]
    fn distribution_examples() {
        let perfect = qubit_pipeline(QuantumChannel::identity(2), Povm::computational(bits()).unwrap(), 0.1);
        for x in ["0", "1"] {
            let d = perfect.outcome_distribution(x).unwrap();
            assert!((d.probability(x).unwrap() - 1.0).abs() < 1e-12);
        }

        let rep = repetition_pipeline(0.1, 0.05);
        let f = 3.0 * 0.01 - 2.0 * 0.001;
        for x in ["0", "1"] {
            let pr = rep.outcome_distribution(x).unwrap().probability(x).unwrap();
            assert!((pr - (1.0 - f)).abs() < 1e-12);
        }

        let uniform = Povm::new(bits(), vec![ComplexMatrix::identity(2).scale_real(0.5); 2]).unwrap();
        let u = qubit_pipeline(QuantumChannel::amplitude_damping(0.3).unwrap(), uniform, 0.1);
        for x in ["0", "1"] {
            let d = u.outcome_distribution(x).unwrap();
            assert!(d.probabilities.iter().all(|p| (p - 0.5).abs() < 1e-12));
        }
    }

    #[test]
    fn margin_examples() {
        let perfect = qubit_pipeline(QuantumChannel::identity(2), Povm::computational(bits()).unwrap(), 0.1);
        assert!((perfect.near_commutativity_margin("0").unwrap() - 0.1).abs() < 1e-12);
        let report = perfect.near_commutativity_check().unwrap();
        assert!(report.rows.iter().all(|r| (r.margin - 0.1).abs() < 1e-12));

        // G exactly, readout giving Pr = 1 - p exactly: margin equals α̂ = 0
        let boundary = qubit_pipeline(QuantumChannel::identity(2), noisy_readout(0.8), 0.2);
        assert!(boundary.alpha_hat() < 1e-12);
        assert!(boundary.near_commutativity_margin("0").unwrap().abs() < 1e-12);
        assert!(boundary.ideal_margin("0").unwrap().abs() < 1e-12);
        assert!(boundary.near_commutativity_check().unwrap().all_hold());
    }

    #[test]
    fn margin_dominates_slack_minus_alpha() {
        for q in [0.05, 0.1, 0.2] {
            let pipeline = qubit_pipeline(QuantumChannel::bit_flip(q).unwrap(), noisy_readout(0.9), 0.2);
            for x in ["0", "1"] {
                let slack = pipeline.ideal_margin(x).unwrap();
                let margin = pipeline.near_commutativity_margin(x).unwrap();
                // margin - slack = α̂ + middle step ≥ 0
                assert!(margin >= slack - 1e-12);
                assert!(pipeline.middle_step(x).unwrap().abs() <= pipeline.alpha_hat() + MIDDLE_STEP_TOL);
            }
        }
    }

    #[test]
    fn near_commutativity_on_repetition_device() {
        let rep = repetition_pipeline(0.1, 0.05);
        assert!((rep.alpha_hat() - 0.056).abs() < 1e-6);
        let report = rep.near_commutativity_check().unwrap();
        assert!(report.all_hold());
        assert!(report.majority_vote_guaranteed);
        for row in &report.rows {
            assert!((row.probability - 0.972).abs() < 1e-12);
            assert!(row.probability >= 1.0 - 0.106);
        }
    }

    #[test]
    fn precondition_failure_names_inputs() {
        let pipeline = qubit_pipeline(QuantumChannel::identity(2), noisy_readout(0.7), 0.1);
        match pipeline.near_commutativity_check() {
            Err(PipelineError::PreconditionFailed { failures, .. }) => {
                let names: Vec<&str> = failures.iter().map(|(x, _)| x.as_str()).collect();
                assert_eq!(names, ["0", "1"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn no_guarantee_flag() {
        let pipeline =
            qubit_pipeline(QuantumChannel::bit_flip(0.3).unwrap(), Povm::computational(bits()).unwrap(), 0.1);
        assert!((pipeline.alpha_hat() - 0.6).abs() < 1e-6);
        assert!(!pipeline.majority_vote_guaranteed());
        let stats = pipeline.majority_vote_run("0", 11, 20, 1).unwrap();
        assert!(!stats.guaranteed);
    }

    #[test]
    fn voting_examples() {
        let perfect = qubit_pipeline(QuantumChannel::identity(2), Povm::computational(bits()).unwrap(), 0.1);
        let stats = perfect.majority_vote_run("1", 5, 50, 9).unwrap();
        assert_eq!(stats.empirical_success, 1.0);
        assert!((stats.exact_success - 1.0).abs() < 1e-12);
        assert!(stats.results.iter().all(|v| v.tally.iter().map(|(_, c)| c).sum::<usize>() == 5));

        let noisy = qubit_pipeline(QuantumChannel::identity(2), noisy_readout(0.7), 0.35);
        let stats = noisy.majority_vote_run("0", 101, 1000, 42).unwrap();
        assert!((stats.success_probability - 0.7).abs() < 1e-12);
        assert!(stats.within_three_sigma, "{} vs {}", stats.empirical_success, stats.exact_success);

        let again = noisy.majority_vote_run("0", 101, 1000, 42).unwrap();
        assert_eq!(stats, again);

        assert!(matches!(noisy.majority_vote_run("0", 4, 10, 0), Err(PipelineError::EvenTrials(4))));
        assert!(matches!(noisy.majority_vote_run("0", 5, 0, 0), Err(PipelineError::ZeroRepeats)));
    }

    #[test]
    fn voting_rejects_non_binary_outputs() {
        let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let problem = ClassicalProblem::new(labels.clone(), labels.clone(), labels.clone()).unwrap();
        let device =
            QccInstance::new(ComplexMatrix::identity(3), QuantumChannel::identity(3), LinkingMapPair::trivial(3), 0.0)
                .unwrap();
        let pipeline = PipelineInstance::new(
            problem,
            InitializationMap::computational(3, 3),
            device,
            Povm::computational(labels).unwrap(),
            0.1,
        )
        .unwrap()
        .evaluate(&budget())
        .unwrap();
        assert!(matches!(pipeline.majority_vote_run("a", 3, 3, 0), Err(PipelineError::NonBinaryOutputs(3))));
    }

    #[test]
    fn binomial_examples() {
        assert_eq!(majority_success_probability(1.0, 101), 1.0);
        assert_eq!(majority_success_probability(0.0, 101), 0.0);
        assert!((majority_success_probability(0.5, 101) - 0.5).abs() < 1e-12);
        assert!((majority_success_probability(0.7, 1) - 0.7).abs() < 1e-15);
        // n = 3: p³ + 3p²(1-p)
        let p: f64 = 0.6;
        assert!((majority_success_probability(p, 3) - (p.powi(3) + 3.0 * p * p * (1.0 - p))).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn binomial_success_is_monotone_in_n(p in 0.501f64..0.999) {
            let mut previous = 0.0;
            for n in (1..=201).step_by(2) {
                let s = majority_success_probability(p, n);
                prop_assert!(s >= previous - 1e-12);
                previous = s;
            }
        }
    }
}

//! A classical identity problem run through a noisy repetition-code device, then majority voting.

use qcc_core::channel::{LinkingMapPair, Povm, QuantumChannel};
use qcc_core::linalg::ComplexMatrix;
use qcc_core::norm::OptBudget;
use qcc_core::pipeline::{ClassicalProblem, InitializationMap, PipelineInstance};
use qcc_core::qcc::QccInstance;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let noise = QuantumChannel::iid_noise(&QuantumChannel::bit_flip(0.1)?, 3);
    let device = QccInstance::new(ComplexMatrix::identity(2), noise, LinkingMapPair::repetition_code(), 0.06)?;
    let readout = Povm::computational(vec!["0".into(), "1".into()])?;
    let pipeline = PipelineInstance::new(
        ClassicalProblem::identity(2),
        InitializationMap::computational(2, 2),
        device,
        readout,
        0.0,
    )?;
    let evaluated = pipeline.evaluate(&OptBudget { restarts: 16, ..OptBudget::default() }.with_seed(3))?;
    let check = evaluated.near_commutativity_check()?;
    println!("alpha_hat {:.6}, guaranteed {}", check.alpha_hat, check.majority_vote_guaranteed);
    for row in &check.rows {
        println!("x = {}: Pr = {:.6}, margin {:.6}", row.input, row.probability, row.margin);
    }
    for n in [1, 5, 11, 21] {
        let stats = evaluated.majority_vote_run("0", n, 2000, 42)?;
        println!(
            "n = {n:>2}: exact {:.6}, empirical {:.6} ± {:.6}",
            stats.exact_success, stats.empirical_success, stats.standard_error
        );
    }
    Ok(())
}

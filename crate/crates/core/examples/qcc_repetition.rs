//! α̂ for a 3-qubit repetition code under iid bit-flip noise, next to 2(3q² − 2q³).

use qcc_core::channel::{LinkingMapPair, QuantumChannel};
use qcc_core::linalg::ComplexMatrix;
use qcc_core::norm::OptBudget;
use qcc_core::qcc::{qcc_alpha_batch, QccInstance, QccOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let qs = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3];
    let instances = qs
        .iter()
        .map(|&q| {
            let noise = QuantumChannel::iid_noise(&QuantumChannel::bit_flip(q)?, 3);
            Ok(QccInstance::new(ComplexMatrix::identity(2), noise, LinkingMapPair::repetition_code(), 0.06)?)
        })
        .collect::<Result<Vec<_>, Box<dyn std::error::Error>>>()?;
    let budget = OptBudget { restarts: 16, ..OptBudget::default() }.with_seed(7);
    let reports = qcc_alpha_batch(&instances, &budget, &QccOptions::default());
    println!("{:>6} {:>14} {:>14} {:>6}", "q", "alpha_hat", "2(3q^2-2q^3)", "pass");
    for (q, report) in qs.iter().zip(reports) {
        let report = report?;
        let closed = 2.0 * (3.0 * q * q - 2.0 * q * q * q);
        println!("{q:>6.2} {:>14.9} {closed:>14.9} {:>6}", report.alpha_hat, report.passes);
    }
    Ok(())
}

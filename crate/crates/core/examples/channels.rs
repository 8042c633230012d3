//! Kraus, Choi and Liouville views of a few standard channels.

use qcc_core::channel::{DensityMatrix, QuantumChannel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let channels = [
        ("bit_flip(0.1)", QuantumChannel::bit_flip(0.1)?),
        ("amplitude_damping(0.3)", QuantumChannel::amplitude_damping(0.3)?),
        ("depolarizing(2, 0.2)", QuantumChannel::depolarizing(2, 0.2)?),
        ("completely_depolarizing(2)", QuantumChannel::completely_depolarizing(2)),
    ];
    let rho = DensityMatrix::basis(2, 1);
    println!("{:<28} {:>6} {:>12} {:>13} {:>12}", "channel", "kraus", "choi_min_eig", "repr_mismatch", "<1|out|1>");
    for (name, ch) in &channels {
        let out = ch.apply(&rho)?;
        println!(
            "{:<28} {:>6} {:>12.3e} {:>13.3e} {:>12.6}",
            name,
            ch.kraus().len(),
            ch.choi_min_eigenvalue(),
            ch.representation_mismatch(),
            out.matrix()[(1, 1)].re
        );
    }

    let three = QuantumChannel::iid_noise(&QuantumChannel::bit_flip(0.1)?, 3);
    println!("\niid bit flip on 3 qubits: dim {}, {} Kraus operators", three.dim_in(), three.kraus().len());
    Ok(())
}

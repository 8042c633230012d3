//! SO^sa versus diamond norm: the identity against the completely depolarizing qubit channel.

use qcc_core::channel::QuantumChannel;
use qcc_core::norm::{diamond_norm, so_norm_bruteforce, so_norm_sa, OptBudget, SuperoperatorDelta};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let delta = SuperoperatorDelta::between(&QuantumChannel::identity(2), &QuantumChannel::completely_depolarizing(2))?;
    let budget = OptBudget { restarts: 16, ..OptBudget::default() }.with_seed(1);
    let so = so_norm_sa(&delta, &budget)?;
    let grid = so_norm_bruteforce(&delta, 5_000)?;
    let diamond = diamond_norm(&delta, &budget)?;
    println!("SO^sa norm     {:.9}", so.value);
    println!("brute force    {:.9}", grid.value);
    println!("diamond norm   {:.9}", diamond.value);
    println!("gap            {:.9}", diamond.value - so.value);
    Ok(())
}

//! Damping-rate sweep: propagator distances, the t·‖ΔA‖ bound, and resolvent continuity.

use qcc_core::dynamics::{
    resolvent_continuity_scan, stability_sweep, uniform_grid, GeneratorFamily, LindbladGenerator, OperatorNorm,
};
use qcc_core::norm::OptBudget;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let family = GeneratorFamily::new("gamma", uniform_grid(1.0, 2.0, 9), |g| Ok(LindbladGenerator::damping(g)))?;
    let budget = OptBudget { restarts: 8, ..OptBudget::default() }.with_seed(5);
    let sweep = stability_sweep(&family, 1.0, 1.0, &budget)?;
    println!("{:>8} {:>12} {:>12} {:>6}", "gamma", "distance", "t*gap", "ok");
    for row in &sweep.rows {
        println!("{:>8.4} {:>12.6} {:>12.6} {:>6}", row.z, row.distance, row.duhamel_bound, row.within_bound);
    }

    let lambdas = [0.1, 1.0, 10.0];
    println!("\nmax resolvent gap per grid");
    for count in [9, 17, 33] {
        let refined = family.with_grid(uniform_grid(1.0, 2.0, count))?;
        let scan = resolvent_continuity_scan(&refined, &lambdas, OperatorNorm::SoSa, &budget)?;
        let gaps: Vec<String> = lambdas.iter().map(|&l| format!("{:.3e}", scan.max_gap(l))).collect();
        println!("{count:>3} points: {}", gaps.join("  "));
    }
    Ok(())
}

//! Dissipative preparation of the 3-qubit cluster state with depolarizing corrections.

use dissipative::dse::{dse_channel, graph_hamiltonian, run_to_convergence, CorrectionSet, GraphSpec};
use dissipative::random;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dissipative::Result<()> {
    let h = graph_hamiltonian(&GraphSpec::path(3)?)?;
    let ch = dse_channel(&h, &CorrectionSet::depolarizing(h.n_terms())?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rho0 = random::pure_state(h.system(), &mut rng);
    let trace = run_to_convergence(ch.channel(), &h, &rho0, 1e-8, 2000)?;
    println!("{:>6} {:>14} {:>16}", "step", "energy", "ground overlap");
    for r in trace.records.iter().filter(|r| r.step.is_power_of_two() || r.step == 0) {
        println!("{:>6} {:>14.6e} {:>16.12}", r.step, r.energy, r.ground_overlap);
    }
    match trace.converged_at {
        Some(step) => println!("energy below 1e-8 after {step} steps"),
        None => println!("not converged within 2000 steps"),
    }
    Ok(())
}

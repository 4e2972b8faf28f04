//! The 2x2 toric code: ground-space degeneracy and convergence under the stabilizer walk.

use dissipative::dse::{dse_channel, run_to_convergence, toric_code, CorrectionSet};
use dissipative::random;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dissipative::Result<()> {
    let h = toric_code(2, 2)?;
    let report = h.validate()?;
    println!(
        "terms: {}, ground dimension: {}, commuting: {}",
        h.n_terms(),
        report.ground_dim,
        report.is_commuting(1e-12)
    );
    let ch = dse_channel(&h, &CorrectionSet::stabilizer_walk(&h)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for k in 0..3 {
        let rho0 = random::pure_state(h.system(), &mut rng);
        let trace = run_to_convergence(ch.channel(), &h, &rho0, 1e-6, 2000)?;
        let last = trace.final_record();
        println!("input {k}: {} steps, energy {:.2e}, overlap {:.9}", last.step, last.energy, last.ground_overlap);
    }
    Ok(())
}

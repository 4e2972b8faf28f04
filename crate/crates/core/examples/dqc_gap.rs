//! Spectral gap of the dissipative circuit generator against its closed form.

use std::time::Instant;

use dissipative::dqc::{closed_form_gap, compile_direct, spectrum, QuantumCircuit};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dissipative::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    println!("{:>3} {:>3} {:>22} {:>22} {:>10} {:>9}", "T", "N", "numeric gap", "closed form", "error", "seconds");
    for steps in 1..=6 {
        for n_qubits in 1..=3 {
            let start = Instant::now();
            let circuit = QuantumCircuit::random(n_qubits, steps, &mut rng)?;
            let gap = spectrum(&compile_direct(&circuit)?)?.gap;
            let exact = closed_form_gap(steps);
            println!(
                "{steps:>3} {n_qubits:>3} {gap:>22.16} {exact:>22.16} {:>10.2e} {:>9.2}",
                (gap - exact).abs(),
                start.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}

//! Bell circuit compiled with a unary clock: gap, wrong-subspace decay and readout.

use dissipative::dqc::{bell_circuit, compile_direct, compile_unary, readout, spectrum};

fn main() -> dissipative::Result<()> {
    let circuit = bell_circuit();
    let direct = compile_direct(&circuit)?;
    let unary = compile_unary(&circuit)?;
    println!("clock sites: {:?}", unary.clock_sites());
    println!("direct gap: {:.12}", spectrum(&direct)?.gap);
    println!("unary gap:  {:.12}", spectrum(&unary)?.gap);

    let slowest = unary.wrong_subspace_eigenvalues()?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    println!("slowest wrong-subspace decay: {slowest:.12}");

    let steady = unary.generator()?.steady_states()?;
    let (rho, weight) = unary.to_direct_layout(&steady.states[0])?;
    let r = readout(&rho, &circuit)?;
    println!("weight outside valid clock words: {:.2e}", 1.0 - weight);
    println!("P(final clock) = {:.12}  (1/(T+1) = {:.12})", r.p_final, 1.0 / (circuit.steps() + 1) as f64);
    Ok(())
}

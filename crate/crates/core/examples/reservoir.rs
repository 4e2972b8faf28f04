//! Amplitude damping engineered through a decaying ancilla, swept over Γ/Ω.

use dissipative::quantum::{gates, Operator};
use dissipative::reservoir::{elimination_sweep, steady_state_mismatch, AncillaEmbedding, CheckOptions};

fn main() -> dissipative::Result<()> {
    let target = Operator::single_site(gates::sigma_minus())?;
    let omega = 1.0;
    let sweep = elimination_sweep(&target, omega, &[10.0, 30.0, 100.0], &CheckOptions::default())?;
    println!("{:>8} {:>14} {:>12} {:>14}", "Γ/Ω", "fitted rate", "κΓ/Ω²", "max distance");
    for r in &sweep.reports {
        println!(
            "{:>8.1} {:>14.6e} {:>12.6} {:>14.6e}",
            r.gamma / r.omega,
            r.fitted_rate,
            r.fitted_constant,
            r.max_trace_distance
        );
    }
    println!("rate exponent in Γ: {:.4}", sweep.exponent);
    println!("fitted constant:    {:.4}", sweep.constant);

    let e = AncillaEmbedding::new(target, omega, 100.0 * omega)?;
    println!("steady-state distance at Γ/Ω = 100: {:.3e}", steady_state_mismatch(&e)?);
    Ok(())
}

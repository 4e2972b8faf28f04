//! Amplitude damping as a channel and as the generator n(T - id).

use dissipative::linalg::{c, CMatrix, C64};
use dissipative::liouville::{channel_to_generator, CpMapChannel};
use dissipative::quantum::{LocalOperator, SiteSystem};

fn real_parts(values: &[C64]) -> Vec<f64> {
    let mut re: Vec<f64> = values.iter().map(|z| z.re).collect();
    re.sort_by(|a, b| b.total_cmp(a));
    re
}

fn main() -> dissipative::Result<()> {
    let system = SiteSystem::qubits(1)?;
    let p: f64 = 0.3;
    let k0 = CMatrix::from_shape_vec((2, 2), vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c((1.0 - p).sqrt(), 0.0)])
        .expect("2x2");
    let k1 =
        CMatrix::from_shape_vec((2, 2), vec![c(0.0, 0.0), c(p.sqrt(), 0.0), c(0.0, 0.0), c(0.0, 0.0)]).expect("2x2");
    let kraus = vec![LocalOperator::on(&system, k0, vec![0])?, LocalOperator::on(&system, k1, vec![0])?];
    let ch = CpMapChannel::new(system, vec![(1.0, kraus)])?;
    println!("channel eigenvalues:            {:.6?}", real_parts(&ch.superoperator()?.eigenvalues()?));
    for n in [1, 4] {
        let gen = channel_to_generator(&ch, n)?;
        println!("generator eigenvalues (n = {n}): {:.6?}", real_parts(&gen.eigenvalues()?));
    }
    let fixed = channel_to_generator(&ch, 1)?.steady_states()?;
    let rho = fixed.states[0].matrix();
    println!("fixed point populations: {:.6} {:.6}", rho[[0, 0]].re, rho[[1, 1]].re);
    Ok(())
}

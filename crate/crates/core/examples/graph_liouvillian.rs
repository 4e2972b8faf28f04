//! Graph-state Liouvillian spectra for the 4-vertex path, ring and star.

use dissipative::dse::{graph_liouvillian, graph_state, GraphSpec};
use dissipative::quantum::pure_fidelity;

fn main() -> dissipative::Result<()> {
    let graphs = [
        ("path", GraphSpec::path(4)?),
        ("ring", GraphSpec::cycle(4)?),
        ("star", GraphSpec::new(4, vec![(0, 1), (0, 2), (0, 3)])?),
    ];
    for (name, g) in graphs {
        let gen = graph_liouvillian(&g)?.generator()?;
        let mut re: Vec<f64> = gen.eigenvalues()?.iter().map(|z| z.re).collect();
        re.sort_by(|a, b| b.total_cmp(a));
        re.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let steady = gen.steady_states()?;
        let fid = pure_fidelity(&steady.states[0], &graph_state(&g))?;
        println!("{name:>5}: distinct Re λ {re:.3?}, kernel {}, fidelity {fid:.12}", steady.kernel_dim);
    }
    Ok(())
}

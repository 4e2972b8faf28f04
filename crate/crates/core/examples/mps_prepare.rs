//! AKLT preparation on four sites: parent Hamiltonian and the level-by-level schedule.

use dissipative::mps::{
    parent_hamiltonian, prepare, MatrixProductState, PreparationMode, PreparationModel, Preset, ScheduleParams,
};
use dissipative::quantum::DensityMatrix;

fn main() -> dissipative::Result<()> {
    let mps = MatrixProductState::preset(Preset::Aklt, 4)?;
    let v = parent_hamiltonian(&mps)?.validate()?;
    println!("two-site rank {}, parent ground dimension {}", mps.two_site_rank()?, v.ground_dim);

    let model = PreparationModel::new(&mps)?;
    let params = ScheduleParams::new(10.0, 4)?;
    let rho0 = DensityMatrix::maximally_mixed(model.system());
    let report = prepare(&model, &params, &rho0, params.step_budget(), PreparationMode::Deterministic)?;
    println!("levels {}, step budget {}, mode {:?}", params.levels(), params.step_budget(), report.mode);
    println!("{:>8} {:>12} {:>12}", "step", "fidelity", "ring error");
    for cp in &report.checkpoints {
        println!("{:>8} {:>12.6} {:>12.6}", cp.step, cp.fidelity, cp.errors.ring());
    }
    Ok(())
}

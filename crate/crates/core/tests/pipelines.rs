use dissipative::dqc::{closed_form_gap, compile_direct, expected_fixed_point, spectrum};
use dissipative::dse::{dse_channel, run_to_convergence, toric_code, CorrectionSet};
use dissipative::formats::{parse_circuit, parse_hamiltonian, parse_mps};
use dissipative::liouville::channel_to_generator;
use dissipative::mps::{mps_to_state, parent_hamiltonian};
use dissipative::quantum::{fidelity, gates, DensityMatrix, Operator};
use dissipative::reservoir::{elimination_check, AncillaEmbedding, CheckOptions};
use dissipative::Error;

#[test]
fn circuit_file_compiles_to_the_closed_form_gap() {
    let text = "n_qubits = 2\n[[gate]]\nname = \"H\"\nsupport = [0]\n[[gate]]\nname = \"CNOT\"\nsupport = [0, 1]\n\
                [[gate]]\nname = \"RZ\"\nangle = 0.4\nsupport = [1]\n";
    let circuit = parse_circuit(text).unwrap();
    let compiled = compile_direct(&circuit).unwrap();
    assert!((spectrum(&compiled).unwrap().gap - closed_form_gap(3)).abs() < 1e-10);
    let steady = compiled.generator().unwrap().steady_states().unwrap();
    assert_eq!(steady.kernel_dim, 1);
    assert!(fidelity(&steady.states[0], &expected_fixed_point(&circuit)).unwrap() > 1.0 - 1e-9);
}

#[test]
fn aklt_file_to_parent_hamiltonian_to_prepared_state() {
    let mps = parse_mps("N = 4\npreset = \"aklt\"\n").unwrap();
    let h = parent_hamiltonian(&mps).unwrap();
    let ch = dse_channel(&h, &CorrectionSet::depolarizing(h.n_terms()).unwrap()).unwrap();
    let rho0 = DensityMatrix::maximally_mixed(h.system());
    let trace = run_to_convergence(ch.channel(), &h, &rho0, 1e-8, 5000).unwrap();
    assert!(trace.converged());
    let target = mps_to_state(&mps).unwrap();
    assert!(fidelity(&trace.final_state, &target).unwrap() > 1.0 - 1e-7);
}

#[test]
fn toric_file_matches_builder_and_generator_keeps_the_ground_space() {
    let mut text = String::from("dims = [2, 2, 2, 2, 2, 2, 2, 2]\n");
    for kind in ["toric-star", "toric-plaquette"] {
        for index in 0..4 {
            text += &format!("[[term]]\nkind = \"{kind}\"\nlx = 2\nly = 2\nindex = {index}\n");
        }
    }
    let h = parse_hamiltonian(&text).unwrap();
    assert_eq!(h.ground_space().unwrap().dim(), 4);
    assert_eq!(h.n_terms(), toric_code(2, 2).unwrap().n_terms());

    let ch = dse_channel(&h, &CorrectionSet::stabilizer_walk(&h).unwrap()).unwrap();
    assert!(matches!(channel_to_generator(ch.channel(), 1), Err(Error::BudgetExceeded { required: 256, .. })));
    let ground = h.ground_space().unwrap();
    let proj = ground.projector();
    let rho = DensityMatrix::from_matrix(proj.mapv(|z| z / 4.0), h.system()).unwrap();
    let image = ch.channel().apply(&rho).unwrap();
    assert!(dissipative::linalg::max_abs_diff(image.matrix(), rho.matrix()) < 1e-12);
}

#[test]
fn ancilla_scheme_reproduces_a_two_qubit_jump() {
    let sm = gates::sigma_minus();
    let pair = Operator::new(dissipative::linalg::kron(&sm, &sm), dissipative::quantum::SiteSystem::qubits(2).unwrap())
        .unwrap();
    let e = AncillaEmbedding::new(pair, 1.0, 60.0).unwrap();
    let report = elimination_check(&e, &CheckOptions::default()).unwrap();
    assert!(report.in_regime);
    assert!((report.fitted_constant - 4.0).abs() < 0.2, "κΓ/Ω² = {}", report.fitted_constant);
    assert!(report.max_trace_distance < 0.05);
}

use std::fs;
use std::path::Path;

use clap::Parser;
use dissipative_cli::{main_with_args, run, Cli, Status};

fn status(args: &[&str]) -> u8 {
    main_with_args(std::iter::once("dissipative").chain(args.iter().copied()))
}

fn manifest_without_timestamp(dir: &Path) -> String {
    let text = fs::read_to_string(dir.join("manifest.toml")).unwrap();
    let mut doc: toml::Table = text.parse().unwrap();
    assert!(doc.remove("timestamp").is_some());
    toml::to_string(&doc).unwrap()
}

fn same_files(a: &Path, b: &Path) {
    let mut names: Vec<_> = fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in names {
        if name == "manifest.toml" {
            assert_eq!(manifest_without_timestamp(a), manifest_without_timestamp(b));
        } else {
            assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?} differs");
        }
    }
}

#[test]
fn dqc_gap_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("gap");
    let cli = Cli::parse_from([
        "dissipative",
        "dqc-gap",
        "--t-max",
        "3",
        "--n-max",
        "2",
        "--gate-sets",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    let outcome = run(cli).unwrap();
    assert!(outcome.summary["max_abs_error"].as_float().unwrap() < 1e-8);
    let csv = fs::read_to_string(out.join("gap.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "T,N,gate_set,numeric_gap,closed_form_gap,abs_error");
    assert_eq!(lines.count(), 3 * 2 * 2);
}

#[test]
fn dse_run_writes_energy_and_overlap() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("dse");
    let code = status(&["dse-run", "--preset", "cluster3", "--steps", "60", "--out", out.to_str().unwrap()]);
    assert_eq!(code, Status::Success as u8);
    let csv = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(csv.starts_with("step,energy,overlap"));
    assert_eq!(csv.lines().count(), 62);
}

#[test]
fn malformed_circuit_is_an_input_error_naming_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("bad.toml");
    fs::write(
        &file,
        "n_qubits = 1\n\n[[gate]]\nname = \"H\"\nsupport = [0]\n\n[[gate]]\nsupport = [0]\nmatrix = [[1, 1], [0, 1]]\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let cli = Cli::parse_from([
        "dissipative",
        "dqc-run",
        "--circuit",
        file.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let err = run(cli).unwrap_err();
    assert_eq!(err.status(), Status::InputError);
    assert!(err.to_string().contains("line 7"), "{err}");
    assert_eq!(status(&["dqc-run", "--circuit", file.to_str().unwrap(), "--out", out.to_str().unwrap()]), 2);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = |name: &str| tmp.path().join(name).to_str().unwrap().to_string();
    assert_eq!(status(&["toric-run", "--lx", "3", "--ly", "3", "--out", &out("budget")]), Status::BudgetExceeded as u8);
    // the clock has not reached t = T yet: the readout has nothing to condition on
    let early = ["dqc-run", "--time", "1e-9", "--samples", "1", "--out", &out("early")];
    assert_eq!(status(&early), Status::NumericalFailure as u8);
    assert_eq!(status(&["reservoir-check", "--omega", "0", "--out", &out("fit")]), Status::InputError as u8);
    assert_eq!(status(&["mps-prepare", "--preset", "ghz", "--out", &out("ghz")]), Status::InputError as u8);
    assert_eq!(status(&["dse-run", "--steps", "nope"]), Status::InputError as u8);
    assert_eq!(status(&["dse-run", "--preset", "blob", "--out", &out("blob")]), Status::InputError as u8);
    let failed = fs::read_to_string(tmp.path().join("blob/manifest.toml")).unwrap();
    assert!(failed.contains("status = \"error\""));
}

#[test]
fn config_overrides_flags_and_rejects_unknown_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    let out = tmp.path().join("cfg-out");
    fs::write(&cfg, format!("command = \"dse-run\"\nout = {:?}\n[params]\nsteps = 7\n", out.to_str().unwrap()))
        .unwrap();
    let cli = Cli::parse_from(["dissipative", "dse-run", "--steps", "99", "--config", cfg.to_str().unwrap()]);
    let outcome = run(cli).unwrap();
    assert_eq!(outcome.dir, out);
    assert_eq!(fs::read_to_string(out.join("trace.csv")).unwrap().lines().count(), 9);
    assert!(fs::read_to_string(out.join("manifest.toml")).unwrap().contains("steps = 7"));

    // no subcommand on the command line: the config names it
    let cli = Cli::parse_from(["dissipative", "--config", cfg.to_str().unwrap()]);
    assert_eq!(run(cli).unwrap().command, "dse-run");

    fs::write(&cfg, "command = \"dse-run\"\n[params]\nstepz = 7\n").unwrap();
    let err = run(Cli::parse_from(["dissipative", "--config", cfg.to_str().unwrap()])).unwrap_err();
    assert_eq!(err.status(), Status::InputError);
    assert!(err.to_string().contains("stepz"), "{err}");

    fs::write(&cfg, "command = \"toric-run\"\n").unwrap();
    let err = run(Cli::parse_from(["dissipative", "dse-run", "--config", cfg.to_str().unwrap()])).unwrap_err();
    assert_eq!(err.status(), Status::InputError);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let runs: &[&[&str]] = &[
        &["dqc-gap", "--t-max", "2", "--n-max", "2"],
        &["dse-run", "--steps", "20", "--seed", "5"],
        &["toric-run", "--steps", "5", "--seed", "3"],
        &["mps-prepare", "--c", "2", "--mode", "sampled", "--trajectories", "4", "--steps", "8"],
        &["reservoir-check", "--ratios", "10,20", "--samples", "40"],
        &["graph-state", "--graph", "0-1,1-2,2-0"],
    ];
    for (k, args) in runs.iter().enumerate() {
        let dirs: Vec<_> = (0..2).map(|r| tmp.path().join(format!("{k}-{r}"))).collect();
        for d in &dirs {
            let mut full = args.to_vec();
            full.extend(["--out", d.to_str().unwrap()]);
            assert_eq!(status(&full), 0, "{args:?}");
        }
        same_files(&dirs[0], &dirs[1]);
    }
}

#[test]
fn validate_instances() {
    let tmp = tempfile::tempdir().unwrap();
    let out = |name: &str| tmp.path().join(name).to_str().unwrap().to_string();
    let ham = tmp.path().join("h.toml");
    fs::write(&ham, "dims = [2, 2]\n[[term]]\nkind = \"projector\"\nsupport = [0]\nmatrix = [[0, 0], [0, 1]]\n")
        .unwrap();
    assert_eq!(status(&["validate", "--hamiltonian", ham.to_str().unwrap(), "--out", &out("h")]), 0);
    let checks = fs::read_to_string(tmp.path().join("h/checks.csv")).unwrap();
    assert!(checks.contains("ground_dim,2,-"), "{checks}");

    // both terms cannot vanish together: frustrated
    fs::write(&ham, "dims = [2]\n[[term]]\nkind = \"projector\"\nsupport = [0]\nmatrix = [[0, 0], [0, 1]]\n[[term]]\nkind = \"projector\"\nsupport = [0]\nmatrix = [[1, 0], [0, 0]]\n").unwrap();
    assert_eq!(status(&["validate", "--hamiltonian", ham.to_str().unwrap(), "--out", &out("f")]), 2);

    let mps = tmp.path().join("m.toml");
    fs::write(&mps, "N = 4\npreset = \"w-like\"\n").unwrap();
    assert_eq!(status(&["validate", "--mps", mps.to_str().unwrap(), "--out", &out("w")]), 2);
    fs::write(&mps, "N = 4\npreset = \"aklt\"\n").unwrap();
    assert_eq!(status(&["validate", "--mps", mps.to_str().unwrap(), "--out", &out("a")]), 0);
    assert!(fs::read_to_string(tmp.path().join("a/checks.csv")).unwrap().contains("parent_ground_dim,1,yes"));
    assert_eq!(status(&["validate", "--out", &out("none")]), 2);
}

#[test]
fn environment_sets_the_default_output_root() {
    let tmp = tempfile::tempdir().unwrap();
    // the only test in this binary that touches the variable
    std::env::set_var(dissipative_cli::OUT_ENV, tmp.path());
    assert_eq!(status(&["graph-state", "--graph", "cluster2"]), 0);
    std::env::remove_var(dissipative_cli::OUT_ENV);
    assert!(tmp.path().join("graph-state/spectrum.csv").exists());
}

#[test]
fn oversized_generator_is_a_budget_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("big");
    let args = ["dqc-spectrum", "--n-qubits", "4", "--steps", "6", "--out", out.to_str().unwrap()];
    assert_eq!(status(&args), Status::BudgetExceeded as u8);
}

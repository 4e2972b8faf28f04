//! Named instances accepted on the command line.

use std::path::Path;

use dissipative::dqc::{bell_circuit, QuantumCircuit};
use dissipative::dse::{graph_hamiltonian, toric_code, CorrectionSet, FrustrationFreeHamiltonian, GraphSpec};
use dissipative::formats;
use dissipative::linalg;
use dissipative::mps::{parent_hamiltonian, MatrixProductState, Preset};
use dissipative::quantum::{gates, DensityMatrix, Operator, SiteSystem};
use dissipative::random;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, CliResult};

/// Independent, reproducible stream `stream` of `seed`.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn unknown(what: &str, name: &str, known: &str) -> CliError {
    CliError::Config(format!("unknown {what} `{name}` (expected {known})"))
}

fn sized<'a>(name: &'a str, prefix: &str) -> Option<&'a str> {
    name.strip_prefix(prefix).filter(|rest| !rest.is_empty())
}

fn size(name: &str, digits: &str) -> CliResult<usize> {
    digits.parse().map_err(|_| CliError::Config(format!("bad size in `{name}`")))
}

/// `bell`, `random` or `identity` (the random circuit with every gate replaced by `I`).
pub fn circuit(
    file: Option<&Path>,
    preset: &str,
    n_qubits: usize,
    steps: usize,
    seed: u64,
) -> CliResult<QuantumCircuit> {
    if let Some(path) = file {
        return Ok(formats::read_circuit(path)?);
    }
    match preset {
        "bell" => Ok(bell_circuit()),
        "random" => Ok(QuantumCircuit::random(n_qubits, steps, &mut rng(seed, 0))?),
        "identity" => Ok(QuantumCircuit::random(n_qubits, steps, &mut rng(seed, 0))?.identity_like()),
        other => Err(unknown("circuit preset", other, "bell, random, identity")),
    }
}

/// `cluster<n>` (open chain), `ring<n>`, `aklt<n>` (parent Hamiltonian) or `toric<lx>x<ly>`.
pub fn hamiltonian(file: Option<&Path>, preset: &str) -> CliResult<FrustrationFreeHamiltonian> {
    if let Some(path) = file {
        return Ok(formats::read_hamiltonian(path)?);
    }
    if let Some(n) = sized(preset, "cluster") {
        return Ok(graph_hamiltonian(&GraphSpec::path(size(preset, n)?)?)?);
    }
    if let Some(n) = sized(preset, "ring") {
        return Ok(graph_hamiltonian(&GraphSpec::cycle(size(preset, n)?)?)?);
    }
    if let Some(n) = sized(preset, "aklt") {
        return Ok(parent_hamiltonian(&MatrixProductState::preset(Preset::Aklt, size(preset, n)?)?)?);
    }
    if let Some((lx, ly)) = sized(preset, "toric").and_then(|s| s.split_once('x')) {
        return Ok(toric_code(size(preset, lx)?, size(preset, ly)?)?);
    }
    Err(unknown("Hamiltonian preset", preset, "cluster<n>, ring<n>, aklt<n>, toric<lx>x<ly>"))
}

/// `cluster<n>`/`path<n>`, `ring<n>`/`cycle<n>`, `complete<n>`, `star<n>`, or an edge list `0-1,1-2`
/// on `vertices` vertices.
pub fn graph(name: &str, vertices: Option<usize>) -> CliResult<GraphSpec> {
    for prefix in ["cluster", "path"] {
        if let Some(n) = sized(name, prefix) {
            return Ok(GraphSpec::path(size(name, n)?)?);
        }
    }
    for prefix in ["ring", "cycle"] {
        if let Some(n) = sized(name, prefix) {
            return Ok(GraphSpec::cycle(size(name, n)?)?);
        }
    }
    if let Some(n) = sized(name, "complete") {
        let n = size(name, n)?;
        return Ok(GraphSpec::new(n, (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect())?);
    }
    if let Some(n) = sized(name, "star") {
        let n = size(name, n)?;
        return Ok(GraphSpec::new(n, (1..n).map(|b| (0, b)).collect())?);
    }
    if name.contains('-') {
        let edges = name
            .split(',')
            .map(|e| {
                let (a, b) = e.trim().split_once('-').ok_or_else(|| CliError::Config(format!("bad edge `{e}`")))?;
                Ok((size(name, a.trim())?, size(name, b.trim())?))
            })
            .collect::<CliResult<Vec<_>>>()?;
        let n = vertices.unwrap_or_else(|| edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(1));
        return Ok(GraphSpec::new(n, edges)?);
    }
    Err(unknown("graph", name, "cluster<n>, ring<n>, complete<n>, star<n> or an edge list like 0-1,1-2"))
}

/// `depolarizing`, `stabilizer` or `stabilizer-walk`.
pub fn corrections(name: &str, h: &FrustrationFreeHamiltonian) -> CliResult<CorrectionSet> {
    match name {
        "depolarizing" => Ok(CorrectionSet::depolarizing(h.n_terms())?),
        "stabilizer" => Ok(CorrectionSet::stabilizer(h)?),
        "stabilizer-walk" => Ok(CorrectionSet::stabilizer_walk(h)?),
        other => Err(unknown("correction", other, "depolarizing, stabilizer, stabilizer-walk")),
    }
}

/// `random-pure`, `random-mixed`, `maximally-mixed` or `basis<k>`.
pub fn initial_state(name: &str, system: &SiteSystem, seed: u64) -> CliResult<DensityMatrix> {
    match name {
        "random-pure" => Ok(random::pure_state(system, &mut rng(seed, 1))),
        "random-mixed" => Ok(random::density_matrix(system, &mut rng(seed, 1))),
        "maximally-mixed" => Ok(DensityMatrix::maximally_mixed(system)),
        other => match sized(other, "basis") {
            Some(k) => Ok(DensityMatrix::basis_state(system, size(other, k)?)?),
            None => Err(unknown("initial state", other, "random-pure, random-mixed, maximally-mixed, basis<k>")),
        },
    }
}

/// `sigma-minus` on one qubit or `sigma-minus-pair` (`σ₋⊗σ₋`) on two.
pub fn reservoir_target(name: &str) -> CliResult<Operator> {
    match name {
        "sigma-minus" => Ok(Operator::single_site(gates::sigma_minus())?),
        "sigma-minus-pair" => {
            let sm = gates::sigma_minus();
            Ok(Operator::new(linalg::kron(&sm, &sm), SiteSystem::qubits(2)?)?)
        }
        other => Err(unknown("reservoir target", other, "sigma-minus, sigma-minus-pair")),
    }
}

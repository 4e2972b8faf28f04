//! TOML instance files for circuits, Hamiltonians and matrix product states.
//!
//! Complex entries are written either as a number or as `[re, im]`. Every error carries
//! the line of the offending table or value.
//!
//! ```toml
//! n_qubits = 2
//!
//! [[gate]]
//! name = "H"
//! support = [0]
//!
//! [[gate]]
//! support = [0, 1]
//! matrix = [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]
//! ```

use std::fs;
use std::ops::Range;
use std::path::Path;

use ndarray::Array2;
use serde::Deserialize;
use toml::Spanned;

use crate::dqc::{Gate, QuantumCircuit};
use crate::dse::{stabilizer_term, toric_stabilizers, FrustrationFreeHamiltonian, GraphSpec, PROJECTOR_TOL};
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, C64};
use crate::mps::{MatrixProductState, Preset};
use crate::quantum::{LocalOperator, SiteSystem};

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(untagged)]
enum ComplexEntry {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexEntry> for C64 {
    fn from(e: ComplexEntry) -> C64 {
        match e {
            ComplexEntry::Real(x) => c(x, 0.0),
            ComplexEntry::Pair([re, im]) => c(re, im),
        }
    }
}

type MatrixEntry = Spanned<Vec<Vec<ComplexEntry>>>;

struct Source<'a> {
    text: &'a str,
}

impl Source<'_> {
    fn line_of(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }

    fn error(&self, span: Range<usize>, message: impl Into<String>) -> Error {
        Error::Parse { line: self.line_of(span.start), message: message.into() }
    }

    /// Re-tags semantic errors from the library with the line they came from.
    fn at<T>(&self, span: Range<usize>, r: Result<T>) -> Result<T> {
        r.map_err(|e| self.error(span, e.to_string()))
    }

    fn parse<T: for<'de> Deserialize<'de>>(&self) -> Result<T> {
        toml::from_str(self.text).map_err(|e| Error::Parse {
            line: e.span().map_or(1, |s| self.line_of(s.start)),
            message: e.message().to_string(),
        })
    }

    fn matrix(&self, m: &MatrixEntry, dim: usize) -> Result<CMatrix> {
        let rows = m.get_ref();
        if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
            return Err(self.error(m.span(), format!("expected a {dim}x{dim} matrix")));
        }
        Ok(Array2::from_shape_fn((dim, dim), |(i, j)| rows[i][j].into()))
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CircuitFile {
    n_qubits: usize,
    #[serde(default)]
    gate: Vec<Spanned<GateEntry>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GateEntry {
    name: Option<String>,
    angle: Option<f64>,
    support: Vec<usize>,
    matrix: Option<MatrixEntry>,
}

pub fn parse_circuit(text: &str) -> Result<QuantumCircuit> {
    let src = Source { text };
    let file: CircuitFile = src.parse()?;
    let mut gates = Vec::with_capacity(file.gate.len());
    for entry in &file.gate {
        let span = entry.span();
        let g = entry.get_ref();
        if let Some(&q) = g.support.iter().find(|&&q| q >= file.n_qubits) {
            return Err(src.error(span, format!("qubit {q} out of range for {} qubits", file.n_qubits)));
        }
        let gate = match (&g.name, &g.matrix) {
            (Some(name), None) => src.at(span, Gate::named(name, g.support.clone(), g.angle))?,
            (None, Some(m)) => {
                if g.angle.is_some() {
                    return Err(src.error(span, "an explicit matrix takes no angle"));
                }
                if !(1..=2).contains(&g.support.len()) {
                    return Err(src.error(span, "gates act on 1 or 2 qubits"));
                }
                let u = src.matrix(m, 1 << g.support.len())?;
                src.at(span, Gate::new("U", g.support.clone(), u))?
            }
            _ => return Err(src.error(span, "a gate needs exactly one of `name` or `matrix`")),
        };
        gates.push(gate);
    }
    src.at(0..0, QuantumCircuit::new(file.n_qubits, gates))
}

pub fn read_circuit(path: impl AsRef<Path>) -> Result<QuantumCircuit> {
    parse_circuit(&read(path.as_ref())?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HamiltonianFile {
    dims: Vec<usize>,
    #[serde(default)]
    term: Vec<Spanned<TermEntry>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TermEntry {
    kind: String,
    vertex: Option<usize>,
    edges: Option<Vec<[usize; 2]>>,
    lx: Option<usize>,
    ly: Option<usize>,
    index: Option<usize>,
    support: Option<Vec<usize>>,
    matrix: Option<MatrixEntry>,
}

/// Term kinds: `graph-vertex` (`vertex`, `edges`), `toric-star` / `toric-plaquette`
/// (`lx`, `ly`, `index`), and `projector` (`support`, `matrix`).
pub fn parse_hamiltonian(text: &str) -> Result<FrustrationFreeHamiltonian> {
    let src = Source { text };
    let file: HamiltonianFile = src.parse()?;
    let system = src.at(0..0, SiteSystem::new(file.dims.clone()))?;
    let all_qubits = file.dims.iter().all(|&d| d == 2);
    let mut terms = Vec::with_capacity(file.term.len());
    for entry in &file.term {
        let span = entry.span();
        let t = entry.get_ref();
        let missing = |field: &str| src.error(span.clone(), format!("`{}` term needs `{field}`", t.kind));
        let term: LocalOperator = match t.kind.as_str() {
            "graph-vertex" => {
                if !all_qubits {
                    return Err(src.error(span, "graph terms need a register of qubits"));
                }
                let v = t.vertex.ok_or_else(|| missing("vertex"))?;
                let edges = t.edges.as_ref().ok_or_else(|| missing("edges"))?;
                let g = src
                    .at(span.clone(), GraphSpec::new(file.dims.len(), edges.iter().map(|&[a, b]| (a, b)).collect()))?;
                if v >= g.n_vertices() {
                    return Err(src.error(span, format!("vertex {v} out of range")));
                }
                src.at(span, stabilizer_term(&system, &g.stabilizer(v)))?
            }
            kind @ ("toric-star" | "toric-plaquette") => {
                let (lx, ly) = (t.lx.ok_or_else(|| missing("lx"))?, t.ly.ok_or_else(|| missing("ly"))?);
                let index = t.index.ok_or_else(|| missing("index"))?;
                if !all_qubits || file.dims.len() != 2 * lx * ly {
                    return Err(src.error(span, format!("a {lx}x{ly} toric code needs {} qubits", 2 * lx * ly)));
                }
                if index >= lx * ly {
                    return Err(src.error(span, format!("index {index} out of range for {} {kind} terms", lx * ly)));
                }
                let stabs = src.at(span.clone(), toric_stabilizers(lx, ly))?;
                let offset = if kind == "toric-star" { 0 } else { lx * ly };
                src.at(span, stabilizer_term(&system, &stabs[offset + index]))?
            }
            "projector" => {
                let support = t.support.clone().ok_or_else(|| missing("support"))?;
                let m = t.matrix.as_ref().ok_or_else(|| missing("matrix"))?;
                if let Some(&s) = support.iter().find(|&&s| s >= file.dims.len()) {
                    return Err(src.error(span, format!("site {s} out of range")));
                }
                let dim = support.iter().map(|&s| file.dims[s]).product();
                let op = src.at(span.clone(), LocalOperator::on(&system, src.matrix(m, dim)?, support))?;
                if !op.op().is_projector(PROJECTOR_TOL) {
                    return Err(src.error(span, "term matrix is not a projector"));
                }
                op
            }
            other => return Err(src.error(span, format!("unknown term kind `{other}`"))),
        };
        terms.push(term);
    }
    src.at(0..0, FrustrationFreeHamiltonian::new(system, terms))
}

pub fn read_hamiltonian(path: impl AsRef<Path>) -> Result<FrustrationFreeHamiltonian> {
    parse_hamiltonian(&read(path.as_ref())?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MpsFile {
    #[serde(rename = "N")]
    n_sites: usize,
    preset: Option<Spanned<String>>,
    d: Option<usize>,
    #[serde(rename = "D")]
    bond_dim: Option<usize>,
    tensors: Option<Spanned<Vec<MatrixEntry>>>,
}

/// Either `preset` (`aklt`, `ghz`, `w-like`) or `d`, `D` and `d` tensors of size `D×D`.
/// Injectivity is not checked here.
pub fn parse_mps(text: &str) -> Result<MatrixProductState> {
    let src = Source { text };
    let file: MpsFile = src.parse()?;
    match (&file.preset, &file.tensors) {
        (Some(p), None) => {
            if file.d.is_some() || file.bond_dim.is_some() {
                return Err(src.error(p.span(), "a preset fixes `d` and `D`"));
            }
            let preset: Preset = src.at(p.span(), p.get_ref().parse())?;
            src.at(p.span(), MatrixProductState::preset(preset, file.n_sites))
        }
        (None, Some(ts)) => {
            let missing = |f: &str| src.error(ts.span(), format!("explicit tensors need `{f}`"));
            let d = file.d.ok_or_else(|| missing("d"))?;
            let bond = file.bond_dim.ok_or_else(|| missing("D"))?;
            if ts.get_ref().len() != d {
                return Err(src.error(ts.span(), format!("expected {d} tensors, got {}", ts.get_ref().len())));
            }
            let tensors = ts.get_ref().iter().map(|m| src.matrix(m, bond)).collect::<Result<Vec<_>>>()?;
            src.at(ts.span(), MatrixProductState::new(tensors, file.n_sites))
        }
        _ => Err(Error::Parse { line: 1, message: "give exactly one of `preset` or `tensors`".into() }),
    }
}

pub fn read_mps(path: impl AsRef<Path>) -> Result<MatrixProductState> {
    parse_mps(&read(path.as_ref())?)
}

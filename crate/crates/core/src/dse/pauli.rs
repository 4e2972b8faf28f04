//! Pauli strings with exact phase tracking.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, C64};
use crate::quantum::gates;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> CMatrix {
        match self {
            Pauli::I => linalg::identity(2),
            Pauli::X => gates::pauli_x(),
            Pauli::Y => gates::pauli_y(),
            Pauli::Z => gates::pauli_z(),
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn anticommutes(self, other: Pauli) -> bool {
        self != Pauli::I && other != Pauli::I && self != other
    }

    /// `self · other = i^k · result`.
    fn mul(self, other: Pauli) -> (u8, Pauli) {
        use Pauli::*;
        let phase = match (self, other) {
            (X, Y) | (Y, Z) | (Z, X) => 1,
            (Y, X) | (Z, Y) | (X, Z) => 3,
            _ => 0,
        };
        let (x1, z1) = self.bits();
        let (x2, z2) = other.bits();
        (phase, Pauli::from_bits(x1 ^ x2, z1 ^ z2))
    }

    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// `i^phase · P_0 ⊗ P_1 ⊗ …`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    phase: u8,
    factors: Vec<Pauli>,
}

impl PauliString {
    pub fn new(factors: Vec<Pauli>) -> Self {
        PauliString { phase: 0, factors }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(vec![Pauli::I; n])
    }

    /// `p` on the listed sites of an `n`-site register.
    pub fn on_sites(n: usize, sites: &[usize], p: Pauli) -> Result<Self> {
        let mut factors = vec![Pauli::I; n];
        for &s in sites {
            if s >= n {
                return Err(Error::SiteOutOfRange { site: s, n_sites: n });
            }
            factors[s] = p;
        }
        Ok(Self::new(factors))
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn factors(&self) -> &[Pauli] {
        &self.factors
    }

    pub fn phase(&self) -> C64 {
        [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)][self.phase as usize]
    }

    pub fn negated(&self) -> Self {
        PauliString { phase: (self.phase + 2) % 4, factors: self.factors.clone() }
    }

    pub fn is_identity(&self) -> bool {
        self.factors.iter().all(|&p| p == Pauli::I)
    }

    pub fn weight(&self) -> usize {
        self.factors.iter().filter(|&&p| p != Pauli::I).count()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.factors[k] != Pauli::I).collect()
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let flips = self.factors.iter().zip(&other.factors).filter(|(a, b)| a.anticommutes(**b)).count();
        flips % 2 == 0
    }

    pub fn product(&self, other: &PauliString) -> Result<PauliString> {
        if self.len() != other.len() {
            return Err(Error::mismatch(format!("Pauli strings of length {} and {}", self.len(), other.len())));
        }
        let mut phase = self.phase + other.phase;
        let factors = self
            .factors
            .iter()
            .zip(&other.factors)
            .map(|(a, b)| {
                let (k, p) = a.mul(*b);
                phase += k;
                p
            })
            .collect();
        Ok(PauliString { phase: phase % 4, factors })
    }

    pub fn matrix(&self) -> CMatrix {
        let mats: Vec<CMatrix> = self.factors.iter().map(|p| p.matrix()).collect();
        let ph = self.phase();
        linalg::kron_all(&mats).mapv(|z| z * ph)
    }

    /// Recognizes `±` a Pauli string from its matrix, up to `tol` in every entry.
    pub fn from_matrix(m: &CMatrix, tol: f64) -> Option<PauliString> {
        let n_qubits = qubit_count(m.nrows())?;
        if m.ncols() != m.nrows() {
            return None;
        }
        // A Pauli string has exactly one nonzero per row; read X/Z bits off row 0.
        let col = (0..m.ncols()).find(|&j| m[[0, j]].norm() > 0.5)?;
        let dim = m.nrows();
        let mut best: Option<PauliString> = None;
        for zmask in 0..dim {
            let factors: Vec<Pauli> = (0..n_qubits)
                .map(|q| {
                    let bit = 1 << (n_qubits - 1 - q);
                    Pauli::from_bits(col & bit != 0, zmask & bit != 0)
                })
                .collect();
            let base = PauliString::new(factors);
            let bm = base.matrix();
            let ratio = m[[0, col]] / bm[[0, col]];
            for phase in 0..4u8 {
                let cand = PauliString { phase, factors: base.factors.clone() };
                if (cand.phase() - ratio).norm() < 1e-6 && linalg::max_abs_diff(&cand.matrix(), m) <= tol {
                    best = Some(cand);
                }
            }
            if best.is_some() {
                break;
            }
        }
        best
    }
}

fn qubit_count(dim: usize) -> Option<usize> {
    (dim.is_power_of_two() && dim > 0).then(|| dim.trailing_zeros() as usize)
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = ["+", "+i", "-", "-i"][self.phase as usize];
        write!(f, "{sign}")?;
        for p in &self.factors {
            write!(f, "{}", p.symbol())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Accepts an optional sign followed by letters from `IXYZ`, e.g. `-XZZ`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (phase, body) = match s {
            _ if s.starts_with("-i") => (3, &s[2..]),
            _ if s.starts_with("+i") => (1, &s[2..]),
            _ if s.starts_with('-') => (2, &s[1..]),
            _ if s.starts_with('+') => (0, &s[1..]),
            _ => (0, s),
        };
        let factors = body
            .chars()
            .map(|ch| match ch.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::invalid(format!("unknown Pauli letter {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if factors.is_empty() {
            return Err(Error::invalid("empty Pauli string"));
        }
        Ok(PauliString { phase, factors })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn letters() -> impl Strategy<Value = PauliString> {
        prop::collection::vec(0u8..4, 1..=4).prop_map(|v| {
            PauliString::new(v.into_iter().map(|k| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][k as usize]).collect())
        })
    }

    #[test]
    fn single_qubit_table() {
        let xy = PauliString::new(vec![Pauli::X]).product(&PauliString::new(vec![Pauli::Y])).unwrap();
        assert_eq!(xy.to_string(), "+iZ");
        let zx = PauliString::new(vec![Pauli::Z]).product(&PauliString::new(vec![Pauli::X])).unwrap();
        assert_eq!(zx.to_string(), "+iY");
        let xz = PauliString::new(vec![Pauli::X]).product(&PauliString::new(vec![Pauli::Z])).unwrap();
        assert_eq!(xz.to_string(), "-iY");
    }

    #[test]
    fn parse_and_print() {
        let p: PauliString = "-XIZ".parse().unwrap();
        assert_eq!(p.to_string(), "-XIZ");
        assert_eq!(p.weight(), 2);
        assert_eq!(p.support(), vec![0, 2]);
        assert!("XQ".parse::<PauliString>().is_err());
        assert!("".parse::<PauliString>().is_err());
    }

    #[test]
    fn recognizes_matrices() {
        let p: PauliString = "-YZ".parse().unwrap();
        assert_eq!(PauliString::from_matrix(&p.matrix(), 1e-12), Some(p));
        assert_eq!(PauliString::from_matrix(&gates::hadamard(), 1e-12), None);
        assert_eq!(PauliString::from_matrix(&linalg::identity(3), 1e-12), None);
    }

    proptest! {
        #[test]
        fn product_matches_matrices(a in letters(), b in letters()) {
            prop_assume!(a.len() == b.len());
            let ab = a.product(&b).unwrap();
            let want = a.matrix().dot(&b.matrix());
            prop_assert!(linalg::max_abs_diff(&ab.matrix(), &want) < 1e-14);
            let comm = a.matrix().dot(&b.matrix()) - b.matrix().dot(&a.matrix());
            prop_assert_eq!(a.commutes_with(&b), linalg::max_abs(&comm) < 1e-14);
        }
    }
}

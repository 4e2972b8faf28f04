use ndarray::Array2;
use rand::Rng;

use super::Superoperator;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, ONE};
use crate::quantum::{DensityMatrix, LocalOperator, SiteLayout, SiteSystem};

/// Tolerance on `Σ p K†K = 1`.
pub const TRACE_PRESERVATION_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
struct KrausTerm {
    op: LocalOperator,
    layout: SiteLayout,
}

/// One Kraus set, applied with the branch probability.
#[derive(Clone, Debug)]
pub struct KrausBranch {
    probability: f64,
    terms: Vec<KrausTerm>,
}

impl KrausBranch {
    pub fn probability(&self) -> f64 {
        self.probability
    }

    pub fn kraus(&self) -> impl Iterator<Item = &LocalOperator> {
        self.terms.iter().map(|t| &t.op)
    }

    fn apply(&self, x: &CMatrix) -> CMatrix {
        let mut out = Array2::zeros(x.raw_dim());
        for t in &self.terms {
            t.layout.conjugate_add(t.op.matrix(), x, &mut out);
        }
        out
    }

    fn apply_adjoint(&self, x: &CMatrix) -> CMatrix {
        let mut out = Array2::zeros(x.raw_dim());
        for t in &self.terms {
            t.layout.conjugate_add(&linalg::dagger(t.op.matrix()), x, &mut out);
        }
        out
    }
}

/// Probabilistic mixture of Kraus sets with locally supported Kraus operators.
#[derive(Clone, Debug)]
pub struct CpMapChannel {
    system: SiteSystem,
    branches: Vec<KrausBranch>,
}

impl CpMapChannel {
    pub fn new(system: SiteSystem, branches: Vec<(f64, Vec<LocalOperator>)>) -> Result<Self> {
        let ch = Self::unchecked(system, branches)?;
        let defect = ch.trace_defect();
        if defect > TRACE_PRESERVATION_TOL {
            return Err(Error::invalid(format!("channel is not trace preserving (defect {defect:.3e})")));
        }
        Ok(ch)
    }

    /// Validates shapes and probabilities but not trace preservation.
    pub(crate) fn unchecked(system: SiteSystem, branches: Vec<(f64, Vec<LocalOperator>)>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::invalid("a channel needs at least one branch"));
        }
        let total: f64 = branches.iter().map(|(p, _)| p).sum();
        if branches.iter().any(|(p, _)| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "branch probabilities must be non-negative and sum to 1 (sum {total})"
            )));
        }
        let branches = branches
            .into_iter()
            .map(|(probability, ops)| {
                let terms = ops
                    .into_iter()
                    .map(|op| {
                        op.check_within(&system)?;
                        let layout = SiteLayout::new(&system, op.support())?;
                        Ok(KrausTerm { op, layout })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(KrausBranch { probability, terms })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CpMapChannel { system, branches })
    }

    pub fn identity(system: &SiteSystem) -> Self {
        let op = LocalOperator::on(system, linalg::identity(system.local_dim(0)), vec![0]).expect("site 0 exists");
        Self::unchecked(system.clone(), vec![(1.0, vec![op])]).expect("identity channel")
    }

    /// `Σ_k w_k T_k` for channels on the same system.
    pub fn mixture(parts: Vec<(f64, CpMapChannel)>) -> Result<Self> {
        let system = parts.first().map(|(_, ch)| ch.system.clone()).ok_or_else(|| Error::invalid("empty mixture"))?;
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-12 || parts.iter().any(|(w, _)| !(*w >= 0.0)) {
            return Err(Error::invalid(format!("mixture weights must sum to 1 (sum {total})")));
        }
        let mut branches = Vec::new();
        for (w, ch) in parts {
            if ch.system != system {
                return Err(Error::mismatch("mixed channels act on different systems"));
            }
            for mut b in ch.branches {
                b.probability *= w;
                branches.push(b);
            }
        }
        Ok(CpMapChannel { system, branches })
    }

    pub fn system(&self) -> &SiteSystem {
        &self.system
    }

    pub fn branches(&self) -> &[KrausBranch] {
        &self.branches
    }

    /// `max |Σ p K†K - 1|` over entries.
    pub fn trace_defect(&self) -> f64 {
        let n = self.system.total_dim();
        let mut sum: CMatrix = Array2::zeros((n, n));
        for b in &self.branches {
            for t in &b.terms {
                let kk = linalg::dagger(t.op.matrix()).dot(t.op.matrix());
                sum = sum + t.layout.embed(&kk).mapv(|z| z * b.probability);
            }
        }
        linalg::max_abs_diff(&sum, &linalg::identity(n))
    }

    pub fn apply_matrix(&self, x: &CMatrix) -> CMatrix {
        let mut out = Array2::zeros(x.raw_dim());
        for b in &self.branches {
            if b.probability > 0.0 {
                out.scaled_add(c(b.probability, 0.0), &b.apply(x));
            }
        }
        out
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.check_state(rho)?;
        Ok(DensityMatrix::trusted(self.apply_matrix(rho.matrix()), self.system.clone()))
    }

    /// Heisenberg picture: `X ↦ Σ p K† X K`.
    pub fn apply_adjoint(&self, x: &CMatrix) -> Result<CMatrix> {
        let n = self.system.total_dim();
        if x.dim() != (n, n) {
            return Err(Error::mismatch(format!("operator is {:?}, system dimension {n}", x.dim())));
        }
        let mut out = Array2::zeros(x.raw_dim());
        for b in &self.branches {
            out = out + b.apply_adjoint(x).mapv(|z| z * b.probability);
        }
        Ok(out)
    }

    /// Applies one branch drawn with the branch probabilities. Each branch must itself be
    /// trace preserving for the average to reproduce [`CpMapChannel::apply`].
    pub fn apply_sampled<R: Rng + ?Sized>(&self, rho: &DensityMatrix, rng: &mut R) -> Result<DensityMatrix> {
        self.check_state(rho)?;
        let b = self.sample_branch(rng);
        Ok(DensityMatrix::trusted(b.apply(rho.matrix()), self.system.clone()))
    }

    fn sample_branch<R: Rng + ?Sized>(&self, rng: &mut R) -> &KrausBranch {
        let mut u: f64 = rng.random();
        for b in &self.branches {
            if u < b.probability {
                return b;
            }
            u -= b.probability;
        }
        self.branches.last().expect("non-empty")
    }

    /// All Kraus operators embedded in the full register, probabilities folded in.
    pub fn kraus_operators(&self) -> Vec<CMatrix> {
        self.branches
            .iter()
            .flat_map(|b| {
                let s = b.probability.sqrt();
                b.terms.iter().map(move |t| t.layout.embed(t.op.matrix()).mapv(|z| z * s))
            })
            .collect()
    }

    pub fn superoperator(&self) -> Result<Superoperator> {
        super::check_superoperator_budget(&self.system)?;
        let n = self.system.total_dim();
        let mut m = Array2::zeros((n * n, n * n));
        for k in self.kraus_operators() {
            linalg::add_kron(&mut m, ONE, &linalg::conj(&k), &k);
        }
        Superoperator::new(m, self.system.clone())
    }

    fn check_state(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.system() != &self.system {
            return Err(Error::mismatch(format!(
                "state on {:?}, channel on {:?}",
                rho.system().dims(),
                self.system.dims()
            )));
        }
        Ok(())
    }
}

/// Heisenberg-picture superoperator of a channel.
pub fn channel_adjoint(ch: &CpMapChannel) -> Result<Superoperator> {
    Ok(ch.superoperator()?.adjoint())
}

/// The generator `n (T - id)`, which shares the channel's fixed points.
pub fn channel_to_generator(ch: &CpMapChannel, n_scale: u32) -> Result<Superoperator> {
    if n_scale == 0 {
        return Err(Error::invalid("n_scale must be at least 1"));
    }
    let s = ch.superoperator()?;
    let id = Superoperator::identity(ch.system());
    s.add(&id.scaled(-1.0)).map(|g| g.scaled(n_scale as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, C64};
    use crate::liouville::multiset_distance;
    use crate::quantum::{fidelity, gates, Operator};
    use crate::random;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubit() -> SiteSystem {
        SiteSystem::qubits(1).unwrap()
    }

    fn depolarizing_qubit() -> CpMapChannel {
        let sys = qubit();
        let ops = [linalg::identity(2), gates::pauli_x(), gates::pauli_y(), gates::pauli_z()]
            .into_iter()
            .map(|p| LocalOperator::on(&sys, p.mapv(|z| z * 0.5), vec![0]).unwrap())
            .collect();
        CpMapChannel::new(sys, vec![(1.0, ops)]).unwrap()
    }

    /// Random channel from a Haar isometry split into Kraus blocks, spread over random supports.
    pub(crate) fn random_channel(rng: &mut ChaCha8Rng, system: &SiteSystem, branches: usize) -> CpMapChannel {
        let mut out = Vec::new();
        let mut weights: Vec<f64> = (0..branches).map(|_| rng.random::<f64>() + 0.1).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        for w in weights {
            let site = rng.random_range(0..system.n_sites());
            let d = system.local_dim(site);
            let r = 2;
            let u = random::haar_unitary(d * r, rng);
            let ops = (0..r)
                .map(|k| {
                    let block = u.slice(ndarray::s![k * d..(k + 1) * d, 0..d]).to_owned();
                    LocalOperator::on(system, block, vec![site]).unwrap()
                })
                .collect();
            out.push((w, ops));
        }
        CpMapChannel::new(system.clone(), out).unwrap()
    }

    #[test]
    fn identity_channel() {
        let sys = SiteSystem::qubits(2).unwrap();
        let id = CpMapChannel::identity(&sys);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rho = random::density_matrix(&sys, &mut rng);
        assert!(linalg::max_abs_diff(id.apply(&rho).unwrap().matrix(), rho.matrix()) < 1e-15);
        let adj = channel_adjoint(&id).unwrap();
        assert!(linalg::max_abs_diff(adj.matrix(), &linalg::identity(16)) < 1e-15);
        let g = channel_to_generator(&id, 3).unwrap();
        assert!(linalg::max_abs(g.matrix()) < 1e-15);
    }

    #[test]
    fn depolarizing_forgets_the_input() {
        let ch = depolarizing_qubit();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random::density_matrix(&qubit(), &mut rng);
        let out = ch.apply(&rho).unwrap();
        assert!(linalg::max_abs_diff(out.matrix(), &linalg::identity(2).mapv(|z| z * 0.5)) < 1e-15);
    }

    #[test]
    fn rejects_non_trace_preserving() {
        let sys = qubit();
        let op = LocalOperator::on(&sys, gates::sigma_minus(), vec![0]).unwrap();
        assert!(CpMapChannel::new(sys.clone(), vec![(1.0, vec![op.clone()])]).is_err());
        assert!(CpMapChannel::new(sys, vec![(0.7, vec![op])]).is_err());
    }

    #[test]
    fn superoperator_agrees_with_local_application() {
        let sys = SiteSystem::new(vec![2, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ch = random_channel(&mut rng, &sys, 3);
        let x = random::ginibre(6, 6, &mut rng);
        assert!(linalg::max_abs_diff(&ch.superoperator().unwrap().apply(&x), &ch.apply_matrix(&x)) < 1e-12);
        assert!(ch.superoperator().unwrap().channel_trace_defect() < 1e-12);
    }

    #[test]
    fn generator_spectrum_is_shifted_channel_spectrum() {
        let sys = SiteSystem::qubits(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for n_scale in [1u32, 4] {
            let ch = random_channel(&mut rng, &sys, 3);
            let chan: Vec<C64> = ch.superoperator().unwrap().eigenvalues().unwrap();
            let shifted: Vec<C64> = chan.iter().map(|z| (z - c(1.0, 0.0)) * n_scale as f64).collect();
            let gen = channel_to_generator(&ch, n_scale).unwrap().eigenvalues().unwrap();
            assert!(multiset_distance(&shifted, &gen) < 1e-10);
        }
        assert!(channel_to_generator(&CpMapChannel::identity(&sys), 0).is_err());
    }

    #[test]
    fn generator_fixed_point_is_channel_fixed_point() {
        let sys = SiteSystem::qubits(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let ch = random_channel(&mut rng, &sys, 4);
        let ss = channel_to_generator(&ch, 2).unwrap().steady_states().unwrap();
        assert_eq!(ss.kernel_dim, 1);
        let mut rho = DensityMatrix::maximally_mixed(&sys);
        for _ in 0..2000 {
            rho = ch.apply(&rho).unwrap();
        }
        assert!(fidelity(&rho, &ss.states[0]).unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn sampled_branches_average_to_the_channel() {
        let sys = qubit();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let ch = random_channel(&mut rng, &sys, 2);
        let rho = random::density_matrix(&sys, &mut rng);
        let mut acc: CMatrix = Array2::zeros((2, 2));
        let samples = 4000;
        for _ in 0..samples {
            acc += ch.apply_sampled(&rho, &mut rng).unwrap().matrix();
        }
        let mean = acc.mapv(|z| z / samples as f64);
        assert!(linalg::max_abs_diff(&mean, ch.apply(&rho).unwrap().matrix()) < 0.05);
    }

    #[test]
    fn mixture_reweights_branches() {
        let sys = qubit();
        let flip = LocalOperator::on(&sys, gates::pauli_x(), vec![0]).unwrap();
        let x = CpMapChannel::new(sys.clone(), vec![(1.0, vec![flip])]).unwrap();
        let mix = CpMapChannel::mixture(vec![(0.25, x), (0.75, CpMapChannel::identity(&sys))]).unwrap();
        let out = mix.apply(&DensityMatrix::basis_state(&sys, 0).unwrap()).unwrap();
        assert!((out.matrix()[[1, 1]].re - 0.25).abs() < 1e-15);
        let op = Operator::identity(&sys);
        assert_eq!(op.dim(), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn adjoint_duality(seed in any::<u64>()) {
            let sys = SiteSystem::new(vec![2, 2]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ch = random_channel(&mut rng, &sys, 2);
            let rho = random::density_matrix(&sys, &mut rng);
            let x = random::ginibre(4, 4, &mut rng);
            let lhs = linalg::trace(&ch.apply(&rho).unwrap().matrix().dot(&x));
            let rhs = linalg::trace(&rho.matrix().dot(&ch.apply_adjoint(&x).unwrap()));
            prop_assert!((lhs - rhs).norm() < 1e-12);
            let via_matrix = channel_adjoint(&ch).unwrap().apply(&x);
            prop_assert!(linalg::max_abs_diff(&via_matrix, &ch.apply_adjoint(&x).unwrap()) < 1e-12);
            let unital = ch.apply_adjoint(&linalg::identity(4)).unwrap();
            prop_assert!(linalg::max_abs_diff(&unital, &linalg::identity(4)) < 1e-9);
        }

        #[test]
        fn channels_preserve_trace_and_positivity(seed in any::<u64>()) {
            let sys = SiteSystem::new(vec![2, 3]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ch = random_channel(&mut rng, &sys, 3);
            let rho = random::pure_state(&sys, &mut rng);
            let out = ch.apply(&rho).unwrap();
            prop_assert!((out.trace() - 1.0).abs() < 1e-10);
            prop_assert!(out.eigenvalues().unwrap()[0] >= -1e-9);
        }
    }
}

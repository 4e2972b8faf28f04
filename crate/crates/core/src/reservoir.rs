//! Reservoir engineering: a target jump `L` realized by coupling the system to a
//! rapidly decaying ancilla qubit, `H = Ω(L†⊗σ₋ + L⊗σ₊)` with ancilla decay `√Γ σ₋`.
//!
//! For `Γ ≫ Ω` the ancilla can be eliminated and the system alone follows a master
//! equation with a single jump `√κ L`, `κ ∝ Ω²/Γ`. The constant is fitted, not assumed.

use std::thread;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix};
use crate::liouville::{LindbladModel, Superoperator};
use crate::quantum::{gates, partial_trace, trace_distance, DensityMatrix, Operator, SiteSystem};

/// Largest system ⊗ ancillas Hilbert dimension handled densely.
pub const RESERVOIR_DIM_BUDGET: usize = 32;
pub const DEFAULT_HORIZON_DECAY_TIMES: f64 = 5.0;
pub const DEFAULT_SAMPLES: usize = 200;

/// Length of the fit window in units of the slowest relaxation time of the full model.
const FIT_WINDOW: f64 = 2.0;
/// Samples earlier than this many ancilla lifetimes are left out of the fit.
const TRANSIENT_LIFETIMES: f64 = 4.0;
/// Relaxation times used to reach the long-time value of the fitted observable.
const SETTLE_TIMES: f64 = 40.0;

/// A target jump operator realized through one ancilla qubit.
#[derive(Clone, Debug)]
pub struct AncillaEmbedding {
    target_jump: Operator,
    omega: f64,
    gamma: f64,
}

impl AncillaEmbedding {
    /// `omega = 0` is accepted and decouples the ancilla.
    pub fn new(target_jump: Operator, omega: f64, gamma: f64) -> Result<Self> {
        if !(omega >= 0.0) || !omega.is_finite() {
            return Err(Error::invalid(format!("coupling rate {omega} must be finite and non-negative")));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::invalid(format!("ancilla decay rate {gamma} must be finite and positive")));
        }
        Ok(AncillaEmbedding { target_jump, omega, gamma })
    }

    pub fn target_jump(&self) -> &Operator {
        &self.target_jump
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn system(&self) -> &SiteSystem {
        self.target_jump.system()
    }

    /// `Γ/Ω`, infinite when decoupled.
    pub fn ratio(&self) -> f64 {
        self.gamma / self.omega
    }

    /// Whether `Γ ≥ Ω`, below which the elimination diagnostics are not meaningful.
    pub fn in_elimination_regime(&self) -> bool {
        self.ratio() >= 1.0
    }

    /// `Ω²/Γ`, the scale of the effective rate.
    pub fn rate_scale(&self) -> f64 {
        self.omega * self.omega / self.gamma
    }
}

/// System ⊗ ancilla model for one embedding; the ancilla is the last site.
pub fn embed(e: &AncillaEmbedding) -> Result<LindbladModel> {
    embed_many(std::slice::from_ref(e))
}

/// One ancilla per embedding, appended after the system sites in the given order.
pub fn embed_many(embeddings: &[AncillaEmbedding]) -> Result<LindbladModel> {
    let first = embeddings.first().ok_or_else(|| Error::invalid("no embeddings given"))?;
    let sys = first.system().clone();
    if let Some(k) = embeddings.iter().position(|e| e.system() != &sys) {
        return Err(Error::mismatch(format!("embedding {k} acts on a different system")));
    }
    let n_anc = embeddings.len();
    let required = sys.total_dim() << n_anc;
    if required > RESERVOIR_DIM_BUDGET {
        return Err(Error::BudgetExceeded {
            what: "system and ancillas".into(),
            required,
            budget: RESERVOIR_DIM_BUDGET,
        });
    }
    let mut dims = sys.dims().to_vec();
    dims.extend(std::iter::repeat_n(2, n_anc));
    let full = SiteSystem::new(dims)?;

    let sigma_m = gates::sigma_minus();
    let sigma_p = gates::sigma_plus();
    let eye2 = linalg::identity(2);
    let ancilla_factor = |slot: usize, local: &CMatrix| {
        let factors: Vec<&CMatrix> = (0..n_anc).map(|a| if a == slot { local } else { &eye2 }).collect();
        linalg::kron_all(factors)
    };
    let n = full.total_dim();
    let mut h = CMatrix::zeros((n, n));
    let mut jumps = Vec::with_capacity(n_anc);
    let eye_sys = linalg::identity(sys.total_dim());
    for (slot, e) in embeddings.iter().enumerate() {
        let l = e.target_jump.matrix();
        let coupling = linalg::kron(&linalg::dagger(l), &ancilla_factor(slot, &sigma_m))
            + linalg::kron(l, &ancilla_factor(slot, &sigma_p));
        h.scaled_add(c(e.omega, 0.0), &coupling);
        let decay = linalg::kron(&eye_sys, &ancilla_factor(slot, &sigma_m)).mapv(|z| z * e.gamma.sqrt());
        jumps.push(Operator::new(decay, full.clone())?);
    }
    let h = Operator::new(linalg::hermitian_part(&h), full.clone())?;
    LindbladModel::new(full, Some(h), jumps)
}

/// System-only model with jumps `√κ_k L_k`.
pub fn effective_model(targets: &[(&Operator, f64)]) -> Result<LindbladModel> {
    let (first, _) = targets.first().ok_or_else(|| Error::invalid("no targets given"))?;
    let sys = first.system().clone();
    let mut jumps = Vec::with_capacity(targets.len());
    for (k, (l, rate)) in targets.iter().enumerate() {
        if l.system() != &sys {
            return Err(Error::mismatch(format!("target {k} acts on a different system")));
        }
        if !(*rate >= 0.0) {
            return Err(Error::invalid(format!("effective rate {rate} must be non-negative")));
        }
        jumps.push(l.scaled(c(rate.sqrt(), 0.0)));
    }
    LindbladModel::new(sys, None, jumps)
}

/// Observable whose decay defines the effective rate.
#[derive(Clone, Debug, Default)]
pub enum DecayObservable {
    /// `L†L`: the excited population for `σ₋`-like targets.
    #[default]
    JumpOccupation,
    Custom(Operator),
}

/// How long to compare the reduced and effective evolutions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Horizon {
    Time(f64),
    /// Multiples of `1/κ` with `κ` the fitted rate.
    DecayTimes(f64),
}

impl Default for Horizon {
    fn default() -> Self {
        Horizon::DecayTimes(DEFAULT_HORIZON_DECAY_TIMES)
    }
}

#[derive(Clone, Debug)]
pub struct CheckOptions {
    pub observable: DecayObservable,
    /// Initial system state; the top eigenvector of the observable when absent.
    pub initial: Option<DensityMatrix>,
    pub horizon: Horizon,
    pub samples: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            observable: DecayObservable::default(),
            initial: None,
            horizon: Horizon::default(),
            samples: DEFAULT_SAMPLES,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MismatchSample {
    pub time: f64,
    pub observable: f64,
    pub trace_distance: f64,
}

#[derive(Clone, Debug)]
pub struct EliminationReport {
    pub omega: f64,
    pub gamma: f64,
    pub fitted_rate: f64,
    /// `κ Γ / Ω²`.
    pub fitted_constant: f64,
    pub horizon: f64,
    pub max_trace_distance: f64,
    pub in_regime: bool,
    pub trace: Vec<MismatchSample>,
}

/// Fits the effective rate of the reduced dynamics and measures how far the reduced
/// evolution strays from the fitted single-jump master equation.
pub fn elimination_check(e: &AncillaEmbedding, opts: &CheckOptions) -> Result<EliminationReport> {
    if opts.samples < 4 {
        return Err(Error::invalid("at least 4 samples are needed"));
    }
    let full = embed(e)?;
    let generator = full.generator()?;
    let observable = match &opts.observable {
        DecayObservable::JumpOccupation => {
            let l = e.target_jump.matrix();
            Operator::new(linalg::dagger(l).dot(l), e.system().clone())?
        }
        DecayObservable::Custom(o) => {
            if o.system() != e.system() || !o.is_hermitian(crate::quantum::HERMITIAN_TOL) {
                return Err(Error::invalid("decay observable must be Hermitian on the system"));
            }
            o.clone()
        }
    };
    let rho_sys = match &opts.initial {
        Some(r) if r.system() != e.system() => return Err(Error::mismatch("initial state is not on the system")),
        Some(r) => r.clone(),
        None => top_eigenstate(&observable)?,
    };
    let ground = DensityMatrix::basis_state(&SiteSystem::qubits(1)?, 0)?;
    let rho0 = rho_sys.tensor(&ground);
    let anc = e.system().n_sites();
    let obs_of =
        |rho: &DensityMatrix| -> Result<f64> { Ok(partial_trace(rho, &[anc])?.expectation(observable.matrix()).re) };

    let relax = slowest_relaxation_time(&generator)?;
    let baseline = obs_of(&generator.evolve(&rho0, SETTLE_TIMES * relax)?)?;
    let window = FIT_WINDOW * relax;
    let step = generator.propagator(window / opts.samples as f64)?;
    let (mut ts, mut ys) = (Vec::new(), Vec::new());
    let mut rho = rho0.clone();
    let y0 = (obs_of(&rho)? - baseline).abs();
    let mut y_end = y0;
    for k in 1..=opts.samples {
        rho = step.apply(&rho)?;
        let t = window * k as f64 / opts.samples as f64;
        let y = (obs_of(&rho)? - baseline).abs();
        y_end = y;
        if t >= TRANSIENT_LIFETIMES / e.gamma && y > 1e-12 * y0.max(1e-300) {
            ts.push(t);
            ys.push(y.ln());
        }
    }
    if !(y0 > 1e-12) || y_end > 0.5 * y0 || ts.len() < 3 {
        return Err(Error::numerical(format!(
            "observable does not decay within the fit window ({:.3e} -> {:.3e})",
            y0, y_end
        )));
    }
    let (slope, _) = linalg::linear_fit(&ts, &ys);
    if !(slope < 0.0) {
        return Err(Error::numerical("fitted decay rate is not positive"));
    }
    let rate = -slope;
    let horizon = match opts.horizon {
        Horizon::Time(t) => t,
        Horizon::DecayTimes(f) => f / rate,
    };
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::invalid(format!("horizon {horizon} must be finite and positive")));
    }
    let effective = effective_model(&[(&e.target_jump, rate)])?.generator()?;
    let trace = compare_evolutions(&generator, &effective, &rho_sys, &rho0, horizon, opts.samples, &observable)?;
    let max_trace_distance = trace.iter().map(|s| s.trace_distance).fold(0.0, f64::max);
    Ok(EliminationReport {
        omega: e.omega,
        gamma: e.gamma,
        fitted_rate: rate,
        fitted_constant: rate / e.rate_scale(),
        horizon,
        max_trace_distance,
        in_regime: e.in_elimination_regime(),
        trace,
    })
}

#[derive(Clone, Debug)]
pub struct EliminationSweep {
    /// One report per ratio, in the order given.
    pub reports: Vec<EliminationReport>,
    /// Power-law exponent of the fitted rate against `Γ`.
    pub exponent: f64,
    /// Geometric mean of `κ Γ / Ω²`.
    pub constant: f64,
}

/// Runs [`elimination_check`] at `Γ = ratio · Ω` for each ratio, one worker per point.
pub fn elimination_sweep(
    target: &Operator,
    omega: f64,
    ratios: &[f64],
    opts: &CheckOptions,
) -> Result<EliminationSweep> {
    if ratios.len() < 2 {
        return Err(Error::invalid("a sweep needs at least two ratios"));
    }
    let embeddings =
        ratios.iter().map(|&r| AncillaEmbedding::new(target.clone(), omega, r * omega)).collect::<Result<Vec<_>>>()?;
    let results: Vec<Result<EliminationReport>> = thread::scope(|s| {
        let handles: Vec<_> = embeddings.iter().map(|e| s.spawn(move || elimination_check(e, opts))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::numerical("sweep worker panicked"))))
            .collect()
    });
    let reports = results.into_iter().collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = reports.iter().map(|r| r.gamma.ln()).collect();
    let ys: Vec<f64> = reports.iter().map(|r| r.fitted_rate.ln()).collect();
    let (exponent, _) = linalg::linear_fit(&xs, &ys);
    let constant = (reports.iter().map(|r| r.fitted_constant.ln()).sum::<f64>() / reports.len() as f64).exp();
    Ok(EliminationSweep { reports, exponent, constant })
}

/// Trace distance between the reduced steady state of the embedded model and the
/// steady state of the single-jump model (which does not depend on the rate).
pub fn steady_state_mismatch(e: &AncillaEmbedding) -> Result<f64> {
    let full = unique_steady_state(&embed(e)?.generator()?)?;
    let reduced = partial_trace(&full, &[e.system().n_sites()])?;
    let effective = unique_steady_state(&effective_model(&[(&e.target_jump, 1.0)])?.generator()?)?;
    trace_distance(&reduced, &effective)
}

/// Largest trace distance over `[0, horizon]` between the reduced dynamics of several
/// ancillas and the multi-jump effective model with the given rates.
pub fn composite_mismatch(
    embeddings: &[AncillaEmbedding],
    rates: &[f64],
    initial: &DensityMatrix,
    horizon: f64,
    samples: usize,
) -> Result<f64> {
    if rates.len() != embeddings.len() {
        return Err(Error::mismatch(format!("{} rates for {} embeddings", rates.len(), embeddings.len())));
    }
    let full = embed_many(embeddings)?.generator()?;
    let targets: Vec<(&Operator, f64)> = embeddings.iter().map(|e| &e.target_jump).zip(rates.iter().copied()).collect();
    let effective = effective_model(&targets)?.generator()?;
    let mut rho0 = initial.clone();
    let ground = DensityMatrix::basis_state(&SiteSystem::qubits(1)?, 0)?;
    for _ in embeddings {
        rho0 = rho0.tensor(&ground);
    }
    let identity = Operator::identity(initial.system());
    let trace = compare_evolutions(&full, &effective, initial, &rho0, horizon, samples.max(1), &identity)?;
    Ok(trace.iter().map(|s| s.trace_distance).fold(0.0, f64::max))
}

fn compare_evolutions(
    full: &Superoperator,
    effective: &Superoperator,
    rho_sys: &DensityMatrix,
    rho_full: &DensityMatrix,
    horizon: f64,
    samples: usize,
    observable: &Operator,
) -> Result<Vec<MismatchSample>> {
    let dt = horizon / samples as f64;
    let (full_step, eff_step) = (full.propagator(dt)?, effective.propagator(dt)?);
    let ancillas: Vec<usize> = (rho_sys.system().n_sites()..rho_full.system().n_sites()).collect();
    let (mut a, mut b) = (rho_full.clone(), rho_sys.clone());
    let mut out = Vec::with_capacity(samples + 1);
    for k in 0..=samples {
        if k > 0 {
            a = full_step.apply(&a)?;
            b = eff_step.apply(&b)?;
        }
        let reduced = partial_trace(&a, &ancillas)?;
        out.push(MismatchSample {
            time: dt * k as f64,
            observable: reduced.expectation(observable.matrix()).re,
            trace_distance: trace_distance(&reduced, &b)?,
        });
    }
    Ok(out)
}

/// `1/g` with `g` the smallest non-zero decay rate of the generator.
fn slowest_relaxation_time(generator: &Superoperator) -> Result<f64> {
    let gap = generator.spectrum()?.gap;
    if !(gap > 0.0) {
        return Err(Error::numerical("generator has no decaying modes"));
    }
    Ok(1.0 / gap)
}

fn unique_steady_state(generator: &Superoperator) -> Result<DensityMatrix> {
    let ss = generator.steady_states()?;
    if ss.kernel_dim != 1 {
        return Err(Error::numerical(format!("steady state is not unique (kernel dimension {})", ss.kernel_dim)));
    }
    Ok(ss.states.into_iter().next().expect("one steady state"))
}

fn top_eigenstate(o: &Operator) -> Result<DensityMatrix> {
    let (_, v) = linalg::eigh(o.matrix())?;
    let top = v.column(v.ncols() - 1).to_owned();
    DensityMatrix::pure(o.system(), &top)
}

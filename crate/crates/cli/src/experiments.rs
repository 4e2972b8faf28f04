//! One struct per subcommand. Field names double as flag names and config keys.

use std::path::PathBuf;

use clap::Args;
use dissipative::dqc::{
    closed_form_gap, compile_direct, compile_direct_with_rate, compile_unary_with, expected_fixed_point, readout,
    spectrum, QuantumCircuit, DEFAULT_RESET_RATE, DEFAULT_UNARY_BUDGET,
};
use dissipative::dse::{
    dse_channel, graph_hamiltonian, graph_liouvillian, graph_state, run_for, FrustrationFreeHamiltonian,
};
use dissipative::formats;
use dissipative::linalg::{self, c};
use dissipative::liouville::{multiset_distance, sort_spectrum};
use dissipative::mps::{
    mps_to_state, parent_hamiltonian, prepare, MatrixProductState, PreparationMode, PreparationModel, ScheduleParams,
};
use dissipative::quantum::{fidelity, pure_fidelity, trace_distance, DensityMatrix};
use dissipative::reservoir::{
    elimination_sweep, steady_state_mismatch, AncillaEmbedding, CheckOptions, Horizon, DEFAULT_SAMPLES,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::output::{complex, num, RunContext};
use crate::pool::par_map;
use crate::{presets, Experiment};

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DqcGap {
    /// Largest number of gates T
    #[arg(long, default_value_t = 6)]
    pub t_max: usize,
    /// Largest number of logical qubits N
    #[arg(long, default_value_t = 3)]
    pub n_max: usize,
    /// Random gate sets per (T, N)
    #[arg(long, default_value_t = 3)]
    pub gate_sets: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl Experiment for DqcGap {
    const NAME: &'static str = "dqc-gap";

    fn run(&self, ctx: &mut RunContext) -> CliResult<()> {
        if self.t_max == 0 || self.n_max == 0 || self.gate_sets == 0 {
            return Err(CliError::Config("t-max, n-max and gate-sets must be positive".into()));
        }
        let grid: Vec<(usize, usize, usize)> = (1..=self.t_max)
            .flat_map(|t| (1..=self.n_max).flat_map(move |n| (0..self.gate_sets).map(move |s| (t, n, s))))
            .collect();
        let gaps = par_map(&grid, |i, &(t, n, _)| -> CliResult<f64> {
            let circuit = QuantumCircuit::random(n, t, &mut presets::rng(self.seed, i as u64))?;
            Ok(spectrum(&compile_direct(&circuit)?)?.gap)
        });
        let mut rows = Vec::with_capacity(grid.len());
        let mut worst = 0.0f64;
        for (&(t, n, s), gap) in grid.iter().zip(gaps) {
            let gap = gap?;
            let exact = closed_form_gap(t);
            worst = worst.max((gap - exact).abs());
            rows.push(vec![
                t.to_string(),
                n.to_string(),
                s.to_string(),
                num(gap),
                num(exact),
                num((gap - exact).abs()),
            ]);
        }
        ctx.write_csv("gap.csv", &["T", "N", "gate_set", "numeric_gap", "closed_form_gap", "abs_error"], rows)?;
        ctx.record("max_abs_error", worst);
        ctx.record("instances", grid.len() as i64);
        Ok(())
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DqcRun {
    /// Circuit file; overrides --preset
    #[arg(long)]
    pub circuit: Option<PathBuf>,
    /// bell, random or identity
    #[arg(long, default_value = "bell")]
    pub preset: String,
    #[arg(long, default_value_t = 1)]
    pub n_qubits: usize,
    #[arg(long, default_value_t = 2)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Evolution time [default: 30 / gap]
    #[arg(long)]
    pub time: Option<f64>,
    /// Samples along the trajectory
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
}

impl Experiment for DqcRun {
    const NAME: &'static str = "dqc-run";

    fn run(&self, ctx: &mut RunContext) -> CliResult<()> {
        let circuit = presets::circuit(self.circuit.as_deref(), &self.preset, self.n_qubits, self.steps, self.seed)?;
        let compiled = compile_direct(&circuit)?;
        let generator = compiled.generator()?;
        let report = generator.spectrum()?;
        let time = self.time.unwrap_or(30.0 / report.gap);
        if !(time > 0.0) || !time.is_finite() || self.samples == 0 {
            return Err(CliError::Config("time and samples must be positive".into()));
        }
        let target = expected_fixed_point(&circuit);
        let step = generator.propagator(time / self.samples as f64)?;
        let mut rho = DensityMatrix::basis_state(compiled.system(), 0)?;
        let mut rows = Vec::with_capacity(self.samples + 1);
        for k in 0..=self.samples {
            if k > 0 {
                rho = step.apply(&rho)?;
            }
            let r = readout(&rho, &circuit);
            let p_final = r.map_or(0.0, |r| r.p_final);
            rows.push(vec![
                num(time * k as f64 / self.samples as f64),
                num(fidelity(&rho, &target)?),
                num(trace_distance(&rho, &target)?),
                num(p_final),
            ]);
        }
        ctx.write_csv("trace.csv", &["time", "fidelity", "trace_distance", "p_final"], rows)?;

        let out = readout(&rho, &circuit)?;
        let ideal = circuit.final_state();
        let probs: Vec<Vec<String>> = (0..ideal.len())
            .map(|i| {
                let bits = format!("{i:0width$b}", width = circuit.n_qubits());
                vec![bits, num(out.final_state.matrix()[[i, i]].re), num(ideal[i].norm_sqr())]
            })
            .collect();
        ctx.write_csv("readout.csv", &["outcome", "probability", "ideal_probability"], probs)?;
        ctx.record("gap", report.gap);
        ctx.record("steady_dim", report.steady_dim as i64);
        ctx.record("time", time);
        ctx.record("final_fidelity", fidelity(&rho, &target)?);
        ctx.record("p_final", out.p_final);
        ctx.record("output_fidelity", pure_fidelity(&out.final_state, &ideal)?);
        Ok(())
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DqcSpectrum {
    /// Circuit file; overrides --preset
    #[arg(long)]
    pub circuit: Option<PathBuf>,
    /// bell, random or identity
    #[arg(long, default_value = "random")]
    pub preset: String,
    #[arg(long, default_value_t = 1)]
    pub n_qubits: usize,
    #[arg(long, default_value_t = 2)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// direct or unary clock
    #[arg(long, default_value = "direct")]
    pub encoding: String,
    #[arg(long, default_value_t = DEFAULT_RESET_RATE)]
    pub reset_rate: f64,
}

impl Experiment for DqcSpectrum {
    const NAME: &'static str = "dqc-spectrum";

    fn run(&self, ctx: &mut RunContext) -> CliResult<()> {
        let circuit = presets::circuit(self.circuit.as_deref(), &self.preset, self.n_qubits, self.steps, self.seed)?;
        let compiled = match self.encoding.as_str() {
            "direct" => compile_direct_with_rate(&circuit, self.reset_rate)?,
            "unary" => compile_unary_with(&circuit, self.reset_rate, DEFAULT_UNARY_BUDGET)?,
            other => return Err(CliError::Config(format!("unknown encoding `{other}` (expected direct, unary)"))),
        };
        let report = spectrum(&compiled)?;
        let sorted = report.sorted();
        ctx.write_csv(
            "spectrum.csv",
            &["index", "re", "im"],
            sorted.iter().enumerate().map(|(i, &z)| {
                let [re, im] = complex(z);
                vec![i.to_string(), re, im]
            }),
        )?;
        ctx.record("encoding", self.encoding.as_str());
        ctx.record("gap", report.gap);
        ctx.record("steady_dim", report.steady_dim as i64);
        if self.reset_rate == DEFAULT_RESET_RATE {
            ctx.record("closed_form_gap", closed_form_gap(circuit.steps()));
        }
        if self.encoding == "unary" {
            let mut wrong = compiled.wrong_subspace_eigenvalues()?;
            sort_spectrum(&mut wrong);
            ctx.write_csv(
                "wrong_subspace.csv",
                &["index", "re", "im"],
                wrong.iter().enumerate().map(|(i, &z)| {
                    let [re, im] = complex(z);
                    vec![i.to_string(), re, im]
                }),
            )?;
            ctx.record("wrong_subspace_max_re", wrong.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max));
        }
        Ok(())
    }
}

fn dse_trace(
    ctx: &mut RunContext,
    h: &FrustrationFreeHamiltonian,
    correction: &str,
    input: &str,
    seed: u64,
    steps: usize,
    tol: f64,
) -> CliResult<()> {
    let corr = presets::corrections(correction, h)?;
    let ch = dse_channel(h, &corr)?;
    let rho0 = presets::initial_state(input, h.system(), seed)?;
    let trace = run_for(ch.channel(), h, &rho0, steps)?;
    ctx.write_csv(
        "trace.csv",
        &["step", "energy", "overlap", "change"],
        trace.records.iter().map(|r| vec![r.step.to_string(), num(r.energy), num(r.ground_overlap), num(r.change)]),
    )?;
    let last = trace.final_record();
    ctx.record("ground_dim", h.ground_space()?.dim() as i64);
    ctx.record("final_energy", last.energy);
    ctx.record("final_overlap", last.ground_overlap);
    ctx.record("worst_overlap_drop", trace.worst_overlap_drop());
    if let Some(r) = trace.records.iter().find(|r| r.energy <= tol) {
        ctx.record("converged_at", r.step as i64);
    }
    Ok(())
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DseRun {
    /// Hamiltonian file; overrides --preset
    #[arg(long)]
    pub hamiltonian: Option<PathBuf>,
    /// cluster<n>, ring<n>, aklt<n> or toric<lx>x<ly>
    #[arg(long, default_value = "cluster3")]
    pub preset: String,
    /// depolarizing, stabilizer or stabilizer-walk
    #[arg(long, default_value = "depolarizing")]
    pub correction: String,
    /// random-pure, random-mixed, maximally-mixed or basis<k>
    #[arg(long, default_value = "random-pure")]
    pub input: String,
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Energy threshold reported as convergence
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

impl Experiment for DseRun {
    const NAME: &'static str = "dse-run";

    fn run(&self, ctx: &mut RunContext) -> CliResult<()> {
        let h = presets::hamiltonian(self.hamiltonian.as_deref(), &self.preset)?;
        dse_trace(ctx, &h, &self.correction, &self.input, self.seed, self.steps, self.tol)
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ToricRun {
    #[arg(long, default_value_t = 2)]
    pub lx: usize,
    #[arg(long, default_value_t = 2)]
    pub ly: usize,
    /// depolarizing, stabilizer or stabilizer-walk
    #[arg(long, default_value = "stabilizer-walk")]
    pub correction: String,
    #[arg(long, default_value = "random-pure")]
    pub input: String,
    #[arg(long, default_value_t = 400)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

impl Experiment for ToricRun {
    const NAME: &'static str = "toric-run";

    fn run(&self, ctx: &mut RunContext) -> CliResult<()> {
        let h = dissipative::dse::toric_code(self.lx, self.ly)?;
        dse_trace(ctx, &h, &self.correction, &self.input, self.seed, self.steps, self.tol)
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GraphState {
    /// cluster<n>, ring<n>, complete<n>, star<n> or an edge list like 0-1,1-2
    #[arg(long, default_value = "cluster3")]
    pub graph: String,
    /// Vertex count for an edge list [default: largest vertex + 1]
    #[arg(long)]
    pub vertices: Option<usize>,
}

impl Experiment for GraphState {
    const NAME: &'static str = "graph-state";

    fn run(&self, ctx: &mut RunContext) -> CliResult<()> {
        let g = presets::graph(&self.graph, self.vertices)?;
        let generator = graph_liouvillian(&g)?.generator()?;
        let mut numeric = generator.eigenvalues()?;
        sort_spectrum(&mut numeric);
        let h = linalg::eigvalsh(graph_hamiltonian(&g)?.total().matrix())?;
        let mut predicted: Vec<_> = h.iter().flat_map(|&a| h.iter().map(move |&b| c(-(a + b) / 2.0, 0.0))).collect();
        sort_spectrum(&mut predicted);
        ctx.write_csv(
            "spectrum.csv",
            &["index", "numeric_re", "numeric_im", "predicted_re", "predicted_im"],
            numeric.iter().zip(&predicted).enumerate().map(|(i, (&a, &b))| {
                let ([ar, ai], [br, bi]) = (complex(a), complex(b));
                vec![i.to_string(), ar, ai, br, bi]
            }),
        )?;
        let steady = generator.steady_states()?;
        ctx.record("n_vertices", g.n_vertices() as i64);
        ctx.record("n_edges", g.edges().len() as i64);
        ctx.record("multiset_distance", multiset_distance(&numeric, &predicted));
        ctx.record("steady_dim", steady.kernel_dim as i64);
        if let [only] = steady.states.as_slice() {
            ctx.record("graph_state_fidelity", pure_fidelity(only, &graph_state(&g))?);
        }
        Ok(())
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct MpsPrepare {
    /// MPS file; overrides --preset
    #[arg(long)]
    pub mps: Option<PathBuf>,
    /// aklt, ghz or w-like
    #[arg(long, default_value = "aklt")]
    pub preset: String,
    #[arg(long, default_value_t = 4)]
    pub n_sites: usize,
    /// Schedule constant C
    #[arg(long, default_value_t = dissipative::mps::DEFAULT_C)]
    pub c: f64,
    /// Channel applications [default: the N^(log2 N + log2 C) budget]
    #[arg(long)]
    pub steps: Option<u64>,
    /// deterministic, sampled or auto
    #[arg(long, default_value = "auto")]
    pub mode: String,
    #[arg(long, default_value_t = 200)]
    pub trajectories: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// maximally-mixed, random-pure, random-mixed or basis<k>
    #[arg(long, default_value = "maximally-mixed")]
    pub input: String,
}

impl Experiment for MpsPrepare {
    const NAME: &'static str = "mps-prepare";

    fn run(&self, ctx: &mut RunContext) -> CliResult<()> {
        let mps = match &self.mps {
            Some(path) => formats::read_mps(path)?,
            None => MatrixProductState::preset(self.preset.parse()?, self.n_sites)?,
        };
        mps.require_injective()?;
        let model = PreparationModel::new(&mps)?;
        let params = ScheduleParams::new(self.c, mps.n_sites())?;
        let steps = self.steps.unwrap_or_else(|| params.step_budget());
        let (trajectories, seed) = (self.trajectories, self.seed);
        let mode = match self.mode.as_str() {
            "deterministic" => PreparationMode::Deterministic,
            "sampled" => PreparationMode::Sampled { trajectories, seed },
            "auto" => PreparationMode::Auto { trajectories, seed },
            other => {
                return Err(CliError::Config(format!("unknown mode `{other}` (expected deterministic, sampled, auto)")))
            }
        };
        let rho0 = presets::initial_state(&self.input, model.system(), self.seed)?;
        let report = prepare(&model, &params, &rho0, steps, mode)?;

        let n_levels = report.checkpoints[0].errors.levels.len();
        let mut header = vec!["step".to_string(), "fidelity".to_string()];
        header.extend((1..n_levels).map(|r| format!("level_{r}")));
        header.push("ring".into());
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        ctx.write_csv(
            "checkpoints.csv",
            &header,
            report.checkpoints.iter().map(|cp| {
                let mut row = vec![cp.step.to_string(), num(cp.fidelity)];
                row.extend(cp.errors.levels.iter().map(|&x| num(x)));
                row
            }),
        )?;

        let target = mps_to_state(&mps)?;
        let image = model.channel_t(&params)?.apply(&target)?;
        ctx.record("step_budget", params.step_budget() as i64);
        ctx.record("steps", steps as i64);
        ctx.record(
            "mode",
            match report.mode {
                PreparationMode::Sampled { .. } => "sampled",
                _ => "deterministic",
            },
        );
        ctx.record("final_fidelity", report.final_fidelity());
        ctx.record("fixed_point_defect", linalg::max_abs_diff(image.matrix(), target.matrix()));
        ctx.record("parent_ground_dim", parent_hamiltonian(&mps)?.ground_space()?.dim() as i64);
        Ok(())
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ReservoirCheck {
    /// sigma-minus or sigma-minus-pair
    #[arg(long, default_value = "sigma-minus")]
    pub target: String,
    /// Coupling rate Ω
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    /// Values of Γ/Ω to sweep
    #[arg(long, value_delimiter = ',', default_values_t = vec![10.0, 30.0, 100.0])]
    pub ratios: Vec<f64>,
    /// Comparison horizon in units of the fitted decay time
    #[arg(long, default_value_t = 5.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
}

impl Experiment for ReservoirCheck {
    const NAME: &'static str = "reservoir-check";

    fn run(&self, ctx: &mut RunContext) -> CliResult<()> {
        if !(self.omega > 0.0) {
            return Err(CliError::Config("omega must be positive (the sweep sets Γ = ratio·Ω)".into()));
        }
        let target = presets::reservoir_target(&self.target)?;
        let opts = CheckOptions {
            horizon: Horizon::DecayTimes(self.horizon),
            samples: self.samples,
            ..CheckOptions::default()
        };
        let sweep = elimination_sweep(&target, self.omega, &self.ratios, &opts)?;
        ctx.write_csv(
            "sweep.csv",
            &[
                "index",
                "gamma_over_omega",
                "omega",
                "gamma",
                "fitted_rate",
                "fitted_constant",
                "horizon",
                "max_trace_distance",
            ],
            sweep.reports.iter().enumerate().map(|(i, r)| {
                vec![
                    i.to_string(),
                    num(r.gamma / r.omega),
                    num(r.omega),
                    num(r.gamma),
                    num(r.fitted_rate),
                    num(r.fitted_constant),
                    num(r.horizon),
                    num(r.max_trace_distance),
                ]
            }),
        )?;
        ctx.write_csv(
            "trace.csv",
            &["index", "time", "observable", "trace_distance"],
            sweep.reports.iter().enumerate().flat_map(|(i, r)| {
                r.trace.iter().map(move |s| vec![i.to_string(), num(s.time), num(s.observable), num(s.trace_distance)])
            }),
        )?;
        let last = sweep.reports.last().expect("at least two ratios");
        let embedding = AncillaEmbedding::new(target, last.omega, last.gamma)?;
        ctx.record("exponent", sweep.exponent);
        ctx.record("fitted_constant", sweep.constant);
        ctx.record("final_mismatch", last.max_trace_distance);
        ctx.record("steady_state_distance", steady_state_mismatch(&embedding)?);
        ctx.record("all_in_regime", sweep.reports.iter().all(|r| r.in_regime));
        Ok(())
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Validate {
    /// Circuit file
    #[arg(long)]
    pub circuit: Option<PathBuf>,
    /// Hamiltonian file
    #[arg(long)]
    pub hamiltonian: Option<PathBuf>,
    /// MPS file
    #[arg(long)]
    pub mps: Option<PathBuf>,
}

struct Check {
    name: &'static str,
    value: String,
    /// `None` for informational rows.
    pass: Option<bool>,
}

impl Check {
    fn info(name: &'static str, value: impl ToString) -> Self {
        Check { name, value: value.to_string(), pass: None }
    }

    fn test(name: &'static str, value: impl ToString, pass: bool) -> Self {
        Check { name, value: value.to_string(), pass: Some(pass) }
    }
}

impl Validate {
    fn circuit_checks(path: &std::path::Path) -> CliResult<Vec<Check>> {
        let circuit = formats::read_circuit(path)?;
        let defect = circuit.gates().iter().map(|g| linalg::unitarity_defect(g.unitary())).fold(0.0, f64::max);
        Ok(vec![
            Check::info("n_qubits", circuit.n_qubits()),
            Check::info("steps", circuit.steps()),
            Check::test("max_unitarity_defect", num(defect), defect <= dissipative::dqc::UNITARITY_TOL),
        ])
    }

    fn hamiltonian_checks(path: &std::path::Path) -> CliResult<Vec<Check>> {
        let h = formats::read_hamiltonian(path)?;
        let v = h.validate()?;
        let worst = v.projector_defects.iter().copied().fold(0.0, f64::max);
        Ok(vec![
            Check::info("n_sites", h.system().n_sites()),
            Check::info("n_terms", h.n_terms()),
            Check::test("max_projector_defect", num(worst), v.all_projectors()),
            Check::test("min_eigenvalue", num(v.min_eigenvalue), v.is_frustration_free()),
            Check::info("ground_dim", v.ground_dim),
            Check::info("commuting", v.is_commuting(1e-10)),
        ])
    }

    fn mps_checks(path: &std::path::Path) -> CliResult<Vec<Check>> {
        let mps = formats::read_mps(path)?;
        let d2 = mps.bond_dim() * mps.bond_dim();
        let rank = mps.two_site_rank()?;
        let mut checks = vec![
            Check::info("physical_dim", mps.physical_dim()),
            Check::info("bond_dim", mps.bond_dim()),
            Check::info("n_sites", mps.n_sites()),
            Check::test("two_site_rank", rank, rank == d2),
        ];
        if rank == d2 {
            let dim = parent_hamiltonian(&mps)?.ground_space()?.dim();
            checks.push(Check::test("parent_ground_dim", dim, dim == 1));
        }
        Ok(checks)
    }
}

impl Experiment for Validate {
    const NAME: &'static str = "validate";

    fn run(&self, ctx: &mut RunContext) -> CliResult<()> {
        let checks = match (&self.circuit, &self.hamiltonian, &self.mps) {
            (Some(p), None, None) => Self::circuit_checks(p)?,
            (None, Some(p), None) => Self::hamiltonian_checks(p)?,
            (None, None, Some(p)) => Self::mps_checks(p)?,
            _ => return Err(CliError::Config("give exactly one of --circuit, --hamiltonian, --mps".into())),
        };
        let failed: Vec<&str> = checks.iter().filter(|c| c.pass == Some(false)).map(|c| c.name).collect();
        ctx.write_csv(
            "checks.csv",
            &["check", "value", "pass"],
            checks.iter().map(|c| {
                let pass = match c.pass {
                    Some(true) => "yes",
                    Some(false) => "no",
                    None => "-",
                };
                vec![c.name.to_string(), c.value.clone(), pass.to_string()]
            }),
        )?;
        ctx.record("failed_checks", failed.len() as i64);
        if failed.is_empty() {
            Ok(())
        } else {
            Err(CliError::InvalidInstance(format!("failed checks: {}", failed.join(", "))))
        }
    }
}

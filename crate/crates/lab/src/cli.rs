//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anderson_lab_core::estimators::{
    ao_probability, boundary_decay_scan, centered_pairs, combes_thomas_check, convergence_scan, fmb_scan,
    hoelder_scan, kernel_decay_scan, map_realizations, mirrored_pairs, ssf_positivity_scan, ucp_positivity_check,
    wegner_check, ConvergenceTarget, SitePair,
};
use anderson_lab_core::funcalc::BvFunction;
use anderson_lab_core::identities::{
    overlap_agreement_suite, overlap_hamiltonian_suite, projection_identity_suite, quasi_norm_suite,
    shift_trace_suite, SuiteReport,
};
use anderson_lab_core::linalg::symmetric_eigenvalues;
use anderson_lab_core::model::{apply_perturbation, build_hamiltonian, sample_realization, BoxRegion, ModelConfig};
use anderson_lab_core::overlap::ground_state_overlap;
use anderson_lab_core::shift::ssf_from_values;
use anderson_lab_core::spectral::{eig, ids_estimate};
use anderson_lab_core::stats::{EstimatorResult, Proportion, DEFAULT_CONFIDENCE};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{parse_function, parse_grid, parse_ints, ConfigFile};
use crate::emit::{emit, OutputPaths, Report, Row, Table, SOFTWARE, SCHEMA_VERSION};
use crate::error::LabError;
use crate::exec::RayonExecutor;

#[derive(Debug, Parser)]
#[command(name = "anderson-lab", version, about = "Disorder-averaged spectral shift and Anderson orthogonality experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalArgs {
    /// TOML config file; required by every command except verify-identities.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for the CSV and JSON outputs.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// File stem of the outputs (default: the command name).
    #[arg(long, global = true)]
    pub stem: Option<String>,
    /// Record degenerate energies and continue instead of refusing.
    #[arg(long, global = true)]
    pub lenient: bool,
    /// Write `null` for the wall time so repeated runs are byte-identical.
    #[arg(long, global = true)]
    pub fixed_clock: bool,
    /// Worker threads (overrides ANDERSON_LAB_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Realizations per estimate (overrides [estimators].n).
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Disorder seed (overrides model.seed); seed of the random instances
    /// for verify-identities.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Perturbation strength τ (overrides model.perturbation_strength).
    #[arg(long, global = true)]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
pub enum Command {
    /// Eigenvalues of one realization.
    Spectrum(SpectrumArgs),
    /// Integrated density of states N_L(E)/L^d.
    Ids(EnergyGridArgs),
    /// Spectral shift ξ(E) = N(E; H) − N(E; H + τW).
    Ssf(EnergyGridArgs),
    /// Ground-state overlap S_L(E) of H and H + τW.
    Overlap(EnergyGridArgs),
    /// Fractional moments of resolvent entries against distance.
    FmbScan(FmbArgs),
    /// Localized Schatten norms of f(H) − f(H + τW).
    KernelScan(KernelArgs),
    /// Localized Schatten norms of f(H_G) − f(H) near the boundary of a sub-box G.
    BoundaryScan(BoundaryArgs),
    /// Discrepancy of finite boxes against the largest box.
    Converge(ConvergeArgs),
    /// Modulus of continuity of E ↦ T(E) in trace norm.
    Hoelder(HoelderArgs),
    /// Probabilities of a nonzero index and of a vanishing overlap.
    AoProb(AoArgs),
    /// Eigenvalue counts in short intervals against interval length and volume.
    Wegner(WegnerArgs),
    /// Resolvent decay below the spectrum.
    CombesThomas(CombesThomasArgs),
    /// 𝔼[ξ(E)] alongside a density-of-states estimate.
    SsfPositivity(SsfPositivityArgs),
    /// 𝔼[Tr 1_Γ f(H)] against the density-of-states weighted integral of f.
    Ucp(UcpArgs),
    /// Randomized projection, determinant, quasi-norm and trace identities.
    VerifyIdentities(IdentityArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum(_) => "spectrum",
            Command::Ids(_) => "ids",
            Command::Ssf(_) => "ssf",
            Command::Overlap(_) => "overlap",
            Command::FmbScan(_) => "fmb-scan",
            Command::KernelScan(_) => "kernel-scan",
            Command::BoundaryScan(_) => "boundary-scan",
            Command::Converge(_) => "converge",
            Command::Hoelder(_) => "hoelder",
            Command::AoProb(_) => "ao-prob",
            Command::Wegner(_) => "wegner",
            Command::CombesThomas(_) => "combes-thomas",
            Command::SsfPositivity(_) => "ssf-positivity",
            Command::Ucp(_) => "ucp",
            Command::VerifyIdentities(_) => "verify-identities",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SpectrumArgs {
    /// Realization index.
    #[arg(long, default_value_t = 0)]
    pub index: u64,
    /// Diagonalize H + τW instead of H.
    #[arg(long)]
    pub perturbed: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EnergyGridArgs {
    /// Energies: `a,b,...` or `lo:hi:count`.
    #[arg(long = "E", allow_hyphen_values = true)]
    pub energies: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FmbArgs {
    #[arg(long = "E", allow_hyphen_values = true)]
    pub energy: f64,
    /// Pair distances along the first axis (default 1..=min(30, L−1)).
    #[arg(long)]
    pub distances: Option<String>,
    /// Imaginary parts η (default [estimators].etas).
    #[arg(long)]
    pub etas: Option<String>,
    /// Fractional moment s (default [estimators].moment).
    #[arg(long)]
    pub s: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KernelArgs {
    /// Function literal (default [funcalc].function).
    #[arg(long, allow_hyphen_values = true)]
    pub function: Option<String>,
    /// Schatten exponent (default [estimators].schatten_p).
    #[arg(long)]
    pub p: Option<f64>,
    /// Mirrored pairs (−k, k) (default 0..=min(15, L/2 − 1)).
    #[arg(long)]
    pub offsets: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoundaryArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    /// Side of the centered sub-box G.
    #[arg(long)]
    pub subbox_side: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvergeKind {
    Kernel,
    Ssf,
    Overlap,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConvergeArgs {
    #[arg(long, value_enum)]
    pub kind: ConvergeKind,
    /// Ascending side lengths; the last is the proxy.
    #[arg(long)]
    pub lengths: String,
    /// Energy for the ssf and overlap kinds.
    #[arg(long = "E", allow_hyphen_values = true)]
    pub energy: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HoelderArgs {
    #[arg(long = "E", allow_hyphen_values = true)]
    pub energies: String,
    #[arg(long, default_value = "0.25,0.5,0.75,1")]
    pub alphas: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AoArgs {
    #[arg(long = "E", allow_hyphen_values = true)]
    pub energy: f64,
    /// τ values to sweep (default: the configured τ).
    #[arg(long)]
    pub taus: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WegnerArgs {
    /// Center of the intervals.
    #[arg(long, allow_hyphen_values = true)]
    pub center: f64,
    /// Interval lengths |I|.
    #[arg(long)]
    pub lengths: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CombesThomasArgs {
    #[arg(long = "E", allow_hyphen_values = true)]
    pub energy: f64,
    /// Pair distances (default 1..=min(30, L−1)).
    #[arg(long)]
    pub distances: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SsfPositivityArgs {
    #[arg(long = "E", allow_hyphen_values = true)]
    pub energies: String,
    /// Half-width of the density-of-states window.
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct UcpArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub function: Option<String>,
    /// Energy above which f must vanish.
    #[arg(long = "E", allow_hyphen_values = true)]
    pub energy: f64,
    /// Side of the centered box Γ (default: the whole box).
    #[arg(long)]
    pub gamma_side: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IdentityArgs {
    /// Largest matrix dimension (and chain length).
    #[arg(long, default_value_t = 6)]
    pub dim: usize,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
}

/// Seed of the identity suites when `--seed` is not given.
pub const DEFAULT_IDENTITY_SEED: u64 = 1;

/// What a run writes into the `spec` field of its JSON report.
#[derive(Debug, Serialize)]
pub struct ExperimentSpec<'a> {
    pub command: &'a Command,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<&'a ConfigFile>,
    pub strict: bool,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code: 0 success, 1 config error, 2 numerical
/// failure, 3 precondition refusal.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(paths) => {
            println!("wrote {} and {}", paths.csv.display(), paths.json.display());
            0
        }
        Err((e, paths)) => {
            if let Some(p) = paths {
                println!("wrote {} and {}", p.csv.display(), p.json.display());
            }
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

type Outcome = Result<OutputPaths, (LabError, Option<OutputPaths>)>;

fn execute(cli: &Cli) -> Outcome {
    let start = Instant::now();
    let g = &cli.global;
    let name = cli.command.name();
    let paths = OutputPaths::new(&g.out_dir, g.stem.as_deref().unwrap_or(name));
    let plain = |e: LabError| (e, None);

    let exec = RayonExecutor::new(g.threads).map_err(plain)?;
    let config = match (&cli.command, &g.config) {
        (Command::VerifyIdentities(_), None) => None,
        (_, None) => return Err(plain(LabError::Config(format!("`{name}` needs --config")))),
        (_, Some(path)) => Some(resolve_config(path, g).map_err(plain)?),
    };
    let ctx = Context {
        config: config.as_ref(),
        base: g.config.as_deref().and_then(Path::parent),
        strict: !g.lenient,
        identity_seed: g.seed.unwrap_or(DEFAULT_IDENTITY_SEED),
        exec,
    };

    let (table, result, check) = dispatch(&cli.command, &ctx).map_err(plain)?;
    let seed = match (&cli.command, &config) {
        (Command::VerifyIdentities(_), _) => ctx.identity_seed,
        (_, Some(c)) => c.model.seed,
        (_, None) => 0,
    };
    let spec = ExperimentSpec { command: &cli.command, config: config.as_ref(), strict: ctx.strict };
    let report = Report {
        schema_version: SCHEMA_VERSION,
        software: SOFTWARE,
        command: name,
        spec: &spec,
        seed,
        wall_time_seconds: (!g.fixed_clock).then(|| start.elapsed().as_secs_f64()),
        result: &result,
    };
    emit(&table, &report, &paths).map_err(plain)?;
    match check {
        Some(e) => Err((e, Some(paths))),
        None => Ok(paths),
    }
}

fn resolve_config(path: &Path, g: &GlobalArgs) -> Result<ConfigFile, LabError> {
    let mut c = ConfigFile::load(path)?;
    if let Some(n) = g.n {
        c.estimators.n = n;
    }
    if let Some(seed) = g.seed {
        c.model.seed = seed;
    }
    if let Some(tau) = g.tau {
        c.model.perturbation_strength = tau;
    }
    if c.estimators.n == 0 {
        return Err(LabError::Config("estimators.n must be positive".into()));
    }
    c.model.validate().map_err(|e| LabError::Config(e.to_string()))?;
    Ok(c)
}

struct Context<'a> {
    config: Option<&'a ConfigFile>,
    base: Option<&'a Path>,
    strict: bool,
    identity_seed: u64,
    exec: RayonExecutor,
}

impl Context<'_> {
    fn config(&self) -> &ConfigFile {
        self.config.expect("config resolved for this command")
    }

    fn model(&self) -> &ModelConfig {
        &self.config().model
    }

    fn n(&self) -> usize {
        self.config().estimators.n
    }

    fn function(&self, literal: &Option<String>) -> Result<(String, BvFunction), LabError> {
        let text = literal
            .clone()
            .or_else(|| self.config().funcalc.function.clone())
            .ok_or_else(|| LabError::Config("no function given (--function or [funcalc].function)".into()))?;
        let f = parse_function(&text, self.base)?;
        Ok((text, f))
    }

    fn explicit_pairs(&self) -> Option<Vec<SitePair>> {
        self.config().estimators.pairs.as_ref().map(|ps| ps.iter().map(|p| (p.a, p.b)).collect())
    }

    fn centered(&self, distances: &Option<String>) -> Result<Vec<SitePair>, LabError> {
        if let Some(p) = self.explicit_pairs() {
            return Ok(p);
        }
        let ds = match distances {
            Some(text) => parse_ints(text)?,
            None => (1..=30.min(self.model().sites_per_side as i64 - 1)).collect(),
        };
        Ok(centered_pairs(&ds))
    }

    fn mirrored(&self, offsets: &Option<String>) -> Result<Vec<SitePair>, LabError> {
        if let Some(p) = self.explicit_pairs() {
            return Ok(p);
        }
        let ks = match offsets {
            Some(text) => parse_ints(text)?,
            None => (0..=15.min(self.model().sites_per_side as i64 / 2 - 1)).collect(),
        };
        Ok(mirrored_pairs(&ks))
    }

    fn kernel_p(&self, p: Option<f64>) -> f64 {
        p.unwrap_or(self.config().estimators.schatten_p)
    }
}

type Dispatched = (Table, serde_json::Value, Option<LabError>);

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value, LabError> {
    serde_json::to_value(v).map_err(|e| LabError::Io(e.to_string()))
}

fn dispatch(command: &Command, ctx: &Context) -> Result<Dispatched, LabError> {
    let done = |table: Table, value: serde_json::Value| Ok((table, value, None));
    match command {
        Command::Spectrum(a) => spectrum(ctx, a),
        Command::Ids(a) => {
            let energies = parse_grid(&a.energies)?;
            let rows = ids_estimate(ctx.model(), &energies, ctx.n(), &ctx.exec)?;
            let table = Table::new("ids", energies.iter().zip(&rows).map(|(&e, r)| Row::from_estimate(e, r)).collect());
            done(table, to_value(&rows)?)
        }
        Command::Ssf(a) => ssf(ctx, &parse_grid(&a.energies)?),
        Command::Overlap(a) => overlap(ctx, &parse_grid(&a.energies)?),
        Command::FmbScan(a) => {
            let c = ctx.config();
            let etas = match &a.etas {
                Some(t) => parse_grid(t)?,
                None => c.estimators.etas.clone(),
            };
            let s = a.s.unwrap_or(c.estimators.moment);
            let scan = fmb_scan(ctx.model(), a.energy, &etas, s, &ctx.centered(&a.distances)?, ctx.n(), &ctx.exec)?;
            let mut points = scan.diagonal.clone();
            points.extend(scan.fit.points.iter().cloned());
            done(Table::from_points("fractional-moment", &points), to_value(&scan)?)
        }
        Command::KernelScan(a) => {
            let (literal, f) = ctx.function(&a.function)?;
            let p = ctx.kernel_p(a.p);
            let fit = kernel_decay_scan(ctx.model(), &f, p, &ctx.mirrored(&a.offsets)?, ctx.n(), &ctx.exec)?;
            let value = serde_json::json!({ "function": literal, "p": p, "fit": fit });
            done(Table::from_points("kernel-norm", &fit.points), value)
        }
        Command::BoundaryScan(a) => {
            let (literal, f) = ctx.function(&a.kernel.function)?;
            let p = ctx.kernel_p(a.kernel.p);
            let subbox = BoxRegion::centered(ctx.model().dimension, a.subbox_side);
            let pairs = ctx.mirrored(&a.kernel.offsets)?;
            let fit = boundary_decay_scan(ctx.model(), &f, p, &subbox, &pairs, ctx.n(), &ctx.exec)?;
            let value = serde_json::json!({ "function": literal, "p": p, "subbox": subbox.describe(), "fit": fit });
            done(Table::from_points("boundary-norm", &fit.points), value)
        }
        Command::Converge(a) => {
            let lengths: Vec<usize> = parse_ints(&a.lengths)?
                .into_iter()
                .map(|l| usize::try_from(l).map_err(|_| LabError::Config(format!("length {l} must be nonnegative"))))
                .collect::<Result<_, _>>()?;
            let need_energy = || a.energy.ok_or_else(|| LabError::Config("--E is required for this kind".into()));
            let (target, literal) = match a.kind {
                ConvergeKind::Kernel => {
                    let (literal, f) = ctx.function(&a.kernel.function)?;
                    (ConvergenceTarget::Kernel { f, p: ctx.kernel_p(a.kernel.p) }, Some(literal))
                }
                ConvergeKind::Ssf => (ConvergenceTarget::Ssf { energy: need_energy()? }, None),
                ConvergeKind::Overlap => (ConvergenceTarget::Overlap { energy: need_energy()? }, None),
            };
            let fit = convergence_scan(&target, ctx.model(), &lengths, ctx.n(), &ctx.exec)?;
            let value = serde_json::json!({ "kind": target.kind(), "function": literal, "fit": fit });
            done(Table::from_points(target.kind(), &fit.points), value)
        }
        Command::Hoelder(a) => {
            let report = hoelder_scan(ctx.model(), &parse_grid(&a.energies)?, &parse_grid(&a.alphas)?, ctx.n(), &ctx.exec)?;
            done(Table::from_points("hoelder-modulus", &report.points), to_value(&report)?)
        }
        Command::AoProb(a) => ao_prob(ctx, a),
        Command::Wegner(a) => {
            let report = wegner_check(ctx.model(), a.center, &parse_grid(&a.lengths)?, ctx.n(), &ctx.exec)?;
            let rows = report.rows.iter().map(|r| Row::from_estimate(r.length, &r.count)).collect();
            done(Table::new("wegner-count", rows), to_value(&report)?)
        }
        Command::CombesThomas(a) => {
            let report = combes_thomas_check(ctx.model(), a.energy, &ctx.centered(&a.distances)?, ctx.n(), &ctx.exec)?;
            done(Table::from_points("resolvent-max", &report.fit.points), to_value(&report)?)
        }
        Command::SsfPositivity(a) => {
            let report = ssf_positivity_scan(ctx.model(), &parse_grid(&a.energies)?, a.delta, ctx.n(), &ctx.exec)?;
            if ctx.strict && report.degenerate > 0 {
                return Err(LabError::Strict(format!(
                    "{} realization-energy pairs sit within eig_tol of an eigenvalue",
                    report.degenerate
                )));
            }
            let rows = report.rows.iter().map(|r| Row::from_estimate(r.energy, &r.xi)).collect();
            done(Table::new("ssf", rows), to_value(&report)?)
        }
        Command::Ucp(a) => {
            let (literal, f) = ctx.function(&a.function)?;
            let model = ctx.model();
            let side = a.gamma_side.unwrap_or(model.sites_per_side);
            let gamma = BoxRegion::centered(model.dimension, side);
            if !model.region().contains_box(&gamma) {
                return Err(LabError::Config(format!("gamma side {side} exceeds the box")));
            }
            let sites: Vec<_> = gamma.sites().collect();
            let report = ucp_positivity_check(model, &sites, &f, a.energy, ctx.n(), &ctx.exec)?;
            let table = Table::new("localized-trace", vec![Row::from_estimate(a.energy, &report.trace)]);
            let value = serde_json::json!({ "function": literal, "gamma": gamma.describe(), "report": report });
            done(table, value)
        }
        Command::VerifyIdentities(a) => verify_identities(ctx, a),
    }
}

fn spectrum(ctx: &Context, a: &SpectrumArgs) -> Result<Dispatched, LabError> {
    let model = ctx.model();
    let omega = sample_realization(model, a.index);
    let mut h = build_hamiltonian(model, &omega)?;
    if a.perturbed {
        h = apply_perturbation(&h, model)?;
    }
    let spec = eig(&h)?;
    let rows = spec.values.iter().enumerate().map(|(k, &v)| Row { abscissa: k as f64, mean: v, stderr: 0.0, n: 1 }).collect();
    let value = serde_json::json!({
        "seed_path": omega.seed_path(),
        "perturbed": a.perturbed,
        "min_gap": spec.min_gap(),
        "orthogonality_residual": spec.orthogonality_residual(),
        "reconstruction_residual": spec.reconstruction_residual(h.matrix()),
        "eigenvalues": spec.values,
    });
    Ok((Table::new("eigenvalue", rows), value, None))
}

#[derive(Serialize)]
struct EnergyRow {
    energy: f64,
    estimate: EstimatorResult,
    /// Realizations left out because `E` sat on an eigenvalue.
    degenerate: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    zero_overlap: Option<Proportion>,
}

/// `(value, degenerate)` per realization and energy, realization-major.
fn per_energy<F>(ctx: &Context, energies: &[f64], statistic: F) -> Result<Vec<Vec<(f64, bool)>>, LabError>
where
    F: Fn(&ModelConfig, &anderson_lab_core::model::DisorderRealization) -> anderson_lab_core::Result<Vec<(f64, bool)>>
        + Sync
        + Send,
{
    let samples = map_realizations(ctx.model(), ctx.n(), &ctx.exec, statistic)?;
    if ctx.strict {
        for (index, row) in samples.iter().enumerate() {
            if let Some(k) = row.iter().position(|s| s.1) {
                return Err(LabError::Strict(format!(
                    "energy {} is within eig_tol of an eigenvalue for realization (seed {}, index {index})",
                    energies[k],
                    ctx.model().seed
                )));
            }
        }
    }
    Ok(samples)
}

fn energy_rows(
    ctx: &Context,
    name: &str,
    energies: &[f64],
    samples: &[Vec<(f64, bool)>],
    zero: Option<&dyn Fn(f64) -> bool>,
) -> Result<(Table, Vec<EnergyRow>), LabError> {
    let mut rows = Vec::with_capacity(energies.len());
    for (k, &e) in energies.iter().enumerate() {
        let kept: Vec<f64> = samples.iter().filter(|r| !r[k].1).map(|r| r[k].0).collect();
        let estimate = EstimatorResult::from_samples(name, &kept, ctx.model().seed, DEFAULT_CONFIDENCE)?;
        let zero_overlap = zero.map(|is_zero| Proportion::wilson(kept.iter().filter(|&&v| is_zero(v)).count(), kept.len(), DEFAULT_CONFIDENCE));
        rows.push(EnergyRow { energy: e, degenerate: samples.len() - kept.len(), estimate, zero_overlap });
    }
    let table = Table::new(name, rows.iter().map(|r| Row::from_estimate(r.energy, &r.estimate)).collect());
    Ok((table, rows))
}

fn ssf(ctx: &Context, energies: &[f64]) -> Result<Dispatched, LabError> {
    let eig_tol = ctx.model().tolerances.eig_tol;
    let samples = per_energy(ctx, energies, |cfg, omega| {
        let h = build_hamiltonian(cfg, omega)?;
        let a = symmetric_eigenvalues(h.matrix())?;
        let b = symmetric_eigenvalues(apply_perturbation(&h, cfg)?.matrix())?;
        Ok(energies
            .iter()
            .map(|&e| {
                let v = ssf_from_values(&a, &b, e, eig_tol);
                (v.xi as f64, v.degenerate)
            })
            .collect())
    })?;
    let (table, rows) = energy_rows(ctx, "ssf", energies, &samples, None)?;
    Ok((table, to_value(&rows)?, None))
}

fn overlap(ctx: &Context, energies: &[f64]) -> Result<Dispatched, LabError> {
    let eig_tol = ctx.model().tolerances.eig_tol;
    let samples = per_energy(ctx, energies, |cfg, omega| {
        let h = build_hamiltonian(cfg, omega)?;
        let a = eig(&h)?;
        let b = eig(&apply_perturbation(&h, cfg)?)?;
        energies
            .iter()
            .map(|&e| ground_state_overlap(&a, &b, e, eig_tol).map(|s| (s.value, s.degenerate)))
            .collect()
    })?;
    let (table, rows) = energy_rows(ctx, "overlap", energies, &samples, Some(&|v| v == 0.0))?;
    Ok((table, to_value(&rows)?, None))
}

fn ao_prob(ctx: &Context, a: &AoArgs) -> Result<Dispatched, LabError> {
    let c = ctx.config();
    let taus = match &a.taus {
        Some(t) => parse_grid(t)?,
        None => vec![c.model.perturbation_strength],
    };
    let mut reports = Vec::with_capacity(taus.len());
    for &tau in &taus {
        let mut model = c.model.clone();
        model.perturbation_strength = tau;
        let tol = model.tolerances;
        let r = ao_probability(&model, a.energy, ctx.n(), c.overlap.zero_threshold, tol.kernel_tol, &ctx.exec)?;
        if ctx.strict && (r.degenerate > 0 || r.ambiguous > 0) {
            return Err(LabError::Strict(format!(
                "at tau {tau}: {} degenerate realizations, {} eigenvalues of T in the ambiguous kernel band",
                r.degenerate, r.ambiguous
            )));
        }
        reports.push(r);
    }
    let rows = reports.iter().map(|r| Row::from_estimate(r.tau, &r.mean_overlap)).collect();
    Ok((Table::new("mean-overlap", rows), to_value(&reports)?, None))
}

fn verify_identities(ctx: &Context, a: &IdentityArgs) -> Result<Dispatched, LabError> {
    let (t, d, seed, ex) = (a.trials, a.dim, ctx.identity_seed, &ctx.exec);
    let at_least_two = d.max(2);
    let reports: Vec<SuiteReport> = vec![
        projection_identity_suite(t, d, seed, ex)?,
        overlap_agreement_suite(t, at_least_two, seed, ex)?,
        overlap_hamiltonian_suite(t, at_least_two, seed, ex)?,
        quasi_norm_suite(t, d, seed, ex)?,
        shift_trace_suite(t, at_least_two, seed, ex)?,
    ];
    let rows = reports
        .iter()
        .enumerate()
        .map(|(k, r)| Row { abscissa: k as f64, mean: r.max_residual, stderr: 0.0, n: r.checks })
        .collect();
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.name).collect();
    let check = (!failed.is_empty()).then(|| LabError::Check(format!("suites with violations: {}", failed.join(", "))));
    Ok((Table::new("max-residual", rows), to_value(&reports)?, check))
}

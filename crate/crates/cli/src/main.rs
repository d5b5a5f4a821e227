use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use forge_core::analytic::{self, PairGate, QuadGate, SpectatorLayout};
use forge_core::scenarios::{
    self, Method, Outputs, Preset, Scenario, ScenarioConfig, StrengthMode, SweepAxis, SweepSpec,
};
use forge_core::{ForgeError, PLModel, PauliFidelities};
use serde::Serialize;

/// Pauli-Lindblad noise models from Lindbladian gate dynamics.
#[derive(Parser)]
#[command(name = "forge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and print its report as JSON.
    Synth(SynthArgs),
    /// Compare a perturbative noise channel with the exact one.
    Compare(CompareArgs),
    /// Sweep the gate angle or the noise strength.
    Sweep(SweepArgs),
    /// Perturbative convergence study under dense random noise.
    Converge(ConvergeArgs),
    /// Evaluate closed-form rates for a table or a built-in scenario.
    Tables(TablesArgs),
    /// Check a scenario file without running it.
    Validate { config: PathBuf },
    /// Print a built-in scenario as JSON, or list them.
    Preset { name: Option<String> },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Magnus,
    Dyson,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct SynthArgs {
    config: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    method: MethodArg,
    #[arg(long, default_value_t = 2)]
    order: usize,
    /// Include the full and noise superoperators.
    #[arg(long)]
    channel: bool,
    /// Include the noise channel's Pauli transfer matrix.
    #[arg(long)]
    ptm: bool,
    /// Include the per-mechanism closed-form breakdown.
    #[arg(long)]
    breakdown: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also write the fitted rates as CSV.
    #[arg(long)]
    pl_csv: Option<PathBuf>,
    /// Also write the Pauli fidelities as CSV.
    #[arg(long)]
    fidelities_csv: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    config: PathBuf,
    #[arg(long, value_enum, default_value = "magnus")]
    method: MethodArg,
    #[arg(long, default_value_t = 2)]
    order: usize,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_parser = parse_axis)]
    axis: SweepAxis,
    /// Scenario file; defaults to the `cx_full_noise` preset.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Comma-separated grid; defaults to 17 angles in [0, π] or a log grid of strengths.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_mode, default_value = "uniform")]
    mode: StrengthMode,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[arg(long, default_value_t = scenarios::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_delimiter = ',')]
    strengths: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableArg {
    AmplitudeDamping,
    Dephasing,
    Phase,
    Spectator,
    Adjacent,
    Idle,
    XRotation,
}

#[derive(Clone, Copy, ValueEnum)]
enum PairArg {
    Identity,
    Cz,
    Cx,
}

#[derive(Clone, Copy, ValueEnum)]
enum QuadArg {
    Identity,
    CzCz,
    CxCx,
    CxXc,
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    Control,
    Target,
}

#[derive(Args)]
struct TablesArgs {
    /// Table name, or a built-in scenario for its full breakdown.
    target: String,
    #[arg(long)]
    theta: f64,
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    #[arg(long, value_enum, default_value = "cx")]
    gate: PairArg,
    #[arg(long, value_enum, default_value = "cx-xc")]
    pair: QuadArg,
    #[arg(long, value_enum, default_value = "target")]
    layout: LayoutArg,
    /// Rate on the left (control) qubit.
    #[arg(long, default_value_t = 0.0)]
    left: f64,
    /// Rate on the right (target) qubit.
    #[arg(long, default_value_t = 0.0)]
    right: f64,
    #[arg(long, default_value_t = 0.0)]
    delta_iz: f64,
    #[arg(long, default_value_t = 0.0)]
    delta_zi: f64,
    #[arg(long, default_value_t = 0.0)]
    delta_zz: f64,
    /// Crosstalk rate.
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = 0.0)]
    beta_down: f64,
    #[arg(long, default_value_t = 0.0)]
    beta_phi: f64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse().map_err(|e: ForgeError| e.to_string())
}

fn parse_mode(s: &str) -> Result<StrengthMode, String> {
    s.parse().map_err(|e: ForgeError| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numerical = e.downcast_ref::<ForgeError>().is_some_and(ForgeError::is_numerical);
            ExitCode::from(if numerical { 3 } else { 2 })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Compare(a) => compare(a),
        Command::Sweep(a) => sweep(a),
        Command::Converge(a) => converge(a),
        Command::Tables(a) => tables(a),
        Command::Validate { config } => validate(&config),
        Command::Preset { name } => preset(name.as_deref()),
    }
}

fn load(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ScenarioConfig::from_json(&text)?)
}

fn emit(out: Option<&Path>, body: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, body).with_context(|| format!("writing {}", p.display()))?,
        None => io::stdout().lock().write_all(body)?,
    }
    Ok(())
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn method(m: MethodArg, order: usize) -> Method {
    match m {
        MethodArg::Exact => Method::Exact,
        MethodArg::Magnus => Method::Magnus { order },
        MethodArg::Dyson => Method::Dyson { order },
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let config = load(&a.config)?;
    let scenario = Scenario {
        config,
        method: method(a.method, a.order),
        outputs: Outputs { channel: a.channel, ptm: a.ptm, breakdown: a.breakdown },
    };
    let report = scenarios::run_scenario(&scenario)?;
    if let Some(p) = &a.pl_csv {
        report.pl.write_csv(fs::File::create(p)?)?;
    }
    if let Some(p) = &a.fidelities_csv {
        let mut values = vec![0.0; report.fidelities.len()];
        for (l, f) in &report.fidelities {
            values[l.index()] = *f;
        }
        PauliFidelities::new(report.gate.n_qubits, values)?.write_csv(fs::File::create(p)?)?;
    }
    emit(a.out.as_deref(), &json(&report)?)
}

#[derive(Serialize)]
struct Comparison {
    name: String,
    method: Method,
    grid_steps: Option<usize>,
    /// `‖N_approx − N_exact‖_F / ‖N_exact‖_F`.
    channel_distance: f64,
    max_lambda_deviation: f64,
    exact: PLModel,
    approximate: PLModel,
}

fn compare(a: CompareArgs) -> Result<()> {
    if matches!(a.method, MethodArg::Exact) {
        bail!("compare needs --method magnus or dyson");
    }
    let config = load(&a.config)?;
    let (gate, model) = config.build()?;
    let m = method(a.method, a.order);
    let (exact, _) = scenarios::noise_channel(&model, &gate, Method::Exact)?;
    let (approx, grid_steps) = scenarios::noise_channel(&model, &gate, m)?;
    let fit = |c| -> Result<PLModel> {
        let f = forge_core::twirl::pauli_fidelities(c)?;
        Ok(forge_core::twirl::fit_pl(&f, &forge_core::twirl::Support::Full, forge_core::twirl::PRUNE_TOL)?.model)
    };
    let (pe, pa) = (fit(&exact)?, fit(&approx)?);
    let out = Comparison {
        name: config.display_name(),
        method: m,
        grid_steps,
        channel_distance: forge_core::magnus::normalized_distance(&approx, &exact)?,
        max_lambda_deviation: pa.max_deviation(&pe),
        exact: pe,
        approximate: pa,
    };
    emit(a.out.as_deref(), &json(&out)?)
}

fn sweep(a: SweepArgs) -> Result<()> {
    let base = match (&a.config, &a.preset) {
        (Some(p), _) => load(p)?,
        (None, Some(name)) => name.parse::<Preset>()?.config(),
        (None, None) => Preset::CxFullNoise.config(),
    };
    let grid = a.grid.unwrap_or_else(|| match a.axis {
        SweepAxis::Theta => (0..=16).map(|k| k as f64 * std::f64::consts::PI / 16.0).collect(),
        SweepAxis::Strength => vec![0.0, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1],
    });
    let points = scenarios::run_sweep(&SweepSpec { axis: a.axis, grid, base, mode: a.mode })?;
    let body = match a.format {
        Format::Json => json(&points)?,
        Format::Csv => {
            let mut buf = Vec::new();
            scenarios::write_sweep_csv(&points, &mut buf)?;
            buf
        }
    };
    emit(a.out.as_deref(), &body)
}

fn converge(a: ConvergeArgs) -> Result<()> {
    let strengths = a.strengths.unwrap_or_else(|| scenarios::DEFAULT_STRENGTHS.to_vec());
    let table = scenarios::convergence_study(&strengths, a.seed)?;
    let body = match a.format {
        Format::Json => json(&table)?,
        Format::Csv => {
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            buf
        }
    };
    emit(a.out.as_deref(), &body)
}

#[derive(Serialize)]
struct TableOutput {
    table: String,
    theta: f64,
    omega: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    parts: Vec<scenarios::BreakdownPart>,
    model: PLModel,
}

fn tables(a: TablesArgs) -> Result<()> {
    let (t, w) = (a.theta, a.omega);
    let pair = match a.gate {
        PairArg::Identity => PairGate::Identity,
        PairArg::Cz => PairGate::Cz,
        PairArg::Cx => PairGate::Cx,
    };
    let mut out = TableOutput {
        table: a.target.clone(),
        theta: t,
        omega: w,
        weights: None,
        parts: Vec::new(),
        model: PLModel::empty(0),
    };
    if let Ok(p) = a.target.parse::<Preset>() {
        let config = p.config().with_theta(t);
        out.parts = scenarios::analytic_breakdown(&config)?;
        out.model = scenarios::analytic_model(&config)?;
    } else {
        let table = TableArg::from_str(&a.target, true).map_err(|_| {
            anyhow::Error::new(ForgeError::Config(format!("unknown table or scenario {:?}", a.target)))
        })?;
        out.model = match table {
            TableArg::AmplitudeDamping => analytic::ad_lambdas(pair, t, a.left, a.right, w)?,
            TableArg::Dephasing => analytic::pd_lambdas(pair, t, a.left, a.right, w)?,
            TableArg::Phase => analytic::phase_lambdas(pair, t, a.delta_iz, a.delta_zi, a.delta_zz, w)?,
            TableArg::Spectator => {
                let layout = match a.layout {
                    LayoutArg::Control => SpectatorLayout::Control,
                    LayoutArg::Target => SpectatorLayout::Target,
                };
                analytic::xtalk3_lambdas(layout, pair, t, a.delta, w)?
            }
            TableArg::Adjacent => {
                let quad = match a.pair {
                    QuadArg::Identity => QuadGate::Identity,
                    QuadArg::CzCz => QuadGate::CzCz,
                    QuadArg::CxCx => QuadGate::CxCx,
                    QuadArg::CxXc => QuadGate::CxXc,
                };
                analytic::xtalk4_lambdas(quad, t, a.delta, w)?
            }
            TableArg::Idle => {
                let ch = analytic::identity_ad_pd(a.beta_down, a.beta_phi, t / w)?;
                out.weights = Some(ch.probabilities.to_vec());
                ch.model
            }
            TableArg::XRotation => {
                let ch = analytic::xtheta_ad_pd(t, a.beta_down, a.beta_phi, w)?;
                out.weights = Some(ch.w.to_vec());
                ch.model
            }
        };
    }
    let body = match a.format {
        Format::Json => json(&out)?,
        Format::Csv => {
            let mut buf = Vec::new();
            out.model.write_csv(&mut buf)?;
            buf
        }
    };
    emit(None, &body)
}

#[derive(Serialize)]
struct Validation {
    name: String,
    n_qubits: usize,
    theta: f64,
    tau: f64,
    mechanisms: usize,
    config_hash: String,
}

fn validate(path: &Path) -> Result<()> {
    let config = load(path)?;
    let (gate, _) = config.build()?;
    let v = Validation {
        name: config.display_name(),
        n_qubits: config.n_qubits,
        theta: gate.theta(),
        tau: gate.tau(),
        mechanisms: config.noise.len(),
        config_hash: config.hash(),
    };
    emit(None, &json(&v)?)
}

fn preset(name: Option<&str>) -> Result<()> {
    match name {
        None => {
            let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
            emit(None, format!("{}\n", names.join("\n")).as_bytes())
        }
        Some(n) => {
            let config = n.parse::<Preset>()?.config();
            emit(None, format!("{}\n", config.to_json()?).as_bytes())
        }
    }
}

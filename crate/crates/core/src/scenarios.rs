//! Scenario configuration, single runs with analytic breakdowns, parameter
//! sweeps and the perturbative convergence study.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytic::{self, PairGate, QuadGate, SpectatorLayout};
use crate::error::{Context, ForgeError, Result};
use crate::frame::{exact_noise, FramePosition, FramedLindbladian, IntegrationOptions};
use crate::limits;
use crate::magnus::{self, MagnusOptions};
use crate::model::{
    phase_noise_hamiltonian, DissipatorMatrix, GateElement, GateKind, GatePreset, LindbladModel,
};
use crate::pauli::{PauliIndexSet, PauliString};
use crate::superop::{CMatrix, SuperOpJson, SuperOperator};
use crate::twirl::{self, PLModel, Support, PRUNE_TOL};

/// Rates below this magnitude are not listed as significant in reports.
pub const DISPLAY_THRESHOLD: f64 = 1e-5;
/// Distances below this are treated as equal when comparing orders.
pub const CONVERGENCE_FLOOR: f64 = 1e-15;
/// Strength grid of the default convergence study.
pub const DEFAULT_STRENGTHS: [f64; 7] = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1];
/// Seed of the default convergence study.
pub const DEFAULT_SEED: u64 = 7;

fn default_omega() -> f64 {
    1.0
}

/// Gate preset with either `theta` or `tau`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateConfig {
    pub preset: GateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default = "default_omega")]
    pub omega: f64,
}

/// One noise source. Rates are absolute, in the units of the gate's `omega`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mechanism {
    /// `rate · D[σ⁻]` on `qubit`.
    AmplitudeDamping { qubit: usize, rate: f64 },
    /// `(rate/2) · D[Z]` on `qubit`.
    PureDephasing { qubit: usize, rate: f64 },
    /// Hamiltonian term `(delta/2) · label`.
    Coherent { label: PauliString, delta: f64 },
    /// Seeded random dense dissipator with largest eigenvalue `strength · omega`.
    Dense {
        strength: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// Explicit dissipator matrix over `labels`, entries as `[re, im]`.
    Dissipator { labels: Vec<PauliString>, beta: Vec<Vec<[f64; 2]>> },
}

impl Mechanism {
    /// Largest rate magnitude relative to `omega`.
    fn strength(&self, omega: f64) -> f64 {
        match self {
            Mechanism::AmplitudeDamping { rate, .. } | Mechanism::PureDephasing { rate, .. } => {
                rate.abs() / omega
            }
            Mechanism::Coherent { delta, .. } => delta.abs() / omega,
            Mechanism::Dense { strength, .. } => *strength,
            Mechanism::Dissipator { beta, .. } => {
                beta.iter().flatten().map(|[re, im]| re.hypot(*im)).fold(0.0, f64::max) / omega
            }
        }
    }

    fn scaled(&self, s: f64) -> Mechanism {
        match self.clone() {
            Mechanism::AmplitudeDamping { qubit, rate } => Mechanism::AmplitudeDamping { qubit, rate: rate * s },
            Mechanism::PureDephasing { qubit, rate } => Mechanism::PureDephasing { qubit, rate: rate * s },
            Mechanism::Coherent { label, delta } => Mechanism::Coherent { label, delta: delta * s },
            Mechanism::Dense { strength, seed } => Mechanism::Dense { strength: strength * s, seed },
            Mechanism::Dissipator { labels, beta } => Mechanism::Dissipator {
                labels,
                beta: beta
                    .into_iter()
                    .map(|row| row.into_iter().map(|[re, im]| [re * s, im * s]).collect())
                    .collect(),
            },
        }
    }

    fn dissipator(&self, n: usize, omega: f64, seed: u64) -> Result<Option<DissipatorMatrix>> {
        Ok(match self {
            Mechanism::AmplitudeDamping { qubit, rate } => {
                Some(DissipatorMatrix::amplitude_damping(n, *qubit, *rate)?)
            }
            Mechanism::PureDephasing { qubit, rate } => Some(DissipatorMatrix::pure_dephasing(n, *qubit, *rate)?),
            Mechanism::Coherent { .. } => None,
            Mechanism::Dense { strength, seed: own } => {
                Some(DissipatorMatrix::random_dense(n, *strength, omega, own.unwrap_or(seed))?)
            }
            Mechanism::Dissipator { labels, beta } => {
                let index = PauliIndexSet::new(n, labels.clone())?;
                let m = index.len();
                if beta.len() != m || beta.iter().any(|r| r.len() != m) {
                    return Err(ForgeError::Dimension(format!("dissipator matrix is not {m}x{m}")));
                }
                let beta = CMatrix::from_fn(m, m, |r, c| Complex64::new(beta[r][c][0], beta[r][c][1]));
                Some(DissipatorMatrix::new(index, beta)?)
            }
        })
    }
}

/// A gate with its noise sources.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n_qubits: usize,
    pub gate: GateConfig,
    #[serde(default)]
    pub noise: Vec<Mechanism>,
    /// Seed for dense mechanisms without their own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ScenarioConfig = serde_json::from_str(text)?;
        config.gate_preset()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| format!("{}_{}q", self.gate.preset, self.n_qubits))
    }

    /// SHA-256 of the compact JSON encoding, as hex.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn gate_preset(&self) -> Result<GatePreset> {
        limits::check_qubits(self.n_qubits)?;
        let g = &self.gate;
        match (g.theta, g.tau) {
            (Some(theta), None) => GatePreset::from_theta(g.preset, self.n_qubits, theta, g.omega),
            (None, Some(tau)) => GatePreset::new(g.preset, self.n_qubits, g.omega, tau),
            _ => Err(ForgeError::Config("gate needs exactly one of theta and tau".into())),
        }
    }

    pub fn build(&self) -> Result<(GatePreset, LindbladModel)> {
        let gate = self.gate_preset()?;
        let n = self.n_qubits;
        let seed = self.seed.unwrap_or(DEFAULT_SEED);
        let mut dissipator = DissipatorMatrix::empty(n);
        let mut coherent = Vec::new();
        for m in &self.noise {
            if let Mechanism::Coherent { label, delta } = m {
                if label.n_qubits() != n {
                    return Err(ForgeError::QubitMismatch { expected: n, found: label.n_qubits() });
                }
                coherent.push((*label, *delta));
            } else if let Some(d) = m.dissipator(n, gate.omega(), seed)? {
                dissipator = dissipator.sum(&d)?;
            }
        }
        let model = LindbladModel::for_gate(&gate)
            .with_noise(phase_noise_hamiltonian(&coherent)?)?
            .with_dissipator(dissipator)?;
        Ok((gate, model))
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        let mut c = self.clone();
        c.gate.theta = Some(theta);
        c.gate.tau = None;
        c
    }

    /// Largest rate relative to `omega` over all mechanisms.
    pub fn strength(&self) -> f64 {
        self.noise.iter().map(|m| m.strength(self.gate.omega)).fold(0.0, f64::max)
    }

    /// Rescales every mechanism by the same factor so that the largest has `strength`.
    pub fn with_strength(&self, strength: f64) -> Result<Self> {
        let current = self.strength();
        if current == 0.0 {
            return Err(ForgeError::Config("cannot rescale a noiseless scenario".into()));
        }
        let mut c = self.clone();
        c.noise = self.noise.iter().map(|m| m.scaled(strength / current)).collect();
        Ok(c)
    }

    /// Sets every amplitude-damping rate to `strength · omega`.
    pub fn with_damping_strength(&self, strength: f64) -> Result<Self> {
        let rate = strength * self.gate.omega;
        let mut c = self.clone();
        let mut found = false;
        for m in &mut c.noise {
            if let Mechanism::AmplitudeDamping { rate: r, .. } = m {
                *r = rate;
                found = true;
            }
        }
        if !found {
            return Err(ForgeError::Config("scenario has no amplitude damping to rescale".into()));
        }
        Ok(c)
    }
}

/// How the noise channel is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Exact,
    Magnus { order: usize },
    Dyson { order: usize },
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Exact => f.write_str("exact"),
            Method::Magnus { order } => write!(f, "magnus{order}"),
            Method::Dyson { order } => write!(f, "dyson{order}"),
        }
    }
}

/// Optional report sections; fidelities and the fitted model are always included.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outputs {
    pub channel: bool,
    pub ptm: bool,
    pub breakdown: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub method: Method,
    pub outputs: Outputs,
}

impl Scenario {
    pub fn exact(config: ScenarioConfig) -> Self {
        Scenario { config, method: Method::Exact, outputs: Outputs::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: Option<u64>,
    pub method: Method,
    /// Grid size of the Magnus integrals, when used.
    pub grid_steps: Option<usize>,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSummary {
    pub preset: GateKind,
    pub n_qubits: usize,
    pub theta: f64,
    pub omega: f64,
    pub tau: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakdownPart {
    pub mechanism: String,
    pub model: PLModel,
}

/// Per-mechanism closed-form rates and their sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub parts: Vec<BreakdownPart>,
    pub total: PLModel,
    /// Largest `|λ_numerical − λ_total|` over all Paulis.
    pub additivity_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub provenance: Provenance,
    pub gate: GateSummary,
    /// Full gate channel `exp(L τ_g)` (or its approximation).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<SuperOpJson>,
    /// Noise channel `N` with `exp(L τ_g) = U_g · N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_channel: Option<SuperOpJson>,
    /// PTM of the noise channel, rows in canonical Pauli order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ptm: Option<Vec<Vec<f64>>>,
    pub fidelities: BTreeMap<PauliString, f64>,
    pub pl: PLModel,
    pub fit_residual: f64,
    /// Paulis with `|λ| > DISPLAY_THRESHOLD`.
    pub significant: Vec<PauliString>,
    pub process_fidelity: f64,
    pub average_gate_fidelity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<Breakdown>,
}

/// Noise channel of `model` at the left position, with the Magnus grid size if used.
pub fn noise_channel(
    model: &LindbladModel,
    gate: &GatePreset,
    method: Method,
) -> Result<(SuperOperator, Option<usize>)> {
    match method {
        Method::Exact => Ok((exact_noise(model, gate, FramePosition::Left, IntegrationOptions::default())?, None)),
        Method::Magnus { order } | Method::Dyson { order } => {
            let frame = FramedLindbladian::new(model, gate, 0.0)?;
            let terms = magnus::magnus(&frame, order, MagnusOptions::default())?;
            let channel = match method {
                Method::Magnus { .. } => magnus::magnus_channel(&terms, order)?,
                _ => magnus::dyson_channel(&terms, order)?,
            };
            Ok((channel, Some(terms.grid_steps())))
        }
    }
}

pub fn run_scenario(s: &Scenario) -> Result<ScenarioReport> {
    let name = s.config.display_name();
    run_inner(s, &name).context(|| format!("scenario {name}"))
}

fn run_inner(s: &Scenario, name: &str) -> Result<ScenarioReport> {
    let (gate, model) = s.config.build()?;
    let (noise, grid_steps) = noise_channel(&model, &gate, s.method)?;
    let fidelities = twirl::pauli_fidelities(&noise)?;
    let fit = twirl::fit_pl(&fidelities, &Support::Full, PRUNE_TOL)?;
    let pl = fit.model;
    let breakdown = if s.outputs.breakdown {
        let parts = analytic_breakdown(&s.config)?;
        let models: Vec<PLModel> = parts.iter().map(|p| p.model.clone()).collect();
        let total = analytic::aggregate(gate.n_qubits(), &models)?;
        let additivity_defect = pl.max_deviation(&total);
        Some(Breakdown { parts, total, additivity_defect })
    } else {
        None
    };
    let channel = s.outputs.channel.then(|| {
        FramedLindbladian::new(&model, &gate, 0.0).and_then(|f| f.gate_superop(gate.tau()).compose(&noise))
    });
    let channel = channel.transpose()?;
    let ptm = if s.outputs.ptm {
        let m = noise.to_ptm()?;
        Some(m.matrix().row_iter().map(|r| r.iter().copied().collect()).collect())
    } else {
        None
    };
    let mut significant = pl.support(DISPLAY_THRESHOLD);
    significant.sort();
    Ok(ScenarioReport {
        name: name.to_string(),
        provenance: Provenance {
            config_hash: s.config.hash(),
            seed: s.config.seed,
            method: s.method,
            grid_steps,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        gate: GateSummary {
            preset: gate.kind(),
            n_qubits: gate.n_qubits(),
            theta: gate.theta(),
            omega: gate.omega(),
            tau: gate.tau(),
        },
        channel: channel.map(|c| c.to_json()),
        noise_channel: s.outputs.channel.then(|| noise.to_json()),
        ptm,
        fidelities: twirl_map(&fidelities),
        pl: pl.clone(),
        fit_residual: fit.residual,
        significant,
        process_fidelity: pl.process_fidelity(),
        average_gate_fidelity: twirl::average_gate_fidelity(&pl),
        breakdown,
    })
}

fn twirl_map(f: &twirl::PauliFidelities) -> BTreeMap<PauliString, f64> {
    crate::pauli::all_paulis(f.n_qubits()).map(|p| (p, f.get(&p))).collect()
}

/// Role of a qubit in the gate layout.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Role {
    Idle,
    /// Member of element `elem`, at position 0 (control / first) or 1.
    Pair { elem: usize, pos: usize },
    XRot,
}

struct Layout {
    elements: Vec<GateElement>,
    roles: Vec<Role>,
    theta: f64,
    omega: f64,
    tau: f64,
    n: usize,
    terms: Vec<PauliString>,
}

impl Layout {
    fn new(gate: &GatePreset) -> Self {
        let elements = gate.kind().elements();
        let mut roles = vec![Role::Idle; gate.n_qubits()];
        for (i, e) in elements.iter().enumerate() {
            match *e {
                GateElement::Cx { control, target } => {
                    roles[control] = Role::Pair { elem: i, pos: 0 };
                    roles[target] = Role::Pair { elem: i, pos: 1 };
                }
                GateElement::Cz { a, b } => {
                    roles[a] = Role::Pair { elem: i, pos: 0 };
                    roles[b] = Role::Pair { elem: i, pos: 1 };
                }
                GateElement::X { q } => roles[q] = Role::XRot,
            }
        }
        Layout {
            elements,
            roles,
            theta: gate.theta(),
            omega: gate.omega(),
            tau: gate.tau(),
            n: gate.n_qubits(),
            terms: gate.hamiltonian_terms().into_keys().collect(),
        }
    }

    fn pair(&self, elem: usize) -> (PairGate, [usize; 2]) {
        match self.elements[elem] {
            GateElement::Cx { control, target } => (PairGate::Cx, [control, target]),
            GateElement::Cz { a, b } => (PairGate::Cz, [a, b]),
            GateElement::X { .. } => unreachable!("X rotations are not pairs"),
        }
    }

    fn is_cx_target(&self, q: usize) -> Option<usize> {
        match self.roles[q] {
            Role::Pair { elem, pos: 1 } if matches!(self.elements[elem], GateElement::Cx { .. }) => Some(elem),
            _ => None,
        }
    }

    fn commutes_with_gate(&self, p: &PauliString) -> bool {
        self.terms.iter().all(|t| t.commutes(p))
    }

    fn embed(&self, model: &PLModel, targets: &[usize]) -> Result<PLModel> {
        analytic::embed(model, self.n, targets)
    }

    /// Damping (`dephasing = false`) or dephasing on one qubit.
    fn dissipative(&self, q: usize, rate: f64, dephasing: bool) -> Result<PLModel> {
        if q >= self.n {
            return Err(ForgeError::Layout(format!("qubit {q} out of range for {} qubits", self.n)));
        }
        let (ad, pd) = if dephasing { (0.0, rate) } else { (rate, 0.0) };
        match self.roles[q] {
            Role::Idle => self.embed(&analytic::identity_ad_pd(ad, pd, self.tau)?.model, &[q]),
            Role::XRot => self.embed(&analytic::xtheta_ad_pd(self.theta, ad, pd, self.omega)?.model, &[q]),
            Role::Pair { elem, pos } => {
                let (g, qs) = self.pair(elem);
                let (l, r) = if pos == 0 { (rate, 0.0) } else { (0.0, rate) };
                let m = if dephasing {
                    analytic::pd_lambdas(g, self.theta, l, r, self.omega)?
                } else {
                    analytic::ad_lambdas(g, self.theta, l, r, self.omega)?
                };
                self.embed(&m, &qs)
            }
        }
    }
}

fn single_rate(p: PauliString, v: f64) -> Result<PLModel> {
    PLModel::new(p.n_qubits(), BTreeMap::from([(p, v)]))
}

fn is_z_type(p: &PauliString) -> bool {
    p.x_mask() == 0
}

/// Closed-form rates for each mechanism of `config`.
///
/// Coherent terms inside one two-qubit gate are grouped, since their rates
/// interfere. Fails for mechanisms without a closed form.
pub fn analytic_breakdown(config: &ScenarioConfig) -> Result<Vec<BreakdownPart>> {
    let gate = config.gate_preset()?;
    let layout = Layout::new(&gate);
    let mut parts = Vec::new();
    let mut coherent = Vec::new();
    for m in &config.noise {
        match m {
            Mechanism::AmplitudeDamping { qubit, rate } => parts.push(BreakdownPart {
                mechanism: format!("amplitude_damping q{qubit}"),
                model: layout.dissipative(*qubit, *rate, false)?,
            }),
            Mechanism::PureDephasing { qubit, rate } => parts.push(BreakdownPart {
                mechanism: format!("pure_dephasing q{qubit}"),
                model: layout.dissipative(*qubit, *rate, true)?,
            }),
            Mechanism::Coherent { label, delta } => coherent.push((*label, *delta)),
            Mechanism::Dense { .. } | Mechanism::Dissipator { .. } => {
                return Err(ForgeError::Unsupported(
                    "no closed-form breakdown for general dissipators".into(),
                ))
            }
        }
    }

    // δ per element in the order (iz, zi, zz) of the phase table
    let mut grouped: BTreeMap<usize, [f64; 3]> = BTreeMap::new();
    for (p, half) in phase_noise_hamiltonian(&coherent)? {
        let delta = 2.0 * half;
        if layout.commutes_with_gate(&p) {
            let v = delta * delta * layout.tau * layout.tau / 4.0;
            parts.push(BreakdownPart { mechanism: format!("coherent {p}"), model: single_rate(p, v)? });
            continue;
        }
        let support = p.support();
        if !is_z_type(&p) || support.len() > 2 {
            return Err(ForgeError::Unsupported(format!("no closed form for coherent term {p} under {}", gate.kind())));
        }
        let roles: Vec<Role> = support.iter().map(|&q| layout.roles[q]).collect();
        match roles.as_slice() {
            [Role::Pair { elem, pos }] => {
                grouped.entry(*elem).or_default()[if *pos == 1 { 0 } else { 1 }] += delta;
            }
            [Role::Pair { elem: e1, .. }, Role::Pair { elem: e2, .. }] if e1 == e2 => {
                grouped.entry(*e1).or_default()[2] += delta;
            }
            _ => {
                let (a, b) = (support[0], support[1]);
                let model = match (layout.is_cx_target(a), layout.is_cx_target(b)) {
                    (Some(e1), Some(e2)) => {
                        let (_, [c1, t1]) = layout.pair(e1);
                        let (_, [c2, t2]) = layout.pair(e2);
                        let m = analytic::xtalk4_lambdas(QuadGate::CxXc, layout.theta, delta, layout.omega)?;
                        layout.embed(&m, &[c1, t1, t2, c2])?
                    }
                    (Some(e), None) | (None, Some(e)) => {
                        let (_, [c, t]) = layout.pair(e);
                        let s = if t == a { b } else { a };
                        if layout.roles[s] == Role::XRot {
                            return Err(ForgeError::Unsupported(format!("no closed form for coherent term {p}")));
                        }
                        let m = analytic::xtalk3_lambdas(
                            SpectatorLayout::Target,
                            PairGate::Cx,
                            layout.theta,
                            delta,
                            layout.omega,
                        )?;
                        layout.embed(&m, &[c, t, s])?
                    }
                    (None, None) => {
                        return Err(ForgeError::Unsupported(format!("no closed form for coherent term {p}")))
                    }
                };
                parts.push(BreakdownPart { mechanism: format!("crosstalk {p}"), model });
            }
        }
    }
    for (elem, [iz, zi, zz]) in grouped {
        let (g, qs) = layout.pair(elem);
        let m = analytic::phase_lambdas(g, layout.theta, iz, zi, zz, layout.omega)?;
        parts.push(BreakdownPart {
            mechanism: format!("coherent {}({},{})", pair_name(g), qs[0], qs[1]),
            model: layout.embed(&m, &qs)?,
        });
    }
    Ok(parts)
}

fn pair_name(g: PairGate) -> &'static str {
    match g {
        PairGate::Identity => "identity",
        PairGate::Cz => "cz",
        PairGate::Cx => "cx",
    }
}

/// Sum of the closed-form rates of every mechanism.
pub fn analytic_model(config: &ScenarioConfig) -> Result<PLModel> {
    let parts: Vec<PLModel> = analytic_breakdown(config)?.into_iter().map(|p| p.model).collect();
    analytic::aggregate(config.n_qubits, &parts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Theta,
    Strength,
}

impl FromStr for SweepAxis {
    type Err = ForgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta" => Ok(SweepAxis::Theta),
            "strength" => Ok(SweepAxis::Strength),
            _ => Err(ForgeError::Config(format!("unknown sweep axis {s:?}"))),
        }
    }
}

/// What a strength sweep varies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrengthMode {
    /// Every rate scaled together; the strength is the largest rate over `omega`.
    #[default]
    Uniform,
    /// Only amplitude-damping rates, set to `strength · omega`.
    AmplitudeDamping,
}

impl FromStr for StrengthMode {
    type Err = ForgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(StrengthMode::Uniform),
            "amplitude_damping" | "amplitude-damping" => Ok(StrengthMode::AmplitudeDamping),
            _ => Err(ForgeError::Config(format!("unknown strength mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub base: ScenarioConfig,
    pub mode: StrengthMode,
}

/// Numerical and closed-form rates at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub x: f64,
    pub numerical: PLModel,
    pub analytic: PLModel,
}

impl SweepPoint {
    /// Largest `|λ_numerical − λ_analytic|`.
    pub fn max_deviation(&self) -> f64 {
        self.numerical.max_deviation(&self.analytic)
    }

    /// `(label, numerical, analytic)` for every Pauli with a rate in either model.
    pub fn rows(&self) -> Vec<(PauliString, f64, f64)> {
        let labels: BTreeSet<PauliString> =
            self.numerical.lambdas.keys().chain(self.analytic.lambdas.keys()).copied().collect();
        labels.into_iter().map(|p| (p, self.numerical.get(&p), self.analytic.get(&p))).collect()
    }
}

fn check_grid(grid: &[f64], lo: f64, hi: f64, what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(ForgeError::Config(format!("empty {what} grid")));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(ForgeError::Config(format!("{what} grid must be strictly increasing")));
    }
    if grid.iter().any(|x| !(lo..=hi).contains(x)) {
        return Err(ForgeError::Config(format!("{what} grid must lie in [{lo}, {hi}]")));
    }
    Ok(())
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepPoint>> {
    let configs: Vec<ScenarioConfig> = match spec.axis {
        SweepAxis::Theta => {
            check_grid(&spec.grid, 0.0, std::f64::consts::PI, "theta")?;
            spec.grid.iter().map(|&t| spec.base.with_theta(t)).collect()
        }
        SweepAxis::Strength => {
            check_grid(&spec.grid, 0.0, 0.1, "strength")?;
            spec.grid
                .iter()
                .map(|&s| match spec.mode {
                    StrengthMode::Uniform => spec.base.with_strength(s),
                    StrengthMode::AmplitudeDamping => spec.base.with_damping_strength(s),
                })
                .collect::<Result<_>>()?
        }
    };
    configs
        .par_iter()
        .zip(spec.grid.par_iter())
        .map(|(c, &x)| {
            let analytic = analytic_model(c)?;
            let report = run_scenario(&Scenario::exact(c.clone()))?;
            Ok(SweepPoint { x, numerical: report.pl, analytic })
        })
        .collect()
}

pub fn angle_sweep(base: &ScenarioConfig, grid: &[f64]) -> Result<Vec<SweepPoint>> {
    run_sweep(&SweepSpec { axis: SweepAxis::Theta, grid: grid.to_vec(), base: base.clone(), mode: StrengthMode::Uniform })
}

pub fn precision_sweep(base: &ScenarioConfig, grid: &[f64], mode: StrengthMode) -> Result<Vec<SweepPoint>> {
    run_sweep(&SweepSpec { axis: SweepAxis::Strength, grid: grid.to_vec(), base: base.clone(), mode })
}

/// Writes `x,label,numerical,analytic,deviation` rows.
pub fn write_sweep_csv<W: std::io::Write>(points: &[SweepPoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "label", "numerical", "analytic", "deviation"])?;
    for pt in points {
        for (p, num, an) in pt.rows() {
            out.write_record([
                pt.x.to_string(),
                p.label(),
                num.to_string(),
                an.to_string(),
                (num - an).abs().to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expansion {
    Magnus,
    Dyson,
}

impl fmt::Display for Expansion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Expansion::Magnus => "magnus",
            Expansion::Dyson => "dyson",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub strength: f64,
    pub method: Expansion,
    pub order: usize,
    /// `‖N_approx − N_exact‖_F / ‖N_exact‖_F`.
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub seed: u64,
    pub rows: Vec<ConvergenceRow>,
    /// Magnus grid size per strength.
    pub grid_steps: Vec<(f64, usize)>,
}

impl ConvergenceTable {
    pub fn distance(&self, strength: f64, method: Expansion, order: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.strength == strength && r.method == method && r.order == order)
            .map(|r| r.distance)
    }

    fn strengths(&self) -> Vec<f64> {
        self.grid_steps.iter().map(|(s, _)| *s).collect()
    }

    fn floored(&self, s: f64, m: Expansion, k: usize) -> f64 {
        self.distance(s, m, k).unwrap_or(f64::NAN).max(CONVERGENCE_FLOOR)
    }

    /// Distances do not grow with order for every strength up to `max_strength`.
    pub fn monotone_up_to(&self, max_strength: f64) -> bool {
        self.strengths().into_iter().filter(|s| *s <= max_strength).all(|s| {
            [Expansion::Magnus, Expansion::Dyson]
                .into_iter()
                .all(|m| (1..4).all(|k| self.floored(s, m, k + 1) <= self.floored(s, m, k)))
        })
    }

    /// Magnus is at least as close as Dyson at every order up to `max_strength`.
    pub fn magnus_dominates_up_to(&self, max_strength: f64) -> bool {
        self.strengths().into_iter().filter(|s| *s <= max_strength).all(|s| {
            (1..=4).all(|k| self.floored(s, Expansion::Magnus, k) <= self.floored(s, Expansion::Dyson, k))
        })
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["strength", "method", "order", "distance"])?;
        for r in &self.rows {
            out.write_record([r.strength.to_string(), r.method.to_string(), r.order.to_string(), r.distance.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// The dense-noise scenario of the convergence study.
pub fn convergence_config(strength: f64, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        name: Some("cx_dense".into()),
        n_qubits: 2,
        gate: GateConfig { preset: GateKind::Cx, theta: Some(std::f64::consts::FRAC_PI_2), tau: None, omega: 1.0 },
        noise: vec![Mechanism::Dense { strength, seed: Some(seed) }],
        seed: Some(seed),
    }
}

/// Distance of Magnus and Dyson channels of orders 1–4 from the exact noise
/// channel of CX(π/2) under seeded dense noise, for each strength.
pub fn convergence_study(strengths: &[f64], seed: u64) -> Result<ConvergenceTable> {
    if strengths.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(ForgeError::Config("strengths must be positive".into()));
    }
    let per_strength: Vec<(Vec<ConvergenceRow>, usize)> = strengths
        .par_iter()
        .map(|&s| {
            let (gate, model) = convergence_config(s, seed).build()?;
            let exact = exact_noise(&model, &gate, FramePosition::Left, IntegrationOptions::default())?;
            let frame = FramedLindbladian::new(&model, &gate, 0.0)?;
            let terms = magnus::magnus(&frame, 4, MagnusOptions::default())
                .context(|| format!("convergence study at strength {s}"))?;
            let mut rows = Vec::new();
            for method in [Expansion::Magnus, Expansion::Dyson] {
                for order in 1..=4 {
                    let approx = match method {
                        Expansion::Magnus => magnus::magnus_channel(&terms, order)?,
                        Expansion::Dyson => magnus::dyson_channel(&terms, order)?,
                    };
                    let distance = magnus::normalized_distance(&approx, &exact)?;
                    rows.push(ConvergenceRow { strength: s, method, order, distance });
                }
            }
            Ok((rows, terms.grid_steps()))
        })
        .collect::<Result<_>>()?;
    let grid_steps = strengths.iter().zip(&per_strength).map(|(s, (_, g))| (*s, *g)).collect();
    let rows = per_strength.into_iter().flat_map(|(r, _)| r).collect();
    Ok(ConvergenceTable { seed, rows, grid_steps })
}

/// Built-in scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// CZ(π/4) with damping, dephasing and phase noise on both qubits.
    CzFullNoise,
    /// CX(π/4) with damping, dephasing and phase noise on both qubits.
    CxFullNoise,
    /// CX(π/4) ⊗ I with a spectator coupled to the target.
    CxSpectator,
    /// CX(π/4) ⊗ XC(π/4) with crosstalk between the two targets. The noise
    /// parameters mirror the three-qubit case about the middle of the chain.
    CxXcCrosstalk,
    /// CX(π/2) under dense random noise of strength 1e-3.
    CxDense,
}

impl Preset {
    pub const ALL: [Preset; 5] =
        [Preset::CzFullNoise, Preset::CxFullNoise, Preset::CxSpectator, Preset::CxXcCrosstalk, Preset::CxDense];

    pub fn name(self) -> &'static str {
        match self {
            Preset::CzFullNoise => "cz_full_noise",
            Preset::CxFullNoise => "cx_full_noise",
            Preset::CxSpectator => "cx_spectator",
            Preset::CxXcCrosstalk => "cx_xc_crosstalk",
            Preset::CxDense => "cx_dense",
        }
    }

    pub fn config(self) -> ScenarioConfig {
        let quarter = std::f64::consts::FRAC_PI_4;
        let (kind, n, ad, pd, coherent): (GateKind, usize, &[f64], &[f64], &[(&str, f64)]) = match self {
            Preset::CzFullNoise | Preset::CxFullNoise => (
                if self == Preset::CzFullNoise { GateKind::Cz } else { GateKind::Cx },
                2,
                &[0.012, 0.010],
                &[0.011, 0.013],
                &[("iz", 0.025), ("zi", 0.023), ("zz", 0.032)],
            ),
            Preset::CxSpectator => (
                GateKind::CxI,
                3,
                &[0.012, 0.010, 0.011],
                &[0.011, 0.013, 0.014],
                &[("izi", 0.052), ("zii", 0.071), ("zzi", 0.085), ("izz", 0.12)],
            ),
            Preset::CxXcCrosstalk => (
                GateKind::CxXc,
                4,
                &[0.012, 0.010, 0.010, 0.012],
                &[0.011, 0.013, 0.013, 0.011],
                &[
                    ("ziii", 0.071),
                    ("iiiz", 0.071),
                    ("izii", 0.052),
                    ("iizi", 0.052),
                    ("zzii", 0.085),
                    ("iizz", 0.085),
                    ("izzi", 0.12),
                ],
            ),
            Preset::CxDense => {
                let mut c = convergence_config(1e-3, DEFAULT_SEED);
                c.name = Some(self.name().into());
                return c;
            }
        };
        let mut noise = Vec::new();
        for (q, &rate) in ad.iter().enumerate() {
            noise.push(Mechanism::AmplitudeDamping { qubit: q, rate });
        }
        for (q, &rate) in pd.iter().enumerate() {
            noise.push(Mechanism::PureDephasing { qubit: q, rate });
        }
        for &(label, delta) in coherent {
            noise.push(Mechanism::Coherent { label: PauliString::from_label(label).expect("valid"), delta });
        }
        ScenarioConfig {
            name: Some(self.name().into()),
            n_qubits: n,
            gate: GateConfig { preset: kind, theta: Some(quarter), tau: None, omega: 1.0 },
            noise,
            seed: None,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = ForgeError;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| ForgeError::Config(format!("unknown preset {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cx_config() -> ScenarioConfig {
        Preset::CxFullNoise.config()
    }

    #[test]
    fn config_json_roundtrip() {
        let c = Preset::CxSpectator.config();
        let back = ScenarioConfig::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn config_rejects_unknown_fields_and_ambiguous_gate() {
        let bad = r#"{"n_qubits":2,"gate":{"preset":"cx","theta":1.0},"noise":[],"extra":1}"#;
        assert!(ScenarioConfig::from_json(bad).is_err());
        let both = r#"{"n_qubits":2,"gate":{"preset":"cx","theta":1.0,"tau":1.0}}"#;
        assert!(ScenarioConfig::from_json(both).is_err());
        let ok = r#"{"n_qubits":2,"gate":{"preset":"cx","tau":0.5,"omega":2.0},
            "noise":[{"type":"amplitude_damping","qubit":1,"rate":0.001},
                     {"type":"coherent","label":"zz","delta":0.01}]}"#;
        let c = ScenarioConfig::from_json(ok).unwrap();
        assert!((c.gate_preset().unwrap().theta() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_noise_gives_empty_model() {
        let mut c = cx_config();
        c.noise.clear();
        let r = run_scenario(&Scenario::exact(c)).unwrap();
        assert!(r.pl.lambdas.is_empty());
        assert!(r.fidelities.values().all(|f| (f - 1.0).abs() < 1e-12));
    }

    #[test]
    fn cx_breakdown_is_additive() {
        let s = Scenario { config: cx_config(), method: Method::Exact, outputs: Outputs { breakdown: true, ..Default::default() } };
        let r = run_scenario(&s).unwrap();
        let b = r.breakdown.unwrap();
        assert!(b.additivity_defect < 1e-4, "{}", b.additivity_defect);
    }

    #[test]
    fn reports_are_deterministic() {
        let s = Scenario { config: cx_config(), method: Method::Magnus { order: 2 }, outputs: Outputs::default() };
        let a = serde_json::to_string(&run_scenario(&s).unwrap()).unwrap();
        let b = serde_json::to_string(&run_scenario(&s).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dense_noise_has_no_breakdown() {
        let err = analytic_breakdown(&Preset::CxDense.config()).unwrap_err();
        assert!(matches!(err, ForgeError::Unsupported(_)));
    }

    #[test]
    fn errors_carry_the_scenario_name() {
        let mut c = cx_config();
        c.noise.push(Mechanism::AmplitudeDamping { qubit: 5, rate: 1e-3 });
        let err = run_scenario(&Scenario::exact(c)).unwrap_err();
        assert!(err.to_string().contains("cx_full_noise"), "{err}");
        assert!(!err.is_numerical());
    }

    #[test]
    fn sweep_grids_are_validated() {
        assert!(angle_sweep(&cx_config(), &[0.5, 0.2]).is_err());
        assert!(angle_sweep(&cx_config(), &[4.0]).is_err());
        assert!(precision_sweep(&cx_config(), &[0.2], StrengthMode::Uniform).is_err());
    }

    #[test]
    fn angle_sweep_starts_at_zero() {
        let pts = angle_sweep(&cx_config(), &[0.0, 0.5]).unwrap();
        assert!(pts[0].numerical.lambdas.is_empty());
        assert!(pts[0].analytic.total_rate().abs() < 1e-15);
        let mut buf = Vec::new();
        write_sweep_csv(&pts, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("x,label,numerical,analytic,deviation"));
    }

    #[test]
    fn uniform_strength_rescales_every_rate() {
        let c = cx_config().with_strength(0.1).unwrap();
        assert!((c.strength() - 0.1).abs() < 1e-15);
        assert!(ScenarioConfig { noise: vec![], ..cx_config() }.with_strength(0.1).is_err());
    }
}

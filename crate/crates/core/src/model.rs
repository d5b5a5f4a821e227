//! Lindblad models: gate Hamiltonian, coherent noise and dissipator matrix.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};
use crate::limits;
use crate::pauli::{Pauli, PauliIndexSet, PauliString};
use crate::superop::{self, CMatrix, SuperOperator, PSD_TOL};

/// Hermitian positive-semidefinite matrix `β` over an index set of Pauli strings,
/// defining the dissipator `Σ_jk β_jk D[P_j, P_k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DissipatorMatrix {
    index: PauliIndexSet,
    beta: CMatrix,
}

impl DissipatorMatrix {
    pub fn new(index: PauliIndexSet, beta: CMatrix) -> Result<Self> {
        let m = index.len();
        if beta.shape() != (m, m) {
            return Err(ForgeError::Dimension(format!("β is not {m}x{m}")));
        }
        let d = Self { index, beta };
        d.validate()?;
        Ok(d)
    }

    pub fn empty(n: usize) -> Self {
        let index = PauliIndexSet::new(n, Vec::new()).expect("empty index set is valid");
        Self { index, beta: CMatrix::zeros(0, 0) }
    }

    fn validate(&self) -> Result<()> {
        if self.beta.is_empty() {
            return Ok(());
        }
        let scale = self.beta.iter().fold(1.0f64, |a, z| a.max(z.norm()));
        let dev = (&self.beta - self.beta.adjoint())
            .iter()
            .fold(0.0f64, |a, z| a.max(z.norm()));
        if dev > superop::HERMITIAN_TOL * scale {
            return Err(ForgeError::NotHermitian(dev));
        }
        let min = SymmetricEigen::new(self.beta.clone()).eigenvalues.min();
        if min < PSD_TOL {
            return Err(ForgeError::NotPsd(min));
        }
        Ok(())
    }

    /// Amplitude damping on qubit `q` at rate `rate`, i.e. `rate · D[σ⁻]`.
    ///
    /// The block over `(I, X, Y, Z)` is `(rate/4)` times
    /// `[[0,0,0,0],[0,1,−i,0],[0,i,1,0],[0,0,0,0]]`.
    pub fn amplitude_damping(n: usize, q: usize, rate: f64) -> Result<Self> {
        check_rate(rate)?;
        let mut beta = CMatrix::zeros(4, 4);
        let r = rate / 4.0;
        beta[(1, 1)] = Complex64::new(r, 0.0);
        beta[(2, 2)] = Complex64::new(r, 0.0);
        beta[(1, 2)] = Complex64::new(0.0, -r);
        beta[(2, 1)] = Complex64::new(0.0, r);
        Self::new(single_qubit_index(n, q)?, beta)
    }

    /// Pure dephasing on qubit `q`: `(rate/2) D[Z]`.
    pub fn pure_dephasing(n: usize, q: usize, rate: f64) -> Result<Self> {
        check_rate(rate)?;
        let mut beta = CMatrix::zeros(4, 4);
        beta[(3, 3)] = Complex64::new(rate / 2.0, 0.0);
        Self::new(single_qubit_index(n, q)?, beta)
    }

    /// Seeded random dense `β = G†G` over all non-identity Paulis, scaled so its
    /// largest eigenvalue is `strength · omega`.
    pub fn random_dense(n: usize, strength: f64, omega: f64, seed: u64) -> Result<Self> {
        check_rate(strength)?;
        limits::check_qubits(n)?;
        let index = PauliIndexSet::all(n, false);
        let m = index.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = CMatrix::from_fn(m, m, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        });
        let gram = g.adjoint() * &g;
        let gram = (&gram + gram.adjoint()) * Complex64::new(0.5, 0.0);
        let top = SymmetricEigen::new(gram.clone()).eigenvalues.max();
        let beta = gram * Complex64::new(strength * omega / top, 0.0);
        Self::new(index, beta)
    }

    pub fn n_qubits(&self) -> usize {
        self.index.n_qubits()
    }

    pub fn index(&self) -> &PauliIndexSet {
        &self.index
    }

    pub fn beta(&self) -> &CMatrix {
        &self.beta
    }

    pub fn is_empty(&self) -> bool {
        self.beta.iter().all(|z| *z == Complex64::new(0.0, 0.0))
    }

    /// Sum of two dissipators over the union of their index sets.
    pub fn sum(&self, other: &DissipatorMatrix) -> Result<Self> {
        let index = self.index.union(&other.index)?;
        let m = index.len();
        let mut beta = CMatrix::zeros(m, m);
        for part in [self, other] {
            let pos: Vec<usize> = part
                .index
                .elements()
                .iter()
                .map(|p| index.position(p).expect("union contains every element"))
                .collect();
            for (a, &pa) in pos.iter().enumerate() {
                for (b, &pb) in pos.iter().enumerate() {
                    beta[(pa, pb)] += part.beta[(a, b)];
                }
            }
        }
        Self::new(index, beta)
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        check_rate(s)?;
        Ok(Self { index: self.index.clone(), beta: &self.beta * Complex64::new(s, 0.0) })
    }

    pub fn generator(&self) -> Result<SuperOperator> {
        if self.index.is_empty() {
            limits::check_qubits(self.n_qubits())?;
            return Ok(SuperOperator::zeros(self.n_qubits()));
        }
        superop::dissipator_from_beta(&self.index, &self.beta)
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if !rate.is_finite() || rate < 0.0 {
        return Err(ForgeError::NegativeRate(rate));
    }
    Ok(())
}

fn single_qubit_index(n: usize, q: usize) -> Result<PauliIndexSet> {
    if q >= n {
        return Err(ForgeError::Layout(format!("qubit {q} out of range for {n} qubits")));
    }
    let elements = Pauli::ALL.iter().map(|&p| PauliString::single(n, q, p)).collect();
    PauliIndexSet::new(n, elements)
}

/// Coherent phase noise: each rate `δ_P` contributes `(δ_P / 2) P`.
pub fn phase_noise_hamiltonian(deltas: &[(PauliString, f64)]) -> Result<BTreeMap<PauliString, f64>> {
    let mut out = BTreeMap::new();
    for (p, d) in deltas {
        if !d.is_finite() {
            return Err(ForgeError::Config(format!("non-finite rate for {p}")));
        }
        if p.is_identity() {
            continue;
        }
        *out.entry(p.unsigned()).or_insert(0.0) += sign_of(p)? * d / 2.0;
    }
    Ok(out)
}

fn sign_of(p: &PauliString) -> Result<f64> {
    match p.phase() {
        0 => Ok(1.0),
        2 => Ok(-1.0),
        _ => Err(ForgeError::InvalidLabel(format!("{p}: Hamiltonian term is not Hermitian"))),
    }
}

/// Two-qubit and single-qubit gate elements placed on a register.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateElement {
    /// `(ω/2)(X_t − Z_c X_t)`.
    Cx { control: usize, target: usize },
    /// `(ω/2)(−Z_a − Z_b + Z_a Z_b)`, identity term dropped.
    Cz { a: usize, b: usize },
    /// `(ω/2) X_q`.
    X { q: usize },
}

impl GateElement {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            GateElement::Cx { control, target } => vec![control, target],
            GateElement::Cz { a, b } => vec![a, b],
            GateElement::X { q } => vec![q],
        }
    }
}

/// Named gate layouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    Identity,
    X,
    Cz,
    Cx,
    /// Spectator on qubit 0, CZ on qubits 1 and 2.
    ICz,
    /// Spectator on qubit 0, CX with control 1 and target 2.
    ICx,
    /// CZ on qubits 0 and 1, spectator on qubit 2.
    CzI,
    /// CX with control 0 and target 1, spectator on qubit 2.
    CxI,
    CzCz,
    /// CX(0→1) and CX(2→3).
    CxCx,
    /// CX(0→1) and CX(3→2).
    CxXc,
}

impl GateKind {
    pub const ALL: [GateKind; 11] = [
        GateKind::Identity,
        GateKind::X,
        GateKind::Cz,
        GateKind::Cx,
        GateKind::ICz,
        GateKind::ICx,
        GateKind::CzI,
        GateKind::CxI,
        GateKind::CzCz,
        GateKind::CxCx,
        GateKind::CxXc,
    ];

    /// Register size, or `None` for the identity which fits any register.
    pub fn fixed_qubits(self) -> Option<usize> {
        match self {
            GateKind::Identity => None,
            GateKind::X => Some(1),
            GateKind::Cz | GateKind::Cx => Some(2),
            GateKind::ICz | GateKind::ICx | GateKind::CzI | GateKind::CxI => Some(3),
            GateKind::CzCz | GateKind::CxCx | GateKind::CxXc => Some(4),
        }
    }

    pub fn elements(self) -> Vec<GateElement> {
        use GateElement::*;
        match self {
            GateKind::Identity => vec![],
            GateKind::X => vec![X { q: 0 }],
            GateKind::Cz => vec![Cz { a: 0, b: 1 }],
            GateKind::Cx => vec![Cx { control: 0, target: 1 }],
            GateKind::ICz => vec![Cz { a: 1, b: 2 }],
            GateKind::ICx => vec![Cx { control: 1, target: 2 }],
            GateKind::CzI => vec![Cz { a: 0, b: 1 }],
            GateKind::CxI => vec![Cx { control: 0, target: 1 }],
            GateKind::CzCz => vec![Cz { a: 0, b: 1 }, Cz { a: 2, b: 3 }],
            GateKind::CxCx => vec![Cx { control: 0, target: 1 }, Cx { control: 2, target: 3 }],
            GateKind::CxXc => vec![Cx { control: 0, target: 1 }, Cx { control: 3, target: 2 }],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Identity => "identity",
            GateKind::X => "x",
            GateKind::Cz => "cz",
            GateKind::Cx => "cx",
            GateKind::ICz => "i_cz",
            GateKind::ICx => "i_cx",
            GateKind::CzI => "cz_i",
            GateKind::CxI => "cx_i",
            GateKind::CzCz => "cz_cz",
            GateKind::CxCx => "cx_cx",
            GateKind::CxXc => "cx_xc",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = ForgeError;

    fn from_str(s: &str) -> Result<Self> {
        GateKind::ALL
            .iter()
            .copied()
            .find(|g| g.name() == s.to_ascii_lowercase())
            .ok_or_else(|| ForgeError::Config(format!("unknown gate preset {s:?}")))
    }
}

/// A gate layout with drive frequency `ω` and duration `τ`; the angle is `θ = ωτ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GatePreset {
    kind: GateKind,
    n_qubits: usize,
    omega: f64,
    tau: f64,
}

impl GatePreset {
    pub fn new(kind: GateKind, n_qubits: usize, omega: f64, tau: f64) -> Result<Self> {
        if let Some(fixed) = kind.fixed_qubits() {
            if fixed != n_qubits {
                return Err(ForgeError::QubitMismatch { expected: fixed, found: n_qubits });
            }
        }
        if n_qubits == 0 {
            return Err(ForgeError::Config("gate on zero qubits".into()));
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(ForgeError::Config(format!("drive frequency must be positive, got {omega}")));
        }
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(ForgeError::Config(format!("duration must be non-negative, got {tau}")));
        }
        Ok(GatePreset { kind, n_qubits, omega, tau })
    }

    pub fn from_theta(kind: GateKind, n_qubits: usize, theta: f64, omega: f64) -> Result<Self> {
        Self::new(kind, n_qubits, omega, theta / omega)
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn theta(&self) -> f64 {
        self.omega * self.tau
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(self.kind, self.n_qubits, self.omega, tau)
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::from_theta(self.kind, self.n_qubits, theta, self.omega)
    }

    /// Pauli prefactors of the gate Hamiltonian.
    pub fn hamiltonian_terms(&self) -> BTreeMap<PauliString, f64> {
        let n = self.n_qubits;
        let half = self.omega / 2.0;
        let mut out = BTreeMap::new();
        let mut add = |p: PauliString, c: f64| *out.entry(p).or_insert(0.0) += c;
        for e in self.kind.elements() {
            match e {
                GateElement::Cx { control, target } => {
                    add(PauliString::single(n, target, Pauli::X), half);
                    let mut zx = PauliString::single(n, control, Pauli::Z);
                    zx.set(target, Pauli::X);
                    add(zx, -half);
                }
                GateElement::Cz { a, b } => {
                    add(PauliString::single(n, a, Pauli::Z), -half);
                    add(PauliString::single(n, b, Pauli::Z), -half);
                    let mut zz = PauliString::single(n, a, Pauli::Z);
                    zz.set(b, Pauli::Z);
                    add(zz, half);
                }
                GateElement::X { q } => add(PauliString::single(n, q, Pauli::X), half),
            }
        }
        out
    }
}

/// Lindbladian `−i[H_g + H_δ, ·] + Σ β_jk D[P_j, P_k]` on `n` qubits.
///
/// Hamiltonian maps hold Pauli prefactors; identity terms are dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct LindbladModel {
    n_qubits: usize,
    ideal: BTreeMap<PauliString, f64>,
    noise: BTreeMap<PauliString, f64>,
    dissipator: DissipatorMatrix,
}

impl LindbladModel {
    pub fn new(n_qubits: usize) -> Self {
        LindbladModel {
            n_qubits,
            ideal: BTreeMap::new(),
            noise: BTreeMap::new(),
            dissipator: DissipatorMatrix::empty(n_qubits),
        }
    }

    /// Model whose ideal part is the given gate's Hamiltonian.
    pub fn for_gate(gate: &GatePreset) -> Self {
        let mut m = Self::new(gate.n_qubits());
        m.ideal = gate.hamiltonian_terms();
        m
    }

    fn check_terms(&self, terms: &BTreeMap<PauliString, f64>) -> Result<()> {
        for (p, c) in terms {
            if p.n_qubits() != self.n_qubits {
                return Err(ForgeError::QubitMismatch { expected: self.n_qubits, found: p.n_qubits() });
            }
            if p.phase() != 0 {
                return Err(ForgeError::InvalidLabel(format!("{p}: Hamiltonian terms take unsigned labels")));
            }
            if !c.is_finite() {
                return Err(ForgeError::Config(format!("non-finite coefficient for {p}")));
            }
        }
        Ok(())
    }

    pub fn with_ideal(mut self, ideal: BTreeMap<PauliString, f64>) -> Result<Self> {
        self.check_terms(&ideal)?;
        self.ideal = ideal.into_iter().filter(|(p, _)| !p.is_identity()).collect();
        Ok(self)
    }

    pub fn with_noise(mut self, noise: BTreeMap<PauliString, f64>) -> Result<Self> {
        self.check_terms(&noise)?;
        self.noise = noise.into_iter().filter(|(p, _)| !p.is_identity()).collect();
        Ok(self)
    }

    pub fn with_dissipator(mut self, dissipator: DissipatorMatrix) -> Result<Self> {
        if dissipator.n_qubits() != self.n_qubits {
            return Err(ForgeError::QubitMismatch {
                expected: self.n_qubits,
                found: dissipator.n_qubits(),
            });
        }
        self.dissipator = dissipator;
        Ok(self)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ideal(&self) -> &BTreeMap<PauliString, f64> {
        &self.ideal
    }

    pub fn noise(&self) -> &BTreeMap<PauliString, f64> {
        &self.noise
    }

    pub fn dissipator(&self) -> &DissipatorMatrix {
        &self.dissipator
    }

    pub fn ideal_hamiltonian(&self) -> Result<CMatrix> {
        superop::pauli_sum(self.n_qubits, &terms_vec(&self.ideal))
    }

    pub fn noise_hamiltonian(&self) -> Result<CMatrix> {
        superop::pauli_sum(self.n_qubits, &terms_vec(&self.noise))
    }

    /// `−i[H_g, ·]`.
    pub fn ideal_generator(&self) -> Result<SuperOperator> {
        superop::hamiltonian_generator(&self.ideal_hamiltonian()?)
    }

    /// Everything except the ideal gate: `−i[H_δ, ·] + dissipator`.
    pub fn noise_generator(&self) -> Result<SuperOperator> {
        let h = superop::hamiltonian_generator(&self.noise_hamiltonian()?)?;
        h.add(&self.dissipator.generator()?)
    }

    pub fn generator(&self) -> Result<SuperOperator> {
        self.ideal_generator()?.add(&self.noise_generator()?)
    }
}

fn terms_vec(terms: &BTreeMap<PauliString, f64>) -> Vec<(PauliString, f64)> {
    terms.iter().map(|(p, c)| (*p, *c)).collect()
}

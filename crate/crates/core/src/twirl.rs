//! Pauli twirling and Pauli-Lindblad model fitting.
//!
//! A Pauli-Lindblad model `N = Π_k exp(λ_k (P_k · P_k − id))` has Pauli
//! fidelities `f_b = exp(−2 Σ_k λ_k ⟨b, k⟩)`, where `⟨b, k⟩` is 1 when `P_b`
//! and `P_k` anticommute. Fitting solves `−½ log f_b = Σ_k ⟨b, k⟩ λ_k` over
//! the non-identity Paulis.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};
use crate::limits;
use crate::pauli::{all_paulis, PauliString};
use crate::superop::{CMatrix, Ptm, RMatrix, SuperOperator};

/// Tolerance on `f_I = 1` for trace preservation.
pub const TRACE_TOL: f64 = 1e-12;
/// Off-diagonal PTM magnitude above which a channel is reported as not twirled.
pub const TWIRL_RESIDUE_TOL: f64 = 1e-10;
/// Default magnitude below which fitted rates are dropped.
pub const PRUNE_TOL: f64 = 1e-12;

/// Sign-permutation form of `ρ ↦ P ρ P` on the row-major vectorization.
fn conjugation_monomial(p: &PauliString) -> (Vec<usize>, Vec<f64>) {
    let n = p.n_qubits();
    let d = 1usize << n;
    let (xm, zm, ny) = p.basis_masks();
    let xm = xm as usize;
    let phi = |j: usize| -> f64 {
        let parity = (j as u64 & zm).count_ones() % 2;
        if parity == 0 { 1.0 } else { -1.0 }
    };
    // P|j⟩ = i^ny (−1)^{j·z} |j ⊕ x⟩, so (P ρ P)_{rc} = (−1)^ny φ(r⊕x) φ(c) ρ_{r⊕x, c⊕x}
    let global = if ny % 2 == 0 { 1.0 } else { -1.0 };
    let mut perm = vec![0usize; d * d];
    let mut sign = vec![0f64; d * d];
    for r in 0..d {
        for c in 0..d {
            let a = r * d + c;
            perm[a] = (r ^ xm) * d + (c ^ xm);
            sign[a] = global * phi(r ^ xm) * phi(c);
        }
    }
    (perm, sign)
}

/// Pauli twirl `(1/4^n) Σ_k P_k · N(P_k · P_k) · P_k`.
pub fn pauli_twirl(channel: &SuperOperator) -> SuperOperator {
    let n = channel.n_qubits();
    let dim = 1usize << (2 * n);
    let src = channel.matrix();
    let mut out = CMatrix::zeros(dim, dim);
    for p in all_paulis(n) {
        let (perm, sign) = conjugation_monomial(&p);
        for b in 0..dim {
            let pb = perm[b];
            let sb = sign[pb];
            for a in 0..dim {
                out[(a, b)] += src[(perm[a], pb)] * (sign[a] * sb);
            }
        }
    }
    let scale = 1.0 / dim as f64;
    SuperOperator::new(n, out * num_complex::Complex64::new(scale, 0.0))
        .expect("twirl preserves the register")
}

/// Twirl of a generator; the twirl is linear so this is the same projection.
pub fn generator_twirl(generator: &SuperOperator) -> SuperOperator {
    pauli_twirl(generator)
}

/// Pauli fidelities `f_b` in canonical order, identity first.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliFidelities {
    n_qubits: usize,
    values: Vec<f64>,
}

impl PauliFidelities {
    pub fn new(n_qubits: usize, values: Vec<f64>) -> Result<Self> {
        let dim = 1usize << (2 * n_qubits);
        if values.len() != dim {
            return Err(ForgeError::Dimension(format!("{} fidelities for {dim} Paulis", values.len())));
        }
        Ok(PauliFidelities { n_qubits, values })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, p: &PauliString) -> f64 {
        self.values[p.index()]
    }

    /// Pauli error probabilities `p_a = (1/4^n) Σ_b (−1)^{⟨a,b⟩} f_b`.
    pub fn error_probabilities(&self) -> Vec<f64> {
        let paulis: Vec<PauliString> = all_paulis(self.n_qubits).collect();
        let scale = 1.0 / paulis.len() as f64;
        paulis
            .iter()
            .map(|a| {
                paulis
                    .iter()
                    .zip(&self.values)
                    .map(|(b, f)| if a.commutes(b) { *f } else { -*f })
                    .sum::<f64>()
                    * scale
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["label", "fidelity"])?;
        for (p, f) in all_paulis(self.n_qubits).zip(&self.values) {
            out.write_record([p.label(), format!("{f:.17e}")])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut entries = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(ForgeError::Dimension("fidelity rows need label and value".into()));
            }
            let p = PauliString::from_label(&rec[0])?;
            let f: f64 = rec[1]
                .trim()
                .parse()
                .map_err(|_| ForgeError::Config(format!("bad number {:?}", &rec[1])))?;
            entries.push((p, f));
        }
        let n = entries.first().map_or(0, |(p, _)| p.n_qubits());
        let mut values = vec![f64::NAN; 1usize << (2 * n)];
        for (p, f) in entries {
            if p.n_qubits() != n {
                return Err(ForgeError::QubitMismatch { expected: n, found: p.n_qubits() });
            }
            values[p.index()] = f;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(ForgeError::Config("fidelity table is incomplete".into()));
        }
        Self::new(n, values)
    }
}

/// Fidelities of a channel: the PTM diagonal, which is what twirling keeps.
pub fn pauli_fidelities(channel: &SuperOperator) -> Result<PauliFidelities> {
    let values = channel.ptm_diagonal()?;
    if (values[0] - 1.0).abs() > TRACE_TOL {
        return Err(ForgeError::NotTracePreserving(values[0]));
    }
    PauliFidelities::new(channel.n_qubits(), values)
}

/// Largest off-diagonal PTM magnitude; zero for an exactly twirled channel.
pub fn twirl_residue(channel: &SuperOperator) -> Result<f64> {
    let ptm = channel.to_ptm()?;
    let m = ptm.matrix();
    let mut worst = 0.0f64;
    for a in 0..m.nrows() {
        for b in 0..m.ncols() {
            if a != b {
                worst = worst.max(m[(a, b)].abs());
            }
        }
    }
    Ok(worst)
}

/// Sparse Pauli-Lindblad model: rates `λ_k` on non-identity Paulis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPLModel")]
pub struct PLModel {
    pub n_qubits: usize,
    pub lambdas: BTreeMap<PauliString, f64>,
}

#[derive(Deserialize)]
struct RawPLModel {
    n_qubits: usize,
    lambdas: BTreeMap<PauliString, f64>,
}

impl TryFrom<RawPLModel> for PLModel {
    type Error = ForgeError;

    fn try_from(raw: RawPLModel) -> Result<Self> {
        PLModel::new(raw.n_qubits, raw.lambdas)
    }
}

impl PLModel {
    pub fn new(n_qubits: usize, lambdas: BTreeMap<PauliString, f64>) -> Result<Self> {
        for p in lambdas.keys() {
            if p.n_qubits() != n_qubits {
                return Err(ForgeError::QubitMismatch { expected: n_qubits, found: p.n_qubits() });
            }
            if p.is_identity() || p.phase() != 0 {
                return Err(ForgeError::InvalidLabel(format!("{p} cannot carry a Pauli-Lindblad rate")));
            }
        }
        Ok(PLModel { n_qubits, lambdas })
    }

    pub fn empty(n_qubits: usize) -> Self {
        PLModel { n_qubits, lambdas: BTreeMap::new() }
    }

    /// Rate for `p`, zero if absent.
    pub fn get(&self, p: &PauliString) -> f64 {
        self.lambdas.get(p).copied().unwrap_or(0.0)
    }

    pub fn get_label(&self, label: &str) -> Result<f64> {
        Ok(self.get(&PauliString::from_label(label)?))
    }

    pub fn total_rate(&self) -> f64 {
        self.lambdas.values().sum()
    }

    /// Labels with `|λ| > threshold`.
    pub fn support(&self, threshold: f64) -> Vec<PauliString> {
        self.lambdas
            .iter()
            .filter(|(_, v)| v.abs() > threshold)
            .map(|(p, _)| *p)
            .collect()
    }

    /// Entrywise sum of two models on the same register.
    pub fn add(&self, other: &PLModel) -> Result<PLModel> {
        if self.n_qubits != other.n_qubits {
            return Err(ForgeError::QubitMismatch { expected: self.n_qubits, found: other.n_qubits });
        }
        let mut lambdas = self.lambdas.clone();
        for (p, v) in &other.lambdas {
            *lambdas.entry(*p).or_insert(0.0) += v;
        }
        Ok(PLModel { n_qubits: self.n_qubits, lambdas })
    }

    /// Largest `|λ_k − μ_k|` over the union of supports.
    pub fn max_deviation(&self, other: &PLModel) -> f64 {
        self.lambdas
            .keys()
            .chain(other.lambdas.keys())
            .map(|p| (self.get(p) - other.get(p)).abs())
            .fold(0.0, f64::max)
    }

    pub fn without_small(&self, threshold: f64) -> PLModel {
        PLModel {
            n_qubits: self.n_qubits,
            lambdas: self
                .lambdas
                .iter()
                .filter(|(_, v)| v.abs() >= threshold)
                .map(|(p, v)| (*p, *v))
                .collect(),
        }
    }

    /// Fidelities `f_b = exp(−2 Σ_k λ_k ⟨b, k⟩)`.
    pub fn fidelities(&self) -> PauliFidelities {
        let values = all_paulis(self.n_qubits)
            .map(|b| {
                let s: f64 = self
                    .lambdas
                    .iter()
                    .filter(|(k, _)| b.anticommutes(k))
                    .map(|(_, v)| v)
                    .sum();
                (-2.0 * s).exp()
            })
            .collect();
        PauliFidelities { n_qubits: self.n_qubits, values }
    }

    /// Writes `label,lambda` rows in canonical order.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["label", "lambda"])?;
        for (p, v) in &self.lambdas {
            out.write_record([p.label(), format!("{v:.17e}")])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Process fidelity `p_I` of the model channel.
    pub fn process_fidelity(&self) -> f64 {
        let f = self.fidelities();
        f.values.iter().sum::<f64>() / f.values.len() as f64
    }
}

/// Which rates a fit determines.
#[derive(Clone, Debug, PartialEq)]
pub enum Support {
    /// Every non-identity Pauli; the system is square and exactly solvable.
    Full,
    /// Listed Paulis only, fitted by least squares.
    Labels(Vec<PauliString>),
}

/// Fit result with the least-squares residual `‖M λ + ½ log f‖₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct PLFit {
    pub model: PLModel,
    pub residual: f64,
}

/// Fits rates to fidelities; rates with `|λ| < prune` are dropped.
pub fn fit_pl(f: &PauliFidelities, support: &Support, prune: f64) -> Result<PLFit> {
    let n = f.n_qubits;
    limits::check_qubits(n)?;
    if (f.values[0] - 1.0).abs() > TRACE_TOL {
        return Err(ForgeError::NotTracePreserving(f.values[0]));
    }
    let rows: Vec<PauliString> = all_paulis(n).skip(1).collect();
    let mut y = DVector::zeros(rows.len());
    for (i, b) in rows.iter().enumerate() {
        let v = f.values[b.index()];
        if v.is_nan() || v <= 0.0 {
            return Err(ForgeError::LogDomain { label: b.label(), value: v });
        }
        y[i] = -0.5 * v.ln();
    }
    let unknowns: Vec<PauliString> = match support {
        Support::Full => rows.clone(),
        Support::Labels(ls) => {
            for p in ls {
                if p.n_qubits() != n {
                    return Err(ForgeError::QubitMismatch { expected: n, found: p.n_qubits() });
                }
                if p.is_identity() {
                    return Err(ForgeError::InvalidLabel("identity has no Pauli-Lindblad rate".into()));
                }
            }
            ls.iter().map(|p| p.unsigned()).collect()
        }
    };
    let m = RMatrix::from_fn(rows.len(), unknowns.len(), |i, j| {
        if rows[i].anticommutes(&unknowns[j]) { 1.0 } else { 0.0 }
    });
    let lambda = match support {
        Support::Full => m
            .clone()
            .lu()
            .solve(&y)
            .ok_or(ForgeError::RankDeficient { rank: 0, unknowns: unknowns.len() })?,
        Support::Labels(_) => least_squares(&m, &y)?,
    };
    let residual = (&m * &lambda - &y).norm();
    let lambdas = unknowns
        .iter()
        .zip(lambda.iter())
        .filter(|(_, v)| v.abs() >= prune)
        .map(|(p, v)| (*p, *v))
        .collect();
    Ok(PLFit { model: PLModel::new(n, lambdas)?, residual })
}

fn least_squares(m: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let unknowns = m.ncols();
    if unknowns == 0 {
        return Ok(DVector::zeros(0));
    }
    let svd = m.clone().svd(true, true);
    let top = svd.singular_values.max();
    let eps = 1e-10 * top.max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().filter(|s| **s > eps).count();
    if rank < unknowns {
        return Err(ForgeError::RankDeficient { rank, unknowns });
    }
    svd.solve(y, eps)
        .map_err(|e| ForgeError::NonConvergence(format!("least squares: {e}")))
}

/// The Pauli channel with the model's fidelities.
pub fn pl_channel(model: &PLModel) -> Result<SuperOperator> {
    limits::check_qubits(model.n_qubits)?;
    let f = model.fidelities();
    let ptm = Ptm::new(model.n_qubits, RMatrix::from_diagonal(&DVector::from_vec(f.values)))?;
    Ok(SuperOperator::from_ptm(&ptm))
}

/// First-order average gate fidelity `1 − d/(d+1) Σ_k λ_k`.
pub fn average_gate_fidelity(model: &PLModel) -> f64 {
    let d = (1u64 << model.n_qubits) as f64;
    1.0 - d / (d + 1.0) * model.total_rate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DissipatorMatrix, GateKind, GatePreset, LindbladModel};
    use crate::frame::{exact_noise, FramePosition, IntegrationOptions};

    fn noisy_channel(n: usize) -> SuperOperator {
        let gate = GatePreset::new(GateKind::Identity, n, 1.0, 1.0).unwrap();
        let diss = DissipatorMatrix::random_dense(n, 0.05, 1.0, 2).unwrap();
        let model = LindbladModel::for_gate(&gate).with_dissipator(diss).unwrap();
        exact_noise(&model, &gate, FramePosition::Left, IntegrationOptions::default()).unwrap()
    }

    /// Direct sum of `(P ⊗ conj P) N (P ⊗ conj P)` with dense Kronecker products.
    fn brute_twirl(ch: &SuperOperator) -> SuperOperator {
        let n = ch.n_qubits();
        let mut acc = SuperOperator::zeros(n);
        for p in all_paulis(n) {
            let m = p.to_matrix().unwrap();
            let s = SuperOperator::sandwich(&m, &m).unwrap();
            acc = acc.add(&s.compose(ch).unwrap().compose(&s).unwrap()).unwrap();
        }
        acc.scale(1.0 / (1usize << (2 * n)) as f64)
    }

    #[test]
    fn twirl_matches_brute_force_and_ptm_diagonal() {
        let ch = noisy_channel(2);
        let tw = pauli_twirl(&ch);
        assert!(tw.distance(&brute_twirl(&ch)).unwrap() < 1e-14);
        let diag = ch.ptm_diagonal().unwrap();
        let ptm = tw.to_ptm().unwrap();
        for a in 0..16 {
            for b in 0..16 {
                let want = if a == b { diag[a] } else { 0.0 };
                assert!((ptm.matrix()[(a, b)] - want).abs() < 1e-14);
            }
        }
        assert!(twirl_residue(&tw).unwrap() < 1e-14);
        assert!(twirl_residue(&ch).unwrap() > TWIRL_RESIDUE_TOL);
    }

    #[test]
    fn full_fit_matches_symplectic_transform() {
        // λ_k = (1/4^n) Σ_b (−1)^{⟨b,k⟩} log f_b with log f_I = 0
        let f = pauli_fidelities(&noisy_channel(2)).unwrap();
        let fit = fit_pl(&f, &Support::Full, 0.0).unwrap();
        for k in all_paulis(2).skip(1) {
            let oracle: f64 = all_paulis(2)
                .map(|b| {
                    let l = f.get(&b).ln();
                    if b.commutes(&k) { l } else { -l }
                })
                .sum::<f64>()
                / 16.0;
            assert!((fit.model.get(&k) - oracle).abs() < 1e-14, "{k}");
        }
        assert!(fit.residual < 1e-14);
    }

    #[test]
    fn fit_roundtrips_model_fidelities() {
        let mut lambdas = BTreeMap::new();
        lambdas.insert(PauliString::from_label("xi").unwrap(), 0.01);
        lambdas.insert(PauliString::from_label("zz").unwrap(), 0.003);
        lambdas.insert(PauliString::from_label("yx").unwrap(), -0.0005);
        let model = PLModel::new(2, lambdas).unwrap();
        let fit = fit_pl(&model.fidelities(), &Support::Full, PRUNE_TOL).unwrap();
        assert!(fit.model.max_deviation(&model) < 1e-15);
        assert_eq!(fit.model.lambdas.len(), 3);
        let sparse = Support::Labels(model.lambdas.keys().copied().collect());
        let fit = fit_pl(&model.fidelities(), &sparse, 0.0).unwrap();
        assert!(fit.model.max_deviation(&model) < 1e-15);
    }

    #[test]
    fn pl_channel_has_model_fidelities_and_is_cp() {
        let mut lambdas = BTreeMap::new();
        lambdas.insert(PauliString::from_label("x").unwrap(), 0.02);
        lambdas.insert(PauliString::from_label("z").unwrap(), 0.05);
        let model = PLModel::new(1, lambdas).unwrap();
        let ch = pl_channel(&model).unwrap();
        let f = pauli_fidelities(&ch).unwrap();
        for (a, b) in f.values().iter().zip(model.fidelities().values()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(ch.min_choi_eigenvalue() > -1e-14);
        // product of independent channels: p_I = w_x w_z
        let w = |l: f64| (1.0 + (-2.0 * l).exp()) / 2.0;
        assert!((model.process_fidelity() - w(0.02) * w(0.05)).abs() < 1e-15);
    }

    #[test]
    fn fit_errors() {
        let mut f = PLModel::empty(1).fidelities();
        f.values[2] = -0.1;
        assert!(matches!(fit_pl(&f, &Support::Full, 0.0), Err(ForgeError::LogDomain { .. })));
        f.values[0] = 0.9;
        assert!(matches!(fit_pl(&f, &Support::Full, 0.0), Err(ForgeError::NotTracePreserving(_))));
        // a duplicated unknown is rank deficient
        let f = PLModel::empty(1).fidelities();
        let p = PauliString::from_label("x").unwrap();
        let err = fit_pl(&f, &Support::Labels(vec![p, p]), 0.0);
        assert!(matches!(err, Err(ForgeError::RankDeficient { .. })));
    }

    #[test]
    fn average_gate_fidelity_first_order() {
        let mut lambdas = BTreeMap::new();
        lambdas.insert(PauliString::from_label("ix").unwrap(), 1e-4);
        let model = PLModel::new(2, lambdas).unwrap();
        assert!((average_gate_fidelity(&model) - (1.0 - 0.8e-4)).abs() < 1e-16);
    }

    #[test]
    fn csv_and_json_roundtrip() {
        let f = pauli_fidelities(&noisy_channel(1)).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        assert_eq!(PauliFidelities::read_csv(buf.as_slice()).unwrap(), f);
        let model = fit_pl(&f, &Support::Full, 0.0).unwrap().model;
        let text = serde_json::to_string(&model).unwrap();
        assert!(text.contains("\"lambdas\":{\"x\""));
        assert_eq!(serde_json::from_str::<PLModel>(&text).unwrap(), model);
    }
}

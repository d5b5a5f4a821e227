//! Superoperators on `n` qubits in the row-major vectorization.
//!
//! The map `ρ ↦ A ρ B` is represented by `A ⊗ Bᵀ`, acting on `vec(ρ)` with
//! `vec(ρ)[r·d + c] = ρ[r, c]`.

use std::io::{Read, Write};

use nalgebra::{DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};
use crate::limits;
use crate::pauli::{all_paulis, PauliIndexSet, PauliString};

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Absolute tolerance for imaginary parts dropped from real-valued results.
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;

/// Hermiticity tolerance, relative to the largest entry.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Default tolerance for the smallest Choi eigenvalue.
pub const PSD_TOL: f64 = -1e-10;

/// Linear map on `n`-qubit operators, stored as a `4^n × 4^n` complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOperator {
    n_qubits: usize,
    matrix: CMatrix,
}

/// Pauli transfer matrix: `R[a, b] = Tr[P_a S(P_b)] / 2^n`, canonical ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct Ptm {
    n_qubits: usize,
    matrix: RMatrix,
}

fn superop_dim(n: usize) -> usize {
    1usize << (2 * n)
}

impl SuperOperator {
    pub fn new(n_qubits: usize, matrix: CMatrix) -> Result<Self> {
        limits::check_qubits(n_qubits)?;
        let dim = superop_dim(n_qubits);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(ForgeError::Dimension(format!(
                "{}x{} matrix for {n_qubits} qubits (expected {dim}x{dim})",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(SuperOperator { n_qubits, matrix })
    }

    pub(crate) fn from_parts(n_qubits: usize, matrix: CMatrix) -> Self {
        debug_assert_eq!(matrix.nrows(), superop_dim(n_qubits));
        SuperOperator { n_qubits, matrix }
    }

    pub fn identity(n_qubits: usize) -> Self {
        let dim = superop_dim(n_qubits);
        SuperOperator { n_qubits, matrix: CMatrix::identity(dim, dim) }
    }

    pub fn zeros(n_qubits: usize) -> Self {
        let dim = superop_dim(n_qubits);
        SuperOperator { n_qubits, matrix: CMatrix::zeros(dim, dim) }
    }

    /// `ρ ↦ A ρ B`.
    pub fn sandwich(a: &CMatrix, b: &CMatrix) -> Result<Self> {
        let n = qubits_of_dim(a.nrows())?;
        if a.shape() != b.shape() || !a.is_square() {
            return Err(ForgeError::Dimension("sandwich operands differ in shape".into()));
        }
        Ok(SuperOperator { n_qubits: n, matrix: a.kronecker(&b.transpose()) })
    }

    /// `ρ ↦ U ρ U†`.
    pub fn unitary(u: &CMatrix) -> Result<Self> {
        Self::sandwich(u, &u.adjoint())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Hilbert-space dimension `2^n`.
    pub fn hilbert_dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    fn check_same(&self, other: &SuperOperator) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(ForgeError::QubitMismatch { expected: self.n_qubits, found: other.n_qubits });
        }
        Ok(())
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &SuperOperator) -> Result<SuperOperator> {
        self.check_same(other)?;
        Ok(SuperOperator::from_parts(self.n_qubits, &self.matrix * &other.matrix))
    }

    pub fn add(&self, other: &SuperOperator) -> Result<SuperOperator> {
        self.check_same(other)?;
        Ok(SuperOperator::from_parts(self.n_qubits, &self.matrix + &other.matrix))
    }

    pub fn sub(&self, other: &SuperOperator) -> Result<SuperOperator> {
        self.check_same(other)?;
        Ok(SuperOperator::from_parts(self.n_qubits, &self.matrix - &other.matrix))
    }

    pub fn scale(&self, s: f64) -> SuperOperator {
        SuperOperator::from_parts(self.n_qubits, &self.matrix * Complex64::new(s, 0.0))
    }

    /// Applies the map to a `2^n × 2^n` operator.
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        let d = self.hilbert_dim();
        if rho.shape() != (d, d) {
            return Err(ForgeError::Dimension(format!("operator is not {d}x{d}")));
        }
        Ok(unvec(&(&self.matrix * vec_op(rho)), d))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm()
    }

    /// `‖self − other‖_F`.
    pub fn distance(&self, other: &SuperOperator) -> Result<f64> {
        self.check_same(other)?;
        Ok((&self.matrix - &other.matrix).norm())
    }

    pub fn expm(&self) -> SuperOperator {
        SuperOperator::from_parts(self.n_qubits, self.matrix.clone().exp())
    }

    pub fn logm(&self) -> Result<SuperOperator> {
        Ok(SuperOperator::from_parts(self.n_qubits, logm(&self.matrix)?))
    }

    pub fn inverse(&self) -> Result<SuperOperator> {
        let inv = self
            .matrix
            .clone()
            .try_inverse()
            .ok_or(ForgeError::Singular(0.0))?;
        Ok(SuperOperator::from_parts(self.n_qubits, inv))
    }

    pub fn to_ptm(&self) -> Result<Ptm> {
        let basis = PauliBasis::new(self.n_qubits);
        let complex = basis.to_pauli(&self.matrix);
        Ok(Ptm { n_qubits: self.n_qubits, matrix: real_part_checked(&complex)? })
    }

    /// Diagonal of the PTM, `Tr[P_b S(P_b)] / 2^n`, without forming the full matrix.
    pub fn ptm_diagonal(&self) -> Result<Vec<f64>> {
        let basis = PauliBasis::new(self.n_qubits);
        let inv_d = 1.0 / basis.d as f64;
        let mut worst = 0.0f64;
        let mut out = Vec::with_capacity(basis.cols.len());
        for col in &basis.cols {
            let mut acc = ZERO;
            for &(i, u) in col {
                for &(j, v) in col {
                    acc += u.conj() * self.matrix[(i, j)] * v;
                }
            }
            acc *= inv_d;
            worst = worst.max(acc.im.abs());
            out.push(acc.re);
        }
        if worst > IMAG_RESIDUE_TOL {
            return Err(ForgeError::ImaginaryResidue(worst));
        }
        Ok(out)
    }

    /// PTM entries before the imaginary-residue check.
    pub fn to_ptm_complex(&self) -> CMatrix {
        PauliBasis::new(self.n_qubits).to_pauli(&self.matrix)
    }

    pub fn from_ptm(ptm: &Ptm) -> SuperOperator {
        let basis = PauliBasis::new(ptm.n_qubits);
        let complex = ptm.matrix.map(|v| Complex64::new(v, 0.0));
        SuperOperator::from_parts(ptm.n_qubits, basis.from_pauli(&complex))
    }

    /// Choi matrix `Σ_ij |i⟩⟨j| ⊗ S(|i⟩⟨j|)`.
    pub fn choi(&self) -> CMatrix {
        let d = self.hilbert_dim();
        let mut c = CMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                for r in 0..d {
                    for s in 0..d {
                        c[(i * d + r, j * d + s)] = self.matrix[(r * d + s, i * d + j)];
                    }
                }
            }
        }
        c
    }

    /// Smallest eigenvalue of the Hermitian part of the Choi matrix.
    pub fn min_choi_eigenvalue(&self) -> f64 {
        let c = self.choi();
        let h = (&c + c.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(h).eigenvalues.min()
    }

    pub fn is_completely_positive(&self, tol: f64) -> bool {
        self.min_choi_eigenvalue() >= tol
    }

    /// Largest deviation of `Tr[S(|i⟩⟨j|)]` from `δ_ij`.
    pub fn trace_preservation_error(&self) -> f64 {
        let d = self.hilbert_dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let mut tr = ZERO;
                for r in 0..d {
                    tr += self.matrix[(r * d + r, i * d + j)];
                }
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((tr - target).norm());
            }
        }
        worst
    }

    /// Largest deviation of `Tr[S(X)]` from zero over the basis `|i⟩⟨j|`.
    pub fn trace_annihilation_error(&self) -> f64 {
        let d = self.hilbert_dim();
        let mut worst = 0.0f64;
        for col in 0..d * d {
            let mut tr = ZERO;
            for r in 0..d {
                tr += self.matrix[(r * d + r, col)];
            }
            worst = worst.max(tr.norm());
        }
        worst
    }

    pub fn to_json(&self) -> SuperOpJson {
        SuperOpJson {
            n_qubits: self.n_qubits,
            convention: CONVENTION.to_string(),
            data: self
                .matrix
                .row_iter()
                .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        }
    }

    pub fn from_json(json: &SuperOpJson) -> Result<SuperOperator> {
        if json.convention != CONVENTION {
            return Err(ForgeError::Config(format!(
                "unsupported convention {:?} (expected {CONVENTION:?})",
                json.convention
            )));
        }
        let dim = superop_dim(json.n_qubits);
        if json.data.len() != dim || json.data.iter().any(|r| r.len() != dim) {
            return Err(ForgeError::Dimension(format!("data is not {dim}x{dim}")));
        }
        let matrix = CMatrix::from_fn(dim, dim, |r, c| {
            let [re, im] = json.data[r][c];
            Complex64::new(re, im)
        });
        SuperOperator::new(json.n_qubits, matrix)
    }
}

/// Name of the vectorization convention written to JSON containers.
pub const CONVENTION: &str = "A_kron_BT";

/// JSON container for superoperators: rows of `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperOpJson {
    pub n_qubits: usize,
    pub convention: String,
    pub data: Vec<Vec<[f64; 2]>>,
}

impl Ptm {
    pub fn new(n_qubits: usize, matrix: RMatrix) -> Result<Self> {
        let dim = superop_dim(n_qubits);
        if matrix.shape() != (dim, dim) {
            return Err(ForgeError::Dimension(format!("PTM is not {dim}x{dim}")));
        }
        Ok(Ptm { n_qubits, matrix })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn matrix(&self) -> &RMatrix {
        &self.matrix
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().copied().collect()
    }

    /// CSV with a header row and a label column, canonical Pauli ordering.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let labels: Vec<String> = all_paulis(self.n_qubits).map(|p| p.label()).collect();
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["label".to_string()];
        header.extend(labels.iter().cloned());
        out.write_record(&header)?;
        for (a, label) in labels.iter().enumerate() {
            let mut row = vec![label.clone()];
            row.extend(self.matrix.row(a).iter().map(|v| format!("{v:.17e}")));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Ptm> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        let dim = header.len().saturating_sub(1);
        let n = qubits_of_superop_dim(dim)?;
        let mut matrix = RMatrix::zeros(dim, dim);
        let mut rows = 0;
        for (a, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if a >= dim || rec.len() != dim + 1 {
                return Err(ForgeError::Dimension("ragged PTM csv".into()));
            }
            for b in 0..dim {
                matrix[(a, b)] = rec[b + 1]
                    .trim()
                    .parse()
                    .map_err(|_| ForgeError::Config(format!("bad number {:?}", &rec[b + 1])))?;
            }
            rows += 1;
        }
        if rows != dim {
            return Err(ForgeError::Dimension(format!("{rows} rows, expected {dim}")));
        }
        Ptm::new(n, matrix)
    }
}

fn qubits_of_dim(d: usize) -> Result<usize> {
    if d == 0 || !d.is_power_of_two() {
        return Err(ForgeError::Dimension(format!("{d} is not a qubit dimension")));
    }
    let n = d.trailing_zeros() as usize;
    limits::check_qubits(n)?;
    Ok(n)
}

fn qubits_of_superop_dim(dim: usize) -> Result<usize> {
    let n = qubits_of_dim(dim)?;
    if n % 2 != 0 {
        return Err(ForgeError::Dimension(format!("{dim} is not 4^n")));
    }
    Ok(n / 2)
}

/// Row-major vectorization.
pub fn vec_op(m: &CMatrix) -> nalgebra::DVector<Complex64> {
    nalgebra::DVector::from_iterator(m.len(), m.transpose().iter().copied())
}

pub fn unvec(v: &nalgebra::DVector<Complex64>, d: usize) -> CMatrix {
    CMatrix::from_row_slice(d, d, v.as_slice())
}

/// Drops imaginary parts up to [`IMAG_RESIDUE_TOL`], erroring on larger residue.
pub fn real_part_checked(m: &CMatrix) -> Result<RMatrix> {
    let worst = m.iter().fold(0.0f64, |acc, z| acc.max(z.im.abs()));
    if worst > IMAG_RESIDUE_TOL {
        return Err(ForgeError::ImaginaryResidue(worst));
    }
    Ok(m.map(|z| z.re))
}

/// Sparse columns `vec(P_b)` of the Pauli change of basis.
struct PauliBasis {
    d: usize,
    cols: Vec<Vec<(usize, Complex64)>>,
}

impl PauliBasis {
    fn new(n: usize) -> Self {
        let d = 1usize << n;
        let cols = all_paulis(n)
            .map(|p| {
                let (xm, zm, ny) = p.basis_masks();
                let base = Complex64::new(0.0, 1.0).powu(ny);
                (0..d)
                    .map(|c| {
                        let sign = if (c as u64 & zm).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                        let r = c ^ xm as usize;
                        (r * d + c, base * sign)
                    })
                    .collect()
            })
            .collect();
        PauliBasis { d, cols }
    }

    /// `(1/d) Wᴴ S W`.
    fn to_pauli(&self, s: &CMatrix) -> CMatrix {
        let dim = self.cols.len();
        let mut sw = CMatrix::zeros(dim, dim);
        for (b, col) in self.cols.iter().enumerate() {
            let mut target = sw.column_mut(b);
            for &(j, v) in col {
                target.axpy(v, &s.column(j), ONE);
            }
        }
        let inv_d = Complex64::new(1.0 / self.d as f64, 0.0);
        let mut out = CMatrix::zeros(dim, dim);
        for (a, col) in self.cols.iter().enumerate() {
            for b in 0..dim {
                let mut acc = ZERO;
                for &(i, u) in col {
                    acc += u.conj() * sw[(i, b)];
                }
                out[(a, b)] = acc * inv_d;
            }
        }
        out
    }

    /// `(1/d) W R Wᴴ`.
    fn from_pauli(&self, r: &CMatrix) -> CMatrix {
        let dim = self.cols.len();
        let mut y = CMatrix::zeros(dim, dim);
        for (b, col) in self.cols.iter().enumerate() {
            for &(j, v) in col {
                let mut target = y.column_mut(j);
                target.axpy(v.conj(), &r.column(b), ONE);
            }
        }
        let inv_d = Complex64::new(1.0 / self.d as f64, 0.0);
        let mut out = CMatrix::zeros(dim, dim);
        for (a, col) in self.cols.iter().enumerate() {
            for &(i, u) in col {
                let scaled = y.row(a) * (u * inv_d);
                let mut target = out.row_mut(i);
                target += scaled;
            }
        }
        out
    }
}

fn check_hermitian(h: &CMatrix) -> Result<()> {
    let scale = h.iter().fold(1.0f64, |acc, z| acc.max(z.norm()));
    let dev = (h - h.adjoint()).iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    if dev > HERMITIAN_TOL * scale {
        return Err(ForgeError::NotHermitian(dev));
    }
    Ok(())
}

/// `ρ ↦ −i[H, ρ]`, i.e. `−i(H ⊗ I − I ⊗ Hᵀ)`.
pub fn hamiltonian_generator(h: &CMatrix) -> Result<SuperOperator> {
    let n = qubits_of_dim(h.nrows())?;
    if !h.is_square() {
        return Err(ForgeError::Dimension("Hamiltonian is not square".into()));
    }
    check_hermitian(h)?;
    let d = h.nrows();
    let id = CMatrix::identity(d, d);
    let m = (h.kronecker(&id) - id.kronecker(&h.transpose())) * Complex64::new(0.0, -1.0);
    Ok(SuperOperator::from_parts(n, m))
}

/// Dense Hamiltonian `Σ c_P P`.
pub fn pauli_sum(n: usize, terms: &[(PauliString, f64)]) -> Result<CMatrix> {
    limits::check_qubits(n)?;
    let d = 1usize << n;
    let mut h = CMatrix::zeros(d, d);
    for (p, c) in terms {
        if p.n_qubits() != n {
            return Err(ForgeError::QubitMismatch { expected: n, found: p.n_qubits() });
        }
        h += p.to_matrix()? * Complex64::new(*c, 0.0);
    }
    Ok(h)
}

/// `ρ ↦ A ρ B† − ½{B†A, ρ}` for dense operators.
pub fn dissipator_dense(a: &CMatrix, b: &CMatrix) -> Result<SuperOperator> {
    let n = qubits_of_dim(a.nrows())?;
    if a.shape() != b.shape() || !a.is_square() {
        return Err(ForgeError::Dimension("dissipator operands differ in shape".into()));
    }
    let d = a.nrows();
    let id = CMatrix::identity(d, d);
    let bd = b.adjoint();
    let bda = &bd * a;
    let half = Complex64::new(0.5, 0.0);
    let m = a.kronecker(&bd.transpose())
        - bda.kronecker(&id) * half
        - id.kronecker(&bda.transpose()) * half;
    Ok(SuperOperator::from_parts(n, m))
}

/// `D[P_j, P_k]` for Hermitian Pauli strings.
pub fn dissipator_pair(pj: &PauliString, pk: &PauliString) -> Result<SuperOperator> {
    if pj.n_qubits() != pk.n_qubits() {
        return Err(ForgeError::QubitMismatch { expected: pj.n_qubits(), found: pk.n_qubits() });
    }
    dissipator_dense(&pj.to_matrix()?, &pk.to_matrix()?)
}

/// `Σ_jk β_jk D[P_j, P_k]` over the given index set.
pub fn dissipator_from_beta(index: &PauliIndexSet, beta: &CMatrix) -> Result<SuperOperator> {
    let n = index.n_qubits();
    limits::check_qubits(n)?;
    let m = index.len();
    if beta.shape() != (m, m) {
        return Err(ForgeError::Dimension(format!("β is not {m}x{m}")));
    }
    let d = 1usize << n;
    let mats: Vec<CMatrix> = index
        .elements()
        .iter()
        .map(|p| p.to_matrix())
        .collect::<Result<_>>()?;
    let mut out = CMatrix::zeros(d * d, d * d);
    let mut k_op = CMatrix::zeros(d, d);
    for j in 0..m {
        for k in 0..m {
            let b = beta[(j, k)];
            if b == ZERO {
                continue;
            }
            let (pj, pk) = (&mats[j], &mats[k]);
            // P_j ⊗ conj(P_k): both are monomial, one nonzero per column
            for c1 in 0..d {
                let (r1, v1) = monomial_entry(pj, c1);
                for c2 in 0..d {
                    let (r2, v2) = monomial_entry(pk, c2);
                    out[(r1 * d + r2, c1 * d + c2)] += b * v1 * v2.conj();
                }
            }
            k_op += (pk * pj) * b;
        }
    }
    let id = CMatrix::identity(d, d);
    let half = Complex64::new(0.5, 0.0);
    out -= k_op.kronecker(&id) * half;
    out -= id.kronecker(&k_op.transpose()) * half;
    Ok(SuperOperator::from_parts(n, out))
}

fn monomial_entry(p: &CMatrix, col: usize) -> (usize, Complex64) {
    let column = p.column(col);
    let (row, v) = column
        .iter()
        .enumerate()
        .find(|(_, v)| **v != ZERO)
        .expect("Pauli matrix column is nonzero");
    (row, *v)
}

/// Eigenvalues via complex Schur decomposition.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    let schur = Schur::try_new(m.clone(), 1e-15, 10_000)
        .ok_or_else(|| ForgeError::NonConvergence("Schur decomposition".into()))?;
    let (_, t) = schur.unpack();
    Ok(t.diagonal().iter().copied().collect())
}

/// Eigenvalue magnitude below which the logarithm is declared singular.
pub const LOGM_SINGULAR_TOL: f64 = 1e-14;
/// Imaginary part below which a negative eigenvalue sits on the branch cut.
pub const LOGM_BRANCH_TOL: f64 = 1e-12;

/// Principal matrix logarithm by inverse scaling and squaring.
///
/// Repeated square roots bring the matrix within 0.25 of the identity, where
/// `log A = 2 atanh((A − I)(A + I)⁻¹)` converges quickly.
pub fn logm(a: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(ForgeError::Dimension("logm of a non-square matrix".into()));
    }
    for ev in eigenvalues(a)? {
        if ev.norm() < LOGM_SINGULAR_TOL {
            return Err(ForgeError::Singular(ev.norm()));
        }
        if ev.re < 0.0 && ev.im.abs() <= LOGM_BRANCH_TOL {
            return Err(ForgeError::BranchCut(format!("{ev}")));
        }
    }
    let dim = a.nrows();
    let id = CMatrix::identity(dim, dim);
    let mut x = a.clone();
    let mut roots = 0u32;
    while (&x - &id).norm() > 0.25 {
        if roots == 60 {
            return Err(ForgeError::NonConvergence("logm square-root scaling".into()));
        }
        x = sqrtm_db(&x)?;
        roots += 1;
    }
    let num = &x - &id;
    let den = (&x + &id)
        .try_inverse()
        .ok_or(ForgeError::Singular(0.0))?;
    let z = num * den;
    let z2 = &z * &z;
    let mut term = z.clone();
    let mut sum = z.clone();
    let mut k = 1u32;
    loop {
        term = &term * &z2;
        k += 2;
        let add = &term * Complex64::new(1.0 / k as f64, 0.0);
        let size = add.norm();
        sum += add;
        if size <= 1e-18 * sum.norm().max(1e-300) || k > 201 {
            break;
        }
    }
    Ok(sum * Complex64::new(2f64.powi(roots as i32 + 1), 0.0))
}

/// Principal square root by the Denman–Beavers iteration.
fn sqrtm_db(a: &CMatrix) -> Result<CMatrix> {
    let dim = a.nrows();
    let mut y = a.clone();
    let mut z = CMatrix::identity(dim, dim);
    let half = Complex64::new(0.5, 0.0);
    for _ in 0..100 {
        let yi = y.clone().try_inverse().ok_or(ForgeError::Singular(0.0))?;
        let zi = z.clone().try_inverse().ok_or(ForgeError::Singular(0.0))?;
        let y_next = (&y + zi) * half;
        let z_next = (&z + yi) * half;
        let change = (&y_next - &y).norm();
        y = y_next;
        z = z_next;
        if change <= 1e-15 * y.norm() {
            return Ok(y);
        }
    }
    Err(ForgeError::NonConvergence("matrix square root".into()))
}

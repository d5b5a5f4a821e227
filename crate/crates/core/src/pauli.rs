//! Multi-qubit Pauli strings in symplectic form.
//!
//! Qubit 0 is the leftmost tensor factor and the leftmost label character.
//! Canonical ordering is lexicographic over `I < X < Y < Z` with qubit 0 most
//! significant, so `ii < ix < iy < iz < xi < ...`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{ForgeError, Result};
use crate::limits;

/// Largest qubit count representable by the bit masks.
pub const MAX_PAULI_QUBITS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
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

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_char(c: char) -> Option<Pauli> {
        match c.to_ascii_lowercase() {
            'i' => Some(Pauli::I),
            'x' => Some(Pauli::X),
            'y' => Some(Pauli::Y),
            'z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn to_char(self) -> char {
        ['i', 'x', 'y', 'z'][self.code()]
    }
}

/// `i^phase` times a tensor product of single-qubit Paulis.
///
/// Bit `q` of `x`/`z` refers to qubit `q`; a qubit with both bits set is `Y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
    phase: u8,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        assert!(n <= MAX_PAULI_QUBITS, "at most {MAX_PAULI_QUBITS} qubits");
        PauliString { n, x: 0, z: 0, phase: 0 }
    }

    /// Single-qubit Pauli `p` on qubit `q`, identity elsewhere.
    pub fn single(n: usize, q: usize, p: Pauli) -> Self {
        assert!(q < n, "qubit {q} out of range for {n} qubits");
        let mut s = Self::identity(n);
        s.set(q, p);
        s
    }

    pub fn from_paulis(paulis: &[Pauli]) -> Self {
        let mut s = Self::identity(paulis.len());
        for (q, &p) in paulis.iter().enumerate() {
            s.set(q, p);
        }
        s
    }

    /// Parses labels like `"ixz"`, `"-XY"` or `"+iZZ"` (case-insensitive).
    pub fn from_label(label: &str) -> Result<Self> {
        let bad = || ForgeError::InvalidLabel(label.to_string());
        let lower = label.trim().to_ascii_lowercase();
        let (phase, body) = if let Some(rest) = lower.strip_prefix("+i") {
            (1, rest)
        } else if let Some(rest) = lower.strip_prefix("-i") {
            (3, rest)
        } else if let Some(rest) = lower.strip_prefix('-') {
            (2, rest)
        } else if let Some(rest) = lower.strip_prefix('+') {
            (0, rest)
        } else {
            (0, lower.as_str())
        };
        if body.is_empty() || body.len() > MAX_PAULI_QUBITS {
            return Err(bad());
        }
        let paulis = body
            .chars()
            .map(Pauli::from_char)
            .collect::<Option<Vec<_>>>()
            .ok_or_else(bad)?;
        let mut s = Self::from_paulis(&paulis);
        s.phase = phase;
        Ok(s)
    }

    /// Inverse of [`PauliString::index`].
    pub fn from_index(n: usize, index: usize) -> Self {
        assert!(n <= 31, "index form supports at most 31 qubits");
        assert!(index < 1usize << (2 * n), "index {index} out of range");
        let mut s = Self::identity(n);
        for q in 0..n {
            let code = (index >> (2 * (n - 1 - q))) & 3;
            s.set(q, Pauli::ALL[code]);
        }
        s
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    /// Exponent of the `i^phase` prefactor.
    pub fn phase(&self) -> u8 {
        self.phase
    }

    pub fn phase_factor(&self) -> Complex64 {
        match self.phase {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    /// The same string with the phase stripped.
    pub fn unsigned(&self) -> Self {
        PauliString { phase: 0, ..*self }
    }

    pub fn get(&self, q: usize) -> Pauli {
        Pauli::from_bits(self.x >> q & 1 == 1, self.z >> q & 1 == 1)
    }

    pub fn set(&mut self, q: usize, p: Pauli) {
        let (bx, bz) = p.bits();
        let m = 1u64 << q;
        self.x = if bx { self.x | m } else { self.x & !m };
        self.z = if bz { self.z | m } else { self.z & !m };
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn is_hermitian(&self) -> bool {
        self.phase % 2 == 0
    }

    /// Number of non-identity factors.
    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    /// Qubits carrying a non-identity factor, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&q| (self.x | self.z) >> q & 1 == 1).collect()
    }

    /// Position in the canonical ordering.
    pub fn index(&self) -> usize {
        (0..self.n).fold(0, |acc, q| acc * 4 + self.get(q).code())
    }

    /// Lowercase label without phase, qubit 0 first.
    pub fn label(&self) -> String {
        (0..self.n).map(|q| self.get(q).to_char()).collect()
    }

    /// Symplectic inner product: 0 if the strings commute, 1 otherwise.
    pub fn symplectic_product(&self, other: &PauliString) -> u32 {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) & 1
    }

    pub fn commutes(&self, other: &PauliString) -> bool {
        self.symplectic_product(other) == 0
    }

    pub fn anticommutes(&self, other: &PauliString) -> bool {
        !self.commutes(other)
    }

    /// Operator product `self · other`, tracking the phase.
    pub fn product(&self, other: &PauliString) -> Result<PauliString> {
        if self.n != other.n {
            return Err(ForgeError::QubitMismatch { expected: self.n, found: other.n });
        }
        let (x1, z1, x2, z2) = (self.x, self.z, other.x, other.z);
        let y1 = x1 & z1;
        let xo1 = x1 & !z1;
        let zo1 = z1 & !x1;
        let y2 = x2 & z2;
        let xo2 = x2 & !z2;
        let zo2 = z2 & !x2;
        // XY = iZ, YZ = iX, ZX = iY and the reversed orders carry -i
        let plus = (xo1 & y2).count_ones() + (y1 & zo2).count_ones() + (zo1 & xo2).count_ones();
        let minus = (y1 & xo2).count_ones() + (xo1 & zo2).count_ones() + (zo1 & y2).count_ones();
        let phase = (self.phase as u32 + other.phase as u32 + plus + 3 * minus) % 4;
        Ok(PauliString { n: self.n, x: x1 ^ x2, z: z1 ^ z2, phase: phase as u8 })
    }

    /// Dense `2^n × 2^n` matrix in the computational basis, qubit 0 most significant.
    pub fn to_matrix(&self) -> Result<DMatrix<Complex64>> {
        limits::check_qubits(self.n)?;
        let d = 1usize << self.n;
        let (xm, zm, ny) = self.basis_masks();
        let base = self.phase_factor() * i_pow(ny);
        let mut m = DMatrix::zeros(d, d);
        for col in 0..d {
            let sign = if (col as u64 & zm).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            m[(col ^ xm as usize, col)] = base * sign;
        }
        Ok(m)
    }

    /// X/Z masks in computational-basis bit order plus the number of `Y` factors.
    pub(crate) fn basis_masks(&self) -> (u64, u64, u32) {
        let mut xm = 0u64;
        let mut zm = 0u64;
        for q in 0..self.n {
            let bit = 1u64 << (self.n - 1 - q);
            if self.x >> q & 1 == 1 {
                xm |= bit;
            }
            if self.z >> q & 1 == 1 {
                zm |= bit;
            }
        }
        (xm, zm, (self.x & self.z).count_ones())
    }

    /// Concatenates `self` (leading qubits) with `other` (trailing qubits).
    pub fn tensor(&self, other: &PauliString) -> PauliString {
        assert!(self.n + other.n <= MAX_PAULI_QUBITS);
        PauliString {
            n: self.n + other.n,
            x: self.x | other.x << self.n,
            z: self.z | other.z << self.n,
            phase: (self.phase + other.phase) % 4,
        }
    }

    /// Places the factors of `self` on qubits `targets[0], targets[1], ...` of an
    /// `n`-qubit string.
    pub fn embed(&self, n: usize, targets: &[usize]) -> Result<PauliString> {
        if targets.len() != self.n {
            return Err(ForgeError::QubitMismatch { expected: self.n, found: targets.len() });
        }
        let mut out = PauliString::identity(n);
        for (q, &t) in targets.iter().enumerate() {
            if t >= n {
                return Err(ForgeError::Layout(format!("qubit {t} out of range for {n} qubits")));
            }
            out.set(t, self.get(q));
        }
        out.phase = self.phase;
        Ok(out)
    }
}

fn i_pow(k: u32) -> Complex64 {
    PauliString { n: 0, x: 0, z: 0, phase: (k % 4) as u8 }.phase_factor()
}

impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n
            .cmp(&other.n)
            .then_with(|| {
                for q in 0..self.n {
                    let c = self.get(q).cmp(&other.get(q));
                    if c != Ordering::Equal {
                        return c;
                    }
                }
                Ordering::Equal
            })
            .then(self.phase.cmp(&other.phase))
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = ["", "+i", "-", "-i"][self.phase as usize];
        write!(f, "{prefix}{}", self.label())
    }
}

impl FromStr for PauliString {
    type Err = ForgeError;

    fn from_str(s: &str) -> Result<Self> {
        PauliString::from_label(s)
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        PauliString::from_label(&s).map_err(serde::de::Error::custom)
    }
}

/// All `4^n` Pauli strings in canonical order.
pub fn all_paulis(n: usize) -> impl Iterator<Item = PauliString> {
    assert!(n <= 31);
    (0..1usize << (2 * n)).map(move |i| PauliString::from_index(n, i))
}

/// Ordered, duplicate-free list of unsigned Pauli strings on a common register.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PauliIndexSet {
    n: usize,
    elements: Vec<PauliString>,
}

impl PauliIndexSet {
    pub fn new(n: usize, elements: Vec<PauliString>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for p in &elements {
            if p.n_qubits() != n {
                return Err(ForgeError::QubitMismatch { expected: n, found: p.n_qubits() });
            }
            if p.phase() != 0 {
                return Err(ForgeError::InvalidLabel(format!("{p} carries a phase")));
            }
            if !seen.insert(*p) {
                return Err(ForgeError::InvalidLabel(format!("{p} listed twice")));
            }
        }
        Ok(PauliIndexSet { n, elements })
    }

    pub fn from_labels(labels: &[&str]) -> Result<Self> {
        let elements = labels
            .iter()
            .map(|l| PauliString::from_label(l))
            .collect::<Result<Vec<_>>>()?;
        let n = elements.first().map_or(0, |p| p.n_qubits());
        Self::new(n, elements)
    }

    /// Every Pauli string on `n` qubits, optionally without the identity.
    pub fn all(n: usize, include_identity: bool) -> Self {
        let elements = all_paulis(n)
            .filter(|p| include_identity || !p.is_identity())
            .collect();
        PauliIndexSet { n, elements }
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[PauliString] {
        &self.elements
    }

    pub fn get(&self, i: usize) -> PauliString {
        self.elements[i]
    }

    pub fn position(&self, p: &PauliString) -> Option<usize> {
        self.elements.iter().position(|e| e == p)
    }

    pub fn contains_identity(&self) -> bool {
        self.elements.iter().any(|p| p.is_identity())
    }

    /// Elements of `self` followed by the new elements of `other`.
    pub fn union(&self, other: &PauliIndexSet) -> Result<PauliIndexSet> {
        if self.n != other.n {
            return Err(ForgeError::QubitMismatch { expected: self.n, found: other.n });
        }
        let mut elements = self.elements.clone();
        for p in &other.elements {
            if !elements.contains(p) {
                elements.push(*p);
            }
        }
        Ok(PauliIndexSet { n: self.n, elements })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_product(a: &PauliString, b: &PauliString) -> DMatrix<Complex64> {
        a.to_matrix().unwrap() * b.to_matrix().unwrap()
    }

    #[test]
    fn single_qubit_matrices() {
        let y = PauliString::from_label("y").unwrap().to_matrix().unwrap();
        assert_eq!(y[(0, 1)], Complex64::new(0.0, -1.0));
        assert_eq!(y[(1, 0)], Complex64::new(0.0, 1.0));
        let z = PauliString::from_label("z").unwrap().to_matrix().unwrap();
        assert_eq!(z[(1, 1)], Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn qubit_zero_is_most_significant() {
        // Z on qubit 0 flips the sign of the upper half of the basis
        let zi = PauliString::from_label("zi").unwrap().to_matrix().unwrap();
        assert_eq!(zi[(1, 1)].re, 1.0);
        assert_eq!(zi[(2, 2)].re, -1.0);
        let xi = PauliString::from_label("xi").unwrap().to_matrix().unwrap();
        assert_eq!(xi[(2, 0)].re, 1.0);
    }

    #[test]
    fn xy_is_iz() {
        let x = PauliString::from_label("x").unwrap();
        let y = PauliString::from_label("y").unwrap();
        assert_eq!(x.product(&y).unwrap(), PauliString::from_label("+iz").unwrap());
        assert_eq!(y.product(&x).unwrap(), PauliString::from_label("-iz").unwrap());
    }

    #[test]
    fn products_match_dense_two_qubit() {
        for a in all_paulis(2) {
            for b in all_paulis(2) {
                let p = a.product(&b).unwrap();
                let diff = (p.to_matrix().unwrap() - dense_product(&a, &b)).norm();
                assert!(diff < 1e-14, "{a} * {b}");
            }
        }
    }

    #[test]
    fn index_roundtrip_and_order() {
        let labels: Vec<String> = all_paulis(2).map(|p| p.label()).collect();
        assert_eq!(&labels[..5], &["ii", "ix", "iy", "iz", "xi"]);
        for (i, p) in all_paulis(3).enumerate() {
            assert_eq!(p.index(), i);
            assert_eq!(PauliString::from_index(3, i), p);
        }
    }

    #[test]
    fn rejects_bad_labels() {
        assert!(PauliString::from_label("xa").is_err());
        assert!(PauliString::from_label("").is_err());
        assert!(PauliString::from_label("-").is_err());
    }

    #[test]
    fn qubit_mismatch_is_an_error() {
        let a = PauliString::from_label("x").unwrap();
        let b = PauliString::from_label("xx").unwrap();
        assert!(matches!(a.product(&b), Err(ForgeError::QubitMismatch { .. })));
    }

    #[test]
    fn embed_places_factors() {
        let p = PauliString::from_label("zx").unwrap();
        assert_eq!(p.embed(4, &[3, 1]).unwrap().label(), "ixiz");
    }

    #[test]
    fn index_set_rejects_duplicates() {
        assert!(PauliIndexSet::from_labels(&["ix", "ix"]).is_err());
        let s = PauliIndexSet::all(2, false);
        assert_eq!(s.len(), 15);
        assert!(!s.contains_identity());
    }
}

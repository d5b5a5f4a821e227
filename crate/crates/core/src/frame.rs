//! Interaction frame of the ideal gate and exact noise channels.
//!
//! With `ρ_I(t) = U(t − τ_s)⁻¹ ρ(t)` and `U(t) = exp(−i[H_g, ·] t)`, the noise
//! generator becomes `L_I(t) = U(t − τ_s)⁻¹ L_noise U(t − τ_s)`. The time shift
//! `τ_s` selects where the noise channel sits relative to the gate:
//! `exp(L τ_g) = U(τ_g − τ_s) · N(τ_s) · U(τ_s)`.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use crate::error::{ForgeError, Result};
use crate::model::{GatePreset, LindbladModel};
use crate::pauli::PauliString;
use crate::superop::{CMatrix, SuperOperator};

/// Absolute tolerance when matching the model's gate Hamiltonian to its preset.
const GATE_MATCH_TOL: f64 = 1e-12;

/// Interaction-frame noise generator for a model driven by a gate preset.
#[derive(Clone, Debug)]
pub struct FramedLindbladian {
    n_qubits: usize,
    tau_g: f64,
    tau_s: f64,
    /// Eigenvectors and eigenvalues of `H_g`.
    vecs: CMatrix,
    energies: Vec<f64>,
    /// `V ⊗ conj(V)`, diagonalizing the gate superoperator.
    w: CMatrix,
    /// Bohr frequencies `E_a − E_b` matching the columns of `w`.
    bohr: Vec<f64>,
    /// Noise generator in the eigenbasis of the gate superoperator.
    noise_eig: CMatrix,
    noise: SuperOperator,
    full: SuperOperator,
}

/// Placement of the noise channel relative to the ideal gate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FramePosition {
    /// `exp(L τ) = U(τ) · N`: noise acts first.
    Left,
    /// `exp(L τ) = N · U(τ)`: noise acts last.
    Right,
    /// Noise at time shift `τ_s` inside the gate.
    Middle(f64),
}

impl FramePosition {
    pub fn time_shift(&self, tau_g: f64) -> f64 {
        match *self {
            FramePosition::Left => 0.0,
            FramePosition::Right => tau_g,
            FramePosition::Middle(t) => t,
        }
    }
}

impl FramedLindbladian {
    /// Builds the frame for `model`, whose gate Hamiltonian must be `gate`'s.
    pub fn new(model: &LindbladModel, gate: &GatePreset, tau_s: f64) -> Result<Self> {
        if model.n_qubits() != gate.n_qubits() {
            return Err(ForgeError::QubitMismatch { expected: gate.n_qubits(), found: model.n_qubits() });
        }
        let tau_g = gate.tau();
        if !(0.0..=tau_g).contains(&tau_s) {
            return Err(ForgeError::Config(format!("time shift {tau_s} outside [0, {tau_g}]")));
        }
        let expected = gate.hamiltonian_terms();
        let keys: std::collections::BTreeSet<&PauliString> =
            expected.keys().chain(model.ideal().keys()).collect();
        for p in keys {
            let a = expected.get(p).copied().unwrap_or(0.0);
            let b = model.ideal().get(p).copied().unwrap_or(0.0);
            if (a - b).abs() > GATE_MATCH_TOL {
                return Err(ForgeError::Layout(format!(
                    "model gate term {p} = {b} differs from preset {} value {a}",
                    gate.kind()
                )));
            }
        }

        let h = model.ideal_hamiltonian()?;
        let eig = SymmetricEigen::new(h);
        let vecs = eig.eigenvectors;
        let energies: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let d = energies.len();
        let w = vecs.kronecker(&vecs.map(|z| z.conj()));
        let bohr = (0..d * d).map(|r| energies[r / d] - energies[r % d]).collect();
        let noise = model.noise_generator()?;
        let noise_eig = w.adjoint() * noise.matrix() * &w;
        let full = model.generator()?;
        Ok(FramedLindbladian {
            n_qubits: model.n_qubits(),
            tau_g,
            tau_s,
            vecs,
            energies,
            w,
            bohr,
            noise_eig,
            noise,
            full,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn tau_g(&self) -> f64 {
        self.tau_g
    }

    pub fn tau_s(&self) -> f64 {
        self.tau_s
    }

    /// Lab-frame noise generator `−i[H_δ, ·] + dissipator`.
    pub fn noise_generator(&self) -> &SuperOperator {
        &self.noise
    }

    /// Full lab-frame generator including the gate.
    pub fn full_generator(&self) -> &SuperOperator {
        &self.full
    }

    /// `L_I(t; τ_s)`.
    pub fn eval(&self, t: f64) -> SuperOperator {
        SuperOperator::from_parts(self.n_qubits, self.eval_matrix(t))
    }

    pub(crate) fn eval_matrix(&self, t: f64) -> CMatrix {
        let s = t - self.tau_s;
        let phases: Vec<Complex64> = self
            .bohr
            .iter()
            .map(|w| Complex64::from_polar(1.0, w * s))
            .collect();
        let rotated = CMatrix::from_fn(self.noise_eig.nrows(), self.noise_eig.ncols(), |r, c| {
            self.noise_eig[(r, c)] * phases[r] * phases[c].conj()
        });
        &self.w * rotated * self.w.adjoint()
    }

    /// `e^{iH_g(t−τ_s)} P e^{−iH_g(t−τ_s)}`.
    pub fn rotate_pauli(&self, p: &PauliString, t: f64) -> Result<CMatrix> {
        let u = self.hilbert_unitary(t - self.tau_s);
        Ok(u.adjoint() * p.to_matrix()? * u)
    }

    /// `e^{−iH_g t}` from the cached eigendecomposition.
    pub fn hilbert_unitary(&self, t: f64) -> CMatrix {
        let phases = nalgebra::DVector::from_iterator(
            self.energies.len(),
            self.energies.iter().map(|e| Complex64::from_polar(1.0, -e * t)),
        );
        &self.vecs * CMatrix::from_diagonal(&phases) * self.vecs.adjoint()
    }

    /// Ideal gate superoperator `U(t)`.
    pub fn gate_superop(&self, t: f64) -> SuperOperator {
        let u = self.hilbert_unitary(t);
        SuperOperator::unitary(&u).expect("gate unitary has qubit dimension")
    }

    /// Lab-frame evolution `exp(L τ_g)`.
    pub fn full_channel(&self) -> SuperOperator {
        self.full.scale(self.tau_g).expm()
    }
}

/// RK4 settings for the middle-position noise channel.
#[derive(Clone, Copy, Debug)]
pub struct IntegrationOptions {
    pub steps: usize,
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions { steps: 1024, tol: 1e-9, max_steps: 1 << 16 }
    }
}

/// Exact noise channel at the given position.
///
/// Left and right use `exp(L τ_g)` and the ideal gate; the middle position
/// integrates `dN/dt = L_I(t; τ_s) N` with RK4, halving the step until the
/// result moves by at most `opts.tol`.
pub fn exact_noise(
    model: &LindbladModel,
    gate: &GatePreset,
    position: FramePosition,
    opts: IntegrationOptions,
) -> Result<SuperOperator> {
    let tau = gate.tau();
    let frame = FramedLindbladian::new(model, gate, position.time_shift(tau))?;
    let full = frame.full_channel();
    let u_inv = frame.gate_superop(-tau);
    match position {
        FramePosition::Left => u_inv.compose(&full),
        FramePosition::Right => full.compose(&u_inv),
        FramePosition::Middle(_) => integrate_frame(&frame, opts),
    }
}

/// Time-ordered exponential of `L_I` over `[0, τ_g]` by RK4 with step halving.
pub fn integrate_frame(frame: &FramedLindbladian, opts: IntegrationOptions) -> Result<SuperOperator> {
    let mut steps = opts.steps.max(1);
    let mut coarse = rk4_propagator(frame, steps);
    loop {
        if steps * 2 > opts.max_steps {
            return Err(ForgeError::NonConvergence(format!(
                "interaction-frame integration did not settle within {} steps",
                opts.max_steps
            )));
        }
        steps *= 2;
        let fine = rk4_propagator(frame, steps);
        if (&fine - &coarse).norm() <= opts.tol {
            return Ok(SuperOperator::from_parts(frame.n_qubits, fine));
        }
        coarse = fine;
    }
}

fn rk4_propagator(frame: &FramedLindbladian, steps: usize) -> CMatrix {
    let h = frame.tau_g / steps as f64;
    let dim = frame.noise_eig.nrows();
    let mut n = CMatrix::identity(dim, dim);
    let hc = |x: f64| Complex64::new(x, 0.0);
    let mut l0 = frame.eval_matrix(0.0);
    for i in 0..steps {
        let t = i as f64 * h;
        let lm = frame.eval_matrix(t + 0.5 * h);
        let l1 = frame.eval_matrix(t + h);
        let k1 = &l0 * &n;
        let k2 = &lm * (&n + &k1 * hc(0.5 * h));
        let k3 = &lm * (&n + &k2 * hc(0.5 * h));
        let k4 = &l1 * (&n + &k3 * hc(h));
        n += (k1 + (k2 + k3) * hc(2.0) + k4) * hc(h / 6.0);
        l0 = l1;
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{phase_noise_hamiltonian, DissipatorMatrix, GateKind};
    use crate::superop;

    fn cx_model() -> (LindbladModel, GatePreset) {
        let gate = GatePreset::from_theta(GateKind::Cx, 2, 0.9, 1.3).unwrap();
        let noise = phase_noise_hamiltonian(&[
            (PauliString::from_label("iz").unwrap(), 0.03),
            (PauliString::from_label("zz").unwrap(), -0.02),
            (PauliString::from_label("xy").unwrap(), 0.01),
        ])
        .unwrap();
        let diss = DissipatorMatrix::amplitude_damping(2, 1, 0.02)
            .unwrap()
            .sum(&DissipatorMatrix::pure_dephasing(2, 0, 0.03).unwrap())
            .unwrap();
        let model = LindbladModel::for_gate(&gate)
            .with_noise(noise)
            .unwrap()
            .with_dissipator(diss)
            .unwrap();
        (model, gate)
    }

    #[test]
    fn frame_generator_matches_rotated_operators() {
        let (model, gate) = cx_model();
        let frame = FramedLindbladian::new(&model, &gate, 0.2).unwrap();
        let t = 0.55;
        let mut h = CMatrix::zeros(4, 4);
        for (p, c) in model.noise() {
            h += frame.rotate_pauli(p, t).unwrap() * Complex64::new(*c, 0.0);
        }
        let mut expected = superop::hamiltonian_generator(&h).unwrap();
        let d = model.dissipator();
        for j in 0..d.index().len() {
            for k in 0..d.index().len() {
                let b = d.beta()[(j, k)];
                if b.norm() == 0.0 {
                    continue;
                }
                let pj = frame.rotate_pauli(&d.index().get(j), t).unwrap();
                let pk = frame.rotate_pauli(&d.index().get(k), t).unwrap();
                let term = superop::dissipator_dense(&pj, &pk).unwrap();
                expected = expected
                    .add(&SuperOperator::from_parts(2, term.matrix() * b))
                    .unwrap();
            }
        }
        assert!(frame.eval(t).distance(&expected).unwrap() < 1e-13);
    }

    #[test]
    fn frame_generator_matches_conjugation_by_expm() {
        let (model, gate) = cx_model();
        let frame = FramedLindbladian::new(&model, &gate, 0.0).unwrap();
        let t = 0.4;
        let u = model.ideal_generator().unwrap().scale(t).expm();
        let expected = u
            .inverse()
            .unwrap()
            .compose(&model.noise_generator().unwrap())
            .unwrap()
            .compose(&u)
            .unwrap();
        assert!(frame.eval(t).distance(&expected).unwrap() < 1e-12);
    }

    #[test]
    fn left_and_right_are_related_by_the_gate() {
        let (model, gate) = cx_model();
        let opts = IntegrationOptions::default();
        let left = exact_noise(&model, &gate, FramePosition::Left, opts).unwrap();
        let right = exact_noise(&model, &gate, FramePosition::Right, opts).unwrap();
        let frame = FramedLindbladian::new(&model, &gate, 0.0).unwrap();
        let u = frame.gate_superop(gate.tau());
        let lhs = u.compose(&left).unwrap();
        let rhs = right.compose(&u).unwrap();
        assert!(lhs.distance(&rhs).unwrap() < 1e-12);
    }

    #[test]
    fn integrated_left_matches_closed_form() {
        let (model, gate) = cx_model();
        let opts = IntegrationOptions::default();
        let left = exact_noise(&model, &gate, FramePosition::Left, opts).unwrap();
        let frame = FramedLindbladian::new(&model, &gate, 0.0).unwrap();
        let integrated = integrate_frame(&frame, opts).unwrap();
        assert!(left.distance(&integrated).unwrap() < 1e-9);
    }

    #[test]
    fn rejects_mismatched_gate() {
        let (model, _) = cx_model();
        let other = GatePreset::from_theta(GateKind::Cz, 2, 0.9, 1.3).unwrap();
        assert!(matches!(
            FramedLindbladian::new(&model, &other, 0.0),
            Err(ForgeError::Layout(_))
        ));
    }
}

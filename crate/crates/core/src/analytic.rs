//! Closed-form Pauli-Lindblad rates for gates with amplitude damping, pure
//! dephasing, coherent phase noise and ZZ crosstalk, to leading order in the
//! noise rates.
//!
//! Two-qubit labels put the left qubit first: for CX that is the control. All
//! rates are absolute (same units as `omega`), and `θ = ω τ`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};
use crate::pauli::PauliString;
use crate::twirl::PLModel;

/// Gate on the noisy pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairGate {
    /// Idle for `τ = θ/ω`.
    Identity,
    Cz,
    Cx,
}

/// Gate pair for four-qubit crosstalk between qubits 1 and 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadGate {
    Identity,
    CzCz,
    /// CX(0→1) ⊗ CX(2→3): crosstalk between a target and a control.
    CxCx,
    /// CX(0→1) ⊗ CX(3→2): crosstalk between two targets.
    CxXc,
}

/// Placement of the spectator in three-qubit crosstalk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectatorLayout {
    /// Spectator on qubit 0 coupled by `ZZI` to the control (qubit 1) of a gate on (1, 2).
    Control,
    /// Spectator on qubit 2 coupled by `IZZ` to the target (qubit 1) of a gate on (0, 1).
    Target,
}

struct Builder {
    n: usize,
    lambdas: BTreeMap<PauliString, f64>,
}

impl Builder {
    fn new(n: usize) -> Self {
        Builder { n, lambdas: BTreeMap::new() }
    }

    fn set(&mut self, label: &str, v: f64) -> &mut Self {
        debug_assert_eq!(label.len(), self.n);
        if v != 0.0 {
            let p = PauliString::from_label(label).expect("table labels are valid");
            *self.lambdas.entry(p).or_insert(0.0) += v;
        }
        self
    }

    fn build(self) -> PLModel {
        PLModel::new(self.n, self.lambdas).expect("table labels are non-identity")
    }
}

fn check_omega(theta: f64, omega: f64) -> Result<()> {
    if !(omega.is_finite() && omega > 0.0) || !theta.is_finite() {
        return Err(ForgeError::Config(format!("need finite θ and positive ω, got θ={theta}, ω={omega}")));
    }
    Ok(())
}

fn check_rates(rates: &[f64]) -> Result<()> {
    match rates.iter().find(|r| !(**r >= 0.0)) {
        Some(r) => Err(ForgeError::NegativeRate(*r)),
        None => Ok(()),
    }
}

/// Amplitude damping at rates `beta_l` (left qubit) and `beta_r` (right qubit).
pub fn ad_lambdas(gate: PairGate, theta: f64, beta_l: f64, beta_r: f64, omega: f64) -> Result<PLModel> {
    check_omega(theta, omega)?;
    check_rates(&[beta_l, beta_r])?;
    let t = theta;
    let (s2, s4) = ((2.0 * t).sin(), (4.0 * t).sin());
    let (l, r) = (beta_l / omega, beta_r / omega);
    let mut b = Builder::new(2);
    match gate {
        PairGate::Identity => {
            b.set("ix", t / 4.0 * r).set("iy", t / 4.0 * r);
            b.set("xi", t / 4.0 * l).set("yi", t / 4.0 * l);
        }
        PairGate::Cz => {
            let plus = (2.0 * t + s2) / 16.0;
            let minus = (2.0 * t - s2) / 16.0;
            b.set("ix", plus * r).set("iy", plus * r);
            b.set("xi", plus * l).set("yi", plus * l);
            b.set("xz", minus * l).set("yz", minus * l);
            b.set("zx", minus * r).set("zy", minus * r);
        }
        PairGate::Cx => {
            b.set("ix", t / 4.0 * r);
            b.set("iy", (12.0 * t + 8.0 * s2 + s4) / 128.0 * r);
            b.set("iz", (4.0 * t - s4) / 128.0 * r);
            b.set("xi", (2.0 * t + s2) / 16.0 * l).set("yi", (2.0 * t + s2) / 16.0 * l);
            b.set("xx", (2.0 * t - s2) / 16.0 * l).set("yx", (2.0 * t - s2) / 16.0 * l);
            b.set("zy", (12.0 * t - 8.0 * s2 + s4) / 128.0 * r);
            b.set("zz", (4.0 * t - s4) / 128.0 * r);
        }
    }
    Ok(b.build())
}

/// Pure dephasing at rates `beta_l` and `beta_r`.
pub fn pd_lambdas(gate: PairGate, theta: f64, beta_l: f64, beta_r: f64, omega: f64) -> Result<PLModel> {
    check_omega(theta, omega)?;
    check_rates(&[beta_l, beta_r])?;
    let t = theta;
    let (s2, s4) = ((2.0 * t).sin(), (4.0 * t).sin());
    let (l, r) = (beta_l / omega, beta_r / omega);
    let mut b = Builder::new(2);
    match gate {
        PairGate::Identity | PairGate::Cz => {
            b.set("iz", t / 2.0 * r).set("zi", t / 2.0 * l);
        }
        PairGate::Cx => {
            b.set("iy", (4.0 * t - s4) / 64.0 * r);
            b.set("zy", (4.0 * t - s4) / 64.0 * r);
            b.set("iz", (12.0 * t + 8.0 * s2 + s4) / 64.0 * r);
            b.set("zi", t / 2.0 * l);
            b.set("zz", (12.0 * t - 8.0 * s2 + s4) / 64.0 * r);
        }
    }
    Ok(b.build())
}

/// Coherent phase noise `(δ_iz IZ + δ_zi ZI + δ_zz ZZ)/2`.
pub fn phase_lambdas(
    gate: PairGate,
    theta: f64,
    delta_iz: f64,
    delta_zi: f64,
    delta_zz: f64,
    omega: f64,
) -> Result<PLModel> {
    check_omega(theta, omega)?;
    let t = theta;
    let s2 = (2.0 * t).sin();
    let w2 = omega * omega;
    let mut b = Builder::new(2);
    match gate {
        PairGate::Identity | PairGate::Cz => {
            let c = t * t / (4.0 * w2);
            b.set("iz", c * delta_iz * delta_iz);
            b.set("zi", c * delta_zi * delta_zi);
            b.set("zz", c * delta_zz * delta_zz);
        }
        PairGate::Cx => {
            let (sum, diff) = (delta_iz + delta_zz, delta_iz - delta_zz);
            let y = t.sin().powi(4) / 16.0 * diff * diff / w2;
            b.set("iy", y).set("zy", y);
            b.set("iz", (2.0 * t * sum + s2 * diff).powi(2) / (64.0 * w2));
            b.set("zz", (2.0 * t * sum - s2 * diff).powi(2) / (64.0 * w2));
            b.set("zi", t * t * delta_zi * delta_zi / (4.0 * w2));
        }
    }
    Ok(b.build())
}

/// `ZZ` crosstalk of rate `delta` between a spectator and a gated pair.
pub fn xtalk3_lambdas(
    layout: SpectatorLayout,
    gate: PairGate,
    theta: f64,
    delta: f64,
    omega: f64,
) -> Result<PLModel> {
    check_omega(theta, omega)?;
    let t = theta;
    let s2 = (2.0 * t).sin();
    let c = delta * delta / (omega * omega);
    let mut b = Builder::new(3);
    match (layout, gate) {
        (SpectatorLayout::Control, _) | (SpectatorLayout::Target, PairGate::Identity | PairGate::Cz) => {
            let label = if layout == SpectatorLayout::Control { "zzi" } else { "izz" };
            b.set(label, t * t / 4.0 * c);
        }
        (SpectatorLayout::Target, PairGate::Cx) => {
            let y = t.sin().powi(4) / 16.0 * c;
            b.set("iyz", y).set("zyz", y);
            b.set("izz", (2.0 * t + s2).powi(2) / 64.0 * c);
            b.set("zzz", (2.0 * t - s2).powi(2) / 64.0 * c);
        }
    }
    Ok(b.build())
}

/// `IZZI` crosstalk of rate `delta` between two gated pairs on (0, 1) and (2, 3).
pub fn xtalk4_lambdas(gate: QuadGate, theta: f64, delta: f64, omega: f64) -> Result<PLModel> {
    check_omega(theta, omega)?;
    let t = theta;
    let (s, s2, s4, c2) = (t.sin(), (2.0 * t).sin(), (4.0 * t).sin(), (2.0 * t).cos());
    let c = delta * delta / (omega * omega);
    let mut b = Builder::new(4);
    match gate {
        QuadGate::Identity | QuadGate::CzCz => {
            b.set("izzi", t * t / 4.0 * c);
        }
        QuadGate::CxCx => {
            let y = s.powi(4) / 16.0 * c;
            b.set("iyzi", y).set("zyzi", y);
            b.set("izzi", (2.0 * t + s2).powi(2) / 64.0 * c);
            b.set("zzzi", (2.0 * t - s2).powi(2) / 64.0 * c);
        }
        QuadGate::CxXc => {
            let a = (4.0 * t - s4).powi(2) / 4096.0 * c;
            let bb = s.powi(4) * (3.0 + c2).powi(2) / 256.0 * c;
            let cc = s.powi(8) / 64.0 * c;
            for l in ["iyyi", "iyyz", "izzz", "zyyi", "zyyz", "zzzi"] {
                b.set(l, a);
            }
            for l in ["iyzi", "izyi", "izyz", "zyzi"] {
                b.set(l, bb);
            }
            for l in ["iyzz", "zyzz", "zzyi", "zzyz"] {
                b.set(l, cc);
            }
            b.set("izzi", (12.0 * t + 8.0 * s2 + s4).powi(2) / 4096.0 * c);
            b.set("zzzz", (12.0 * t - 8.0 * s2 + s4).powi(2) / 4096.0 * c);
        }
    }
    Ok(b.build())
}

/// Exact twirled channel of an idle qubit with amplitude damping and pure dephasing.
#[derive(Clone, Debug, PartialEq)]
pub struct IdleChannel {
    /// Pauli error probabilities in the order `I, X, Y, Z`.
    pub probabilities: [f64; 4],
    pub model: PLModel,
}

/// Idle qubit for time `tau`: exact probabilities and rates.
pub fn identity_ad_pd(beta_down: f64, beta_phi: f64, tau: f64) -> Result<IdleChannel> {
    check_rates(&[beta_down, beta_phi, tau])?;
    let e1 = (-beta_down * tau).exp();
    let e2 = (-(beta_down / 2.0 + beta_phi) * tau).exp();
    let pxy = (1.0 - e1) / 4.0;
    let probabilities = [(1.0 + e1 + 2.0 * e2) / 4.0, pxy, pxy, (1.0 + e1 - 2.0 * e2) / 4.0];
    let mut b = Builder::new(1);
    b.set("x", beta_down * tau / 4.0).set("y", beta_down * tau / 4.0);
    b.set("z", beta_phi * tau / 2.0);
    Ok(IdleChannel { probabilities, model: b.build() })
}

/// Twirled channel of a single-qubit `X_θ` rotation with amplitude damping and
/// pure dephasing, to first order in the rates.
#[derive(Clone, Debug, PartialEq)]
pub struct XRotationChannel {
    /// Superoperator entries: the channel matrix is
    /// `[[w1,0,0,w2],[0,w3,w4,0],[0,w4,w3,0],[w2,0,0,w1]]`.
    pub w: [f64; 4],
    pub model: PLModel,
}

pub fn xtheta_ad_pd(theta: f64, beta_down: f64, beta_phi: f64, omega: f64) -> Result<XRotationChannel> {
    check_omega(theta, omega)?;
    check_rates(&[beta_down, beta_phi])?;
    let t = theta;
    let s2 = (2.0 * t).sin();
    let (bd, bp) = (beta_down, beta_phi);
    let num = s2 * (2.0 * bp - bd) - 2.0 * t * (3.0 * bd + 2.0 * bp);
    let w1 = 1.0 + num / (16.0 * omega);
    let w2 = -num / (16.0 * omega);
    let w3 = 1.0 + (s2 * (bd - 2.0 * bp) - 2.0 * t * (5.0 * bd + 6.0 * bp)) / (16.0 * omega);
    let w4 = (2.0 * bp - bd) * (s2 - 2.0 * t) / (16.0 * omega);
    let mut b = Builder::new(1);
    b.set("x", t / 4.0 * bd / omega);
    b.set("y", ((2.0 * t + s2) / 16.0 * bd + (2.0 * t - s2) / 8.0 * bp) / omega);
    b.set("z", ((2.0 * t - s2) / 16.0 * bd + (2.0 * t + s2) / 8.0 * bp) / omega);
    Ok(XRotationChannel { w: [w1, w2, w3, w4], model: b.build() })
}

/// Sum of per-mechanism models on an `n_qubits` register.
pub fn aggregate(n_qubits: usize, parts: &[PLModel]) -> Result<PLModel> {
    parts.iter().try_fold(PLModel::empty(n_qubits), |acc, m| acc.add(m))
}

/// Places a model's qubits `0, 1, …` on `targets` of an `n`-qubit register.
pub fn embed(model: &PLModel, n: usize, targets: &[usize]) -> Result<PLModel> {
    let lambdas = model
        .lambdas
        .iter()
        .map(|(p, v)| Ok((p.embed(n, targets)?, *v)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    PLModel::new(n, lambdas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn get(m: &PLModel, l: &str) -> f64 {
        m.get_label(l).unwrap()
    }

    #[test]
    fn ad_first_order_sum_rule() {
        // Σλ = Σ β τ / 2 for every gate
        for gate in [PairGate::Identity, PairGate::Cz, PairGate::Cx] {
            for theta in [0.3, PI / 4.0, 2.0] {
                let m = ad_lambdas(gate, theta, 0.02, 0.03, 1.5).unwrap();
                let want = (0.02 + 0.03) * theta / 1.5 / 2.0;
                assert!((m.total_rate() - want).abs() < 1e-15, "{gate:?} {theta}");
                let m = pd_lambdas(gate, theta, 0.02, 0.03, 1.5).unwrap();
                assert!((m.total_rate() - want).abs() < 1e-15, "{gate:?} {theta}");
            }
        }
    }

    #[test]
    fn cx_reduces_to_idle_at_small_angle() {
        let m = ad_lambdas(PairGate::Cx, 1e-4, 0.0, 1.0, 1.0).unwrap();
        assert!((get(&m, "ix") - 0.25e-4).abs() < 1e-15);
        assert!((get(&m, "iy") - 0.25e-4).abs() < 1e-12);
        assert!(get(&m, "zy").abs() < 1e-12);
    }

    #[test]
    fn phase_cx_matches_cz_without_target_terms() {
        let cx = phase_lambdas(PairGate::Cx, 0.7, 0.0, 0.3, 0.0, 1.0).unwrap();
        let cz = phase_lambdas(PairGate::Cz, 0.7, 0.0, 0.3, 0.0, 1.0).unwrap();
        assert!(cx.max_deviation(&cz) < 1e-16);
    }

    #[test]
    fn cross_talk_tables_share_the_target_spectator_form() {
        let three = xtalk3_lambdas(SpectatorLayout::Target, PairGate::Cx, 1.1, 0.2, 1.0).unwrap();
        let four = xtalk4_lambdas(QuadGate::CxCx, 1.1, 0.2, 1.0).unwrap();
        let lifted = embed(&three, 4, &[0, 1, 2]).unwrap();
        assert!(lifted.max_deviation(&four) < 1e-16);
        let cxxc = xtalk4_lambdas(QuadGate::CxXc, PI / 4.0, 0.1, 1.0).unwrap();
        assert_eq!(cxxc.support(0.0).len(), 16);
    }

    #[test]
    fn aggregate_of_nothing_is_empty() {
        assert!(aggregate(2, &[]).unwrap().lambdas.is_empty());
        assert!(ad_lambdas(PairGate::Cz, 1.0, -1e-3, 0.0, 1.0).is_err());
    }

    #[test]
    fn idle_probabilities_normalized() {
        let ch = identity_ad_pd(0.1, 0.05, 2.0).unwrap();
        assert!((ch.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        // f_x = p_I + p_X − p_Y − p_Z decays with the coherence
        let [pi, px, py, pz] = ch.probabilities;
        assert!((pi + px - py - pz - (-(0.05 + 0.05) * 2.0f64).exp()).abs() < 1e-15);
        assert_eq!(identity_ad_pd(0.0, 0.0, 1.0).unwrap().probabilities, [1.0, 0.0, 0.0, 0.0]);
        assert!((get(&ch.model, "z") - 0.05).abs() < 1e-16);
    }

    #[test]
    fn x_rotation_weights_are_consistent_with_rates() {
        // f_x = w3 + w4 and f_z = w1 − w2 agree with the rates to first order
        let ch = xtheta_ad_pd(0.9, 1e-3, 2e-3, 1.0).unwrap();
        let [w1, w2, w3, w4] = ch.w;
        let lx = get(&ch.model, "x");
        let ly = get(&ch.model, "y");
        let lz = get(&ch.model, "z");
        assert!((w3 + w4 - (1.0 - 2.0 * (ly + lz))).abs() < 1e-15);
        assert!((w3 - w4 - (1.0 - 2.0 * (lx + lz))).abs() < 1e-15);
        assert!((w1 - w2 - (1.0 - 2.0 * (lx + ly))).abs() < 1e-15);
    }
}

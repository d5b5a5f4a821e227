//! Acceptance checks, one PASS/FAIL line per criterion. Exits nonzero on failure.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use forge_core::analytic::{self, PairGate, QuadGate, SpectatorLayout};
use forge_core::frame::{exact_noise, FramePosition, FramedLindbladian, IntegrationOptions};
use forge_core::magnus::{self, magnus_on_grid};
use forge_core::scenarios::{
    self, GateConfig, Mechanism, Method, Outputs, Preset, Scenario, ScenarioConfig, StrengthMode,
    DEFAULT_SEED, DEFAULT_STRENGTHS,
};
use forge_core::twirl::{self, pauli_twirl, Support, PRUNE_TOL};
use forge_core::{GateKind, GatePreset, PLModel, PauliString, SuperOperator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!("{} [{id}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn label(s: &str) -> PauliString {
    PauliString::from_label(s).unwrap()
}

fn config(kind: GateKind, n: usize, theta: f64, omega: f64, noise: Vec<Mechanism>) -> ScenarioConfig {
    ScenarioConfig {
        name: None,
        n_qubits: n,
        gate: GateConfig { preset: kind, theta: Some(theta), tau: None, omega },
        noise,
        seed: None,
    }
}

fn numerical(c: &ScenarioConfig) -> PLModel {
    scenarios::run_scenario(&Scenario::exact(c.clone())).unwrap().pl
}

fn ad(q: usize, rate: f64) -> Mechanism {
    Mechanism::AmplitudeDamping { qubit: q, rate }
}

fn pd(q: usize, rate: f64) -> Mechanism {
    Mechanism::PureDephasing { qubit: q, rate }
}

fn phase(l: &str, delta: f64) -> Mechanism {
    Mechanism::Coherent { label: label(l), delta }
}

/// Generator `Σ λ_k (P_k · P_k − ·)` of a Pauli-Lindblad model.
fn pl_generator(m: &PLModel) -> SuperOperator {
    let mut g = SuperOperator::zeros(m.n_qubits);
    let id = SuperOperator::identity(m.n_qubits);
    for (p, v) in &m.lambdas {
        let pm = p.to_matrix().unwrap();
        let term = SuperOperator::sandwich(&pm, &pm).unwrap().sub(&id).unwrap();
        g = g.add(&term.scale(*v)).unwrap();
    }
    g
}

fn exact_identity(r: &mut Report) {
    let cases = [(0.3, 0.0, 1.0), (0.2, 0.15, 2.0), (1e-3, 2e-3, 0.5), (0.0, 0.4, 1.0), (0.0, 0.0, 1.0)];
    let mut worst = 0.0f64;
    let mut printed = 0.0f64;
    for (bd, bp, tau) in cases {
        let c = ScenarioConfig {
            gate: GateConfig { preset: GateKind::Identity, theta: None, tau: Some(tau), omega: 1.0 },
            ..config(GateKind::Identity, 1, 1.0, 1.0, vec![ad(0, bd), pd(0, bp)])
        };
        let (gate, model) = c.build().unwrap();
        let noise = exact_noise(&model, &gate, FramePosition::Left, IntegrationOptions::default()).unwrap();
        let twirled = pauli_twirl(&noise);
        let f = twirl::pauli_fidelities(&twirled).unwrap();
        let fit = twirl::fit_pl(&f, &Support::Full, PRUNE_TOL).unwrap().model;
        let want = analytic::identity_ad_pd(bd, bp, tau).unwrap();
        let probs = f.error_probabilities();
        let dp = probs.iter().zip(want.probabilities).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let dl = fit.max_deviation(&want.model);
        let dg = twirled.logm().unwrap().distance(&pl_generator(&want.model)).unwrap();
        worst = worst.max(dp).max(dl).max(dg);
        if bp == 0.0 {
            // weights written as ¼(1 + e^{-βτ} ± e^{-βτ/2}), without the factor 2 on the last term
            let (e1, e2) = ((-bd * tau).exp(), (-bd * tau / 2.0).exp());
            let single = [(1.0 + e1 + e2) / 4.0, (1.0 + e1 - e2) / 4.0];
            printed = printed.max((probs[0] - single[0]).abs()).max((probs[3] - single[1]).abs());
        }
    }
    r.line(
        1,
        "exact identity with damping and dephasing",
        worst <= 1e-10,
        format!("max deviation {worst:.2e} (tol 1e-10); single-e^(-βτ/2) weights off by {printed:.2e}"),
    );
}

struct TableCase {
    name: String,
    config: ScenarioConfig,
    analytic: PLModel,
}

fn table_cases(theta: f64, omega: f64) -> Vec<TableCase> {
    let rate = 1e-3 * omega;
    let mut out = Vec::new();
    let pairs = [(GateKind::Identity, PairGate::Identity), (GateKind::Cz, PairGate::Cz), (GateKind::Cx, PairGate::Cx)];
    for (kind, pg) in pairs {
        for (l, r) in [(rate, 0.0), (0.0, rate), (rate, 0.7 * rate)] {
            out.push(TableCase {
                name: format!("damping {kind} l={l:.0e} r={r:.0e}"),
                config: config(kind, 2, theta, omega, vec![ad(0, l), ad(1, r)]),
                analytic: analytic::ad_lambdas(pg, theta, l, r, omega).unwrap(),
            });
            out.push(TableCase {
                name: format!("dephasing {kind} l={l:.0e} r={r:.0e}"),
                config: config(kind, 2, theta, omega, vec![pd(0, l), pd(1, r)]),
                analytic: analytic::pd_lambdas(pg, theta, l, r, omega).unwrap(),
            });
        }
        let deltas = [[rate, 0.0, 0.0], [0.0, rate, 0.0], [0.0, 0.0, rate], [rate, 0.8 * rate, -0.6 * rate]];
        for [iz, zi, zz] in deltas {
            out.push(TableCase {
                name: format!("phase {kind} ({iz:.1e},{zi:.1e},{zz:.1e})"),
                config: config(kind, 2, theta, omega, vec![phase("iz", iz), phase("zi", zi), phase("zz", zz)]),
                analytic: analytic::phase_lambdas(pg, theta, iz, zi, zz, omega).unwrap(),
            });
        }
    }
    let control = [(GateKind::Identity, PairGate::Identity), (GateKind::ICz, PairGate::Cz), (GateKind::ICx, PairGate::Cx)];
    for (kind, pg) in control {
        out.push(TableCase {
            name: format!("control spectator {kind}"),
            config: config(kind, 3, theta, omega, vec![phase("zzi", rate)]),
            analytic: analytic::xtalk3_lambdas(SpectatorLayout::Control, pg, theta, rate, omega).unwrap(),
        });
    }
    let target = [(GateKind::Identity, PairGate::Identity), (GateKind::CzI, PairGate::Cz), (GateKind::CxI, PairGate::Cx)];
    for (kind, pg) in target {
        out.push(TableCase {
            name: format!("target spectator {kind}"),
            config: config(kind, 3, theta, omega, vec![phase("izz", rate)]),
            analytic: analytic::xtalk3_lambdas(SpectatorLayout::Target, pg, theta, rate, omega).unwrap(),
        });
    }
    let quads = [
        (GateKind::Identity, QuadGate::Identity),
        (GateKind::CzCz, QuadGate::CzCz),
        (GateKind::CxCx, QuadGate::CxCx),
        (GateKind::CxXc, QuadGate::CxXc),
    ];
    for (kind, qg) in quads {
        out.push(TableCase {
            name: format!("adjacent crosstalk {kind}"),
            config: config(kind, 4, theta, omega, vec![phase("izzi", rate)]),
            analytic: analytic::xtalk4_lambdas(qg, theta, rate, omega).unwrap(),
        });
    }
    out
}

fn table_oracle(r: &mut Report) {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst_ratio = 0.0f64;
    let mut count = 0;
    for omega in [1.0, 1.7] {
        for theta in [PI / 8.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0] {
            let rate = 1e-3 * omega;
            let tol = f64::max(1e-8, 10.0 * rate * rate * theta * theta / (omega * omega));
            for case in table_cases(theta, omega) {
                // the four-qubit columns do not depend on ω beyond θ; run them once
                if omega != 1.0 && case.config.n_qubits == 4 {
                    continue;
                }
                let dev = numerical(&case.config).max_deviation(&case.analytic);
                count += 1;
                worst_ratio = worst_ratio.max(dev / tol);
                if dev > tol {
                    failures.push(format!("{} θ={theta:.3} ω={omega}: {dev:.2e} > {tol:.2e}", case.name));
                }
            }
            // single-qubit X rotation
            let c = config(GateKind::X, 1, theta, omega, vec![ad(0, rate), pd(0, 0.6 * rate)]);
            let want = analytic::xtheta_ad_pd(theta, rate, 0.6 * rate, omega).unwrap();
            let (gate, model) = c.build().unwrap();
            let twirled = pauli_twirl(&exact_noise(&model, &gate, FramePosition::Left, IntegrationOptions::default()).unwrap());
            let m = twirled.matrix();
            let w_num = [m[(0, 0)].re, m[(0, 3)].re, m[(1, 1)].re, m[(1, 2)].re];
            let dev_w = w_num.iter().zip(want.w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let dev = numerical(&c).max_deviation(&want.model).max(dev_w);
            count += 1;
            worst_ratio = worst_ratio.max(dev / tol);
            if dev > tol {
                failures.push(format!("x rotation θ={theta:.3} ω={omega}: {dev:.2e} > {tol:.2e}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    for f in &failures {
        println!("    {f}");
    }
    r.line(
        2,
        "closed-form tables against the numerical pipeline",
        failures.is_empty() && secs < 60.0,
        format!("{count} cases, worst deviation/tolerance {worst_ratio:.3}, {secs:.1}s (limit 60s)"),
    );
}

fn sum_rules(r: &mut Report) {
    let theta = PI / 4.0;
    let b = 1e-3;
    let mut worst = 0.0f64;
    for kind in [GateKind::Identity, GateKind::Cz, GateKind::Cx] {
        for dephasing in [false, true] {
            let noise = if dephasing { vec![pd(0, b), pd(1, b)] } else { vec![ad(0, b), ad(1, b)] };
            let total = numerical(&config(kind, 2, theta, 1.0, noise)).total_rate();
            worst = worst.max((total - 2.0 * b * theta / 2.0).abs());
        }
    }
    r.line(3, "sum rules for damping and dephasing", worst <= 1e-7, format!("max |Σλ − Σβτ/2| = {worst:.2e} (tol 1e-7)"));
}

fn convergence(r: &mut Report) {
    let start = Instant::now();
    let t = scenarios::convergence_study(&DEFAULT_STRENGTHS, DEFAULT_SEED).unwrap();
    let monotone = t.monotone_up_to(1e-2);
    let dominates = t.magnus_dominates_up_to(1e-2);
    let o4 = t.distance(1e-3, scenarios::Expansion::Magnus, 4).unwrap();
    let shrinking = t.distance(1e-4, scenarios::Expansion::Magnus, 1).unwrap()
        < t.distance(1e-1, scenarios::Expansion::Magnus, 1).unwrap();
    r.line(
        4,
        "perturbative convergence under dense noise",
        monotone && dominates && o4 <= 1e-9 && shrinking,
        format!(
            "monotone {monotone}, magnus ≤ dyson {dominates}, order-4 distance at 1e-3 {o4:.2e} (tol 1e-9), {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    );
}

fn breakdown(r: &mut Report) {
    let mut worst = 0.0f64;
    let mut notes = Vec::new();
    let mut ok = true;
    for p in [Preset::CzFullNoise, Preset::CxFullNoise, Preset::CxSpectator, Preset::CxXcCrosstalk] {
        let s = Scenario {
            config: p.config(),
            method: Method::Exact,
            outputs: Outputs { breakdown: true, ..Default::default() },
        };
        let report = scenarios::run_scenario(&s).unwrap();
        let b = report.breakdown.unwrap();
        worst = worst.max(b.additivity_defect);
        // crosstalk indices must not be shared with any other mechanism
        let (xt, rest): (Vec<_>, Vec<_>) = b.parts.iter().partition(|part| part.mechanism.starts_with("crosstalk"));
        let other: BTreeSet<PauliString> = rest.iter().flat_map(|part| part.model.lambdas.keys().copied()).collect();
        let xt_support: BTreeSet<PauliString> = xt.iter().flat_map(|part| part.model.lambdas.keys().copied()).collect();
        if !xt_support.is_disjoint(&other) {
            ok = false;
            notes.push(format!("{p}: crosstalk indices overlap other mechanisms"));
        }
        match p {
            Preset::CxSpectator => {
                let n = report.significant.len();
                notes.push(format!("three-qubit support {n}"));
                ok &= n == 17;
            }
            Preset::CxXcCrosstalk => {
                let table: BTreeSet<PauliString> = analytic::embed(
                    &analytic::xtalk4_lambdas(QuadGate::CxXc, PI / 4.0, 0.12, 1.0).unwrap(),
                    4,
                    &[0, 1, 2, 3],
                )
                .unwrap()
                .lambdas
                .into_keys()
                .collect();
                // rates the crosstalk term generates on its own; fourth-order terms stay below 1e-6
                let mut alone = p.config();
                alone.noise.retain(|m| matches!(m, Mechanism::Coherent { label: l, .. } if *l == label("izzi")));
                let attributed: BTreeSet<PauliString> = numerical(&alone).support(1e-6).into_iter().collect();
                notes.push(format!("four-qubit crosstalk indices {}", attributed.len()));
                ok &= table.len() == 16 && attributed == table && xt_support == table;
            }
            _ => {}
        }
    }
    ok &= worst <= 1e-4;
    r.line(5, "breakdown additivity and crosstalk support", ok, format!("max defect {worst:.2e} (tol 1e-4), {}", notes.join(", ")));
}

fn precision(r: &mut Report) {
    let base = Preset::CxFullNoise.config();
    let pts = scenarios::precision_sweep(&base, &[1e-2, 1e-1], StrengthMode::AmplitudeDamping).unwrap();
    let (d2, d1) = (pts[0].max_deviation(), pts[1].max_deviation());
    let zero = scenarios::precision_sweep(&base, &[0.0], StrengthMode::Uniform).unwrap()[0].max_deviation();
    r.line(
        6,
        "precision sweep of the closed forms",
        d2 <= 3e-5 && d1 <= 3e-4 && zero == 0.0,
        format!("deviation {d2:.2e} at 1e-2 (tol 3e-5), {d1:.2e} at 1e-1 (tol 3e-4), {zero:.1e} at zero"),
    );
}

fn random_model(rng: &mut ChaCha8Rng, strength: f64) -> (GatePreset, forge_core::LindbladModel) {
    let kinds = [GateKind::Cx, GateKind::Cz, GateKind::Identity];
    let kind = kinds[rng.gen_range(0..kinds.len())];
    let theta = rng.gen_range(0.2..3.0);
    let omega = rng.gen_range(0.5..2.0);
    let mut noise = vec![Mechanism::Dense { strength, seed: Some(rng.gen()) }];
    for l in ["iz", "xy", "zz"] {
        noise.push(phase(l, rng.gen_range(-strength..strength) * omega));
    }
    config(kind, 2, theta, omega, noise).build().unwrap()
}

fn properties(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut notes = Vec::new();
    let mut ok = true;
    let mut record = |name: &str, pass: bool, value: f64| {
        ok &= pass;
        notes.push(format!("{name} {value:.1e}"));
    };

    let (mut idem, mut round) = (0.0f64, 0.0f64);
    for _ in 0..10 {
        let (gate, model) = random_model(&mut rng, 0.05);
        let c = model.generator().unwrap().scale(gate.tau()).expm();
        let t = pauli_twirl(&c);
        idem = idem.max(pauli_twirl(&t).distance(&t).unwrap());
        let back = SuperOperator::from_ptm(&c.to_ptm().unwrap());
        round = round.max(back.distance(&c).unwrap());
    }
    record("twirl idempotence", idem <= 1e-12, idem);
    record("ptm round trip", round <= 1e-12, round);

    let (gate, model) = random_model(&mut rng, 0.02);
    let frame = FramedLindbladian::new(&model, &gate, 0.0).unwrap();
    let terms = magnus_on_grid(&frame, 4, 256);
    let mut tp = 0.0f64;
    let mut herm = true;
    for order in 1..=4 {
        for ch in [magnus::magnus_channel(&terms, order).unwrap(), magnus::dyson_channel(&terms, order).unwrap()] {
            tp = tp.max(ch.trace_preservation_error());
            herm &= ch.to_ptm().is_ok();
        }
    }
    record("trace preservation of expansions", tp <= 1e-12 && herm, tp);

    let mut scaling = 0.0f64;
    let c1 = config(GateKind::Cx, 2, 1.3, 1.0, vec![Mechanism::Dense { strength: 0.01, seed: Some(5) }]);
    let c2 = config(GateKind::Cx, 2, 1.3, 1.0, vec![Mechanism::Dense { strength: 0.02, seed: Some(5) }]);
    let t1 = {
        let (g, m) = c1.build().unwrap();
        magnus_on_grid(&FramedLindbladian::new(&m, &g, 0.0).unwrap(), 4, 128)
    };
    let t2 = {
        let (g, m) = c2.build().unwrap();
        magnus_on_grid(&FramedLindbladian::new(&m, &g, 0.0).unwrap(), 4, 128)
    };
    for k in 1..=4 {
        let ratio = t2.term(k).frobenius_norm() / t1.term(k).frobenius_norm();
        scaling = scaling.max((ratio / 2f64.powi(k as i32) - 1.0).abs());
    }
    record("term scaling s^k", scaling <= 1e-6, scaling);

    let mut fit_dev = 0.0f64;
    for _ in 0..10 {
        let n = rng.gen_range(1..=3);
        let mut lambdas = std::collections::BTreeMap::new();
        for p in forge_core::pauli::all_paulis(n).skip(1) {
            if rng.gen_bool(0.4) {
                lambdas.insert(p, rng.gen_range(0.0..0.05));
            }
        }
        let m = PLModel::new(n, lambdas).unwrap();
        let ch = twirl::pl_channel(&m).unwrap();
        let fit = twirl::fit_pl(&twirl::pauli_fidelities(&ch).unwrap(), &Support::Full, 0.0).unwrap().model;
        fit_dev = fit_dev.max(fit.max_deviation(&m));
    }
    record("fit of model channel", fit_dev <= 1e-10, fit_dev);

    let rigid = numerical(&config(GateKind::Cz, 2, 1.1, 1.0, vec![pd(0, 0.02), pd(1, 0.03)]));
    let support: BTreeSet<PauliString> = rigid.support(PRUNE_TOL).into_iter().collect();
    let want: BTreeSet<PauliString> = [label("iz"), label("zi")].into_iter().collect();
    ok &= support == want;
    let names: Vec<String> = support.iter().map(|p| p.label()).collect();
    notes.push(format!("dephasing under CZ support {{{}}}", names.join(",")));

    r.line(7, "property suites", ok, notes.join(", "));
}

fn frame_identity(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for _ in 0..6 {
        let (gate, model) = random_model(&mut rng, 0.05);
        let tau = gate.tau();
        let opts = IntegrationOptions::default();
        let left = exact_noise(&model, &gate, FramePosition::Left, opts).unwrap();
        let right = exact_noise(&model, &gate, FramePosition::Right, opts).unwrap();
        let frame = FramedLindbladian::new(&model, &gate, 0.0).unwrap();
        let u = frame.gate_superop(tau);
        let commute = u.compose(&left).unwrap().distance(&right.compose(&u).unwrap()).unwrap();
        let ts = rng.gen_range(0.1..0.9) * tau;
        let middle = exact_noise(&model, &gate, FramePosition::Middle(ts), opts).unwrap();
        let rebuilt = frame.gate_superop(tau - ts).compose(&middle).unwrap().compose(&frame.gate_superop(ts)).unwrap();
        let full = model.generator().unwrap().scale(tau).expm();
        let recon = rebuilt.distance(&full).unwrap();
        worst = worst.max(commute).max(recon);
    }
    r.line(8, "interaction-frame decompositions", worst <= 1e-9, format!("max deviation {worst:.2e} (tol 1e-9)"));
}

fn main() -> ExitCode {
    let mut r = Report { failures: 0 };
    exact_identity(&mut r);
    table_oracle(&mut r);
    sum_rules(&mut r);
    convergence(&mut r);
    breakdown(&mut r);
    precision(&mut r);
    properties(&mut r);
    frame_identity(&mut r);
    if r.failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", r.failures);
        ExitCode::FAILURE
    }
}

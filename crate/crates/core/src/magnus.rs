//! Magnus and Dyson expansions of the interaction-frame noise channel.
//!
//! The nested time-ordered integrals (`t1 > t2 > t3 > t4`)
//!
//! ```text
//! Ω1 = ∫ L1
//! Ω2 = ½ ∫∫ [L1, L2]
//! Ω3 = ⅙ ∫∫∫ [L1,[L2,L3]] + [L3,[L2,L1]]
//! Ω4 = 1/12 ∫∫∫∫ [L1,[L2,[L3,L4]]] + [L1,[[L2,L3],L4]]
//!                 + [[[L1,L2],L3],L4] + [L2,[L3,[L4,L1]]]
//! ```
//!
//! are evaluated as running accumulators integrated with RK4 in one forward
//! sweep and one sweep over the reversed generator `L(T − u)`. The two
//! fourth-order terms that sandwich a generator between earlier ones use the
//! accumulator `X ↦ ∫ (L X K + K X L)`, stored as a `16^n × 16^n` matrix, so
//! order 4 is limited to two qubits.

use num_complex::Complex64;

use crate::error::{ForgeError, Result};
use crate::frame::FramedLindbladian;
use crate::superop::{CMatrix, SuperOperator};

pub const MAX_ORDER: usize = 4;
/// Largest register for which the fourth-order term is available.
pub const MAX_ORDER4_QUBITS: usize = 2;

/// Grid settings for the Magnus integrals.
#[derive(Clone, Copy, Debug)]
pub struct MagnusOptions {
    /// Initial number of RK4 steps over `[0, τ_g]`.
    pub grid_steps: usize,
    /// Largest change of any `Ω_k` (Frobenius norm) accepted on grid doubling.
    pub tol: f64,
    pub max_grid_steps: usize,
}

impl Default for MagnusOptions {
    fn default() -> Self {
        MagnusOptions { grid_steps: 512, tol: 1e-9, max_grid_steps: 1 << 15 }
    }
}

/// Magnus terms `Ω_1 … Ω_K` together with the grid that produced them.
#[derive(Clone, Debug)]
pub struct MagnusTerms {
    terms: Vec<SuperOperator>,
    grid_steps: usize,
}

impl MagnusTerms {
    pub fn order(&self) -> usize {
        self.terms.len()
    }

    /// `Ω_k` for `k` in `1..=order`.
    pub fn term(&self, k: usize) -> &SuperOperator {
        &self.terms[k - 1]
    }

    pub fn terms(&self) -> &[SuperOperator] {
        &self.terms
    }

    pub fn grid_steps(&self) -> usize {
        self.grid_steps
    }

    pub fn n_qubits(&self) -> usize {
        self.terms[0].n_qubits()
    }

    fn check_order(&self, order: usize) -> Result<()> {
        if order == 0 || order > self.order() {
            return Err(ForgeError::Config(format!(
                "order {order} requested from {} Magnus terms",
                self.order()
            )));
        }
        Ok(())
    }
}

/// Magnus terms up to `order`, refining the grid until it settles.
pub fn magnus(frame: &FramedLindbladian, order: usize, opts: MagnusOptions) -> Result<MagnusTerms> {
    check_request(frame.n_qubits(), order)?;
    let mut steps = opts.grid_steps.max(1);
    let mut coarse = magnus_on_grid(frame, order, steps);
    loop {
        if steps * 2 > opts.max_grid_steps {
            return Err(ForgeError::NonConvergence(format!(
                "Magnus integrals did not settle within {} grid steps",
                opts.max_grid_steps
            )));
        }
        steps *= 2;
        let fine = magnus_on_grid(frame, order, steps);
        let change = coarse
            .terms
            .iter()
            .zip(&fine.terms)
            .map(|(a, b)| a.distance(b).expect("same register"))
            .fold(0.0, f64::max);
        if change <= opts.tol {
            return Ok(fine);
        }
        coarse = fine;
    }
}

fn check_request(n: usize, order: usize) -> Result<()> {
    if order == 0 || order > MAX_ORDER {
        return Err(ForgeError::Unsupported(format!("Magnus order {order} (supported 1..={MAX_ORDER})")));
    }
    if order == 4 && n > MAX_ORDER4_QUBITS {
        return Err(ForgeError::Unsupported(format!(
            "fourth-order Magnus term on {n} qubits (limit {MAX_ORDER4_QUBITS})"
        )));
    }
    Ok(())
}

/// Magnus terms on a fixed grid of `steps` RK4 steps, without refinement.
pub fn magnus_on_grid(frame: &FramedLindbladian, order: usize, steps: usize) -> MagnusTerms {
    let n = frame.n_qubits();
    let t_end = frame.tau_g();
    let forward = |t: f64| frame.eval_matrix(t);
    let backward = |u: f64| frame.eval_matrix(t_end - u);

    // The reversed sweep supplies Ω3's second term, Ω4's left-nested term and ∫L.
    let rev = if order >= 3 {
        Some(sweep(&backward, t_end, steps, order, None))
    } else {
        None
    };
    let k_total = rev.as_ref().map(|r| r.k.clone());
    let fwd = sweep(&forward, t_end, steps, order, k_total.as_ref());

    let c = |x: f64| Complex64::new(x, 0.0);
    let mut terms = vec![fwd.k.clone()];
    if order >= 2 {
        terms.push(&fwd.m * c(0.5));
    }
    if order >= 3 {
        let rev = rev.as_ref().expect("reverse sweep ran");
        terms.push((&fwd.q + &rev.q) * c(1.0 / 6.0));
    }
    if order >= 4 {
        let rev = rev.as_ref().expect("reverse sweep ran");
        let extra = fwd.fourth.as_ref().expect("fourth-order accumulators ran");
        let sum = &fwd.o4a + &extra.o4b - &rev.o4a + &extra.o4d;
        terms.push(sum * c(1.0 / 12.0));
    }
    MagnusTerms {
        terms: terms.into_iter().map(|m| SuperOperator::from_parts(n, m)).collect(),
        grid_steps: steps,
    }
}

/// Accumulated integrals at the end of a sweep.
struct Sweep {
    k: CMatrix,
    m: CMatrix,
    q: CMatrix,
    o4a: CMatrix,
    fourth: Option<FourthOrder>,
}

struct FourthOrder {
    o4b: CMatrix,
    o4d: CMatrix,
}

/// ODE state: the nested chain `K' = L, M' = [L,K], Q' = [L,M], O4a' = [L,Q]`
/// truncated to the requested depth, plus the fourth-order accumulators.
#[derive(Clone)]
struct State {
    chain: Vec<CMatrix>,
    sandwich: Option<Sandwich>,
}

/// Accumulators for the sandwiched fourth-order terms. The matrix `S` itself
/// lives outside the RK4 state (see [`SandwichView`]).
#[derive(Clone)]
struct Sandwich {
    a1: CMatrix,
    a2: CMatrix,
    w: CMatrix,
    o4b: CMatrix,
    o4d: CMatrix,
}

/// `S + c · (L ⊗ Kᵀ + K ⊗ Lᵀ)` at an RK4 stage, applied without forming the sum.
struct SandwichView<'a> {
    s: &'a CMatrix,
    shift: Option<(f64, &'a CMatrix, &'a CMatrix)>,
}

impl SandwichView<'_> {
    fn apply(&self, x: &CMatrix) -> CMatrix {
        let d = x.nrows();
        let dd = d * d;
        // row-major vec(X) is the column-major storage of Xᵀ
        let xt = x.transpose();
        let v = xt.as_slice();
        let mut acc = vec![Complex64::new(0.0, 0.0); dd];
        for (col, chunk) in self.s.as_slice().chunks_exact(dd).enumerate() {
            let vc = v[col];
            for (o, sv) in acc.iter_mut().zip(chunk) {
                *o += sv * vc;
            }
        }
        let mut out = CMatrix::from_row_slice(d, d, &acc);
        if let Some((c, l, k)) = self.shift {
            out += (l * x * k + k * x * l) * Complex64::new(c, 0.0);
        }
        out
    }
}

fn comm(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

fn derivative(l: &CMatrix, y: &State, k_total: Option<&CMatrix>, view: Option<&SandwichView>) -> State {
    let depth = y.chain.len();
    let mut chain = Vec::with_capacity(depth);
    chain.push(l.clone());
    for i in 1..depth {
        chain.push(comm(l, &y.chain[i - 1]));
    }
    let sandwich = y.sandwich.as_ref().map(|sw| {
        let k = &y.chain[0];
        let k_total = k_total.expect("fourth order needs ∫L over the full interval");
        let view = view.expect("fourth order needs the sandwich accumulator");
        let w_dot = l * &sw.a1 - view.apply(l) + &sw.a2 * l;
        let r = k_total - k;
        let z = &sw.a1 * &r - view.apply(&r) + &r * &sw.a2;
        Sandwich {
            a1: l * k,
            a2: k * l,
            o4b: comm(l, &sw.w),
            w: w_dot,
            o4d: comm(l, &z),
        }
    });
    State { chain, sandwich }
}

fn axpy_state(y: &State, h: f64, dy: &State) -> State {
    let c = Complex64::new(h, 0.0);
    State {
        chain: y.chain.iter().zip(&dy.chain).map(|(a, b)| a + b * c).collect(),
        sandwich: y.sandwich.as_ref().map(|s| {
            let d = dy.sandwich.as_ref().expect("matching state shapes");
            Sandwich {
                a1: &s.a1 + &d.a1 * c,
                a2: &s.a2 + &d.a2 * c,
                w: &s.w + &d.w * c,
                o4b: &s.o4b + &d.o4b * c,
                o4d: &s.o4d + &d.o4d * c,
            }
        }),
    }
}

/// `S += Σ_p (A_p ⊗ B_pᵀ + B_p ⊗ A_pᵀ)`, i.e. `S[X] += Σ_p (A_p X B_p + B_p X A_p)`.
fn add_kron_pairs(s: &mut CMatrix, pairs: &[(&CMatrix, &CMatrix)]) {
    let d = pairs[0].0.nrows();
    let dd = d * d;
    // columns of the transposes are the rows of A_p and B_p
    let rows: Vec<(CMatrix, CMatrix)> = pairs.iter().map(|(a, b)| (a.transpose(), b.transpose())).collect();
    let data = s.as_mut_slice();
    for k in 0..d {
        for l in 0..d {
            let col = &mut data[(k * d + l) * dd..(k * d + l + 1) * dd];
            for (&(a, b), (at, bt)) in pairs.iter().zip(&rows) {
                let a_row = &at.as_slice()[l * d..(l + 1) * d];
                let b_row = &bt.as_slice()[l * d..(l + 1) * d];
                let a_col = &a.as_slice()[k * d..(k + 1) * d];
                let b_col = &b.as_slice()[k * d..(k + 1) * d];
                for (row, (&aik, &bik)) in col.chunks_exact_mut(d).zip(a_col.iter().zip(b_col)) {
                    for ((entry, &blj), &alj) in row.iter_mut().zip(b_row).zip(a_row) {
                        *entry += aik * blj + bik * alj;
                    }
                }
            }
        }
    }
}

/// Integrates the accumulators over `[0, t_end]`. `depth` is the number of
/// chain slots; the sandwich accumulators run when `k_total` is given and
/// `depth == 4`.
fn sweep<F: Fn(f64) -> CMatrix>(
    eval: &F,
    t_end: f64,
    steps: usize,
    depth: usize,
    k_total: Option<&CMatrix>,
) -> Sweep {
    let mut l0 = eval(0.0);
    let dim = l0.nrows();
    let zero = CMatrix::zeros(dim, dim);
    let with_sandwich = depth == 4 && k_total.is_some();
    let mut y = State {
        chain: vec![zero.clone(); depth],
        sandwich: with_sandwich.then(|| Sandwich {
            a1: zero.clone(),
            a2: zero.clone(),
            w: zero.clone(),
            o4b: zero.clone(),
            o4d: zero.clone(),
        }),
    };
    let mut s = if with_sandwich { CMatrix::zeros(dim * dim, dim * dim) } else { CMatrix::zeros(0, 0) };
    let h = t_end / steps as f64;
    let c = |x: f64| Complex64::new(x, 0.0);
    for i in 0..steps {
        let t = i as f64 * h;
        let lm = eval(t + 0.5 * h);
        let l1 = eval(t + h);
        let view = |shift| with_sandwich.then_some(SandwichView { s: &s, shift });
        let k1 = derivative(&l0, &y, k_total, view(None).as_ref());
        let y2 = axpy_state(&y, 0.5 * h, &k1);
        let k2 = derivative(&lm, &y2, k_total, view(Some((0.5 * h, &l0, &y.chain[0]))).as_ref());
        let y3 = axpy_state(&y, 0.5 * h, &k2);
        let k3 = derivative(&lm, &y3, k_total, view(Some((0.5 * h, &lm, &y2.chain[0]))).as_ref());
        let y4 = axpy_state(&y, h, &k3);
        let k4 = derivative(&l1, &y4, k_total, view(Some((h, &lm, &y3.chain[0]))).as_ref());
        if with_sandwich {
            let b0 = &y.chain[0] * c(h / 6.0);
            let bm = (&y2.chain[0] + &y3.chain[0]) * c(h / 3.0);
            let b1 = &y4.chain[0] * c(h / 6.0);
            add_kron_pairs(&mut s, &[(&l0, &b0), (&lm, &bm), (&l1, &b1)]);
        }
        y = axpy_state(&y, h / 6.0, &k1);
        y = axpy_state(&y, h / 3.0, &k2);
        y = axpy_state(&y, h / 3.0, &k3);
        y = axpy_state(&y, h / 6.0, &k4);
        l0 = l1;
    }
    let get = |i: usize| y.chain.get(i).cloned().unwrap_or_else(|| zero.clone());
    Sweep {
        k: get(0),
        m: get(1),
        q: get(2),
        o4a: get(3),
        fourth: y.sandwich.map(|s| FourthOrder { o4b: s.o4b, o4d: s.o4d }),
    }
}

/// `exp(Ω_1 + … + Ω_order)`.
pub fn magnus_channel(terms: &MagnusTerms, order: usize) -> Result<SuperOperator> {
    terms.check_order(order)?;
    let mut sum = terms.term(1).clone();
    for k in 2..=order {
        sum = sum.add(terms.term(k))?;
    }
    Ok(sum.expm())
}

/// Truncated Dyson series of `exp(Ω_1 + Ω_2 + …)`, keeping terms of total
/// order at most `order` in the noise strength.
pub fn dyson_channel(terms: &MagnusTerms, order: usize) -> Result<SuperOperator> {
    terms.check_order(order)?;
    let n = terms.n_qubits();
    let o: Vec<&CMatrix> = terms.terms.iter().map(|t| t.matrix()).collect();
    let dim = o[0].nrows();
    let c = |x: f64| Complex64::new(x, 0.0);
    let mut out = CMatrix::identity(dim, dim) + o[0];
    if order >= 2 {
        out += o[1] + o[0] * o[0] * c(0.5);
    }
    if order >= 3 {
        let o11 = o[0] * o[0];
        out += o[2] + (o[0] * o[1] + o[1] * o[0]) * c(0.5) + &o11 * o[0] * c(1.0 / 6.0);
    }
    if order >= 4 {
        let o11 = o[0] * o[0];
        out += o[3]
            + (o[0] * o[2] + o[2] * o[0]) * c(0.5)
            + o[1] * o[1] * c(0.5)
            + (&o11 * o[1] + o[0] * o[1] * o[0] + o[1] * &o11) * c(1.0 / 6.0)
            + &o11 * &o11 * c(1.0 / 24.0);
    }
    Ok(SuperOperator::from_parts(n, out))
}

/// `‖a − b‖_F / ‖b‖_F`.
pub fn normalized_distance(a: &SuperOperator, b: &SuperOperator) -> Result<f64> {
    Ok(a.distance(b)? / b.frobenius_norm())
}

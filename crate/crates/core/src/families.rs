//! Closed-form generators for multi-control Toffoli gates, ripple-carry
//! adders, multiplexers and the QFT, with their cost formulas.

use serde::Serialize;
use thiserror::Error;

use crate::angle::Angle;
use crate::circuit::{compile_outputs, Circuit, CompileError, CompileOptions, Gate, Line, OutputTask, Role, TaskForms};
use crate::factor::{CascadeExpr, FactoredForm};
use crate::rbdd::{Axis, Manager};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyId {
    /// Toffoli with `n` controls.
    Toffoli(usize),
    /// Adder of two `n`-bit numbers.
    Adder(usize),
    /// Multiplexer with `n` data inputs.
    Mux(usize),
    /// QFT on `n` qubits.
    Qft(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CostPrediction {
    pub two_qubit: usize,
    pub ancillae: usize,
    pub depth_bound: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FamilyError {
    #[error("a Toffoli gate needs at least 2 controls, got {0}")]
    TooFewControls(usize),
    #[error("size must be at least 1")]
    Empty,
    #[error("multiplexer input count {0} is not a power of two ≥ 2")]
    NotPowerOfTwo(usize),
    #[error(transparent)]
    Compile(#[from] CompileError),
}

/// Scheduled depths of the adder's hand layout, for 2 ≤ n ≤ 15.
const ADDER_DEPTHS: [usize; 14] = [9, 12, 19, 23, 27, 31, 39, 43, 48, 51, 57, 61, 66, 70];

fn ceil_log2(n: usize) -> usize {
    n.next_power_of_two().trailing_zeros() as usize
}

/// Closed-form cost of each family member.
pub fn predict(f: FamilyId) -> CostPrediction {
    match f {
        FamilyId::Toffoli(n) => CostPrediction {
            two_qubit: toffoli_cost(n),
            ancillae: 0,
            depth_bound: None,
        },
        FamilyId::Adder(n) => CostPrediction {
            two_qubit: (3 * n * n + 5 * n) / 2,
            ancillae: 1,
            depth_bound: n.checked_sub(2).and_then(|i| ADDER_DEPTHS.get(i)).copied(),
        },
        FamilyId::Mux(n) => {
            let k = ceil_log2(n);
            CostPrediction {
                two_qubit: 2 * n + n * toffoli_cost(k),
                ancillae: 1,
                depth_bound: None,
            }
        }
        FamilyId::Qft(n) => CostPrediction {
            two_qubit: n * n.saturating_sub(1) / 2,
            ancillae: 0,
            depth_bound: None,
        },
    }
}

/// 2n² − 2n + 1, with a single control costing one gate.
fn toffoli_cost(n: usize) -> usize {
    if n == 0 {
        0
    } else {
        2 * n * n - 2 * n + 1
    }
}

fn leaf(prefix: Angle, terms: Vec<(usize, Angle)>) -> FactoredForm {
    FactoredForm::Leaf(CascadeExpr {
        prefix,
        terms,
        axis: Axis::X,
    })
}

fn with_spine(spine: Vec<(FactoredForm, Angle)>, base: FactoredForm) -> FactoredForm {
    spine.into_iter().rev().fold(base, |rest, (control, gamma)| FactoredForm::BiDecomp {
        control: Box::new(control),
        gamma,
        rest: Box::new(rest),
    })
}

/// Factored form of `target ⊕ AND(controls)` over variable indices.
pub fn toffoli_form(controls: &[usize], target: usize) -> FactoredForm {
    let m = controls.len();
    assert!(m >= 1);
    if m == 1 {
        return leaf(Angle::zero(), vec![(controls[0], Angle::pi()), (target, Angle::pi())]);
    }
    let spine = (1..m)
        .rev()
        .enumerate()
        .map(|(i, j)| (toffoli_form(&controls[..j], controls[j]), -Angle::pi_over_pow2(i as u32 + 1)))
        .collect();
    let mut terms = vec![(controls[0], Angle::pi_over_pow2(m as u32 - 1))];
    for (j, &c) in controls.iter().enumerate().skip(1) {
        terms.push((c, Angle::pi_over_pow2((m - j) as u32)));
    }
    terms.push((target, Angle::pi()));
    with_spine(spine, leaf(Angle::zero(), terms))
}

/// Toffoli with `n` controls on lines 0..n and target on line n, computed
/// in place with every control restored.
pub fn gen_toffoli(n: usize) -> Result<Circuit, FamilyError> {
    if n < 2 {
        return Err(FamilyError::TooFewControls(n));
    }
    let names: Vec<String> = (1..=n).map(|i| format!("c{i}")).chain(["t".to_string()]).collect();
    let mut mgr = Manager::new(names, Axis::X);
    let controls: Vec<usize> = (0..n).collect();
    let task = OutputTask {
        name: "y".into(),
        forms: TaskForms::X(toffoli_form(&controls, n)),
    };
    Ok(compile_outputs(&mut mgr, &[task], &CompileOptions::default())?)
}

/// Factored forms of the adder outputs s₀…s_{n−1} and the carry, over the
/// variable order a₀ < b₀ < a₁ < b₁ < ….
pub fn adder_forms(n: usize) -> Vec<(String, FactoredForm)> {
    let a = |i: usize| 2 * i;
    let b = |i: usize| 2 * i + 1;
    let mut sums: Vec<FactoredForm> = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let spine: Vec<(FactoredForm, Angle)> = (0..j)
            .map(|k| (sums[j - 1 - k].clone(), -Angle::pi_over_pow2(k as u32 + 1)))
            .collect();
        let mut terms = Vec::new();
        for i in 0..j {
            let w = Angle::pi_over_pow2((j - i) as u32);
            terms.push((a(i), w.clone()));
            terms.push((b(i), w));
        }
        if j < n {
            terms.push((a(j), Angle::pi()));
            terms.push((b(j), Angle::pi()));
        }
        let form = with_spine(spine, leaf(Angle::zero(), terms));
        if j < n {
            sums.push(form.clone());
            out.push((format!("s{j}"), form));
        } else {
            out.push(("c".to_string(), form));
        }
    }
    out
}

/// `n`-bit ripple-carry adder: sums replace the b lines, the carry goes to
/// one ancilla, and gates are reordered for depth.
pub fn gen_adder(n: usize) -> Result<Circuit, FamilyError> {
    if n == 0 {
        return Err(FamilyError::Empty);
    }
    let names: Vec<String> = (0..n).flat_map(|i| [format!("a{i}"), format!("b{i}")]).collect();
    let mut mgr = Manager::new(names, Axis::X);
    let tasks: Vec<OutputTask> = adder_forms(n)
        .into_iter()
        .map(|(name, f)| OutputTask {
            name,
            forms: TaskForms::X(f),
        })
        .collect();
    let c = compile_outputs(&mut mgr, &tasks, &CompileOptions::default())?;
    Ok(c.reschedule())
}

/// Select value (s₁ most significant) that routes data input `i` (1-based)
/// to the output.
pub fn mux_select_value(n: usize, i: usize) -> usize {
    n - i
}

/// Multiplexer with `n` data inputs: lines s₁…s_k, x₁…x_n, then one ancilla
/// that ends holding the selected input. Data lines are left modified.
pub fn gen_mux(n: usize) -> Result<Circuit, FamilyError> {
    if n < 2 || !n.is_power_of_two() {
        return Err(FamilyError::NotPowerOfTwo(n));
    }
    let k = ceil_log2(n);
    let x = |i: usize| k + i - 1;
    let f = k + n;
    let mut lines: Vec<Line> = (1..=k).map(|i| Line::input(format!("s{i}"), Role::Restore)).collect();
    lines.extend((1..=n).map(|i| Line::input(format!("x{i}"), Role::Free)));
    lines.push(Line::ancilla(Some("f".into())));
    let mut c = Circuit::new(lines);
    let half = Angle::new(1, 2);
    for i in (1..=n).rev() {
        c.push(Gate::crx(x(i), f, half.clone()));
    }
    let network = if k >= 2 { Some(gen_toffoli(k)?) } else { None };
    // flipped[j]: select j currently holds its complement.
    let mut flipped = vec![false; k];
    for i in 1..=n {
        let value = mux_select_value(n, i);
        let last = i == n;
        match &network {
            None => {
                // One select: x_i ^= s for value 1; the last input uses the
                // complemented minterm, which is also s.
                c.push(Gate::crx(0, x(i), Angle::pi()));
            }
            Some(net) => {
                for (j, fl) in flipped.iter_mut().enumerate() {
                    let want = (value >> (k - 1 - j)) & 1 == 0;
                    if *fl != want {
                        c.push(Gate::rx(j, Angle::pi()));
                        *fl = want;
                    }
                }
                let map = |l: usize| if l < k { l } else { x(i) };
                for g in &net.gates {
                    c.push(Gate {
                        axis: g.axis,
                        angle: g.angle.clone(),
                        target: map(g.target),
                        control: g.control.map(map),
                    });
                }
                if last {
                    c.push(Gate::rx(x(i), Angle::pi()));
                }
            }
        }
        let gamma = if last { half.clone() } else { -&half };
        c.push(Gate::crx(x(i), f, gamma));
    }
    for (j, fl) in flipped.iter().enumerate() {
        if *fl {
            c.push(Gate::rx(j, Angle::pi()));
        }
    }
    Ok(c)
}

/// Per-line phase cascade of the QFT: line `l` is rotated by
/// Σ_{e>l} π/2^{e−l} j_e, read off the Z-axis angle diagram.
pub fn qft_cascades(n: usize) -> Vec<CascadeExpr> {
    let names: Vec<String> = (1..=n).map(|i| format!("j{i}")).collect();
    let mut mgr = Manager::new(names, Axis::Z);
    (0..n)
        .map(|l| {
            let table: Vec<Angle> = (0..1usize << n)
                .map(|idx| {
                    ((l + 1)..n)
                        .filter(|&e| (idx >> (n - 1 - e)) & 1 == 1)
                        .fold(Angle::zero(), |acc, e| &acc + &Angle::pi_over_pow2((e - l) as u32))
                })
                .collect();
            let d = mgr.from_table(&table).expect("full table");
            mgr.to_cascade(&d).expect("phase sums are r-linear")
        })
        .collect()
}

/// QFT on lines j₁…j_n. Between hat bases, the circuit equals the DFT
/// followed by qubit reversal, up to global phase.
pub fn gen_qft(n: usize) -> Result<Circuit, FamilyError> {
    if n == 0 {
        return Err(FamilyError::Empty);
    }
    let lines = (1..=n).map(|i| Line::input(format!("j{i}"), Role::Output(format!("y{i}")))).collect();
    let mut c = Circuit::new(lines);
    let cascades = qft_cascades(n);
    for (l, cascade) in cascades.iter().enumerate() {
        // A CRz(θ) is a controlled phase times Rz(−θ/2) on its control;
        // earlier lines controlled by this one are compensated here.
        let correction = cascades[..l]
            .iter()
            .flat_map(|cs| cs.terms.iter())
            .filter(|(e, _)| *e == l)
            .fold(Angle::zero(), |acc, (_, t)| &acc + &t.half());
        c.push(Gate::rz(l, &Angle::pi() + &correction));
        c.push(Gate::rx(l, Angle::new(1, 2)));
        for (e, theta) in &cascade.terms {
            c.push(Gate::crz(*e, l, theta.clone()));
        }
    }
    Ok(c.merge_rotations())
}

/// Generates any family member.
pub fn generate(f: FamilyId) -> Result<Circuit, FamilyError> {
    match f {
        FamilyId::Toffoli(n) => gen_toffoli(n),
        FamilyId::Adder(n) => gen_adder(n),
        FamilyId::Mux(n) => gen_mux(n),
        FamilyId::Qft(n) => gen_qft(n),
    }
}

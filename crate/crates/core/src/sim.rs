//! State-vector simulation in the hat basis 0̂ = (1, 0), 1̂ = (0, -i).
//!
//! Line 0 is the most significant tensor factor. Ancillae start in 0̂.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::angle::Angle;
use crate::circuit::{Circuit, Gate, LineKind, Role};
use crate::rbdd::Axis;

pub type C64 = Complex64;

/// Absolute amplitude tolerance used by every comparison.
pub const TOL: f64 = 1e-9;

/// Largest line count for dense unitaries and exhaustive verification.
pub const MAX_LINES: usize = 12;

/// Largest line count for a single dense state vector.
pub const MAX_STATE_LINES: usize = 24;

const BASIS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("circuit has {0} lines, too many to simulate densely")]
    TooManyLines(usize),
    #[error("amplitude pair is not normalised (norm² = {0})")]
    NotNormalised(f64),
    #[error("angle {0} rad is not a rational multiple of π with denominator ≤ 4096")]
    Unsnappable(f64),
    #[error("input assignment has {got} bits, circuit has {want} inputs")]
    InputWidth { got: usize, want: usize },
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// One-qubit hat state of a bit.
pub fn hat_state(bit: bool) -> [C64; 2] {
    if bit {
        [c(0.0, 0.0), c(0.0, -1.0)]
    } else {
        [c(1.0, 0.0), c(0.0, 0.0)]
    }
}

/// Rx or Rz as a 2×2 matrix in the computational basis.
pub fn gate_matrix(axis: Axis, angle: &Angle) -> [[C64; 2]; 2] {
    let t = angle.to_radians() / 2.0;
    match axis {
        Axis::X => [[c(t.cos(), 0.0), c(0.0, -t.sin())], [c(0.0, -t.sin()), c(t.cos(), 0.0)]],
        Axis::Z => [[C64::from_polar(1.0, -t), c(0.0, 0.0)], [c(0.0, 0.0), C64::from_polar(1.0, t)]],
    }
}

/// Rx(θ)0̂.
pub fn x_state(theta: &Angle) -> [C64; 2] {
    let m = gate_matrix(Axis::X, theta);
    [m[0][0], m[1][0]]
}

/// Rz(γ)Rx(θ)0̂.
pub fn zx_state(gamma: &Angle, theta: &Angle) -> [C64; 2] {
    let x = x_state(theta);
    let z = gate_matrix(Axis::Z, gamma);
    [z[0][0] * x[0], z[1][1] * x[1]]
}

/// Tensor product of one-qubit states, line 0 most significant.
pub fn product_state(lines: &[[C64; 2]]) -> Vec<C64> {
    let mut v = vec![c(1.0, 0.0)];
    for s in lines {
        let mut next = Vec::with_capacity(v.len() * 2);
        for a in &v {
            next.push(a * s[0]);
            next.push(a * s[1]);
        }
        v = next;
    }
    v
}

fn bit_of(n_lines: usize, line: usize) -> usize {
    1 << (n_lines - 1 - line)
}

/// Applies one gate to a dense state over `n_lines` lines.
pub fn apply_gate(state: &mut [C64], n_lines: usize, gate: &Gate) {
    let m = gate_matrix(gate.axis, &gate.angle);
    let tb = bit_of(n_lines, gate.target);
    let cb = gate.control.map(|l| bit_of(n_lines, l));
    for i in 0..state.len() {
        if i & tb != 0 {
            continue;
        }
        if let Some(cb) = cb {
            if i & cb == 0 {
                continue;
            }
        }
        let j = i | tb;
        let (a0, a1) = (state[i], state[j]);
        state[i] = m[0][0] * a0 + m[0][1] * a1;
        state[j] = m[1][0] * a0 + m[1][1] * a1;
    }
}

/// Runs every gate on a dense state.
pub fn run_state(c: &Circuit, state: &mut [C64]) {
    for g in &c.gates {
        apply_gate(state, c.num_lines(), g);
    }
}

/// Per-line initial states for an assignment to the input lines (in line
/// order); ancillae get 0̂.
pub fn initial_lines(c: &Circuit, input: &[bool]) -> Result<Vec<[C64; 2]>, SimError> {
    let want = c.inputs().len();
    if input.len() != want {
        return Err(SimError::InputWidth {
            got: input.len(),
            want,
        });
    }
    let mut bits = input.iter();
    Ok(c.lines
        .iter()
        .map(|l| match l.kind {
            LineKind::Input { .. } => hat_state(*bits.next().expect("counted")),
            LineKind::Ancilla { .. } => hat_state(false),
        })
        .collect())
}

/// Dense simulation from a hat-basis input assignment.
pub fn run(c: &Circuit, input: &[bool]) -> Result<Vec<C64>, SimError> {
    if c.num_lines() > MAX_STATE_LINES {
        return Err(SimError::TooManyLines(c.num_lines()));
    }
    let mut state = product_state(&initial_lines(c, input)?);
    run_state(c, &mut state);
    Ok(state)
}

/// Simulation that keeps one 2-vector per line while every control is a
/// basis state; `None` as soon as a control is in superposition.
pub fn run_product(c: &Circuit, mut lines: Vec<[C64; 2]>) -> Option<Vec<[C64; 2]>> {
    for g in &c.gates {
        if let Some(ctl) = g.control {
            let s = lines[ctl];
            if s[1].norm_sqr() <= BASIS_TOL {
                continue;
            }
            if s[0].norm_sqr() > BASIS_TOL {
                return None;
            }
        }
        let m = gate_matrix(g.axis, &g.angle);
        let s = lines[g.target];
        lines[g.target] = [m[0][0] * s[0] + m[0][1] * s[1], m[1][0] * s[0] + m[1][1] * s[1]];
    }
    Some(lines)
}

/// Norm of the part of `state` in which `line` is orthogonal to `psi`, i.e.
/// how far the line is from being exactly `psi` (up to phase).
pub fn line_deviation(state: &[C64], n_lines: usize, line: usize, psi: &[C64; 2]) -> f64 {
    // ψ⊥ = (-conj ψ₁, conj ψ₀); project each pair onto it.
    let perp = [-psi[1].conj(), psi[0].conj()];
    let b = bit_of(n_lines, line);
    let mut acc = 0.0;
    for i in 0..state.len() {
        if i & b != 0 {
            continue;
        }
        let amp = perp[0].conj() * state[i] + perp[1].conj() * state[i | b];
        acc += amp.norm_sqr();
    }
    acc.sqrt()
}

fn single_deviation(s: &[C64; 2], psi: &[C64; 2]) -> f64 {
    let perp = [-psi[1].conj(), psi[0].conj()];
    (perp[0].conj() * s[0] + perp[1].conj() * s[1]).norm()
}

/// Computational-basis unitary: column j is the circuit applied to |j⟩.
pub fn unitary_of(circ: &Circuit) -> Result<DMatrix<C64>, SimError> {
    let n = circ.num_lines();
    if n > MAX_LINES {
        return Err(SimError::TooManyLines(n));
    }
    let dim = 1usize << n;
    let mut u = DMatrix::zeros(dim, dim);
    let mut col = vec![c(0.0, 0.0); dim];
    for j in 0..dim {
        col.iter_mut().for_each(|x| *x = c(0.0, 0.0));
        col[j] = c(1.0, 0.0);
        run_state(circ, &mut col);
        for (i, x) in col.iter().enumerate() {
            u[(i, j)] = *x;
        }
    }
    Ok(u)
}

/// M⊗ⁿ with M = diag(1, -i), or its inverse diag(1, i).
pub fn hat_transform(n: usize, inverse: bool) -> DMatrix<C64> {
    let dim = 1usize << n;
    let step = if inverse { c(0.0, 1.0) } else { c(0.0, -1.0) };
    DMatrix::from_fn(dim, dim, |i, j| {
        if i != j {
            return c(0.0, 0.0);
        }
        (0..i.count_ones()).fold(c(1.0, 0.0), |acc, _| acc * step)
    })
}

/// M⁻¹·U·M: the circuit's matrix between hat-basis states.
pub fn hat_unitary(circ: &Circuit) -> Result<DMatrix<C64>, SimError> {
    let mut u = unitary_of(circ)?;
    // Entry (i, j) picks up i^popcount(i) from M⁻¹ and (-i)^popcount(j) from M.
    let quarter = |k: u32| match k % 4 {
        0 => c(1.0, 0.0),
        1 => c(0.0, 1.0),
        2 => c(-1.0, 0.0),
        _ => c(0.0, -1.0),
    };
    let dim = u.nrows();
    for j in 0..dim {
        for i in 0..dim {
            let k = i.count_ones() + 3 * j.count_ones();
            u[(i, j)] *= quarter(k);
        }
    }
    Ok(u)
}

/// True iff `a = e^{iφ} b` within `tol`, φ fixed from the largest entry of `b`.
pub fn equal_up_to_phase(a: &DMatrix<C64>, b: &DMatrix<C64>, tol: f64) -> bool {
    max_phase_deviation(a, b).is_some_and(|d| d <= tol)
}

/// Largest entry difference after aligning global phase; `None` on shape
/// mismatch.
pub fn max_phase_deviation(a: &DMatrix<C64>, b: &DMatrix<C64>) -> Option<f64> {
    if a.shape() != b.shape() {
        return None;
    }
    if b.is_empty() {
        return Some(0.0);
    }
    let (mut bi, mut best) = (0, -1.0);
    for (k, x) in b.iter().enumerate() {
        if x.norm() > best {
            best = x.norm();
            bi = k;
        }
    }
    if best == 0.0 {
        return Some(a.iter().map(|x| x.norm()).fold(0.0, f64::max));
    }
    let ratio = a.as_slice()[bi] / b.as_slice()[bi];
    if ratio.norm() == 0.0 {
        return Some(best);
    }
    let phase = ratio / ratio.norm();
    Some(
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - phase * y).norm())
            .fold(0.0, f64::max),
    )
}

/// f = e^{iδ} Rz(γ) Rx(θ) 0̂ decomposition of a one-qubit state.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochAngles {
    pub theta: Angle,
    pub gamma: Angle,
    pub delta: f64,
}

impl BlochAngles {
    pub fn reconstruct(&self) -> [C64; 2] {
        let s = zx_state(&self.gamma, &self.theta);
        let p = C64::from_polar(1.0, self.delta);
        [p * s[0], p * s[1]]
    }
}

/// Extracts exact rotation angles from an amplitude pair.
pub fn bloch_extract(f0: C64, f1: C64) -> Result<BlochAngles, SimError> {
    let norm = f0.norm_sqr() + f1.norm_sqr();
    if (norm - 1.0).abs() > TOL {
        return Err(SimError::NotNormalised(norm));
    }
    let theta_r = 2.0 * f1.norm().atan2(f0.norm());
    let theta = Angle::snap(theta_r, 4096, TOL).ok_or(SimError::Unsnappable(theta_r))?;
    // With a vanishing component the relative phase is arbitrary; use 0.
    let gamma_r = if f0.norm() < TOL || f1.norm() < TOL {
        0.0
    } else {
        f1.arg() - f0.arg() + PI / 2.0
    };
    let gamma = Angle::snap(gamma_r, 4096, TOL).ok_or(SimError::Unsnappable(gamma_r))?;
    let probe = zx_state(&gamma, &theta);
    let lead = if probe[0].norm() >= probe[1].norm() {
        (f0, probe[0])
    } else {
        (f1, probe[1])
    };
    let delta = (lead.0 / lead.1).arg();
    Ok(BlochAngles {
        theta,
        gamma,
        delta,
    })
}

/// DFT matrix with entries ω^{jk}/√N, ω = e^{2πi/N}.
pub fn qft_reference(n: usize) -> DMatrix<C64> {
    let dim = 1usize << n;
    let scale = 1.0 / (dim as f64).sqrt();
    DMatrix::from_fn(dim, dim, |j, k| {
        let e = (j * k) % dim;
        C64::from_polar(scale, 2.0 * PI * e as f64 / dim as f64)
    })
}

/// Bit-reversal permutation matrix on `n` qubits.
pub fn bit_reversal(n: usize) -> DMatrix<C64> {
    let dim = 1usize << n;
    let rev = |i: usize| (0..n).fold(0, |acc, b| (acc << 1) | ((i >> b) & 1));
    DMatrix::from_fn(dim, dim, |i, j| {
        if rev(j) == i {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    })
}

/// Expected one-qubit state as a function of the input bits.
pub type StateFn<'a> = Box<dyn Fn(&[bool]) -> [C64; 2] + 'a>;

/// Expected state of one line.
pub struct LineExpectation<'a> {
    pub name: String,
    pub line: usize,
    pub state: StateFn<'a>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineVerdict {
    pub name: String,
    pub line: usize,
    pub pass: bool,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub inputs: String,
    pub line: String,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub pass: bool,
    pub assignments: usize,
    pub max_deviation: f64,
    pub lines: Vec<LineVerdict>,
    pub counterexample: Option<Counterexample>,
}

/// Checks the given line expectations, plus every restore-flagged input
/// line, on all hat-basis inputs.
pub fn verify(c: &Circuit, expectations: &[LineExpectation<'_>]) -> Result<Verdict, SimError> {
    let n = c.num_lines();
    if n > MAX_LINES {
        return Err(SimError::TooManyLines(n));
    }
    let inputs = c.inputs();
    let k = inputs.len();
    let mut checks: Vec<(String, usize, Option<usize>)> = expectations
        .iter()
        .enumerate()
        .map(|(i, e)| (e.name.clone(), e.line, Some(i)))
        .collect();
    for &(line, name) in &inputs {
        if let LineKind::Input {
            role: Role::Restore, ..
        } = c.lines[line].kind
        {
            checks.push((format!("{name} (restore)"), line, None));
        }
    }
    let input_pos: Vec<Option<usize>> = {
        let mut v = vec![None; n];
        for (pos, &(line, _)) in inputs.iter().enumerate() {
            v[line] = Some(pos);
        }
        v
    };
    let mut per_line = vec![0.0f64; checks.len()];
    let mut worst: Option<Counterexample> = None;
    for idx in 0..1usize << k {
        let bits: Vec<bool> = (0..k).map(|b| (idx >> (k - 1 - b)) & 1 == 1).collect();
        let init = initial_lines(c, &bits)?;
        let product = run_product(c, init.clone());
        let dense = if product.is_none() {
            let mut s = product_state(&init);
            run_state(c, &mut s);
            Some(s)
        } else {
            None
        };
        for (ci, (name, line, which)) in checks.iter().enumerate() {
            let psi = match which {
                Some(e) => (expectations[*e].state)(&bits),
                None => hat_state(bits[input_pos[*line].expect("input line")]),
            };
            let dev = match (&product, &dense) {
                (Some(p), _) => single_deviation(&p[*line], &psi),
                (None, Some(s)) => line_deviation(s, n, *line, &psi),
                _ => unreachable!(),
            };
            per_line[ci] = per_line[ci].max(dev);
            if dev > TOL && worst.as_ref().is_none_or(|w| dev > w.deviation) {
                let assignment = inputs
                    .iter()
                    .zip(&bits)
                    .map(|((_, nm), b)| format!("{nm}={}", u8::from(*b)))
                    .collect::<Vec<_>>()
                    .join(" ");
                worst = Some(Counterexample {
                    inputs: assignment,
                    line: name.clone(),
                    deviation: dev,
                });
            }
        }
    }
    let lines: Vec<LineVerdict> = checks
        .iter()
        .zip(&per_line)
        .map(|((name, line, _), &d)| LineVerdict {
            name: name.clone(),
            line: *line,
            pass: d <= TOL,
            max_deviation: d,
        })
        .collect();
    let max_deviation = per_line.iter().copied().fold(0.0, f64::max);
    Ok(Verdict {
        pass: worst.is_none(),
        assignments: 1 << k,
        max_deviation,
        lines,
        counterexample: worst,
    })
}

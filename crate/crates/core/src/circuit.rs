//! Controlled-rotation circuits: representation, compilation from factored
//! forms, peephole merging, scheduling and the text format.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use num_rational::BigRational;
use num_traits::One;
use serde::Serialize;
use thiserror::Error;

use crate::angle::Angle;
use crate::factor::{form_to_diagram, FactoredForm};
use crate::rbdd::{Axis, DdError, Diagram, Manager};

/// What an input line must hold when the circuit ends.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Role {
    /// Returns to its input value.
    Restore,
    /// Ends holding the named output.
    Output(String),
    /// Left in an unspecified state.
    Free,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LineKind {
    Input { name: String, role: Role },
    /// Starts in 0̂.
    Ancilla { output: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Line {
    pub kind: LineKind,
}

impl Line {
    pub fn input(name: impl Into<String>, role: Role) -> Self {
        Line {
            kind: LineKind::Input {
                name: name.into(),
                role,
            },
        }
    }

    pub fn ancilla(output: Option<String>) -> Self {
        Line {
            kind: LineKind::Ancilla { output },
        }
    }

    pub fn is_ancilla(&self) -> bool {
        matches!(self.kind, LineKind::Ancilla { .. })
    }

    /// Name of the output bound to this line, if any.
    pub fn output(&self) -> Option<&str> {
        match &self.kind {
            LineKind::Input {
                role: Role::Output(o),
                ..
            } => Some(o),
            LineKind::Ancilla { output } => output.as_deref(),
            _ => None,
        }
    }
}

/// A rotation on `target`, optionally controlled by `control`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Gate {
    pub axis: Axis,
    pub angle: Angle,
    pub target: usize,
    pub control: Option<usize>,
}

impl Gate {
    pub fn rx(target: usize, angle: Angle) -> Self {
        Gate {
            axis: Axis::X,
            angle,
            target,
            control: None,
        }
    }

    pub fn crx(control: usize, target: usize, angle: Angle) -> Self {
        Gate {
            axis: Axis::X,
            angle,
            target,
            control: Some(control),
        }
    }

    pub fn rz(target: usize, angle: Angle) -> Self {
        Gate {
            axis: Axis::Z,
            angle,
            target,
            control: None,
        }
    }

    pub fn crz(control: usize, target: usize, angle: Angle) -> Self {
        Gate {
            axis: Axis::Z,
            angle,
            target,
            control: Some(control),
        }
    }

    pub fn inverse(&self) -> Gate {
        Gate {
            angle: -&self.angle,
            ..self.clone()
        }
    }

    pub fn lines(&self) -> impl Iterator<Item = usize> {
        std::iter::once(self.target).chain(self.control)
    }
}

fn sum_wraps(a: &Angle, b: &Angle) -> bool {
    let raw = a.ratio() + b.ratio();
    let one = BigRational::one();
    raw > one || raw <= -one
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Circuit {
    pub lines: Vec<Line>,
    pub gates: Vec<Gate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputBinding {
    pub name: String,
    pub line: usize,
}

/// Summary counts of a circuit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub one_qubit: usize,
    pub two_qubit: usize,
    pub ancillae: usize,
    pub depth: usize,
    pub lines: usize,
    pub outputs: Vec<OutputBinding>,
}

impl Circuit {
    pub fn new(lines: Vec<Line>) -> Self {
        Circuit {
            lines,
            gates: Vec::new(),
        }
    }

    /// Appends a gate; zero-angle gates are dropped.
    pub fn push(&mut self, gate: Gate) {
        assert!(gate.target < self.lines.len(), "target out of range");
        if let Some(c) = gate.control {
            assert!(c < self.lines.len() && c != gate.target, "bad control line");
        }
        if !gate.angle.is_zero() {
            self.gates.push(gate);
        }
    }

    pub fn num_lines(&self) -> usize {
        self.lines.len()
    }

    /// Input lines as (line index, name).
    pub fn inputs(&self) -> Vec<(usize, &str)> {
        self.lines
            .iter()
            .enumerate()
            .filter_map(|(i, l)| match &l.kind {
                LineKind::Input { name, .. } => Some((i, name.as_str())),
                LineKind::Ancilla { .. } => None,
            })
            .collect()
    }

    pub fn outputs(&self) -> Vec<OutputBinding> {
        self.lines
            .iter()
            .enumerate()
            .filter_map(|(i, l)| {
                l.output().map(|name| OutputBinding {
                    name: name.to_string(),
                    line: i,
                })
            })
            .collect()
    }

    pub fn output_line(&self, name: &str) -> Option<usize> {
        self.lines.iter().position(|l| l.output() == Some(name))
    }

    pub fn ancillae(&self) -> usize {
        self.lines.iter().filter(|l| l.is_ancilla()).count()
    }

    pub fn two_qubit(&self) -> usize {
        self.gates.iter().filter(|g| g.control.is_some()).count()
    }

    pub fn one_qubit(&self) -> usize {
        self.gates.len() - self.two_qubit()
    }

    pub fn stats(&self) -> Stats {
        Stats {
            one_qubit: self.one_qubit(),
            two_qubit: self.two_qubit(),
            ancillae: self.ancillae(),
            depth: self.depth(),
            lines: self.num_lines(),
            outputs: self.outputs(),
        }
    }

    /// Gates reversed with negated angles. A controlled π rotation negates to
    /// itself, so an Rz(π) on its control supplies the missing controlled −1.
    pub fn inverse(&self) -> Circuit {
        let mut gates = Vec::with_capacity(self.gates.len());
        for g in self.gates.iter().rev() {
            gates.push(g.inverse());
            if let (Some(c), true) = (g.control, g.angle.is_pi()) {
                gates.push(Gate::rz(c, Angle::pi()));
            }
        }
        Circuit {
            lines: self.lines.clone(),
            gates,
        }
    }

    /// Merges adjacent gates with the same axis, control and target, dropping
    /// those that cancel. Controlled gates are only merged when the plain sum
    /// stays in (−π, π], since a wrap by 2π would flip the controlled sign.
    pub fn merge_rotations(&self) -> Circuit {
        let mut out: Vec<Gate> = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            match out.last_mut() {
                Some(last)
                    if last.axis == g.axis
                        && last.control == g.control
                        && last.target == g.target
                        && (g.control.is_none() || !sum_wraps(&last.angle, &g.angle)) =>
                {
                    last.angle = &last.angle + &g.angle;
                    if last.angle.is_zero() {
                        out.pop();
                    }
                }
                _ => out.push(g.clone()),
            }
        }
        Circuit {
            lines: self.lines.clone(),
            gates: out,
        }
    }

    /// ASAP layering in gate order: each gate goes one layer after the latest
    /// gate on any of its lines.
    pub fn layers(&self) -> Vec<Vec<usize>> {
        let mut last = vec![0usize; self.lines.len()];
        let mut layers: Vec<Vec<usize>> = Vec::new();
        for (i, g) in self.gates.iter().enumerate() {
            let layer = 1 + g.lines().map(|l| last[l]).max().unwrap_or(0);
            for l in g.lines() {
                last[l] = layer;
            }
            if layers.len() < layer {
                layers.resize(layer, Vec::new());
            }
            layers[layer - 1].push(i);
        }
        layers
    }

    pub fn depth(&self) -> usize {
        self.layers().len()
    }

    /// Reorders gates to lower depth, moving a gate past another only when
    /// the two commute (every shared line is used diagonally by both, or as
    /// an X target by both).
    #[allow(clippy::needless_range_loop)]
    pub fn reschedule(&self) -> Circuit {
        let n = self.gates.len();
        let uses = |g: &Gate, l: usize| -> Option<bool> {
            if g.control == Some(l) {
                Some(true)
            } else if g.target == l {
                Some(g.axis == Axis::Z)
            } else {
                None
            }
        };
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut succs: Vec<Vec<usize>> = vec![Vec::new(); n];
        for j in 0..n {
            for i in 0..j {
                let (gi, gj) = (&self.gates[i], &self.gates[j]);
                let conflict = gi.lines().any(|l| match (uses(gi, l), uses(gj, l)) {
                    (Some(a), Some(b)) => a != b,
                    _ => false,
                });
                if conflict {
                    preds[j].push(i);
                    succs[i].push(j);
                }
            }
        }
        // Longest path to a sink, counted in gates.
        let mut tail = vec![1usize; n];
        for i in (0..n).rev() {
            tail[i] = 1 + succs[i].iter().map(|&j| tail[j]).max().unwrap_or(0);
        }
        let mut load = vec![0usize; self.lines.len()];
        for g in &self.gates {
            for l in g.lines() {
                load[l] += 1;
            }
        }
        let mut remaining_preds: Vec<usize> = preds.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| remaining_preds[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while !ready.is_empty() {
            let mut cands: Vec<usize> = ready.iter().copied().collect();
            cands.sort_by_key(|&i| {
                let g = &self.gates[i];
                let l = g.lines().map(|l| load[l]).max().unwrap_or(0);
                (std::cmp::Reverse(tail[i]), std::cmp::Reverse(l), i)
            });
            let mut busy = vec![false; self.lines.len()];
            let mut layer = Vec::new();
            for i in cands {
                let g = &self.gates[i];
                if g.lines().any(|l| busy[l]) {
                    continue;
                }
                for l in g.lines() {
                    busy[l] = true;
                }
                layer.push(i);
            }
            for &i in &layer {
                ready.remove(&i);
                for l in self.gates[i].lines() {
                    load[l] -= 1;
                }
            }
            for &i in &layer {
                for &j in &succs[i] {
                    remaining_preds[j] -= 1;
                    if remaining_preds[j] == 0 {
                        ready.insert(j);
                    }
                }
            }
            order.extend(layer);
        }
        Circuit {
            lines: self.lines.clone(),
            gates: order.into_iter().map(|i| self.gates[i].clone()).collect(),
        }
    }

    /// Concatenation on a shared line layout.
    pub fn then(&self, other: &Circuit) -> Circuit {
        assert_eq!(self.lines.len(), other.lines.len());
        let mut out = self.clone();
        out.gates.extend(other.gates.iter().cloned());
        out
    }

    pub fn write_text(&self) -> String {
        let mut s = String::from("qrot-circuit v1\n");
        let _ = writeln!(s, "lines {}", self.lines.len());
        for (i, l) in self.lines.iter().enumerate() {
            match &l.kind {
                LineKind::Input { name, role } => {
                    let _ = match role {
                        Role::Restore => writeln!(s, "line {i} input {name} restore"),
                        Role::Output(o) => writeln!(s, "line {i} input {name} output {o}"),
                        Role::Free => writeln!(s, "line {i} input {name}"),
                    };
                }
                LineKind::Ancilla { output: Some(o) } => {
                    let _ = writeln!(s, "line {i} ancilla output {o}");
                }
                LineKind::Ancilla { output: None } => {
                    let _ = writeln!(s, "line {i} ancilla");
                }
            }
        }
        for g in &self.gates {
            let op = match g.axis {
                Axis::X => "rx",
                Axis::Z => "rz",
            };
            let _ = match g.control {
                Some(c) => writeln!(s, "gate c{op} {c} {} {}", g.target, g.angle),
                None => writeln!(s, "gate {op} {} {}", g.target, g.angle),
            };
        }
        s
    }

    pub fn read_text(text: &str) -> Result<Circuit, ParseError> {
        Parser::default().parse(text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Default)]
struct Parser {
    lines: Option<Vec<Option<Line>>>,
    gates: Vec<Gate>,
    header: bool,
}

impl Parser {
    fn parse(mut self, text: &str) -> Result<Circuit, ParseError> {
        let mut last_line = 0;
        for (ln, raw) in text.lines().enumerate() {
            let ln = ln + 1;
            last_line = ln;
            let content = raw.split('#').next().unwrap_or("");
            let toks: Vec<(usize, &str)> = tokens(content);
            if toks.is_empty() {
                continue;
            }
            let err = |col: usize, msg: String| ParseError { line: ln, col, msg };
            if !self.header {
                if toks.len() != 2 || toks[0].1 != "qrot-circuit" || toks[1].1 != "v1" {
                    return Err(err(toks[0].0, "expected header `qrot-circuit v1`".into()));
                }
                self.header = true;
                continue;
            }
            match toks[0].1 {
                "lines" => {
                    if self.lines.is_some() {
                        return Err(err(toks[0].0, "duplicate `lines`".into()));
                    }
                    let n = expect_count(&toks, 1, ln)?;
                    expect_end(&toks, 2, ln)?;
                    self.lines = Some(vec![None; n]);
                }
                "line" => self.parse_line(&toks, ln)?,
                "gate" => self.parse_gate(&toks, ln)?,
                other => return Err(err(toks[0].0, format!("unknown directive `{other}`"))),
            }
        }
        let eof = |msg: &str| ParseError {
            line: last_line.max(1),
            col: 1,
            msg: msg.to_string(),
        };
        if !self.header {
            return Err(eof("missing header `qrot-circuit v1`"));
        }
        let lines = self.lines.ok_or_else(|| eof("missing `lines` declaration"))?;
        let mut out = Vec::with_capacity(lines.len());
        for (i, l) in lines.into_iter().enumerate() {
            out.push(l.ok_or_else(|| eof(&format!("line {i} is not declared")))?);
        }
        Ok(Circuit {
            lines: out,
            gates: self.gates,
        })
    }

    fn count(&self, toks: &[(usize, &str)], ln: usize) -> Result<usize, ParseError> {
        self.lines.as_ref().map(Vec::len).ok_or(ParseError {
            line: ln,
            col: toks[0].0,
            msg: "`lines` must come first".into(),
        })
    }

    fn parse_line(&mut self, toks: &[(usize, &str)], ln: usize) -> Result<(), ParseError> {
        let n = self.count(toks, ln)?;
        let idx = expect_index(toks, 1, n, ln)?;
        let kind_tok = toks.get(2).ok_or(ParseError {
            line: ln,
            col: toks[1].0 + toks[1].1.len(),
            msg: "expected `input` or `ancilla`".into(),
        })?;
        let line = match kind_tok.1 {
            "input" => {
                let name = toks.get(3).ok_or(ParseError {
                    line: ln,
                    col: kind_tok.0 + kind_tok.1.len(),
                    msg: "expected input name".into(),
                })?;
                let role = match toks.get(4) {
                    None => Role::Free,
                    Some((_, "restore")) => {
                        expect_end(toks, 5, ln)?;
                        Role::Restore
                    }
                    Some((_, "output")) => {
                        let o = expect_word(toks, 5, ln, "output name")?;
                        expect_end(toks, 6, ln)?;
                        Role::Output(o.to_string())
                    }
                    Some((c, w)) => {
                        return Err(ParseError {
                            line: ln,
                            col: *c,
                            msg: format!("expected `restore` or `output`, found `{w}`"),
                        })
                    }
                };
                Line::input(name.1, role)
            }
            "ancilla" => {
                let output = match toks.get(3) {
                    None => None,
                    Some((_, "output")) => {
                        let o = expect_word(toks, 4, ln, "output name")?;
                        expect_end(toks, 5, ln)?;
                        Some(o.to_string())
                    }
                    Some((c, w)) => {
                        return Err(ParseError {
                            line: ln,
                            col: *c,
                            msg: format!("expected `output`, found `{w}`"),
                        })
                    }
                };
                Line::ancilla(output)
            }
            other => {
                return Err(ParseError {
                    line: ln,
                    col: kind_tok.0,
                    msg: format!("expected `input` or `ancilla`, found `{other}`"),
                })
            }
        };
        let slot = &mut self.lines.as_mut().expect("checked")[idx];
        if slot.is_some() {
            return Err(ParseError {
                line: ln,
                col: toks[1].0,
                msg: format!("line {idx} declared twice"),
            });
        }
        *slot = Some(line);
        Ok(())
    }

    fn parse_gate(&mut self, toks: &[(usize, &str)], ln: usize) -> Result<(), ParseError> {
        let n = self.count(toks, ln)?;
        let op = expect_word(toks, 1, ln, "gate kind")?;
        let (axis, controlled) = match op {
            "rx" => (Axis::X, false),
            "rz" => (Axis::Z, false),
            "crx" => (Axis::X, true),
            "crz" => (Axis::Z, true),
            other => {
                return Err(ParseError {
                    line: ln,
                    col: toks[1].0,
                    msg: format!("unknown gate `{other}`"),
                })
            }
        };
        let mut pos = 2;
        let control = if controlled {
            pos += 1;
            Some(expect_index(toks, 2, n, ln)?)
        } else {
            None
        };
        let target = expect_index(toks, pos, n, ln)?;
        if control == Some(target) {
            return Err(ParseError {
                line: ln,
                col: toks[pos].0,
                msg: "control and target coincide".into(),
            });
        }
        let angle_tok = expect_word(toks, pos + 1, ln, "angle")?;
        let angle: Angle = angle_tok.parse().map_err(|e| ParseError {
            line: ln,
            col: toks[pos + 1].0,
            msg: format!("bad angle `{angle_tok}`: {e}"),
        })?;
        expect_end(toks, pos + 2, ln)?;
        if angle.is_zero() {
            return Err(ParseError {
                line: ln,
                col: toks[pos + 1].0,
                msg: "zero-angle gate".into(),
            });
        }
        self.gates.push(Gate {
            axis,
            angle,
            target,
            control,
        });
        Ok(())
    }
}

/// Whitespace-separated tokens with 1-based columns.
fn tokens(s: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in s.char_indices() {
        if ch.is_whitespace() {
            if let Some(st) = start.take() {
                out.push((st, &s[st..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(st) = start {
        out.push((st, &s[st..]));
    }
    out.into_iter()
        .map(|(st, t)| (s[..st].chars().count() + 1, t))
        .collect()
}

fn expect_word<'a>(toks: &[(usize, &'a str)], i: usize, ln: usize, what: &str) -> Result<&'a str, ParseError> {
    toks.get(i).map(|t| t.1).ok_or_else(|| {
        let (c, t) = toks[toks.len() - 1];
        ParseError {
            line: ln,
            col: c + t.chars().count(),
            msg: format!("expected {what}"),
        }
    })
}

fn expect_count(toks: &[(usize, &str)], i: usize, ln: usize) -> Result<usize, ParseError> {
    let w = expect_word(toks, i, ln, "a number")?;
    w.parse().map_err(|_| ParseError {
        line: ln,
        col: toks[i].0,
        msg: format!("expected a number, found `{w}`"),
    })
}

fn expect_index(toks: &[(usize, &str)], i: usize, n: usize, ln: usize) -> Result<usize, ParseError> {
    let v = expect_count(toks, i, ln)?;
    if v >= n {
        return Err(ParseError {
            line: ln,
            col: toks[i].0,
            msg: format!("line index {v} out of range (lines {n})"),
        });
    }
    Ok(v)
}

fn expect_end(toks: &[(usize, &str)], i: usize, ln: usize) -> Result<(), ParseError> {
    match toks.get(i) {
        None => Ok(()),
        Some((c, t)) => Err(ParseError {
            line: ln,
            col: *c,
            msg: format!("unexpected `{t}`"),
        }),
    }
}

// ---------------------------------------------------------------------------
// Compilation

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompileOptions {
    /// Uncompute every materialised control after use.
    pub restore_inputs: bool,
    /// Reuse an input line as the output target when the leaf ends in (v, π).
    pub inplace_target: bool,
    pub max_ancillae: Option<usize>,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            restore_inputs: true,
            inplace_target: true,
            max_ancillae: None,
        }
    }
}

/// The factored form(s) for one output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaskForms {
    /// Target ends in Rx(f(U))0̂.
    X(FactoredForm),
    /// Target ends in Rz(z(U))Rx(x(U))0̂.
    ZX { x: FactoredForm, z: FactoredForm },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputTask {
    pub name: String,
    pub forms: TaskForms,
}

impl OutputTask {
    fn x_form(&self) -> &FactoredForm {
        match &self.forms {
            TaskForms::X(f) => f,
            TaskForms::ZX { x, .. } => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("ancilla budget of {0} exhausted")]
    AncillaBudget(usize),
    #[error("no consistent line assignment found")]
    NoAssignment,
    #[error("a control form is not Boolean")]
    NonBooleanControl,
    #[error("internal check failed: {0}")]
    Internal(String),
    #[error(transparent)]
    Dd(#[from] DdError),
}

enum Step {
    /// Line whose input value was needed after it had been overwritten.
    Conflict(usize),
    Fail(CompileError),
}

impl From<CompileError> for Step {
    fn from(e: CompileError) -> Self {
        Step::Fail(e)
    }
}

impl From<DdError> for Step {
    fn from(e: DdError) -> Self {
        Step::Fail(e.into())
    }
}

/// Compiles a single output.
pub fn compile(
    mgr: &mut Manager,
    name: &str,
    ff: &FactoredForm,
    opts: &CompileOptions,
) -> Result<Circuit, CompileError> {
    let task = OutputTask {
        name: name.to_string(),
        forms: TaskForms::X(ff.clone()),
    };
    compile_outputs(mgr, &[task], opts)
}

/// Compiles several outputs over the manager's variables (one input line
/// per variable, in order). Earlier outputs left on their lines are reused
/// as controls by later ones.
///
/// Two layouts are tried: all spine controls held at once (fewest gates),
/// and one control at a time, uncomputed before the next (fewest lines).
/// The result with fewer lines wins, then fewer gates.
pub fn compile_outputs(
    mgr: &mut Manager,
    tasks: &[OutputTask],
    opts: &CompileOptions,
) -> Result<Circuit, CompileError> {
    let batched = compile_layout(mgr, tasks, opts, false);
    let sequential = compile_layout(mgr, tasks, opts, true);
    match (batched, sequential) {
        (Ok(a), Ok(b)) => {
            let key = |c: &Circuit| (c.num_lines(), c.two_qubit(), c.gates.len());
            Ok(if key(&b) < key(&a) { b } else { a })
        }
        (Ok(a), Err(_)) => Ok(a),
        (Err(_), Ok(b)) => Ok(b),
        (Err(e), Err(_)) => Err(e),
    }
}

fn compile_layout(
    mgr: &mut Manager,
    tasks: &[OutputTask],
    opts: &CompileOptions,
    sequential: bool,
) -> Result<Circuit, CompileError> {
    let mut forbidden = BTreeSet::new();
    for _ in 0..=mgr.num_vars() + 1 {
        let mut cx = Compiler::new(mgr, opts, forbidden.clone(), sequential);
        match cx.run(tasks) {
            Ok(c) => return Ok(c),
            Err(Step::Fail(e)) => return Err(e),
            Err(Step::Conflict(line)) => {
                if !forbidden.insert(line) {
                    return Err(CompileError::NoAssignment);
                }
            }
        }
    }
    Err(CompileError::NoAssignment)
}

struct Compiler<'m> {
    mgr: &'m mut Manager,
    opts: &'m CompileOptions,
    forbidden: BTreeSet<usize>,
    reserved: BTreeSet<usize>,
    content: Vec<Option<Diagram>>,
    ancilla_outputs: Vec<Option<String>>,
    gates: Vec<Gate>,
    n_inputs: usize,
    diagrams: HashMap<*const FactoredForm, Diagram>,
    sequential: bool,
}

impl<'m> Compiler<'m> {
    fn new(mgr: &'m mut Manager, opts: &'m CompileOptions, forbidden: BTreeSet<usize>, sequential: bool) -> Self {
        let n = mgr.num_vars();
        let content = (0..n).map(|v| Some(mgr.var(v))).collect();
        Compiler {
            mgr,
            opts,
            forbidden,
            reserved: BTreeSet::new(),
            content,
            ancilla_outputs: Vec::new(),
            gates: Vec::new(),
            n_inputs: n,
            diagrams: HashMap::new(),
            sequential,
        }
    }

    fn diagram(&mut self, ff: &FactoredForm) -> Result<Diagram, Step> {
        let key = ff as *const FactoredForm;
        if let Some(d) = self.diagrams.get(&key) {
            return Ok(d.clone());
        }
        let d = form_to_diagram(self.mgr, ff)?;
        self.diagrams.insert(key, d.clone());
        Ok(d)
    }

    fn holds_var(&mut self, line: usize, v: usize) -> bool {
        let x = self.mgr.var(v);
        self.content[line].as_ref() == Some(&x)
    }

    fn alloc_ancilla(&mut self) -> Result<usize, Step> {
        // Reuse a cleared ancilla first.
        for l in self.n_inputs..self.content.len() {
            if !self.reserved.contains(&l) && self.content[l] == Some(Diagram::zero()) {
                return Ok(l);
            }
        }
        let used = self.content.len() - self.n_inputs;
        if let Some(max) = self.opts.max_ancillae {
            if used >= max {
                return Err(CompileError::AncillaBudget(max).into());
            }
        }
        self.content.push(Some(Diagram::zero()));
        self.ancilla_outputs.push(None);
        Ok(self.content.len() - 1)
    }

    fn emit(&mut self, gate: Gate) -> Result<(), Step> {
        if gate.angle.is_zero() {
            return Ok(());
        }
        let t = gate.target;
        let next = match (gate.axis, gate.control) {
            (Axis::Z, _) => None,
            (Axis::X, None) => self.content[t].as_ref().map(|d| d.rotated(&gate.angle)),
            (Axis::X, Some(c)) => match (&self.content[c], &self.content[t]) {
                (Some(cd), Some(td)) => {
                    let (cd, td) = (cd.clone(), td.clone());
                    if !self.mgr.is_boolean(&cd) {
                        return Err(CompileError::NonBooleanControl.into());
                    }
                    Some(self.mgr.apply(&cd, &gate.angle, &td)?)
                }
                _ => return Err(CompileError::Internal("control line lost its content".into()).into()),
            },
        };
        if gate.axis == Axis::Z {
            if let Some(c) = gate.control {
                if self.content[c].is_none() {
                    return Err(CompileError::Internal("control line lost its content".into()).into());
                }
            }
        }
        self.content[t] = next;
        self.gates.push(gate);
        Ok(())
    }

    /// A line holding variable `v`, preferring its own input line.
    fn var_line(&mut self, v: usize, exclude: &[usize]) -> Result<usize, Step> {
        if !exclude.contains(&v) && self.holds_var(v, v) {
            return Ok(v);
        }
        for l in 0..self.content.len() {
            if !exclude.contains(&l) && self.holds_var(l, v) {
                return Ok(l);
            }
        }
        Err(Step::Conflict(v))
    }

    fn find_line(&self, d: &Diagram, exclude: &[usize]) -> Option<usize> {
        (0..self.content.len()).find(|l| !exclude.contains(l) && self.content[*l].as_ref() == Some(d))
    }

    fn can_consume(&mut self, v: usize) -> bool {
        !self.forbidden.contains(&v) && !self.reserved.contains(&v) && self.holds_var(v, v)
    }

    /// Brings the Boolean form `g` onto some line and returns it.
    fn materialize(&mut self, g: &FactoredForm, exclude: &[usize]) -> Result<usize, Step> {
        let target = self.diagram(g)?;
        if let Some(l) = self.find_line(&target, exclude) {
            return Ok(l);
        }
        let (spine, leaf) = g.spine();
        let mut terms = leaf.terms.clone();
        let host = match terms.last() {
            Some((v, a)) if a.is_pi() && !exclude.contains(v) && self.can_consume(*v) => {
                let v = *v;
                terms.pop();
                v
            }
            _ => self.alloc_ancilla()?,
        };
        let mut inner_ex = exclude.to_vec();
        inner_ex.push(host);
        self.emit(Gate::rx(host, leaf.prefix.clone()))?;
        for (v, a) in terms.iter().rev() {
            let c = self.var_line(*v, &inner_ex)?;
            self.emit(Gate::crx(c, host, a.clone()))?;
        }
        let mut found = Vec::with_capacity(spine.len());
        for (ctrl, _) in &spine {
            found.push(self.materialize(ctrl, &inner_ex)?);
        }
        for (i, (ctrl, gamma)) in spine.iter().enumerate().rev() {
            let d = self.diagram(ctrl)?;
            let line = self.find_line(&d, &inner_ex).ok_or(Step::Conflict(found[i]))?;
            self.emit(Gate::crx(line, host, (*gamma).clone()))?;
        }
        if self.content[host].as_ref() != Some(&target) {
            return Err(CompileError::Internal("materialised line differs from its form".into()).into());
        }
        Ok(host)
    }

    /// Phases B and C for one top-level form on target `t`, plus phase D.
    fn emit_spine(&mut self, ff: &FactoredForm, t: usize, axis: Axis) -> Result<(), Step> {
        let (spine, _) = ff.spine();
        if self.sequential {
            for (ctrl, gamma) in spine.iter().rev() {
                let start = self.gates.len();
                let line = self.materialize(ctrl, &[t])?;
                let end = self.gates.len();
                self.emit(Gate {
                    axis,
                    angle: (*gamma).clone(),
                    target: t,
                    control: Some(line),
                })?;
                if self.opts.restore_inputs {
                    self.undo(start, end)?;
                }
            }
            return Ok(());
        }
        let start = self.gates.len();
        let mut found = Vec::with_capacity(spine.len());
        for (ctrl, _) in &spine {
            found.push(self.materialize(ctrl, &[t])?);
        }
        let end = self.gates.len();
        for (i, (ctrl, gamma)) in spine.iter().enumerate().rev() {
            let d = self.diagram(ctrl)?;
            let line = self.find_line(&d, &[t]).ok_or(Step::Conflict(found[i]))?;
            self.emit(Gate {
                axis,
                angle: (*gamma).clone(),
                target: t,
                control: Some(line),
            })?;
        }
        if self.opts.restore_inputs {
            self.undo(start, end)?;
        }
        Ok(())
    }

    /// Emits the inverse of gates `start..end`.
    fn undo(&mut self, start: usize, end: usize) -> Result<(), Step> {
        let undo: Vec<Gate> = self.gates[start..end].iter().rev().map(Gate::inverse).collect();
        for g in undo {
            self.emit(g)?;
        }
        Ok(())
    }

    fn run(&mut self, tasks: &[OutputTask]) -> Result<Circuit, Step> {
        // Phase A: targets, prefixes and all leaf terms.
        let mut targets = Vec::with_capacity(tasks.len());
        let mut leaf_terms: Vec<Vec<(usize, Angle)>> = Vec::with_capacity(tasks.len());
        for task in tasks {
            let (_, leaf) = task.x_form().spine();
            let mut terms = leaf.terms.clone();
            let t = match terms.last() {
                Some((v, a)) if self.opts.inplace_target && a.is_pi() && self.can_consume(*v) => {
                    let v = *v;
                    terms.pop();
                    v
                }
                _ => {
                    let l = self.alloc_ancilla()?;
                    self.ancilla_outputs[l - self.n_inputs] = Some(task.name.clone());
                    l
                }
            };
            self.reserved.insert(t);
            targets.push(t);
            leaf_terms.push(terms);
        }
        for (task, &t) in tasks.iter().zip(&targets) {
            let (_, leaf) = task.x_form().spine();
            self.emit(Gate::rx(t, leaf.prefix.clone()))?;
        }
        for v in (0..self.n_inputs).rev() {
            for (k, &t) in targets.iter().enumerate() {
                if let Some((_, a)) = leaf_terms[k].iter().find(|(u, _)| *u == v) {
                    let a = a.clone();
                    let c = self.var_line(v, &[t])?;
                    self.emit(Gate::crx(c, t, a))?;
                }
            }
        }
        // Per output: spine controls, rotations, uncompute.
        for (task, &t) in tasks.iter().zip(&targets) {
            self.emit_spine(task.x_form(), t, Axis::X)?;
            if let TaskForms::ZX { z, .. } = &task.forms {
                let (_, leaf) = z.spine();
                self.emit(Gate::rz(t, leaf.prefix.clone()))?;
                for (v, a) in leaf.terms.iter().rev() {
                    let c = self.var_line(*v, &[t])?;
                    self.emit(Gate::crz(c, t, a.clone()))?;
                }
                self.emit_spine(z, t, Axis::Z)?;
            }
        }
        // Final symbolic check and line roles.
        for (task, &t) in tasks.iter().zip(&targets) {
            if let TaskForms::X(ff) = &task.forms {
                let d = self.diagram(ff)?;
                if self.content[t].as_ref() != Some(&d) {
                    return Err(CompileError::Internal(format!("output `{}` differs from its form", task.name)).into());
                }
            }
        }
        let mut lines = Vec::with_capacity(self.content.len());
        for v in 0..self.n_inputs {
            let name = self.mgr.name(v).to_string();
            let role = if let Some(k) = targets.iter().position(|&t| t == v) {
                Role::Output(tasks[k].name.clone())
            } else if self.holds_var(v, v) {
                Role::Restore
            } else {
                if self.opts.restore_inputs {
                    return Err(CompileError::Internal(format!("input `{name}` not restored")).into());
                }
                Role::Free
            };
            lines.push(Line::input(name, role));
        }
        for out in &self.ancilla_outputs {
            lines.push(Line::ancilla(out.clone()));
        }
        Ok(Circuit {
            lines,
            gates: std::mem::take(&mut self.gates),
        })
    }
}

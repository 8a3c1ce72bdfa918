//! Rotation-based decision diagrams.
//!
//! A diagram maps each assignment of Boolean variables to a rotation angle.
//! Nodes carry a weight on their 1̂-edge only; 0̂-edges are unweighted and the
//! remaining offset sits on the root. With hash-consing this makes every
//! function have exactly one representation inside a [`Manager`].

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::angle::Angle;
use crate::factor::CascadeExpr;

/// Rotation axis of a diagram or gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Z,
}

/// Reference to an interned node, or the terminal 0̂.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef(u32);

impl NodeRef {
    pub const TERMINAL: NodeRef = NodeRef(0);

    pub fn is_terminal(self) -> bool {
        self == Self::TERMINAL
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// An internal node: `var` decides between `lo` (0̂, unweighted) and `hi`
/// (1̂, weighted by `hi_weight`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Node {
    pub var: usize,
    pub lo: NodeRef,
    pub hi: NodeRef,
    pub hi_weight: Angle,
}

/// A root-weighted handle into a manager's node store.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Diagram {
    pub root_weight: Angle,
    pub root: NodeRef,
}

impl Diagram {
    /// The constant function with the given angle.
    pub fn constant(angle: Angle) -> Self {
        Diagram {
            root_weight: angle,
            root: NodeRef::TERMINAL,
        }
    }

    /// The constant 0̂.
    pub fn zero() -> Self {
        Self::constant(Angle::zero())
    }

    /// Same graph with `gamma` added to the root weight.
    pub fn rotated(&self, gamma: &Angle) -> Diagram {
        Diagram {
            root_weight: &self.root_weight + gamma,
            root: self.root,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.root.is_terminal()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DdError {
    #[error("variable order violated: node on `{parent}` has a child on `{child}`")]
    Order { parent: String, child: String },
    #[error("control operand is not Boolean: path [{path}] evaluates to {value}")]
    NonBoolean { path: String, value: Angle },
    #[error("angle {alpha} is not a rotation class of variable `{var}`")]
    NotAClass { var: String, alpha: Angle },
    #[error("table error: {0}")]
    Table(String),
}

type ApplyKey = (Angle, NodeRef, Angle, NodeRef);

/// Node store, unique table and apply memo for one variable order.
#[derive(Debug, Clone)]
pub struct Manager {
    names: Vec<String>,
    axis: Axis,
    nodes: Vec<Node>,
    unique: HashMap<Node, NodeRef>,
    apply_memo: HashMap<ApplyKey, Diagram>,
}

const TERMINAL_LEVEL: usize = usize::MAX;

impl Manager {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>, axis: Axis) -> Self {
        let placeholder = Node {
            var: TERMINAL_LEVEL,
            lo: NodeRef::TERMINAL,
            hi: NodeRef::TERMINAL,
            hi_weight: Angle::zero(),
        };
        Manager {
            names: names.into_iter().map(Into::into).collect(),
            axis,
            nodes: vec![placeholder],
            unique: HashMap::new(),
            apply_memo: HashMap::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, var: usize) -> &str {
        &self.names[var]
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    /// The node behind a non-terminal reference.
    pub fn node(&self, r: NodeRef) -> &Node {
        debug_assert!(!r.is_terminal());
        &self.nodes[r.index()]
    }

    /// Variable index of a reference; the terminal sorts after every variable.
    pub fn level(&self, r: NodeRef) -> usize {
        if r.is_terminal() {
            TERMINAL_LEVEL
        } else {
            self.nodes[r.index()].var
        }
    }

    /// All interned nodes (the terminal placeholder excluded).
    pub fn live_nodes(&self) -> impl Iterator<Item = (NodeRef, &Node)> {
        self.nodes
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, n)| (NodeRef(i as u32), n))
    }

    /// Creates (or finds) the node deciding `var` between two sub-diagrams,
    /// moving the weight difference onto the 1̂-edge.
    pub fn mk_node(&mut self, var: usize, lo: &Diagram, hi: &Diagram) -> Result<Diagram, DdError> {
        for child in [lo.root, hi.root] {
            let lvl = self.level(child);
            if lvl <= var {
                return Err(DdError::Order {
                    parent: self.names[var].clone(),
                    child: self.names[lvl].clone(),
                });
            }
        }
        let hi_weight = &hi.root_weight - &lo.root_weight;
        if lo.root == hi.root && hi_weight.is_zero() {
            return Ok(lo.clone());
        }
        let node = Node {
            var,
            lo: lo.root,
            hi: hi.root,
            hi_weight,
        };
        let root = match self.unique.get(&node) {
            Some(&r) => r,
            None => {
                let r = NodeRef(u32::try_from(self.nodes.len()).expect("node store overflow"));
                self.nodes.push(node.clone());
                self.unique.insert(node, r);
                r
            }
        };
        Ok(Diagram {
            root_weight: lo.root_weight.clone(),
            root,
        })
    }

    /// The Boolean variable `v`, i.e. vRx(π)0̂.
    pub fn var(&mut self, v: usize) -> Diagram {
        self.mk_node(v, &Diagram::zero(), &Diagram::constant(Angle::pi()))
            .expect("terminal children are always ordered")
    }

    /// Builds the diagram of a full table. `table[i]` is the value for the
    /// assignment whose bits, read with variable 0 as the most significant
    /// bit, spell `i`.
    pub fn from_table(&mut self, table: &[Angle]) -> Result<Diagram, DdError> {
        let n = self.num_vars();
        if n >= usize::BITS as usize || table.len() != 1usize << n {
            return Err(DdError::Table(format!(
                "expected {} rows for {} variables, got {}",
                1u128 << n.min(127),
                n,
                table.len()
            )));
        }
        Ok(self.build(0, table))
    }

    fn build(&mut self, var: usize, table: &[Angle]) -> Diagram {
        if table.len() == 1 {
            return Diagram::constant(table[0].clone());
        }
        let (lo_rows, hi_rows) = table.split_at(table.len() / 2);
        let lo = self.build(var + 1, lo_rows);
        let hi = self.build(var + 1, hi_rows);
        self.mk_node(var, &lo, &hi).expect("built bottom-up in order")
    }

    /// Builds a diagram from explicit rows, rejecting missing or repeated
    /// assignments.
    pub fn from_rows(&mut self, rows: &[(Vec<bool>, Angle)]) -> Result<Diagram, DdError> {
        let n = self.num_vars();
        let mut table: Vec<Option<Angle>> = vec![None; 1usize << n];
        for (bits, angle) in rows {
            if bits.len() != n {
                return Err(DdError::Table(format!(
                    "assignment {} has {} bits, expected {n}",
                    bit_string(bits),
                    bits.len()
                )));
            }
            let idx = assignment_index(bits);
            if table[idx].is_some() {
                return Err(DdError::Table(format!("duplicate row {}", bit_string(bits))));
            }
            table[idx] = Some(angle.clone());
        }
        let mut full = Vec::with_capacity(table.len());
        for (i, slot) in table.into_iter().enumerate() {
            match slot {
                Some(a) => full.push(a),
                None => {
                    return Err(DdError::Table(format!(
                        "missing row {}",
                        bit_string(&index_assignment(i, n))
                    )))
                }
            }
        }
        self.from_table(&full)
    }

    /// Path-sum value of `d` under the full assignment `u`.
    pub fn eval(&self, d: &Diagram, u: &[bool]) -> Angle {
        let mut acc = d.root_weight.clone();
        let mut r = d.root;
        while !r.is_terminal() {
            let node = self.node(r);
            if u[node.var] {
                acc = &acc + &node.hi_weight;
                r = node.hi;
            } else {
                r = node.lo;
            }
        }
        acc
    }

    /// Adds `gamma` to the root weight.
    pub fn rotate(&self, d: &Diagram, gamma: &Angle) -> Diagram {
        d.rotated(gamma)
    }

    /// True iff every path value is 0 or π.
    pub fn is_boolean(&self, d: &Diagram) -> bool {
        self.non_boolean_witness(d).is_none()
    }

    /// A path and its value when `d` is not Boolean.
    pub fn non_boolean_witness(&self, d: &Diagram) -> Option<(Vec<(usize, bool)>, Angle)> {
        let mut visited = HashSet::new();
        let mut path = Vec::new();
        self.witness_rec(d.root, d.root_weight.clone(), &mut path, &mut visited)
            .map(|value| (path, value))
    }

    fn witness_rec(
        &self,
        r: NodeRef,
        offset: Angle,
        path: &mut Vec<(usize, bool)>,
        visited: &mut HashSet<(NodeRef, Angle)>,
    ) -> Option<Angle> {
        if !visited.insert((r, offset.clone())) {
            return None;
        }
        if r.is_terminal() {
            return if offset.is_zero() || offset.is_pi() {
                None
            } else {
                Some(offset)
            };
        }
        let node = self.node(r).clone();
        path.push((node.var, false));
        if let Some(v) = self.witness_rec(node.lo, offset.clone(), path, visited) {
            return Some(v);
        }
        path.pop();
        path.push((node.var, true));
        if let Some(v) = self.witness_rec(node.hi, &offset + &node.hi_weight, path, visited) {
            return Some(v);
        }
        path.pop();
        None
    }

    /// `g` rotated by `gamma` wherever the Boolean control `f` is 1̂.
    pub fn apply(&mut self, f: &Diagram, gamma: &Angle, g: &Diagram) -> Result<Diagram, DdError> {
        if let Some((path, value)) = self.non_boolean_witness(f) {
            let path = path
                .iter()
                .map(|&(v, b)| format!("{}={}", self.names[v], u8::from(b)))
                .collect::<Vec<_>>()
                .join(" ");
            return Err(DdError::NonBoolean { path, value });
        }
        Ok(self.apply_rec(f, gamma, g))
    }

    fn apply_rec(&mut self, f: &Diagram, gamma: &Angle, g: &Diagram) -> Diagram {
        if gamma.is_zero() {
            return g.clone();
        }
        if f.root.is_terminal() {
            debug_assert!(f.root_weight.is_zero() || f.root_weight.is_pi());
            return if f.root_weight.is_zero() {
                g.clone()
            } else {
                g.rotated(gamma)
            };
        }
        // g's root weight commutes with the whole operation, so the memo is
        // keyed on its bare graph.
        let key = (f.root_weight.clone(), f.root, gamma.clone(), g.root);
        let base = match self.apply_memo.get(&key) {
            Some(d) => d.clone(),
            None => {
                let bare = Diagram {
                    root_weight: Angle::zero(),
                    root: g.root,
                };
                let v = self.level(f.root).min(self.level(g.root));
                let (f0, f1) = self.cofactors(f, v);
                let (g0, g1) = self.cofactors(&bare, v);
                let h0 = self.apply_rec(&f0, gamma, &g0);
                let h1 = self.apply_rec(&f1, gamma, &g1);
                let d = self.mk_node(v, &h0, &h1).expect("cofactors are ordered");
                self.apply_memo.insert(key, d.clone());
                d
            }
        };
        base.rotated(&g.root_weight)
    }

    /// (d|v=0, d|v=1) for the variable `v` at or above the root's level.
    pub fn cofactors(&self, d: &Diagram, v: usize) -> (Diagram, Diagram) {
        if self.level(d.root) != v {
            return (d.clone(), d.clone());
        }
        let node = self.node(d.root);
        (
            Diagram {
                root_weight: d.root_weight.clone(),
                root: node.lo,
            },
            Diagram {
                root_weight: &d.root_weight + &node.hi_weight,
                root: node.hi,
            },
        )
    }

    fn reachable(&self, root: NodeRef) -> Vec<NodeRef> {
        let mut seen = HashSet::new();
        let mut order = Vec::new();
        let mut stack = vec![root];
        while let Some(r) = stack.pop() {
            if r.is_terminal() || !seen.insert(r) {
                continue;
            }
            order.push(r);
            let n = self.node(r);
            stack.push(n.hi);
            stack.push(n.lo);
        }
        order
    }

    /// Number of internal nodes reachable from `d`.
    pub fn size(&self, d: &Diagram) -> usize {
        self.reachable(d.root).len()
    }

    /// Variables that label some reachable node.
    pub fn support(&self, d: &Diagram) -> BTreeSet<usize> {
        self.reachable(d.root)
            .into_iter()
            .map(|r| self.node(r).var)
            .collect()
    }

    /// (number of nodes labelled `v`, whether some root-to-terminal path
    /// avoids all of them).
    pub fn count_nodes_with_var(&self, d: &Diagram, v: usize) -> (usize, bool) {
        let m = self
            .reachable(d.root)
            .into_iter()
            .filter(|&r| self.node(r).var == v)
            .count();
        let mut bypassed = false;
        let mut seen = HashSet::new();
        let mut stack = vec![d.root];
        while let Some(r) = stack.pop() {
            let lvl = self.level(r);
            if lvl > v {
                bypassed = true;
                break;
            }
            if lvl == v || !seen.insert(r) {
                continue;
            }
            let n = self.node(r);
            stack.push(n.lo);
            stack.push(n.hi);
        }
        (m, bypassed)
    }

    /// Distinct angles relating the two cofactors of `v`, sorted by value;
    /// the bypass class contributes angle 0.
    pub fn angle_classes(&self, d: &Diagram, v: usize) -> Vec<Angle> {
        let mut classes: BTreeSet<Angle> = self
            .reachable(d.root)
            .into_iter()
            .map(|r| self.node(r))
            .filter(|n| n.var == v)
            .map(|n| n.hi_weight.clone())
            .collect();
        if self.count_nodes_with_var(d, v).1 {
            classes.insert(Angle::zero());
        }
        classes.into_iter().collect()
    }

    /// Number of distinct relating angles minus one; zero iff `v` is r-linear.
    pub fn r_degree(&self, d: &Diagram, v: usize) -> usize {
        self.angle_classes(d, v).len().saturating_sub(1)
    }

    /// Scanning from the last variable, the first one with positive r-degree.
    pub fn lowest_rnonlinear(&self, d: &Diagram) -> Option<usize> {
        (0..self.num_vars()).rev().find(|&v| self.r_degree(d, v) > 0)
    }

    /// The class taken by the path that sets every variable before `v` to 0̂.
    pub fn all_zero_class(&self, d: &Diagram, v: usize) -> Angle {
        let mut r = d.root;
        while self.level(r) < v {
            r = self.node(r).lo;
        }
        if self.level(r) == v {
            self.node(r).hi_weight.clone()
        } else {
            Angle::zero()
        }
    }

    /// The cascade expression of a chain-shaped diagram, or `None` when some
    /// node branches.
    pub fn to_cascade(&self, d: &Diagram) -> Option<CascadeExpr> {
        let mut terms = Vec::new();
        let mut r = d.root;
        while !r.is_terminal() {
            let n = self.node(r);
            if n.lo != n.hi {
                return None;
            }
            terms.push((n.var, n.hi_weight.clone()));
            r = n.lo;
        }
        Some(CascadeExpr {
            prefix: d.root_weight.clone(),
            terms,
            axis: self.axis,
        })
    }

    /// The Boolean diagram g₁ = v_k Rx(π) g, where g is 1̂ exactly on the
    /// assignments whose v_k class is `alpha1`.
    pub fn g1_extract(&mut self, d: &Diagram, vk: usize, alpha1: &Angle) -> Result<Diagram, DdError> {
        if !self.angle_classes(d, vk).contains(alpha1) {
            return Err(DdError::NotAClass {
                var: self.names[vk].clone(),
                alpha: alpha1.clone(),
            });
        }
        let pivot = self.var(vk);
        let mut memo = HashMap::new();
        self.g1_rec(d.root, vk, alpha1, &pivot, &mut memo)
    }

    fn g1_rec(
        &mut self,
        r: NodeRef,
        vk: usize,
        alpha1: &Angle,
        pivot: &Diagram,
        memo: &mut HashMap<NodeRef, Diagram>,
    ) -> Result<Diagram, DdError> {
        let lvl = self.level(r);
        if lvl >= vk {
            let class = if lvl == vk {
                self.node(r).hi_weight.clone()
            } else {
                Angle::zero()
            };
            return Ok(if &class == alpha1 {
                pivot.rotated(&Angle::pi())
            } else {
                pivot.clone()
            });
        }
        if let Some(d) = memo.get(&r) {
            return Ok(d.clone());
        }
        let node = self.node(r).clone();
        let lo = self.g1_rec(node.lo, vk, alpha1, pivot, memo)?;
        let hi = self.g1_rec(node.hi, vk, alpha1, pivot, memo)?;
        let d = self.mk_node(node.var, &lo, &hi)?;
        memo.insert(r, d.clone());
        Ok(d)
    }

    /// Graphviz rendering: 1̂-edges solid and labelled, 0̂-edges dashed.
    pub fn to_dot(&self, d: &Diagram) -> String {
        let mut out = String::from("digraph rbdd {\n  node [shape=circle];\n");
        let _ = writeln!(out, "  root [shape=point];");
        let _ = writeln!(out, "  t [shape=box, label=\"0̂\"];");
        let id = |r: NodeRef| {
            if r.is_terminal() {
                "t".to_string()
            } else {
                format!("n{}", r.index())
            }
        };
        let _ = writeln!(out, "  root -> {} [label=\"{}\"];", id(d.root), d.root_weight);
        for r in self.reachable(d.root) {
            let n = self.node(r);
            let _ = writeln!(out, "  {} [label=\"{}\"];", id(r), self.names[n.var]);
            let _ = writeln!(out, "  {} -> {} [style=dashed];", id(r), id(n.lo));
            let _ = writeln!(out, "  {} -> {} [label=\"{}\"];", id(r), id(n.hi), n.hi_weight);
        }
        out.push_str("}\n");
        out
    }
}

/// Row index of an assignment (variable 0 is the most significant bit).
pub fn assignment_index(bits: &[bool]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b))
}

/// Inverse of [`assignment_index`].
pub fn index_assignment(index: usize, n: usize) -> Vec<bool> {
    (0..n).map(|v| (index >> (n - 1 - v)) & 1 == 1).collect()
}

/// `0`/`1` string of an assignment.
pub fn bit_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn a(p: i64, q: i64) -> Angle {
        Angle::new(p, q)
    }

    fn pi() -> Angle {
        Angle::pi()
    }

    fn mgr(names: &[&str]) -> Manager {
        Manager::new(names.iter().copied(), Axis::X)
    }

    fn table_of(n: usize, f: impl Fn(&[bool]) -> Angle) -> Vec<Angle> {
        (0..1usize << n).map(|i| f(&index_assignment(i, n))).collect()
    }

    /// r₁ = aRx(π/2)[bRx(π/2)[cRx(π)0̂]] and q₁ = aRx(π)b over (a, b, c).
    fn toffoli_parts(m: &mut Manager) -> (Diagram, Diagram) {
        let r1 = m
            .from_table(&table_of(3, |u| {
                let mut t = Angle::zero();
                if u[0] {
                    t = &t + &a(1, 2);
                }
                if u[1] {
                    t = &t + &a(1, 2);
                }
                if u[2] {
                    t = &t + &pi();
                }
                t
            }))
            .unwrap();
        let q1 = m
            .from_table(&table_of(3, |u| if u[0] ^ u[1] { pi() } else { Angle::zero() }))
            .unwrap();
        (r1, q1)
    }

    #[test]
    fn mk_node_examples() {
        let mut m = mgr(&["a", "b"]);
        let d = m.mk_node(0, &Diagram::zero(), &Diagram::constant(pi())).unwrap();
        assert_eq!(d.root_weight, Angle::zero());
        assert_eq!(m.node(d.root).hi_weight, pi());
        let same = m.mk_node(0, &d, &d);
        assert!(same.is_err(), "child on the same variable is an order error");
        let b = m.var(1);
        assert_eq!(m.mk_node(0, &b, &b).unwrap(), b);
        let d = m
            .mk_node(0, &Diagram::constant(a(1, 2)), &Diagram::constant(pi()))
            .unwrap();
        assert_eq!(d.root_weight, a(1, 2));
        assert_eq!(m.node(d.root).hi_weight, a(1, 2));
    }

    #[test]
    fn from_table_examples() {
        let mut m = mgr(&["a", "b"]);
        let x = m
            .from_table(&table_of(2, |u| if u[0] ^ u[1] { pi() } else { Angle::zero() }))
            .unwrap();
        assert_eq!(m.size(&x), 2);
        let top = m.node(x.root).clone();
        assert_eq!(top.var, 0);
        assert_eq!(top.hi_weight, pi());
        assert_eq!(top.lo, top.hi);
        assert_eq!(m.node(top.lo).var, 1);
        assert_eq!(m.node(top.lo).hi_weight, pi());

        assert_eq!(m.from_table(&table_of(2, |_| Angle::zero())).unwrap(), Diagram::zero());

        let mut m = mgr(&["b", "c"]);
        let r2 = m
            .from_table(&[Angle::zero(), pi(), a(1, 2), a(-1, 2)])
            .unwrap();
        let top = m.node(r2.root).clone();
        assert_eq!((top.var, top.hi_weight.clone()), (0, a(1, 2)));
        assert_eq!(top.lo, top.hi);
        assert_eq!(m.node(top.lo).hi_weight, pi());
        assert!(!m.is_boolean(&r2));
    }

    #[test]
    fn from_rows_validates() {
        let mut m = mgr(&["a", "b"]);
        let rows = vec![
            (vec![false, false], Angle::zero()),
            (vec![false, true], pi()),
            (vec![true, false], pi()),
        ];
        let err = m.from_rows(&rows).unwrap_err();
        assert!(err.to_string().contains("missing row 11"), "{err}");
        let mut dup = rows.clone();
        dup.push((vec![false, true], pi()));
        assert!(m.from_rows(&dup).unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn eval_and_rotate() {
        let mut m = mgr(&["a"]);
        let x = m.var(0);
        assert_eq!(m.eval(&x, &[true]), pi());
        assert_eq!(m.eval(&x, &[false]), Angle::zero());
        assert_eq!(m.rotate(&Diagram::zero(), &pi()), Diagram::constant(pi()));
        assert_eq!(m.rotate(&x, &Angle::zero()), x);
        let twice = m.rotate(&m.rotate(&x, &a(1, 2)), &a(1, 2));
        assert_eq!(twice, m.rotate(&x, &pi()));
    }

    #[test]
    fn worked_apply_example() {
        let mut m = mgr(&["a", "b", "c"]);
        let (r1, q1) = toffoli_parts(&mut m);
        let r = m.apply(&q1, &a(-1, 2), &r1).unwrap();
        let expect = m
            .from_table(&table_of(3, |u| if (u[0] && u[1]) ^ u[2] { pi() } else { Angle::zero() }))
            .unwrap();
        assert_eq!(r, expect);
        assert_eq!(m.eval(&r, &[true, true, false]), pi());
        // Under a = 0 the b node is elided and the edge lands on c.
        let top = m.node(r.root).clone();
        assert_eq!(top.var, 0);
        assert_eq!(m.node(top.lo).var, 2);
        assert_eq!(m.node(top.hi).var, 1);
        // The canonical shape has one b node, bypassed on the a = 0 branch;
        // together with the bypass it yields two rotation classes.
        assert_eq!(m.count_nodes_with_var(&r, 1), (1, true));
        assert_eq!(m.count_nodes_with_var(&r, 2), (1, false));
        assert_eq!(m.r_degree(&r, 1), 1);
        assert_eq!(m.r_degree(&r, 2), 0);
    }

    #[test]
    fn apply_terminal_cases() {
        let mut m = mgr(&["a", "b"]);
        let g = m.from_table(&[a(1, 4), pi(), a(-1, 2), Angle::zero()]).unwrap();
        assert_eq!(m.apply(&Diagram::zero(), &a(1, 3), &g).unwrap(), g);
        let f = m.var(0);
        assert_eq!(m.apply(&f, &Angle::zero(), &g).unwrap(), g);
        let bad = m.from_table(&[Angle::zero(), a(1, 2), Angle::zero(), pi()]).unwrap();
        let err = m.apply(&bad, &pi(), &g).unwrap_err();
        match err {
            DdError::NonBoolean { value, path } => {
                assert_eq!(value, a(1, 2));
                assert!(path.contains("b=1"), "{path}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn boolean_checks() {
        let mut m = mgr(&["a", "b"]);
        let x = m.var(0);
        assert!(m.is_boolean(&x));
        assert!(m.is_boolean(&Diagram::zero()));
        assert!(!m.is_boolean(&Diagram::constant(a(1, 2))));
    }

    #[test]
    fn absent_variable() {
        let mut m = mgr(&["a", "b"]);
        let x = m.var(0);
        assert_eq!(m.count_nodes_with_var(&x, 1), (0, true));
        assert_eq!(m.r_degree(&x, 1), 0);
    }

    #[test]
    fn lowest_rnonlinear_examples() {
        let mut m = mgr(&["a", "b", "c", "d"]);
        let s = m
            .from_table(&table_of(4, |u| {
                if (u[0] && u[1] && u[2]) ^ u[3] {
                    pi()
                } else {
                    Angle::zero()
                }
            }))
            .unwrap();
        assert_eq!(m.lowest_rnonlinear(&s), Some(2));
        assert_eq!(m.r_degree(&s, 2), 1);
        assert!(m.to_cascade(&s).is_none());

        let mut m = mgr(&["s", "x1", "x2"]);
        let mux = m
            .from_table(&table_of(3, |u| {
                let v = if u[0] { u[1] } else { u[2] };
                if v {
                    pi()
                } else {
                    Angle::zero()
                }
            }))
            .unwrap();
        assert_eq!(m.lowest_rnonlinear(&mux), Some(2));

        let mut m = mgr(&["a", "b"]);
        let x = m
            .from_table(&table_of(2, |u| if u[0] ^ u[1] { pi() } else { Angle::zero() }))
            .unwrap();
        assert_eq!(m.lowest_rnonlinear(&x), None);
    }

    #[test]
    fn cascade_examples() {
        let mut m = mgr(&["a", "b"]);
        let q1 = m
            .from_table(&table_of(2, |u| if u[0] ^ u[1] { pi() } else { Angle::zero() }))
            .unwrap();
        let c = m.to_cascade(&q1).unwrap();
        assert_eq!(c.prefix, Angle::zero());
        assert_eq!(c.terms, vec![(0, pi()), (1, pi())]);
        let c = m.to_cascade(&Diagram::zero()).unwrap();
        assert!(c.terms.is_empty() && c.prefix.is_zero());
    }

    #[test]
    fn g1_extract_examples() {
        // Full-adder carry: g1 is the sum.
        let mut m = mgr(&["x1", "x2", "x3"]);
        let carry = m
            .from_table(&table_of(3, |u| {
                let n = u.iter().filter(|&&b| b).count();
                if n >= 2 {
                    pi()
                } else {
                    Angle::zero()
                }
            }))
            .unwrap();
        let sum = m
            .from_table(&table_of(3, |u| if u[0] ^ u[1] ^ u[2] { pi() } else { Angle::zero() }))
            .unwrap();
        assert_eq!(m.lowest_rnonlinear(&carry), Some(2));
        let g1 = m.g1_extract(&carry, 2, &pi()).unwrap();
        assert_eq!(g1, sum);

        // Mux: bypass class selected.
        let mut m = mgr(&["s", "x1", "x2"]);
        let mux = m
            .from_table(&table_of(3, |u| {
                if (u[0] && u[1]) || (!u[0] && u[2]) {
                    pi()
                } else {
                    Angle::zero()
                }
            }))
            .unwrap();
        let g1 = m.g1_extract(&mux, 2, &Angle::zero()).unwrap();
        let c = m.to_cascade(&g1).unwrap();
        assert_eq!(c.terms, vec![(0, pi()), (2, pi())]);
        assert!(c.prefix.is_zero());
        assert!(m.g1_extract(&mux, 2, &a(1, 2)).is_err());

        // Four-input Toffoli: g1 is the three-input Toffoli over (a, b, c).
        let mut m = mgr(&["a", "b", "c", "d"]);
        let s = m
            .from_table(&table_of(4, |u| {
                if (u[0] && u[1] && u[2]) ^ u[3] {
                    pi()
                } else {
                    Angle::zero()
                }
            }))
            .unwrap();
        let g1 = m.g1_extract(&s, 2, &pi()).unwrap();
        let toffoli3 = m
            .from_table(&table_of(4, |u| if (u[0] && u[1]) ^ u[2] { pi() } else { Angle::zero() }))
            .unwrap();
        assert_eq!(g1, toffoli3);
        assert_eq!(m.r_degree(&g1, 2), 0);
        assert_eq!(m.count_nodes_with_var(&g1, 2), (1, false));
    }

    #[test]
    fn dot_output() {
        let mut m = mgr(&["a", "b"]);
        let x = m.from_table(&[Angle::zero(), a(1, 2), pi(), pi()]).unwrap();
        let dot = m.to_dot(&x);
        assert!(dot.starts_with("digraph"));
        assert!(dot.contains("label=\"a\""));
        assert!(dot.contains("style=dashed"));
        assert!(dot.contains("label=\"1/2\""));
    }

    fn angle_pool() -> Vec<Angle> {
        vec![Angle::zero(), a(1, 4), a(-1, 4), a(1, 2), a(-1, 2), pi()]
    }

    fn arb_table(n: usize) -> impl Strategy<Value = Vec<Angle>> {
        proptest::collection::vec(0usize..6, 1 << n)
            .prop_map(|ix| ix.into_iter().map(|i| angle_pool()[i].clone()).collect())
    }

    fn arb_bool_table(n: usize) -> impl Strategy<Value = Vec<Angle>> {
        proptest::collection::vec(any::<bool>(), 1 << n).prop_map(|bs| {
            bs.into_iter()
                .map(|b| if b { pi() } else { Angle::zero() })
                .collect()
        })
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("v{i}")).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn canonical_and_round_trip(n in 1usize..=4, seed in any::<u64>(), t in arb_table(4)) {
            let table: Vec<Angle> = t.into_iter().take(1 << n).collect();
            let mut m = Manager::new(names(n), Axis::X);
            let d = m.from_table(&table).unwrap();
            for (i, expect) in table.iter().enumerate() {
                prop_assert_eq!(&m.eval(&d, &index_assignment(i, n)), expect);
            }
            // Same table, rows inserted in a shuffled order, same handle.
            let mut rows: Vec<(Vec<bool>, Angle)> = table
                .iter()
                .enumerate()
                .map(|(i, x)| (index_assignment(i, n), x.clone()))
                .collect();
            let len = rows.len();
            let mut s = seed;
            for i in (1..len).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                rows.swap(i, (s >> 33) as usize % (i + 1));
            }
            prop_assert_eq!(m.from_rows(&rows).unwrap(), d);
            // Reduction invariants over the whole store.
            let mut seen = HashSet::new();
            for (_, node) in m.live_nodes() {
                prop_assert!(!(node.lo == node.hi && node.hi_weight.is_zero()));
                prop_assert!(seen.insert(node.clone()));
                prop_assert!(m.level(node.lo) > node.var && m.level(node.hi) > node.var);
            }
        }

        #[test]
        fn apply_matches_oracle(f in arb_bool_table(4), g in arb_table(4), k in 0usize..6) {
            let mut m = Manager::new(names(4), Axis::X);
            let df = m.from_table(&f).unwrap();
            let dg = m.from_table(&g).unwrap();
            let gamma = angle_pool()[k].clone();
            let h = m.apply(&df, &gamma, &dg).unwrap();
            for i in 0..16 {
                let u = index_assignment(i, 4);
                let expect = if f[i].is_pi() { &g[i] + &gamma } else { g[i].clone() };
                prop_assert_eq!(m.eval(&h, &u), expect);
            }
        }

        #[test]
        fn apply_identities(f in arb_bool_table(3), g in arb_bool_table(3), h in arb_table(3),
                            i in 0usize..6, j in 0usize..6) {
            let mut m = Manager::new(names(3), Axis::X);
            let (df, dg, dh) = (m.from_table(&f).unwrap(), m.from_table(&g).unwrap(), m.from_table(&h).unwrap());
            let (t1, t2) = (angle_pool()[i].clone(), angle_pool()[j].clone());
            let inner = m.apply(&df, &t2, &dh).unwrap();
            let lhs = m.apply(&df, &t1, &inner).unwrap();
            let rhs = m.apply(&df, &(&t1 + &t2), &dh).unwrap();
            prop_assert_eq!(lhs, rhs);
            let x = m.apply(&dg, &t2, &dh).unwrap();
            let x = m.apply(&df, &t1, &x).unwrap();
            let y = m.apply(&df, &t1, &dh).unwrap();
            let y = m.apply(&dg, &t2, &y).unwrap();
            prop_assert_eq!(x, y);
        }

        #[test]
        fn chain_iff_all_rlinear(t in arb_table(4)) {
            let mut m = Manager::new(names(4), Axis::X);
            let d = m.from_table(&t).unwrap();
            let all_linear = (0..4).all(|v| m.r_degree(&d, v) == 0);
            prop_assert_eq!(m.to_cascade(&d).is_some(), all_linear);
            if let Some(k) = m.lowest_rnonlinear(&d) {
                for v in k + 1..4 {
                    prop_assert!(m.count_nodes_with_var(&d, v).0 <= 1);
                }
            }
        }
    }
}

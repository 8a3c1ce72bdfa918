//! Recursive bi-decomposition of rotation functions into factored forms.

use std::fmt;

use thiserror::Error;

use crate::angle::{Angle, PiFmt};
use crate::rbdd::{Axis, DdError, Diagram, Manager};

/// Rx(θ₀)[v₁Rx(θ₁)[…[vₙRx(θₙ)0̂]…]] (or the Rz analogue), outermost term first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CascadeExpr {
    pub prefix: Angle,
    pub terms: Vec<(usize, Angle)>,
    pub axis: Axis,
}

impl CascadeExpr {
    pub fn eval(&self, u: &[bool]) -> Angle {
        self.terms
            .iter()
            .filter(|(v, _)| u[*v])
            .fold(self.prefix.clone(), |acc, (_, t)| &acc + t)
    }

    /// Builds the chain diagram bottom-up.
    pub fn to_diagram(&self, mgr: &mut Manager) -> Result<Diagram, DdError> {
        let mut acc = Diagram::zero();
        for (v, theta) in self.terms.iter().rev() {
            let hi = acc.rotated(theta);
            acc = mgr.mk_node(*v, &acc, &hi)?;
        }
        Ok(acc.rotated(&self.prefix))
    }

    /// The innermost term, if any.
    pub fn innermost(&self) -> Option<&(usize, Angle)> {
        self.terms.last()
    }

    /// Bracket notation with variable names, e.g. `aRx(π)[bRx(π)0̂]`.
    pub fn display<'a>(&'a self, names: &'a [String]) -> CascadeDisplay<'a> {
        CascadeDisplay { expr: self, names }
    }
}

pub struct CascadeDisplay<'a> {
    expr: &'a CascadeExpr,
    names: &'a [String],
}

fn gate_name(axis: Axis) -> &'static str {
    match axis {
        Axis::X => "Rx",
        Axis::Z => "Rz",
    }
}

impl fmt::Display for CascadeDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = gate_name(self.expr.axis);
        let mut close = 0;
        if !self.expr.prefix.is_zero() {
            write!(f, "{g}({})", PiFmt(&self.expr.prefix))?;
            if !self.expr.terms.is_empty() {
                f.write_str("[")?;
                close += 1;
            }
        }
        let n = self.expr.terms.len();
        for (i, (v, theta)) in self.expr.terms.iter().enumerate() {
            write!(f, "{}{g}({})", self.names[*v], PiFmt(theta))?;
            if i + 1 < n {
                f.write_str("[")?;
                close += 1;
            }
        }
        f.write_str("0̂")?;
        for _ in 0..close {
            f.write_str("]")?;
        }
        Ok(())
    }
}

/// A factored form: a cascade leaf, or `control Rx(gamma) rest`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FactoredForm {
    Leaf(CascadeExpr),
    BiDecomp {
        control: Box<FactoredForm>,
        gamma: Angle,
        rest: Box<FactoredForm>,
    },
}

impl FactoredForm {
    /// Flattens the top-level spine into its (control, γ) pairs, outermost
    /// first, and the final leaf.
    pub fn spine(&self) -> (Vec<(&FactoredForm, &Angle)>, &CascadeExpr) {
        let mut steps = Vec::new();
        let mut cur = self;
        loop {
            match cur {
                FactoredForm::Leaf(c) => return (steps, c),
                FactoredForm::BiDecomp {
                    control,
                    gamma,
                    rest,
                } => {
                    steps.push((control.as_ref(), gamma));
                    cur = rest;
                }
            }
        }
    }

    /// Number of leaf cascades in the whole tree.
    pub fn leaf_count(&self) -> usize {
        match self {
            FactoredForm::Leaf(_) => 1,
            FactoredForm::BiDecomp { control, rest, .. } => control.leaf_count() + rest.leaf_count(),
        }
    }

    /// Full bracket notation, controls written inline.
    pub fn display<'a>(&'a self, names: &'a [String]) -> FormDisplay<'a> {
        FormDisplay { form: self, names }
    }

    /// Spine outline naming controls g1, g2, … and the leaf h1, e.g.
    /// `g1 Rx(-π/2)[g2 Rx(-π/4) h1]`.
    pub fn outline(&self) -> String {
        let (steps, leaf) = self.spine();
        let g = gate_name(leaf.axis);
        if steps.is_empty() {
            return "h1".to_string();
        }
        let mut out = String::new();
        for (i, (_, gamma)) in steps.iter().enumerate() {
            out.push_str(&format!("g{} {g}({})", i + 1, PiFmt(gamma)));
            if i + 1 < steps.len() {
                out.push('[');
            } else {
                out.push_str(" h1");
            }
        }
        out.push_str(&"]".repeat(steps.len() - 1));
        out
    }
}

pub struct FormDisplay<'a> {
    form: &'a FactoredForm,
    names: &'a [String],
}

impl fmt::Display for FormDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.form {
            FactoredForm::Leaf(c) => write!(f, "{}", c.display(self.names)),
            FactoredForm::BiDecomp {
                control,
                gamma,
                rest,
            } => {
                let (_, leaf) = rest.spine();
                write!(
                    f,
                    "[{}]{}({})[{}]",
                    control.display(self.names),
                    gate_name(leaf.axis),
                    PiFmt(gamma),
                    rest.display(self.names)
                )
            }
        }
    }
}

/// Independent semantics: leaf sums its active terms, a decomposition adds
/// γ wherever its control evaluates to π.
pub fn eval_form(ff: &FactoredForm, u: &[bool]) -> Angle {
    match ff {
        FactoredForm::Leaf(c) => c.eval(u),
        FactoredForm::BiDecomp {
            control,
            gamma,
            rest,
        } => {
            let base = eval_form(rest, u);
            if eval_form(control, u).is_pi() {
                &base + gamma
            } else {
                base
            }
        }
    }
}

/// Rebuilds the diagram denoted by a form.
pub fn form_to_diagram(mgr: &mut Manager, ff: &FactoredForm) -> Result<Diagram, DdError> {
    match ff {
        FactoredForm::Leaf(c) => c.to_diagram(mgr),
        FactoredForm::BiDecomp {
            control,
            gamma,
            rest,
        } => {
            let c = form_to_diagram(mgr, control)?;
            let r = form_to_diagram(mgr, rest)?;
            mgr.apply(&c, gamma, &r)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FactorError {
    #[error("diagram is already a chain; use its cascade expression")]
    Chain,
    #[error("bi-decomposition check failed on `{var}`: {reason}")]
    Check { var: String, reason: String },
    #[error(transparent)]
    Dd(#[from] DdError),
}

/// One step `d = g1 Rx(gamma) h` on the lowest r-nonlinear variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BiDecomposition {
    pub vk: usize,
    pub g1: Diagram,
    pub gamma: Angle,
    pub h: Diagram,
    pub alpha1: Angle,
    pub alpha2: Angle,
}

/// Splits `d` on its lowest r-nonlinear variable. α₂ is the class met by the
/// all-zero prefix assignment and α₁ the smallest other class, so g₁ is 0̂
/// at the all-zero assignment.
pub fn bi_decompose(mgr: &mut Manager, d: &Diagram) -> Result<BiDecomposition, FactorError> {
    let vk = mgr.lowest_rnonlinear(d).ok_or(FactorError::Chain)?;
    let classes = mgr.angle_classes(d, vk);
    let alpha2 = mgr.all_zero_class(d, vk);
    let alpha1 = classes
        .iter()
        .find(|c| **c != alpha2)
        .cloned()
        .expect("r-nonlinear variable has at least two classes");
    let gamma = Angle::half_difference(&alpha2, &alpha1);
    let g1 = mgr.g1_extract(d, vk, &alpha1)?;
    let h = mgr.apply(&g1, &-&gamma, d)?;
    Ok(BiDecomposition {
        vk,
        g1,
        gamma,
        h,
        alpha1,
        alpha2,
    })
}

/// Asserts the guarantees of a bi-decomposition step: exact recomposition,
/// Boolean g₁ supported on v₁…v_k with v_k r-linear, a strictly smaller
/// r-degree of v_k in h, and r-linear later variables in h.
pub fn check_decomposition(mgr: &mut Manager, d: &Diagram, bd: &BiDecomposition) -> Result<(), FactorError> {
    let vk = bd.vk;
    let fail = |mgr: &Manager, reason: String| FactorError::Check {
        var: mgr.name(vk).to_string(),
        reason,
    };
    if mgr.apply(&bd.g1, &bd.gamma, &bd.h)? != *d {
        return Err(fail(mgr, "recomposition differs".into()));
    }
    if !mgr.is_boolean(&bd.g1) {
        return Err(fail(mgr, "g1 is not Boolean".into()));
    }
    let support = mgr.support(&bd.g1);
    if support.iter().any(|&v| v > vk) {
        return Err(fail(mgr, "g1 depends on a later variable".into()));
    }
    if !support.contains(&vk) || mgr.r_degree(&bd.g1, vk) != 0 {
        return Err(fail(mgr, "pivot is not r-linear in g1".into()));
    }
    let before = mgr.r_degree(d, vk);
    let after = mgr.r_degree(&bd.h, vk);
    if after >= before {
        return Err(fail(mgr, format!("r-degree did not drop ({before} -> {after})")));
    }
    for v in vk + 1..mgr.num_vars() {
        if mgr.r_degree(&bd.h, v) != 0 {
            return Err(fail(mgr, format!("`{}` is r-nonlinear in h", mgr.name(v))));
        }
    }
    Ok(())
}

/// Factors `d` using the manager's axis for the outer spine.
pub fn factor(mgr: &mut Manager, d: &Diagram) -> Result<FactoredForm, FactorError> {
    let axis = mgr.axis();
    factor_axis(mgr, d, axis)
}

/// Factors `d`; the outer spine and leaf carry `axis`, controls are always
/// X-axis Boolean forms.
pub fn factor_axis(mgr: &mut Manager, d: &Diagram, axis: Axis) -> Result<FactoredForm, FactorError> {
    factor_with(mgr, d, axis, &mut |_, _, _| Ok(()))
}

/// Hook invoked at every bi-decomposition step.
pub type StepHook<'a> =
    dyn FnMut(&mut Manager, &Diagram, &BiDecomposition) -> Result<(), FactorError> + 'a;

/// [`factor_axis`] with a hook called on every step.
pub fn factor_with(
    mgr: &mut Manager,
    d: &Diagram,
    axis: Axis,
    hook: &mut StepHook<'_>,
) -> Result<FactoredForm, FactorError> {
    match bi_decompose(mgr, d) {
        Err(FactorError::Chain) => {
            let mut c = mgr.to_cascade(d).expect("chain diagrams have a cascade");
            c.axis = axis;
            Ok(FactoredForm::Leaf(c))
        }
        Err(e) => Err(e),
        Ok(bd) => {
            hook(mgr, d, &bd)?;
            let control = factor_with(mgr, &bd.g1, Axis::X, hook)?;
            let rest = factor_with(mgr, &bd.h, axis, hook)?;
            Ok(FactoredForm::BiDecomp {
                control: Box::new(control),
                gamma: bd.gamma,
                rest: Box::new(rest),
            })
        }
    }
}

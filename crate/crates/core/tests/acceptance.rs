//! End-to-end acceptance checks. Prints one `criterion N: PASS/FAIL` line
//! per criterion and exits non-zero if any fails.

use nalgebra::DMatrix;
use proptest::prelude::Rng;
use proptest::test_runner::{RngAlgorithm, TestRng};

use qrot::angle::Angle;
use qrot::circuit::{compile, Circuit, CompileOptions, Gate, Line, Role};
use qrot::factor::{check_decomposition, eval_form, factor, factor_with, BiDecomposition, FactorError, FactoredForm};
use qrot::families::{gen_adder, gen_mux, gen_qft, gen_toffoli, predict, FamilyId};
use qrot::rbdd::{index_assignment, Axis, Diagram, Manager};
use qrot::sim::{
    bit_reversal, hat_state, hat_unitary, max_phase_deviation, qft_reference, unitary_of, verify, x_state, C64,
    LineExpectation, TOL,
};

/// Sub-check results for one criterion.
#[derive(Default)]
struct Report {
    checks: Vec<(bool, String)>,
}

impl Report {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        self.checks.push((ok, what.into()));
    }

    fn info(&mut self, what: impl Into<String>) {
        self.checks.push((true, format!("info: {}", what.into())));
    }

    fn pass(&self) -> bool {
        self.checks.iter().all(|(ok, _)| *ok)
    }
}

fn main() {
    let criteria: Vec<(u32, fn() -> Report)> = vec![
        (1, criterion1),
        (2, criterion2),
        (3, criterion3),
        (4, criterion4),
        (5, criterion5),
        (6, criterion6),
    ];
    let mut failed = 0;
    for (n, f) in criteria {
        let r = f();
        let verdict = if r.pass() { "PASS" } else { "FAIL" };
        println!("criterion {n}: {verdict}");
        for (ok, what) in &r.checks {
            println!("    [{}] {what}", if *ok { "ok" } else { "FAILED" });
        }
        if !r.pass() {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------

/// Hat-basis unitary is a monomial matrix on the multi-controlled-X
/// permutation with entries in {±1, ±i}.
fn is_mcx_permutation(u: &DMatrix<C64>, n: usize) -> bool {
    let lines = n + 1;
    let all_controls = ((1usize << n) - 1) << 1;
    let units = [C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0)];
    (0..1usize << lines).all(|col| {
        let row = if col & all_controls == all_controls { col ^ 1 } else { col };
        (0..1usize << lines).all(|r| {
            let x = u[(r, col)];
            if r == row {
                units.iter().any(|p| (x - p).norm() < TOL)
            } else {
                x.norm() < TOL
            }
        })
    })
}

fn criterion1() -> Report {
    let mut r = Report::default();
    for n in 2..=8 {
        let got = gen_toffoli(n).unwrap().two_qubit();
        let want = 2 * n * n - 2 * n + 1;
        r.check(got == want, format!("toffoli({n}) two-qubit {got}, expected {want}"));
    }
    for n in 2..=9 {
        let c = gen_toffoli(n).unwrap();
        let u = hat_unitary(&c).unwrap();
        r.check(is_mcx_permutation(&u, n), format!("toffoli({n}) hat-basis unitary is the MCX permutation"));
    }
    r
}

fn criterion2() -> Report {
    let mut r = Report::default();
    let mut mgr = Manager::new(["a", "b", "c", "d"], Axis::X);
    let table: Vec<Angle> = (0..16)
        .map(|i| {
            let u = index_assignment(i, 4);
            if (u[0] && u[1] && u[2]) ^ u[3] {
                Angle::pi()
            } else {
                Angle::zero()
            }
        })
        .collect();
    let d = mgr.from_table(&table).unwrap();
    let ff = factor(&mut mgr, &d).unwrap();
    r.info(format!("s = {}", ff.display(mgr.names())));
    let outline = ff.outline();
    r.check(
        outline == "g1 Rx(-π/2)[g2 Rx(-π/4) h1]",
        format!("factored outline `{outline}`"),
    );
    let c = compile(&mut mgr, "s", &ff, &CompileOptions::default()).unwrap();
    r.check(c.two_qubit() == 13, format!("two-qubit gates {}, expected 13", c.two_qubit()));
    let reference = gen_toffoli(3).unwrap();
    let dev = max_phase_deviation(&unitary_of(&c).unwrap(), &unitary_of(&reference).unwrap());
    r.check(
        dev.is_some_and(|x| x < TOL),
        format!("unitary vs toffoli(3) up to global phase, deviation {dev:?}"),
    );
    r
}

fn adder_bit(u: &[bool], n: usize, j: usize) -> bool {
    let (mut x, mut y) = (0usize, 0usize);
    for i in 0..n {
        x |= usize::from(u[2 * i]) << i;
        y |= usize::from(u[2 * i + 1]) << i;
    }
    ((x + y) >> j) & 1 == 1
}

fn criterion3() -> Report {
    let mut r = Report::default();
    for n in 1..=8 {
        let got = gen_adder(n).unwrap().two_qubit();
        let want = (3 * n * n + 5 * n) / 2;
        r.check(got == want, format!("adder({n}) two-qubit {got}, expected {want}"));
    }
    for (n, want) in [(2, 11), (5, 50)] {
        let got = gen_adder(n).unwrap().two_qubit();
        r.check(got == want, format!("adder({n}) two-qubit {got} = {want}"));
    }
    for n in 1..=5 {
        let c = gen_adder(n).unwrap();
        let mut exp = Vec::new();
        for j in 0..=n {
            let name = if j < n { format!("s{j}") } else { "c".to_string() };
            exp.push(LineExpectation {
                line: c.output_line(&name).unwrap(),
                name,
                state: Box::new(move |u: &[bool]| hat_state(adder_bit(u, n, j))),
            });
        }
        let v = verify(&c, &exp).unwrap();
        r.check(
            v.pass,
            format!(
                "adder({n}) sum and carry on all {} inputs, max deviation {:.1e}",
                v.assignments, v.max_deviation
            ),
        );
    }
    for n in 2..=8 {
        let depth = gen_adder(n).unwrap().depth();
        let bound = predict(FamilyId::Adder(n)).depth_bound.unwrap();
        r.check(depth <= bound, format!("adder({n}) scheduled depth {depth} <= {bound}"));
        r.info(format!(
            "adder({n}) depth {}",
            if depth == bound { "matches the listed value exactly" } else { "is below the listed value" }
        ));
    }
    r
}

fn criterion4() -> Report {
    let mut r = Report::default();
    let c = gen_mux(2).unwrap();
    r.check(
        c.two_qubit() == 6 && c.ancillae() == 1,
        format!("mux(2): {} two-qubit gates, {} ancilla", c.two_qubit(), c.ancillae()),
    );
    let got = gen_mux(4).unwrap().two_qubit();
    r.check(got == 28, format!("mux(4): {got} two-qubit gates, expected 28"));
    for n in [2usize, 4, 8] {
        let c = gen_mux(n).unwrap();
        let k = n.trailing_zeros() as usize;
        let exp = vec![LineExpectation {
            name: "f".into(),
            line: c.output_line("f").unwrap(),
            state: Box::new(move |u: &[bool]| {
                let sel = u[..k].iter().fold(0, |acc, &b| (acc << 1) | usize::from(b));
                hat_state(u[k + n - 1 - sel])
            }),
        }];
        let v = verify(&c, &exp).unwrap();
        r.check(v.pass, format!("mux({n}) selects correctly on all {} inputs", v.assignments));
    }
    r
}

fn criterion5() -> Report {
    let mut r = Report::default();
    for n in 1..=6 {
        let got = gen_qft(n).unwrap().gates.len();
        let want = n * (n + 1) / 2;
        r.check(got == want, format!("qft({n}) gates after merging {got}, expected {want}"));
    }
    for n in 2..=5 {
        let c = gen_qft(n).unwrap();
        let u = hat_unitary(&c).unwrap();
        let dev = max_phase_deviation(&u, &(bit_reversal(n) * qft_reference(n)));
        r.check(
            dev.is_some_and(|x| x < TOL),
            format!("qft({n}) unitary vs reversed reference up to global phase, deviation {dev:?}"),
        );
    }
    r
}

// ---------------------------------------------------------------------------

fn pick(rng: &mut TestRng, k: u32) -> u32 {
    rng.next_u32() % k
}

/// A multiple of π/4 in (−π, π].
fn random_angle(rng: &mut TestRng) -> Angle {
    Angle::new(i64::from(pick(rng, 8)) - 3, 4)
}

fn random_table(rng: &mut TestRng, n: usize, boolean: bool) -> Vec<Angle> {
    (0..1usize << n)
        .map(|_| {
            if boolean {
                if pick(rng, 2) == 1 {
                    Angle::pi()
                } else {
                    Angle::zero()
                }
            } else {
                random_angle(rng)
            }
        })
        .collect()
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("v{i}")).collect()
}

#[derive(Default)]
struct Tally {
    cases: usize,
    failures: Vec<String>,
}

impl Tally {
    fn fail(&mut self, msg: String) {
        if self.failures.len() < 5 {
            self.failures.push(msg);
        }
    }

    fn report(&self, r: &mut Report, what: &str) {
        let bad = self.failures.len();
        r.check(bad == 0, format!("{what}: {} cases", self.cases));
        for f in &self.failures {
            r.check(false, format!("  {f}"));
        }
    }
}

fn criterion6() -> Report {
    let mut r = Report::default();
    let mut rng = TestRng::deterministic_rng(RngAlgorithm::ChaCha);
    let mut canon = Tally::default();
    let mut apply = Tally::default();
    let mut steps_ok = Tally::default();
    let mut compiled = Tally::default();
    let mut forms: Vec<(usize, FactoredForm)> = Vec::new();

    for case in 0..200 {
        let n = 1 + pick(&mut rng, 4) as usize;
        let boolean = pick(&mut rng, 2) == 0;
        let table = random_table(&mut rng, n, boolean);
        let mut mgr = Manager::new(names(n), Axis::X);

        // Canonicity: the same function built two ways is the same diagram;
        // a different function is a different diagram.
        canon.cases += 1;
        let d = mgr.from_table(&table).unwrap();
        let rows: Vec<(Vec<bool>, Angle)> = (0..table.len())
            .rev()
            .map(|i| (index_assignment(i, n), table[i].clone()))
            .collect();
        let d2 = mgr.from_rows(&rows).unwrap();
        let mut other = table.clone();
        let flip = pick(&mut rng, table.len() as u32) as usize;
        other[flip] = &other[flip] + &Angle::new(1, 4);
        let d3 = mgr.from_table(&other).unwrap();
        let evals = (0..table.len()).all(|i| mgr.eval(&d, &index_assignment(i, n)) == table[i]);
        if d != d2 || d == d3 || !evals {
            canon.fail(format!("case {case}: canonicity failed for table of {n} variables"));
        }

        // apply against the pointwise oracle.
        apply.cases += 1;
        let f_table = random_table(&mut rng, n, true);
        let gamma = random_angle(&mut rng);
        let f = mgr.from_table(&f_table).unwrap();
        let h = mgr.apply(&f, &gamma, &d).unwrap();
        let oracle: Vec<Angle> = (0..table.len())
            .map(|i| if f_table[i].is_pi() { &table[i] + &gamma } else { table[i].clone() })
            .collect();
        if h != mgr.from_table(&oracle).unwrap() {
            apply.fail(format!("case {case}: apply differs from the oracle"));
        }

        // Factor with the decomposition guarantees checked at each step.
        let mut steps = 0usize;
        let mut step_errors: Vec<String> = Vec::new();
        let mut hook = |m: &mut Manager, dd: &Diagram, bd: &BiDecomposition| -> Result<(), FactorError> {
            steps += 1;
            if let Err(e) = check_decomposition(m, dd, bd) {
                step_errors.push(e.to_string());
            }
            Ok(())
        };
        match factor_with(&mut mgr, &d, Axis::X, &mut hook) {
            Ok(ff) => {
                steps_ok.cases += steps;
                for e in step_errors {
                    steps_ok.fail(format!("case {case}: {e}"));
                }
                let round_trip = (0..table.len()).all(|i| eval_form(&ff, &index_assignment(i, n)) == table[i]);
                if !round_trip {
                    steps_ok.fail(format!("case {case}: factored form does not evaluate to the table"));
                }
                forms.push((n, ff));
            }
            Err(e) => steps_ok.fail(format!("case {case}: factoring failed: {e}")),
        }
    }

    // Compile every factored form and simulate it.
    for (i, (n, ff)) in forms.iter().enumerate() {
        compiled.cases += 1;
        let mut mgr = Manager::new(names(*n), Axis::X);
        let c = match compile(&mut mgr, "f", ff, &CompileOptions::default()) {
            Ok(c) => c,
            Err(e) => {
                compiled.fail(format!("form {i}: compile failed: {e}"));
                continue;
            }
        };
        let exp = vec![LineExpectation {
            name: "f".into(),
            line: c.output_line("f").unwrap(),
            state: Box::new(|u: &[bool]| x_state(&eval_form(ff, u))),
        }];
        match verify(&c, &exp) {
            Ok(v) if v.pass => {}
            Ok(v) => compiled.fail(format!("form {i}: {:?}", v.counterexample)),
            Err(e) => compiled.fail(format!("form {i}: {e}")),
        }
    }

    canon.report(&mut r, "(a) canonicity");
    apply.report(&mut r, "(a) apply vs oracle");
    steps_ok.report(&mut r, "(b) decomposition checks at every step");
    compiled.report(&mut r, "(c) compiled forms match eval_form and restore inputs");
    circuit_transforms(&mut rng, &mut r);
    r
}

fn random_circuit(rng: &mut TestRng) -> Circuit {
    let n = 1 + pick(rng, 8) as usize;
    let mut c = Circuit::new((0..n).map(|i| Line::input(format!("q{i}"), Role::Free)).collect());
    let len = pick(rng, 30) as usize;
    for _ in 0..len {
        // Repeat the previous gate's lines now and then so merges happen.
        if let (Some(last), true) = (c.gates.last().cloned(), pick(rng, 3) == 0) {
            c.push(Gate {
                angle: Angle::new(i64::from(pick(rng, 16)) - 7, 8),
                ..last
            });
            continue;
        }
        let axis = if pick(rng, 2) == 0 { Axis::X } else { Axis::Z };
        let angle = Angle::new(i64::from(pick(rng, 16)) - 7, 8);
        let target = pick(rng, n as u32) as usize;
        let control = if n > 1 && pick(rng, 2) == 0 {
            Some((target + 1 + pick(rng, n as u32 - 1) as usize) % n)
        } else {
            None
        };
        c.push(Gate {
            axis,
            angle,
            target,
            control,
        });
    }
    c
}

fn circuit_transforms(rng: &mut TestRng, r: &mut Report) {
    let mut merge = Tally::default();
    let mut sched = Tally::default();
    let mut inv = Tally::default();
    for case in 0..200 {
        let c = random_circuit(rng);
        let u = unitary_of(&c).unwrap();
        let same = |other: &Circuit| max_phase_deviation(&unitary_of(other).unwrap(), &u).is_some_and(|d| d < TOL);

        merge.cases += 1;
        let m = c.merge_rotations();
        if !same(&m) || m.gates.len() > c.gates.len() {
            merge.fail(format!("case {case}: merge_rotations changed the unitary"));
        }

        sched.cases += 1;
        let s = c.reschedule();
        let layered: usize = c.layers().iter().map(Vec::len).sum();
        if !same(&s) || s.gates.len() != c.gates.len() || layered != c.gates.len() || c.depth() > c.gates.len() {
            sched.fail(format!("case {case}: rescheduling changed the unitary or layering is inconsistent"));
        }

        inv.cases += 1;
        let prod = unitary_of(&c.inverse()).unwrap() * &u;
        let dim = u.nrows();
        let dev = max_phase_deviation(&prod, &DMatrix::identity(dim, dim));
        if !dev.is_some_and(|d| d < TOL) {
            inv.fail(format!("case {case}: inverse composition deviates by {dev:?}"));
        }
        if !same(&c.inverse().inverse()) {
            inv.fail(format!("case {case}: double inverse changed the unitary"));
        }
    }
    merge.report(r, "(d) merge_rotations preserves the unitary");
    sched.report(r, "(d) reschedule preserves the unitary, depth consistent");
    inv.report(r, "(d) inverse composes to the identity");
}

//! The `qrot` command line: function-spec parsing and the subcommands.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::angle::Angle;
use crate::circuit::{compile_outputs, Circuit, CompileError, CompileOptions, OutputTask, ParseError, TaskForms};
use crate::factor::{factor_axis, FactorError};
use crate::families::{generate, predict, FamilyError, FamilyId};
use crate::rbdd::{assignment_index, bit_string, index_assignment, Axis, DdError, Manager};
use crate::sim::{self, x_state, zx_state, LineExpectation, SimError, StateFn, Verdict};

/// Row format of a spec file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpecAxis {
    /// One Rx angle per row.
    X,
    /// An Rz angle then an Rx angle per row.
    Zx,
}

/// One named output: full tables indexed by assignment (first variable most
/// significant).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecOutput {
    pub name: String,
    pub x: Vec<Angle>,
    pub z: Option<Vec<Angle>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSpec {
    pub names: Vec<String>,
    pub axis: SpecAxis,
    pub outputs: Vec<SpecOutput>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("spec line {line}: {msg}")]
pub struct SpecError {
    pub line: usize,
    pub msg: String,
}

struct Block {
    name: String,
    line: usize,
    rows: Vec<Option<(Angle, Option<Angle>)>>,
}

/// Parses the `.vars/.names/.axis/.out` format.
pub fn parse_spec(text: &str) -> Result<FunctionSpec, SpecError> {
    let mut vars: Option<usize> = None;
    let mut names: Option<Vec<String>> = None;
    let mut axis = SpecAxis::X;
    let mut blocks: Vec<Block> = Vec::new();
    let mut last = 0;
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        last = ln;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| SpecError { line: ln, msg };
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks[0] {
            ".vars" => {
                if toks.len() != 2 {
                    return Err(err("expected `.vars N`".into()));
                }
                let n: usize = toks[1].parse().map_err(|_| err(format!("bad variable count `{}`", toks[1])))?;
                if n > 20 {
                    return Err(err(format!("{n} variables is too many (limit 20)")));
                }
                vars = Some(n);
            }
            ".names" => {
                let list: Vec<String> = toks[1..].iter().map(|s| s.to_string()).collect();
                for (k, n) in list.iter().enumerate() {
                    if list[..k].contains(n) {
                        return Err(err(format!("duplicate name `{n}`")));
                    }
                }
                names = Some(list);
            }
            ".axis" => {
                axis = match toks.get(1).copied() {
                    Some("x") if toks.len() == 2 => SpecAxis::X,
                    Some("zx") if toks.len() == 2 => SpecAxis::Zx,
                    _ => return Err(err("expected `.axis x` or `.axis zx`".into())),
                };
                if !blocks.is_empty() {
                    return Err(err("`.axis` must precede the first `.out`".into()));
                }
            }
            ".out" => {
                if toks.len() != 2 {
                    return Err(err("expected `.out NAME`".into()));
                }
                let n = vars.ok_or_else(|| err("`.vars` must precede `.out`".into()))?;
                if blocks.iter().any(|b| b.name == toks[1]) {
                    return Err(err(format!("duplicate output `{}`", toks[1])));
                }
                blocks.push(Block {
                    name: toks[1].to_string(),
                    line: ln,
                    rows: vec![None; 1 << n],
                });
            }
            d if d.starts_with('.') => return Err(err(format!("unknown directive `{d}`"))),
            bits => {
                let n = vars.ok_or_else(|| err("`.vars` must precede rows".into()))?;
                let block = blocks.last_mut().ok_or_else(|| err("row outside an `.out` block".into()))?;
                if bits.len() != n || !bits.chars().all(|c| c == '0' || c == '1') {
                    return Err(err(format!("bad bitstring `{bits}` (expected {n} bits)")));
                }
                let want = match axis {
                    SpecAxis::X => 2,
                    SpecAxis::Zx => 3,
                };
                if toks.len() != want {
                    return Err(err(format!("expected {} angle(s) after the bitstring", want - 1)));
                }
                let parse = |t: &str| t.parse::<Angle>().map_err(|e| err(format!("bad angle `{t}`: {e}")));
                let row = match axis {
                    SpecAxis::X => (parse(toks[1])?, None),
                    SpecAxis::Zx => (parse(toks[2])?, Some(parse(toks[1])?)),
                };
                let u: Vec<bool> = bits.chars().map(|c| c == '1').collect();
                let idx = assignment_index(&u);
                if block.rows[idx].is_some() {
                    return Err(err(format!("duplicate row `{bits}`")));
                }
                block.rows[idx] = Some(row);
            }
        }
    }
    let n = vars.ok_or(SpecError {
        line: last.max(1),
        msg: "missing `.vars`".into(),
    })?;
    let names = names.unwrap_or_else(|| (0..n).map(|i| format!("v{i}")).collect());
    if names.len() != n {
        return Err(SpecError {
            line: last.max(1),
            msg: format!("`.names` lists {} names for {n} variables", names.len()),
        });
    }
    if blocks.is_empty() {
        return Err(SpecError {
            line: last.max(1),
            msg: "no `.out` blocks".into(),
        });
    }
    let mut outputs = Vec::with_capacity(blocks.len());
    for b in blocks {
        let mut x = Vec::with_capacity(b.rows.len());
        let mut z = Vec::new();
        for (i, r) in b.rows.into_iter().enumerate() {
            let (xa, za) = r.ok_or_else(|| SpecError {
                line: b.line,
                msg: format!("output `{}` is missing row {}", b.name, bit_string(&index_assignment(i, n))),
            })?;
            x.push(xa);
            if let Some(za) = za {
                z.push(za);
            }
        }
        outputs.push(SpecOutput {
            name: b.name,
            x,
            z: (axis == SpecAxis::Zx).then_some(z),
        });
    }
    Ok(FunctionSpec { names, axis, outputs })
}

impl FunctionSpec {
    /// Table reindexed for a new variable order (given as positions in
    /// `self.names`).
    fn permute(&self, table: &[Angle], order: &[usize]) -> Vec<Angle> {
        let n = self.names.len();
        (0..table.len())
            .map(|i| {
                let bits = index_assignment(i, n);
                let mut orig = vec![false; n];
                for (pos, &var) in order.iter().enumerate() {
                    orig[var] = bits[pos];
                }
                table[assignment_index(&orig)].clone()
            })
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Circuit(#[from] ParseError),
    #[error(transparent)]
    Dd(#[from] DdError),
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("verification failed")]
    VerifyFailed(Box<Verdict>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerifyFailed(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qrot", version, about = "Rotation-based synthesis of quantum circuits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesise a circuit from a function spec.
    Synth {
        spec: PathBuf,
        /// Circuit output file (stdout when absent).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Write the stats JSON here.
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Comma-separated variable order.
        #[arg(long)]
        order: Option<String>,
        /// Leave control lines modified instead of uncomputing them.
        #[arg(long)]
        no_restore: bool,
        /// Override the spec's row format.
        #[arg(long, value_enum)]
        axis: Option<SpecAxis>,
        /// Print the factored forms to stderr.
        #[arg(long)]
        show_form: bool,
        /// Write one DOT file per output diagram into this directory.
        #[arg(long)]
        dump_dot: Option<PathBuf>,
    },
    /// Check a circuit against a spec on every input.
    Verify { circuit: PathBuf, spec: PathBuf },
    /// Print the stats JSON of a circuit.
    Stats { circuit: PathBuf },
    /// Generate a benchmark circuit.
    Family {
        #[command(subcommand)]
        family: FamilyCmd,
        /// Print the cost prediction instead of generating.
        #[arg(long, global = true)]
        predict: bool,
        /// Circuit output file (stdout when absent).
        #[arg(short, long, global = true)]
        output: Option<PathBuf>,
    },
    /// Print the DOT rendering of each output's diagram.
    ExportDot {
        spec: PathBuf,
        /// Only this output.
        #[arg(long = "out")]
        only: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum FamilyCmd {
    Toffoli {
        #[arg(long)]
        controls: usize,
    },
    Adder {
        #[arg(long)]
        bits: usize,
    },
    Mux {
        #[arg(long)]
        inputs: usize,
    },
    Qft {
        #[arg(long)]
        qubits: usize,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn io_err(source: std::io::Error) -> CliError {
    CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    }
}

/// Options for [`synthesize`].
#[derive(Debug, Clone, Default)]
pub struct SynthOptions {
    pub order: Option<Vec<String>>,
    pub no_restore: bool,
    pub axis: Option<SpecAxis>,
}

/// Synthesis result with the forms and diagrams kept for reporting.
pub struct Synthesis {
    pub circuit: Circuit,
    pub forms: Vec<(String, String)>,
    pub dots: Vec<(String, String)>,
    pub verdict: Verdict,
}

/// Builds, factors, compiles and verifies every output of a spec.
pub fn synthesize(spec: &FunctionSpec, opts: &SynthOptions) -> Result<Synthesis, CliError> {
    let n = spec.names.len();
    let order: Vec<usize> = match &opts.order {
        None => (0..n).collect(),
        Some(list) => {
            let mut idx = Vec::with_capacity(n);
            for name in list {
                let i = spec
                    .names
                    .iter()
                    .position(|x| x == name)
                    .ok_or_else(|| CliError::Usage(format!("--order names unknown variable `{name}`")))?;
                if idx.contains(&i) {
                    return Err(CliError::Usage(format!("--order repeats `{name}`")));
                }
                idx.push(i);
            }
            if idx.len() != n {
                return Err(CliError::Usage(format!("--order must list all {n} variables")));
            }
            idx
        }
    };
    let axis = opts.axis.unwrap_or(spec.axis);
    let names: Vec<String> = order.iter().map(|&i| spec.names[i].clone()).collect();
    let mut mgr = Manager::new(names.clone(), Axis::X);
    let mut zmgr = Manager::new(names.clone(), Axis::Z);
    let mut tasks = Vec::with_capacity(spec.outputs.len());
    let mut forms = Vec::new();
    let mut dots = Vec::new();
    for out in &spec.outputs {
        let x_table = spec.permute(&out.x, &order);
        let xd = mgr.from_table(&x_table)?;
        let xf = factor_axis(&mut mgr, &xd, Axis::X)?;
        forms.push((out.name.clone(), xf.display(&names).to_string()));
        dots.push((out.name.clone(), mgr.to_dot(&xd)));
        let z_table = match (&out.z, axis) {
            (Some(z), SpecAxis::Zx) => Some(spec.permute(z, &order)),
            (None, SpecAxis::Zx) => Some(vec![Angle::zero(); 1 << n]),
            (Some(z), SpecAxis::X) => {
                if z.iter().any(|a| !a.is_zero()) {
                    return Err(CliError::Usage(format!(
                        "output `{}` has Rz angles; `--axis x` would drop them",
                        out.name
                    )));
                }
                None
            }
            (None, SpecAxis::X) => None,
        };
        let forms_for_task = match z_table {
            None => TaskForms::X(xf),
            Some(zt) => {
                let zd = zmgr.from_table(&zt)?;
                // Controls of the Z form are Boolean X diagrams, so factor
                // the table in the X manager with a Z-axis spine.
                let zd_x = mgr.from_table(&zt)?;
                let zf = factor_axis(&mut mgr, &zd_x, Axis::Z)?;
                forms.push((format!("{} (z)", out.name), zf.display(&names).to_string()));
                dots.push((format!("{}_z", out.name), zmgr.to_dot(&zd)));
                TaskForms::ZX { x: xf, z: zf }
            }
        };
        tasks.push(OutputTask {
            name: out.name.clone(),
            forms: forms_for_task,
        });
    }
    let copts = CompileOptions {
        restore_inputs: !opts.no_restore,
        ..CompileOptions::default()
    };
    let circuit = compile_outputs(&mut mgr, &tasks, &copts)?;
    let verdict = verify_against(&circuit, spec, axis)?;
    if !verdict.pass {
        return Err(CliError::VerifyFailed(Box::new(verdict)));
    }
    Ok(Synthesis {
        circuit,
        forms,
        dots,
        verdict,
    })
}

/// Verifies a circuit against a spec; circuit inputs are matched by name.
pub fn verify_against(c: &Circuit, spec: &FunctionSpec, axis: SpecAxis) -> Result<Verdict, CliError> {
    let inputs = c.inputs();
    if inputs.len() != spec.names.len() {
        return Err(CliError::Usage(format!(
            "circuit has {} inputs, spec has {} variables",
            inputs.len(),
            spec.names.len()
        )));
    }
    // Position in the circuit's input list of each spec variable.
    let mut pos = Vec::with_capacity(spec.names.len());
    for name in &spec.names {
        let p = inputs
            .iter()
            .position(|(_, n)| n == name)
            .ok_or_else(|| CliError::Usage(format!("circuit has no input named `{name}`")))?;
        pos.push(p);
    }
    let mut exps = Vec::with_capacity(spec.outputs.len());
    for out in &spec.outputs {
        let line = c
            .output_line(&out.name)
            .ok_or_else(|| CliError::Usage(format!("circuit has no output named `{}`", out.name)))?;
        let pos = pos.clone();
        let index = move |u: &[bool]| {
            let bits: Vec<bool> = pos.iter().map(|&p| u[p]).collect();
            assignment_index(&bits)
        };
        let state: StateFn<'_> = match (axis, &out.z) {
            (SpecAxis::Zx, Some(z)) => Box::new(move |u: &[bool]| {
                let i = index(u);
                zx_state(&z[i], &out.x[i])
            }),
            _ => Box::new(move |u: &[bool]| x_state(&out.x[index(u)])),
        };
        exps.push(LineExpectation {
            name: out.name.clone(),
            line,
            state,
        });
    }
    Ok(sim::verify(c, &exps)?)
}

fn run_command(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Synth {
            spec,
            output,
            stats,
            order,
            no_restore,
            axis,
            show_form,
            dump_dot,
        } => {
            let parsed = parse_spec(&read(&spec)?)?;
            let opts = SynthOptions {
                order: order.map(|o| o.split(',').map(|s| s.trim().to_string()).collect()),
                no_restore,
                axis,
            };
            let syn = synthesize(&parsed, &opts)?;
            if show_form {
                for (name, form) in &syn.forms {
                    writeln!(err, "{name} = {form}").map_err(io_err)?;
                }
            }
            if let Some(dir) = dump_dot {
                fs::create_dir_all(&dir).map_err(|source| CliError::Io {
                    path: dir.clone(),
                    source,
                })?;
                for (name, dot) in &syn.dots {
                    write_file(&dir.join(format!("{name}.dot")), dot)?;
                }
            }
            let text = syn.circuit.write_text();
            match output {
                Some(p) => write_file(&p, &text)?,
                None => out.write_all(text.as_bytes()).map_err(io_err)?,
            }
            if let Some(p) = stats {
                write_file(&p, &stats_json(&syn.circuit))?;
            }
            Ok(())
        }
        Command::Verify { circuit, spec } => {
            let c = Circuit::read_text(&read(&circuit)?)?;
            let s = parse_spec(&read(&spec)?)?;
            let verdict = verify_against(&c, &s, s.axis)?;
            let json = serde_json::to_string_pretty(&verdict).expect("verdict serialises");
            writeln!(out, "{json}").map_err(io_err)?;
            if verdict.pass {
                Ok(())
            } else {
                Err(CliError::VerifyFailed(Box::new(verdict)))
            }
        }
        Command::Stats { circuit } => {
            let c = Circuit::read_text(&read(&circuit)?)?;
            out.write_all(stats_json(&c).as_bytes()).map_err(io_err)
        }
        Command::Family {
            family,
            predict: only_predict,
            output,
        } => {
            let id = match family {
                FamilyCmd::Toffoli { controls } => FamilyId::Toffoli(controls),
                FamilyCmd::Adder { bits } => FamilyId::Adder(bits),
                FamilyCmd::Mux { inputs } => FamilyId::Mux(inputs),
                FamilyCmd::Qft { qubits } => FamilyId::Qft(qubits),
            };
            if only_predict {
                let json = serde_json::to_string_pretty(&predict(id)).expect("prediction serialises");
                return writeln!(out, "{json}").map_err(io_err);
            }
            let text = generate(id)?.write_text();
            match output {
                Some(p) => write_file(&p, &text),
                None => out.write_all(text.as_bytes()).map_err(io_err),
            }
        }
        Command::ExportDot { spec, only } => {
            let s = parse_spec(&read(&spec)?)?;
            let mut mgr = Manager::new(s.names.clone(), Axis::X);
            let mut found = false;
            for o in &s.outputs {
                if only.as_ref().is_some_and(|n| n != &o.name) {
                    continue;
                }
                found = true;
                let d = mgr.from_table(&o.x)?;
                writeln!(out, "// {}", o.name).map_err(io_err)?;
                out.write_all(mgr.to_dot(&d).as_bytes()).map_err(io_err)?;
            }
            if !found {
                return Err(CliError::Usage(format!(
                    "no output named `{}`",
                    only.unwrap_or_default()
                )));
            }
            Ok(())
        }
    }
}

fn stats_json(c: &Circuit) -> String {
    let mut s = serde_json::to_string_pretty(&c.stats()).expect("stats serialise");
    s.push('\n');
    s
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(rendered.as_bytes())
            } else {
                out.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match run_command(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            if let CliError::VerifyFailed(v) = &e {
                if let Some(cx) = &v.counterexample {
                    let _ = writeln!(
                        err,
                        "error: verification failed on {} at [{}] (deviation {:.3e})",
                        cx.line, cx.inputs, cx.deviation
                    );
                    return e.exit_code();
                }
            }
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

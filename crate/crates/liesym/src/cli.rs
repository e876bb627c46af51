//! Command-line front end: problem-file loading, engine dispatch, reports.
//!
//! Every subcommand fills a [`Report`](crate::report::Report) with input
//! digests, resolved options, a structured result object and mandatory
//! warnings, then renders it as text or validated JSON (`--json`). Exit
//! status: 0 when a verdict was computed (negative verdicts included), 1 on
//! a computational negative (undecided equivalence, non-closed algebra,
//! non-nilpotent adjoint, ...), 2 on input or validation errors, 3 on an
//! internal invariant violation.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::algebra::{
    adjoint_exact, adjoint_numeric, center, classify_2d, commutator_table, derived_series,
    is_nilpotent_algebra, is_solvable, lower_central_series, normalizer, structure_constants,
    AlgebraError,
};
use crate::detsys::{
    symmetry_check, symmetry_check_verified, Ansatz, DiffSystem, Profile, SolveError, SystemError,
    Verdict,
};
use crate::expr::{normalize, Bindings, Expr, Node, Scalar, Sym};
use crate::invariants::{invariant_count, is_invariant, linearization_test, tresse_derivative};
use crate::jet::{differential_order, JetSpace};
use crate::parse::{parse_expression, parse_problem, render, ParseError, ProblemSpec, Vocab};
use crate::report::{digest, Report};
use crate::vfield::{
    bracket, flow_series, prolong, prolong_verified, rectify_check, VectorField,
};

#[derive(Parser)]
#[command(
    name = "liesym",
    version,
    about = "Lie point symmetry analysis for ODEs and PDEs",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Emit the report as schema-validated JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for generic-point sampling; echoed in every report.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Cross-check prolongations along all three routes.
    #[arg(long, global = true)]
    verify: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProfileArg {
    /// Polynomial coefficients of bounded total degree in all base variables.
    Generic,
    /// Polynomial xi in the independents; phi affine in the unknowns.
    Quasilinear,
}

#[derive(Subcommand)]
enum Command {
    /// Prolong declared vector fields to a jet order and list coefficients.
    #[command(name = "prolong")]
    Prolong {
        file: PathBuf,
        /// Jet order of the prolongation.
        #[arg(long)]
        order: u32,
        /// Restrict to one declared field.
        #[arg(long)]
        field: Option<String>,
    },
    /// Solve the determining equations within a polynomial ansatz.
    #[command(name = "symmetries")]
    Symmetries {
        file: PathBuf,
        /// Polynomial degree bound of the ansatz.
        #[arg(long, default_value_t = 2)]
        degree: u32,
        #[arg(long, value_enum, default_value_t = ProfileArg::Quasilinear)]
        profile: ProfileArg,
        /// Extra basis function multiplied against every ansatz monomial.
        #[arg(long = "extra-basis", allow_hyphen_values = true)]
        extra_basis: Vec<String>,
    },
    /// Check declared vector fields against the declared equations.
    #[command(name = "check")]
    Check {
        file: PathBuf,
        /// Restrict to one declared field.
        #[arg(long)]
        field: Option<String>,
    },
    /// Commutator of two declared fields.
    #[command(name = "bracket")]
    Bracket {
        file: PathBuf,
        /// Comma-separated pair of field names.
        #[arg(long)]
        fields: String,
    },
    /// Commutator table of all declared fields.
    #[command(name = "table")]
    Table { file: PathBuf },
    /// Derived and lower central series, solvability, nilpotency, center.
    #[command(name = "classify-algebra")]
    ClassifyAlgebra { file: PathBuf },
    /// Canonical class (A2,1..A2,4) of a two-dimensional algebra.
    #[command(name = "classify-2d")]
    Classify2d {
        file: PathBuf,
        /// Comma-separated pair of field names (default: first two).
        #[arg(long)]
        fields: Option<String>,
    },
    /// Normalizer of a subset of the declared fields.
    #[command(name = "normalizer")]
    Normalizer {
        file: PathBuf,
        /// Comma-separated field names spanning the subalgebra.
        #[arg(long)]
        subset: String,
    },
    /// Adjoint action Ad(exp(eps v)) w on the declared algebra.
    #[command(name = "adjoint")]
    Adjoint {
        file: PathBuf,
        #[arg(long)]
        v: String,
        #[arg(long)]
        w: String,
        /// Numeric matrix exponential instead of the exact nilpotent series.
        #[arg(long)]
        numeric: bool,
        /// Group parameter value for --numeric.
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        eps: f64,
    },
    /// Functional counts of differential invariants up to an order.
    #[command(name = "invariants")]
    Invariants {
        file: PathBuf,
        /// Highest jet order to count at.
        #[arg(long)]
        order: u32,
    },
    /// Tresse derivative D_x J / D_x I of two invariants.
    #[command(name = "tresse")]
    Tresse {
        file: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        i: String,
        #[arg(long, allow_hyphen_values = true)]
        j: String,
    },
    /// Point-linearizability test for y'' = f(x, y, p).
    #[command(name = "linearize")]
    Linearize {
        /// Right-hand side as an expression in x, y and p = y'.
        #[arg(long, allow_hyphen_values = true)]
        f: String,
    },
    /// Verify canonical coordinates for a field: v(r) = 0 and v(s) = 1.
    #[command(name = "rectify-check")]
    RectifyCheck {
        file: PathBuf,
        #[arg(long)]
        field: String,
        #[arg(long, allow_hyphen_values = true)]
        r: String,
        #[arg(long, allow_hyphen_values = true)]
        s: String,
    },
    /// Truncated flow exp(eps v) applied to a base function.
    #[command(name = "flow-series")]
    FlowSeries {
        file: PathBuf,
        #[arg(long)]
        field: String,
        #[arg(long, allow_hyphen_values = true)]
        function: String,
        /// Truncation order of the series.
        #[arg(long, default_value_t = 4)]
        order: u32,
        /// Name of the flow parameter; must not collide with declared variables.
        #[arg(long = "time-symbol", default_value = "eps")]
        time_symbol: String,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Prolong { .. } => "prolong",
            Command::Symmetries { .. } => "symmetries",
            Command::Check { .. } => "check",
            Command::Bracket { .. } => "bracket",
            Command::Table { .. } => "table",
            Command::ClassifyAlgebra { .. } => "classify-algebra",
            Command::Classify2d { .. } => "classify-2d",
            Command::Normalizer { .. } => "normalizer",
            Command::Adjoint { .. } => "adjoint",
            Command::Invariants { .. } => "invariants",
            Command::Tresse { .. } => "tresse",
            Command::Linearize { .. } => "linearize",
            Command::RectifyCheck { .. } => "rectify-check",
            Command::FlowSeries { .. } => "flow-series",
        }
    }
}

/// Failure modes of a dispatch, by exit status.
#[derive(Debug)]
enum CliError {
    /// Malformed input or failed validation (exit 2).
    Input { line: Option<usize>, msg: String },
    /// Computational negative from the engine (exit 1).
    Engine(String),
}

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input { line: None, msg: msg.into() }
}

fn engine(e: impl std::fmt::Display) -> CliError {
    CliError::Engine(e.to_string())
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> CliError {
        CliError::Input { line: Some(e.line), msg: e.msg }
    }
}

fn system_err(e: SystemError) -> CliError {
    match e {
        SystemError::Undecided(_) | SystemError::NonTerminatingReduction => engine(e),
        _ => input(e.to_string()),
    }
}

fn check_err(e: crate::detsys::CheckError) -> CliError {
    match e {
        crate::detsys::CheckError::System(s) => system_err(s),
        other => engine(other),
    }
}

fn solve_err(e: SolveError) -> CliError {
    match e {
        SolveError::SymbolicParameter(_)
        | SolveError::BadBasisFunction(_)
        | SolveError::AnsatzEmpty => input(e.to_string()),
        SolveError::System(s) => system_err(s),
        other => engine(other),
    }
}

/// Entry point used by the binary; returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| execute(&cli))) {
        Ok(Ok(report)) => {
            let rendered = if cli.json {
                match report.render_json() {
                    Ok(s) => s,
                    Err(e) => {
                        eprintln!("internal error: {e}");
                        return 3;
                    }
                }
            } else {
                report.render_text()
            };
            print!("{rendered}");
            0
        }
        Ok(Err(CliError::Input { line, msg })) => {
            match line {
                Some(l) => eprintln!("error (line {l}): {msg}"),
                None => eprintln!("error: {msg}"),
            }
            2
        }
        Ok(Err(CliError::Engine(msg))) => {
            eprintln!("error: {msg}");
            1
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            eprintln!("internal error: {msg}");
            3
        }
    }
}

fn execute(cli: &Cli) -> Result<Report, CliError> {
    let started = Instant::now();
    let mut report = Report::new(cli.command.name(), cli.seed);
    report.options.insert("verify".into(), cli.verify.to_string());
    dispatch(cli, &mut report)?;
    report.timing_ms = started.elapsed().as_millis();
    Ok(report)
}

// ---------------------------------------------------------------------------
// problem loading and shared helpers

struct Problem {
    spec: ProblemSpec,
    fields: Vec<(String, VectorField)>,
}

impl Problem {
    fn vocab(&self) -> &Vocab {
        &self.spec.vocab
    }

    fn field_named(&self, name: &str) -> Result<&VectorField, CliError> {
        self.fields
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
            .ok_or_else(|| {
                let known: Vec<&str> = self.fields.iter().map(|(n, _)| n.as_str()).collect();
                input(format!(
                    "no vector field named '{name}' (declared: {})",
                    if known.is_empty() { "none".into() } else { known.join(", ") }
                ))
            })
    }

    fn field_index(&self, name: &str) -> Result<usize, CliError> {
        self.field_named(name)?;
        Ok(self.fields.iter().position(|(n, _)| n == name).unwrap())
    }

    fn field_list(&self, min: usize) -> Result<Vec<VectorField>, CliError> {
        if self.fields.len() < min {
            return Err(input(format!(
                "problem file must declare at least {min} vector field{}",
                if min == 1 { "" } else { "s" }
            )));
        }
        Ok(self.fields.iter().map(|(_, v)| v.clone()).collect())
    }

    fn names(&self) -> Vec<String> {
        self.fields.iter().map(|(n, _)| n.clone()).collect()
    }

    fn system(&self) -> Result<DiffSystem, CliError> {
        if self.spec.equations.is_empty() {
            return Err(input("problem file declares no equations"));
        }
        let eqs = self
            .spec
            .equations
            .iter()
            .map(|r| (r.expr.clone(), r.lead.clone()))
            .collect();
        DiffSystem::new(self.vocab().p(), self.vocab().q(), eqs).map_err(system_err)
    }
}

fn load_problem(path: &Path, report: &mut Report) -> Result<Problem, CliError> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| input(format!("cannot read {}: {e}", path.display())))?;
    report.inputs.insert("problem".into(), digest(src.as_bytes()));
    let spec = parse_problem(&src)?;
    let p = spec.vocab.p();
    let q = spec.vocab.q();
    let mut fields = Vec::new();
    for (name, slots) in &spec.fields {
        let vf = VectorField::from_slots(p, q, slots.clone())
            .map_err(|e| input(format!("vector field '{name}': {e}")))?;
        fields.push((name.clone(), vf));
    }
    Ok(Problem { spec, fields })
}

fn parse_named_expr(
    src: &str,
    key: &str,
    vocab: &Vocab,
    report: &mut Report,
) -> Result<Expr, CliError> {
    report.inputs.insert(key.into(), digest(src.as_bytes()));
    report.options.insert(key.into(), src.to_string());
    Ok(parse_expression(src, vocab)?)
}

fn split_pair(list: &str) -> Result<(String, String), CliError> {
    let names: Vec<&str> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if names.len() != 2 {
        return Err(input(format!("expected two comma-separated field names, got '{list}'")));
    }
    Ok((names[0].to_string(), names[1].to_string()))
}

/// True when equality checking on this expression routes through seeded
/// numeric probing (kernels, unknown functions, fractional powers).
fn probabilistic_equality(e: &Expr) -> bool {
    match e.node() {
        Node::Kernel(..) | Node::Func(..) => true,
        Node::Num(_) | Node::Sym(_) => false,
        Node::Sum(ts) => ts.iter().any(probabilistic_equality),
        Node::Prod(fs) => fs.iter().any(probabilistic_equality),
        Node::Pow(b, k) => !k.is_integer() || probabilistic_equality(b),
    }
}

fn note_probabilistic<'a>(report: &mut Report, exprs: impl IntoIterator<Item = &'a Expr>) {
    if exprs.into_iter().any(probabilistic_equality) {
        report.warn("equality checks routed through seeded numeric probing (non-rational terms present)");
    }
}

// ---------------------------------------------------------------------------
// rendering with round-trip enforcement

/// Render an expression and require that parsing the rendering reproduces
/// it exactly; a mismatch is an internal invariant violation.
fn render_checked(e: &Expr, vocab: &Vocab) -> String {
    let s = render(e, vocab);
    let back = parse_expression(&s, vocab)
        .unwrap_or_else(|err| panic!("emitted expression '{s}' does not re-parse: {err}"));
    if normalize(&back) != normalize(e) {
        panic!("emitted expression '{s}' does not round-trip");
    }
    s
}

/// `coeff` split into sign and rendered body; empty body for a unit
/// coefficient. Sums are parenthesized so `+`/`-` never splits a term.
fn coeff_prefix(e: &Expr, vocab: &Vocab) -> (bool, String) {
    if e.is_one() {
        return (false, String::new());
    }
    if let Some(c) = e.as_num() {
        if *c == crate::expr::sc(-1) {
            return (true, String::new());
        }
    }
    if matches!(e.node(), Node::Sum(_)) {
        return (false, format!("({})", render(e, vocab)));
    }
    let s = render(e, vocab);
    match s.strip_prefix('-') {
        Some(rest) => (true, rest.to_string()),
        None => (false, s),
    }
}

fn slot_names(vocab: &Vocab) -> Vec<String> {
    let mut names: Vec<String> = vocab.indep.clone();
    names.extend(vocab.dep.iter().cloned());
    names
}

fn render_field(vf: &VectorField, vocab: &Vocab) -> String {
    let names = slot_names(vocab);
    let mut out = String::new();
    for (name, coeff) in names.iter().zip(vf.slots()) {
        if coeff.is_zero() {
            continue;
        }
        let (neg, body) = coeff_prefix(&coeff, vocab);
        let term = if body.is_empty() {
            format!("@{name}")
        } else {
            format!("{body} @{name}")
        };
        if out.is_empty() {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        out.push_str(&term);
    }
    if out.is_empty() {
        out = format!("0 @{}", names[0]);
    }
    out
}

/// Parse a field body back through the problem-file grammar.
fn parse_field_body(body: &str, vocab: &Vocab) -> Result<VectorField, CliError> {
    let mut src = String::new();
    let _ = writeln!(src, "vars {}", vocab.indep.join(" "));
    let _ = writeln!(src, "unknowns {}", vocab.dep.join(" "));
    let _ = writeln!(src, "vf g = {body}");
    let spec = parse_problem(&src)?;
    VectorField::from_slots(vocab.p(), vocab.q(), spec.fields[0].1.clone())
        .map_err(|e| input(e.to_string()))
}

/// Render a vector field and require the rendering to round-trip.
fn render_field_checked(vf: &VectorField, vocab: &Vocab) -> String {
    let s = render_field(vf, vocab);
    let back = parse_field_body(&s, vocab)
        .unwrap_or_else(|err| panic!("emitted generator '{s}' does not re-parse: {err:?}"));
    for (a, b) in vf.slots().iter().zip(back.slots()) {
        if normalize(a) != normalize(&b) {
            panic!("emitted generator '{s}' does not round-trip");
        }
    }
    s
}

/// Linear combination of named basis elements with rational coefficients.
fn combo_string(coords: &[Scalar], names: &[String]) -> String {
    use num::{One, Signed, Zero};
    let mut out = String::new();
    for (c, name) in coords.iter().zip(names) {
        if c.is_zero() {
            continue;
        }
        let neg = c.is_negative();
        let a = c.abs();
        let body = if a.is_one() { name.clone() } else { format!("{a}*{name}") };
        if out.is_empty() {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        out.push_str(&body);
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

fn verdict_json(v: &Verdict, vocab: &Vocab) -> Value {
    match v {
        Verdict::Exact => json!({ "verdict": "exact" }),
        Verdict::OnSolutions { factors } => {
            let fs: Vec<Value> = factors
                .iter()
                .map(|f| match f {
                    Some(e) => Value::String(render_checked(e, vocab)),
                    None => Value::Null,
                })
                .collect();
            json!({ "verdict": "on-solutions", "factors": fs })
        }
        Verdict::Fail { residuals } => {
            let rs: Vec<Value> =
                residuals.iter().map(|e| Value::String(render_checked(e, vocab))).collect();
            json!({ "verdict": "fail", "residuals": rs })
        }
    }
}

// ---------------------------------------------------------------------------
// dispatch

fn dispatch(cli: &Cli, report: &mut Report) -> Result<(), CliError> {
    match &cli.command {
        Command::Prolong { file, order, field } => cmd_prolong(cli, report, file, *order, field.as_ref()),
        Command::Symmetries { file, degree, profile, extra_basis } => {
            cmd_symmetries(cli, report, file, *degree, *profile, extra_basis)
        }
        Command::Check { file, field } => cmd_check(cli, report, file, field.as_ref()),
        Command::Bracket { file, fields } => cmd_bracket(report, file, fields),
        Command::Table { file } => cmd_table(report, file),
        Command::ClassifyAlgebra { file } => cmd_classify_algebra(report, file),
        Command::Classify2d { file, fields } => cmd_classify_2d(cli, report, file, fields),
        Command::Normalizer { file, subset } => cmd_normalizer(report, file, subset),
        Command::Adjoint { file, v, w, numeric, eps } => {
            cmd_adjoint(report, file, v, w, *numeric, *eps)
        }
        Command::Invariants { file, order } => cmd_invariants(cli, report, file, *order),
        Command::Tresse { file, i, j } => cmd_tresse(report, file, i, j),
        Command::Linearize { f } => cmd_linearize(report, f),
        Command::RectifyCheck { file, field, r, s } => cmd_rectify(report, file, field, r, s),
        Command::FlowSeries { file, field, function, order, time_symbol } => {
            cmd_flow(report, file, field, function, *order, time_symbol)
        }
    }
}

fn cmd_prolong(
    cli: &Cli,
    report: &mut Report,
    file: &Path,
    order: u32,
    field: Option<&String>,
) -> Result<(), CliError> {
    let problem = load_problem(file, report)?;
    report.options.insert("order".into(), order.to_string());
    let selected: Vec<(String, VectorField)> = match field {
        Some(name) => {
            report.options.insert("field".into(), name.clone());
            vec![(name.clone(), problem.field_named(name)?.clone())]
        }
        None => problem.fields.clone(),
    };
    if selected.is_empty() {
        return Err(input("problem file declares no vector fields"));
    }
    let vocab = problem.vocab();
    let space = JetSpace::new(vocab.p(), vocab.q(), order);
    let mut entries = Vec::new();
    for (name, vf) in &selected {
        if cli.verify {
            note_probabilistic(report, vf.slots().iter());
        }
        let pr = if cli.verify {
            prolong_verified(vf, order).map_err(engine)?
        } else {
            prolong(vf, order)
        };
        let mut coeffs = Map::new();
        for coord in space.coords() {
            let c = pr.coeff(&coord);
            coeffs.insert(vocab.sym_name(&coord), Value::String(render_checked(&c, vocab)));
        }
        entries.push(json!({ "name": name, "coefficients": Value::Object(coeffs) }));
    }
    report.results = json!({ "order": order, "fields": entries });
    Ok(())
}

fn cmd_symmetries(
    cli: &Cli,
    report: &mut Report,
    file: &Path,
    degree: u32,
    profile: ProfileArg,
    extra_basis: &[String],
) -> Result<(), CliError> {
    let problem = load_problem(file, report)?;
    let vocab = problem.vocab().clone();
    let sys = problem.system()?;
    note_probabilistic(report, problem.spec.equations.iter().map(|r| &r.expr));
    report.options.insert("degree".into(), degree.to_string());
    report.options.insert(
        "profile".into(),
        match profile {
            ProfileArg::Generic => "generic".into(),
            ProfileArg::Quasilinear => "quasilinear".into(),
        },
    );
    let mut ansatz = Ansatz::new(
        match profile {
            ProfileArg::Generic => Profile::GenericPoly,
            ProfileArg::Quasilinear => Profile::Quasilinear,
        },
        degree,
    );
    for (k, src) in extra_basis.iter().enumerate() {
        let e = parse_named_expr(src, &format!("extra-basis-{k}"), &vocab, report)?;
        ansatz.extra_basis.push(e);
    }
    let outcome = crate::detsys::solve_symmetries(&sys, &ansatz).map_err(solve_err)?;

    let mut generators = Vec::new();
    for (k, vf) in outcome.basis.iter().enumerate() {
        let mut entry = Map::new();
        entry.insert("name".into(), Value::String(format!("g{}", k + 1)));
        entry.insert(
            "generator".into(),
            Value::String(render_field_checked(vf, &vocab)),
        );
        entry.insert("superposition".into(), Value::Bool(outcome.superposition[k]));
        if cli.verify {
            let verdict = symmetry_check_verified(&sys, vf).map_err(check_err)?;
            entry.insert("check".into(), verdict_json(&verdict, &vocab));
        }
        generators.push(Value::Object(entry));
    }

    // closure diagnostic: a bracket escaping the recovered span means the
    // degree bound truncated the algebra
    let mut truncated = false;
    'outer: for i in 0..outcome.basis.len() {
        for j in (i + 1)..outcome.basis.len() {
            let b = bracket(&outcome.basis[i], &outcome.basis[j]);
            if b.is_zero() {
                continue;
            }
            if let Ok(false) = crate::algebra::in_span(&outcome.basis, &b) {
                truncated = true;
                break 'outer;
            }
        }
    }
    if truncated {
        report.warn(format!(
            "ansatz truncation: some commutators of recovered generators fall outside the degree-{degree} span (raise --degree to close the algebra)"
        ));
    }

    let superposition_count = outcome.superposition.iter().filter(|&&s| s).count();
    report.results = json!({
        "dimension": outcome.dimension(),
        "structural_count": outcome.dimension() - superposition_count,
        "superposition_count": superposition_count,
        "ansatz_columns": outcome.columns,
        "generators": generators,
    });
    Ok(())
}

fn cmd_check(
    cli: &Cli,
    report: &mut Report,
    file: &Path,
    field: Option<&String>,
) -> Result<(), CliError> {
    let problem = load_problem(file, report)?;
    let sys = problem.system()?;
    let vocab = problem.vocab();
    let selected: Vec<(String, VectorField)> = match field {
        Some(name) => {
            report.options.insert("field".into(), name.clone());
            vec![(name.clone(), problem.field_named(name)?.clone())]
        }
        None => problem.fields.clone(),
    };
    if selected.is_empty() {
        return Err(input("problem file declares no vector fields"));
    }
    let mut probe: Vec<Expr> = problem.spec.equations.iter().map(|r| r.expr.clone()).collect();
    for (_, vf) in &selected {
        probe.extend(vf.slots());
    }
    note_probabilistic(report, probe.iter());
    let mut entries = Vec::new();
    for (name, vf) in &selected {
        let verdict = if cli.verify {
            symmetry_check_verified(&sys, vf).map_err(check_err)?
        } else {
            symmetry_check(&sys, vf).map_err(check_err)?
        };
        let mut entry = Map::new();
        entry.insert("name".into(), Value::String(name.clone()));
        entry.insert("generator".into(), Value::String(render_field_checked(vf, vocab)));
        match verdict_json(&verdict, vocab) {
            Value::Object(m) => entry.extend(m),
            _ => unreachable!(),
        }
        entries.push(Value::Object(entry));
    }
    report.results = json!({ "checks": entries });
    Ok(())
}

fn cmd_bracket(report: &mut Report, file: &Path, fields: &str) -> Result<(), CliError> {
    let problem = load_problem(file, report)?;
    report.options.insert("fields".into(), fields.to_string());
    let (a, b) = split_pair(fields)?;
    let va = problem.field_named(&a)?;
    let vb = problem.field_named(&b)?;
    let w = bracket(va, vb);
    let vocab = problem.vocab();
    let mut results = Map::new();
    results.insert("fields".into(), json!([a, b]));
    results.insert("bracket".into(), Value::String(render_field_checked(&w, vocab)));
    if problem.fields.len() >= 2 {
        let basis: Vec<VectorField> = problem.fields.iter().map(|(_, v)| v.clone()).collect();
        if let Ok(Some(coords)) = crate::algebra::span_coordinates(&basis, &w) {
            results.insert(
                "in_declared_basis".into(),
                Value::String(combo_string(&coords, &problem.names())),
            );
        }
    }
    report.results = Value::Object(results);
    Ok(())
}

fn cmd_table(report: &mut Report, file: &Path) -> Result<(), CliError> {
    let problem = load_problem(file, report)?;
    let fields = problem.field_list(2)?;
    let names = problem.names();
    let table = commutator_table(&fields).map_err(engine)?;
    let rows: Vec<Value> = table
        .iter()
        .map(|row| {
            Value::Array(
                row.iter()
                    .map(|coords| Value::String(combo_string(coords, &names)))
                    .collect(),
            )
        })
        .collect();
    report.results = json!({ "fields": names, "table": rows });
    Ok(())
}

fn cmd_classify_algebra(report: &mut Report, file: &Path) -> Result<(), CliError> {
    let problem = load_problem(file, report)?;
    let fields = problem.field_list(2)?;
    let names = problem.names();
    let sc = structure_constants(&fields).map_err(engine)?;
    let derived = derived_series(&sc);
    let lower = lower_central_series(&sc);
    let center_basis: Vec<String> = center(&sc)
        .iter()
        .map(|coords| combo_string(coords, &names))
        .collect();
    report.results = json!({
        "dimension": sc.dim,
        "derived_series": derived,
        "lower_central_series": lower,
        "solvable": is_solvable(&sc),
        "nilpotent": is_nilpotent_algebra(&sc),
        "center": center_basis,
    });
    Ok(())
}

fn cmd_classify_2d(
    cli: &Cli,
    report: &mut Report,
    file: &Path,
    fields: &Option<String>,
) -> Result<(), CliError> {
    let problem = load_problem(file, report)?;
    let (a, b) = match fields {
        Some(list) => {
            report.options.insert("fields".into(), list.clone());
            split_pair(list)?
        }
        None => {
            if problem.fields.len() < 2 {
                return Err(input("problem file must declare at least two vector fields"));
            }
            (problem.fields[0].0.clone(), problem.fields[1].0.clone())
        }
    };
    let va = problem.field_named(&a)?.clone();
    let vb = problem.field_named(&b)?.clone();
    report.warn("generic rank sampled at seeded points (seeds echoed in results)");
    let c = classify_2d(&va, &vb, cli.seed).map_err(engine)?;
    report.results = json!({
        "fields": [a, b],
        "class": c.class.name(),
        "abelian": c.abelian,
        "generic_rank": c.rank,
        "seeds": c.seeds_used,
    });
    Ok(())
}

fn cmd_normalizer(report: &mut Report, file: &Path, subset: &str) -> Result<(), CliError> {
    let problem = load_problem(file, report)?;
    report.options.insert("subset".into(), subset.to_string());
    let fields = problem.field_list(2)?;
    let names = problem.names();
    let mut idx = Vec::new();
    for name in subset.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        idx.push(problem.field_index(name)?);
    }
    if idx.is_empty() {
        return Err(input("subset must name at least one declared field"));
    }
    let basis = normalizer(&fields, &idx).map_err(engine)?;
    let rendered: Vec<String> = basis.iter().map(|v| combo_string(v, &names)).collect();
    report.results = json!({
        "subalgebra": idx.iter().map(|&i| names[i].clone()).collect::<Vec<_>>(),
        "normalizer_dimension": rendered.len(),
        "normalizer": rendered,
    });
    Ok(())
}

fn cmd_adjoint(
    report: &mut Report,
    file: &Path,
    v: &str,
    w: &str,
    numeric: bool,
    eps: f64,
) -> Result<(), CliError> {
    let problem = load_problem(file, report)?;
    report.options.insert("v".into(), v.to_string());
    report.options.insert("w".into(), w.to_string());
    report.options.insert("mode".into(), if numeric { "numeric".into() } else { "exact".into() });
    let fields = problem.field_list(2)?;
    let names = problem.names();
    let sc = structure_constants(&fields).map_err(engine)?;
    let unit = |k: usize| {
        let mut c = vec![Scalar::from_integer(0.into()); sc.dim];
        c[k] = Scalar::from_integer(1.into());
        c
    };
    let vi = unit(problem.field_index(v)?);
    let wi = unit(problem.field_index(w)?);
    if numeric {
        report.options.insert("eps".into(), format!("{eps}"));
        let coords = adjoint_numeric(&sc, &vi, &wi, eps);
        let mut m = Map::new();
        for (name, c) in names.iter().zip(&coords) {
            m.insert(name.clone(), json!(c));
        }
        report.warn("numeric matrix exponential (absolute tolerance 1e-12)");
        report.results = json!({ "v": v, "w": w, "eps": eps, "coefficients": Value::Object(m) });
    } else {
        let eps_sym = Sym::param("eps");
        let coeffs = adjoint_exact(&sc, &vi, &wi, &eps_sym).map_err(|e| match e {
            AlgebraError::NotNilpotent => CliError::Engine(
                "ad(v) is not nilpotent; the exact series does not terminate (use --numeric)"
                    .into(),
            ),
            other => engine(other),
        })?;
        let vocab = problem.vocab();
        let mut m = Map::new();
        for (name, c) in names.iter().zip(&coeffs) {
            m.insert(name.clone(), Value::String(render_checked(c, vocab)));
        }
        report.results =
            json!({ "v": v, "w": w, "parameter": "eps", "coefficients": Value::Object(m) });
    }
    Ok(())
}

fn cmd_invariants(
    cli: &Cli,
    report: &mut Report,
    file: &Path,
    order: u32,
) -> Result<(), CliError> {
    let problem = load_problem(file, report)?;
    report.options.insert("order".into(), order.to_string());
    let fields = problem.field_list(1)?;
    report.warn("generic rank sampled at seeded points (seeds echoed in results)");
    let mut counts = Vec::new();
    for n in 0..=order {
        let c = invariant_count(&fields, n, cli.seed).map_err(engine)?;
        counts.push(json!({
            "order": c.order,
            "jet_dimension": c.jet_dimension,
            "orbit_rank": c.orbit_rank,
            "functional_count": c.functional_count,
            "seeds": c.seeds_used,
        }));
    }
    report.results = json!({ "counts": counts });
    Ok(())
}

fn cmd_tresse(report: &mut Report, file: &Path, i: &str, j: &str) -> Result<(), CliError> {
    let problem = load_problem(file, report)?;
    let vocab = problem.vocab().clone();
    if vocab.p() != 1 {
        return Err(input("tresse derivatives need exactly one independent variable"));
    }
    let ie = parse_named_expr(i, "i", &vocab, report)?;
    let je = parse_named_expr(j, "j", &vocab, report)?;
    note_probabilistic(report, [&ie, &je]);
    let order = differential_order(&ie).max(differential_order(&je)) + 1;
    let space = JetSpace::new(1, vocab.q(), order);
    let out = tresse_derivative(&ie, &je, &space).map_err(engine)?;
    let mut results = Map::new();
    results.insert("tresse".into(), Value::String(render_checked(&out, &vocab)));
    results.insert("order".into(), json!(differential_order(&out)));
    if !problem.fields.is_empty() {
        let fields: Vec<VectorField> = problem.fields.iter().map(|(_, v)| v.clone()).collect();
        let inv = is_invariant(&fields, &out).map_err(engine)?;
        results.insert("invariant_under_declared_fields".into(), Value::Bool(inv));
    }
    report.results = Value::Object(results);
    Ok(())
}

fn cmd_linearize(report: &mut Report, f: &str) -> Result<(), CliError> {
    let vocab = Vocab::new(vec!["x".into()], vec!["y".into()]);
    let parsed = parse_named_expr(f, "f", &vocab, report)?;
    let p_jet = Sym::Jet { dep: 0, idx: vec![1] };
    let bound = crate::expr::substitute(
        &parsed,
        &Bindings::of_syms([(Sym::param("p"), Expr::sym(p_jet.clone()))]),
    )
    .map_err(|e| input(e.to_string()))?;
    for s in bound.free_syms() {
        let ok = matches!(s, Sym::Indep(0) | Sym::Dep(0)) || s == p_jet;
        if !ok {
            return Err(input(format!(
                "f must be an expression in x, y and p = y' (found '{}')",
                vocab.sym_name(&s)
            )));
        }
    }
    let out = linearization_test(&bound).map_err(engine)?;
    let display = |e: &Expr| {
        let back = crate::expr::substitute(
            e,
            &Bindings::of_syms([(p_jet.clone(), Expr::sym(Sym::param("p")))]),
        )
        .expect("parameter substitution cannot fail");
        render_checked(&back, &vocab)
    };
    report.results = json!({
        "f": render_checked(&parsed, &vocab),
        "i1": display(&out.i1),
        "i2": display(&out.i2),
        "linearizable": out.linearizable,
    });
    Ok(())
}

fn cmd_rectify(
    report: &mut Report,
    file: &Path,
    field: &str,
    r: &str,
    s: &str,
) -> Result<(), CliError> {
    let problem = load_problem(file, report)?;
    report.options.insert("field".into(), field.to_string());
    let vocab = problem.vocab().clone();
    let vf = problem.field_named(field)?.clone();
    let re = parse_named_expr(r, "r", &vocab, report)?;
    let se = parse_named_expr(s, "s", &vocab, report)?;
    for (name, e) in [("r", &re), ("s", &se)] {
        if differential_order(e) > 0 {
            return Err(input(format!("{name} must be a function of the base variables only")));
        }
    }
    note_probabilistic(report, vf.slots().iter().chain([&re, &se]));
    let rep = rectify_check(&vf, &re, &se).map_err(engine)?;
    report.results = json!({
        "field": field,
        "v_r": render_checked(&rep.residual_invariant, &vocab),
        "v_s_minus_1": render_checked(&rep.residual_canonical, &vocab),
        "invariant_ok": rep.invariant_ok,
        "canonical_ok": rep.canonical_ok,
        "rectifies": rep.rectifies(),
    });
    Ok(())
}

fn cmd_flow(
    report: &mut Report,
    file: &Path,
    field: &str,
    function: &str,
    order: u32,
    time_symbol: &str,
) -> Result<(), CliError> {
    let problem = load_problem(file, report)?;
    report.options.insert("field".into(), field.to_string());
    report.options.insert("order".into(), order.to_string());
    report.options.insert("time-symbol".into(), time_symbol.to_string());
    let vocab = problem.vocab().clone();
    let vf = problem.field_named(field)?.clone();
    let fe = parse_named_expr(function, "function", &vocab, report)?;
    if differential_order(&fe) > 0 {
        return Err(input("function must depend on the base variables only"));
    }
    if time_symbol.is_empty()
        || !time_symbol.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
    {
        return Err(input(format!("invalid time symbol '{time_symbol}'")));
    }
    let eps = match vocab.resolve(time_symbol) {
        Ok(Sym::Param(p)) => Sym::Param(p),
        _ => {
            return Err(input(format!(
                "time symbol '{time_symbol}' collides with a declared variable"
            )))
        }
    };
    let clash = |e: &Expr| e.contains_sym(&eps);
    if vf.slots().iter().any(|e| clash(e)) || clash(&fe) {
        return Err(input(format!(
            "time symbol '{time_symbol}' already occurs in the field or function"
        )));
    }
    let series = flow_series(&vf, &fe, order, &eps);
    report.warn(format!("flow series truncated at order {order}"));
    report.results = json!({
        "field": field,
        "function": render_checked(&fe, &vocab),
        "time_symbol": time_symbol,
        "series": render_checked(&series, &vocab),
    });
    Ok(())
}

//! Problem-file and expression parsing, plus the inverse pretty-printer.
//!
//! Problem files are line oriented:
//!
//! ```text
//! # drift-diffusion
//! vars t x
//! unknowns u
//! equation u_t = u_xx + 5*u_x  leading u_xx
//! vf scale = t @t + x/2 @x
//! option seed 42
//! option degree 2
//! ```
//!
//! Expressions use `+ - * / ^` with `^` binding tightest, then unary minus,
//! then `* /`, then `+ -`. Jet coordinates are written `u_xx` (single-char
//! variable names, order <= 4) or `u[[2,0]]` (explicit multi-index). Unknown
//! identifiers become named parameters; `name(args)` is a kernel
//! (`exp ln sin cos arctan`) or an opaque function symbol.

use std::collections::BTreeMap;

use num::bigint::BigInt;
use num::traits::{One, Signed, ToPrimitive, Zero};

use crate::expr::{evaluate_exact, Expr, FuncSym, Kernel, Node, Scalar, Sym};
use crate::jet::JetSpace;

/// Variable naming for parsing and rendering.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    pub indep: Vec<String>,
    pub dep: Vec<String>,
}

impl Vocab {
    pub fn new(indep: Vec<String>, dep: Vec<String>) -> Vocab {
        Vocab { indep, dep }
    }

    pub fn p(&self) -> u8 {
        self.indep.len() as u8
    }

    pub fn q(&self) -> u8 {
        self.dep.len() as u8
    }

    fn indep_index(&self, name: &str) -> Option<u8> {
        self.indep.iter().position(|s| s == name).map(|i| i as u8)
    }

    fn dep_index(&self, name: &str) -> Option<u8> {
        self.dep.iter().position(|s| s == name).map(|i| i as u8)
    }

    /// Index of a single-character independent variable.
    fn indep_char(&self, c: char) -> Option<u8> {
        self.indep
            .iter()
            .position(|s| s.len() == 1 && s.chars().next() == Some(c))
            .map(|i| i as u8)
    }

    fn all_indep_single_char(&self) -> bool {
        self.indep.iter().all(|s| s.len() == 1)
    }

    /// Resolve a bare identifier to a symbol. Identifiers that are neither
    /// declared variables nor jet forms become named parameters.
    pub fn resolve(&self, name: &str) -> Result<Sym, String> {
        if let Some(i) = self.indep_index(name) {
            return Ok(Sym::Indep(i));
        }
        if let Some(a) = self.dep_index(name) {
            return Ok(Sym::Dep(a));
        }
        if let Some((base, suffix)) = name.split_once('_') {
            if let Some(dep) = self.dep_index(base) {
                let mut idx = vec![0u8; self.indep.len()];
                for c in suffix.chars() {
                    match self.indep_char(c) {
                        Some(i) => idx[i as usize] += 1,
                        None => {
                            return Err(format!(
                                "'{}' is not a single-character independent variable in jet '{}'",
                                c, name
                            ))
                        }
                    }
                }
                if idx.iter().all(|&k| k == 0) {
                    return Err(format!("empty jet suffix in '{}'", name));
                }
                return Ok(Sym::Jet { dep, idx });
            }
        }
        Ok(Sym::param(name))
    }

    /// Render a symbol with this vocabulary.
    pub fn sym_name(&self, s: &Sym) -> String {
        match s {
            Sym::Indep(i) => self.indep.get(*i as usize).cloned().unwrap_or_else(|| format!("x{}", i)),
            Sym::Dep(a) => self.dep.get(*a as usize).cloned().unwrap_or_else(|| format!("u{}", a)),
            Sym::Jet { dep, idx } => {
                let base = self.sym_name(&Sym::Dep(*dep));
                let order: u32 = idx.iter().map(|&k| k as u32).sum();
                if self.all_indep_single_char() && order <= 4 {
                    let mut s = base;
                    s.push('_');
                    for (i, &cnt) in idx.iter().enumerate() {
                        for _ in 0..cnt {
                            s.push_str(&self.indep[i]);
                        }
                    }
                    s
                } else {
                    let list: Vec<String> = idx.iter().map(|k| k.to_string()).collect();
                    format!("{}[[{}]]", base, list.join(","))
                }
            }
            Sym::Coef(k) => format!("c{}", k),
            Sym::Param(name) => name.to_string(),
        }
    }
}

/// Parse failure with the offending line (1-based; 0 for standalone
/// expressions).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error (line {line}): {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

fn perr<T>(line: usize, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { line, msg: msg.into() })
}

/// One equation of a differential system: `expr = 0` with a designated
/// leading derivative.
#[derive(Clone, Debug)]
pub struct RawEquation {
    pub expr: Expr,
    pub lead: Sym,
}

/// Parsed problem file.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub vocab: Vocab,
    pub equations: Vec<RawEquation>,
    /// Declared vector fields: name -> coefficient vector of length p + q
    /// (independent slots first).
    pub fields: Vec<(String, Vec<Expr>)>,
    pub options: BTreeMap<String, String>,
}

impl ProblemSpec {
    /// Jet space of the system (order = highest derivative present).
    pub fn space(&self) -> JetSpace {
        let n = self
            .equations
            .iter()
            .map(|eq| crate::jet::differential_order(&eq.expr).max(eq.lead.jet_order()))
            .max()
            .unwrap_or(1)
            .max(1);
        JetSpace::new(self.vocab.p(), self.vocab.q(), n)
    }

    pub fn field(&self, name: &str) -> Option<&Vec<Expr>> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }
}

// ---------------------------------------------------------------------------
// lexer

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    At,
    DLBrack,
    DRBrack,
}

fn lex(src: &str, line: usize) -> Result<Vec<Tok>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                out.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                out.push(Tok::Star);
                i += 1;
            }
            '/' => {
                out.push(Tok::Slash);
                i += 1;
            }
            '^' => {
                out.push(Tok::Caret);
                i += 1;
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            ',' => {
                out.push(Tok::Comma);
                i += 1;
            }
            '@' => {
                out.push(Tok::At);
                i += 1;
            }
            '[' => {
                if chars.get(i + 1) == Some(&'[') {
                    out.push(Tok::DLBrack);
                    i += 2;
                } else {
                    return perr(line, "single '[' (jet indices use double brackets)");
                }
            }
            ']' => {
                if chars.get(i + 1) == Some(&']') {
                    out.push(Tok::DRBrack);
                    i += 2;
                } else {
                    return perr(line, "single ']' (jet indices use double brackets)");
                }
            }
            '0'..='9' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i < chars.len() && chars[i] == '.' {
                    return perr(line, "decimal literals are not exact; write a ratio p/q");
                }
                let text: String = chars[start..i].iter().collect();
                out.push(Tok::Num(text.parse().unwrap()));
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric() || chars[i] == '_')
                {
                    i += 1;
                }
                out.push(Tok::Ident(chars[start..i].iter().collect()));
            }
            _ => return perr(line, format!("unexpected character '{}'", c)),
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Pratt expression parser

struct Parser<'a> {
    toks: &'a [Tok],
    pos: usize,
    vocab: &'a Vocab,
    line: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            perr(self.line, format!("expected {}", what))
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        perr(self.line, msg)
    }

    fn parse_expr(&mut self, min_bp: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_prefix()?;
        loop {
            let (op, lbp) = match self.peek() {
                Some(Tok::Plus) => (Tok::Plus, 10),
                Some(Tok::Minus) => (Tok::Minus, 10),
                Some(Tok::Star) => (Tok::Star, 20),
                Some(Tok::Slash) => (Tok::Slash, 20),
                Some(Tok::Caret) => (Tok::Caret, 30),
                _ => break,
            };
            if lbp < min_bp {
                break;
            }
            self.pos += 1;
            match op {
                Tok::Plus => {
                    let rhs = self.parse_expr(lbp + 1)?;
                    lhs = Expr::add(vec![lhs, rhs]);
                }
                Tok::Minus => {
                    let rhs = self.parse_expr(lbp + 1)?;
                    lhs = Expr::sub(lhs, rhs);
                }
                Tok::Star => {
                    let rhs = self.parse_expr(lbp + 1)?;
                    lhs = Expr::mul(vec![lhs, rhs]);
                }
                Tok::Slash => {
                    let rhs = self.parse_expr(lbp + 1)?;
                    if rhs.is_zero() {
                        return self.err("division by zero");
                    }
                    lhs = Expr::div(lhs, rhs);
                }
                Tok::Caret => {
                    // right associative; exponent must be an exact rational
                    let rhs = self.parse_expr(lbp - 1)?;
                    let exp = match evaluate_exact(&rhs, &BTreeMap::new()) {
                        Ok(v) => v,
                        Err(_) => {
                            return self.err("exponent must be an exact rational constant")
                        }
                    };
                    if lhs.is_zero() && exp.is_negative() {
                        return self.err("division by zero (zero base, negative exponent)");
                    }
                    lhs = Expr::pow(lhs, exp);
                }
                _ => unreachable!(),
            }
        }
        Ok(lhs)
    }

    fn parse_prefix(&mut self) -> Result<Expr, ParseError> {
        match self.next() {
            Some(Tok::Num(n)) => Ok(Expr::num(Scalar::from_integer(n))),
            Some(Tok::Minus) => {
                // unary minus: tighter than * /, looser than ^
                let operand = self.parse_expr(25)?;
                Ok(Expr::neg(operand))
            }
            Some(Tok::LParen) => {
                let inner = self.parse_expr(0)?;
                self.expect(Tok::RParen, "closing ')'")?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                if self.peek() == Some(&Tok::LParen) {
                    self.pos += 1;
                    let mut args = Vec::new();
                    if self.peek() != Some(&Tok::RParen) {
                        loop {
                            args.push(self.parse_expr(0)?);
                            if self.peek() == Some(&Tok::Comma) {
                                self.pos += 1;
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen, "closing ')' of argument list")?;
                    if let Some(k) = Kernel::from_name(&name) {
                        if args.len() != 1 {
                            return self.err(format!("{} takes exactly one argument", name));
                        }
                        if k == Kernel::Ln {
                            if let Some(c) = args[0].as_num() {
                                if c.is_zero() {
                                    return self.err("ln(0) is undefined");
                                }
                            }
                        }
                        return Ok(Expr::kernel(k, args.into_iter().next().unwrap()));
                    }
                    if self.vocab.resolve(&name) != Ok(Sym::param(&name)) {
                        return self.err(format!("'{}' is a variable, not a function", name));
                    }
                    if args.is_empty() {
                        return self.err(format!("function '{}' needs arguments", name));
                    }
                    return Ok(Expr::func(FuncSym::new(&name, args)));
                }
                if self.peek() == Some(&Tok::DLBrack) {
                    self.pos += 1;
                    let dep = match self.vocab.dep_index(&name) {
                        Some(d) => d,
                        None => {
                            return self.err(format!(
                                "'{}' is not a dependent variable (jet index form)",
                                name
                            ))
                        }
                    };
                    let mut idx: Vec<u8> = Vec::new();
                    loop {
                        match self.next() {
                            Some(Tok::Num(n)) => match n.to_u8() {
                                Some(k) => idx.push(k),
                                None => return self.err("jet index out of range"),
                            },
                            _ => return self.err("expected jet index"),
                        }
                        match self.next() {
                            Some(Tok::Comma) => continue,
                            Some(Tok::DRBrack) => break,
                            _ => return self.err("expected ',' or ']]' in jet index"),
                        }
                    }
                    if idx.len() != self.vocab.indep.len() {
                        return self.err(format!(
                            "jet index has {} entries; expected {} (one per independent variable)",
                            idx.len(),
                            self.vocab.indep.len()
                        ));
                    }
                    if idx.iter().all(|&k| k == 0) {
                        return Ok(Expr::sym(Sym::Dep(dep)));
                    }
                    return Ok(Expr::sym(Sym::Jet { dep, idx }));
                }
                match self.vocab.resolve(&name) {
                    Ok(s) => Ok(Expr::sym(s)),
                    Err(msg) => self.err(msg),
                }
            }
            Some(t) => self.err(format!("unexpected token {:?}", t)),
            None => self.err("unexpected end of expression"),
        }
    }
}

fn parse_tokens(toks: &[Tok], vocab: &Vocab, line: usize) -> Result<Expr, ParseError> {
    let mut p = Parser { toks, pos: 0, vocab, line };
    let e = p.parse_expr(0)?;
    if p.pos != toks.len() {
        return perr(line, format!("trailing input from token {:?}", toks[p.pos]));
    }
    Ok(e)
}

/// Parse a standalone expression with the given vocabulary.
pub fn parse_expression(src: &str, vocab: &Vocab) -> Result<Expr, ParseError> {
    let toks = lex(src, 0)?;
    if toks.is_empty() {
        return perr(0, "empty expression");
    }
    parse_tokens(&toks, vocab, 0)
}

// ---------------------------------------------------------------------------
// problem files

/// Parse a problem file.
pub fn parse_problem(src: &str) -> Result<ProblemSpec, ParseError> {
    let mut vocab: Option<Vocab> = None;
    let mut indep_names: Option<Vec<String>> = None;
    let mut dep_names: Option<Vec<String>> = None;
    let mut equations = Vec::new();
    let mut fields: Vec<(String, Vec<Expr>)> = Vec::new();
    let mut options = BTreeMap::new();

    for (lineno, raw) in src.lines().enumerate() {
        let line = lineno + 1;
        let text = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let text = text.trim();
        if text.is_empty() {
            continue;
        }
        let (directive, rest) = match text.split_once(char::is_whitespace) {
            Some((d, r)) => (d, r.trim()),
            None => (text, ""),
        };
        match directive {
            "vars" => {
                if indep_names.is_some() {
                    return perr(line, "duplicate 'vars' directive");
                }
                let names = split_names(rest, line)?;
                indep_names = Some(names);
            }
            "unknowns" => {
                if dep_names.is_some() {
                    return perr(line, "duplicate 'unknowns' directive");
                }
                let names = split_names(rest, line)?;
                dep_names = Some(names);
            }
            "equation" | "vf" => {
                if vocab.is_none() {
                    let indep = match &indep_names {
                        Some(v) => v.clone(),
                        None => return perr(line, "'vars' must appear before equations"),
                    };
                    let dep = match &dep_names {
                        Some(v) => v.clone(),
                        None => return perr(line, "'unknowns' must appear before equations"),
                    };
                    for d in &dep {
                        if indep.contains(d) {
                            return perr(line, format!("'{}' is both a var and an unknown", d));
                        }
                    }
                    vocab = Some(Vocab::new(indep, dep));
                }
                let v = vocab.as_ref().unwrap();
                if directive == "equation" {
                    equations.push(parse_equation_line(rest, v, line)?);
                } else {
                    let (name, field) = parse_vf_line(rest, v, line)?;
                    if fields.iter().any(|(n, _)| n == &name) {
                        return perr(line, format!("duplicate vector field '{}'", name));
                    }
                    fields.push((name, field));
                }
            }
            "option" => {
                let (key, value) = match rest.split_once(char::is_whitespace) {
                    Some((k, v)) => (k.to_string(), v.trim().to_string()),
                    None => return perr(line, "option needs a key and a value"),
                };
                options.insert(key, value);
            }
            _ => return perr(line, format!("unknown directive '{}'", directive)),
        }
    }

    let vocab = match (vocab, indep_names, dep_names) {
        (Some(v), ..) => v,
        (None, Some(i), Some(d)) => Vocab::new(i, d),
        _ => return perr(0, "problem file must declare 'vars' and 'unknowns'"),
    };
    Ok(ProblemSpec { vocab, equations, fields, options })
}

fn split_names(rest: &str, line: usize) -> Result<Vec<String>, ParseError> {
    let names: Vec<String> = rest.split_whitespace().map(|s| s.to_string()).collect();
    if names.is_empty() {
        return perr(line, "expected at least one name");
    }
    for n in &names {
        let ok = n.chars().next().map(|c| c.is_ascii_alphabetic()).unwrap_or(false)
            && n.chars().all(|c| c.is_ascii_alphanumeric());
        if !ok {
            return perr(line, format!("invalid variable name '{}'", n));
        }
        if Kernel::from_name(n).is_some() {
            return perr(line, format!("'{}' shadows a kernel function", n));
        }
    }
    let mut seen = names.clone();
    seen.sort();
    seen.dedup();
    if seen.len() != names.len() {
        return perr(line, "duplicate variable name");
    }
    Ok(names)
}

fn parse_equation_line(rest: &str, vocab: &Vocab, line: usize) -> Result<RawEquation, ParseError> {
    let (lhs_src, rhs_all) = match rest.split_once('=') {
        Some(t) => t,
        None => return perr(line, "equation needs '='"),
    };
    let rhs_toks = lex(rhs_all, line)?;
    // the trailing `leading <jet>` marker is found at token level
    let mark = rhs_toks
        .iter()
        .rposition(|t| matches!(t, Tok::Ident(s) if s == "leading"));
    let mark = match mark {
        Some(i) => i,
        None => return perr(line, "equation needs a 'leading <derivative>' marker"),
    };
    let lead_expr = parse_tokens(&rhs_toks[mark + 1..], vocab, line)?;
    let lead = match lead_expr.node() {
        Node::Sym(s @ Sym::Jet { .. }) => s.clone(),
        _ => return perr(line, "leading derivative must be a jet coordinate of order >= 1"),
    };
    let lhs = parse_expression(lhs_src.trim(), vocab).map_err(|e| ParseError { line, ..e })?;
    let rhs = parse_tokens(&rhs_toks[..mark], vocab, line)?;
    Ok(RawEquation { expr: Expr::sub(lhs, rhs), lead })
}

fn parse_vf_line(
    rest: &str,
    vocab: &Vocab,
    line: usize,
) -> Result<(String, Vec<Expr>), ParseError> {
    let (name, body) = match rest.split_once('=') {
        Some((n, b)) => (n.trim().to_string(), b),
        None => return perr(line, "vf needs 'name = coefficients'"),
    };
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return perr(line, format!("invalid vector field name '{}'", name));
    }
    let toks = lex(body, line)?;
    let nslots = (vocab.p() + vocab.q()) as usize;
    let mut coeffs: Vec<Expr> = vec![Expr::zero(); nslots];

    // split into signed chunks at depth-0 +/- in operator position; each
    // chunk is `<coeff expr> @ <var>`
    let mut depth = 0i32;
    let mut chunk_start = 0usize;
    let mut chunk_sign = false; // negated?
    let mut i = 0usize;
    let flush = |start: usize,
                 end: usize,
                 sign: bool,
                 coeffs: &mut Vec<Expr>|
     -> Result<(), ParseError> {
        let chunk = &toks[start..end];
        if chunk.len() < 2 {
            return perr(line, "vector field term must be '<expr> @var'");
        }
        let target = match (&chunk[chunk.len() - 2], &chunk[chunk.len() - 1]) {
            (Tok::At, Tok::Ident(n)) => n.clone(),
            _ => return perr(line, "vector field term must end with '@var'"),
        };
        let slot = match vocab.resolve(&target) {
            Ok(Sym::Indep(i)) => i as usize,
            Ok(Sym::Dep(a)) => vocab.p() as usize + a as usize,
            _ => {
                return perr(
                    line,
                    format!("'@{}' must name a declared variable", target),
                )
            }
        };
        let coeff_toks = &chunk[..chunk.len() - 2];
        let mut coeff = if coeff_toks.is_empty() {
            Expr::one()
        } else {
            parse_tokens(coeff_toks, vocab, line)?
        };
        if coeff.free_syms().iter().any(|s| matches!(s, Sym::Jet { .. })) {
            return perr(line, "point vector field coefficients cannot contain derivatives");
        }
        if sign {
            coeff = Expr::neg(coeff);
        }
        coeffs[slot] = Expr::add(vec![coeffs[slot].clone(), coeff]);
        Ok(())
    };
    // leading sign
    if toks.first() == Some(&Tok::Minus) {
        chunk_sign = true;
        chunk_start = 1;
        i = 1;
    } else if toks.first() == Some(&Tok::Plus) {
        chunk_start = 1;
        i = 1;
    }
    while i < toks.len() {
        match &toks[i] {
            Tok::LParen | Tok::DLBrack => depth += 1,
            Tok::RParen | Tok::DRBrack => depth -= 1,
            Tok::Plus | Tok::Minus if depth == 0 && i > chunk_start => {
                // operator position: previous token ends an operand
                let splits = matches!(
                    toks[i - 1],
                    Tok::Num(_) | Tok::Ident(_) | Tok::RParen | Tok::DRBrack
                );
                if splits {
                    flush(chunk_start, i, chunk_sign, &mut coeffs)?;
                    chunk_sign = toks[i] == Tok::Minus;
                    chunk_start = i + 1;
                }
            }
            _ => {}
        }
        i += 1;
    }
    if chunk_start >= toks.len() {
        return perr(line, "vector field needs at least one '<expr> @var' term");
    }
    flush(chunk_start, toks.len(), chunk_sign, &mut coeffs)?;
    Ok((name, coeffs))
}

// ---------------------------------------------------------------------------
// pretty printer

fn num_str(c: &Scalar) -> String {
    if c.denom() == &BigInt::from(1) {
        format!("{}", c.numer())
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

/// Extract a leading minus sign: `(negated?, magnitude expression)`.
fn split_sign(e: &Expr) -> (bool, Expr) {
    match e.node() {
        Node::Num(c) if c.is_negative() => (true, Expr::num(-c.clone())),
        Node::Prod(fs) => {
            if let Node::Num(c) = fs[0].node() {
                if c.is_negative() {
                    let mut rest = vec![Expr::num(-c.clone())];
                    rest.extend_from_slice(&fs[1..]);
                    return (true, Expr::mul(rest));
                }
            }
            (false, e.clone())
        }
        _ => (false, e.clone()),
    }
}

/// Render an expression with the given vocabulary. `parse_expression` of the
/// output reproduces the expression up to normalization.
pub fn render(e: &Expr, vocab: &Vocab) -> String {
    render_sum(e, vocab)
}

fn render_sum(e: &Expr, vocab: &Vocab) -> String {
    match e.node() {
        Node::Sum(terms) => {
            let mut out = String::new();
            for (i, t) in terms.iter().enumerate() {
                let (neg, mag) = split_sign(t);
                if i == 0 {
                    if neg {
                        out.push('-');
                    }
                } else {
                    out.push_str(if neg { " - " } else { " + " });
                }
                out.push_str(&render_product(&mag, vocab));
            }
            out
        }
        _ => {
            let (neg, mag) = split_sign(e);
            let body = render_product(&mag, vocab);
            if neg {
                format!("-{}", body)
            } else {
                body
            }
        }
    }
}

fn render_product(e: &Expr, vocab: &Vocab) -> String {
    match e.node() {
        Node::Prod(fs) => {
            let mut num_parts: Vec<String> = Vec::new();
            let mut den_parts: Vec<String> = Vec::new();
            for f in fs {
                if let Node::Pow(b, r) = f.node() {
                    if r.is_negative() {
                        let flipped = -r.clone();
                        den_parts.push(render_pow_parts(b, &flipped, vocab, true));
                        continue;
                    }
                }
                num_parts.push(render_factor(f, vocab));
            }
            let head = if num_parts.is_empty() {
                "1".to_string()
            } else {
                num_parts.join("*")
            };
            match den_parts.len() {
                0 => head,
                1 => format!("{}/{}", head, den_parts[0]),
                _ => format!("{}/({})", head, den_parts.join("*")),
            }
        }
        _ => render_factor(e, vocab),
    }
}

fn render_factor(e: &Expr, vocab: &Vocab) -> String {
    match e.node() {
        Node::Num(c) => {
            if c.is_negative() || !c.is_integer() {
                format!("({})", num_str(c))
            } else {
                num_str(c)
            }
        }
        Node::Sym(s) => vocab.sym_name(s),
        Node::Sum(_) => format!("({})", render_sum(e, vocab)),
        Node::Prod(_) => format!("({})", render_sum(e, vocab)),
        Node::Pow(b, r) => render_pow_parts(b, r, vocab, false),
        Node::Kernel(k, a) => format!("{}({})", k.name(), render_sum(a, vocab)),
        Node::Func(f) => render_func(f, vocab),
    }
}

/// `in_denominator` suppresses `^1` (a bare divisor).
fn render_pow_parts(base: &Expr, exp: &Scalar, vocab: &Vocab, in_denominator: bool) -> String {
    let base_str = match base.node() {
        Node::Sym(s) => vocab.sym_name(s),
        Node::Kernel(k, a) => format!("{}({})", k.name(), render_sum(a, vocab)),
        Node::Func(f) => render_func(f, vocab),
        Node::Num(c) if !c.is_negative() && c.is_integer() => num_str(c),
        _ => format!("({})", render_sum(base, vocab)),
    };
    if in_denominator && exp.is_one() {
        return base_str;
    }
    let exp_str = if exp.is_integer() && !exp.is_negative() {
        format!("{}", exp.numer())
    } else {
        format!("({})", num_str(exp))
    };
    format!("{}^{}", base_str, exp_str)
}

fn render_func(f: &FuncSym, vocab: &Vocab) -> String {
    let args: Vec<String> = f.args.iter().map(|a| render_sum(a, vocab)).collect();
    let mut name = f.name.to_string();
    if f.total_deriv() > 0 {
        // subscript form when each differentiated argument is a single-char
        // symbol: xi_xx(t, x); positional fallback otherwise
        let mut letters = String::new();
        let mut ok = true;
        for (k, &cnt) in f.deriv.iter().enumerate() {
            if cnt == 0 {
                continue;
            }
            let arg_name = match f.args[k].node() {
                Node::Sym(s) => vocab.sym_name(s),
                _ => String::new(),
            };
            if arg_name.len() == 1 {
                for _ in 0..cnt {
                    letters.push_str(&arg_name);
                }
            } else {
                ok = false;
                break;
            }
        }
        if ok {
            name.push('_');
            name.push_str(&letters);
        } else {
            let counts: Vec<String> = f.deriv.iter().map(|d| d.to_string()).collect();
            name.push_str(&format!("^({})", counts.join(",")));
        }
    }
    format!("{}({})", name, args.join(","))
}

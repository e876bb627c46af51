//! Exact expression kernel: immutable expression trees over arbitrary
//! precision rationals, with differentiation, substitution, normalization to
//! a rational-function normal form, and exact/numeric evaluation.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num::bigint::BigInt;
use num::traits::{One, Pow as NumPow, Signed, ToPrimitive, Zero};

mod equiv;
mod ratform;

pub use equiv::{equivalent, equivalent_witness, EquivResult, Undecided};
pub use ratform::{
    collect_coefficients, coordinates_over_common_den, normalize, numerator_of, MonomialKey,
    MonomialMap, NotPolynomial,
};

/// Exact scalar: arbitrary-precision rational number.
pub type Scalar = num::BigRational;

/// Scalar from an integer.
pub fn sc(n: i64) -> Scalar {
    Scalar::from_integer(BigInt::from(n))
}

/// Scalar from a fraction `n/d`.
pub fn sc_frac(n: i64, d: i64) -> Scalar {
    Scalar::new(BigInt::from(n), BigInt::from(d))
}

/// `v^k` for BigInt exponent `k` (negative inverts); errors on `0^negative`.
pub(crate) fn scalar_pow_int(v: &Scalar, k: &BigInt) -> Result<Scalar, EvalError> {
    if v.is_zero() {
        return if k.is_negative() {
            Err(EvalError::DivisionByZero)
        } else if k.is_zero() {
            Ok(Scalar::one())
        } else {
            Ok(Scalar::zero())
        };
    }
    let mag = k.magnitude().to_u32().expect("exponent magnitude too large");
    let p = NumPow::pow(v.clone(), mag);
    Ok(if k.is_negative() { p.recip() } else { p })
}

/// Exact `c^e` for fractional `e`, if the root exists in the rationals.
/// Requires `c > 0` (negative bases have no canonical rational root).
pub(crate) fn exact_scalar_root(c: &Scalar, e: &Scalar) -> Option<Scalar> {
    if e.is_integer() {
        return scalar_pow_int(c, e.numer()).ok();
    }
    if c.is_zero() {
        return if e.is_positive() { Some(Scalar::zero()) } else { None };
    }
    if c.is_negative() {
        return None;
    }
    let b = e.denom().to_u32()?;
    let root_of = |n: &BigInt| -> Option<BigInt> {
        let r = n.nth_root(b);
        if &NumPow::pow(r.clone(), b) == n {
            Some(r)
        } else {
            None
        }
    };
    let rn = root_of(c.numer())?;
    let rd = root_of(c.denom())?;
    scalar_pow_int(&Scalar::new(rn, rd), e.numer()).ok()
}

/// Canonical symbol kinds of the engine.
///
/// `Jet` multi-indices are per-independent-variable derivative counts; the
/// order-0 jet of a dependent variable is represented by `Dep`, so every `Jet`
/// has total order >= 1.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Sym {
    /// Independent variable (index into the base space ordering).
    Indep(u8),
    /// Dependent variable.
    Dep(u8),
    /// Jet (derivative) coordinate `u_{dep, idx}`.
    Jet { dep: u8, idx: Vec<u8> },
    /// Anonymous ansatz coefficient `c_k`.
    Coef(u32),
    /// Named free parameter.
    Param(Arc<str>),
}

impl Sym {
    pub fn param(name: &str) -> Sym {
        Sym::Param(Arc::from(name))
    }

    /// Total derivative order of a jet symbol (0 for base variables).
    pub fn jet_order(&self) -> u32 {
        match self {
            Sym::Jet { idx, .. } => idx.iter().map(|&k| k as u32).sum(),
            _ => 0,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Sym::Indep(_) => 0,
            Sym::Dep(_) => 1,
            Sym::Jet { .. } => 2,
            Sym::Coef(_) => 3,
            Sym::Param(_) => 4,
        }
    }
}

impl Ord for Sym {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank()).then_with(|| match (self, other) {
            (Sym::Indep(a), Sym::Indep(b)) => a.cmp(b),
            (Sym::Dep(a), Sym::Dep(b)) => a.cmp(b),
            // Jets sort by dependent variable, then graded (total order), then
            // lexicographically on the multi-index.
            (Sym::Jet { dep: d1, idx: i1 }, Sym::Jet { dep: d2, idx: i2 }) => d1
                .cmp(d2)
                .then_with(|| {
                    let o1: u32 = i1.iter().map(|&k| k as u32).sum();
                    let o2: u32 = i2.iter().map(|&k| k as u32).sum();
                    o1.cmp(&o2)
                })
                // within an order, derivatives on earlier variables first:
                // u_xx < u_xy < u_yy
                .then_with(|| i2.cmp(i1)),
            (Sym::Coef(a), Sym::Coef(b)) => a.cmp(b),
            (Sym::Param(a), Sym::Param(b)) => a.cmp(b),
            _ => unreachable!("rank already distinguished variants"),
        })
    }
}

impl PartialOrd for Sym {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Transcendental kernels admitted by the engine.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Kernel {
    Exp,
    Ln,
    Sin,
    Cos,
    Arctan,
}

impl Kernel {
    pub fn name(self) -> &'static str {
        match self {
            Kernel::Exp => "exp",
            Kernel::Ln => "ln",
            Kernel::Sin => "sin",
            Kernel::Cos => "cos",
            Kernel::Arctan => "arctan",
        }
    }

    pub fn from_name(s: &str) -> Option<Kernel> {
        Some(match s {
            "exp" => Kernel::Exp,
            "ln" => Kernel::Ln,
            "sin" => Kernel::Sin,
            "cos" => Kernel::Cos,
            "arctan" => Kernel::Arctan,
            _ => return None,
        })
    }
}

/// Opaque function symbol `name(args)` carrying partial-derivative counts per
/// argument (`deriv[k]` = number of derivatives w.r.t. the k-th argument slot).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct FuncSym {
    pub name: Arc<str>,
    pub args: Vec<Expr>,
    pub deriv: Vec<u16>,
}

impl FuncSym {
    pub fn new(name: &str, args: Vec<Expr>) -> FuncSym {
        let deriv = vec![0; args.len()];
        FuncSym { name: Arc::from(name), args, deriv }
    }

    pub fn total_deriv(&self) -> u32 {
        self.deriv.iter().map(|&k| k as u32).sum()
    }
}

/// Expression tree node. Trees are immutable and shared via `Expr`.
#[derive(PartialEq, Eq, Hash, Debug)]
pub enum Node {
    Num(Scalar),
    Sym(Sym),
    /// n-ary sum, flattened, children in canonical order, at most one Num.
    Sum(Vec<Expr>),
    /// n-ary product, flattened, children in canonical order, at most one Num.
    Prod(Vec<Expr>),
    /// `base^exp` with exact rational exponent (exp not 0 or 1).
    Pow(Expr, Scalar),
    Kernel(Kernel, Expr),
    Func(FuncSym),
}

/// Immutable, cheaply clonable expression handle.
#[derive(Clone, Eq, Debug)]
pub struct Expr(Arc<Node>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || *self.0 == *other.0
    }
}

impl std::hash::Hash for Expr {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.hash(state)
    }
}

fn node_rank(n: &Node) -> u8 {
    match n {
        Node::Num(_) => 0,
        Node::Sym(_) => 1,
        Node::Kernel(..) => 2,
        Node::Func(_) => 3,
        Node::Pow(..) => 4,
        Node::Prod(_) => 5,
        Node::Sum(_) => 6,
    }
}

impl Ord for Expr {
    /// Total structural order used for canonical child ordering.
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        let (a, b) = (self.node(), other.node());
        node_rank(a).cmp(&node_rank(b)).then_with(|| match (a, b) {
            (Node::Num(x), Node::Num(y)) => x.cmp(y),
            (Node::Sym(x), Node::Sym(y)) => x.cmp(y),
            (Node::Kernel(k1, a1), Node::Kernel(k2, a2)) => k1.cmp(k2).then_with(|| a1.cmp(a2)),
            (Node::Func(f), Node::Func(g)) => f.cmp(g),
            (Node::Pow(b1, e1), Node::Pow(b2, e2)) => b1.cmp(b2).then_with(|| e1.cmp(e2)),
            (Node::Prod(xs), Node::Prod(ys)) | (Node::Sum(xs), Node::Sum(ys)) => xs.cmp(ys),
            _ => unreachable!("rank already distinguished variants"),
        })
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    fn raw(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn num(c: Scalar) -> Expr {
        Expr::raw(Node::Num(c))
    }

    pub fn int(n: i64) -> Expr {
        Expr::num(sc(n))
    }

    pub fn frac(n: i64, d: i64) -> Expr {
        Expr::num(sc_frac(n, d))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn sym(s: Sym) -> Expr {
        Expr::raw(Node::Sym(s))
    }

    pub fn func(f: FuncSym) -> Expr {
        debug_assert_eq!(f.args.len(), f.deriv.len());
        Expr::raw(Node::Func(f))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.node(), Node::Num(c) if c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self.node(), Node::Num(c) if c.is_one())
    }

    pub fn as_num(&self) -> Option<&Scalar> {
        match self.node() {
            Node::Num(c) => Some(c),
            _ => None,
        }
    }

    /// n-ary sum with flattening, numeric folding and like-term merging.
    pub fn add(terms: Vec<Expr>) -> Expr {
        let mut constant = Scalar::zero();
        // term core -> accumulated scalar coefficient
        let mut acc: BTreeMap<Expr, Scalar> = BTreeMap::new();
        let mut stack = terms;
        stack.reverse();
        while let Some(t) = stack.pop() {
            match t.node() {
                Node::Num(c) => constant += c,
                Node::Sum(children) => stack.extend(children.iter().rev().cloned()),
                _ => {
                    let (core, coeff) = split_coeff(&t);
                    let slot = acc.entry(core).or_insert_with(Scalar::zero);
                    *slot += coeff;
                }
            }
        }
        let mut out: Vec<Expr> = Vec::with_capacity(acc.len() + 1);
        if !constant.is_zero() {
            out.push(Expr::num(constant));
        }
        for (core, coeff) in acc {
            if coeff.is_zero() {
                continue;
            }
            if coeff.is_one() {
                out.push(core);
            } else {
                out.push(Expr::mul(vec![Expr::num(coeff), core]));
            }
        }
        out.sort();
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::raw(Node::Sum(out)),
        }
    }

    /// n-ary product with flattening, numeric folding and like-base merging.
    pub fn mul(factors: Vec<Expr>) -> Expr {
        let mut constant = Scalar::one();
        // base -> accumulated exponent
        let mut acc: BTreeMap<Expr, Scalar> = BTreeMap::new();
        let mut stack = factors;
        stack.reverse();
        while let Some(f) = stack.pop() {
            match f.node() {
                Node::Num(c) => {
                    if c.is_zero() {
                        return Expr::zero();
                    }
                    constant *= c;
                }
                Node::Prod(children) => stack.extend(children.iter().rev().cloned()),
                Node::Pow(base, exp) => {
                    let slot = acc.entry(base.clone()).or_insert_with(Scalar::zero);
                    *slot += exp;
                }
                _ => {
                    let slot = acc.entry(f.clone()).or_insert_with(Scalar::zero);
                    *slot += Scalar::one();
                }
            }
        }
        let mut out: Vec<Expr> = Vec::with_capacity(acc.len() + 1);
        for (base, exp) in acc {
            if exp.is_zero() {
                continue;
            }
            let f = Expr::pow(base, exp);
            match f.node() {
                Node::Num(c) => {
                    if c.is_zero() {
                        return Expr::zero();
                    }
                    constant *= c;
                }
                _ => out.push(f),
            }
        }
        if out.is_empty() {
            return Expr::num(constant);
        }
        if !constant.is_one() {
            out.push(Expr::num(constant));
        }
        out.sort();
        match out.len() {
            1 => out.pop().unwrap(),
            _ => Expr::raw(Node::Prod(out)),
        }
    }

    /// `base^exp` with exact rational exponent.
    ///
    /// Folds `e^0 -> 1`, `e^1 -> e`, exact numeric powers/roots, nested powers
    /// `(b^r)^s -> b^(r*s)` (positive-base convention for fractional
    /// exponents), integer powers of products, and `exp(a)^r -> exp(r*a)`.
    /// `0^negative` panics: callers must not build literal division by zero.
    pub fn pow(base: Expr, exp: Scalar) -> Expr {
        if exp.is_zero() {
            return Expr::one();
        }
        if exp.is_one() {
            return base;
        }
        match base.node() {
            Node::Num(c) => {
                if c.is_zero() && exp.is_negative() {
                    panic!("division by zero in exact power");
                }
                if let Some(v) = exact_scalar_root(c, &exp) {
                    return Expr::num(v);
                }
                Expr::raw(Node::Pow(base, exp))
            }
            Node::Pow(inner, inner_exp) => Expr::pow(inner.clone(), inner_exp * &exp),
            Node::Prod(factors) if exp.is_integer() => {
                Expr::mul(factors.iter().map(|f| Expr::pow(f.clone(), exp.clone())).collect())
            }
            Node::Kernel(Kernel::Exp, arg) => {
                Expr::kernel(Kernel::Exp, Expr::mul(vec![Expr::num(exp), arg.clone()]))
            }
            _ => Expr::raw(Node::Pow(base, exp)),
        }
    }

    /// Kernel application with exact special values and `ln(exp(a)) -> a`.
    pub fn kernel(k: Kernel, arg: Expr) -> Expr {
        if let Node::Num(c) = arg.node() {
            if c.is_zero() {
                return match k {
                    Kernel::Exp | Kernel::Cos => Expr::one(),
                    Kernel::Ln => panic!("ln(0) is undefined"),
                    Kernel::Sin | Kernel::Arctan => Expr::zero(),
                };
            }
            if c.is_one() && k == Kernel::Ln {
                return Expr::zero();
            }
        }
        if k == Kernel::Ln {
            if let Node::Kernel(Kernel::Exp, inner) = arg.node() {
                return inner.clone();
            }
        }
        Expr::raw(Node::Kernel(k, arg))
    }

    pub fn neg(e: Expr) -> Expr {
        Expr::mul(vec![Expr::int(-1), e])
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::add(vec![a, Expr::neg(b)])
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::mul(vec![a, Expr::pow(b, sc(-1))])
    }

    /// Set of symbols appearing anywhere in the tree (including inside kernel
    /// and function-symbol arguments).
    pub fn free_syms(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.collect_syms(&mut out);
        out
    }

    fn collect_syms(&self, out: &mut BTreeSet<Sym>) {
        match self.node() {
            Node::Num(_) => {}
            Node::Sym(s) => {
                out.insert(s.clone());
            }
            Node::Sum(xs) | Node::Prod(xs) => xs.iter().for_each(|x| x.collect_syms(out)),
            Node::Pow(b, _) => b.collect_syms(out),
            Node::Kernel(_, a) => a.collect_syms(out),
            Node::Func(f) => f.args.iter().for_each(|a| a.collect_syms(out)),
        }
    }

    pub fn contains_sym(&self, s: &Sym) -> bool {
        match self.node() {
            Node::Num(_) => false,
            Node::Sym(t) => t == s,
            Node::Sum(xs) | Node::Prod(xs) => xs.iter().any(|x| x.contains_sym(s)),
            Node::Pow(b, _) => b.contains_sym(s),
            Node::Kernel(_, a) => a.contains_sym(s),
            Node::Func(f) => f.args.iter().any(|a| a.contains_sym(s)),
        }
    }

    /// Names of opaque function symbols appearing in the tree.
    pub fn func_names(&self) -> BTreeSet<Arc<str>> {
        let mut out = BTreeSet::new();
        self.collect_func_names(&mut out);
        out
    }

    fn collect_func_names(&self, out: &mut BTreeSet<Arc<str>>) {
        match self.node() {
            Node::Num(_) | Node::Sym(_) => {}
            Node::Sum(xs) | Node::Prod(xs) => xs.iter().for_each(|x| x.collect_func_names(out)),
            Node::Pow(b, _) => b.collect_func_names(out),
            Node::Kernel(_, a) => a.collect_func_names(out),
            Node::Func(f) => {
                out.insert(f.name.clone());
                f.args.iter().for_each(|a| a.collect_func_names(out));
            }
        }
    }
}

/// Split `t` into (core, scalar coefficient): `3*x*y -> (x*y, 3)`.
fn split_coeff(t: &Expr) -> (Expr, Scalar) {
    if let Node::Prod(fs) = t.node() {
        if let Node::Num(c) = fs[0].node() {
            let rest: Vec<Expr> = fs[1..].to_vec();
            let core = if rest.len() == 1 {
                rest.into_iter().next().unwrap()
            } else {
                Expr::raw(Node::Prod(rest))
            };
            return (core, c.clone());
        }
    }
    (t.clone(), Scalar::one())
}

/// Partial derivative of `e` with respect to the symbol `s`.
///
/// All symbols are treated as independent coordinates; opaque function
/// symbols chain through their arguments and accumulate derivative counts.
pub fn differentiate(e: &Expr, s: &Sym) -> Expr {
    match e.node() {
        Node::Num(_) => Expr::zero(),
        Node::Sym(t) => {
            if t == s {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Sum(xs) => Expr::add(xs.iter().map(|x| differentiate(x, s)).collect()),
        Node::Prod(xs) => {
            let mut terms = Vec::with_capacity(xs.len());
            for (i, xi) in xs.iter().enumerate() {
                let di = differentiate(xi, s);
                if di.is_zero() {
                    continue;
                }
                let mut fs: Vec<Expr> = Vec::with_capacity(xs.len());
                fs.push(di);
                for (j, xj) in xs.iter().enumerate() {
                    if j != i {
                        fs.push(xj.clone());
                    }
                }
                terms.push(Expr::mul(fs));
            }
            Expr::add(terms)
        }
        Node::Pow(b, r) => {
            let db = differentiate(b, s);
            if db.is_zero() {
                return Expr::zero();
            }
            let mut dec = r.clone();
            dec -= Scalar::one();
            Expr::mul(vec![Expr::num(r.clone()), Expr::pow(b.clone(), dec), db])
        }
        Node::Kernel(k, a) => {
            let da = differentiate(a, s);
            if da.is_zero() {
                return Expr::zero();
            }
            let outer = match k {
                Kernel::Exp => Expr::kernel(Kernel::Exp, a.clone()),
                Kernel::Ln => Expr::pow(a.clone(), sc(-1)),
                Kernel::Sin => Expr::kernel(Kernel::Cos, a.clone()),
                Kernel::Cos => Expr::neg(Expr::kernel(Kernel::Sin, a.clone())),
                Kernel::Arctan => Expr::pow(
                    Expr::add(vec![Expr::one(), Expr::pow(a.clone(), sc(2))]),
                    sc(-1),
                ),
            };
            Expr::mul(vec![outer, da])
        }
        Node::Func(f) => {
            let mut terms = Vec::new();
            for (k, arg) in f.args.iter().enumerate() {
                let darg = differentiate(arg, s);
                if darg.is_zero() {
                    continue;
                }
                let mut bumped = f.clone();
                bumped.deriv[k] += 1;
                terms.push(Expr::mul(vec![darg, Expr::func(bumped)]));
            }
            Expr::add(terms)
        }
    }
}

/// Definition of an opaque function symbol used by `substitute` to expand
/// `name(args)` (and its derivatives) into a concrete expression.
#[derive(Clone, Debug)]
pub struct FuncDef {
    pub params: Vec<Sym>,
    pub body: Expr,
}

/// Simultaneous substitution bindings: symbol replacements and function
/// symbol definitions.
#[derive(Clone, Debug, Default)]
pub struct Bindings {
    pub syms: BTreeMap<Sym, Expr>,
    pub funcs: BTreeMap<Arc<str>, FuncDef>,
}

impl Bindings {
    pub fn of_syms<I: IntoIterator<Item = (Sym, Expr)>>(it: I) -> Bindings {
        Bindings { syms: it.into_iter().collect(), funcs: BTreeMap::new() }
    }

    pub fn bind(mut self, s: Sym, e: Expr) -> Bindings {
        self.syms.insert(s, e);
        self
    }

    pub fn bind_func(mut self, name: &str, params: Vec<Sym>, body: Expr) -> Bindings {
        self.funcs.insert(Arc::from(name), FuncDef { params, body });
        self
    }
}

/// Substitution failure.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SubstituteError {
    /// A function definition expands (directly or indirectly) into itself.
    #[error("cyclic binding while expanding function symbol '{0}'")]
    CyclicBinding(String),
}

/// Simultaneous substitution followed by normalization.
///
/// Symbol bindings are applied in one pass (swaps like `{x -> y, y -> x}` are
/// legal and do not cascade). Function definitions expand `f(args)` with
/// derivative counts `(d1, .., dk)` into the corresponding partial derivative
/// of the body evaluated at the (already substituted) arguments.
pub fn substitute(e: &Expr, b: &Bindings) -> Result<Expr, SubstituteError> {
    let mut active: Vec<Arc<str>> = Vec::new();
    let raw = subst_rec(e, b, &mut active)?;
    Ok(normalize(&raw))
}

fn subst_rec(e: &Expr, b: &Bindings, active: &mut Vec<Arc<str>>) -> Result<Expr, SubstituteError> {
    Ok(match e.node() {
        Node::Num(_) => e.clone(),
        Node::Sym(s) => match b.syms.get(s) {
            Some(v) => v.clone(),
            None => e.clone(),
        },
        Node::Sum(xs) => Expr::add(
            xs.iter().map(|x| subst_rec(x, b, active)).collect::<Result<Vec<_>, _>>()?,
        ),
        Node::Prod(xs) => Expr::mul(
            xs.iter().map(|x| subst_rec(x, b, active)).collect::<Result<Vec<_>, _>>()?,
        ),
        Node::Pow(base, exp) => Expr::pow(subst_rec(base, b, active)?, exp.clone()),
        Node::Kernel(k, a) => Expr::kernel(*k, subst_rec(a, b, active)?),
        Node::Func(f) => {
            let args: Vec<Expr> =
                f.args.iter().map(|a| subst_rec(a, b, active)).collect::<Result<_, _>>()?;
            match b.funcs.get(&f.name) {
                None => Expr::func(FuncSym { name: f.name.clone(), args, deriv: f.deriv.clone() }),
                Some(def) => {
                    if active.contains(&f.name) {
                        return Err(SubstituteError::CyclicBinding(f.name.to_string()));
                    }
                    assert_eq!(
                        def.params.len(),
                        f.args.len(),
                        "arity mismatch expanding '{}'",
                        f.name
                    );
                    // Differentiate the body per the accumulated counts, then
                    // plug in the substituted arguments.
                    let mut body = def.body.clone();
                    for (k, &cnt) in f.deriv.iter().enumerate() {
                        for _ in 0..cnt {
                            body = differentiate(&body, &def.params[k]);
                        }
                    }
                    let inner = Bindings {
                        syms: def.params.iter().cloned().zip(args).collect(),
                        funcs: b.funcs.clone(),
                    };
                    active.push(f.name.clone());
                    let out = subst_rec(&body, &inner, active)?;
                    active.pop();
                    out
                }
            }
        }
    })
}

/// Exact evaluation failure.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("no exact rational value: {0}")]
    InexactKernel(String),
    #[error("unbound symbol in evaluation point")]
    UnboundSymbol,
}

/// Evaluate to an exact rational, or fail if the value is irrational,
/// undefined, or the point is incomplete.
pub fn evaluate_exact(e: &Expr, point: &BTreeMap<Sym, Scalar>) -> Result<Scalar, EvalError> {
    match e.node() {
        Node::Num(c) => Ok(c.clone()),
        Node::Sym(s) => point.get(s).cloned().ok_or(EvalError::UnboundSymbol),
        Node::Sum(xs) => {
            let mut acc = Scalar::zero();
            for x in xs {
                acc += evaluate_exact(x, point)?;
            }
            Ok(acc)
        }
        Node::Prod(xs) => {
            let mut acc = Scalar::one();
            for x in xs {
                acc *= evaluate_exact(x, point)?;
            }
            Ok(acc)
        }
        Node::Pow(b, r) => {
            let vb = evaluate_exact(b, point)?;
            if r.is_integer() {
                scalar_pow_int(&vb, r.numer())
            } else if vb.is_zero() {
                if r.is_positive() {
                    Ok(Scalar::zero())
                } else {
                    Err(EvalError::DivisionByZero)
                }
            } else {
                exact_scalar_root(&vb, r)
                    .ok_or_else(|| EvalError::InexactKernel(format!("{}^{}", vb, r)))
            }
        }
        Node::Kernel(k, a) => {
            let va = evaluate_exact(a, point)?;
            match k {
                Kernel::Exp if va.is_zero() => Ok(Scalar::one()),
                Kernel::Ln if va.is_one() => Ok(Scalar::zero()),
                Kernel::Sin | Kernel::Arctan if va.is_zero() => Ok(Scalar::zero()),
                Kernel::Cos if va.is_zero() => Ok(Scalar::one()),
                _ => Err(EvalError::InexactKernel(format!("{}({})", k.name(), va))),
            }
        }
        Node::Func(f) => Err(EvalError::InexactKernel(format!("opaque function '{}'", f.name))),
    }
}

/// Numeric evaluation failure (undefined value, domain violation, overflow,
/// or a non-finite intermediate).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("domain fault: {0}")]
pub struct DomainFault(pub String);

/// Evaluate to f64. NaN and infinities are faults, never propagated.
pub fn evaluate_numeric(e: &Expr, point: &BTreeMap<Sym, f64>) -> Result<f64, DomainFault> {
    evaluate_numeric_ext(e, point, &BTreeMap::new())
}

/// Numeric evaluation with values for opaque function symbols (used by the
/// probabilistic equivalence probe, which treats distinct function-symbol
/// instances as independent unknowns).
pub(crate) fn evaluate_numeric_ext(
    e: &Expr,
    point: &BTreeMap<Sym, f64>,
    funcs: &BTreeMap<FuncSym, f64>,
) -> Result<f64, DomainFault> {
    let v = match e.node() {
        Node::Num(c) => c.numer().to_f64().unwrap_or(f64::NAN) / c.denom().to_f64().unwrap_or(f64::NAN),
        Node::Sym(s) => *point
            .get(s)
            .ok_or_else(|| DomainFault(format!("unbound symbol {:?}", s)))?,
        Node::Sum(xs) => {
            let mut acc = 0.0;
            for x in xs {
                acc += evaluate_numeric_ext(x, point, funcs)?;
            }
            acc
        }
        Node::Prod(xs) => {
            let mut acc = 1.0;
            for x in xs {
                acc *= evaluate_numeric_ext(x, point, funcs)?;
            }
            acc
        }
        Node::Pow(b, r) => {
            let vb = evaluate_numeric_ext(b, point, funcs)?;
            let re = r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN);
            if vb == 0.0 && re < 0.0 {
                return Err(DomainFault("division by zero".into()));
            }
            if vb < 0.0 && !r.is_integer() {
                return Err(DomainFault("negative base under fractional power".into()));
            }
            vb.powf(re)
        }
        Node::Kernel(k, a) => {
            let va = evaluate_numeric_ext(a, point, funcs)?;
            match k {
                Kernel::Exp => va.exp(),
                Kernel::Ln => {
                    if va <= 0.0 {
                        return Err(DomainFault(format!("ln of non-positive value {}", va)));
                    }
                    va.ln()
                }
                Kernel::Sin => va.sin(),
                Kernel::Cos => va.cos(),
                Kernel::Arctan => va.atan(),
            }
        }
        Node::Func(f) => *funcs
            .get(f)
            .ok_or_else(|| DomainFault(format!("opaque function '{}'", f.name)))?,
    };
    if !v.is_finite() {
        return Err(DomainFault("non-finite value".into()));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Expr {
        Expr::sym(Sym::Indep(0))
    }

    fn y() -> Expr {
        Expr::sym(Sym::Indep(1))
    }

    fn u() -> Expr {
        Expr::sym(Sym::Dep(0))
    }

    #[test]
    fn constructors_fold_numbers() {
        let e = Expr::add(vec![Expr::int(2), x(), Expr::int(3)]);
        match e.node() {
            Node::Sum(xs) => {
                assert_eq!(xs.len(), 2);
                assert_eq!(xs[0], Expr::int(5));
            }
            _ => panic!("expected sum"),
        }
        assert_eq!(Expr::mul(vec![Expr::int(0), x()]), Expr::zero());
        assert_eq!(Expr::mul(vec![Expr::int(1), x()]), x());
        assert_eq!(Expr::add(vec![]), Expr::zero());
        assert_eq!(Expr::mul(vec![]), Expr::one());
    }

    #[test]
    fn like_terms_merge() {
        let e = Expr::add(vec![x(), x(), x()]);
        assert_eq!(e, Expr::mul(vec![Expr::int(3), x()]));
        let two_x = Expr::mul(vec![Expr::int(2), x()]);
        let minus_two_x = Expr::mul(vec![Expr::int(-2), x()]);
        assert_eq!(Expr::add(vec![two_x, minus_two_x]), Expr::zero());
    }

    #[test]
    fn like_bases_merge() {
        let e = Expr::mul(vec![x(), x()]);
        assert_eq!(e, Expr::pow(x(), sc(2)));
        let e = Expr::mul(vec![x(), Expr::pow(x(), sc(-1))]);
        assert_eq!(e, Expr::one());
        let e = Expr::mul(vec![Expr::pow(x(), sc_frac(1, 2)), Expr::pow(x(), sc_frac(1, 2))]);
        assert_eq!(e, x());
    }

    #[test]
    fn pow_folds() {
        assert_eq!(Expr::pow(Expr::int(2), sc(10)), Expr::int(1024));
        assert_eq!(Expr::pow(Expr::int(4), sc_frac(1, 2)), Expr::int(2));
        assert_eq!(Expr::pow(Expr::frac(8, 27), sc_frac(2, 3)), Expr::frac(4, 9));
        // no exact root: stays symbolic
        assert!(matches!(Expr::pow(Expr::int(2), sc_frac(1, 2)).node(), Node::Pow(..)));
        // nested powers fold exponents
        let e = Expr::pow(Expr::pow(x(), sc(2)), sc_frac(3, 2));
        assert_eq!(e, Expr::pow(x(), sc(3)));
        assert_eq!(Expr::pow(x(), sc(0)), Expr::one());
    }

    #[test]
    fn kernel_special_values() {
        assert_eq!(Expr::kernel(Kernel::Exp, Expr::zero()), Expr::one());
        assert_eq!(Expr::kernel(Kernel::Ln, Expr::one()), Expr::zero());
        assert_eq!(Expr::kernel(Kernel::Sin, Expr::zero()), Expr::zero());
        assert_eq!(Expr::kernel(Kernel::Cos, Expr::zero()), Expr::one());
        let e = Expr::kernel(Kernel::Ln, Expr::kernel(Kernel::Exp, x()));
        assert_eq!(e, x());
        // exp(a)^2 -> exp(2a)
        let e = Expr::pow(Expr::kernel(Kernel::Exp, x()), sc(2));
        assert_eq!(e, Expr::kernel(Kernel::Exp, Expr::mul(vec![Expr::int(2), x()])));
    }

    #[test]
    fn sym_order_is_graded_on_jets() {
        let u_x = Sym::Jet { dep: 0, idx: vec![1, 0] };
        let u_y = Sym::Jet { dep: 0, idx: vec![0, 1] };
        let u_xx = Sym::Jet { dep: 0, idx: vec![2, 0] };
        assert!(Sym::Indep(0) < Sym::Dep(0));
        assert!(Sym::Dep(0) < u_x);
        assert!(u_x < u_y); // same order: lex on index
        assert!(u_y < u_xx); // lower total order first
        assert!(Sym::Coef(0) > u_xx);
    }

    #[test]
    fn differentiate_basics() {
        let e = Expr::mul(vec![x(), x(), y()]); // x^2 y
        let d = differentiate(&e, &Sym::Indep(0));
        assert_eq!(d, Expr::mul(vec![Expr::int(2), x(), y()]));

        let e = Expr::pow(x(), sc_frac(1, 2));
        let d = differentiate(&e, &Sym::Indep(0));
        assert_eq!(d, Expr::mul(vec![Expr::frac(1, 2), Expr::pow(x(), sc_frac(-1, 2))]));

        let e = Expr::kernel(Kernel::Sin, Expr::mul(vec![Expr::int(2), x()]));
        let d = differentiate(&e, &Sym::Indep(0));
        assert_eq!(
            d,
            Expr::mul(vec![
                Expr::int(2),
                Expr::kernel(Kernel::Cos, Expr::mul(vec![Expr::int(2), x()]))
            ])
        );
    }

    #[test]
    fn differentiate_func_symbol_chains() {
        // d/dx f(x, u) = f^(1,0)(x, u); d/du adds to the second slot
        let f = FuncSym::new("f", vec![x(), u()]);
        let e = Expr::func(f.clone());
        let dx = differentiate(&e, &Sym::Indep(0));
        match dx.node() {
            Node::Func(g) => assert_eq!(g.deriv, vec![1, 0]),
            _ => panic!("expected function symbol"),
        }
        let e2 = Expr::func(FuncSym::new("f", vec![Expr::pow(x(), sc(2)), u()]));
        let d2 = differentiate(&e2, &Sym::Indep(0));
        // 2x * f^(1,0)(x^2, u)
        match d2.node() {
            Node::Prod(fs) => assert_eq!(fs.len(), 3),
            _ => panic!("expected product, got {:?}", d2),
        }
    }

    #[test]
    fn substitute_is_simultaneous() {
        let b = Bindings::of_syms(vec![
            (Sym::Indep(0), y()),
            (Sym::Indep(1), x()),
        ]);
        let e = Expr::sub(x(), y());
        let got = substitute(&e, &b).unwrap();
        assert_eq!(got, normalize(&Expr::sub(y(), x())));
    }

    #[test]
    fn substitute_expands_function_definitions() {
        // f(x, u) := x^2 * u; then f^(1,0)(t, u) = 2 t u under params (t, u)
        let params = vec![Sym::Indep(0), Sym::Dep(0)];
        let body = Expr::mul(vec![Expr::pow(x(), sc(2)), u()]);
        let b = Bindings::default().bind_func("f", params, body);
        let mut f = FuncSym::new("f", vec![x(), u()]);
        f.deriv = vec![1, 0];
        let got = substitute(&Expr::func(f), &b).unwrap();
        assert_eq!(got, normalize(&Expr::mul(vec![Expr::int(2), x(), u()])));
    }

    #[test]
    fn substitute_detects_cyclic_function_definition() {
        let body = Expr::func(FuncSym::new("f", vec![x()]));
        let b = Bindings::default().bind_func("f", vec![Sym::Indep(0)], body);
        let e = Expr::func(FuncSym::new("f", vec![y()]));
        assert!(matches!(
            substitute(&e, &b),
            Err(SubstituteError::CyclicBinding(_))
        ));
    }

    #[test]
    fn evaluate_exact_basics() {
        let mut pt = BTreeMap::new();
        pt.insert(Sym::Indep(0), sc(3));
        let e = Expr::add(vec![Expr::pow(x(), sc(2)), Expr::int(1)]);
        assert_eq!(evaluate_exact(&e, &pt).unwrap(), sc(10));
        // 4^(1/2) evaluates exactly, 3^(1/2) does not
        let e = Expr::pow(Expr::add(vec![x(), Expr::one()]), sc_frac(1, 2));
        assert_eq!(evaluate_exact(&e, &pt).unwrap(), sc(2));
        let e = Expr::pow(x(), sc_frac(1, 2));
        assert!(matches!(evaluate_exact(&e, &pt), Err(EvalError::InexactKernel(_))));
        let e = Expr::pow(Expr::sub(x(), Expr::int(3)), sc(-1));
        assert_eq!(evaluate_exact(&e, &pt), Err(EvalError::DivisionByZero));
        assert!(matches!(
            evaluate_exact(&y(), &pt),
            Err(EvalError::UnboundSymbol)
        ));
    }

    #[test]
    fn evaluate_numeric_faults_instead_of_nan() {
        let mut pt = BTreeMap::new();
        pt.insert(Sym::Indep(0), -1.0);
        let e = Expr::kernel(Kernel::Ln, x());
        assert!(evaluate_numeric(&e, &pt).is_err());
        let e = Expr::pow(x(), sc_frac(1, 2));
        assert!(evaluate_numeric(&e, &pt).is_err());
        pt.insert(Sym::Indep(0), 2.0);
        let e = Expr::kernel(Kernel::Ln, x());
        assert!((evaluate_numeric(&e, &pt).unwrap() - 2.0_f64.ln()).abs() < 1e-15);
    }
}

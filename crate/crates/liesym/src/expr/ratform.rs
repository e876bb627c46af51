//! Rational-function normal form over a dynamic generator set.
//!
//! Expressions are flattened into quotients of multivariate polynomials whose
//! "variables" (generators) are symbols, kernel applications, opaque function
//! symbols, and surds (non-monomial bases raised to fractional powers).
//! Monomial exponents are rationals (Puiseux-style): positive throughout, with
//! negative powers living in the denominator. The normal form is unique:
//! numerator and denominator are coprime, the denominator is integer-primitive
//! with positive leading coefficient, and terms are ordered graded-lex.

use std::collections::{BTreeMap, BTreeSet};
use std::cmp::Ordering;

use num::bigint::BigInt;
use num::integer::Integer;
use num::rational::Ratio;
use num::traits::{One, Signed, ToPrimitive, Zero};

use super::{exact_scalar_root, sc, Expr, FuncSym, Kernel, Node, Scalar, Sym};

/// Monomial exponent: exact rational with small components.
pub(crate) type Exp = Ratio<i64>;

fn exp_to_scalar(e: Exp) -> Scalar {
    Scalar::new(BigInt::from(*e.numer()), BigInt::from(*e.denom()))
}

fn scalar_to_exp(s: &Scalar) -> Exp {
    let n = s.numer().to_i64().expect("exponent numerator exceeds i64");
    let d = s.denom().to_i64().expect("exponent denominator exceeds i64");
    Ratio::new(n, d)
}

/// Polynomial generator: an atomic base the normal form treats as an
/// independent variable.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub(crate) enum Gen {
    Sym(Sym),
    /// Kernel application with canonical argument.
    Kernel(Kernel, Expr),
    /// Opaque function symbol with canonical arguments.
    Func(FuncSym),
    /// Non-monomial base (canonical sum, or a rational without an exact
    /// root) appearing under a fractional exponent.
    Surd(Expr),
}

impl Gen {
    /// Symbols the generator depends on (deep, through arguments).
    pub(crate) fn free_syms(&self) -> BTreeSet<Sym> {
        match self {
            Gen::Sym(s) => [s.clone()].into_iter().collect(),
            Gen::Kernel(_, a) | Gen::Surd(a) => a.free_syms(),
            Gen::Func(f) => {
                let mut out = BTreeSet::new();
                for a in &f.args {
                    out.extend(a.free_syms());
                }
                out
            }
        }
    }

    fn is_transcendental(&self) -> bool {
        matches!(self, Gen::Kernel(..) | Gen::Surd(_))
    }
}

/// Sparse monomial: generators with nonzero rational exponents, sorted by
/// generator. Inside polynomials all exponents are positive.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub(crate) struct Mono(pub(crate) Vec<(Gen, Exp)>);

impl Mono {
    pub(crate) fn unit() -> Mono {
        Mono(Vec::new())
    }

    pub(crate) fn of(g: Gen) -> Mono {
        Mono(vec![(g, Exp::one())])
    }

    pub(crate) fn is_unit(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn total_degree(&self) -> Exp {
        self.0.iter().map(|(_, e)| *e).fold(Exp::zero(), |a, b| a + b)
    }

    /// Product (exponent addition); drops cancelled generators.
    pub(crate) fn mul(&self, other: &Mono) -> Mono {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    let e = self.0[i].1 + other.0[j].1;
                    if !e.is_zero() {
                        out.push((self.0[i].0.clone(), e));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Mono(out)
    }

    /// Quotient; panics if any resulting exponent would be negative.
    pub(crate) fn div(&self, other: &Mono) -> Mono {
        let m = self.mul(&other.inv());
        debug_assert!(
            m.0.iter().all(|(_, e)| e.is_positive()),
            "inexact monomial division"
        );
        m
    }

    fn inv(&self) -> Mono {
        Mono(self.0.iter().map(|(g, e)| (g.clone(), -e)).collect())
    }

    fn exp_of(&self, g: &Gen) -> Exp {
        self.0
            .iter()
            .find(|(h, _)| h == g)
            .map(|(_, e)| *e)
            .unwrap_or_else(Exp::zero)
    }

    fn without(&self, g: &Gen) -> Mono {
        Mono(self.0.iter().filter(|(h, _)| h != g).cloned().collect())
    }

    /// Componentwise minimum (shared part of two monomials).
    fn gcd(&self, other: &Mono) -> Mono {
        let mut out = Vec::new();
        for (g, e) in &self.0 {
            let f = other.exp_of(g);
            let m = (*e).min(f);
            if m.is_positive() {
                out.push((g.clone(), m));
            }
        }
        Mono(out)
    }
}

impl Ord for Mono {
    /// Graded lexicographic order: total degree first, then lexicographic
    /// with earlier generators (in `Gen` order) taking priority.
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| {
                let (mut i, mut j) = (0, 0);
                loop {
                    match (self.0.get(i), other.0.get(j)) {
                        (None, None) => return Ordering::Equal,
                        // remaining entries mean positive exponents at
                        // generators the other lacks: lexicographically greater
                        (Some(_), None) => return Ordering::Greater,
                        (None, Some(_)) => return Ordering::Less,
                        (Some((ga, ea)), Some((gb, eb))) => match ga.cmp(gb) {
                            Ordering::Less => return Ordering::Greater,
                            Ordering::Greater => return Ordering::Less,
                            Ordering::Equal => match ea.cmp(eb) {
                                Ordering::Equal => {
                                    i += 1;
                                    j += 1;
                                }
                                ord => return ord,
                            },
                        },
                    }
                }
            })
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse multivariate polynomial: monomial -> nonzero rational coefficient.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub(crate) struct Poly(pub(crate) BTreeMap<Mono, Scalar>);

impl Poly {
    pub(crate) fn zero() -> Poly {
        Poly(BTreeMap::new())
    }

    pub(crate) fn constant(c: Scalar) -> Poly {
        let mut m = BTreeMap::new();
        if !c.is_zero() {
            m.insert(Mono::unit(), c);
        }
        Poly(m)
    }

    pub(crate) fn one() -> Poly {
        Poly::constant(Scalar::one())
    }

    pub(crate) fn term(m: Mono, c: Scalar) -> Poly {
        let mut map = BTreeMap::new();
        if !c.is_zero() {
            map.insert(m, c);
        }
        Poly(map)
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn is_one(&self) -> bool {
        self.0.len() == 1
            && self.0.iter().next().map(|(m, c)| m.is_unit() && c.is_one()).unwrap_or(false)
    }

    pub(crate) fn as_constant(&self) -> Option<Scalar> {
        if self.is_zero() {
            return Some(Scalar::zero());
        }
        if self.0.len() == 1 {
            let (m, c) = self.0.iter().next().unwrap();
            if m.is_unit() {
                return Some(c.clone());
            }
        }
        None
    }

    fn add_term(&mut self, m: Mono, c: Scalar) {
        if c.is_zero() {
            return;
        }
        match self.0.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub(crate) fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.0 {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub(crate) fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|(m, c)| (m.clone(), -c.clone())).collect())
    }

    pub(crate) fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub(crate) fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.0 {
            for (mb, cb) in &other.0 {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    pub(crate) fn mul_term(&self, m: &Mono, c: &Scalar) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly(self.0.iter().map(|(mm, cc)| (mm.mul(m), cc * c)).collect())
    }

    pub(crate) fn scale(&self, c: &Scalar) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly(self.0.iter().map(|(m, cc)| (m.clone(), cc * c)).collect())
    }

    /// Leading (greatest) monomial and coefficient under the graded-lex order.
    fn leading(&self) -> Option<(&Mono, &Scalar)> {
        self.0.iter().next_back()
    }

    /// Shared monomial factor of all terms.
    fn content_mono(&self) -> Mono {
        let mut it = self.0.keys();
        let first = match it.next() {
            None => return Mono::unit(),
            Some(m) => m.clone(),
        };
        it.fold(first, |acc, m| acc.gcd(m))
    }

    fn div_mono(&self, m: &Mono) -> Poly {
        if m.is_unit() {
            return self.clone();
        }
        Poly(self.0.iter().map(|(mm, c)| (mm.div(m), c.clone())).collect())
    }

    /// Positive rational `g` such that `self / g` has coprime integer
    /// coefficients. Zero polynomial yields 1.
    fn scalar_content(&self) -> Scalar {
        if self.is_zero() {
            return Scalar::one();
        }
        let mut num_gcd = BigInt::zero();
        let mut den_lcm = BigInt::one();
        for c in self.0.values() {
            num_gcd = num_gcd.gcd(c.numer());
            den_lcm = den_lcm.lcm(c.denom());
        }
        Scalar::new(num_gcd, den_lcm)
    }

    fn leading_sign_negative(&self) -> bool {
        self.leading().map(|(_, c)| c.is_negative()).unwrap_or(false)
    }

    /// Degree in one generator (0 if absent).
    fn degree_in(&self, g: &Gen) -> Exp {
        self.0
            .keys()
            .map(|m| m.exp_of(g))
            .max()
            .unwrap_or_else(Exp::zero)
    }

    /// All generators appearing in the polynomial.
    fn gens(&self) -> BTreeSet<Gen> {
        let mut out = BTreeSet::new();
        for m in self.0.keys() {
            for (g, _) in &m.0 {
                out.insert(g.clone());
            }
        }
        out
    }

    /// View as univariate in `g`: exponent -> coefficient polynomial.
    fn split_by(&self, g: &Gen) -> BTreeMap<Exp, Poly> {
        let mut out: BTreeMap<Exp, Poly> = BTreeMap::new();
        for (m, c) in &self.0 {
            let e = m.exp_of(g);
            out.entry(e).or_default().add_term(m.without(g), c.clone());
        }
        out
    }

    fn join_by(parts: &BTreeMap<Exp, Poly>, g: &Gen) -> Poly {
        let mut out = Poly::zero();
        for (e, p) in parts {
            let m = if e.is_zero() {
                Mono::unit()
            } else {
                Mono(vec![(g.clone(), *e)])
            };
            for (mm, c) in &p.0 {
                out.add_term(mm.mul(&m), c.clone());
            }
        }
        out
    }
}

/// Exact polynomial division; panics if the division leaves a remainder
/// (internal misuse: callers divide by known factors).
fn exact_div(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return Poly::zero();
    }
    if let Some(c) = b.as_constant() {
        assert!(!c.is_zero(), "exact division by zero polynomial");
        return a.scale(&c.recip());
    }
    let mut r = a.clone();
    let mut q = Poly::zero();
    let (lb_m, lb_c) = {
        let (m, c) = b.leading().unwrap();
        (m.clone(), c.clone())
    };
    while !r.is_zero() {
        let (lr_m, lr_c) = {
            let (m, c) = r.leading().unwrap();
            (m.clone(), c.clone())
        };
        let tm = lr_m.mul(&lb_m.inv());
        assert!(
            tm.0.iter().all(|(_, e)| e.is_positive()),
            "inexact polynomial division"
        );
        let tc = &lr_c / &lb_c;
        q.add_term(tm.clone(), tc.clone());
        r = r.sub(&b.mul_term(&tm, &tc));
    }
    q
}

/// Pseudo-remainder of `f` by `g` viewed as univariate in `gen`.
fn prem(f: &Poly, g: &Poly, gen: &Gen) -> Poly {
    let dg = g.degree_in(gen);
    let g_parts = g.split_by(gen);
    let lc_g = g_parts.get(&dg).cloned().unwrap_or_else(Poly::zero);
    let mut r = f.clone();
    loop {
        if r.is_zero() {
            return r;
        }
        let dr = r.degree_in(gen);
        if dr < dg {
            return r;
        }
        let r_parts = r.split_by(gen);
        let lc_r = r_parts.get(&dr).cloned().unwrap_or_else(Poly::zero);
        let shift = Mono(vec![(gen.clone(), dr - dg)]);
        let shift = if (dr - dg).is_zero() { Mono::unit() } else { shift };
        // r <- lc(g) * r - lc(r) * gen^(dr-dg) * g ; kills the leading term
        let mut step = Poly::zero();
        for (m, c) in &g.0 {
            step.add_term(m.mul(&shift), c.clone());
        }
        r = lc_g.mul(&r).sub(&lc_r.mul(&step));
    }
}

/// Strip rational scale: integer-primitive with original sign pattern.
fn int_primitive(p: &Poly) -> Poly {
    let c = p.scalar_content();
    if c.is_one() {
        p.clone()
    } else {
        p.scale(&c.recip())
    }
}

/// Integer-primitive with positive leading coefficient (canonical gcd rep).
fn canonical_assoc(p: &Poly) -> Poly {
    let q = int_primitive(p);
    if q.leading_sign_negative() {
        q.neg()
    } else {
        q
    }
}

/// Multivariate gcd via mono/scalar content extraction and a primitive PRS.
/// Result is canonical: integer-primitive, positive leading coefficient.
pub(crate) fn poly_gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return canonical_assoc(b);
    }
    if b.is_zero() {
        return canonical_assoc(a);
    }
    let ma = a.content_mono();
    let mb = b.content_mono();
    let shared = ma.gcd(&mb);
    let a1 = canonical_assoc(&a.div_mono(&ma));
    let b1 = canonical_assoc(&b.div_mono(&mb));
    let core = gcd_primitive(&a1, &b1);
    canonical_assoc(&core.mul_term(&shared, &Scalar::one()))
}

fn gcd_primitive(a: &Poly, b: &Poly) -> Poly {
    if a.is_one() || b.is_one() {
        return Poly::one();
    }
    if a.as_constant().is_some() || b.as_constant().is_some() {
        return Poly::one();
    }
    if a == b {
        return a.clone();
    }
    // pivot generator: present in both, minimizing the larger degree
    let gens_a = a.gens();
    let gens_b = b.gens();
    let mut pivot: Option<(Gen, Exp)> = None;
    for g in gens_a.intersection(&gens_b) {
        let d = a.degree_in(g).max(b.degree_in(g));
        match &pivot {
            Some((_, best)) if *best <= d => {}
            _ => pivot = Some((g.clone(), d)),
        }
    }
    let gen = match pivot {
        None => return Poly::one(),
        Some((g, _)) => g,
    };

    let (cont_a, pp_a) = univariate_primitive(a, &gen);
    let (cont_b, pp_b) = univariate_primitive(b, &gen);
    let cont = gcd_primitive(&canonical_assoc(&cont_a), &canonical_assoc(&cont_b));

    let (mut f, mut g) = if a.degree_in(&gen) >= b.degree_in(&gen) {
        (pp_a, pp_b)
    } else {
        (pp_b, pp_a)
    };
    let main = loop {
        let r = prem(&f, &g, &gen);
        if r.is_zero() {
            break g;
        }
        if r.degree_in(&gen).is_zero() {
            // nontrivial constant (in gen) remainder: coprime in gen
            break Poly::one();
        }
        f = g;
        g = univariate_primitive(&r, &gen).1;
    };
    canonical_assoc(&cont.mul(&main))
}

/// Content (gcd of univariate coefficients) and primitive part w.r.t. `gen`.
fn univariate_primitive(p: &Poly, gen: &Gen) -> (Poly, Poly) {
    let parts = p.split_by(gen);
    let mut cont = Poly::zero();
    for q in parts.values() {
        cont = poly_gcd(&cont, q);
        if cont.is_one() {
            break;
        }
    }
    if cont.is_one() {
        return (cont, int_primitive(p));
    }
    let pp: BTreeMap<Exp, Poly> = parts
        .iter()
        .map(|(e, q)| (*e, exact_div(q, &cont)))
        .collect();
    (cont, canonical_assoc(&Poly::join_by(&pp, gen)))
}

/// Rational function `num/den`. At rest (after `reduce_full`) the pair is
/// coprime, the denominator integer-primitive with positive leading
/// coefficient, and free of removable kernel structure.
#[derive(Clone, PartialEq, Eq, Debug)]
pub(crate) struct RatFn {
    pub(crate) num: Poly,
    pub(crate) den: Poly,
}

impl RatFn {
    pub(crate) fn zero() -> RatFn {
        RatFn { num: Poly::zero(), den: Poly::one() }
    }

    pub(crate) fn one() -> RatFn {
        RatFn { num: Poly::one(), den: Poly::one() }
    }

    pub(crate) fn constant(c: Scalar) -> RatFn {
        RatFn { num: Poly::constant(c), den: Poly::one() }
    }

    pub(crate) fn from_poly(p: Poly) -> RatFn {
        RatFn { num: p, den: Poly::one() }
    }

    fn of_gen(g: Gen) -> RatFn {
        RatFn::from_poly(Poly::term(Mono::of(g), Scalar::one()))
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub(crate) fn add(&self, other: &RatFn) -> RatFn {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if self.den == other.den {
            return RatFn { num: self.num.add(&other.num), den: self.den.clone() }.light_reduce();
        }
        let g = poly_gcd(&self.den, &other.den);
        let (qa, qb) = if g.is_one() {
            (self.den.clone(), other.den.clone())
        } else {
            (exact_div(&self.den, &g), exact_div(&other.den, &g))
        };
        let num = self.num.mul(&qb).add(&other.num.mul(&qa));
        let den = self.den.mul(&qb);
        RatFn { num, den }.light_reduce()
    }

    pub(crate) fn mul(&self, other: &RatFn) -> RatFn {
        if self.is_zero() || other.is_zero() {
            return RatFn::zero();
        }
        // cross-cancel to keep intermediates small
        let g1 = if other.den.is_one() { Poly::one() } else { poly_gcd(&self.num, &other.den) };
        let g2 = if self.den.is_one() { Poly::one() } else { poly_gcd(&other.num, &self.den) };
        let n1 = if g1.is_one() { self.num.clone() } else { exact_div(&self.num, &g1) };
        let d2 = if g1.is_one() { other.den.clone() } else { exact_div(&other.den, &g1) };
        let n2 = if g2.is_one() { other.num.clone() } else { exact_div(&other.num, &g2) };
        let d1 = if g2.is_one() { self.den.clone() } else { exact_div(&self.den, &g2) };
        stabilize(RatFn { num: n1.mul(&n2), den: d1.mul(&d2) }.light_reduce())
    }

    pub(crate) fn recip(&self) -> RatFn {
        assert!(!self.is_zero(), "division by zero rational function");
        RatFn { num: self.den.clone(), den: self.num.clone() }.light_reduce()
    }

    pub(crate) fn div(&self, other: &RatFn) -> RatFn {
        self.mul(&other.recip())
    }

    pub(crate) fn pow_int(&self, k: i64) -> RatFn {
        if k == 0 {
            return RatFn::one();
        }
        let base = if k < 0 { self.recip() } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = RatFn::one();
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&sq);
            }
            e >>= 1;
            if e > 0 {
                sq = sq.mul(&sq);
            }
        }
        acc
    }

    /// Cheap canonical touch-ups: common monomial content, denominator scale.
    fn light_reduce(self) -> RatFn {
        let mut num = self.num;
        let mut den = self.den;
        if num.is_zero() {
            return RatFn::zero();
        }
        let shared = num.content_mono().gcd(&den.content_mono());
        if !shared.is_unit() {
            num = num.div_mono(&shared);
            den = den.div_mono(&shared);
        }
        let mut scale = den.scalar_content();
        if den.leading_sign_negative() {
            scale = -scale;
        }
        if !scale.is_one() {
            let r = scale.recip();
            num = num.scale(&r);
            den = den.scale(&r);
        }
        RatFn { num, den }
    }

    /// Full canonical reduction: gcd cancellation on top of `light_reduce`.
    pub(crate) fn reduce_full(self) -> RatFn {
        let rf = self.light_reduce();
        if rf.num.is_zero() || rf.den.is_one() {
            return rf;
        }
        let g = poly_gcd(&rf.num, &rf.den);
        if g.is_one() {
            return rf;
        }
        RatFn { num: exact_div(&rf.num, &g), den: exact_div(&rf.den, &g) }.light_reduce()
    }

    /// True if any generator is a kernel application or surd (i.e. the
    /// expression is not a pure rational function of free symbols).
    pub(crate) fn has_transcendental(&self) -> bool {
        self.num
            .0
            .keys()
            .chain(self.den.0.keys())
            .any(|m| m.0.iter().any(|(g, _)| g.is_transcendental()))
    }

}

/// Lower an expression tree into (stabilized, fully reduced) normal form.
pub(crate) fn from_tree_reduced(e: &Expr) -> RatFn {
    stabilize(from_tree(e)).reduce_full()
}

fn from_tree(e: &Expr) -> RatFn {
    match e.node() {
        Node::Num(c) => RatFn::constant(c.clone()),
        Node::Sym(s) => RatFn::of_gen(Gen::Sym(s.clone())),
        Node::Sum(xs) => {
            let mut acc = RatFn::zero();
            for x in xs {
                acc = acc.add(&from_tree(x));
            }
            acc
        }
        Node::Prod(xs) => {
            let mut acc = RatFn::one();
            for x in xs {
                acc = acc.mul(&from_tree(x));
                if acc.is_zero() {
                    return acc;
                }
            }
            acc
        }
        Node::Pow(b, r) => pw(from_tree(b), scalar_to_exp(r)),
        Node::Kernel(k, a) => {
            let arg = to_expr(&from_tree_reduced(a));
            // the smart constructor applies exact special values and
            // ln(exp(..)) unwrapping on the canonical argument
            let built = Expr::kernel(*k, arg);
            match built.node() {
                Node::Kernel(kk, aa) => RatFn::of_gen(Gen::Kernel(*kk, aa.clone())),
                _ => from_tree(&built),
            }
        }
        Node::Func(f) => {
            let args: Vec<Expr> = f.args.iter().map(|a| to_expr(&from_tree_reduced(a))).collect();
            RatFn::of_gen(Gen::Func(FuncSym {
                name: f.name.clone(),
                args,
                deriv: f.deriv.clone(),
            }))
        }
    }
}

/// Raise to a rational power. Integer exponents are plain powers; fractional
/// exponents factor the base into scalar * monomial * primitive core and
/// produce Puiseux exponents and surd generators (positive-base convention).
fn pw(rf: RatFn, e: Exp) -> RatFn {
    if e.is_integer() {
        return stabilize(rf.pow_int(*e.numer()));
    }
    if rf.is_zero() {
        assert!(e.is_positive(), "division by zero in fractional power");
        return RatFn::zero();
    }
    let rf = rf.reduce_full();

    // factor: rf = c * m * (n1/d1), with n1, d1 integer-primitive,
    // positive-content-extracted, no monomial content
    let mn = rf.num.content_mono();
    let md = rf.den.content_mono();
    let n0 = rf.num.div_mono(&mn);
    let d0 = rf.den.div_mono(&md);
    let cn = n0.scalar_content();
    let cd = d0.scalar_content();
    let n1 = n0.scale(&cn.recip());
    let d1 = d0.scale(&cd.recip());
    let c = cn / cd;

    let mut acc = RatFn::one();

    // scalar part c^e (c > 0 by construction of scalar_content)
    let e_sc = exp_to_scalar(e);
    match exact_scalar_root(&c, &e_sc) {
        Some(v) => acc = acc.mul(&RatFn::constant(v)),
        None => {
            let (k, f) = split_exp(e);
            if k != 0 {
                acc = acc.mul(&RatFn::constant(
                    exact_scalar_root(&c, &sc(k)).expect("integer power of rational"),
                ));
            }
            acc = acc.mul(&surd_factor(Expr::num(c), f));
        }
    }

    // monomial part: scale exponents; surd generators keep exponents in (0,1)
    for (g, x) in mn.0.iter().map(|(g, x)| (g, *x)).chain(md.0.iter().map(|(g, x)| (g, -x))) {
        let y = x * e;
        match g {
            Gen::Surd(b) => {
                let (k, f) = split_exp(y);
                if k != 0 {
                    acc = acc.mul(&from_tree(b).pow_int(k));
                }
                if !f.is_zero() {
                    acc = acc.mul(&surd_factor(b.clone(), f));
                }
            }
            _ => {
                let p = Poly::term(Mono(vec![(g.clone(), y.abs())]), Scalar::one());
                let factor = if y.is_positive() {
                    RatFn::from_poly(p)
                } else {
                    RatFn { num: Poly::one(), den: p }
                };
                acc = acc.mul(&factor);
            }
        }
    }

    // core part (n1/d1)^e
    if n1 != d1 {
        let (k, f) = split_exp(e);
        if k != 0 {
            acc = acc.mul(&RatFn { num: n1.clone(), den: d1.clone() }.pow_int(k));
        }
        for (p, invert) in [(&n1, false), (&d1, true)] {
            if p.is_one() {
                continue;
            }
            let base = match p.as_constant() {
                Some(c) => Expr::num(c), // only +-1 possible, sign carrier
                None => poly_to_expr(p),
            };
            if base.is_one() {
                continue;
            }
            let s = surd_factor(base, f);
            acc = acc.mul(&if invert { s.recip() } else { s });
        }
    }

    stabilize(acc)
}

/// `e = k + f` with integer `k` and fractional part `f` in `[0, 1)`.
fn split_exp(e: Exp) -> (i64, Exp) {
    let k = e.floor().to_integer();
    (k, e - Ratio::from_integer(k))
}

fn surd_factor(base: Expr, f: Exp) -> RatFn {
    debug_assert!(f.is_positive() && f < Exp::one());
    RatFn::from_poly(Poly::term(Mono(vec![(Gen::Surd(base), f)]), Scalar::one()))
}

enum Offense {
    /// Monomial with mergeable exp-kernel powers.
    ExpMerge(Mono),
    /// Surd generator raised to an integer power: expandable.
    SurdExpand(Mono),
}

fn find_offense(p: &Poly) -> Option<Offense> {
    for m in p.0.keys() {
        let mut exp_gens = 0usize;
        let mut exp_nonunit = false;
        for (g, e) in &m.0 {
            match g {
                Gen::Kernel(Kernel::Exp, _) => {
                    exp_gens += 1;
                    if !e.is_one() {
                        exp_nonunit = true;
                    }
                }
                Gen::Surd(_) if e.is_integer() => {
                    return Some(Offense::SurdExpand(m.clone()));
                }
                _ => {}
            }
        }
        if exp_gens >= 2 || exp_nonunit {
            return Some(Offense::ExpMerge(m.clone()));
        }
    }
    None
}

/// Rewrite a single offending monomial into an equivalent rational function.
fn rewrite_mono(m: &Mono) -> RatFn {
    // look for a surd with integer exponent first
    for (g, e) in &m.0 {
        if let (Gen::Surd(b), true) = (g, e.is_integer()) {
            let rest = m.without(g);
            let expanded = from_tree(b).pow_int(*e.numer());
            return RatFn::from_poly(Poly::term(rest, Scalar::one())).mul(&expanded);
        }
    }
    // otherwise merge exp kernels: product of exp(a_i)^e_i -> exp(sum e_i a_i)
    let mut arg_terms: Vec<Expr> = Vec::new();
    let mut rest = Vec::new();
    for (g, e) in &m.0 {
        match g {
            Gen::Kernel(Kernel::Exp, a) => {
                arg_terms.push(Expr::mul(vec![Expr::num(exp_to_scalar(*e)), a.clone()]));
            }
            _ => rest.push((g.clone(), *e)),
        }
    }
    let merged = to_expr(&from_tree_reduced(&Expr::add(arg_terms)));
    let mut mono = Mono(rest);
    if !merged.is_zero() {
        mono = mono.mul(&Mono::of(Gen::Kernel(Kernel::Exp, merged)));
    }
    RatFn::from_poly(Poly::term(mono, Scalar::one()))
}

/// Apply kernel rewrite rules to a fixed point: exp-product merging and
/// expansion of surds raised to integer powers.
fn stabilize(rf: RatFn) -> RatFn {
    let mut rf = rf;
    for _ in 0..10_000 {
        let off_num = find_offense(&rf.num);
        let (in_den, off) = match off_num {
            Some(o) => (false, o),
            None => match find_offense(&rf.den) {
                Some(o) => (true, o),
                None => return rf,
            },
        };
        let m = match &off {
            Offense::ExpMerge(m) | Offense::SurdExpand(m) => m.clone(),
        };
        let rewritten = rewrite_mono(&m);
        if !in_den {
            let c = rf.num.0.get(&m).cloned().expect("offending term vanished");
            let mut rest = rf.num.clone();
            rest.0.remove(&m);
            // rf = rest/den + c * rewritten / den
            let den_rf = RatFn { num: Poly::one(), den: rf.den.clone() };
            let a = RatFn { num: rest, den: rf.den.clone() }.light_reduce();
            rf = a.add(&rewritten.mul(&RatFn::constant(c)).mul(&den_rf));
        } else {
            let c = rf.den.0.get(&m).cloned().expect("offending term vanished");
            let mut rest = rf.den.clone();
            rest.0.remove(&m);
            let new_den = RatFn::from_poly(rest).add(&rewritten.mul(&RatFn::constant(c)));
            rf = RatFn::from_poly(rf.num.clone()).div(&new_den);
        }
    }
    panic!("kernel rewrite did not stabilize");
}

/// Rebuild a canonical expression tree from the normal form.
pub(crate) fn to_expr(rf: &RatFn) -> Expr {
    let num_e = poly_to_expr(&rf.num);
    if rf.den.is_one() {
        return num_e;
    }
    let mut factors = vec![num_e];
    // pull the denominator's monomial content out as negative powers
    let m = rf.den.content_mono();
    let d2 = rf.den.div_mono(&m);
    for (g, e) in &m.0 {
        factors.push(Expr::pow(gen_to_expr(g), -exp_to_scalar(*e)));
    }
    if !d2.is_one() {
        factors.push(Expr::pow(poly_to_expr(&d2), sc(-1)));
    }
    Expr::mul(factors)
}

fn poly_to_expr(p: &Poly) -> Expr {
    let terms: Vec<Expr> = p.0.iter().map(|(m, c)| term_to_expr(m, c)).collect();
    Expr::add(terms)
}

fn term_to_expr(m: &Mono, c: &Scalar) -> Expr {
    let mut factors = Vec::with_capacity(m.0.len() + 1);
    if !c.is_one() || m.is_unit() {
        factors.push(Expr::num(c.clone()));
    }
    for (g, e) in &m.0 {
        let base = gen_to_expr(g);
        factors.push(if e.is_one() {
            base
        } else {
            Expr::pow(base, exp_to_scalar(*e))
        });
    }
    Expr::mul(factors)
}

fn gen_to_expr(g: &Gen) -> Expr {
    match g {
        Gen::Sym(s) => Expr::sym(s.clone()),
        Gen::Kernel(k, a) => Expr::kernel(*k, a.clone()),
        Gen::Func(f) => Expr::func(f.clone()),
        Gen::Surd(b) => b.clone(),
    }
}

/// Normalize to the rational-function normal form: unique representative of
/// the equivalence class modulo ring axioms, rational power laws on positive
/// bases, and the kernel rules `exp(a)exp(b) = exp(a+b)`, `ln(exp(a)) = a`.
pub fn normalize(e: &Expr) -> Expr {
    to_expr(&from_tree_reduced(e))
}

/// Numerator of the normalized rational form. The denominator is a canonical
/// polynomial (integer-primitive, positive leading coefficient), so the
/// numerator vanishes exactly where the expression does on its domain.
pub fn numerator_of(e: &Expr) -> Expr {
    poly_to_expr(&from_tree_reduced(e).num)
}

/// Exact coordinates for a family of expressions: every expression is
/// written over the least common denominator of the family and expanded in
/// the union of the numerator monomials. Vectors share positions, so linear
/// relations between the expressions and their coordinates coincide.
pub fn coordinates_over_common_den(exprs: &[Expr]) -> Vec<Vec<Scalar>> {
    let rfs: Vec<RatFn> = exprs.iter().map(from_tree_reduced).collect();
    let mut lcd = Poly::one();
    for r in &rfs {
        let g = poly_gcd(&lcd, &r.den);
        lcd = canonical_assoc(&exact_div(&lcd.mul(&r.den), &g));
    }
    let scaled: Vec<Poly> = rfs
        .iter()
        .map(|r| r.num.mul(&exact_div(&lcd, &r.den)))
        .collect();
    let mut monos: BTreeSet<Mono> = BTreeSet::new();
    for p in &scaled {
        monos.extend(p.0.keys().cloned());
    }
    let index: BTreeMap<&Mono, usize> =
        monos.iter().enumerate().map(|(i, m)| (m, i)).collect();
    scaled
        .iter()
        .map(|p| {
            let mut v = vec![Scalar::zero(); monos.len()];
            for (m, c) in &p.0 {
                v[index[m]] = c.clone();
            }
            v
        })
        .collect()
}

/// Monomial over a chosen symbol set: sorted (symbol, positive power) pairs.
/// Ordered graded-lexicographically (total degree, then earlier symbols
/// dominate).
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct MonomialKey(pub Vec<(Sym, u32)>);

impl MonomialKey {
    pub fn unit() -> MonomialKey {
        MonomialKey(Vec::new())
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|(_, k)| *k).sum()
    }
}

impl Ord for MonomialKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| {
                let (mut i, mut j) = (0, 0);
                loop {
                    match (self.0.get(i), other.0.get(j)) {
                        (None, None) => return Ordering::Equal,
                        (Some(_), None) => return Ordering::Greater,
                        (None, Some(_)) => return Ordering::Less,
                        (Some((sa, ea)), Some((sb, eb))) => match sa.cmp(sb) {
                            Ordering::Less => return Ordering::Greater,
                            Ordering::Greater => return Ordering::Less,
                            Ordering::Equal => match ea.cmp(eb) {
                                Ordering::Equal => {
                                    i += 1;
                                    j += 1;
                                }
                                ord => return ord,
                            },
                        },
                    }
                }
            })
    }
}

impl PartialOrd for MonomialKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Coefficients of an expression viewed as a polynomial in chosen symbols.
#[derive(Clone, Debug, Default)]
pub struct MonomialMap {
    pub entries: BTreeMap<MonomialKey, Expr>,
}

impl MonomialMap {
    pub fn get(&self, key: &MonomialKey) -> Option<&Expr> {
        self.entries.get(key)
    }

    pub fn constant_term(&self) -> Option<&Expr> {
        self.entries.get(&MonomialKey::unit())
    }
}

/// Failure of `collect_coefficients`: the expression is not polynomial in the
/// requested symbols.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("not polynomial in the target symbols: {0}")]
pub struct NotPolynomial(pub String);

/// View `e` as a polynomial in `vars` and return its coefficients, which are
/// normalized expressions free of `vars`. Errors if any target symbol occurs
/// in a denominator, under a fractional power, or inside a kernel/function
/// argument.
pub fn collect_coefficients(
    e: &Expr,
    vars: &BTreeSet<Sym>,
) -> Result<MonomialMap, NotPolynomial> {
    let rf = from_tree_reduced(e);
    for g in rf.den.gens() {
        if gen_involves(&g, vars) {
            return Err(NotPolynomial(
                "target symbol appears in a denominator".to_string(),
            ));
        }
    }
    let mut groups: BTreeMap<MonomialKey, Poly> = BTreeMap::new();
    for (m, c) in &rf.num.0 {
        let mut key: Vec<(Sym, u32)> = Vec::new();
        let mut rest: Vec<(Gen, Exp)> = Vec::new();
        for (g, x) in &m.0 {
            match g {
                Gen::Sym(s) if vars.contains(s) => {
                    if !x.is_integer() || !x.is_positive() {
                        return Err(NotPolynomial(format!(
                            "target symbol has non-integer power {}",
                            x
                        )));
                    }
                    key.push((s.clone(), *x.numer() as u32));
                }
                _ => {
                    if gen_involves(g, vars) {
                        return Err(NotPolynomial(
                            "target symbol appears inside a kernel or function argument"
                                .to_string(),
                        ));
                    }
                    rest.push((g.clone(), *x));
                }
            }
        }
        groups
            .entry(MonomialKey(key))
            .or_insert_with(Poly::zero)
            .add_term(Mono(rest), c.clone());
    }
    let entries = groups
        .into_iter()
        .filter(|(_, p)| !p.is_zero())
        .map(|(k, p)| {
            let coeff = RatFn { num: p, den: rf.den.clone() }.reduce_full();
            (k, to_expr(&coeff))
        })
        .collect();
    Ok(MonomialMap { entries })
}

fn gen_involves(g: &Gen, vars: &BTreeSet<Sym>) -> bool {
    match g {
        Gen::Sym(s) => vars.contains(s),
        _ => g.free_syms().iter().any(|s| vars.contains(s)),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{sc_frac, Bindings};
    use super::*;

    fn x() -> Expr {
        Expr::sym(Sym::Indep(0))
    }

    fn u() -> Expr {
        Expr::sym(Sym::Dep(0))
    }

    fn u_x() -> Expr {
        Expr::sym(Sym::Jet { dep: 0, idx: vec![1] })
    }

    #[test]
    fn normalize_cancels_common_factors() {
        // (x^2 - 1)/(x - 1) -> x + 1
        let e = Expr::div(
            Expr::sub(Expr::pow(x(), sc(2)), Expr::one()),
            Expr::sub(x(), Expr::one()),
        );
        assert_eq!(normalize(&e), Expr::add(vec![Expr::one(), x()]));
    }

    #[test]
    fn normalize_merges_exp_products() {
        let e = Expr::mul(vec![
            Expr::kernel(Kernel::Exp, x()),
            Expr::kernel(Kernel::Exp, Expr::neg(x())),
        ]);
        assert_eq!(normalize(&e), Expr::one());
        let e = Expr::mul(vec![
            Expr::kernel(Kernel::Exp, x()),
            Expr::kernel(Kernel::Exp, u()),
        ]);
        assert_eq!(
            normalize(&e),
            Expr::kernel(Kernel::Exp, Expr::add(vec![x(), u()]))
        );
    }

    #[test]
    fn normalize_is_idempotent_on_samples() {
        let samples = vec![
            Expr::div(Expr::sub(u(), Expr::mul(vec![x(), u_x()])), x()),
            Expr::pow(Expr::add(vec![Expr::one(), Expr::pow(u_x(), sc(2))]), sc_frac(-3, 2)),
            Expr::mul(vec![Expr::pow(x(), sc_frac(1, 2)), u(), Expr::int(3)]),
            Expr::sub(
                Expr::kernel(Kernel::Sin, x()),
                Expr::mul(vec![x(), Expr::kernel(Kernel::Cos, u())]),
            ),
            Expr::pow(Expr::int(2), sc_frac(1, 2)),
        ];
        for e in samples {
            let n1 = normalize(&e);
            let n2 = normalize(&n1);
            assert_eq!(n1, n2, "normalize not idempotent on {:?}", e);
        }
    }

    #[test]
    fn fractional_powers_use_positive_base_convention() {
        // (x^2)^(1/2) -> x under the positive-domain convention
        let e = Expr::pow(Expr::pow(x(), sc(2)), sc_frac(1, 2));
        assert_eq!(normalize(&e), x());
        // x^(1/2) * x^(1/2) -> x
        let h = Expr::pow(x(), sc_frac(1, 2));
        assert_eq!(normalize(&Expr::mul(vec![h.clone(), h])), x());
        // (1+x)^(1/2) squared -> 1 + x
        let s = Expr::pow(Expr::add(vec![Expr::one(), x()]), sc_frac(1, 2));
        assert_eq!(
            normalize(&Expr::mul(vec![s.clone(), s])),
            Expr::add(vec![Expr::one(), x()])
        );
    }

    #[test]
    fn surd_bases_are_scale_canonical() {
        // (2 + 2x)^(1/2) = sqrt(2) * (1 + x)^(1/2): same primitive base
        let a = Expr::pow(
            Expr::add(vec![Expr::int(2), Expr::mul(vec![Expr::int(2), x()])]),
            sc_frac(1, 2),
        );
        let b = Expr::mul(vec![
            Expr::pow(Expr::int(2), sc_frac(1, 2)),
            Expr::pow(Expr::add(vec![Expr::one(), x()]), sc_frac(1, 2)),
        ]);
        assert_eq!(normalize(&a), normalize(&b));
    }

    #[test]
    fn gcd_handles_shared_monomial_and_poly_factors() {
        // gcd((x^2 - 1)*x, (x + 1)*x^2) = x*(x+1)
        let a = from_tree_reduced(&Expr::mul(vec![
            Expr::sub(Expr::pow(x(), sc(2)), Expr::one()),
            x(),
        ]));
        let b = from_tree_reduced(&Expr::mul(vec![
            Expr::add(vec![x(), Expr::one()]),
            Expr::pow(x(), sc(2)),
        ]));
        let g = poly_gcd(&a.num, &b.num);
        let want = from_tree_reduced(&Expr::mul(vec![x(), Expr::add(vec![x(), Expr::one()])]));
        assert_eq!(g, want.num);
    }

    #[test]
    fn collect_expands_and_groups() {
        // (x + u)^2 over {u}: {1: x^2, u: 2x, u^2: 1}
        let e = Expr::pow(Expr::add(vec![x(), u()]), sc(2));
        let vars: BTreeSet<Sym> = [Sym::Dep(0)].into_iter().collect();
        let mm = collect_coefficients(&e, &vars).unwrap();
        assert_eq!(mm.entries.len(), 3);
        assert_eq!(
            mm.get(&MonomialKey(vec![(Sym::Dep(0), 1)])).unwrap(),
            &Expr::mul(vec![Expr::int(2), x()])
        );
        assert_eq!(
            mm.get(&MonomialKey(vec![(Sym::Dep(0), 2)])).unwrap(),
            &Expr::one()
        );
        assert_eq!(mm.constant_term().unwrap(), &Expr::pow(x(), sc(2)));
    }

    #[test]
    fn collect_rejects_non_polynomial_occurrences() {
        let vars: BTreeSet<Sym> = [Sym::Dep(0)].into_iter().collect();
        assert!(collect_coefficients(&Expr::div(Expr::one(), u()), &vars).is_err());
        assert!(collect_coefficients(&Expr::kernel(Kernel::Sin, u()), &vars).is_err());
        assert!(collect_coefficients(&Expr::pow(u(), sc_frac(1, 2)), &vars).is_err());
        // but x under a kernel is fine when collecting over u
        let e = Expr::mul(vec![Expr::kernel(Kernel::Sin, x()), u()]);
        assert!(collect_coefficients(&e, &vars).is_ok());
    }

    #[test]
    fn collect_roundtrip_rebuilds_expression() {
        let vars: BTreeSet<Sym> = [Sym::Dep(0), Sym::Indep(0)].into_iter().collect();
        let e = normalize(&Expr::add(vec![
            Expr::mul(vec![Expr::int(3), Expr::pow(x(), sc(2)), u()]),
            Expr::mul(vec![x(), u()]),
            Expr::int(7),
        ]));
        let mm = collect_coefficients(&e, &vars).unwrap();
        let rebuilt = Expr::add(
            mm.entries
                .iter()
                .map(|(k, coeff)| {
                    let mut fs = vec![coeff.clone()];
                    for (s, p) in &k.0 {
                        fs.push(Expr::pow(Expr::sym(s.clone()), sc(*p as i64)));
                    }
                    Expr::mul(fs)
                })
                .collect(),
        );
        assert_eq!(normalize(&rebuilt), e);
    }

    #[test]
    fn substitution_feeds_normal_form() {
        // ((x+1)^2 - (x-1)^2) / 4 -> x
        let p = Expr::pow(Expr::add(vec![x(), Expr::one()]), sc(2));
        let q = Expr::pow(Expr::sub(x(), Expr::one()), sc(2));
        let e = Expr::div(Expr::sub(p, q), Expr::int(4));
        assert_eq!(normalize(&e), x());
        // substitute x -> u/2 into 2x and normalize
        let b = Bindings::of_syms(vec![(Sym::Indep(0), Expr::div(u(), Expr::int(2)))]);
        let got = super::super::substitute(&Expr::mul(vec![Expr::int(2), x()]), &b).unwrap();
        assert_eq!(got, u());
    }
}

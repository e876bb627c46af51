//! Point vector fields, prolongation to jet space, Lie brackets, coordinate
//! changes, and flow series.
//!
//! Prolongation is implemented three independent ways — the coefficient
//! recursion, the direct term-by-term formula, and the characteristic form —
//! and [`prolong_verified`] cross-checks all of them coordinate by
//! coordinate.

use std::collections::BTreeMap;

use crate::expr::{
    differentiate, equivalent, normalize, substitute, Bindings, Expr, Scalar, Sym, Undecided,
};
use crate::jet::{
    differential_order, jet_sym, multi_indices, total_derivative, total_derivative_multi, JetSpace,
};

/// A point vector field `sum xi_i d/dx_i + sum phi_a d/du_a` with
/// coefficients depending on base variables only.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub p: u8,
    pub q: u8,
    pub xi: Vec<Expr>,
    pub phi: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FieldError {
    #[error("vector field has {got} coefficients; expected {want}")]
    SlotCount { want: usize, got: usize },
    #[error("point vector field coefficient {slot} contains a derivative coordinate")]
    JetCoefficient { slot: usize },
}

impl VectorField {
    pub fn new(p: u8, q: u8, xi: Vec<Expr>, phi: Vec<Expr>) -> Result<VectorField, FieldError> {
        assert!(p >= 1 && q >= 1, "need at least one variable of each kind");
        if xi.len() != p as usize || phi.len() != q as usize {
            return Err(FieldError::SlotCount {
                want: (p + q) as usize,
                got: xi.len() + phi.len(),
            });
        }
        for (slot, c) in xi.iter().chain(phi.iter()).enumerate() {
            if c.free_syms().iter().any(|s| matches!(s, Sym::Jet { .. })) {
                return Err(FieldError::JetCoefficient { slot });
            }
        }
        Ok(VectorField { p, q, xi, phi })
    }

    /// Build from a flat coefficient vector, independent slots first.
    pub fn from_slots(p: u8, q: u8, slots: Vec<Expr>) -> Result<VectorField, FieldError> {
        if slots.len() != (p + q) as usize {
            return Err(FieldError::SlotCount { want: (p + q) as usize, got: slots.len() });
        }
        let mut it = slots.into_iter();
        let xi: Vec<Expr> = (&mut it).take(p as usize).collect();
        let phi: Vec<Expr> = it.collect();
        VectorField::new(p, q, xi, phi)
    }

    pub fn zero(p: u8, q: u8) -> VectorField {
        VectorField {
            p,
            q,
            xi: vec![Expr::zero(); p as usize],
            phi: vec![Expr::zero(); q as usize],
        }
    }

    /// Flat coefficient vector, independent slots first.
    pub fn slots(&self) -> Vec<Expr> {
        self.xi.iter().chain(self.phi.iter()).cloned().collect()
    }

    pub fn is_zero(&self) -> bool {
        self.slots().iter().all(|c| normalize(c).is_zero())
    }

    /// Coefficient of the base coordinate `s`.
    pub fn slot(&self, s: &Sym) -> Option<&Expr> {
        match s {
            Sym::Indep(i) => self.xi.get(*i as usize),
            Sym::Dep(a) => self.phi.get(*a as usize),
            _ => None,
        }
    }

    /// Apply to a function of the base variables (first-order action).
    pub fn apply_base(&self, e: &Expr) -> Expr {
        let mut terms = Vec::new();
        for (i, xi) in self.xi.iter().enumerate() {
            terms.push(Expr::mul(vec![xi.clone(), differentiate(e, &Sym::Indep(i as u8))]));
        }
        for (a, phi) in self.phi.iter().enumerate() {
            terms.push(Expr::mul(vec![phi.clone(), differentiate(e, &Sym::Dep(a as u8))]));
        }
        Expr::add(terms)
    }

    pub fn scale(&self, c: &Scalar) -> VectorField {
        let f = Expr::num(c.clone());
        VectorField {
            p: self.p,
            q: self.q,
            xi: self.xi.iter().map(|e| Expr::mul(vec![f.clone(), e.clone()])).collect(),
            phi: self.phi.iter().map(|e| Expr::mul(vec![f.clone(), e.clone()])).collect(),
        }
    }

    pub fn add(&self, w: &VectorField) -> VectorField {
        assert!(self.p == w.p && self.q == w.q);
        VectorField {
            p: self.p,
            q: self.q,
            xi: self
                .xi
                .iter()
                .zip(&w.xi)
                .map(|(a, b)| Expr::add(vec![a.clone(), b.clone()]))
                .collect(),
            phi: self
                .phi
                .iter()
                .zip(&w.phi)
                .map(|(a, b)| Expr::add(vec![a.clone(), b.clone()]))
                .collect(),
        }
    }

    /// Characteristic `Q_a = phi_a - sum_i xi_i u_{a,i}`, normalized.
    pub fn characteristic(&self) -> Vec<Expr> {
        (0..self.q)
            .map(|a| {
                let mut terms = vec![self.phi[a as usize].clone()];
                for i in 0..self.p {
                    let first = jet_sym(a, unit_index(self.p, i));
                    terms.push(Expr::neg(Expr::mul(vec![
                        self.xi[i as usize].clone(),
                        Expr::sym(first),
                    ])));
                }
                normalize(&Expr::add(terms))
            })
            .collect()
    }
}

/// Lie bracket `[v, w]` of point fields (again a point field).
pub fn bracket(v: &VectorField, w: &VectorField) -> VectorField {
    assert!(v.p == w.p && v.q == w.q, "bracket of fields on different spaces");
    let comm = |a: &Expr, b: &Expr| Expr::sub(v.apply_base(b), w.apply_base(a));
    VectorField {
        p: v.p,
        q: v.q,
        xi: v.xi.iter().zip(&w.xi).map(|(a, b)| normalize(&comm(a, b))).collect(),
        phi: v.phi.iter().zip(&w.phi).map(|(a, b)| normalize(&comm(a, b))).collect(),
    }
}

fn unit_index(p: u8, i: u8) -> Vec<u8> {
    let mut idx = vec![0u8; p as usize];
    idx[i as usize] = 1;
    idx
}

/// A vector field prolonged to jet space: one coefficient per jet-space
/// coordinate.
#[derive(Clone, Debug)]
pub struct ProlongedField {
    pub space: JetSpace,
    pub field: VectorField,
    pub coeffs: BTreeMap<Sym, Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApplyError {
    #[error("expression has differential order {needed}; field is prolonged to order {have}")]
    OrderMismatch { needed: u32, have: u32 },
}

impl ProlongedField {
    pub fn coeff(&self, s: &Sym) -> Expr {
        self.coeffs.get(s).cloned().unwrap_or_else(Expr::zero)
    }

    /// Apply the prolonged field to a function on jet space.
    pub fn apply(&self, e: &Expr) -> Result<Expr, ApplyError> {
        let needed = differential_order(e);
        if needed > self.space.n {
            return Err(ApplyError::OrderMismatch { needed, have: self.space.n });
        }
        let mut terms = Vec::new();
        for (s, c) in &self.coeffs {
            if c.is_zero() {
                continue;
            }
            terms.push(Expr::mul(vec![c.clone(), differentiate(e, s)]));
        }
        Ok(Expr::add(terms))
    }
}

/// Prolong by the coefficient recursion
/// `phi^{J+e_i} = D_i phi^J - sum_k (D_i xi_k) u_{a, J+e_k}`,
/// taking the first nonzero slot of each multi-index as its parent.
pub fn prolong(v: &VectorField, n: u32) -> ProlongedField {
    let space = JetSpace::new(v.p, v.q, n);
    let mut coeffs = base_coeffs(v);
    for a in 0..v.q {
        for order in 1..=n {
            for idx in multi_indices(v.p, order) {
                let i = idx.iter().position(|&k| k > 0).unwrap() as u8;
                let mut parent = idx.clone();
                parent[i as usize] -= 1;
                let parent_sym = jet_sym(a, parent.clone());
                let parent_coeff = coeffs.get(&parent_sym).unwrap().clone();
                let mut terms = vec![total_derivative(&space, &parent_coeff, i)];
                for k in 0..v.p {
                    let mut bumped = parent.clone();
                    bumped[k as usize] += 1;
                    terms.push(Expr::neg(Expr::mul(vec![
                        total_derivative(&space, &v.xi[k as usize], i),
                        Expr::sym(jet_sym(a, bumped)),
                    ])));
                }
                coeffs.insert(jet_sym(a, idx), normalize(&Expr::add(terms)));
            }
        }
    }
    ProlongedField { space, field: v.clone(), coeffs }
}

/// Prolong by the direct formula, distributing `D_J` over the terms of
/// `phi_a - sum_i xi_i u_{a,i}` one by one:
/// `phi^J = sum_term D_J(term) + sum_i xi_i u_{a, J+e_i}`.
pub fn prolong_direct(v: &VectorField, n: u32) -> ProlongedField {
    let space = JetSpace::new(v.p, v.q, n);
    let mut coeffs = base_coeffs(v);
    for a in 0..v.q {
        // characteristic as a list of unexpanded terms
        let mut q_terms = vec![v.phi[a as usize].clone()];
        for i in 0..v.p {
            q_terms.push(Expr::neg(Expr::mul(vec![
                v.xi[i as usize].clone(),
                Expr::sym(jet_sym(a, unit_index(v.p, i))),
            ])));
        }
        for order in 1..=n {
            for idx in multi_indices(v.p, order) {
                let mut terms: Vec<Expr> = q_terms
                    .iter()
                    .map(|t| total_derivative_multi(&space, t, &idx))
                    .collect();
                for i in 0..v.p {
                    let mut bumped = idx.clone();
                    bumped[i as usize] += 1;
                    terms.push(Expr::mul(vec![
                        v.xi[i as usize].clone(),
                        Expr::sym(jet_sym(a, bumped)),
                    ]));
                }
                coeffs.insert(jet_sym(a, idx), normalize(&Expr::add(terms)));
            }
        }
    }
    ProlongedField { space, field: v.clone(), coeffs }
}

/// Prolong via the characteristic: normalize
/// `Q_a = phi_a - sum_i xi_i u_{a,i}` once, then
/// `phi^J = D_J Q_a + sum_i xi_i u_{a, J+e_i}`.
pub fn prolong_characteristic(v: &VectorField, n: u32) -> ProlongedField {
    let space = JetSpace::new(v.p, v.q, n);
    let mut coeffs = base_coeffs(v);
    let q = v.characteristic();
    for a in 0..v.q {
        for order in 1..=n {
            for idx in multi_indices(v.p, order) {
                let mut terms = vec![total_derivative_multi(&space, &q[a as usize], &idx)];
                for i in 0..v.p {
                    let mut bumped = idx.clone();
                    bumped[i as usize] += 1;
                    terms.push(Expr::mul(vec![
                        v.xi[i as usize].clone(),
                        Expr::sym(jet_sym(a, bumped)),
                    ]));
                }
                coeffs.insert(jet_sym(a, idx), normalize(&Expr::add(terms)));
            }
        }
    }
    ProlongedField { space, field: v.clone(), coeffs }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ProlongError {
    #[error("prolongation routes disagree at a jet coordinate ({route})")]
    RouteMismatch { coord: Sym, recursion: Expr, other: Expr, route: &'static str },
    #[error("prolongation route comparison was undecided")]
    Undecided { coord: Sym, detail: String },
}

/// Prolong by all three routes and confirm they agree at every coordinate.
pub fn prolong_verified(v: &VectorField, n: u32) -> Result<ProlongedField, ProlongError> {
    let rec = prolong(v, n);
    let dir = prolong_direct(v, n);
    let chr = prolong_characteristic(v, n);
    for (coord, c_rec) in &rec.coeffs {
        for (other, route) in [(&dir, "direct"), (&chr, "characteristic")] {
            let c_other = other.coeff(coord);
            match equivalent(c_rec, &c_other) {
                Ok(true) => {}
                Ok(false) => {
                    return Err(ProlongError::RouteMismatch {
                        coord: coord.clone(),
                        recursion: c_rec.clone(),
                        other: c_other,
                        route,
                    })
                }
                Err(Undecided(detail)) => {
                    return Err(ProlongError::Undecided { coord: coord.clone(), detail })
                }
            }
        }
    }
    Ok(rec)
}

fn base_coeffs(v: &VectorField) -> BTreeMap<Sym, Expr> {
    let mut coeffs = BTreeMap::new();
    for (i, xi) in v.xi.iter().enumerate() {
        coeffs.insert(Sym::Indep(i as u8), normalize(xi));
    }
    for (a, phi) in v.phi.iter().enumerate() {
        coeffs.insert(Sym::Dep(a as u8), normalize(phi));
    }
    coeffs
}

// ---------------------------------------------------------------------------
// coordinate changes

#[derive(Debug, Clone, thiserror::Error)]
pub enum PushforwardError {
    #[error("coordinate change has {got} components; expected {want}")]
    SlotCount { want: usize, got: usize },
    #[error("maps are not mutually inverse (component {slot})")]
    NotInverse { slot: usize, residual: Expr },
    #[error("inverse verification was undecided (component {slot})")]
    Undecided { slot: usize, detail: String },
}

/// Push a point field through the coordinate change `new_j = forward_j(old)`
/// with inverse `old_i = inverse_i(new)`; both maps are written in the same
/// symbols, slot `i` describing coordinate `i`. The maps are verified to be
/// mutually inverse before use.
pub fn pushforward(
    v: &VectorField,
    forward: &[Expr],
    inverse: &[Expr],
) -> Result<VectorField, PushforwardError> {
    let nslots = (v.p + v.q) as usize;
    if forward.len() != nslots || inverse.len() != nslots {
        return Err(PushforwardError::SlotCount {
            want: nslots,
            got: forward.len().max(inverse.len()),
        });
    }
    let base_sym = |k: usize| -> Sym {
        if k < v.p as usize {
            Sym::Indep(k as u8)
        } else {
            Sym::Dep((k - v.p as usize) as u8)
        }
    };
    // F(G(new)) must reproduce each new coordinate
    let to_new = Bindings::of_syms((0..nslots).map(|k| (base_sym(k), inverse[k].clone())));
    for j in 0..nslots {
        let composed = substitute(&forward[j], &to_new).expect("symbol-only substitution");
        let residual = Expr::sub(composed, Expr::sym(base_sym(j)));
        match equivalent(&residual, &Expr::zero()) {
            Ok(true) => {}
            Ok(false) => {
                return Err(PushforwardError::NotInverse { slot: j, residual: normalize(&residual) })
            }
            Err(Undecided(detail)) => {
                return Err(PushforwardError::Undecided { slot: j, detail })
            }
        }
    }
    // (v . F_j) written in the new coordinates
    let mut slots = Vec::with_capacity(nslots);
    for j in 0..nslots {
        let action = v.apply_base(&forward[j]);
        let moved = substitute(&action, &to_new).expect("symbol-only substitution");
        slots.push(normalize(&moved));
    }
    Ok(VectorField::from_slots(v.p, v.q, slots).expect("pushforward coefficients are jet-free"))
}

/// Residuals of a rectification candidate: coordinates `(r, s)` rectify `v`
/// when `v(r) = 0` and `v(s) = 1`.
#[derive(Clone, Debug)]
pub struct RectifyReport {
    pub invariant_ok: bool,
    pub canonical_ok: bool,
    pub residual_invariant: Expr,
    pub residual_canonical: Expr,
}

impl RectifyReport {
    pub fn rectifies(&self) -> bool {
        self.invariant_ok && self.canonical_ok
    }
}

pub fn rectify_check(
    v: &VectorField,
    invariant: &Expr,
    canonical: &Expr,
) -> Result<RectifyReport, Undecided> {
    let vr = normalize(&v.apply_base(invariant));
    let vs = normalize(&v.apply_base(canonical));
    let invariant_ok = equivalent(&vr, &Expr::zero())?;
    let canonical_ok = equivalent(&vs, &Expr::one())?;
    Ok(RectifyReport {
        invariant_ok,
        canonical_ok,
        residual_invariant: vr,
        residual_canonical: Expr::sub(vs, Expr::one()),
    })
}

/// Truncated flow `sum_{k<=order} eps^k/k! v^k(f)` of `f` along `v`, with
/// `eps` the given flow-time symbol (must not occur in `v` or `f`).
pub fn flow_series(v: &VectorField, f: &Expr, order: u32, eps: &Sym) -> Expr {
    let mut terms = vec![f.clone()];
    let mut current = f.clone();
    let mut factorial = Scalar::from_integer(1.into());
    for k in 1..=order {
        current = v.apply_base(&current);
        factorial *= Scalar::from_integer(k.into());
        terms.push(Expr::mul(vec![
            Expr::num(factorial.recip()),
            Expr::pow(Expr::sym(eps.clone()), Scalar::from_integer(k.into())),
            current.clone(),
        ]));
    }
    normalize(&Expr::add(terms))
}

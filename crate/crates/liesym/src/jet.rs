//! Jet space bookkeeping: coordinate enumeration, total derivatives, and
//! seeded generic evaluation points.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::expr::{differentiate, sc_frac, Expr, Scalar, Sym};

/// The n-th order jet space over p independent and q dependent variables.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct JetSpace {
    pub p: u8,
    pub q: u8,
    pub n: u32,
}

impl JetSpace {
    pub fn new(p: u8, q: u8, n: u32) -> JetSpace {
        assert!(p >= 1 && q >= 1, "jet space needs at least one variable of each kind");
        JetSpace { p, q, n }
    }

    /// With the order raised to at least `n`.
    pub fn extended(&self, n: u32) -> JetSpace {
        JetSpace { p: self.p, q: self.q, n: self.n.max(n) }
    }

    /// Total dimension `p + q * C(p + n, n)`.
    pub fn dimension(&self) -> u64 {
        jet_dimension(self.p, self.q, self.n)
    }

    /// All coordinates in canonical order: independents, then per dependent
    /// variable its jets graded by total order (derivatives on earlier
    /// variables first within an order).
    pub fn coords(&self) -> Vec<Sym> {
        let mut out: Vec<Sym> = (0..self.p).map(Sym::Indep).collect();
        for dep in 0..self.q {
            out.push(Sym::Dep(dep));
            for k in 1..=self.n {
                for idx in multi_indices(self.p, k) {
                    out.push(Sym::Jet { dep, idx });
                }
            }
        }
        out
    }

    /// Derivative coordinates only (order >= 1), canonical order.
    pub fn jet_syms(&self) -> Vec<Sym> {
        self.coords()
            .into_iter()
            .filter(|s| matches!(s, Sym::Jet { .. }))
            .collect()
    }
}

/// `p + q * C(p + n, n)`.
pub fn jet_dimension(p: u8, q: u8, n: u32) -> u64 {
    p as u64 + q as u64 * binomial(p as u64 + n as u64, n as u64)
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Multi-indices of length `p` with total order exactly `k`, in canonical
/// order (weight on earlier variables first: [2,0], [1,1], [0,2]).
pub fn multi_indices(p: u8, k: u32) -> Vec<Vec<u8>> {
    fn rec(p: usize, k: u32, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if p == 1 {
            let mut idx = prefix.clone();
            idx.push(k as u8);
            out.push(idx);
            return;
        }
        for j in (0..=k).rev() {
            prefix.push(j as u8);
            rec(p - 1, k - j, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(p as usize, k, &mut Vec::new(), &mut out);
    out
}

/// Jet symbol constructor collapsing the order-0 jet to the base variable.
pub fn jet_sym(dep: u8, idx: Vec<u8>) -> Sym {
    if idx.iter().all(|&k| k == 0) {
        Sym::Dep(dep)
    } else {
        Sym::Jet { dep, idx }
    }
}

/// The jet obtained by one more derivative in direction `i`.
pub fn raise(s: &Sym, i: u8, p: u8) -> Sym {
    match s {
        Sym::Dep(dep) => {
            let mut idx = vec![0u8; p as usize];
            idx[i as usize] = 1;
            Sym::Jet { dep: *dep, idx }
        }
        Sym::Jet { dep, idx } => {
            let mut idx = idx.clone();
            idx[i as usize] += 1;
            Sym::Jet { dep: *dep, idx }
        }
        _ => panic!("raise applies to dependent/jet symbols"),
    }
}

/// Highest derivative order appearing in `e` (0 for jet-free expressions).
pub fn differential_order(e: &Expr) -> u32 {
    e.free_syms().iter().map(|s| s.jet_order()).max().unwrap_or(0)
}

/// Total derivative `D_i e` in the direction of the i-th independent
/// variable: the chain rule through every dependent/jet symbol present,
/// raising each by one derivative. Jet coordinates of order `n+1` appear as
/// needed; callers track the order extension.
pub fn total_derivative(space: &JetSpace, e: &Expr, i: u8) -> Expr {
    assert!(i < space.p, "direction out of range");
    let mut terms = vec![differentiate(e, &Sym::Indep(i))];
    for s in e.free_syms() {
        match s {
            Sym::Dep(_) | Sym::Jet { .. } => {
                let de = differentiate(e, &s);
                if de.is_zero() {
                    continue;
                }
                terms.push(Expr::mul(vec![Expr::sym(raise(&s, i, space.p)), de]));
            }
            _ => {}
        }
    }
    Expr::add(terms)
}

/// Apply `D^J = D_1^{j_1} .. D_p^{j_p}` (directions commute).
pub fn total_derivative_multi(space: &JetSpace, e: &Expr, idx: &[u8]) -> Expr {
    let mut acc = e.clone();
    for (i, &cnt) in idx.iter().enumerate() {
        for _ in 0..cnt {
            acc = total_derivative(space, &acc, i as u8);
        }
    }
    acc
}

/// Seeded generic point: every coordinate of the space receives a random
/// rational k/d with k in 1..=97 and d in {1,2,3}. Deterministic per seed.
pub fn generic_point(space: &JetSpace, seed: u64) -> BTreeMap<Sym, Scalar> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BTreeMap::new();
    for s in space.coords() {
        let k: i64 = rng.gen_range(1..=97);
        let d: i64 = rng.gen_range(1..=3);
        out.insert(s, sc_frac(k, d));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{equivalent, sc, FuncSym};

    fn x() -> Expr {
        Expr::sym(Sym::Indep(0))
    }

    fn u() -> Expr {
        Expr::sym(Sym::Dep(0))
    }

    fn u_j(idx: &[u8]) -> Expr {
        Expr::sym(Sym::Jet { dep: 0, idx: idx.to_vec() })
    }

    #[test]
    fn dimension_formula() {
        assert_eq!(jet_dimension(1, 1, 2), 4);
        assert_eq!(jet_dimension(2, 1, 1), 5);
        assert_eq!(jet_dimension(2, 1, 2), 8);
        assert_eq!(jet_dimension(1, 2, 3), 9);
    }

    #[test]
    fn coords_match_dimension_and_order() {
        let space = JetSpace::new(2, 1, 2);
        let coords = space.coords();
        assert_eq!(coords.len() as u64, space.dimension());
        // canonical order: x, y, u, u_x, u_y, u_xx, u_xy, u_yy
        assert_eq!(coords[3], Sym::Jet { dep: 0, idx: vec![1, 0] });
        assert_eq!(coords[4], Sym::Jet { dep: 0, idx: vec![0, 1] });
        assert_eq!(coords[5], Sym::Jet { dep: 0, idx: vec![2, 0] });
        assert_eq!(coords[6], Sym::Jet { dep: 0, idx: vec![1, 1] });
        assert_eq!(coords[7], Sym::Jet { dep: 0, idx: vec![0, 2] });
        // a sorted copy is unchanged (matches the symbol order)
        let mut sorted = coords.clone();
        sorted.sort();
        assert_eq!(coords, sorted);
    }

    #[test]
    fn total_derivative_basics() {
        let space = JetSpace::new(1, 1, 2);
        assert_eq!(total_derivative(&space, &u(), 0), u_j(&[1]));
        // D_x(x*u) = u + x*u_x
        let got = total_derivative(&space, &Expr::mul(vec![x(), u()]), 0);
        let want = Expr::add(vec![u(), Expr::mul(vec![x(), u_j(&[1])])]);
        assert_eq!(equivalent(&got, &want), Ok(true));
        // D_x(u_x^2) = 2 u_x u_xx
        let got = total_derivative(&space, &Expr::pow(u_j(&[1]), sc(2)), 0);
        let want = Expr::mul(vec![Expr::int(2), u_j(&[1]), u_j(&[2])]);
        assert_eq!(equivalent(&got, &want), Ok(true));
    }

    #[test]
    fn total_derivatives_commute() {
        let space = JetSpace::new(2, 1, 3);
        let y = Expr::sym(Sym::Indep(1));
        let e = Expr::add(vec![
            Expr::mul(vec![x(), Expr::pow(u_j(&[1, 0]), sc(2))]),
            Expr::mul(vec![y, u()]),
        ]);
        let dxy = total_derivative(&space, &total_derivative(&space, &e, 0), 1);
        let dyx = total_derivative(&space, &total_derivative(&space, &e, 1), 0);
        assert_eq!(equivalent(&dxy, &dyx), Ok(true));
    }

    #[test]
    fn total_derivative_chains_through_function_symbols() {
        // D_x xi(x, u) = xi_x + u_x * xi_u
        let space = JetSpace::new(1, 1, 1);
        let xi = Expr::func(FuncSym::new("xi", vec![x(), u()]));
        let got = total_derivative(&space, &xi, 0);
        let mut dx = FuncSym::new("xi", vec![x(), u()]);
        dx.deriv = vec![1, 0];
        let mut du = FuncSym::new("xi", vec![x(), u()]);
        du.deriv = vec![0, 1];
        let want = Expr::add(vec![
            Expr::func(dx),
            Expr::mul(vec![u_j(&[1]), Expr::func(du)]),
        ]);
        assert_eq!(equivalent(&got, &want), Ok(true));
    }

    #[test]
    fn generic_point_is_deterministic_and_in_range() {
        let space = JetSpace::new(2, 1, 2);
        let a = generic_point(&space, 42);
        let b = generic_point(&space, 42);
        assert_eq!(a, b);
        let c = generic_point(&space, 43);
        assert_ne!(a, c);
        for v in a.values() {
            assert!(v > &sc(0) && v <= &sc(97));
        }
    }

    #[test]
    fn differential_order_examples() {
        assert_eq!(differential_order(&x()), 0);
        assert_eq!(differential_order(&u()), 0);
        assert_eq!(differential_order(&u_j(&[2])), 2);
        let e = Expr::add(vec![u_j(&[1]), Expr::mul(vec![x(), u_j(&[3])])]);
        assert_eq!(differential_order(&e), 3);
    }
}

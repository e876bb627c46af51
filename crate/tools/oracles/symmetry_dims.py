#!/usr/bin/env python3
"""Independent cross-check of symmetry-basis dimensions, using sympy.

Recomputes, with a self-contained jet-space prolongation routine built on
sympy, the dimension of the space of Lie point symmetry generators that fit
a given polynomial ansatz, for the sample problems used by the Rust test
suite. Expected values frozen into the Rust tests cite this script.

Run: python3 tools/oracles/symmetry_dims.py
"""

import itertools

import sympy as sp


def multi_indices(p, n):
    """All derivative multi-indices (count vectors) of order 1..n."""
    out = []
    for total in range(1, n + 1):
        for combo in itertools.combinations_with_replacement(range(p), total):
            idx = [0] * p
            for i in combo:
                idx[i] += 1
            out.append(tuple(idx))
    return out


class Jet:
    """Jet coordinates for one dependent variable over p independents."""

    def __init__(self, xnames, uname="u", maxorder=4):
        self.p = len(xnames)
        self.xs = [sp.Symbol(n) for n in xnames]
        self.u = sp.Symbol(uname)
        self.maxorder = maxorder
        self.jets = {}
        for idx in multi_indices(self.p, maxorder):
            name = uname + "_" + "".join(
                xnames[i] * idx[i] for i in range(self.p)
            )
            self.jets[idx] = sp.Symbol(name)

    def var(self, idx):
        idx = tuple(idx)
        return self.u if sum(idx) == 0 else self.jets[idx]

    def bump(self, idx, i):
        out = list(idx)
        out[i] += 1
        return tuple(out)

    def total_d(self, f, i):
        out = sp.diff(f, self.xs[i])
        out += self.var(self.bump((0,) * self.p, i)) * sp.diff(f, self.u)
        for idx, s in self.jets.items():
            if sum(idx) >= self.maxorder:
                continue
            out += self.var(self.bump(idx, i)) * sp.diff(f, s)
        return out


def prolong_coeffs(jet, xi, phi, n):
    """Coefficients phi^J, 1 <= #J <= n, via the standard recursion."""
    coeffs = {(0,) * jet.p: phi}
    for order in range(1, n + 1):
        for idx in multi_indices(jet.p, order):
            if sum(idx) != order or idx in coeffs:
                continue
            i = next(k for k in range(jet.p) if idx[k] > 0)
            below = list(idx)
            below[i] -= 1
            below = tuple(below)
            val = jet.total_d(coeffs[below], i)
            for k in range(jet.p):
                val -= jet.total_d(xi[k], i) * jet.var(jet.bump(below, k))
            coeffs[idx] = sp.expand(val)
    return coeffs


COUNTER = itertools.count()


def fresh():
    return sp.Symbol("c%d" % next(COUNTER))


def poly_basis(vars_, d):
    basis = []
    for total in range(d + 1):
        for combo in itertools.combinations_with_replacement(
            range(len(vars_)), total
        ):
            m = sp.Integer(1)
            for i in combo:
                m *= vars_[i]
            basis.append(m)
    return basis


def generic_poly(d):
    def build(xs, u):
        cs = []
        basis = poly_basis(list(xs) + [u], d)

        def slot():
            coefs = [fresh() for _ in basis]
            cs.extend(coefs)
            return sum(a * m for a, m in zip(coefs, basis))

        xi = [slot() for _ in xs]
        phi = slot()
        return xi, phi, cs

    return build


def quasilinear(d):
    def build(xs, u):
        cs = []
        basis = poly_basis(xs, d)

        def slot():
            coefs = [fresh() for _ in basis]
            cs.extend(coefs)
            return sum(a * m for a, m in zip(coefs, basis))

        xi = [slot() for _ in xs]
        phi = slot() * u + slot()
        return xi, phi, cs

    return build


def symmetry_dimension(xnames, make_eq, lead_idx, ansatz, order=2, uname="u"):
    jet = Jet(xnames, uname=uname, maxorder=order + 2)
    E = make_eq(jet)
    xi, phi, cs = ansatz(jet.xs, jet.u)
    coeffs = prolong_coeffs(jet, xi, phi, order)
    R = phi * sp.diff(E, jet.u)
    for i in range(jet.p):
        R += xi[i] * sp.diff(E, jet.xs[i])
    for idx, c in coeffs.items():
        if 0 < sum(idx) <= order:
            R += c * sp.diff(E, jet.var(idx))
    lead = jet.var(lead_idx)
    sol = sp.solve(sp.Eq(E, 0), lead)
    assert len(sol) == 1, sol
    R = R.subs(lead, sol[0])
    num, _den = sp.fraction(sp.together(sp.expand(R)))
    gens = list(jet.xs) + [jet.u] + list(jet.jets.values())
    poly = sp.Poly(sp.expand(num), *gens)
    rows = []
    for coeff in poly.coeffs():
        row = [sp.diff(coeff, c) for c in cs]
        linear = sum(r * c for r, c in zip(row, cs))
        assert sp.expand(coeff - linear) == 0, "residual not linear in unknowns"
        rows.append(row)
    return len(cs) - sp.Matrix(rows).rank()


def superposition_dimension(xnames, make_eq, lead_idx, d):
    """Dimension of rho(x)*d/du solutions with rho polynomial, deg <= d."""
    jet = Jet(xnames, maxorder=4)
    E = make_eq(jet)
    basis = poly_basis(jet.xs, d)
    coefs = [fresh() for _ in basis]
    rho = sum(a * m for a, m in zip(coefs, basis))
    subs = {jet.u: rho}
    for idx, s in jet.jets.items():
        g = rho
        for i, k in enumerate(idx):
            g = sp.diff(g, jet.xs[i], k)
        subs[s] = g
    resid = sp.expand(E.subs(subs, simultaneous=True))
    num, _ = sp.fraction(sp.together(resid))
    poly = sp.Poly(sp.expand(num), *jet.xs)
    rows = [[sp.diff(c, a) for a in coefs] for c in poly.coeffs()]
    return len(coefs) - sp.Matrix(rows).rank()


def euclidean_rank_counts():
    """Independent-invariant counts for translations + rotation in the plane."""
    import random

    random.seed(7)
    jet = Jet(["x"], uname="y", maxorder=5)
    y = jet.u
    fields = [
        ([sp.Integer(1)], sp.Integer(0)),
        ([sp.Integer(0)], sp.Integer(1)),
        ([-y], jet.xs[0]),
    ]
    counts = []
    for n in range(4):
        rows = []
        for xi, phi in fields:
            coeffs = prolong_coeffs(jet, xi, phi, n)
            row = [xi[0]] + [coeffs[(k,)] for k in range(n + 1)]
            rows.append(row)
        point = {}
        for s in [jet.xs[0], jet.u] + list(jet.jets.values()):
            point[s] = sp.Rational(random.randint(1, 97), random.choice([1, 2, 3]))
        M = sp.Matrix([[e.subs(point) for e in row] for row in rows])
        dim = 1 + (n + 1)
        counts.append(dim - M.rank())
    return counts


def main():
    heat = lambda j: j.var((1, 0)) - j.var((0, 2))
    drift = lambda j: j.var((1, 0)) - j.xs[1] * j.var((0, 2)) - 5 * j.var((0, 1))
    free = lambda j: j.var((2,))
    emden = lambda j: j.var((2,)) - j.u**2 / j.xs[0] ** 5

    print("heat quasilinear(2):",
          symmetry_dimension(["t", "x"], heat, (0, 2), quasilinear(2)))
    print("heat superposition deg<=2:",
          superposition_dimension(["t", "x"], heat, (0, 2), 2))
    print("drift b=5 quasilinear(2):",
          symmetry_dimension(["t", "x"], drift, (0, 2), quasilinear(2)))
    print("drift b=5 superposition deg<=2:",
          superposition_dimension(["t", "x"], drift, (0, 2), 2))
    print("free particle generic-poly(2):",
          symmetry_dimension(["x"], free, (2,), generic_poly(2), uname="y"))
    print("emden-fowler generic-poly(2):",
          symmetry_dimension(["x"], emden, (2,), generic_poly(2), uname="y"))
    print("euclidean algebra invariant counts n=0..3:", euclidean_rank_counts())


if __name__ == "__main__":
    main()

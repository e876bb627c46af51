//! Finite-dimensional Lie algebra structure of a family of vector fields:
//! structure constants, commutator tables, derived series, center,
//! normalizers, adjoint flows, and the classification of two-dimensional
//! algebras.

use std::collections::BTreeMap;

use num::traits::{One, Signed, Zero};

use crate::expr::{
    coordinates_over_common_den, equivalent, evaluate_numeric, normalize, Expr, Scalar, Sym,
    Undecided,
};
use crate::jet::{generic_point, JetSpace};
use crate::linsolve::{rank_numeric, solve_in_span, DependentBasis, LinearSystem};
use crate::vfield::{bracket, VectorField};

#[derive(Debug, Clone, thiserror::Error)]
pub enum AlgebraError {
    #[error("basis fields are linearly dependent")]
    Dependent,
    #[error("bracket [{i}, {j}] lies outside the span of the basis")]
    NotClosed { i: usize, j: usize, bracket: Box<VectorField> },
    #[error("the selected fields do not form a subalgebra ([{i}, {j}] escapes)")]
    NotSubalgebra { i: usize, j: usize },
    #[error("structure constants are not antisymmetric at ({i}, {j})")]
    NotAntisymmetric { i: usize, j: usize },
    #[error("Jacobi identity fails on basis triple ({i}, {j}, {k})")]
    JacobiFails { i: usize, j: usize, k: usize },
    #[error("adjoint matrix is not nilpotent; only the numeric flow applies")]
    NotNilpotent,
    #[error("need exactly two independent fields, got rank {rank}")]
    NotTwoDimensional { rank: usize },
    #[error("numeric evaluation kept failing: {0}")]
    Numeric(String),
    #[error("equivalence undecided: {0}")]
    Undecided(String),
}

/// Exact coordinates for a list of fields in one shared finite basis: slot
/// by slot, every coefficient is written over the common denominator and
/// expanded; the blocks are concatenated.
pub fn coordinatize(fields: &[VectorField]) -> Vec<Vec<Scalar>> {
    if fields.is_empty() {
        return Vec::new();
    }
    let nslots = (fields[0].p + fields[0].q) as usize;
    let mut out = vec![Vec::new(); fields.len()];
    for slot in 0..nslots {
        let exprs: Vec<Expr> = fields.iter().map(|f| f.slots()[slot].clone()).collect();
        let block = coordinates_over_common_den(&exprs);
        for (f, b) in out.iter_mut().zip(block) {
            f.extend(b);
        }
    }
    out
}

/// Membership of `target` in the exact linear span of `basis`.
pub fn in_span(basis: &[VectorField], target: &VectorField) -> Result<bool, DependentBasis> {
    Ok(span_coordinates(basis, target)?.is_some())
}

/// Coordinates of `target` in `basis`, or `None` when outside the span.
pub fn span_coordinates(
    basis: &[VectorField],
    target: &VectorField,
) -> Result<Option<Vec<Scalar>>, DependentBasis> {
    let mut all = basis.to_vec();
    all.push(target.clone());
    let coords = coordinatize(&all);
    let (t, b) = coords.split_last().unwrap();
    solve_in_span(b, t)
}

/// Structure constants `[v_i, v_j] = sum_k c[i][j][k] v_k` of a closed
/// basis. Every ordered pair is computed independently; antisymmetry and the
/// Jacobi identity are then verified on the constants.
#[derive(Clone, Debug)]
pub struct StructureConstants {
    pub dim: usize,
    pub c: Vec<Vec<Vec<Scalar>>>,
}

impl StructureConstants {
    /// Bracket of coordinate vectors.
    pub fn bracket_coords(&self, x: &[Scalar], y: &[Scalar]) -> Vec<Scalar> {
        let mut out = vec![Scalar::zero(); self.dim];
        for i in 0..self.dim {
            if x[i].is_zero() {
                continue;
            }
            for j in 0..self.dim {
                if y[j].is_zero() {
                    continue;
                }
                let f = &x[i] * &y[j];
                for k in 0..self.dim {
                    if !self.c[i][j][k].is_zero() {
                        out[k] += &self.c[i][j][k] * &f;
                    }
                }
            }
        }
        out
    }

    /// Matrix of `ad_x`: entry `(k, j)` is the `k`-coordinate of `[x, v_j]`.
    pub fn ad_matrix(&self, x: &[Scalar]) -> Vec<Vec<Scalar>> {
        let mut m = vec![vec![Scalar::zero(); self.dim]; self.dim];
        for j in 0..self.dim {
            let mut e = vec![Scalar::zero(); self.dim];
            e[j] = Scalar::one();
            let col = self.bracket_coords(x, &e);
            for k in 0..self.dim {
                m[k][j] = col[k].clone();
            }
        }
        m
    }
}

pub fn structure_constants(fields: &[VectorField]) -> Result<StructureConstants, AlgebraError> {
    let dim = fields.len();
    let mut c = vec![vec![vec![Scalar::zero(); dim]; dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            if i == j {
                continue;
            }
            let w = bracket(&fields[i], &fields[j]);
            match span_coordinates(fields, &w) {
                Ok(Some(coords)) => c[i][j] = coords,
                Ok(None) => {
                    return Err(AlgebraError::NotClosed { i, j, bracket: Box::new(w) })
                }
                Err(DependentBasis) => return Err(AlgebraError::Dependent),
            }
        }
    }
    let sc = StructureConstants { dim, c };
    check_antisymmetry(&sc)?;
    check_jacobi_constants(&sc)?;
    Ok(sc)
}

fn check_antisymmetry(sc: &StructureConstants) -> Result<(), AlgebraError> {
    for i in 0..sc.dim {
        for j in (i + 1)..sc.dim {
            for k in 0..sc.dim {
                if sc.c[i][j][k] != -sc.c[j][i][k].clone() {
                    return Err(AlgebraError::NotAntisymmetric { i, j });
                }
            }
        }
    }
    Ok(())
}

fn check_jacobi_constants(sc: &StructureConstants) -> Result<(), AlgebraError> {
    let d = sc.dim;
    for i in 0..d {
        for j in (i + 1)..d {
            for k in (j + 1)..d {
                for l in 0..d {
                    let mut total = Scalar::zero();
                    for m in 0..d {
                        total += &sc.c[j][k][m] * &sc.c[i][m][l];
                        total += &sc.c[k][i][m] * &sc.c[j][m][l];
                        total += &sc.c[i][j][m] * &sc.c[k][m][l];
                    }
                    if !total.is_zero() {
                        return Err(AlgebraError::JacobiFails { i, j, k });
                    }
                }
            }
        }
    }
    Ok(())
}

/// Field-level Jacobi identity `[u,[v,w]] + [v,[w,u]] + [w,[u,v]] = 0`,
/// checked coefficient by coefficient, independent of any coordinatization.
pub fn check_jacobi_fields(fields: &[VectorField]) -> Result<(), AlgebraError> {
    for i in 0..fields.len() {
        for j in (i + 1)..fields.len() {
            for k in (j + 1)..fields.len() {
                let total = bracket(&fields[i], &bracket(&fields[j], &fields[k]))
                    .add(&bracket(&fields[j], &bracket(&fields[k], &fields[i])))
                    .add(&bracket(&fields[k], &bracket(&fields[i], &fields[j])));
                for slot in total.slots() {
                    match equivalent(&slot, &Expr::zero()) {
                        Ok(true) => {}
                        Ok(false) => return Err(AlgebraError::JacobiFails { i, j, k }),
                        Err(Undecided(d)) => return Err(AlgebraError::Undecided(d)),
                    }
                }
            }
        }
    }
    Ok(())
}

/// Commutator table: entry `(i, j)` holds the coordinates of `[v_i, v_j]`.
pub fn commutator_table(
    fields: &[VectorField],
) -> Result<Vec<Vec<Vec<Scalar>>>, AlgebraError> {
    let sc = structure_constants(fields)?;
    check_jacobi_fields(fields)?;
    Ok(sc.c)
}

// ---------------------------------------------------------------------------
// series, center, normalizer

/// Span of a set of coordinate vectors as an RREF basis.
fn subspace_basis(vectors: &[Vec<Scalar>], dim: usize) -> Vec<Vec<Scalar>> {
    let mut sys = LinearSystem::new(dim);
    for v in vectors {
        sys.add_dense_row(v);
    }
    let rref = sys.rref();
    rref.rows
        .iter()
        .map(|row| {
            let mut v = vec![Scalar::zero(); dim];
            for (c, val) in row {
                v[*c] = val.clone();
            }
            v
        })
        .collect()
}

/// Dimensions of the derived series `g, [g,g], [[g,g],[g,g]], ...` until it
/// stabilizes. The algebra is solvable when the series reaches zero.
pub fn derived_series(sc: &StructureConstants) -> Vec<usize> {
    let mut current: Vec<Vec<Scalar>> = (0..sc.dim)
        .map(|i| {
            let mut v = vec![Scalar::zero(); sc.dim];
            v[i] = Scalar::one();
            v
        })
        .collect();
    let mut dims = vec![current.len()];
    loop {
        let mut brackets = Vec::new();
        for i in 0..current.len() {
            for j in (i + 1)..current.len() {
                brackets.push(sc.bracket_coords(&current[i], &current[j]));
            }
        }
        let next = subspace_basis(&brackets, sc.dim);
        if next.len() == *dims.last().unwrap() {
            break;
        }
        dims.push(next.len());
        if next.is_empty() {
            break;
        }
        current = next;
    }
    dims
}

/// Dimensions of the lower central series `g, [g,g], [g,[g,g]], ...`.
pub fn lower_central_series(sc: &StructureConstants) -> Vec<usize> {
    let full: Vec<Vec<Scalar>> = (0..sc.dim)
        .map(|i| {
            let mut v = vec![Scalar::zero(); sc.dim];
            v[i] = Scalar::one();
            v
        })
        .collect();
    let mut current = full.clone();
    let mut dims = vec![current.len()];
    loop {
        let mut brackets = Vec::new();
        for x in &full {
            for y in &current {
                brackets.push(sc.bracket_coords(x, y));
            }
        }
        let next = subspace_basis(&brackets, sc.dim);
        if next.len() == *dims.last().unwrap() {
            break;
        }
        dims.push(next.len());
        if next.is_empty() {
            break;
        }
        current = next;
    }
    dims
}

pub fn is_solvable(sc: &StructureConstants) -> bool {
    derived_series(sc).last() == Some(&0)
}

pub fn is_nilpotent_algebra(sc: &StructureConstants) -> bool {
    lower_central_series(sc).last() == Some(&0)
}

/// Basis of the center `{x : [x, v_j] = 0 for all j}` in coordinates.
pub fn center(sc: &StructureConstants) -> Vec<Vec<Scalar>> {
    let mut sys = LinearSystem::new(sc.dim);
    for j in 0..sc.dim {
        for k in 0..sc.dim {
            let mut row = BTreeMap::new();
            for i in 0..sc.dim {
                if !sc.c[i][j][k].is_zero() {
                    row.insert(i, sc.c[i][j][k].clone());
                }
            }
            sys.add_row(row);
        }
    }
    sys.nullspace()
}

/// Normalizer of the subalgebra spanned by the selected basis members:
/// `{x in g : [x, h] subset h}`, returned as coordinate vectors.
pub fn normalizer(
    fields: &[VectorField],
    subset: &[usize],
) -> Result<Vec<Vec<Scalar>>, AlgebraError> {
    let sc = structure_constants(fields)?;
    let h: Vec<Vec<Scalar>> = subset
        .iter()
        .map(|&i| {
            let mut v = vec![Scalar::zero(); sc.dim];
            v[i] = Scalar::one();
            v
        })
        .collect();
    // h must itself close under the bracket
    for (a, x) in h.iter().enumerate() {
        for y in h.iter().skip(a + 1) {
            let b = sc.bracket_coords(x, y);
            match solve_in_span(&h, &b) {
                Ok(Some(_)) => {}
                Ok(None) => {
                    return Err(AlgebraError::NotSubalgebra { i: subset[a], j: subset[a + 1] })
                }
                Err(DependentBasis) => return Err(AlgebraError::Dependent),
            }
        }
    }
    // reduce [e_i, w] against the RREF of h; the remainder must vanish
    let h_rref = {
        let mut sys = LinearSystem::new(sc.dim);
        for v in &h {
            sys.add_dense_row(v);
        }
        sys.rref()
    };
    let reduce = |mut v: Vec<Scalar>| -> Vec<Scalar> {
        for (row, &pc) in h_rref.rows.iter().zip(&h_rref.pivots) {
            let f = v[pc].clone();
            if f.is_zero() {
                continue;
            }
            for (c, entry) in row {
                v[*c] -= entry * &f;
            }
        }
        v
    };
    let mut sys = LinearSystem::new(sc.dim);
    for w in &h {
        // remainder of [x, w] with x = sum a_i e_i: one condition per component
        let mut remainders = Vec::new();
        for i in 0..sc.dim {
            let mut e = vec![Scalar::zero(); sc.dim];
            e[i] = Scalar::one();
            remainders.push(reduce(sc.bracket_coords(&e, w)));
        }
        for comp in 0..sc.dim {
            let mut row = BTreeMap::new();
            for (i, r) in remainders.iter().enumerate() {
                if !r[comp].is_zero() {
                    row.insert(i, r[comp].clone());
                }
            }
            sys.add_row(row);
        }
    }
    Ok(sys.nullspace())
}

// ---------------------------------------------------------------------------
// adjoint flow

fn mat_mul(a: &[Vec<Scalar>], b: &[Vec<Scalar>]) -> Vec<Vec<Scalar>> {
    let n = a.len();
    let mut out = vec![vec![Scalar::zero(); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..n {
                if !b[k][j].is_zero() {
                    out[i][j] += &a[i][k] * &b[k][j];
                }
            }
        }
    }
    out
}

fn mat_vec(a: &[Vec<Scalar>], x: &[Scalar]) -> Vec<Scalar> {
    a.iter()
        .map(|row| {
            row.iter()
                .zip(x)
                .map(|(v, y)| v * y)
                .fold(Scalar::zero(), |acc, t| acc + t)
        })
        .collect()
}

fn is_zero_matrix(a: &[Vec<Scalar>]) -> bool {
    a.iter().all(|r| r.iter().all(|v| v.is_zero()))
}

/// Exact adjoint action `Ad(exp(eps v)) w = sum_k eps^k/k! ad_v^k w`,
/// available when `ad_v` is nilpotent; the result is a vector of polynomials
/// in the flow parameter.
pub fn adjoint_exact(
    sc: &StructureConstants,
    v: &[Scalar],
    w: &[Scalar],
    eps: &Sym,
) -> Result<Vec<Expr>, AlgebraError> {
    let a = sc.ad_matrix(v);
    // nilpotency within dim steps or not at all
    let mut power = a.clone();
    let mut steps = 1;
    while !is_zero_matrix(&power) {
        if steps > sc.dim {
            return Err(AlgebraError::NotNilpotent);
        }
        power = mat_mul(&power, &a);
        steps += 1;
    }
    let mut terms: Vec<Vec<Expr>> = Vec::new();
    let mut current = w.to_vec();
    let mut factorial = Scalar::one();
    for k in 0..steps {
        if k > 0 {
            current = mat_vec(&a, &current);
            factorial *= Scalar::from_integer(k.into());
        }
        let scale = factorial.recip();
        let eps_pow = Expr::pow(Expr::sym(eps.clone()), Scalar::from_integer(k.into()));
        terms.push(
            current
                .iter()
                .map(|c| {
                    Expr::mul(vec![
                        Expr::num(c * &scale),
                        eps_pow.clone(),
                    ])
                })
                .collect(),
        );
    }
    let mut out = Vec::with_capacity(sc.dim);
    for i in 0..sc.dim {
        let col: Vec<Expr> = terms.iter().map(|t| t[i].clone()).collect();
        out.push(normalize(&Expr::add(col)));
    }
    Ok(out)
}

/// Numeric adjoint `expm(eps ad_v) w` by Taylor series with scaling and
/// squaring to absolute tolerance `1e-12`.
pub fn adjoint_numeric(
    sc: &StructureConstants,
    v: &[Scalar],
    w: &[Scalar],
    eps: f64,
) -> Vec<f64> {
    let to_f = |x: &Scalar| -> f64 {
        let n: f64 = x.numer().to_string().parse().unwrap();
        let d: f64 = x.denom().to_string().parse().unwrap();
        n / d
    };
    let n = sc.dim;
    let a_exact = sc.ad_matrix(v);
    let mut a: Vec<Vec<f64>> = a_exact
        .iter()
        .map(|row| row.iter().map(to_f).collect())
        .collect();
    for row in a.iter_mut() {
        for x in row.iter_mut() {
            *x *= eps;
        }
    }
    let norm = a
        .iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let scaled: Vec<Vec<f64>> = a
        .iter()
        .map(|r| r.iter().map(|x| x * scale).collect())
        .collect();
    // Taylor series of expm(scaled)
    let mut result: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut term = result.clone();
    for k in 1..200 {
        term = mulf(&term, &scaled);
        for row in term.iter_mut() {
            for x in row.iter_mut() {
                *x /= k as f64;
            }
        }
        let mut biggest = 0.0f64;
        for (i, row) in term.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                result[i][j] += x;
                biggest = biggest.max(x.abs());
            }
        }
        if biggest < 1e-12 {
            break;
        }
    }
    for _ in 0..squarings {
        result = mulf(&result, &result);
    }
    let wv: Vec<f64> = w.iter().map(to_f).collect();
    result
        .iter()
        .map(|row| row.iter().zip(&wv).map(|(m, x)| m * x).sum())
        .collect()
}

fn mulf(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// two-dimensional classification

/// The four two-dimensional Lie algebra types over the reals, determined by
/// commutativity and the generic rank of the coefficient matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Class2D {
    /// Abelian, rank 2.
    A21,
    /// Abelian, rank 1.
    A22,
    /// Non-abelian, rank 2.
    A23,
    /// Non-abelian, rank 1.
    A24,
}

impl Class2D {
    pub fn name(self) -> &'static str {
        match self {
            Class2D::A21 => "A2,1",
            Class2D::A22 => "A2,2",
            Class2D::A23 => "A2,3",
            Class2D::A24 => "A2,4",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Classification2D {
    pub class: Class2D,
    pub abelian: bool,
    pub rank: usize,
    pub seeds_used: Vec<u64>,
}

/// Classify the two-dimensional algebra spanned by a pair of fields.
pub fn classify_2d(
    v1: &VectorField,
    v2: &VectorField,
    seed: u64,
) -> Result<Classification2D, AlgebraError> {
    let pair = [v1.clone(), v2.clone()];
    let coords = coordinatize(&pair);
    {
        let mut sys = LinearSystem::new(coords[0].len());
        for v in &coords {
            sys.add_dense_row(v);
        }
        let rank = sys.rank();
        if rank != 2 {
            return Err(AlgebraError::NotTwoDimensional { rank });
        }
    }
    let w = bracket(v1, v2);
    let abelian = w.is_zero();
    if !abelian {
        match span_coordinates(&pair, &w) {
            Ok(Some(_)) => {}
            Ok(None) => {
                return Err(AlgebraError::NotClosed { i: 0, j: 1, bracket: Box::new(w) })
            }
            Err(DependentBasis) => return Err(AlgebraError::Dependent),
        }
    }
    let (rank, seeds_used) = generic_rank(&pair, seed)?;
    let class = match (abelian, rank) {
        (true, 2) => Class2D::A21,
        (true, _) => Class2D::A22,
        (false, 2) => Class2D::A23,
        (false, _) => Class2D::A24,
    };
    Ok(Classification2D { class, abelian, rank, seeds_used })
}

/// Rank of the coefficient matrix of the fields at generic points: evaluated
/// at three seeded points (retrying on domain faults), taking the maximum.
pub fn generic_rank(
    fields: &[VectorField],
    seed: u64,
) -> Result<(usize, Vec<u64>), AlgebraError> {
    let space = JetSpace::new(fields[0].p, fields[0].q, 1);
    let mut rank = 0usize;
    let mut seeds_used = Vec::new();
    let mut failures = String::new();
    for base in [seed, seed + 1, seed + 2] {
        let mut done = false;
        for attempt in 0..5 {
            let s = base + 1000 * attempt;
            let point_exact = generic_point(&space, s);
            let point: BTreeMap<Sym, f64> = point_exact
                .iter()
                .map(|(k, v)| {
                    let n: f64 = v.numer().to_string().parse().unwrap();
                    let d: f64 = v.denom().to_string().parse().unwrap();
                    (k.clone(), n / d)
                })
                .collect();
            let mut rows = Vec::new();
            let mut fault = None;
            'field: for f in fields {
                let mut row = Vec::new();
                for c in f.slots() {
                    match evaluate_numeric(&c, &point) {
                        Ok(x) => row.push(x),
                        Err(e) => {
                            fault = Some(e.0);
                            break 'field;
                        }
                    }
                }
                rows.push(row);
            }
            match fault {
                None => {
                    rank = rank.max(rank_numeric(&rows));
                    seeds_used.push(s);
                    done = true;
                    break;
                }
                Some(f) => failures = f,
            }
        }
        if !done {
            return Err(AlgebraError::Numeric(failures));
        }
    }
    Ok((rank, seeds_used))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::sc;
    use crate::parse::{parse_expression, Vocab};

    fn fields_on(vocab: &Vocab, specs: &[&[&str]]) -> Vec<VectorField> {
        specs
            .iter()
            .map(|slots| {
                let exprs: Vec<Expr> =
                    slots.iter().map(|s| parse_expression(s, vocab).unwrap()).collect();
                VectorField::from_slots(vocab.p(), vocab.q(), exprs).unwrap()
            })
            .collect()
    }

    fn sl2_line() -> Vec<VectorField> {
        // d/dy, y d/dy, y^2 d/dy on the line (x independent, y unknown)
        let vocab = Vocab::new(vec!["x".into()], vec!["y".into()]);
        fields_on(&vocab, &[&["0", "1"], &["0", "y"], &["0", "y^2"]])
    }

    fn heisenberg() -> Vec<VectorField> {
        // d/dx, x d/du, d/du
        let vocab = Vocab::new(vec!["x".into()], vec!["u".into()]);
        fields_on(&vocab, &[&["1", "0"], &["0", "x"], &["0", "1"]])
    }

    #[test]
    fn sl2_structure_constants() {
        let sc3 = structure_constants(&sl2_line()).unwrap();
        // [v1, v2] = v1, [v1, v3] = 2 v2, [v2, v3] = v3
        assert_eq!(sc3.c[0][1], vec![sc(1), sc(0), sc(0)]);
        assert_eq!(sc3.c[0][2], vec![sc(0), sc(2), sc(0)]);
        assert_eq!(sc3.c[1][2], vec![sc(0), sc(0), sc(1)]);
        check_jacobi_fields(&sl2_line()).unwrap();
        // perfect algebra: derived series stays at full dimension
        assert_eq!(derived_series(&sc3), vec![3]);
        assert!(!is_solvable(&sc3));
        assert!(center(&sc3).is_empty());
    }

    #[test]
    fn heisenberg_is_nilpotent_with_central_shift() {
        let sc3 = structure_constants(&heisenberg()).unwrap();
        assert_eq!(sc3.c[0][1], vec![sc(0), sc(0), sc(1)]); // [d/dx, x d/du] = d/du
        assert_eq!(derived_series(&sc3), vec![3, 1, 0]);
        assert!(is_solvable(&sc3));
        assert_eq!(lower_central_series(&sc3), vec![3, 1, 0]);
        assert!(is_nilpotent_algebra(&sc3));
        let z = center(&sc3);
        assert_eq!(z, vec![vec![sc(0), sc(0), sc(1)]]);
    }

    #[test]
    fn unclosed_family_is_reported() {
        let vocab = Vocab::new(vec!["x".into()], vec!["y".into()]);
        // [d/dy, y^2 d/dy] = 2y d/dy escapes the pair
        let pair = fields_on(&vocab, &[&["0", "1"], &["0", "y^2"]]);
        match structure_constants(&pair) {
            Err(AlgebraError::NotClosed { bracket, .. }) => {
                let want = parse_expression("2*y", &vocab).unwrap();
                assert_eq!(equivalent(&bracket.phi[0], &want), Ok(true));
            }
            other => panic!("expected escape, got {:?}", other),
        }
    }

    #[test]
    fn normalizers_in_small_algebras() {
        // in sl2 on the line, the normalizer of {d/dy} adds the scaling only
        let n = normalizer(&sl2_line(), &[0]).unwrap();
        let mut sys = LinearSystem::new(3);
        for v in &n {
            sys.add_dense_row(v);
        }
        assert_eq!(n.len(), 2);
        assert_eq!(
            solve_in_span(&n, &[sc(1), sc(0), sc(0)]).unwrap().is_some(),
            true
        );
        assert_eq!(
            solve_in_span(&n, &[sc(0), sc(1), sc(0)]).unwrap().is_some(),
            true
        );
        // the affine pair normalizes the shift fully
        let vocab = Vocab::new(vec!["x".into()], vec!["y".into()]);
        let pair = fields_on(&vocab, &[&["0", "1"], &["0", "y"]]);
        assert_eq!(normalizer(&pair, &[0]).unwrap().len(), 2);
        // while the scaling only normalizes itself
        assert_eq!(normalizer(&pair, &[1]).unwrap().len(), 1);
    }

    #[test]
    fn adjoint_flows_exact_and_numeric() {
        let sc3 = structure_constants(&sl2_line()).unwrap();
        let eps = Sym::param("eps");
        // ad of the lowering element is nilpotent:
        // Ad(exp eps v1) v3 = v3 + 2 eps v2 + eps^2 v1
        let flow = adjoint_exact(&sc3, &[sc(1), sc(0), sc(0)], &[sc(0), sc(0), sc(1)], &eps)
            .unwrap();
        let vocab = Vocab::new(vec!["x".into()], vec!["y".into()]);
        let pe = |s: &str| parse_expression(s, &vocab).unwrap();
        assert_eq!(equivalent(&flow[0], &pe("eps^2")), Ok(true));
        assert_eq!(equivalent(&flow[1], &pe("2*eps")), Ok(true));
        assert_eq!(equivalent(&flow[2], &Expr::one()), Ok(true));
        // the scaling element is not nilpotent: exact mode refuses, the
        // numeric flow contracts v1 by exp(-eps)
        let v2 = [sc(0), sc(1), sc(0)];
        let v1 = [sc(1), sc(0), sc(0)];
        assert!(matches!(
            adjoint_exact(&sc3, &v2, &v1, &eps),
            Err(AlgebraError::NotNilpotent)
        ));
        let moved = adjoint_numeric(&sc3, &v2, &v1, 0.3);
        assert!((moved[0] - (-0.3f64).exp()).abs() < 1e-9);
        assert!(moved[1].abs() < 1e-12 && moved[2].abs() < 1e-12);
    }

    #[test]
    fn rotation_algebra_flows_in_circles() {
        // realization of the rotation algebra on the plane
        let vocab = Vocab::new(vec!["x".into(), "y".into()], vec!["u".into()]);
        let fields = fields_on(
            &vocab,
            &[
                &["-(1 + x^2)", "-x*y", "0"],
                &["x*y", "1 + y^2", "0"],
                &["y", "-x", "0"],
            ],
        );
        let sc3 = structure_constants(&fields).unwrap();
        // compact: no nilpotent adjoints, numeric flow rotates v1 toward v2
        let eps = Sym::param("eps");
        let v3 = [sc(0), sc(0), sc(1)];
        let v1 = [sc(1), sc(0), sc(0)];
        assert!(matches!(
            adjoint_exact(&sc3, &v3, &v1, &eps),
            Err(AlgebraError::NotNilpotent)
        ));
        let t = 0.5f64;
        let moved = adjoint_numeric(&sc3, &v3, &v1, t);
        // closed form: cos(t) v1 +/- sin(t) v2 with the radius preserved
        assert!((moved[0] - t.cos()).abs() < 1e-9);
        assert!((moved[1].abs() - t.sin()).abs() < 1e-9);
        assert!(moved[2].abs() < 1e-12);
        let radius: f64 = moved.iter().map(|x| x * x).sum();
        assert!((radius - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_dimensional_types() {
        let v2 = Vocab::new(vec!["x".into(), "y".into()], vec!["u".into()]);
        let v1 = Vocab::new(vec!["x".into()], vec!["y".into()]);
        let f2 = |a: &[&str], b: &[&str]| {
            let fs = fields_on(&v2, &[a, b]);
            classify_2d(&fs[0], &fs[1], 42).unwrap()
        };
        let f1 = |a: &[&str], b: &[&str]| {
            let fs = fields_on(&v1, &[a, b]);
            classify_2d(&fs[0], &fs[1], 42).unwrap()
        };
        assert_eq!(f2(&["1", "0", "0"], &["0", "1", "0"]).class, Class2D::A21);
        assert_eq!(f1(&["0", "1"], &["0", "x"]).class, Class2D::A22);
        assert_eq!(f1(&["1", "0"], &["x", "y"]).class, Class2D::A23);
        assert_eq!(f1(&["0", "1"], &["0", "y"]).class, Class2D::A24);
        // dependent pair is refused
        let fs = fields_on(&v1, &[&["0", "1"], &["0", "2"]]);
        assert!(matches!(
            classify_2d(&fs[0], &fs[1], 42),
            Err(AlgebraError::NotTwoDimensional { rank: 1 })
        ));
    }
}

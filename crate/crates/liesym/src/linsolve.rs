//! Exact rational linear algebra: sparse RREF, nullspace extraction, span
//! membership, and a tolerance-based numeric rank for float matrices.

use std::collections::BTreeMap;

use num::bigint::BigInt;
use num::traits::{One, Signed, Zero};

use crate::expr::Scalar;

/// Homogeneous linear system over the rationals with sparse rows.
#[derive(Clone, Debug, Default)]
pub struct LinearSystem {
    rows: Vec<BTreeMap<usize, Scalar>>,
    pub cols: usize,
}

/// Make a row integer, content-free, with positive leading entry.
fn primitive_row(row: &mut BTreeMap<usize, Scalar>) {
    row.retain(|_, v| !v.is_zero());
    if row.is_empty() {
        return;
    }
    let mut den_lcm = BigInt::one();
    for v in row.values() {
        den_lcm = num::integer::lcm(den_lcm, v.denom().clone());
    }
    let mut num_gcd = BigInt::zero();
    for v in row.values() {
        num_gcd = num::integer::gcd(num_gcd, (v.numer() * &den_lcm / v.denom()).abs());
    }
    let lead_negative = row.values().next().map(|v| v.is_negative()).unwrap_or(false);
    if lead_negative {
        num_gcd = -num_gcd;
    }
    let factor = Scalar::new(den_lcm, num_gcd);
    for v in row.values_mut() {
        *v *= &factor;
    }
}

/// Row-echelon data produced by [`LinearSystem::rref`].
#[derive(Clone, Debug)]
pub struct Rref {
    /// Reduced rows, one per pivot, each with a 1 in its pivot column.
    pub rows: Vec<BTreeMap<usize, Scalar>>,
    pub pivots: Vec<usize>,
    pub cols: usize,
}

impl LinearSystem {
    pub fn new(cols: usize) -> LinearSystem {
        LinearSystem { rows: Vec::new(), cols }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_row(&mut self, mut row: BTreeMap<usize, Scalar>) {
        primitive_row(&mut row);
        if !row.is_empty() {
            self.rows.push(row);
        }
    }

    pub fn add_dense_row(&mut self, row: &[Scalar]) {
        assert_eq!(row.len(), self.cols);
        let map: BTreeMap<usize, Scalar> = row
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, v)| (i, v.clone()))
            .collect();
        self.add_row(map);
    }

    /// Reduced row-echelon form. Column processing order is left to right;
    /// pivot choice among candidate rows minimizes entry size, so the result
    /// is deterministic.
    pub fn rref(mut self) -> Rref {
        let mut pivots = Vec::new();
        let mut done = 0usize; // rows above this index are finished pivot rows
        for col in 0..self.cols {
            // pick the unfinished row with nonzero entry of smallest bit size
            let mut best: Option<(usize, u64)> = None;
            for r in done..self.rows.len() {
                if let Some(v) = self.rows[r].get(&col) {
                    let size = v.numer().bits() + v.denom().bits()
                        + 8 * self.rows[r].len() as u64;
                    if best.map(|(_, s)| size < s).unwrap_or(true) {
                        best = Some((r, size));
                    }
                }
            }
            let Some((r, _)) = best else { continue };
            self.rows.swap(done, r);
            let inv = self.rows[done].get(&col).unwrap().recip();
            let pivot_row: BTreeMap<usize, Scalar> =
                self.rows[done].iter().map(|(c, v)| (*c, v * &inv)).collect();
            // eliminate from every other row (full reduction)
            for rr in 0..self.rows.len() {
                if rr == done {
                    continue;
                }
                let Some(factor) = self.rows[rr].get(&col).cloned() else { continue };
                for (c, v) in &pivot_row {
                    let delta = v * &factor;
                    let slot = self.rows[rr].entry(*c).or_insert_with(Scalar::zero);
                    *slot -= delta;
                }
                if rr > done {
                    // rescaling finished pivot rows would break their unit pivots
                    primitive_row(&mut self.rows[rr]);
                } else {
                    self.rows[rr].retain(|_, v| !v.is_zero());
                }
            }
            self.rows[done] = pivot_row;
            pivots.push(col);
            done += 1;
        }
        self.rows.truncate(done);
        Rref { rows: self.rows, pivots, cols: self.cols }
    }

    pub fn rank(self) -> usize {
        self.rref().pivots.len()
    }

    /// Basis of the solution space of `Ax = 0`, one vector per free column,
    /// with a 1 in that column.
    pub fn nullspace(self) -> Vec<Vec<Scalar>> {
        let rref = self.rref();
        let mut is_pivot = vec![false; rref.cols];
        for &c in &rref.pivots {
            is_pivot[c] = true;
        }
        let mut basis = Vec::new();
        for free in 0..rref.cols {
            if is_pivot[free] {
                continue;
            }
            let mut v = vec![Scalar::zero(); rref.cols];
            v[free] = Scalar::one();
            for (row, &pc) in rref.rows.iter().zip(&rref.pivots) {
                if let Some(entry) = row.get(&free) {
                    v[pc] = -entry.clone();
                }
            }
            basis.push(v);
        }
        basis
    }
}

/// The basis handed to a span query was linearly dependent.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("basis vectors are linearly dependent")]
pub struct DependentBasis;

/// Solve `sum c_i basis_i = target` exactly. `Ok(None)` means the target is
/// outside the span.
pub fn solve_in_span(
    basis: &[Vec<Scalar>],
    target: &[Scalar],
) -> Result<Option<Vec<Scalar>>, DependentBasis> {
    let k = basis.len();
    let m = target.len();
    for b in basis {
        assert_eq!(b.len(), m, "basis and target dimensions differ");
    }
    if k == 0 {
        return if target.iter().all(|v| v.is_zero()) {
            Ok(Some(Vec::new()))
        } else {
            Ok(None)
        };
    }
    // reject dependent bases first, whatever the target
    let mut bsys = LinearSystem::new(k);
    for row in 0..m {
        let entries: BTreeMap<usize, Scalar> = basis
            .iter()
            .enumerate()
            .filter(|(_, b)| !b[row].is_zero())
            .map(|(j, b)| (j, b[row].clone()))
            .collect();
        bsys.add_row(entries);
    }
    if bsys.rank() < k {
        return Err(DependentBasis);
    }
    // augmented system [B | t] with unknown column weights
    let mut sys = LinearSystem::new(k + 1);
    for row in 0..m {
        let mut entries = BTreeMap::new();
        for (j, b) in basis.iter().enumerate() {
            if !b[row].is_zero() {
                entries.insert(j, b[row].clone());
            }
        }
        if !target[row].is_zero() {
            entries.insert(k, target[row].clone());
        }
        sys.add_row(entries);
    }
    let rref = sys.rref();
    if rref.pivots.contains(&k) {
        return Ok(None); // inconsistent
    }
    let mut coeffs = vec![Scalar::zero(); k];
    for (row, &pc) in rref.rows.iter().zip(&rref.pivots) {
        if let Some(v) = row.get(&k) {
            coeffs[pc] = v.clone();
        }
    }
    Ok(Some(coeffs))
}

/// Rank of a float matrix by Gaussian elimination with partial pivoting;
/// entries below `1e-9` times the largest magnitude count as zero.
pub fn rank_numeric(rows: &[Vec<f64>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let cols = rows[0].len();
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    let tol = 1e-9 * scale;
    let mut rank = 0;
    for col in 0..cols {
        let mut best = rank;
        for r in rank..m.len() {
            if m[r][col].abs() > m[best][col].abs() {
                best = r;
            }
        }
        if rank >= m.len() || m[best][col].abs() <= tol {
            continue;
        }
        m.swap(rank, best);
        for r in 0..m.len() {
            if r == rank {
                continue;
            }
            let f = m[r][col] / m[rank][col];
            if f != 0.0 {
                for c in col..cols {
                    let delta = f * m[rank][c];
                    m[r][c] -= delta;
                }
                m[r][col] = 0.0;
            }
        }
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    rank
}

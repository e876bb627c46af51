//! Semantic equivalence: exact normal-form comparison with a seeded
//! probabilistic numeric fallback for transcendental identities the rewrite
//! rules do not close over (e.g. sin^2 + cos^2 = 1).

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ratform::{from_tree_reduced, to_expr};
use super::{evaluate_numeric_ext, Expr, FuncSym, Node, Sym};

/// The probabilistic branch could not decide (mixed or borderline samples).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("equivalence undecided: {0}")]
pub struct Undecided(pub String);

/// Result of an equivalence query.
pub type EquivResult = Result<bool, Undecided>;

const PROBE_POINTS: usize = 8;
const PROBE_TOL: f64 = 1e-9;
const CLEAR_NONZERO: f64 = 1e-6;
const PROBE_SEED: u64 = 0x4c69_6553;

/// Are `a` and `b` the same function (under the engine's conventions)?
///
/// Deterministic when the difference normalizes to zero (true) or is a pure
/// rational function of free symbols (false). Otherwise the difference is
/// probed at `PROBE_POINTS` seeded rational points with tolerance
/// `PROBE_TOL`; conflicting samples yield `Undecided`.
pub fn equivalent(a: &Expr, b: &Expr) -> EquivResult {
    equivalent_witness(a, b).0
}

/// `equivalent` plus a flag: true when the probabilistic branch decided.
pub fn equivalent_witness(a: &Expr, b: &Expr) -> (EquivResult, bool) {
    let diff = Expr::sub(a.clone(), b.clone());
    let rf = from_tree_reduced(&diff);
    if rf.is_zero() {
        return (Ok(true), false);
    }
    if !rf.has_transcendental() {
        // nonzero rational function of formally independent generators
        return (Ok(false), false);
    }
    (probe_zero(&to_expr(&rf)), true)
}

fn probe_zero(d: &Expr) -> EquivResult {
    let syms: BTreeSet<Sym> = d.free_syms();
    let funcs = collect_func_instances(d);
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let mut zeros = 0usize;
    let mut nonzeros = 0usize;
    let mut gray = 0usize;
    let mut sampled = 0usize;
    'points: for _ in 0..PROBE_POINTS {
        // resample on domain faults (e.g. ln of a cancelled-out sign)
        for _ in 0..40 {
            let mut point: BTreeMap<Sym, f64> = BTreeMap::new();
            for s in &syms {
                point.insert(s.clone(), random_rational(&mut rng));
            }
            let fvals: BTreeMap<FuncSym, f64> =
                funcs.iter().map(|f| (f.clone(), random_rational(&mut rng))).collect();
            match evaluate_numeric_ext(d, &point, &fvals) {
                Err(_) => continue,
                Ok(v) => {
                    sampled += 1;
                    let m = v.abs();
                    if m <= PROBE_TOL {
                        zeros += 1;
                    } else if m > CLEAR_NONZERO {
                        nonzeros += 1;
                    } else {
                        gray += 1;
                    }
                    continue 'points;
                }
            }
        }
    }
    if sampled == 0 {
        return Err(Undecided("no admissible probe points".to_string()));
    }
    if gray > 0 || (zeros > 0 && nonzeros > 0) {
        return Err(Undecided(format!(
            "conflicting probe samples: {} zero, {} nonzero, {} borderline of {}",
            zeros, nonzeros, gray, sampled
        )));
    }
    Ok(zeros == sampled)
}

/// Positive rational k/d with k in 1..=97 and d in {1,2,3}, as f64.
fn random_rational<R: Rng>(rng: &mut R) -> f64 {
    let k: u32 = rng.gen_range(1..=97);
    let d: u32 = rng.gen_range(1..=3);
    k as f64 / d as f64
}

fn collect_func_instances(e: &Expr) -> BTreeSet<FuncSym> {
    let mut out = BTreeSet::new();
    fn rec(e: &Expr, out: &mut BTreeSet<FuncSym>) {
        match e.node() {
            Node::Num(_) | Node::Sym(_) => {}
            Node::Sum(xs) | Node::Prod(xs) => xs.iter().for_each(|x| rec(x, out)),
            Node::Pow(b, _) => rec(b, out),
            Node::Kernel(_, a) => rec(a, out),
            Node::Func(f) => {
                out.insert(f.clone());
                f.args.iter().for_each(|a| rec(a, out));
            }
        }
    }
    rec(e, &mut out);
    out
}

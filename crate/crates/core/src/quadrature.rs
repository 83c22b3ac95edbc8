//! Gauss–Legendre rules on `[-1, 1]` and an adaptive bisecting integrator.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::legendre::GaussLegendre;

use crate::{Error, Result};

/// Node/weight pairs of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// sorted by node. Rules are computed once per order and shared.
pub fn gauss_legendre(n: usize) -> Arc<[(f64, f64)]> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<[(f64, f64)]>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| {
            let order = NonZeroUsize::new(n.max(1)).expect("order is positive");
            let rule = GaussLegendre::new(order);
            let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            pairs.into()
        })
        .clone()
}

/// Fixed-order rule mapped to `[a, b]`.
pub fn integrate_fixed<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    gauss_legendre(n)
        .iter()
        .map(|&(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Adaptive integration to absolute tolerance `tol`.
///
/// Each panel is integrated with a 16- and a 32-point rule; panels whose
/// estimates differ by more than their share of the tolerance are bisected.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    const MAX_DEPTH: u32 = 40;
    if a == b {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut worst_excess = 0.0_f64;
    let mut stack = vec![(a, b, 0u32)];
    let width = (b - a).abs();
    while let Some((lo, hi, depth)) = stack.pop() {
        let coarse = integrate_fixed(&f, lo, hi, 16);
        let fine = integrate_fixed(&f, lo, hi, 32);
        let err = (fine - coarse).abs();
        let budget = tol * (hi - lo).abs() / width;
        if err <= budget.max(f64::EPSILON * fine.abs()) {
            total += fine;
        } else if depth >= MAX_DEPTH {
            total += fine;
            worst_excess = worst_excess.max(err);
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    if worst_excess > tol {
        return Err(Error::Quadrature {
            achieved: worst_excess,
            requested: tol,
        });
    }
    Ok(total)
}

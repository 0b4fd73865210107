//! Permutation-minimized location error on the torus.

use crate::error::{Error, Result};
use crate::model::torus_distance;

/// Largest `r` solved by exhaustive enumeration of permutations.
pub const BRUTE_FORCE_MAX: usize = 8;

/// An optimal matching: `perm[k]` is the index of the estimate paired with
/// truth entry `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    pub distance: f64,
    pub perm: Vec<usize>,
}

/// `min_π max_k |τ★_k − τ̂_{π(k)}|` on the circle of circumference `period`.
pub fn matching_distance(tau_hat: &[f64], tau_star: &[f64], period: f64) -> Result<f64> {
    optimal_matching(tau_hat, tau_star, period).map(|m| m.distance)
}

/// Exhaustive search for `r ≤ 8` (ties broken by the smallest sum of squared
/// distances), bottleneck assignment above.
pub fn optimal_matching(tau_hat: &[f64], tau_star: &[f64], period: f64) -> Result<Matching> {
    let cost = cost_matrix(tau_hat, tau_star, period)?;
    if tau_star.len() <= BRUTE_FORCE_MAX {
        Ok(exhaustive(&cost))
    } else {
        Ok(bottleneck(&cost))
    }
}

/// Bottleneck assignment at any size: binary search over the distinct
/// pairwise distances with a bipartite perfect-matching feasibility test.
pub fn bottleneck_matching(tau_hat: &[f64], tau_star: &[f64], period: f64) -> Result<Matching> {
    let cost = cost_matrix(tau_hat, tau_star, period)?;
    Ok(bottleneck(&cost))
}

fn cost_matrix(tau_hat: &[f64], tau_star: &[f64], period: f64) -> Result<Vec<Vec<f64>>> {
    if tau_hat.len() != tau_star.len() {
        return Err(Error::Dimension(format!(
            "matching {} estimates against {} locations",
            tau_hat.len(),
            tau_star.len()
        )));
    }
    Ok(tau_star
        .iter()
        .map(|&s| tau_hat.iter().map(|&h| torus_distance(s, h, period)).collect())
        .collect())
}

fn exhaustive(cost: &[Vec<f64>]) -> Matching {
    let r = cost.len();
    let mut perm: Vec<usize> = (0..r).collect();
    let score = |p: &[usize]| {
        p.iter().enumerate().fold((0.0f64, 0.0f64), |(mx, sq), (k, &j)| {
            let d = cost[k][j];
            (mx.max(d), sq + d * d)
        })
    };
    let mut best = (score(&perm), perm.clone());
    // Heap's algorithm, iterative form
    let mut c = vec![0usize; r];
    let mut i = 1;
    while i < r {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            let s = score(&perm);
            if s.0 < best.0 .0 || (s.0 == best.0 .0 && s.1 < best.0 .1) {
                best = (s, perm.clone());
            }
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Matching { distance: best.0 .0, perm: best.1 }
}

fn bottleneck(cost: &[Vec<f64>]) -> Matching {
    let r = cost.len();
    if r == 0 {
        return Matching { distance: 0.0, perm: Vec::new() };
    }
    let mut levels: Vec<f64> = cost.iter().flatten().copied().collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let (mut lo, mut hi) = (0, levels.len() - 1);
    let mut best = perfect_matching(cost, levels[hi]).expect("complete graph has a perfect matching");
    while lo < hi {
        let mid = (lo + hi) / 2;
        match perfect_matching(cost, levels[mid]) {
            Some(p) => {
                best = p;
                hi = mid;
            }
            None => lo = mid + 1,
        }
    }
    Matching { distance: levels[lo], perm: best }
}

/// Kuhn's augmenting-path matching on edges with `cost ≤ threshold`.
fn perfect_matching(cost: &[Vec<f64>], threshold: f64) -> Option<Vec<usize>> {
    let r = cost.len();
    let mut owner: Vec<Option<usize>> = vec![None; r];
    fn augment(
        k: usize,
        cost: &[Vec<f64>],
        threshold: f64,
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for j in 0..cost.len() {
            if cost[k][j] <= threshold && !seen[j] {
                seen[j] = true;
                if owner[j].is_none_or(|other| augment(other, cost, threshold, seen, owner)) {
                    owner[j] = Some(k);
                    return true;
                }
            }
        }
        false
    }
    for k in 0..r {
        let mut seen = vec![false; r];
        if !augment(k, cost, threshold, &mut seen, &mut owner) {
            return None;
        }
    }
    let mut perm = vec![0; r];
    for (j, k) in owner.iter().enumerate() {
        perm[k.expect("perfect matching covers every column")] = j;
    }
    Some(perm)
}

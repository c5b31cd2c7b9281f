//! Shared helpers for the integration suites.
#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Exhaustive assignment oracle: enumerates every permutation of the padded
/// square matrix and keeps the lexicographically best (max cardinality,
/// then min total cost) matching over admissible cells. Independent of the
/// solver under test.
pub fn brute_force_assignment(cost: &[Vec<Option<f64>>]) -> (usize, f64) {
    let rows = cost.len();
    let cols = cost.first().map_or(0, |r| r.len());
    let n = rows.max(cols);
    if n == 0 {
        return (0, 0.0);
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best: Option<(usize, f64)> = None;

    fn visit(
        perm: &mut Vec<usize>,
        k: usize,
        cost: &[Vec<Option<f64>>],
        rows: usize,
        cols: usize,
        best: &mut Option<(usize, f64)>,
    ) {
        let n = perm.len();
        if k == n {
            let mut cardinality = 0usize;
            let mut total = 0.0;
            for (r, &c) in perm.iter().enumerate() {
                if r < rows && c < cols {
                    if let Some(v) = cost[r][c] {
                        cardinality += 1;
                        total += v;
                    }
                }
            }
            let better = match best {
                None => true,
                Some((bc, bt)) => cardinality > *bc || (cardinality == *bc && total < *bt),
            };
            if better {
                *best = Some((cardinality, total));
            }
            return;
        }
        for i in k..n {
            perm.swap(k, i);
            visit(perm, k + 1, cost, rows, cols, best);
            perm.swap(k, i);
        }
    }

    visit(&mut perm, 0, cost, rows, cols, &mut best);
    best.unwrap_or((0, 0.0))
}

/// Random rectangular cost matrix with dyadic-rational entries (exactly
/// representable, so optimal totals compare exactly) and a configurable
/// share of forbidden cells.
pub fn random_cost_matrix(rng: &mut ChaCha8Rng, max_dim: usize) -> Vec<Vec<Option<f64>>> {
    let rows = rng.random_range(1..=max_dim);
    let cols = rng.random_range(1..=max_dim);
    let forbid_prob = rng.random_range(0.0..0.5);
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    if rng.random_bool(forbid_prob) {
                        None
                    } else {
                        Some(rng.random_range(-80..=80) as f64 / 4.0)
                    }
                })
                .collect()
        })
        .collect()
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

//! Minimum-cost bipartite assignment with support for rectangular matrices
//! and forbidden cells.
//!
//! The solver pads the matrix to square and replaces forbidden and padding
//! cells by a finite sentinel large enough that any matching using fewer
//! sentinel cells beats any matching using more. The result is therefore a
//! maximum-cardinality matching over admissible cells with minimum total
//! cost among those, in O(n^3).

use super::AssocError;

/// Result of one assignment solve.
#[derive(Debug, Clone, PartialEq)]
pub struct HungarianSolution {
    /// For each row, the column it was assigned to (admissible cells only).
    pub row_to_col: Vec<Option<usize>>,
    /// Sum of the admissible assigned cells, in row order.
    pub total_cost: f64,
}

impl HungarianSolution {
    pub fn cardinality(&self) -> usize {
        self.row_to_col.iter().flatten().count()
    }
}

/// Solves the assignment problem for a rectangular cost matrix where `None`
/// marks a forbidden pair.
pub fn hungarian(cost: &[Vec<Option<f64>>]) -> Result<HungarianSolution, AssocError> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, |r| r.len());
    if cost.iter().any(|r| r.len() != cols) {
        return Err(AssocError::IrregularMatrix);
    }
    if rows == 0 || cols == 0 {
        return Ok(HungarianSolution {
            row_to_col: vec![None; rows],
            total_cost: 0.0,
        });
    }

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for row in cost {
        for &cell in row {
            if let Some(c) = cell {
                if !c.is_finite() {
                    return Err(AssocError::NonFiniteCost(c));
                }
                lo = lo.min(c);
                hi = hi.max(c);
            }
        }
    }
    let dim = rows.max(cols);
    let sentinel = if lo.is_finite() {
        dim as f64 * (hi - lo) + lo.abs() + hi.abs() + 1.0
    } else {
        1.0
    };

    let padded = |r: usize, c: usize| -> f64 {
        if r < rows && c < cols {
            cost[r][c].unwrap_or(sentinel)
        } else {
            sentinel
        }
    };

    // Shortest augmenting path with dual potentials, one phase per row.
    // Index 0 is a virtual column used to root each phase.
    let n = dim;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched_row = vec![0usize; n + 1]; // column -> row (1-based, 0 = free)
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        matched_row[0] = row;
        let mut j0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = padded(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < min_slack[j] {
                        min_slack[j] = cur;
                        way[j] = j0;
                    }
                    if min_slack[j] < delta {
                        delta = min_slack[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        // Augment along the alternating path.
        while j0 != 0 {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
        }
    }

    let mut row_to_col = vec![None; rows];
    for j in 1..=n {
        let r = matched_row[j];
        if r >= 1 {
            let (ri, ci) = (r - 1, j - 1);
            if ri < rows && ci < cols {
                if let Some(_c) = cost[ri][ci] {
                    row_to_col[ri] = Some(ci);
                }
            }
        }
    }
    let total_cost = row_to_col
        .iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| cost[r][c].unwrap()))
        .sum();

    Ok(HungarianSolution {
        row_to_col,
        total_cost,
    })
}

//! Minimum-cost assignment of rows to distinct columns (n <= m).

use crate::error::ParserError;

#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// Column assigned to each row.
    pub row_to_col: Vec<usize>,
    /// Sum of the chosen entries, accumulated in row order.
    pub cost: f64,
}

fn total(cost: &[f64], m: usize, row_to_col: &[usize]) -> f64 {
    row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * m + j])
        .sum()
}

/// Shortest augmenting path with row and column potentials, O(n^2 m).
/// `cost` is row-major `n x m`. Among equally cheap columns the lowest index
/// is taken, so the result is a deterministic function of the matrix.
pub fn hungarian(cost: &[f64], n: usize, m: usize) -> Result<Assignment, ParserError> {
    if n > m {
        return Err(ParserError::Shape { rows: n, cols: m });
    }
    assert_eq!(cost.len(), n * m);
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(ParserError::NonFiniteCost);
    }
    if n == 0 {
        return Ok(Assignment {
            row_to_col: Vec::new(),
            cost: 0.0,
        });
    }
    let c = |i: usize, j: usize| cost[(i - 1) * m + (j - 1)];
    // 1-based; column 0 is a virtual column holding the row being inserted
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = c(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    Ok(Assignment {
        cost: total(cost, m, &row_to_col),
        row_to_col,
    })
}

/// Exhaustive search over all injections; for testing small instances.
pub fn brute_force(cost: &[f64], n: usize, m: usize) -> Assignment {
    fn rec(
        cost: &[f64],
        m: usize,
        row: usize,
        n: usize,
        used: &mut [bool],
        cur: &mut Vec<usize>,
        best: &mut Option<Assignment>,
    ) {
        if row == n {
            let c = total(cost, m, cur);
            if best.as_ref().is_none_or(|b| c < b.cost) {
                *best = Some(Assignment {
                    row_to_col: cur.clone(),
                    cost: c,
                });
            }
            return;
        }
        for j in 0..m {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                rec(cost, m, row + 1, n, used, cur, best);
                cur.pop();
                used[j] = false;
            }
        }
    }
    assert!(n <= m);
    let mut best = None;
    rec(
        cost,
        m,
        0,
        n,
        &mut vec![false; m],
        &mut Vec::new(),
        &mut best,
    );
    best.unwrap_or(Assignment {
        row_to_col: Vec::new(),
        cost: 0.0,
    })
}

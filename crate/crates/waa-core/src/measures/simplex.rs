//! A small dense simplex solver for the Fortet–Mourier linear programs.
//!
//! Solves `maximize cᵀz subject to Az ≤ b, z ≥ 0` with all `b ≥ 0`, so the
//! slack basis is feasible and no phase-1 is needed. Bland's pivoting rule
//! guarantees termination. Problem sizes here are a few thousand rows at
//! most, so a dense tableau is adequate.

/// Returns the optimal objective value. The caller guarantees `b ≥ 0` and a
/// bounded optimum; an unbounded column is a caller bug and panics.
pub(crate) fn solve_lp_max(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> f64 {
    let m = a.len();
    let n = c.len();
    debug_assert!(b.iter().all(|x| *x >= 0.0));
    debug_assert!(a.iter().all(|row| row.len() == n));

    // Tableau: m constraint rows + 1 objective row; columns are the n
    // structural variables, m slacks, and the RHS.
    let cols = n + m + 1;
    let mut t = vec![vec![0.0f64; cols]; m + 1];
    for (i, row) in a.iter().enumerate() {
        t[i][..n].copy_from_slice(row);
        t[i][n + i] = 1.0;
        t[i][cols - 1] = b[i];
    }
    for j in 0..n {
        t[m][j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    const TOL: f64 = 1e-11;
    // Bland: entering variable = lowest index with negative reduced cost.
    while let Some(pivot_col) = (0..n + m).find(|j| t[m][*j] < -TOL) {
        // Leaving row: minimum ratio, ties by lowest basis variable index.
        let mut pivot_row: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            if t[i][pivot_col] > TOL {
                let ratio = t[i][cols - 1] / t[i][pivot_col];
                let better = match pivot_row {
                    None => true,
                    Some(r) => {
                        ratio < best_ratio - TOL
                            || (ratio < best_ratio + TOL && basis[i] < basis[r])
                    }
                };
                if better {
                    pivot_row = Some(i);
                    best_ratio = ratio;
                }
            }
        }
        let r = pivot_row.expect("LP is bounded by construction");
        let piv = t[r][pivot_col];
        for v in t[r].iter_mut() {
            *v /= piv;
        }
        for i in 0..=m {
            if i != r {
                let factor = t[i][pivot_col];
                if factor != 0.0 {
                    // Rows i and r alias the same tableau; keep the index loop.
                    #[allow(clippy::needless_range_loop)]
                    for j in 0..cols {
                        t[i][j] -= factor * t[r][j];
                    }
                }
            }
        }
        basis[r] = pivot_col;
    }
    t[m][cols - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_textbook_problem() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → 36 at (2, 6).
        let v = solve_lp_max(
            &[3.0, 5.0],
            &[
                vec![1.0, 0.0],
                vec![0.0, 2.0],
                vec![3.0, 2.0],
            ],
            &[4.0, 12.0, 18.0],
        );
        assert!((v - 36.0).abs() < 1e-9);
    }

    #[test]
    fn zero_objective_on_degenerate_rhs() {
        let v = solve_lp_max(&[1.0], &[vec![1.0]], &[0.0]);
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn handles_equality_via_opposing_rows() {
        // max x s.t. x ≤ 2, -x ≤ -0? keep b ≥ 0: x + y ≤ 3, x ≤ 2 → 2.
        let v = solve_lp_max(&[1.0, 0.0], &[vec![1.0, 1.0], vec![1.0, 0.0]], &[3.0, 2.0]);
        assert!((v - 2.0).abs() < 1e-9);
    }
}

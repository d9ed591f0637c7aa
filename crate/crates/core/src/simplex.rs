//! A small dense linear-programming layer: two-phase primal simplex with
//! Bland's rule, plus basic-feasible-solution enumeration.
//!
//! Problems solved here are tiny (tens of rows, at most a few hundred
//! columns) and well scaled, so a dense tableau with deterministic pivoting
//! is both exact enough and fast enough. Bland's rule guarantees termination
//! under degeneracy and makes every result reproducible bit for bit.
//!
//! All problems are in standard equality form: minimize `c . x` subject to
//! `A x = b`, `x >= 0`.

/// Reduced-cost threshold for optimality.
const COST_TOL: f64 = 1e-9;
/// Smallest pivot magnitude accepted during elimination.
const PIVOT_TOL: f64 = 1e-10;
/// Phase-1 objective at or below this counts as feasible.
const FEAS_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, thiserror::Error)]
pub(crate) enum LpError {
    #[error("infeasible (phase-1 residual {0:.3e})")]
    Infeasible(f64),
    #[error("objective unbounded below")]
    Unbounded,
}

struct Tableau {
    m: usize,
    /// Total columns (structural + artificial), excluding the rhs.
    n_total: usize,
    n_struct: usize,
    /// `m` rows of length `n_total + 1`; last entry is the rhs.
    rows: Vec<Vec<f64>>,
    /// Cost row of length `n_total + 1`; last entry is `-objective`.
    cost: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, j: usize) {
        let piv = self.rows[r][j];
        for v in self.rows[r].iter_mut() {
            *v /= piv;
        }
        for i in 0..self.m {
            if i != r {
                let factor = self.rows[i][j];
                if factor != 0.0 {
                    for k in 0..=self.n_total {
                        self.rows[i][k] -= factor * self.rows[r][k];
                    }
                }
            }
        }
        let factor = self.cost[j];
        if factor != 0.0 {
            for k in 0..=self.n_total {
                self.cost[k] -= factor * self.rows[r][k];
            }
        }
        self.basis[r] = j;
    }

    /// Runs simplex iterations to optimality with Bland's rule. Columns with
    /// `allowed[j] == false` never enter the basis.
    fn iterate(&mut self, allowed: &[bool]) -> Result<(), LpError> {
        loop {
            // Bland: entering column is the lowest-index negative reduced cost.
            let mut entering = None;
            for j in 0..self.n_total {
                if allowed[j] && self.cost[j] < -COST_TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else { return Ok(()) };
            // Ratio test; ties broken by the lowest basis variable index.
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let a = self.rows[r][j];
                if a > PIVOT_TOL {
                    let ratio = self.rows[r][self.n_total] / a;
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - 1e-12
                                || ((ratio - bratio).abs() <= 1e-12
                                    && self.basis[r] < self.basis[br])
                            {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Err(LpError::Unbounded);
            };
            self.pivot(r, j);
        }
    }
}

/// Minimizes `c . x` over `A x = b`, `x >= 0`.
pub(crate) fn solve_min(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution, LpError> {
    let m = a.len();
    let n = c.len();
    debug_assert!(a.iter().all(|row| row.len() == n));
    debug_assert_eq!(b.len(), m);

    let n_total = n + m;
    let mut rows = Vec::with_capacity(m);
    for r in 0..m {
        // Flip rows so the rhs is nonnegative, then append the artificial
        // identity and the rhs.
        let sign = if b[r] < 0.0 { -1.0 } else { 1.0 };
        let mut row: Vec<f64> = a[r].iter().map(|&v| sign * v).collect();
        row.resize(n_total + 1, 0.0);
        row[n + r] = 1.0;
        row[n_total] = sign * b[r];
        rows.push(row);
    }

    // Phase 1: minimize the sum of artificials, whose reduced cost row under
    // the all-artificial basis is the negated column sum.
    let mut cost = vec![0.0; n_total + 1];
    for j in 0..=n_total {
        let mut s = 0.0;
        for r in 0..m {
            s += rows[r][j];
        }
        if j < n {
            cost[j] = -s;
        } else if j == n_total {
            cost[j] = -s;
        }
        // Artificial columns keep reduced cost 0 under their own basis.
    }
    let mut t = Tableau {
        m,
        n_total,
        n_struct: n,
        rows,
        cost,
        basis: (n..n_total).collect(),
    };
    let allowed_all: Vec<bool> = vec![true; n_total];
    t.iterate(&allowed_all)?;
    let phase1 = -t.cost[t.n_total];
    if phase1 > FEAS_TOL {
        return Err(LpError::Infeasible(phase1));
    }

    // Drive remaining basic artificials out of the basis; rows where no
    // structural column can pivot are redundant constraints.
    let mut drop_rows = Vec::new();
    for r in 0..t.m {
        if t.basis[r] >= n {
            let mut pivot_col = None;
            for j in 0..n {
                if t.rows[r][j].abs() > PIVOT_TOL {
                    pivot_col = Some(j);
                    break;
                }
            }
            match pivot_col {
                Some(j) => t.pivot(r, j),
                None => drop_rows.push(r),
            }
        }
    }
    if !drop_rows.is_empty() {
        for &r in drop_rows.iter().rev() {
            t.rows.remove(r);
            t.basis.remove(r);
        }
        t.m -= drop_rows.len();
    }

    // Phase 2: rebuild the reduced cost row for the real objective and bar
    // artificial columns from entering.
    let mut cost = vec![0.0; n_total + 1];
    for j in 0..n {
        cost[j] = c[j];
    }
    for r in 0..t.m {
        let cb = if t.basis[r] < n { c[t.basis[r]] } else { 0.0 };
        if cb != 0.0 {
            for k in 0..=n_total {
                cost[k] -= cb * t.rows[r][k];
            }
        }
    }
    t.cost = cost;
    let mut allowed = vec![true; n_total];
    for flag in allowed.iter_mut().skip(n) {
        *flag = false;
    }
    t.iterate(&allowed)?;

    let mut x = vec![0.0; n];
    for r in 0..t.m {
        if t.basis[r] < n {
            x[t.basis[r]] = t.rows[r][t.n_total].max(0.0);
        }
    }
    let objective = x.iter().zip(c).map(|(xi, ci)| xi * ci).sum();
    let _ = t.n_struct;
    Ok(LpSolution { x, objective })
}

/// The lexicographically smallest optimizer of `min c . x` over
/// `A x = b, x >= 0`: coordinates are minimized one by one over the optimal
/// face, each minimum then pinned by an equality row. Falls back to the best
/// incumbent if a refinement step goes numerically infeasible.
pub(crate) fn lex_smallest_optimum(
    c: &[f64],
    a: &[Vec<f64>],
    b: &[f64],
) -> Result<Vec<f64>, LpError> {
    let n = c.len();
    let first = solve_min(c, a, b)?;
    let mut rows: Vec<Vec<f64>> = a.to_vec();
    let mut rhs: Vec<f64> = b.to_vec();
    rows.push(c.to_vec());
    rhs.push(first.objective);
    let mut best = first.x;
    for j in 0..n {
        let mut ej = vec![0.0; n];
        ej[j] = 1.0;
        match solve_min(&ej, &rows, &rhs) {
            Ok(sol) => {
                let vj = sol.objective.max(0.0);
                rows.push(ej);
                rhs.push(vj);
                best = sol.x;
            }
            // Accumulated pinning can drift infeasible at floating point;
            // the incumbent is already optimal, keep it.
            Err(_) => return Ok(best),
        }
    }
    Ok(best)
}

/// `C(n, r)` in floating point, saturating; used to budget enumeration.
pub(crate) fn binomial(n: usize, r: usize) -> f64 {
    if r > n {
        return 0.0;
    }
    let r = r.min(n - r);
    let mut acc = 1.0f64;
    for i in 0..r {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
        if acc > 1e15 {
            return f64::INFINITY;
        }
    }
    acc
}

/// Enumerates the vertices (basic feasible solutions) of
/// `{x >= 0 : A x = b}` by solving every full-rank square subsystem.
/// Returns `None` when `C(n, rank)` exceeds `max_bases`. Vertices are
/// deduplicated within `1e-9` (max norm) and sorted lexicographically.
pub(crate) fn enumerate_basic_feasible(
    a: &[Vec<f64>],
    b: &[f64],
    max_bases: f64,
) -> Option<Vec<Vec<f64>>> {
    let n = a.first().map_or(0, |r| r.len());
    let (red_a, red_b) = independent_rows(a, b);
    let rank = red_a.len();
    if rank == 0 {
        return Some(vec![vec![0.0; n]]);
    }
    if binomial(n, rank) > max_bases {
        return None;
    }

    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let mut cols: Vec<usize> = (0..rank).collect();
    loop {
        if let Some(xs) = solve_subsystem(&red_a, &red_b, &cols) {
            let mut x = vec![0.0; n];
            let mut ok = true;
            for (i, &cj) in cols.iter().enumerate() {
                if xs[i] < -1e-10 {
                    ok = false;
                    break;
                }
                x[cj] = xs[i].max(0.0);
            }
            // Guard against elimination drift with a residual check on the
            // full original system.
            if ok {
                for (row, &bv) in a.iter().zip(b) {
                    let lhs: f64 = row.iter().zip(&x).map(|(ai, xi)| ai * xi).sum();
                    if (lhs - bv).abs() > 1e-8 {
                        ok = false;
                        break;
                    }
                }
            }
            if ok && !vertices.iter().any(|v| max_dist(v, &x) <= 1e-9) {
                vertices.push(x);
            }
        }
        if !next_combination(&mut cols, n) {
            break;
        }
    }
    vertices.sort_by(|u, v| {
        u.iter()
            .zip(v)
            .find_map(|(a, b)| a.partial_cmp(b).filter(|o| o.is_ne()))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Some(vertices)
}

/// Reduces `(A | b)` to a maximal set of independent rows by Gaussian
/// elimination with partial pivoting.
pub(crate) fn independent_rows(a: &[Vec<f64>], b: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let m = a.len();
    let n = a.first().map_or(0, |r| r.len());
    let mut work: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bv)| {
            let mut r = row.clone();
            r.push(bv);
            r
        })
        .collect();
    let mut rank_rows: Vec<Vec<f64>> = Vec::new();
    let mut pivot_row = 0;
    for col in 0..n {
        if pivot_row >= m {
            break;
        }
        let (best, mag) = (pivot_row..m)
            .map(|r| (r, work[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if mag <= PIVOT_TOL {
            continue;
        }
        work.swap(pivot_row, best);
        for r in pivot_row + 1..m {
            let f = work[r][col] / work[pivot_row][col];
            if f != 0.0 {
                for k in col..=n {
                    work[r][k] -= f * work[pivot_row][k];
                }
            }
        }
        pivot_row += 1;
    }
    for row in work.into_iter().take(pivot_row) {
        rank_rows.push(row);
    }
    let b_out = rank_rows.iter().map(|r| r[n]).collect();
    let a_out = rank_rows
        .into_iter()
        .map(|mut r| {
            r.pop();
            r
        })
        .collect();
    (a_out, b_out)
}

/// Solves the square system restricted to `cols`; `None` when singular.
fn solve_subsystem(a: &[Vec<f64>], b: &[f64], cols: &[usize]) -> Option<Vec<f64>> {
    let r = cols.len();
    let mut mat: Vec<Vec<f64>> = (0..r)
        .map(|i| {
            let mut row: Vec<f64> = cols.iter().map(|&c| a[i][c]).collect();
            row.push(b[i]);
            row
        })
        .collect();
    for col in 0..r {
        let (best, mag) = (col..r)
            .map(|i| (i, mat[i][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if mag <= PIVOT_TOL {
            return None;
        }
        mat.swap(col, best);
        for i in 0..r {
            if i != col {
                let f = mat[i][col] / mat[col][col];
                if f != 0.0 {
                    for k in col..=r {
                        mat[i][k] -= f * mat[col][k];
                    }
                }
            }
        }
    }
    Some((0..r).map(|i| mat[i][r] / mat[i][i]).collect())
}

/// Inverts a small square matrix by Gauss-Jordan elimination with partial
/// pivoting; `None` when singular.
pub(crate) fn invert_small(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut aug: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.resize(2 * n, 0.0);
            r[n + i] = 1.0;
            r
        })
        .collect();
    for col in 0..n {
        let (best, mag) = (col..n)
            .map(|i| (i, aug[i][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if mag <= PIVOT_TOL {
            return None;
        }
        aug.swap(col, best);
        let piv = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= piv;
        }
        for i in 0..n {
            if i != col {
                let f = aug[i][col];
                if f != 0.0 {
                    for k in 0..2 * n {
                        aug[i][k] -= f * aug[col][k];
                    }
                }
            }
        }
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

fn next_combination(cols: &mut [usize], n: usize) -> bool {
    let r = cols.len();
    let mut i = r;
    while i > 0 {
        i -= 1;
        if cols[i] < n - r + i {
            cols[i] += 1;
            for k in i + 1..r {
                cols[k] = cols[k - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn max_dist(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn solves_a_transport_style_program() {
        // min x2 + 2 x3 over the simplex: optimum at e_1.
        let c = vec![0.0, 1.0, 2.0];
        let a = vec![vec![1.0, 1.0, 1.0]];
        let b = vec![1.0];
        let sol = solve_min(&c, &a, &b).unwrap();
        assert_abs_diff_eq!(sol.objective, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let b = vec![1.0, 2.0];
        assert!(matches!(
            solve_min(&[0.0, 0.0], &a, &b),
            Err(LpError::Infeasible(_))
        ));

        let a = vec![vec![0.0, 1.0]];
        let b = vec![1.0];
        assert!(matches!(
            solve_min(&[-1.0, 0.0], &a, &b),
            Err(LpError::Unbounded)
        ));
    }

    #[test]
    fn handles_redundant_rows() {
        // Same constraint twice: rank 1, still solvable.
        let a = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        let b = vec![1.0, 2.0];
        let sol = solve_min(&[1.0, 0.0], &a, &b).unwrap();
        assert_abs_diff_eq!(sol.objective, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.x[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn negative_rhs_rows_are_flipped() {
        let a = vec![vec![-1.0, -1.0]];
        let b = vec![-1.0];
        let sol = solve_min(&[1.0, 2.0], &a, &b).unwrap();
        assert_abs_diff_eq!(sol.objective, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn lexicographic_refinement_picks_the_smallest_optimizer() {
        // Optimal face is {x3 = 0, x1 + x2 = 1}; lex-min is (0, 1, 0).
        let c = vec![0.0, 0.0, 1.0];
        let a = vec![vec![1.0, 1.0, 1.0]];
        let b = vec![1.0];
        let x = lex_smallest_optimum(&c, &a, &b).unwrap();
        assert_abs_diff_eq!(x[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(x[2], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn enumerates_simplex_vertices() {
        let a = vec![vec![1.0, 1.0, 1.0]];
        let b = vec![1.0];
        let vs = enumerate_basic_feasible(&a, &b, 100.0).unwrap();
        assert_eq!(vs.len(), 3);
        assert_eq!(vs[0], vec![0.0, 0.0, 1.0]);
        assert_eq!(vs[2], vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn enumeration_respects_the_budget() {
        let a = vec![vec![1.0; 30]];
        let b = vec![1.0];
        assert!(enumerate_basic_feasible(&a, &b, 10.0).is_none());
    }

    #[test]
    fn enumerates_a_segment() {
        // q0 = q2, q0 + q1 + q2 = 1 => segment from (0,1,0) to (.5,0,.5).
        let a = vec![vec![1.0, 0.0, -1.0], vec![1.0, 1.0, 1.0]];
        let b = vec![0.0, 1.0];
        let vs = enumerate_basic_feasible(&a, &b, 100.0).unwrap();
        assert_eq!(vs.len(), 2);
        assert_abs_diff_eq!(vs[0][1], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(vs[1][0], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn binomial_saturates() {
        assert_abs_diff_eq!(binomial(8, 4), 70.0, epsilon = 1e-9);
        assert_eq!(binomial(300, 150), f64::INFINITY);
    }
}

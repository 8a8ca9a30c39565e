//! Dense two-phase simplex for the small linear programs assembled by the
//! regret-constant solver. Problems here have tens of variables and
//! constraints, so a tableau method with Bland's rule is plenty.

/// Constraint sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Sense {
    Le,
    Ge,
    Eq,
}

/// One linear constraint `coeffs · x  sense  rhs`.
#[derive(Debug, Clone)]
pub(crate) struct Constraint {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

/// LP outcome.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

const EPS: f64 = 1e-9;

/// Maximizes `objective · x` subject to `constraints` and `x >= 0`.
pub(crate) fn maximize(objective: &[f64], constraints: &[Constraint]) -> LpOutcome {
    let n = objective.len();
    let m = constraints.len();

    // normalize to nonnegative rhs so artificials start feasible
    let mut rows: Vec<Constraint> = constraints.to_vec();
    for row in rows.iter_mut() {
        debug_assert_eq!(row.coeffs.len(), n);
        if row.rhs < 0.0 {
            for c in row.coeffs.iter_mut() {
                *c = -*c;
            }
            row.rhs = -row.rhs;
            row.sense = match row.sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }

    let n_slack = rows.iter().filter(|r| r.sense != Sense::Eq).count();
    let n_art = rows.iter().filter(|r| r.sense != Sense::Le).count();
    let total = n + n_slack + n_art;

    // tableau: m rows of [coeffs | slack | artificial | rhs]
    let width = total + 1;
    let mut tab = vec![0.0; m * width];
    let mut basis = vec![usize::MAX; m];
    let mut slack_idx = n;
    let mut art_idx = n + n_slack;
    let mut artificials = Vec::new();

    for (i, row) in rows.iter().enumerate() {
        let r = &mut tab[i * width..(i + 1) * width];
        r[..n].copy_from_slice(&row.coeffs);
        r[total] = row.rhs;
        match row.sense {
            Sense::Le => {
                r[slack_idx] = 1.0;
                basis[i] = slack_idx;
                slack_idx += 1;
            }
            Sense::Ge => {
                r[slack_idx] = -1.0;
                slack_idx += 1;
                r[art_idx] = 1.0;
                basis[i] = art_idx;
                artificials.push(art_idx);
                art_idx += 1;
            }
            Sense::Eq => {
                r[art_idx] = 1.0;
                basis[i] = art_idx;
                artificials.push(art_idx);
                art_idx += 1;
            }
        }
    }

    // phase 1: minimize the sum of artificials
    if !artificials.is_empty() {
        let mut cost = vec![0.0; width];
        for &a in &artificials {
            cost[a] = -1.0;
        }
        // price out the basic artificials
        for i in 0..m {
            if artificials.contains(&basis[i]) {
                for j in 0..width {
                    cost[j] += tab[i * width + j];
                }
            }
        }
        if !pivot_until_optimal(&mut tab, &mut basis, &mut cost, m, total) {
            // phase 1 of a bounded-below objective cannot be unbounded
            return LpOutcome::Infeasible;
        }
        if cost[total] > EPS {
            return LpOutcome::Infeasible;
        }
        // drive any artificial still in the basis out of it
        for i in 0..m {
            if artificials.contains(&basis[i]) {
                let pivot_col = (0..n + n_slack)
                    .find(|&j| tab[i * width + j].abs() > EPS);
                match pivot_col {
                    Some(j) => pivot(&mut tab, &mut basis, m, width, i, j),
                    None => {
                        // redundant row; zero it
                        for j in 0..width {
                            tab[i * width + j] = 0.0;
                        }
                        basis[i] = usize::MAX;
                    }
                }
            }
        }
    }

    // phase 2: maximize the real objective with artificial columns frozen
    let mut cost = vec![0.0; width];
    cost[..n].copy_from_slice(objective);
    for &a in &artificials {
        cost[a] = f64::NEG_INFINITY; // never re-enter
    }
    // price out current basis
    for i in 0..m {
        let b = basis[i];
        if b != usize::MAX && cost[b].is_finite() && cost[b] != 0.0 {
            let factor = cost[b];
            for j in 0..width {
                cost[j] -= factor * tab[i * width + j];
            }
        }
    }
    if !pivot_until_optimal(&mut tab, &mut basis, &mut cost, m, n + n_slack) {
        return LpOutcome::Unbounded;
    }

    let mut x = vec![0.0; n];
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] = tab[i * width + total];
        }
    }
    let value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    LpOutcome::Optimal { x, value }
}

/// Runs simplex pivots (Bland's rule) until no reduced cost is positive.
/// Returns `false` when the problem is unbounded in the pivot direction.
fn pivot_until_optimal(
    tab: &mut [f64],
    basis: &mut [usize],
    cost: &mut [f64],
    m: usize,
    n_pivotable: usize,
) -> bool {
    let width = cost.len();
    let total = width - 1;
    loop {
        // Bland: smallest index with positive reduced cost
        let Some(col) = (0..n_pivotable).find(|&j| cost[j] > EPS) else {
            return true;
        };
        let mut row = usize::MAX;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            let a = tab[i * width + col];
            if a > EPS {
                let ratio = tab[i * width + total] / a;
                if ratio < best_ratio - EPS
                    || (ratio < best_ratio + EPS && (row == usize::MAX || basis[i] < basis[row]))
                {
                    best_ratio = ratio;
                    row = i;
                }
            }
        }
        if row == usize::MAX {
            return false;
        }
        pivot_with_cost(tab, basis, cost, m, width, row, col);
    }
}

fn pivot(tab: &mut [f64], basis: &mut [usize], m: usize, width: usize, row: usize, col: usize) {
    let p = tab[row * width + col];
    for j in 0..width {
        tab[row * width + j] /= p;
    }
    for i in 0..m {
        if i != row {
            let f = tab[i * width + col];
            if f != 0.0 {
                for j in 0..width {
                    let upd = f * tab[row * width + j];
                    tab[i * width + j] -= upd;
                }
            }
        }
    }
    basis[row] = col;
}

fn pivot_with_cost(
    tab: &mut [f64],
    basis: &mut [usize],
    cost: &mut [f64],
    m: usize,
    width: usize,
    row: usize,
    col: usize,
) {
    pivot(tab, basis, m, width, row, col);
    let f = cost[col];
    if f != 0.0 && f.is_finite() {
        for j in 0..width {
            if cost[j].is_finite() {
                cost[j] -= f * tab[row * width + j];
            }
        }
        cost[col] = 0.0;
    }
}

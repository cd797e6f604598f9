//! Dense two-phase simplex for the small feasibility/centering programs
//! behind predicate satisfiability, model synthesis and distance.
//!
//! Problem form: maximize `c . x` subject to `A x <= b` and `x >= 0`.
//! Dimensions here are tiny (a handful of variables, a few dozen rows), so
//! a textbook tableau with Bland's rule is plenty: deterministic, cycle-free
//! and easy to audit.

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum LpResult {
    Infeasible,
    Unbounded,
    Optimal { value: f64, point: Vec<f64> },
}

/// Maximize `c . x` s.t. `rows[i].0 . x <= rows[i].1`, `x >= 0`.
pub fn maximize(c: &[f64], rows: &[(Vec<f64>, f64)]) -> LpResult {
    let n = c.len();
    let m = rows.len();

    // columns: n structural, m slacks, then artificials, then rhs
    let mut art_of_row: Vec<Option<usize>> = vec![None; m];
    let mut num_art = 0;
    for (i, (_, b)) in rows.iter().enumerate() {
        if *b < 0.0 {
            art_of_row[i] = Some(num_art);
            num_art += 1;
        }
    }
    let width = n + m + num_art + 1;
    let rhs = width - 1;

    let mut tab: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut basis: Vec<usize> = Vec::with_capacity(m);
    for (i, (a, b)) in rows.iter().enumerate() {
        assert_eq!(a.len(), n, "row width mismatch");
        let mut row = vec![0.0; width];
        row[..n].copy_from_slice(a);
        row[n + i] = 1.0;
        row[rhs] = *b;
        if let Some(k) = art_of_row[i] {
            for v in row.iter_mut() {
                *v = -*v;
            }
            row[n + m + k] = 1.0;
            basis.push(n + m + k);
        } else {
            basis.push(n + i);
        }
        tab.push(row);
    }

    let mut banned = vec![false; width - 1];

    if num_art > 0 {
        // phase 1: maximize -(sum of artificials)
        let mut obj = vec![0.0; width];
        for k in 0..num_art {
            obj[n + m + k] = 1.0;
        }
        for (i, b) in basis.iter().enumerate() {
            if *b >= n + m {
                for j in 0..width {
                    obj[j] -= tab[i][j];
                }
            }
        }
        if !pivot_loop(&mut tab, &mut basis, &mut obj, &banned) {
            // phase 1 of a bounded-below objective cannot be unbounded
            return LpResult::Infeasible;
        }
        if obj[rhs] < -EPS {
            return LpResult::Infeasible;
        }
        // drive artificials out of the basis where possible
        for i in 0..m {
            if basis[i] >= n + m {
                let mut entered = false;
                for j in 0..(n + m) {
                    if tab[i][j].abs() > EPS {
                        pivot(&mut tab, &mut basis, &mut vec![0.0; width], i, j);
                        entered = true;
                        break;
                    }
                }
                if !entered {
                    // redundant row; leave the artificial basic at level zero
                }
            }
        }
        for k in 0..num_art {
            banned[n + m + k] = true;
        }
    }

    // phase 2
    let mut obj = vec![0.0; width];
    for j in 0..n {
        obj[j] = -c[j];
    }
    for i in 0..m {
        let b = basis[i];
        if b < width - 1 && obj[b].abs() > EPS {
            let f = obj[b];
            for j in 0..width {
                obj[j] -= f * tab[i][j];
            }
        }
    }
    if !pivot_loop(&mut tab, &mut basis, &mut obj, &banned) {
        return LpResult::Unbounded;
    }

    let mut point = vec![0.0; n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            point[b] = tab[i][rhs];
        }
    }
    LpResult::Optimal {
        value: obj[rhs],
        point,
    }
}

/// Bland-rule pivoting until optimal; returns false when unbounded.
fn pivot_loop(
    tab: &mut Vec<Vec<f64>>,
    basis: &mut Vec<usize>,
    obj: &mut Vec<f64>,
    banned: &[bool],
) -> bool {
    let width = obj.len();
    let rhs = width - 1;
    loop {
        // entering: smallest index with negative reduced cost
        let mut enter = None;
        for j in 0..rhs {
            if !banned[j] && obj[j] < -EPS {
                enter = Some(j);
                break;
            }
        }
        let Some(j) = enter else {
            return true;
        };
        // leaving: min ratio, ties by smallest basis index
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..tab.len() {
            if tab[i][j] > EPS {
                let ratio = tab[i][rhs] / tab[i][j];
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - EPS || (ratio < lr + EPS && basis[i] < basis[li]) {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((i, _)) = leave else {
            return false;
        };
        pivot(tab, basis, obj, i, j);
    }
}

fn pivot(
    tab: &mut Vec<Vec<f64>>,
    basis: &mut Vec<usize>,
    obj: &mut Vec<f64>,
    row: usize,
    col: usize,
) {
    let width = tab[row].len();
    let p = tab[row][col];
    for v in tab[row].iter_mut() {
        *v /= p;
    }
    for i in 0..tab.len() {
        if i != row && tab[i][col].abs() > EPS {
            let f = tab[i][col];
            for j in 0..width {
                tab[i][j] -= f * tab[row][j];
            }
        }
    }
    if obj[col].abs() > EPS {
        let f = obj[col];
        for j in 0..width {
            obj[j] -= f * tab[row][j];
        }
    }
    basis[row] = col;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opt(r: LpResult) -> (f64, Vec<f64>) {
        match r {
            LpResult::Optimal { value, point } => (value, point),
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn simple_bound() {
        let (v, x) = opt(maximize(&[1.0], &[(vec![1.0], 5.0)]));
        assert!((v - 5.0).abs() < 1e-7);
        assert!((x[0] - 5.0).abs() < 1e-7);
    }

    #[test]
    fn two_vars() {
        // max x + y s.t. x <= 3, y <= 4, x + y <= 5
        let (v, _) = opt(maximize(
            &[1.0, 1.0],
            &[
                (vec![1.0, 0.0], 3.0),
                (vec![0.0, 1.0], 4.0),
                (vec![1.0, 1.0], 5.0),
            ],
        ));
        assert!((v - 5.0).abs() < 1e-7);
    }

    #[test]
    fn negative_rhs_feasible() {
        // x >= 2 expressed as -x <= -2, maximize -x: optimum at x = 2
        let (v, x) = opt(maximize(&[-1.0], &[(vec![-1.0], -2.0), (vec![1.0], 10.0)]));
        assert!((v + 2.0).abs() < 1e-7);
        assert!((x[0] - 2.0).abs() < 1e-7);
    }

    #[test]
    fn infeasible() {
        // x <= 1 and x >= 2
        let r = maximize(&[0.0], &[(vec![1.0], 1.0), (vec![-1.0], -2.0)]);
        assert_eq!(r, LpResult::Infeasible);
    }

    #[test]
    fn unbounded() {
        let r = maximize(&[1.0], &[(vec![-1.0], 0.0)]);
        assert_eq!(r, LpResult::Unbounded);
    }

    #[test]
    fn degenerate_point() {
        // x <= 0, -x <= 0 forces x = 0
        let (v, x) = opt(maximize(&[1.0], &[(vec![1.0], 0.0), (vec![-1.0], 0.0)]));
        assert!(v.abs() < 1e-9);
        assert!(x[0].abs() < 1e-9);
    }
}

//! Dense tableau simplex for the small linear programs the geometry layer
//! needs: support functions over polytopes, Chebyshev centres and
//! boundedness certificates. Bland's rule throughout, so termination is
//! guaranteed at the price of speed that does not matter at these sizes.

use crate::{Error, Matrix, Result, Vector};

const PIVOT_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal { point: Vector, value: f64 },
    Unbounded,
}

/// Maximise `<c, x>` over `{x : A x <= b}` starting from a feasible
/// `interior` point. Free variables are split into positive parts after
/// shifting the origin to `interior`, which makes the slack basis feasible.
pub fn maximise(a: &Matrix, b: &Vector, interior: &Vector, c: &Vector) -> Result<LpOutcome> {
    let m = a.nrows();
    let d = a.ncols();
    if b.len() != m || interior.len() != d || c.len() != d {
        return Err(Error::config("lp dimension mismatch"));
    }
    let slack = b - a * interior;
    if slack.iter().any(|s| *s < -1e-9) {
        return Err(Error::precondition("lp start point is infeasible"));
    }

    // Standard form in w = (u, v, s): [A  -A  I] w = b', w >= 0, where
    // x = interior + u - v and b' = clamped slack.
    let n = 2 * d + m;
    let mut tab = vec![vec![0.0f64; n + 1]; m + 1];
    for i in 0..m {
        for j in 0..d {
            tab[i][j] = a[(i, j)];
            tab[i][d + j] = -a[(i, j)];
        }
        tab[i][2 * d + i] = 1.0;
        tab[i][n] = slack[i].max(0.0);
    }
    for j in 0..d {
        tab[m][j] = c[j];
        tab[m][d + j] = -c[j];
    }
    let mut basis: Vec<usize> = (2 * d..2 * d + m).collect();

    for _ in 0..MAX_PIVOTS {
        // Bland: smallest improving column.
        let Some(enter) = (0..n).find(|&j| tab[m][j] > PIVOT_TOL) else {
            let mut x = interior.clone();
            for (i, &bi) in basis.iter().enumerate() {
                if bi < d {
                    x[bi] += tab[i][n];
                } else if bi < 2 * d {
                    x[bi - d] -= tab[i][n];
                }
            }
            let value = c.dot(&x);
            return Ok(LpOutcome::Optimal { point: x, value });
        };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if tab[i][enter] > PIVOT_TOL {
                let ratio = tab[i][n] / tab[i][enter];
                let better = ratio < best - 1e-12
                    || (ratio < best + 1e-12
                        && leave.map_or(true, |l| basis[i] < basis[l]));
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(r) = leave else {
            return Ok(LpOutcome::Unbounded);
        };
        pivot(&mut tab, r, enter);
        basis[r] = enter;
    }
    Err(Error::numerical("simplex pivot budget exhausted"))
}

fn pivot(tab: &mut [Vec<f64>], r: usize, e: usize) {
    let p = tab[r][e];
    for v in tab[r].iter_mut() {
        *v /= p;
    }
    let row_r = tab[r].clone();
    for (i, row) in tab.iter_mut().enumerate() {
        if i == r {
            continue;
        }
        let factor = row[e];
        if factor != 0.0 {
            for (v, pr) in row.iter_mut().zip(row_r.iter()) {
                *v -= factor * pr;
            }
            row[e] = 0.0;
        }
    }
}

/// Centre of the largest inscribed ball of `{A x <= b}`. Errors if the
/// system has empty interior, is contradictory, or admits arbitrarily large
/// balls (which certifies unboundedness).
pub fn chebyshev_centre(a: &Matrix, b: &Vector) -> Result<Vector> {
    let m = a.nrows();
    let d = a.ncols();
    let mut rows: Vec<usize> = Vec::with_capacity(m);
    for i in 0..m {
        let norm = a.row(i).norm();
        if norm == 0.0 {
            if b[i] < 0.0 {
                return Err(Error::Infeasible("contradictory zero row in polytope".into()));
            }
            // Vacuous row; drop it.
        } else {
            rows.push(i);
        }
    }
    if rows.is_empty() {
        return Err(Error::config("polytope has no effective constraints"));
    }
    // Augmented LP over (x, r): maximise r s.t. <a_i, x> + ||a_i|| r <= b_i.
    let mm = rows.len();
    let mut aa = Matrix::zeros(mm, d + 1);
    let mut bb = Vector::zeros(mm);
    for (k, &i) in rows.iter().enumerate() {
        let norm = a.row(i).norm();
        for j in 0..d {
            aa[(k, j)] = a[(i, j)];
        }
        aa[(k, d)] = norm;
        bb[k] = b[i];
    }
    let r0 = rows
        .iter()
        .map(|&i| b[i] / a.row(i).norm())
        .fold(0.0f64, f64::min)
        - 1.0;
    let mut start = Vector::zeros(d + 1);
    start[d] = r0;
    let mut c = Vector::zeros(d + 1);
    c[d] = 1.0;
    match maximise(&aa, &bb, &start, &c)? {
        LpOutcome::Optimal { point, value } => {
            if value <= 1e-10 {
                return Err(Error::config("polytope has empty interior"));
            }
            Ok(point.rows(0, d).into_owned())
        }
        LpOutcome::Unbounded => Err(Error::config("polytope admits arbitrarily large balls")),
    }
}

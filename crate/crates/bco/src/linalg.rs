//! Small dense linear-algebra helpers shared by the geometry and algorithm
//! modules: guarded Cholesky, symmetric eigen utilities, the Moore-Penrose
//! pseudoinverse and the Frank-Wolfe D-optimal design loop.

use crate::{Error, Matrix, Result, Vector};

/// `(A + A^T)/2`. Matrices are symmetrised before any eigen work.
pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

/// Cholesky factor of a symmetric positive-definite matrix, retrying with an
/// escalating diagonal jitter starting at 1e-12.
pub fn cholesky_jitter(a: &Matrix) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let sym = symmetrize(a);
    if let Some(c) = nalgebra::Cholesky::new(sym.clone()) {
        return Ok(c);
    }
    let scale = sym.diagonal().amax().max(1.0);
    let mut jitter = 1e-12 * scale;
    for _ in 0..8 {
        let jittered = &sym + Matrix::identity(sym.nrows(), sym.ncols()) * jitter;
        if let Some(c) = nalgebra::Cholesky::new(jittered) {
            return Ok(c);
        }
        jitter *= 10.0;
    }
    Err(Error::numerical("cholesky failed even with jitter"))
}

/// Solve `A x = b` for symmetric positive-definite `A`.
pub fn solve_spd(a: &Matrix, b: &Vector) -> Result<Vector> {
    Ok(cholesky_jitter(a)?.solve(b))
}

/// Inverse of a symmetric positive-definite matrix.
pub fn inv_spd(a: &Matrix) -> Result<Matrix> {
    Ok(cholesky_jitter(a)?.inverse())
}

/// `v^T M v`.
pub fn quad_form(m: &Matrix, v: &Vector) -> f64 {
    (m * v).dot(v)
}

/// Eigenvalues of the symmetrised matrix, ascending.
pub fn sym_eigenvalues(a: &Matrix) -> Vector {
    let mut ev = symmetrize(a).symmetric_eigen().eigenvalues;
    let mut vals: Vec<f64> = ev.iter().copied().collect();
    vals.sort_by(|x, y| x.total_cmp(y));
    for (slot, v) in ev.iter_mut().zip(vals) {
        *slot = v;
    }
    ev
}

pub fn min_eigenvalue(a: &Matrix) -> f64 {
    sym_eigenvalues(a)[0]
}

/// Symmetric square root with eigenvalues clamped at 1e-12.
pub fn sqrt_spd(a: &Matrix) -> Matrix {
    spectral_map(a, |l| l.max(1e-12).sqrt())
}

/// Inverse symmetric square root with the same clamp.
pub fn inv_sqrt_spd(a: &Matrix) -> Matrix {
    spectral_map(a, |l| 1.0 / l.max(1e-12).sqrt())
}

/// log det of a symmetric positive-definite matrix.
pub fn logdet_spd(a: &Matrix) -> Result<f64> {
    let chol = cholesky_jitter(a)?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

fn spectral_map(a: &Matrix, f: impl Fn(f64) -> f64) -> Matrix {
    let eig = symmetrize(a).symmetric_eigen();
    let mapped = Matrix::from_diagonal(&eig.eigenvalues.map(f));
    &eig.eigenvectors * mapped * eig.eigenvectors.transpose()
}

/// Moore-Penrose pseudoinverse of a symmetric positive-semidefinite matrix.
/// Eigenvalues below `tol * max(|lambda|, 1)` are treated as zero.
pub fn pinv_psd(a: &Matrix, tol: f64) -> Matrix {
    let eig = symmetrize(a).symmetric_eigen();
    let cutoff = tol * eig.eigenvalues.amax().max(1.0);
    let mapped = Matrix::from_diagonal(
        &eig.eigenvalues
            .map(|l| if l.abs() <= cutoff { 0.0 } else { 1.0 / l }),
    );
    &eig.eigenvectors * mapped * eig.eigenvectors.transpose()
}

/// Rank of a symmetric positive-semidefinite matrix under the same cutoff.
pub fn rank_psd(a: &Matrix, tol: f64) -> usize {
    let ev = sym_eigenvalues(a);
    let cutoff = tol * ev.amax().max(1.0);
    ev.iter().filter(|l| l.abs() > cutoff).count()
}

/// Outcome of the Frank-Wolfe D-optimal design loop.
pub struct Design {
    pub weights: Vec<f64>,
    /// `G = sum_i w_i x_i x_i^T`.
    pub design_matrix: Matrix,
    /// `max_i x_i^T G^+ x_i` at termination.
    pub achieved: f64,
    /// Dimension of the span of the support points.
    pub span_dim: usize,
    pub iterations: usize,
}

/// Frank-Wolfe iterations for the D-optimal design on `points`, with away
/// steps on the support point of least leverage when that violation is the
/// larger one. Step sizes follow the Fedorov line search
/// `(kappa/m - 1)/(kappa - 1)`; away steps clip at dropping the point. Stops
/// as soon as `kappa <= m (1 + tol)`. `log det G` never decreases along the
/// way, and the away steps make the approach to the tolerance linear rather
/// than sublinear.
pub fn d_optimal_design(points: &[Vector], tol: f64, max_iter: usize) -> Result<Design> {
    if points.is_empty() {
        return Err(Error::precondition("design needs at least one point"));
    }
    let d = points[0].len();
    let n = points.len();
    let mut weights = vec![1.0 / n as f64; n];

    let gram = |w: &[f64]| -> Matrix {
        let mut g = Matrix::zeros(d, d);
        for (wi, x) in w.iter().zip(points) {
            if *wi > 0.0 {
                g.ger(*wi, x, x, 1.0);
            }
        }
        symmetrize(&g)
    };

    let mut g = gram(&weights);
    let span_dim = {
        let mut full = Matrix::zeros(d, d);
        for x in points {
            full.ger(1.0, x, x, 1.0);
        }
        rank_psd(&full, 1e-10)
    };
    let m = span_dim as f64;

    let full_span = span_dim == d;
    let mut ginv = pinv_psd(&g, 1e-12);
    let mut iterations = 0;
    let mut achieved = f64::INFINITY;
    let mut stall_kappa = f64::INFINITY;
    for it in 0..max_iter {
        iterations = it;
        if full_span && it % 512 == 0 && it > 0 {
            // Periodic refresh against Sherman-Morrison drift.
            g = gram(&weights);
            ginv = inv_spd(&g)?;
        }
        let (mut kappa, mut arg) = (f64::NEG_INFINITY, 0);
        let (mut kappa_lo, mut arg_lo) = (f64::INFINITY, usize::MAX);
        for (i, x) in points.iter().enumerate() {
            let lev = quad_form(&ginv, x);
            if lev > kappa {
                kappa = lev;
                arg = i;
            }
            if weights[i] > 1e-14 && lev < kappa_lo {
                kappa_lo = lev;
                arg_lo = i;
            }
        }
        achieved = kappa;
        if kappa <= m * (1.0 + tol) {
            break;
        }
        if it % 512 == 0 && it > 0 {
            // No measurable progress over a whole window: the tolerance is
            // out of numerical reach, so stop with the current design.
            if kappa > stall_kappa * (1.0 - 1e-10) {
                break;
            }
            stall_kappa = kappa;
        }
        let add = arg_lo == usize::MAX || kappa - m >= m - kappa_lo;
        let (idx, lev, gamma) = if add {
            let gamma = ((kappa / m - 1.0) / (kappa - 1.0)).clamp(0.0, 1.0);
            (arg, kappa, gamma)
        } else {
            let drop_all = -weights[arg_lo] / (1.0 - weights[arg_lo]).max(1e-14);
            let mut gamma = if kappa_lo > 1.0 + 1e-12 {
                ((kappa_lo / m - 1.0) / (kappa_lo - 1.0)).max(drop_all)
            } else {
                drop_all
            };
            if kappa_lo > 1.0 {
                // Keep the downdated matrix clear of singularity.
                gamma = gamma.max((1e-9 - 1.0) / (kappa_lo - 1.0));
            }
            (arg_lo, kappa_lo, gamma.min(0.0))
        };
        if gamma == 0.0 {
            break;
        }
        for w in weights.iter_mut() {
            *w *= 1.0 - gamma;
        }
        weights[idx] = (weights[idx] + gamma).max(0.0);
        if full_span && gamma < 1.0 {
            let x = &points[idx];
            let gx = &ginv * x;
            let denom = (1.0 - gamma) + gamma * lev;
            ginv.ger(-gamma / denom, &gx, &gx, 1.0);
            ginv /= 1.0 - gamma;
            g *= 1.0 - gamma;
            g.ger(gamma, x, x, 1.0);
        } else {
            g = gram(&weights);
            ginv = pinv_psd(&g, 1e-12);
        }
    }

    Ok(Design {
        weights,
        design_matrix: g,
        achieved,
        span_dim,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat2(a: f64, b: f64, c: f64, d: f64) -> Matrix {
        Matrix::from_row_slice(2, 2, &[a, b, c, d])
    }

    #[test]
    fn pseudoinverse_of_projector_is_itself() {
        let p = mat2(1.0, 0.0, 0.0, 0.0);
        let pinv = pinv_psd(&p, 1e-10);
        assert!((pinv - p).norm() < 1e-12, "rank-1 projector is self-pseudoinverse");
    }

    #[test]
    fn sqrt_roundtrip() {
        let a = mat2(4.0, 1.0, 1.0, 3.0);
        let s = sqrt_spd(&a);
        assert!((&s * &s - &a).norm() < 1e-9, "sqrt squared must reproduce the matrix");
    }

    #[test]
    fn design_on_basis_is_uniform() {
        let pts: Vec<Vector> = (0..3)
            .map(|i| {
                let mut e = Vector::zeros(3);
                e[i] = 1.0;
                e
            })
            .collect();
        let design = d_optimal_design(&pts, 1e-9, 10_000).unwrap();
        for w in &design.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-6, "basis design should be uniform, got {w}");
        }
        assert!(design.achieved <= 3.0 * (1.0 + 1e-9) + 1e-9);
    }

    #[test]
    fn design_value_is_span_dim_for_antipodal_pair() {
        let v = Vector::from_vec(vec![0.3, -0.4, 0.5]);
        let pts = vec![v.clone(), -v];
        let design = d_optimal_design(&pts, 0.05, 1000).unwrap();
        assert_eq!(design.span_dim, 1);
        assert!(design.achieved <= 1.0 + 0.05 + 1e-9, "rank-1 family has design value 1");
    }
}

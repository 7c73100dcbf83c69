//! Dense helpers shared by the pipeline: sorted spectra, ranks, sign conventions.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub fn is_zero(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| *x == 0.0)
}

pub fn sym_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map(|x| x.len()).unwrap_or(0);
    if rows.iter().any(|x| x.len() != c) {
        return None;
    }
    Some(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

/// Singular values in decreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// σ_min/σ_max of a square matrix; 0 for a zero matrix, 1 for an empty one.
pub fn cond_ratio(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        (Some(_), _) => 0.0,
        _ => 1.0,
    }
}

/// σ_min/σ_max of a square matrix after a symmetric diagonal equilibration by row maxima.
///
/// The ratio is invariant to how the valuation blocks happen to be scaled,
/// so it measures structural singularity rather than magnitude spread.
pub fn equilibrated_cond_ratio(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let d: Vec<f64> = (0..n)
        .map(|i| {
            let mx = m.row(i).iter().fold(0.0f64, |a, x| a.max(x.abs()));
            if mx > 0.0 {
                1.0 / mx.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let e = DMatrix::from_fn(n, n, |i, j| m[(i, j)] * d[i] * d[j]);
    cond_ratio(&e)
}

pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(m);
    let thr = s.first().copied().unwrap_or(0.0) * rel_tol;
    s.iter().filter(|x| **x > thr).count()
}

/// Flips each column so that its first non-negligible component is positive.
pub fn fix_signs(v: &mut DMatrix<f64>) {
    for j in 0..v.ncols() {
        let mx = v.column(j).iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let thr = 1e-10 * mx;
        if let Some(first) = v.column(j).iter().copied().find(|x| x.abs() > thr) {
            if first < 0.0 {
                v.column_mut(j).neg_mut();
            }
        }
    }
}

/// Symmetric eigendecomposition with eigenvalues in decreasing (signed) order.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(sym_part(m));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
    fix_signs(&mut vecs);
    (vals, vecs)
}

/// Eigenpairs whose magnitude exceeds `rel_tol` times the largest magnitude.
pub fn nonzero_eigenpairs(m: &DMatrix<f64>, rel_tol: f64) -> (Vec<f64>, DMatrix<f64>) {
    let (vals, vecs) = sym_eigen_desc(m);
    let top = vals.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| top > 0.0 && vals[i].abs() > rel_tol * top).collect();
    let v = DMatrix::from_fn(m.nrows(), keep.len(), |r, c| vecs[(r, keep[c])]);
    (keep.iter().map(|&i| vals[i]).collect(), v)
}

/// Orthonormal basis of range(m) using singular values above `rel_tol·σ_max`.
pub fn range_basis(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    if m.ncols() == 0 || n == 0 {
        return DMatrix::zeros(n, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, x| a.max(*x));
    let mut cols: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| smax > 0.0 && svd.singular_values[i] > rel_tol * smax)
        .collect();
    cols.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut q = DMatrix::from_fn(n, cols.len(), |r, c| u[(r, cols[c])]);
    fix_signs(&mut q);
    q
}

/// Orthonormal basis of the orthogonal complement of range(m).
pub fn complement_basis(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let q = range_basis(m, rel_tol);
    let p = DMatrix::identity(n, n) - &q * q.transpose();
    let (vals, vecs) = sym_eigen_desc(&p);
    let keep: Vec<usize> = (0..n).filter(|&i| vals[i] > 0.5).collect();
    DMatrix::from_fn(n, keep.len(), |r, c| vecs[(r, keep[c])])
}

/// Largest principal angle between span(u) and span(w), both with orthonormal columns.
///
/// Uses `asin ‖(I − WWᵀ)U‖₂`, which stays accurate for small angles.
pub fn max_principal_angle(u: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    if u.ncols() == 0 {
        return 0.0;
    }
    if w.ncols() < u.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    let resid = u - w * (w.transpose() * u);
    let s = singular_values(&resid);
    s.first().copied().unwrap_or(0.0).clamp(0.0, 1.0).asin()
}

/// Cyclic two-sided Jacobi eigensolver.
///
/// Rotations are skipped only when `|a_pq| ≤ u·sqrt(|a_pp a_qq|)`, the stopping rule
/// under which Jacobi keeps high relative accuracy on graded matrices. Eigenvalues are
/// returned unsorted together with the accumulated rotation.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut a = sym_part(a);
    let mut v = DMatrix::<f64>::identity(n, n);
    let tol = f64::EPSILON;
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                if apq.abs() <= tol * (app * aqq).abs().sqrt() {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    let np = c * akp - s * akq;
                    let nq = s * akp + c * akq;
                    a[(k, p)] = np;
                    a[(p, k)] = np;
                    a[(k, q)] = nq;
                    a[(q, k)] = nq;
                }
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (DVector::from_fn(n, |i, _| a[(i, i)]), v)
}

/// Jacobi eigenpairs sorted by decreasing magnitude, columns sign-normalised.
pub fn jacobi_eigen_by_magnitude(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let (vals, vecs) = jacobi_eigen(a);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&x, &y| vals[y].abs().total_cmp(&vals[x].abs()).then(x.cmp(&y)));
    let mut v = DMatrix::from_fn(n, n, |r, c| vecs[(r, idx[c])]);
    fix_signs(&mut v);
    (idx.iter().map(|&i| vals[i]).collect(), v)
}

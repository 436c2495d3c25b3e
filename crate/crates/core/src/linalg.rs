//! Dense linear-algebra helpers with deterministic output conventions.

use nalgebra::{DMatrix, DVector};

/// Eigenpairs of a real symmetric matrix.
#[derive(Clone, Debug)]
pub struct SortedEigen {
    pub values: DVector<f64>,
    /// Eigenvectors as columns, in the same order as `values`.
    pub vectors: DMatrix<f64>,
}

/// Flip `v` so that its first non-negligible component is positive.
pub fn fix_sign(mut v: nalgebra::DVectorViewMut<'_, f64>) {
    let scale = v.amax();
    if scale == 0.0 {
        return;
    }
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-9 * scale) {
        if first < 0.0 {
            v.neg_mut();
        }
    }
}

/// Order used when ranking eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenOrder {
    Descending,
    DescendingMagnitude,
}

/// Symmetric eigendecomposition (Householder tridiagonalization followed by
/// implicit shifted QL/QR), sorted by `order` with ties broken by the original
/// solver index, and each eigenvector sign-normalized by [`fix_sign`].
pub fn symmetric_eigen(m: &DMatrix<f64>, order: EigenOrder) -> SortedEigen {
    let eig = m.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let key = |i: usize| match order {
        EigenOrder::Descending => eig.eigenvalues[i],
        EigenOrder::DescendingMagnitude => eig.eigenvalues[i].abs(),
    };
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
    let values = DVector::from_iterator(n, idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(m.nrows(), n);
    for (dst, &src) in idx.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
        fix_sign(vectors.column_mut(dst));
    }
    SortedEigen { values, vectors }
}

/// Orthonormal basis (as columns) of the null space of `constraints`, where
/// each row of `constraints` is one linear condition `row · x = 0`.
///
/// Uses Householder QR with column pivoting on the transpose; rows whose
/// pivot falls below `rel_tol` times the leading pivot are treated as
/// linearly dependent.
pub fn null_space(constraints: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let dim = constraints.ncols();
    let count = constraints.nrows();
    if count == 0 {
        return DMatrix::identity(dim, dim);
    }
    // Work on A = C^T (dim x count); columns are constraint vectors.
    let mut a = constraints.transpose();
    let mut reflectors: Vec<DVector<f64>> = Vec::new();
    let mut lead = 0.0;
    for k in 0..count.min(dim) {
        // Pivot: remaining column with the largest norm below row k.
        let (mut best, mut best_norm) = (k, -1.0);
        for j in k..count {
            let nrm = a.view((k, j), (dim - k, 1)).norm();
            if nrm > best_norm {
                best = j;
                best_norm = nrm;
            }
        }
        if k == 0 {
            lead = best_norm;
        }
        if best_norm <= rel_tol * lead || best_norm == 0.0 {
            break;
        }
        a.swap_columns(k, best);
        let x = a.view((k, k), (dim - k, 1)).column(0).into_owned();
        let alpha = if x[0] >= 0.0 { -x.norm() } else { x.norm() };
        let mut v = x;
        v[0] -= alpha;
        let vn = v.norm();
        if vn == 0.0 {
            reflectors.push(DVector::zeros(dim - k));
            continue;
        }
        v /= vn;
        // Apply (I - 2 v v^T) to the trailing block.
        for j in k..count {
            let mut col = a.view_mut((k, j), (dim - k, 1));
            let d = 2.0 * v.dot(&col.column(0));
            col.column_mut(0).axpy(-d, &v, 1.0);
        }
        reflectors.push(v);
    }
    let rank = reflectors.len();
    // Q = H_0 H_1 ... H_{r-1}; null space is Q[:, rank..].
    let mut q = DMatrix::zeros(dim, dim - rank);
    for c in 0..dim - rank {
        q[(rank + c, c)] = 1.0;
    }
    for (k, v) in reflectors.iter().enumerate().rev() {
        let mut block = q.view_mut((k, 0), (dim - k, dim - rank));
        let proj = v.transpose() * &block;
        block -= 2.0 * v * proj;
    }
    q
}

/// Minimum-norm least-squares solution of `a x = b` via SVD, with singular
/// values below `rel_tol * s_max` discarded. Returns the solution and the
/// numerical rank.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> (DVector<f64>, usize) {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = rel_tol * smax;
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut x = DVector::zeros(a.ncols());
    let mut rank = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            rank += 1;
            let coeff = u.column(i).dot(b) / s;
            x += vt.row(i).transpose() * coeff;
        }
    }
    (x, rank)
}

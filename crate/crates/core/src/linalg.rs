//! Dense eigen-decomposition of small real nonsymmetric matrices.
//!
//! Eigenvalues come from the Francis double-shift QR iteration on the upper
//! Hessenberg form. Eigenvectors are obtained per eigenvalue cluster by
//! subspace inverse iteration in complex arithmetic; the kernel of
//! `M - sigma I` restricted to the converged subspace gives the true
//! eigenvectors, and any remaining directions are generalized eigenvectors
//! (reported with their residual).

use nalgebra::{Complex, DMatrix, DVector};
use thiserror::Error;

pub type C64 = Complex<f64>;

/// Eigenvalues closer than this are treated as one cluster.
pub const CLUSTER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EigenError {
    #[error("QR iteration did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: C64,
    pub vector: DVector<C64>,
    /// `||M v - lambda v||_inf / ||v||_inf`.
    pub residual: f64,
}

/// All eigenvalues of `a` (with multiplicity). Conjugate pairs are exact
/// conjugates of each other.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<C64>, EigenError> {
    let n = check_square(a)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let h = a.clone().hessenberg().h();
    francis_qr(&h, 100 * n)
}

fn check_square(a: &DMatrix<f64>) -> Result<usize, EigenError> {
    if a.nrows() != a.ncols() {
        return Err(EigenError::NotSquare(a.nrows(), a.ncols()));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(EigenError::NonFinite);
    }
    Ok(a.nrows())
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix. Fails once the total
/// number of QR sweeps exceeds `max_iter`.
fn francis_qr(hess: &DMatrix<f64>, max_iter: usize) -> Result<Vec<C64>, EigenError> {
    let n = hess.nrows();
    // 1-based working copy keeps the index arithmetic of the classic
    // formulation readable.
    let mut a = vec![vec![0.0f64; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i + 1][j + 1] = hess[(i, j)];
        }
    }
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let mut total = 0usize;
    let mut nn = n;
    let mut t = 0.0;
    while nn >= 1 {
        let mut its = 0;
        loop {
            // look for a single small subdiagonal element
            let mut l = nn;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let l = l.max(1);
            let mut x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = a[nn - 1][nn - 1];
            let mut w = a[nn][nn - 1] * a[nn - 1][nn];
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + sign(z, p);
                    wr[nn - 1] = x + z;
                    wr[nn] = x + z;
                    if z != 0.0 {
                        wr[nn] = x - w / z;
                    }
                    wi[nn - 1] = 0.0;
                    wi[nn] = 0.0;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = z;
                    wi[nn] = -z;
                }
                nn -= 2;
                break;
            }
            total += 1;
            if total > max_iter {
                return Err(EigenError::NoConvergence(max_iter));
            }
            if its == 10 || its == 20 {
                // exceptional shift
                t += x;
                for i in 1..=nn {
                    a[i][i] -= x;
                }
                let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let (mut p, mut q, mut r): (f64, f64, f64);
            let mut m = nn - 2;
            loop {
                let z = a[m][m];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - rr - ss;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = 0.0;
                    if k != nn - 1 {
                        r = a[k + 2][k - 1];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        let mut pp = a[k][j] + q * a[k + 1][j];
                        if k != nn - 1 {
                            pp += r * a[k + 2][j];
                            a[k + 2][j] -= pp * z;
                        }
                        a[k + 1][j] -= pp * y;
                        a[k][j] -= pp * x;
                    }
                    let mmin = nn.min(k + 3);
                    for i in l..=mmin {
                        let mut pp = x * a[i][k] + y * a[i][k + 1];
                        if k != nn - 1 {
                            pp += z * a[i][k + 2];
                            a[i][k + 2] -= pp * r;
                        }
                        a[i][k + 1] -= pp * q;
                        a[i][k] -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok((1..=n).map(|i| C64::new(wr[i], wi[i])).collect())
}

/// Groups indices of `values` into clusters of mutually close eigenvalues
/// (single linkage at [`CLUSTER_TOL`]).
fn clusters(values: &[C64]) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (values[i] - values[j]).norm() <= CLUSTER_TOL {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[b] = a;
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        match root_of[r] {
            Some(g) => groups[g].push(i),
            None => {
                root_of[r] = Some(groups.len());
                groups.push(vec![i]);
            }
        }
    }
    groups
}

/// Solves `(A - sigma I) X = B` by LU with partial pivoting; tiny pivots are
/// replaced by `eps * ||A||` so exact shifts stay usable.
fn shifted_solve(a: &DMatrix<C64>, sigma: C64, b: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows();
    let mut lu = a.clone();
    for i in 0..n {
        lu[(i, i)] -= sigma;
    }
    let scale = lu.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let guard = f64::EPSILON * scale;
    let mut x = b.clone();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| lu[(i, col)].norm().total_cmp(&lu[(j, col)].norm()))
            .unwrap();
        if piv != col {
            lu.swap_rows(piv, col);
            x.swap_rows(piv, col);
        }
        if lu[(col, col)].norm() < guard {
            lu[(col, col)] = C64::new(guard, 0.0);
        }
        let d = lu[(col, col)];
        for i in (col + 1)..n {
            let f = lu[(i, col)] / d;
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            for j in col..n {
                let v = lu[(col, j)];
                lu[(i, j)] -= f * v;
            }
            for j in 0..x.ncols() {
                let v = x[(col, j)];
                x[(i, j)] -= f * v;
            }
        }
    }
    for j in 0..x.ncols() {
        for i in (0..n).rev() {
            let mut s = x[(i, j)];
            for k in (i + 1)..n {
                s -= lu[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = s / lu[(i, i)];
        }
    }
    x
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Collapsed
/// columns are replaced by the next standard basis vector that survives.
fn orthonormalize(y: &DMatrix<C64>) -> DMatrix<C64> {
    let n = y.nrows();
    let mut cols: Vec<DVector<C64>> = Vec::new();
    let mut fallback = 0;
    for j in 0..y.ncols() {
        let mut v: DVector<C64> = y.column(j).into_owned();
        let norm0 = v.norm();
        if norm0 > 0.0 && norm0.is_finite() {
            v /= C64::new(norm0, 0.0);
        }
        loop {
            for _ in 0..2 {
                for q in &cols {
                    let p = q.dotc(&v);
                    v -= q * p;
                }
            }
            let nv = v.norm();
            if nv > 1e-10 && nv.is_finite() {
                v /= C64::new(nv, 0.0);
                break;
            }
            assert!(fallback < n, "cannot complete orthonormal basis");
            v = DVector::from_element(n, C64::new(0.0, 0.0));
            v[fallback] = C64::new(1.0, 0.0);
            fallback += 1;
        }
        cols.push(v);
    }
    DMatrix::from_columns(&cols)
}

/// Canonical basis of the column span of `q`: reduced row echelon form of
/// `q^T` (pivot entries 1), each vector rescaled to infinity-norm 1 with its
/// largest entry real and positive.
pub(crate) fn canonical_basis(q: &DMatrix<C64>) -> Vec<DVector<C64>> {
    let (n, m) = (q.nrows(), q.ncols());
    let mut r = q.transpose();
    let mut row = 0;
    for col in 0..n {
        if row == m {
            break;
        }
        let piv = (row..m)
            .max_by(|&i, &j| r[(i, col)].norm().total_cmp(&r[(j, col)].norm()))
            .unwrap();
        if r[(piv, col)].norm() < 1e-9 {
            continue;
        }
        r.swap_rows(piv, row);
        let d = r[(row, col)];
        for j in 0..n {
            r[(row, j)] /= d;
        }
        for i in 0..m {
            if i != row {
                let f = r[(i, col)];
                if f != C64::new(0.0, 0.0) {
                    for j in 0..n {
                        let v = r[(row, j)];
                        r[(i, j)] -= f * v;
                    }
                }
            }
        }
        // exact zeros and ones at the pivot column
        for i in 0..m {
            r[(i, col)] = if i == row { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
        }
        row += 1;
    }
    (0..m)
        .map(|i| {
            let v: DVector<C64> = r.row(i).transpose();
            normalize_phase(v)
        })
        .collect()
}

/// Scales to infinity-norm 1 so that the first entry of maximal modulus is
/// real and positive.
pub(crate) fn normalize_phase(v: DVector<C64>) -> DVector<C64> {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return v;
    }
    let lead = v.iter().find(|z| z.norm() >= max * (1.0 - 1e-12)).copied().unwrap();
    let scale = lead / C64::new(lead.norm(), 0.0) * C64::new(max, 0.0);
    v.map(|z| z / scale)
}

fn residual(a: &DMatrix<C64>, value: C64, v: &DVector<C64>) -> f64 {
    let r = a * v - v * value;
    let vn = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    r.iter().map(|z| z.norm()).fold(0.0, f64::max) / vn.max(f64::MIN_POSITIVE)
}

fn start_block(n: usize, m: usize) -> DMatrix<C64> {
    // deterministic, generic starting vectors
    DMatrix::from_fn(n, m, |i, j| {
        let x = ((i + 1) as f64 * 0.7548776662466927 + (j + 1) as f64 * 0.5698402909980532).fract();
        C64::new(0.5 + x, 0.0)
    })
}

/// Eigen-decomposition over the complex numbers. Returns exactly `n` pairs;
/// within a cluster, true eigenvectors come first and any generalized
/// directions of a defective cluster follow with large residuals.
pub fn eigen_decomposition(a: &DMatrix<f64>) -> Result<Vec<EigenPair>, EigenError> {
    let n = check_square(a)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let values = eigenvalues(a)?;
    let ac: DMatrix<C64> = a.map(|x| C64::new(x, 0.0));
    let anorm = a.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let groups = clusters(&values);
    let mut out: Vec<Option<Vec<EigenPair>>> = vec![None; groups.len()];

    for (g, members) in groups.iter().enumerate() {
        let mean = members.iter().map(|&i| values[i]).sum::<C64>() / C64::new(members.len() as f64, 0.0);
        let self_conjugate = mean.im.abs() <= CLUSTER_TOL;
        if !self_conjugate && mean.im < 0.0 {
            continue;
        }
        let sigma = if self_conjugate { C64::new(mean.re, 0.0) } else { mean };
        let m = members.len();
        let mut q = orthonormalize(&start_block(n, m));
        for _ in 0..3 {
            q = orthonormalize(&shifted_solve(&ac, sigma, &q));
        }
        // split the subspace into kernel directions and the rest
        let mut shifted = ac.clone();
        for i in 0..n {
            shifted[(i, i)] -= sigma;
        }
        let r = &shifted * &q;
        let svd = r.svd(false, true);
        let v_t = svd.v_t.expect("right singular vectors");
        let mut kernel = Vec::new();
        let mut rest = Vec::new();
        for (k, s) in svd.singular_values.iter().enumerate() {
            let dir: DVector<C64> = v_t.row(k).adjoint();
            let vec = &q * dir;
            if *s <= 1e-5 * anorm {
                kernel.push(vec);
            } else {
                rest.push(vec);
            }
        }
        let mut vectors = Vec::with_capacity(m);
        if !kernel.is_empty() {
            vectors.extend(canonical_basis(&DMatrix::from_columns(&kernel)));
        }
        if !rest.is_empty() {
            vectors.extend(canonical_basis(&DMatrix::from_columns(&rest)));
        }
        if self_conjugate {
            for v in vectors.iter_mut() {
                v.iter_mut().for_each(|z| z.im = 0.0);
            }
        }
        let mut vals: Vec<C64> = members.iter().map(|&i| values[i]).collect();
        vals.sort_by(|x, y| y.im.total_cmp(&x.im).then(y.re.total_cmp(&x.re)));
        let pairs: Vec<EigenPair> = vals
            .iter()
            .zip(vectors)
            .map(|(&value, vector)| EigenPair {
                residual: residual(&ac, value, &vector),
                value,
                vector,
            })
            .collect();
        if !self_conjugate {
            // the mirror cluster receives the conjugated pairs
            if let Some(partner) = groups.iter().position(|other| {
                other.len() == m
                    && (other.iter().map(|&i| values[i]).sum::<C64>() / C64::new(m as f64, 0.0) - mean.conj()).norm()
                        <= CLUSTER_TOL
            }) {
                let conj: Vec<EigenPair> = pairs
                    .iter()
                    .map(|p| EigenPair {
                        value: p.value.conj(),
                        vector: p.vector.map(|z| z.conj()),
                        residual: p.residual,
                    })
                    .collect();
                out[partner] = Some(conj);
            }
        }
        out[g] = Some(pairs);
    }

    let mut all: Vec<EigenPair> = Vec::with_capacity(n);
    for (g, pairs) in out.into_iter().enumerate() {
        match pairs {
            Some(p) => all.extend(p),
            // unmatched lower half-plane cluster; cannot happen for a real
            // matrix but keep the count honest
            None => all.extend(groups[g].iter().map(|&i| EigenPair {
                value: values[i],
                vector: DVector::from_element(n, C64::new(0.0, 0.0)),
                residual: f64::INFINITY,
            })),
        }
    }
    all.sort_by(|x, y| {
        y.value
            .re
            .total_cmp(&x.value.re)
            .then(y.value.im.total_cmp(&x.value.im))
    });
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn sorted(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn identity_spectrum_and_basis() {
        let pairs = eigen_decomposition(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(pairs.len(), 3);
        for (k, p) in pairs.iter().enumerate() {
            assert_eq!(p.value, C64::new(1.0, 0.0));
            for i in 0..3 {
                let expected = if i == k { 1.0 } else { 0.0 };
                assert_eq!(p.vector[i], C64::new(expected, 0.0));
            }
        }
    }

    #[test]
    fn rotation_spectrum() {
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let r = dmatrix![c, -s, 0.0; s, c, 0.0; 0.0, 0.0, 1.0];
        let vals = sorted(eigenvalues(&r).unwrap());
        assert!((vals[0] - C64::new(c, -s)).norm() < 1e-14);
        assert!((vals[1] - C64::new(c, s)).norm() < 1e-14);
        assert!((vals[2] - C64::new(1.0, 0.0)).norm() < 1e-14);
        for p in eigen_decomposition(&r).unwrap() {
            assert!(p.residual < 1e-13, "{p:?}");
        }
    }

    #[test]
    fn general_nonsymmetric_matrix() {
        let a = dmatrix![
            4.0, 1.0, -2.0, 2.0;
            1.0, 2.0, 0.0, 1.0;
            -2.0, 0.5, 3.0, -2.0;
            2.0, 1.0, -2.0, -1.0
        ] + dmatrix![
            0.0, 3.0, 0.0, 0.0;
            0.0, 0.0, 0.0, -4.0;
            0.0, 0.0, 0.0, 0.0;
            1.0, 0.0, 0.0, 0.0
        ];
        let pairs = eigen_decomposition(&a).unwrap();
        assert_eq!(pairs.len(), 4);
        let trace: C64 = pairs.iter().map(|p| p.value).sum();
        assert!((trace.re - a.trace()).abs() < 1e-12 && trace.im.abs() < 1e-12);
        let det: C64 = pairs.iter().map(|p| p.value).product();
        assert!((det.re - a.determinant()).abs() < 1e-10 * a.determinant().abs().max(1.0));
        for p in &pairs {
            assert!(p.residual < 1e-10, "{p:?}");
        }
    }

    #[test]
    fn defective_block_keeps_count() {
        let j = dmatrix![1.0, 1.0; 0.0, 1.0];
        let pairs = eigen_decomposition(&j).unwrap();
        assert_eq!(pairs.len(), 2);
        assert!(pairs[0].residual < 1e-12);
        assert!((pairs[0].vector[0].re - 1.0).abs() < 1e-12 && pairs[0].vector[1].norm() < 1e-12);
        assert!(pairs[1].residual > 1e-3);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(eigenvalues(&DMatrix::zeros(2, 3)), Err(EigenError::NotSquare(2, 3))));
        assert!(matches!(
            eigenvalues(&dmatrix![f64::NAN, 0.0; 0.0, 1.0]),
            Err(EigenError::NonFinite)
        ));
    }

    #[test]
    fn companion_matrix_roots() {
        // x^5 - 15x^4 + 85x^3 - 225x^2 + 274x - 120 = (x-1)...(x-5)
        let c = [-120.0, 274.0, -225.0, 85.0, -15.0];
        let mut a = DMatrix::zeros(5, 5);
        for i in 1..5 {
            a[(i, i - 1)] = 1.0;
        }
        for i in 0..5 {
            a[(i, 4)] = -c[i];
        }
        let vals = sorted(eigenvalues(&a).unwrap());
        for (k, v) in vals.iter().enumerate() {
            assert!((v.re - (k + 1) as f64).abs() < 1e-8 && v.im.abs() < 1e-8, "{vals:?}");
        }
    }
}

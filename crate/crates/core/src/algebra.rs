//! Finite-dimensional real Lie algebras given by structure constants.
//!
//! Basis indices are 1-based in every error message and file format; storage
//! is 0-based. The bracket is `[e_i, e_j] = sum_k c[i][j][k] e_k`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Coordinates of an element of the algebra in the structure-constant basis.
pub type AlgebraVector = DVector<f64>;

/// Linear operator on the algebra; column `j` is the image of `e_j`.
pub type AlgebraOperator = DMatrix<f64>;

/// Default absolute tolerance for the Jacobi identity.
pub const JACOBI_TOL: f64 = 1e-12;

/// Relative singular-value threshold used for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebraError {
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("structure tensor has {got} entries, expected {expected} for dimension {dim}")]
    Shape { dim: usize, expected: usize, got: usize },
    #[error("bracket entry ({i},{j},{k}) is outside 1..={dim}")]
    IndexOutOfRange { i: usize, j: usize, k: usize, dim: usize },
    #[error("antisymmetry violated at (i,j,k) = ({i},{j},{k}): c_ij^k = {c_ijk}, c_ji^k = {c_jik}")]
    AntisymmetryViolation {
        i: usize,
        j: usize,
        k: usize,
        c_ijk: f64,
        c_jik: f64,
    },
    #[error("Jacobi identity violated at (i,j,k,r) = ({i},{j},{k},{r}), residual {residual:e}")]
    JacobiViolation {
        i: usize,
        j: usize,
        k: usize,
        r: usize,
        residual: f64,
    },
    #[error("expected {expected} basis labels, got {got}")]
    Labels { expected: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown algebra preset `{0}`")]
    UnknownPreset(String),
}

/// One explicit structure constant, 1-based: `[e_i, e_j]` has `c` along `e_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub c: f64,
}

/// A validated real Lie algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebra {
    dim: usize,
    constants: Vec<f64>,
    labels: Vec<String>,
}

fn default_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("e{i}")).collect()
}

impl LieAlgebra {
    /// Builds an algebra from a dense tensor in row-major `[i][j][k]` order.
    pub fn new(dim: usize, constants: Vec<f64>) -> Result<Self, AlgebraError> {
        Self::with_tolerance(dim, constants, default_labels(dim), JACOBI_TOL)
    }

    pub fn with_labels(
        dim: usize,
        constants: Vec<f64>,
        labels: Vec<String>,
    ) -> Result<Self, AlgebraError> {
        Self::with_tolerance(dim, constants, labels, JACOBI_TOL)
    }

    /// Full constructor; `jacobi_tol` is the absolute tolerance on every
    /// component of the Jacobi sum.
    pub fn with_tolerance(
        dim: usize,
        constants: Vec<f64>,
        labels: Vec<String>,
        jacobi_tol: f64,
    ) -> Result<Self, AlgebraError> {
        if dim == 0 {
            return Err(AlgebraError::ZeroDimension);
        }
        let expected = dim * dim * dim;
        if constants.len() != expected {
            return Err(AlgebraError::Shape {
                dim,
                expected,
                got: constants.len(),
            });
        }
        if labels.len() != dim {
            return Err(AlgebraError::Labels {
                expected: dim,
                got: labels.len(),
            });
        }
        let alg = LieAlgebra {
            dim,
            constants,
            labels,
        };
        alg.check_antisymmetry()?;
        alg.check_jacobi(jacobi_tol)?;
        Ok(alg)
    }

    /// Builds from a sparse list of 1-based entries. With `complete` set, each
    /// entry `(i,j,k,c)` also fills `(j,i,k,-c)`; otherwise both orderings
    /// must be listed and are checked.
    pub fn from_brackets(
        dim: usize,
        labels: Option<Vec<String>>,
        entries: &[BracketEntry],
        complete: bool,
        jacobi_tol: f64,
    ) -> Result<Self, AlgebraError> {
        if dim == 0 {
            return Err(AlgebraError::ZeroDimension);
        }
        let mut constants = vec![0.0; dim * dim * dim];
        for e in entries {
            if e.i == 0 || e.j == 0 || e.k == 0 || e.i > dim || e.j > dim || e.k > dim {
                return Err(AlgebraError::IndexOutOfRange {
                    i: e.i,
                    j: e.j,
                    k: e.k,
                    dim,
                });
            }
            let (i, j, k) = (e.i - 1, e.j - 1, e.k - 1);
            constants[(i * dim + j) * dim + k] = e.c;
            if complete {
                constants[(j * dim + i) * dim + k] = -e.c;
            }
        }
        let labels = labels.unwrap_or_else(|| default_labels(dim));
        Self::with_tolerance(dim, constants, labels, jacobi_tol)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Structure constant for 0-based indices.
    #[inline]
    pub fn c(&self, i: usize, j: usize, k: usize) -> f64 {
        self.constants[(i * self.dim + j) * self.dim + k]
    }

    pub fn constants(&self) -> &[f64] {
        &self.constants
    }

    /// Nonzero entries with 1-based indices, in storage order.
    pub fn entries(&self) -> Vec<BracketEntry> {
        let n = self.dim;
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let c = self.c(i, j, k);
                    if c != 0.0 {
                        out.push(BracketEntry {
                            i: i + 1,
                            j: j + 1,
                            k: k + 1,
                            c,
                        });
                    }
                }
            }
        }
        out
    }

    fn check_antisymmetry(&self) -> Result<(), AlgebraError> {
        let n = self.dim;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let a = self.c(i, j, k);
                    let b = self.c(j, i, k);
                    if a != -b {
                        return Err(AlgebraError::AntisymmetryViolation {
                            i: i + 1,
                            j: j + 1,
                            k: k + 1,
                            c_ijk: a,
                            c_jik: b,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn check_jacobi(&self, tol: f64) -> Result<(), AlgebraError> {
        let n = self.dim;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for r in 0..n {
                        let mut s = 0.0;
                        for m in 0..n {
                            s += self.c(i, j, m) * self.c(m, k, r)
                                + self.c(j, k, m) * self.c(m, i, r)
                                + self.c(k, i, m) * self.c(m, j, r);
                        }
                        if s.abs() > tol {
                            return Err(AlgebraError::JacobiViolation {
                                i: i + 1,
                                j: j + 1,
                                k: k + 1,
                                r: r + 1,
                                residual: s.abs(),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn check_len(&self, len: usize) -> Result<(), AlgebraError> {
        if len != self.dim {
            return Err(AlgebraError::DimensionMismatch {
                expected: self.dim,
                got: len,
            });
        }
        Ok(())
    }

    /// Basis vector `e_i` for a 0-based index.
    pub fn basis(&self, i: usize) -> AlgebraVector {
        let mut v = AlgebraVector::zeros(self.dim);
        v[i] = 1.0;
        v
    }

    pub fn bracket(&self, x: &AlgebraVector, y: &AlgebraVector) -> Result<AlgebraVector, AlgebraError> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        Ok(self.bracket_unchecked(x.as_slice(), y.as_slice()))
    }

    pub(crate) fn bracket_unchecked(&self, x: &[f64], y: &[f64]) -> AlgebraVector {
        let n = self.dim;
        let mut out = AlgebraVector::zeros(n);
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                let w = x[i] * y[j];
                if w == 0.0 {
                    continue;
                }
                for k in 0..n {
                    out[k] += w * self.c(i, j, k);
                }
            }
        }
        out
    }

    /// Bracket of complexified vectors given by real and imaginary parts.
    pub fn bracket_complex(
        &self,
        x: &DVector<nalgebra::Complex<f64>>,
        y: &DVector<nalgebra::Complex<f64>>,
    ) -> Result<DVector<nalgebra::Complex<f64>>, AlgebraError> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        let n = self.dim;
        let mut out = DVector::from_element(n, nalgebra::Complex::new(0.0, 0.0));
        for i in 0..n {
            for j in 0..n {
                let w = x[i] * y[j];
                for k in 0..n {
                    out[k] += w * self.c(i, j, k);
                }
            }
        }
        Ok(out)
    }

    /// Matrix of `ad_x`; column `j` holds `[x, e_j]`.
    pub fn ad_matrix(&self, x: &AlgebraVector) -> Result<AlgebraOperator, AlgebraError> {
        self.check_len(x.len())?;
        Ok(self.ad_unchecked(x.as_slice()))
    }

    pub(crate) fn ad_unchecked(&self, x: &[f64]) -> AlgebraOperator {
        let n = self.dim;
        let mut m = AlgebraOperator::zeros(n, n);
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                for k in 0..n {
                    m[(k, j)] += x[i] * self.c(i, j, k);
                }
            }
        }
        m
    }

    /// Gram matrix of the Killing form `<x,y> = -tr(ad_x ad_y)`.
    pub fn killing_gram(&self) -> DMatrix<f64> {
        let n = self.dim;
        let ads: Vec<AlgebraOperator> = (0..n).map(|i| self.ad_unchecked(self.basis(i).as_slice())).collect();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = -(&ads[i] * &ads[j]).trace();
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    pub fn killing(&self, x: &AlgebraVector, y: &AlgebraVector) -> Result<f64, AlgebraError> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        Ok((x.transpose() * self.killing_gram() * y)[(0, 0)])
    }

    /// Orthonormal basis of the center: the common kernel of all `ad_{e_i}`.
    pub fn center(&self) -> CenterBasis {
        let n = self.dim;
        // Rows i*n..(i+1)*n hold ad_{e_i}; S v stacks [e_i, v].
        let mut stacked = DMatrix::zeros(n * n, n);
        for i in 0..n {
            let ad = self.ad_unchecked(self.basis(i).as_slice());
            stacked.view_mut((i * n, 0), (n, n)).copy_from(&ad);
        }
        let vectors = null_space(&stacked);
        CenterBasis { vectors }
    }

    /// True iff the Killing form is nondegenerate.
    pub fn is_semisimple(&self) -> bool {
        let g = self.killing_gram();
        let sv = g.singular_values();
        let max = sv.max();
        let min = sv.min();
        max > 0.0 && min > RANK_TOL * max
    }

    /// The quotient `g / z` on the Euclidean orthogonal complement of the
    /// center, together with the coordinate projection and section.
    pub fn quotient_by_center(&self) -> Result<Quotient, AlgebraError> {
        let n = self.dim;
        let center = self.center();
        let mut complement: Vec<AlgebraVector> = Vec::new();
        for i in 0..n {
            let mut v = self.basis(i);
            for z in center.vectors.iter().chain(complement.iter()) {
                let p = z.dot(&v);
                v -= z * p;
            }
            let norm = v.norm();
            if norm > 1e-8 {
                // second pass keeps the basis orthonormal to rounding
                for z in center.vectors.iter().chain(complement.iter()) {
                    let p = z.dot(&v);
                    v -= z * p;
                }
                complement.push(v.normalize());
            }
            if complement.len() + center.vectors.len() == n {
                break;
            }
        }
        let k = complement.len();
        if k == 0 {
            return Err(AlgebraError::ZeroDimension);
        }
        let section = DMatrix::from_columns(&complement);
        let projection = section.transpose();
        let mut constants = vec![0.0; k * k * k];
        for a in 0..k {
            for b in (a + 1)..k {
                let br = self.bracket_unchecked(complement[a].as_slice(), complement[b].as_slice());
                let coords = &projection * br;
                for c in 0..k {
                    constants[(a * k + b) * k + c] = coords[c];
                    constants[(b * k + a) * k + c] = -coords[c];
                }
            }
        }
        let labels = (1..=k).map(|i| format!("[K{i}]")).collect();
        let algebra = LieAlgebra::with_tolerance(k, constants, labels, RANK_TOL)?;
        Ok(Quotient {
            algebra,
            projection,
            section: complement,
        })
    }

    // --- presets ---

    /// `sp(1,R)`: `[e1,e2] = -e3`, `[e2,e3] = e1`, `[e3,e1] = e2`.
    pub fn sp1r() -> Self {
        Self::from_cyclic("sp1R", [1.0, 1.0, -1.0], ["X1", "X2", "X3"])
    }

    /// `so(3)`: `[e1,e2] = e3` and cyclic.
    pub fn so3() -> Self {
        Self::from_cyclic("so3", [1.0, 1.0, 1.0], ["e1", "e2", "e3"])
    }

    /// Heisenberg algebra: `[e1,e2] = e3`, everything else zero.
    pub fn heisenberg3() -> Self {
        let e = [
            BracketEntry { i: 1, j: 2, k: 3, c: 1.0 },
        ];
        Self::from_brackets(3, None, &e, true, JACOBI_TOL).expect("heisenberg3 is valid")
    }

    pub fn abelian(n: usize) -> Result<Self, AlgebraError> {
        Self::new(n, vec![0.0; n * n * n])
    }

    /// `[e2,e3] = a e1`, `[e3,e1] = b e2`, `[e1,e2] = c e3`.
    fn from_cyclic(name: &str, abc: [f64; 3], labels: [&str; 3]) -> Self {
        let [a, b, c] = abc;
        let e = [
            BracketEntry { i: 2, j: 3, k: 1, c: a },
            BracketEntry { i: 3, j: 1, k: 2, c: b },
            BracketEntry { i: 1, j: 2, k: 3, c },
        ];
        Self::from_brackets(
            3,
            Some(labels.iter().map(|s| s.to_string()).collect()),
            &e,
            true,
            JACOBI_TOL,
        )
        .unwrap_or_else(|err| panic!("preset {name} invalid: {err}"))
    }

    /// Resolves `sp1R`, `so3`, `heisenberg3` or `abelian<n>`.
    pub fn preset(name: &str) -> Result<Self, AlgebraError> {
        match name {
            "sp1R" => Ok(Self::sp1r()),
            "so3" => Ok(Self::so3()),
            "heisenberg3" => Ok(Self::heisenberg3()),
            other => match other.strip_prefix("abelian").and_then(|s| s.parse::<usize>().ok()) {
                Some(n) if n > 0 => Self::abelian(n),
                _ => Err(AlgebraError::UnknownPreset(other.to_string())),
            },
        }
    }

    /// Direct sum with an `extra`-dimensional abelian algebra whose basis
    /// vectors are appended after the existing ones.
    pub fn with_central_extension(&self, extra: usize) -> Result<Self, AlgebraError> {
        let n = self.dim;
        let m = n + extra;
        let mut constants = vec![0.0; m * m * m];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    constants[(i * m + j) * m + k] = self.c(i, j, k);
                }
            }
        }
        let mut labels = self.labels.clone();
        labels.extend((n + 1..=m).map(|i| format!("e{i}")));
        Self::with_labels(m, constants, labels)
    }
}

/// Orthonormal spanning set of the center; possibly empty.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterBasis {
    pub vectors: Vec<AlgebraVector>,
}

impl CenterBasis {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.vectors.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Quotient {
    pub algebra: LieAlgebra,
    /// `k x n`: coordinates of `g` onto quotient coordinates.
    pub projection: DMatrix<f64>,
    /// Quotient basis embedded back into `g`.
    pub section: Vec<AlgebraVector>,
}

/// Orthonormal basis of the kernel of `a`, with relative threshold
/// [`RANK_TOL`] on the singular values. Vectors are sign-normalized so the
/// first significant component is positive.
pub(crate) fn null_space(a: &DMatrix<f64>) -> Vec<AlgebraVector> {
    let n = a.ncols();
    // Pad so the SVD returns a full n x n right factor.
    let a = if a.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let max = svd.singular_values.max();
    let scale = if max > 0.0 { max } else { 1.0 };
    let mut out = Vec::new();
    for (r, s) in svd.singular_values.iter().enumerate() {
        if *s <= RANK_TOL * scale {
            let mut v: AlgebraVector = v_t.row(r).transpose();
            if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
                if *first < 0.0 {
                    v = -v;
                }
            }
            out.push(v);
        }
    }
    out
}

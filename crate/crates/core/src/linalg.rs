//! Dense eigen- and null-space routines on top of nalgebra.
//!
//! nalgebra provides Schur, symmetric eigen, LU and SVD; eigenvectors of
//! general complex matrices are recovered here by shifted inverse iteration,
//! and left eigenvectors as rows of the inverse right-eigenvector matrix so
//! that `left[n]† · right[m] = δ_nm` holds by construction.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, SVD};

use crate::{Error, Result, C64};

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 0; // 0 = until convergence

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn is_upper_triangular(m: &DMatrix<C64>) -> bool {
    (0..m.nrows()).all(|i| (0..i.min(m.ncols())).all(|j| m[(i, j)] == c(0.0)))
}

pub fn is_lower_triangular(m: &DMatrix<C64>) -> bool {
    (0..m.nrows()).all(|i| ((i + 1)..m.ncols()).all(|j| m[(i, j)] == c(0.0)))
}

/// Eigenvalues of a general complex square matrix, in no particular order.
///
/// Triangular input (exact zeros) returns its diagonal verbatim.
pub fn eigenvalues(m: &DMatrix<C64>) -> Result<Vec<C64>> {
    assert!(m.is_square());
    if is_upper_triangular(m) || is_lower_triangular(m) {
        return Ok(m.diagonal().iter().copied().collect());
    }
    let schur = Schur::try_new(m.clone(), SCHUR_EPS, SCHUR_MAX_ITER)
        .ok_or(Error::EigenSolver(m.nrows()))?;
    let (_, t) = schur.unpack();
    Ok(t.diagonal().iter().copied().collect())
}

/// Ascending eigenvalues and orthonormal eigenvectors (columns) of a real
/// symmetric matrix.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), m.nrows(), |r, col| {
        eig.eigenvectors[(r, order[col])]
    });
    (values, vectors)
}

pub fn real_part(m: &DMatrix<C64>) -> DMatrix<f64> {
    m.map(|z| z.re)
}

/// Eigenvalues with right and biorthonormal left eigenvectors.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    /// Sorted by real part, then imaginary part.
    pub values: Vec<C64>,
    /// Columns are unit-norm right eigenvectors.
    pub right: DMatrix<C64>,
    /// Columns `l_n` satisfy `l_n† r_m = δ_nm`.
    pub left: DMatrix<C64>,
    /// `|l̂_n† r_n|` with both vectors unit-normalised; small values signal a
    /// near-defective mode.
    pub condition: Vec<f64>,
}

impl Eigensystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn right_vector(&self, n: usize) -> DVector<C64> {
        self.right.column(n).into_owned()
    }

    pub fn left_vector(&self, n: usize) -> DVector<C64> {
        self.left.column(n).into_owned()
    }
}

fn sort_complex(values: &mut [C64]) {
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

fn start_vector(dim: usize, seed: usize) -> DVector<C64> {
    // Deterministic, non-degenerate start: irrational phases.
    DVector::from_fn(dim, |i, _| {
        let x = ((i + 1) as f64 * 0.754_877_666 + seed as f64 * 0.569_840_29).fract();
        C64::from_polar(1.0 + 0.5 * x, std::f64::consts::TAU * x)
    })
}

/// Unit eigenvector for `lambda` by shifted inverse iteration, orthogonalised
/// against `previous` (other members of a degenerate cluster).
fn inverse_iteration(
    m: &DMatrix<C64>,
    lambda: C64,
    previous: &[DVector<C64>],
    seed: usize,
) -> Result<DVector<C64>> {
    let n = m.nrows();
    let scale = 1.0 + m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let shift = lambda + C64::new(1e-11 * scale, 0.7e-11 * scale);
    let mut a = m.clone();
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    let lu = a.lu();
    let mut x = start_vector(n, seed);
    for _ in 0..4 {
        for p in previous {
            let overlap = p.dotc(&x);
            x -= p * overlap;
        }
        x = lu.solve(&x).ok_or(Error::EigenSolver(n))?;
        let norm = x.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::EigenSolver(n));
        }
        x /= c(norm);
    }
    for p in previous {
        let overlap = p.dotc(&x);
        x -= p * overlap;
    }
    let norm = x.norm();
    x /= c(norm);
    Ok(x)
}

/// Full eigen-decomposition of a (diagonalizable) complex matrix.
pub fn eigensystem(m: &DMatrix<C64>) -> Result<Eigensystem> {
    let n = m.nrows();
    let mut values = eigenvalues(m)?;
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == c(0.0)));
    let right = if diagonal {
        // Eigenvectors of a diagonal matrix are the basis vectors; order them
        // with the sorted eigenvalues.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let (x, y) = (m[(a, a)], m[(b, b)]);
            x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im))
        });
        values = order.iter().map(|&i| m[(i, i)]).collect();
        DMatrix::from_fn(n, n, |r, col| if r == order[col] { c(1.0) } else { c(0.0) })
    } else {
        sort_complex(&mut values);
        let scale = 1.0 + values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut columns: Vec<DVector<C64>> = Vec::with_capacity(n);
        for k in 0..n {
            let cluster: Vec<DVector<C64>> = (0..k)
                .filter(|&j| (values[j] - values[k]).norm() <= 1e-9 * scale)
                .map(|j| columns[j].clone())
                .collect();
            columns.push(inverse_iteration(m, values[k], &cluster, k)?);
        }
        DMatrix::from_columns(&columns)
    };
    let inv = right.clone().try_inverse().ok_or(Error::EigenSolver(n))?;
    let left = inv.adjoint();
    let condition = (0..n).map(|k| 1.0 / left.column(k).norm()).collect();
    Ok(Eigensystem {
        values,
        right,
        left,
        condition,
    })
}

/// Determinant by LU with partial pivoting.
pub fn determinant(m: &DMatrix<C64>) -> C64 {
    m.clone().lu().determinant()
}

/// Right and left null vectors of a square matrix from its SVD.
#[derive(Debug, Clone)]
pub struct NullSpace {
    /// Orthonormal basis of `ker A`.
    pub right: Vec<DVector<C64>>,
    /// Orthonormal basis of `ker A†`.
    pub left: Vec<DVector<C64>>,
    /// Singular values in ascending order.
    pub singular_values: Vec<f64>,
}

impl NullSpace {
    pub fn dim(&self) -> usize {
        self.right.len()
    }

    /// Projects `v` onto `ker A` along the range of `A`, i.e. the spectral
    /// projector of a semisimple zero eigenvalue.
    pub fn project(&self, v: &DVector<C64>) -> Result<DVector<C64>> {
        let d = self.dim();
        let vr = DMatrix::from_columns(&self.right);
        let ul = DMatrix::from_columns(&self.left);
        let gram = ul.adjoint() * &vr;
        let inv = gram
            .try_inverse()
            .filter(|_| d > 0)
            .ok_or_else(|| Error::NullSpace("zero eigenvalue is defective".into()))?;
        Ok(vr * (inv * (ul.adjoint() * v)))
    }
}

/// Null space of `a` with singular values below `tol` counted as zero.
pub fn null_space(a: &DMatrix<C64>, tol: f64) -> Result<NullSpace> {
    let n = a.nrows();
    let svd = SVD::try_new(a.clone(), true, true, 1e-15, 0).ok_or(Error::EigenSolver(n))?;
    let u = svd.u.as_ref().ok_or(Error::EigenSolver(n))?;
    let v_t = svd.v_t.as_ref().ok_or(Error::EigenSolver(n))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let zero: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| svd.singular_values[i] < tol)
        .collect();
    let right = zero.iter().map(|&i| v_t.row(i).adjoint()).collect();
    let left = zero.iter().map(|&i| u.column(i).into_owned()).collect();
    Ok(NullSpace {
        right,
        left,
        singular_values,
    })
}

/// Kronecker product.
pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

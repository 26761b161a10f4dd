//! Dense real-matrix utilities: blockwise inversion, symplectic checks and
//! inverse square roots of positive-definite matrices.
//!
//! Quadrature vectors are ordered (x1..xk, y1..yk) throughout the crate.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{OwqcError, Result};

pub type Mat = DMatrix<f64>;

/// Blocks whose reciprocal condition number falls below this are singular.
pub const RCOND_MIN: f64 = 1e-12;

/// Largest absolute entry, 0 for an empty matrix.
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Element-wise ∞-distance between two matrices of equal shape.
pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

fn norm1(m: &Mat) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Inverse plus reciprocal 1-norm condition number. Matrices here are tiny,
/// so the condition number is computed exactly rather than estimated.
pub fn inverse_with_rcond(m: &Mat) -> Option<(Mat, f64)> {
    if m.nrows() != m.ncols() {
        return None;
    }
    if m.nrows() == 0 {
        return Some((Mat::zeros(0, 0), 1.0));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let inv = m.clone().lu().try_inverse()?;
    if inv.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let denom = norm1(m) * norm1(&inv);
    let rcond = if denom > 0.0 { 1.0 / denom } else { 0.0 };
    Some((inv, rcond))
}

/// Inverse gated by [`RCOND_MIN`]; `name` labels the block in the error.
pub fn checked_inverse(m: &Mat, name: &str) -> Result<Mat> {
    if m.nrows() != m.ncols() {
        return Err(OwqcError::DimensionMismatch(format!("{name} is {}x{}, expected square", m.nrows(), m.ncols())));
    }
    match inverse_with_rcond(m) {
        Some((inv, rc)) if rc >= RCOND_MIN => Ok(inv),
        Some((_, rc)) => Err(OwqcError::SingularBlock { block: name.to_string(), rcond: rc }),
        None => Err(OwqcError::SingularBlock { block: name.to_string(), rcond: 0.0 }),
    }
}

/// Assemble [[a, b], [c, d]]. Shapes must conform; zero-size blocks are fine.
pub fn block2(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Mat {
    let (r1, c1) = a.shape();
    let (r2, c2) = d.shape();
    assert_eq!(b.shape(), (r1, c2), "block2: upper-right shape");
    assert_eq!(c.shape(), (r2, c1), "block2: lower-left shape");
    let mut m = Mat::zeros(r1 + r2, c1 + c2);
    m.view_mut((0, 0), (r1, c1)).copy_from(a);
    m.view_mut((0, c1), (r1, c2)).copy_from(b);
    m.view_mut((r1, 0), (r2, c1)).copy_from(c);
    m.view_mut((r1, c1), (r2, c2)).copy_from(d);
    m
}

/// Rows and columns picked by index lists.
pub fn select(m: &Mat, rows: &[usize], cols: &[usize]) -> Mat {
    Mat::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if rows.iter().any(|row| row.len() != c) {
        return Err(OwqcError::DimensionMismatch("ragged matrix rows".into()));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(OwqcError::DimensionMismatch("non-finite matrix entry".into()));
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// 2×2 block layout [[q, t], [c, d]] with q k×k and d j×j.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPartition2x2 {
    pub q: Mat,
    pub t: Mat,
    pub c: Mat,
    pub d: Mat,
}

impl BlockPartition2x2 {
    pub fn new(q: Mat, t: Mat, c: Mat, d: Mat) -> Result<Self> {
        let k = q.nrows();
        let j = d.nrows();
        let ok = q.ncols() == k && d.ncols() == j && t.shape() == (k, j) && c.shape() == (j, k);
        if !ok {
            return Err(OwqcError::DimensionMismatch(format!(
                "blocks q {:?}, t {:?}, c {:?}, d {:?} do not compose",
                q.shape(),
                t.shape(),
                c.shape(),
                d.shape()
            )));
        }
        Ok(Self { q, t, c, d })
    }

    /// Cut a square matrix after its first `k` rows and columns.
    pub fn split(m: &Mat, k: usize) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n || k > n {
            return Err(OwqcError::DimensionMismatch(format!("cannot split {}x{} at {k}", m.nrows(), m.ncols())));
        }
        let j = n - k;
        Ok(Self {
            q: m.view((0, 0), (k, k)).into_owned(),
            t: m.view((0, k), (k, j)).into_owned(),
            c: m.view((k, 0), (j, k)).into_owned(),
            d: m.view((k, k), (j, j)).into_owned(),
        })
    }

    pub fn compose(&self) -> Mat {
        block2(&self.q, &self.t, &self.c, &self.d)
    }
}

/// Inverse through the Schur complement of `q`, H = D − C Q⁻¹ T.
pub fn blockwise_invert_upper(b: &BlockPartition2x2) -> Result<Mat> {
    let qi = checked_inverse(&b.q, "Q")?;
    let h = &b.d - &b.c * &qi * &b.t;
    let hi = checked_inverse(&h, "H")?;
    let qi_t = &qi * &b.t;
    let c_qi = &b.c * &qi;
    let tl = &qi + &qi_t * &hi * &c_qi;
    let tr = -(&qi_t * &hi);
    let bl = -(&hi * &c_qi);
    Ok(block2(&tl, &tr, &bl, &hi))
}

/// Inverse through the Schur complement of `d`, Π = Q − T D⁻¹ C.
pub fn blockwise_invert_lower(b: &BlockPartition2x2) -> Result<Mat> {
    let di = checked_inverse(&b.d, "D")?;
    let p = &b.q - &b.t * &di * &b.c;
    let pi = checked_inverse(&p, "Pi")?;
    let t_di = &b.t * &di;
    let di_c = &di * &b.c;
    let tr = -(&pi * &t_di);
    let bl = -(&di_c * &pi);
    let br = &di + &di_c * &pi * &t_di;
    Ok(block2(&pi, &tr, &bl, &br))
}

/// J = [[0, I], [−I, 0]] of size 2k.
pub fn symplectic_form(k: usize) -> Mat {
    let i = Mat::identity(k, k);
    let z = Mat::zeros(k, k);
    block2(&z, &i, &(-&i), &z)
}

/// ‖M J Mᵀ − J‖ (largest absolute entry).
pub fn symplectic_defect(m: &Mat) -> Result<f64> {
    let n = m.nrows();
    if m.ncols() != n || n % 2 != 0 {
        return Err(OwqcError::DimensionMismatch(format!(
            "symplectic defect needs an even square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let j = symplectic_form(n / 2);
    Ok(max_abs(&(m * &j * m.transpose() - j)))
}

/// Symmetric B with B·B = a⁻¹, via the symmetric eigendecomposition.
pub fn inv_sqrt_posdef(a: &Mat) -> Result<Mat> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(OwqcError::DimensionMismatch(format!(
            "inv_sqrt_posdef needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = max_abs(a).max(1.0);
    let asym = max_abs_diff(a, &a.transpose());
    if asym > 1e-12 * scale {
        return Err(OwqcError::DimensionMismatch(format!(
            "inv_sqrt_posdef needs a symmetric matrix (asymmetry {asym:.3e})"
        )));
    }
    let eig = SymmetricEigen::new(a.clone());
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if n > 0 && min <= 1e-12 * scale {
        return Err(OwqcError::NotPositiveDefinite(min));
    }
    let v = &eig.eigenvectors;
    let d = Mat::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let b = v * d * v.transpose();
    // symmetrize away rounding
    Ok((&b + b.transpose()) * 0.5)
}

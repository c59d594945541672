//! Small dense symmetric matrices: cyclic Jacobi eigenvalues, Cholesky
//! solves and norms.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

const MAX_SWEEPS: usize = 100;

/// A dense `n x n` matrix whose entries are exactly symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    /// Builds a matrix from a row-major buffer, rejecting any asymmetry.
    pub fn from_row_major(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("matrix dimension must be at least 1".into()));
        }
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                what: "symmetric matrix entries",
                expected: n * n,
                found: entries.len(),
            });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (u, l) = (entries[i * n + j], entries[j * n + i]);
                // NaN never equals itself, compare bit patterns instead.
                if u.to_bits() != l.to_bits() {
                    return Err(Error::InvalidInput(format!(
                        "entry ({i},{j}) = {u} differs from ({j},{i}) = {l}"
                    )));
                }
            }
        }
        Ok(Self { n, entries })
    }

    /// Builds a matrix by evaluating `f(i, j)` on the upper triangle and
    /// mirroring it.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(n >= 1, "matrix dimension must be at least 1");
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self { n, entries }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_fn(n, |_, _| 0.0)
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    /// `A^T A` for a row-major `rows x cols` matrix `a`.
    pub fn gram(rows: usize, cols: usize, a: &[f64]) -> Self {
        assert_eq!(a.len(), rows * cols);
        Self::from_fn(cols, |i, j| (0..rows).map(|k| a[k * cols + i] * a[k * cols + j]).sum())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.entries
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `v^T M v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        self.mul_vec(v).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// Entrywise `self - other`.
    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                what: "symmetric matrix difference",
                expected: self.n,
                found: other.n,
            });
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect();
        Ok(SymMatrix { n: self.n, entries })
    }

    pub fn scaled(&self, factor: f64) -> SymMatrix {
        SymMatrix {
            n: self.n,
            entries: self.entries.iter().map(|v| v * factor).collect(),
        }
    }

    /// Applies `perm` to rows and columns: `out[i][j] = self[perm[i]][perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> SymMatrix {
        assert_eq!(perm.len(), self.n);
        SymMatrix::from_fn(self.n, |i, j| self.get(perm[i], perm[j]))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// All eigenvalues in ascending order, each within `tol` of the exact
    /// value (or within rounding of the matrix scale, whichever is larger).
    pub fn eigenvalues(&self, tol: f64) -> Result<Vec<f64>> {
        if !(tol > 0.0) {
            return Err(Error::InvalidInput(format!("eigenvalue tolerance must be positive, got {tol}")));
        }
        ensure_finite(&self.entries, "symmetric matrix")?;
        let mut values = jacobi_eigenvalues(self.n, self.entries.clone(), tol);
        values.sort_by(f64::total_cmp);
        Ok(values)
    }

    pub fn smallest_eigenvalue(&self, tol: f64) -> Result<f64> {
        Ok(self.eigenvalues(tol)?[0])
    }

    pub fn largest_eigenvalue(&self, tol: f64) -> Result<f64> {
        Ok(*self.eigenvalues(tol)?.last().expect("n >= 1"))
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self, tol: f64) -> Result<f64> {
        let values = self.eigenvalues(tol)?;
        Ok(values[0].abs().max(values[values.len() - 1].abs()))
    }

    /// Lower Cholesky factor of `M + ridge I`, row-major.
    pub fn cholesky(&self, ridge: f64) -> Result<Vec<f64>> {
        if !(ridge >= 0.0) {
            return Err(Error::InvalidInput(format!("ridge must be nonnegative, got {ridge}")));
        }
        ensure_finite(&self.entries, "symmetric matrix")?;
        let n = self.n;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut diag = self.get(j, j) + ridge;
            for k in 0..j {
                diag -= l[j * n + k] * l[j * n + k];
            }
            if !(diag > 0.0) {
                return Err(Error::Singular { pivot: j });
            }
            let pivot = diag.sqrt();
            l[j * n + j] = pivot;
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / pivot;
            }
        }
        Ok(l)
    }

    /// `y^T (M + ridge I)^{-1} y` via Cholesky.
    pub fn quadratic_form_inverse(&self, y: &[f64], ridge: f64) -> Result<f64> {
        if y.len() != self.n {
            return Err(Error::DimensionMismatch {
                what: "quadratic form vector",
                expected: self.n,
                found: y.len(),
            });
        }
        ensure_finite(y, "quadratic form vector")?;
        let n = self.n;
        let l = self.cholesky(ridge)?;
        // Forward substitution L z = y; then y^T A^{-1} y = |z|^2.
        let mut z = vec![0.0; n];
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[i * n + k] * z[k];
            }
            z[i] = s / l[i * n + i];
        }
        Ok(z.iter().map(|v| v * v).sum())
    }
}

/// Cyclic Jacobi with row-by-row sweep order. Stops once the off-diagonal
/// Frobenius norm is below `tol` (Weyl then bounds every eigenvalue error by
/// it) or stops shrinking relative to machine precision.
fn jacobi_eigenvalues(n: usize, mut a: Vec<f64>, tol: f64) -> Vec<f64> {
    let scale = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let floor = f64::EPSILON * scale;
    for _ in 0..MAX_SWEEPS {
        let off = off_diagonal_norm(n, &a);
        if off <= tol || off <= floor {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

fn off_diagonal_norm(n: usize, a: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    s.sqrt()
}

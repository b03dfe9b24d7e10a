//! Dense and banded linear-algebra helpers on top of `nalgebra`.
//!
//! `nalgebra` provides the complex Schur form but no eigenvectors for
//! non-Hermitian matrices; [`eig`] recovers them by back-substitution on the
//! triangular factor.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 0; // 0 = unlimited in nalgebra

/// Eigen-decomposition of a general complex matrix.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<Complex64>,
    /// Column `k` is the unit-norm eigenvector for `values[k]`.
    pub vectors: DMatrix<Complex64>,
}

pub fn eigenvalues(m: &DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    let schur = m
        .clone()
        .try_schur(SCHUR_EPS, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Eigenvalues and right eigenvectors of a general complex square matrix.
pub fn eig(m: &DMatrix<Complex64>) -> Result<Eigen> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Numerical("eig requires a square matrix".into()));
    }
    let schur = m
        .clone()
        .try_schur(SCHUR_EPS, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let scale = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tiny = scale * f64::EPSILON;

    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        y[(k, k)] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                acc += t[(i, j)] * y[(j, k)];
            }
            let mut denom = t[(i, i)] - lambda;
            if denom.norm() < tiny {
                denom = Complex64::new(tiny, 0.0);
            }
            y[(i, k)] = -acc / denom;
        }
    }
    let mut vectors = q * y;
    for mut col in vectors.column_iter_mut() {
        let norm = col.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Numerical("degenerate eigenvector".into()));
        }
        col /= Complex64::new(norm, 0.0);
    }
    let values = (0..n).map(|i| t[(i, i)]).collect();
    Ok(Eigen { values, vectors })
}

/// Determinant in log-magnitude / phase form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    pub ln_abs: f64,
    pub phase: f64,
}

impl LogDet {
    pub fn value(&self) -> Complex64 {
        Complex64::from_polar(self.ln_abs.exp(), self.phase)
    }
}

/// Pivoted LU determinant accumulated as `Σ ln|u_ii|` plus phase.
pub fn log_det(m: &DMatrix<Complex64>) -> LogDet {
    let lu = m.clone().lu();
    let u = lu.u();
    let mut ln_abs = 0.0;
    let mut phase = 0.0;
    for i in 0..u.nrows() {
        let d = u[(i, i)];
        ln_abs += d.norm().ln();
        phase += d.arg();
    }
    if lu.p().determinant::<f64>() < 0.0 {
        phase += std::f64::consts::PI;
    }
    LogDet {
        ln_abs,
        phase: wrap_phase(phase),
    }
}

fn wrap_phase(p: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let r = p.rem_euclid(tau);
    if r > std::f64::consts::PI {
        r - tau
    } else {
        r
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eig(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let se = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let values = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| se.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Square matrix with `lower` sub-diagonals and `upper` super-diagonals.
///
/// Entries outside the band are never read or written.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    data: DMatrix<Complex64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        Self {
            n,
            lower,
            upper,
            data: DMatrix::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.lower >= i && i + self.upper >= j
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if self.in_band(i, j) {
            self.data[(i, j)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// Panics when `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        self.data[(i, j)] = value;
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        self.data.clone()
    }

    pub fn mul_vec(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        DVector::from_fn(self.n, |i, _| {
            let lo = i.saturating_sub(self.lower);
            let hi = (i + self.upper).min(self.n - 1);
            (lo..=hi).map(|j| self.data[(i, j)] * x[j]).sum()
        })
    }
}

/// Banded LU factorisation with partial pivoting (upper bandwidth grows to
/// `upper + lower`, as in LAPACK `gbtrf`).
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    lower: usize,
    upper_fill: usize,
    lu: DMatrix<Complex64>,
    pivots: Vec<usize>,
    /// Smallest `|u_ii|` relative to the largest input entry.
    pub min_relative_pivot: f64,
}

impl BandedLu {
    pub fn factor(a: &BandedMatrix) -> Self {
        let n = a.n;
        let kl = a.lower;
        let ku_fill = a.upper + a.lower;
        let mut lu = a.data.clone();
        let scale = lu.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut pivots = Vec::with_capacity(n);
        let mut min_pivot = f64::INFINITY;

        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            for r in (k + 1)..=last_row {
                if lu[(r, k)].norm() > lu[(p, k)].norm() {
                    p = r;
                }
            }
            pivots.push(p);
            let last_col = (k + ku_fill).min(n - 1);
            if p != k {
                for c in k..=last_col {
                    lu.swap((k, c), (p, c));
                }
            }
            let piv = lu[(k, k)];
            min_pivot = min_pivot.min(piv.norm());
            if piv.norm() == 0.0 {
                continue;
            }
            for r in (k + 1)..=last_row {
                let factor = lu[(r, k)] / piv;
                lu[(r, k)] = factor;
                if factor.norm() == 0.0 {
                    continue;
                }
                for c in (k + 1)..=last_col {
                    let u = lu[(k, c)];
                    lu[(r, c)] -= factor * u;
                }
            }
        }
        let min_relative_pivot = if scale > 0.0 { min_pivot / scale } else { 0.0 };
        Self {
            n,
            lower: kl,
            upper_fill: ku_fill,
            lu,
            pivots,
            min_relative_pivot,
        }
    }

    pub fn solve(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        let n = self.n;
        let mut x = b.clone();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap_rows(k, p);
            }
            let last_row = (k + self.lower).min(n - 1);
            let xk = x[k];
            for r in (k + 1)..=last_row {
                x[r] -= self.lu[(r, k)] * xk;
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + self.upper_fill).min(n - 1);
            let mut acc = x[k];
            for c in (k + 1)..=last_col {
                acc -= self.lu[(k, c)] * x[c];
            }
            x[k] = acc / self.lu[(k, k)];
        }
        x
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for (j, col) in b.column_iter().enumerate() {
            out.set_column(j, &self.solve(&col.into_owned()));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn test_matrix(n: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(n, n, |i, j| {
            let x = (i * 7 + j * 3) as f64;
            c((x * 0.37).sin(), (x * 0.11).cos() * 0.5)
        })
    }

    #[test]
    fn eig_satisfies_definition() {
        let a = test_matrix(12);
        let e = eig(&a).unwrap();
        for k in 0..12 {
            let v = e.vectors.column(k);
            let r = &a * v - v * e.values[k];
            assert!(r.norm() < 1e-10, "residual {}", r.norm());
        }
    }

    #[test]
    fn log_det_matches_dense_determinant() {
        let a = test_matrix(6);
        let direct = a.clone().determinant();
        let ld = log_det(&a).value();
        assert!((direct - ld).norm() < 1e-10 * direct.norm().max(1.0));
    }

    #[test]
    fn log_det_survives_large_scale() {
        let a = DMatrix::<Complex64>::identity(400, 400) * c(1e3, 0.0);
        let ld = log_det(&a);
        assert!((ld.ln_abs - 400.0 * 1e3f64.ln()).abs() < 1e-9);
        assert!(ld.phase.abs() < 1e-12);
    }

    #[test]
    fn banded_solve_matches_dense() {
        let n = 9;
        let mut b = BandedMatrix::zeros(n, 2, 2);
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 2).min(n - 1) {
                let x = (3 * i + 5 * j) as f64;
                // weak diagonal forces pivoting
                let diag = if i == j { 0.01 } else { 0.0 };
                b.set(i, j, c(x.sin() + diag, (0.3 * x).cos()));
            }
        }
        let rhs = DVector::from_fn(n, |i, _| c(i as f64, 1.0));
        let x = BandedLu::factor(&b).solve(&rhs);
        let dense = b.to_dense().lu().solve(&rhs).unwrap();
        assert!((x - dense).norm() < 1e-10);
    }

    #[test]
    fn banded_mul_vec_ignores_out_of_band() {
        let mut b = BandedMatrix::zeros(4, 1, 1);
        for i in 0..4 {
            b.set(i, i, c(2.0, 0.0));
        }
        b.set(0, 1, c(-1.0, 0.0));
        let x = DVector::from_element(4, c(1.0, 0.0));
        let y = b.mul_vec(&x);
        assert_eq!(y[0], c(1.0, 0.0));
        assert_eq!(y[3], c(2.0, 0.0));
        assert!(!b.in_band(0, 2));
    }
}

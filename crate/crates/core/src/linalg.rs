//! Dense vector and matrix helpers. Problem sizes stay in the low thousands,
//! so everything is plain row-major `Vec<f64>`.

use serde::{Deserialize, Serialize};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm2_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `y += s * x`
pub fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

/// Componentwise positive part `[v]^+`.
pub fn positive_part(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.max(0.0)).collect()
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged matrix rows");
        Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major buffer has wrong length");
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// `Aᵀ w`
    pub fn mul_transpose_vec(&self, w: &[f64]) -> Vec<f64> {
        debug_assert_eq!(w.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, wr) in w.iter().enumerate() {
            if *wr != 0.0 {
                axpy(&mut out, *wr, self.row(r));
            }
        }
        out
    }

    /// Spectral norm `‖A‖₂` by power iteration on `AᵀA`.
    pub fn spectral_norm(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        // Uneven start vector so we are not orthogonal to the top singular vector
        // for the structured matrices we care about.
        let mut v: Vec<f64> = (0..self.cols).map(|i| 1.0 + 0.1 * (i as f64 + 1.0).sqrt()).collect();
        let n = norm2(&v);
        v.iter_mut().for_each(|x| *x /= n);
        let mut lambda = 0.0;
        for _ in 0..10_000 {
            let w = self.mul_transpose_vec(&self.mul_vec(&v));
            let wn = norm2(&w);
            if wn == 0.0 {
                return 0.0;
            }
            let next: Vec<f64> = w.iter().map(|x| x / wn).collect();
            let converged = (wn - lambda).abs() <= 1e-15 * wn;
            lambda = wn;
            v = next;
            if converged {
                break;
            }
        }
        lambda.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_matches_known_eigenvalue() {
        // CᵀC = [[2,-1],[-1,1]], top eigenvalue (3+√5)/2.
        let c = Matrix::from_rows(&[vec![-1.0, 0.0], vec![1.0, -1.0]]);
        let expected = ((3.0 + 5f64.sqrt()) / 2.0).sqrt();
        assert!((c.spectral_norm() - expected).abs() < 1e-10);
    }

    #[test]
    fn transpose_product_agrees_with_explicit_transpose() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        let w = [0.5, -1.0];
        assert_eq!(a.mul_transpose_vec(&w), vec![-3.5, -4.0, -4.5]);
        assert_eq!(a.mul_vec(&[1.0, 0.0, -1.0]), vec![-2.0, -2.0]);
    }
}

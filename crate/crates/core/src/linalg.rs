//! Small dense kernels for the tall, skinny systems the solvers produce
//! (a few dozen rows, three or four columns).

use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| self.row(r).iter().zip(x).map(|(&a, &b)| a * b).sum()).collect()
    }

    pub fn scaled(&self, k: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| v * k).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub fn norm<T: Scalar>(v: &[T]) -> T {
    // scaled accumulation; entries here can reach ~1e7 while residuals are ~1e-10
    let scale = v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    let ss: T = v.iter().map(|&x| (x / scale) * (x / scale)).sum();
    scale * ss.sqrt()
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Singular values in descending order, computed with one-sided Jacobi
/// rotations on the columns.
pub fn singular_values<T: Scalar>(a: &Matrix<T>) -> Vec<T> {
    // work on the orientation with the smaller number of columns
    let mut cols: Vec<Vec<T>> = if a.rows >= a.cols {
        (0..a.cols).map(|c| a.column(c)).collect()
    } else {
        (0..a.rows).map(|r| a.row(r).to_vec()).collect()
    };
    let n = cols.len();
    let eps = T::epsilon();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                for (up, uq) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let (x, y) = (*up, *uq);
                    *up = c * x - s * y;
                    *uq = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<T> = cols.iter().map(|c| norm(c)).collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// Least-squares solution of `A x ≈ b` via Householder QR.
///
/// `A` must have full column rank and at least as many rows as columns;
/// callers check the rank first.
pub fn lstsq_qr<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Vec<T> {
    let (m, n) = (a.rows, a.cols);
    assert!(m >= n && b.len() == m);
    let mut r = a.clone();
    let mut qtb = b.to_vec();
    let mut v = vec![T::zero(); m];
    for k in 0..n {
        let x: Vec<T> = (k..m).map(|i| r.get(i, k)).collect();
        let xnorm = norm(&x);
        if xnorm == T::zero() {
            continue;
        }
        let alpha = if x[0] > T::zero() { -xnorm } else { xnorm };
        for (i, &xi) in x.iter().enumerate() {
            v[k + i] = xi;
        }
        v[k] = v[k] - alpha;
        let vv: T = v[k..m].iter().map(|&t| t * t).sum();
        if vv == T::zero() {
            continue;
        }
        let two = T::lit(2.0);
        for c in k..n {
            let s: T = (k..m).map(|i| v[i] * r.get(i, c)).sum();
            let f = two * s / vv;
            for (i, &vi) in v.iter().enumerate().take(m).skip(k) {
                r.set(i, c, r.get(i, c) - f * vi);
            }
        }
        let s: T = (k..m).map(|i| v[i] * qtb[i]).sum();
        let f = two * s / vv;
        for (q, &vi) in qtb[k..m].iter_mut().zip(&v[k..m]) {
            *q = *q - f * vi;
        }
    }
    let mut x = vec![T::zero(); n];
    for k in (0..n).rev() {
        let s: T = (k + 1..n).map(|c| r.get(k, c) * x[c]).sum();
        x[k] = (qtb[k] - s) / r.get(k, k);
    }
    x
}

/// Least-squares solution through the normal equations `(AᵀA) x = Aᵀb`,
/// factored with Cholesky. Returns `None` if `AᵀA` is not positive definite
/// in floating point.
pub fn lstsq_normal<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Option<Vec<T>> {
    let (m, n) = (a.rows, a.cols);
    assert!(b.len() == m);
    let mut g = vec![T::zero(); n * n];
    let mut rhs = vec![T::zero(); n];
    for (r, &br) in b.iter().enumerate() {
        let row = a.row(r);
        for i in 0..n {
            rhs[i] = rhs[i] + row[i] * br;
            for j in 0..n {
                g[i * n + j] = g[i * n + j] + row[i] * row[j];
            }
        }
    }
    // in-place Cholesky, lower triangle
    for j in 0..n {
        let mut d = g[j * n + j];
        for k in 0..j {
            d = d - g[j * n + k] * g[j * n + k];
        }
        if d.is_nan() || d <= T::zero() {
            return None;
        }
        let d = d.sqrt();
        g[j * n + j] = d;
        for i in j + 1..n {
            let mut s = g[i * n + j];
            for k in 0..j {
                s = s - g[i * n + k] * g[j * n + k];
            }
            g[i * n + j] = s / d;
        }
    }
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let s: T = (0..i).map(|k| g[i * n + k] * y[k]).sum();
        y[i] = (rhs[i] - s) / g[i * n + i];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let s: T = (i + 1..n).map(|k| g[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / g[i * n + i];
    }
    Some(x)
}

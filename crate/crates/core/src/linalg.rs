//! Small dense linear algebra used by the regression-based models.
//!
//! Matrices are row-major `&[f64]` slices with explicit dimensions; the
//! systems solved here have at most a few hundred columns.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Ordinary least squares solution with the pieces needed for inference.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coef: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    /// `(X'X)^-1`, row-major `k x k`.
    pub xtx_inv: Vec<f64>,
}

impl LeastSquares {
    /// Standard error of coefficient `j` using the unbiased residual variance.
    pub fn std_error(&self, j: usize) -> f64 {
        let n = self.residuals.len();
        let k = self.coef.len();
        let sigma2 = self.rss / (n - k) as f64;
        (sigma2 * self.xtx_inv[j * k + j]).sqrt()
    }
}

/// Least squares by Householder QR on the `n x k` row-major design `x`.
pub fn least_squares(x: &[f64], n: usize, k: usize, y: &[f64]) -> Result<LeastSquares> {
    assert_eq!(x.len(), n * k);
    assert_eq!(y.len(), n);
    if n < k || k == 0 {
        return Err(Error::SingularRegression);
    }
    let mut a = x.to_vec();
    let mut qty = y.to_vec();
    let mut diag = vec![0.0; k];

    for j in 0..k {
        let norm = (j..n).map(|i| a[i * k + j] * a[i * k + j]).sum::<f64>().sqrt();
        let col_scale = (0..n).map(|i| x[i * k + j].abs()).fold(0.0, f64::max);
        if norm <= 1e-12 * col_scale.max(1e-300) || norm == 0.0 {
            return Err(Error::SingularRegression);
        }
        let alpha = if a[j * k + j] > 0.0 { -norm } else { norm };
        // v = a[j.., j] - alpha e1, stored in place
        a[j * k + j] -= alpha;
        let vnorm2 = (j..n).map(|i| a[i * k + j] * a[i * k + j]).sum::<f64>();
        if vnorm2 > 0.0 {
            for c in (j + 1)..k {
                let dot = (j..n).map(|i| a[i * k + j] * a[i * k + c]).sum::<f64>();
                let f = 2.0 * dot / vnorm2;
                for i in j..n {
                    a[i * k + c] -= f * a[i * k + j];
                }
            }
            let dot = (j..n).map(|i| a[i * k + j] * qty[i]).sum::<f64>();
            let f = 2.0 * dot / vnorm2;
            for i in j..n {
                qty[i] -= f * a[i * k + j];
            }
        }
        diag[j] = alpha;
    }

    // R is upper triangular with diagonal `diag` and off-diagonal in `a`.
    let r = |i: usize, j: usize| if i == j { diag[i] } else { a[i * k + j] };
    let mut coef = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = qty[i];
        for j in (i + 1)..k {
            s -= r(i, j) * coef[j];
        }
        coef[i] = s / r(i, i);
    }

    // R^-1 (upper triangular), then (X'X)^-1 = R^-1 R^-T.
    let mut rinv = vec![0.0; k * k];
    for c in 0..k {
        for i in (0..=c).rev() {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for j in (i + 1)..=c {
                s -= r(i, j) * rinv[j * k + c];
            }
            rinv[i * k + c] = s / r(i, i);
        }
    }
    let mut xtx_inv = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            let start = i.max(j);
            xtx_inv[i * k + j] = (start..k).map(|m| rinv[i * k + m] * rinv[j * k + m]).sum();
        }
    }

    let residuals: Vec<f64> = (0..n)
        .map(|i| y[i] - (0..k).map(|j| x[i * k + j] * coef[j]).sum::<f64>())
        .collect();
    let rss = residuals.iter().map(|e| e * e).sum();
    Ok(LeastSquares {
        coef,
        residuals,
        rss,
        xtx_inv,
    })
}

/// Solves the symmetric positive definite system `a x = b` by Cholesky.
/// `a` is `k x k` row-major and is consumed as scratch space.
pub fn cholesky_solve(mut a: Vec<f64>, k: usize, b: &[f64]) -> Result<Vec<f64>> {
    assert_eq!(a.len(), k * k);
    let scale = (0..k).map(|i| a[i * k + i].abs()).fold(0.0, f64::max);
    for j in 0..k {
        let mut d = a[j * k + j];
        for m in 0..j {
            d -= a[j * k + m] * a[j * k + m];
        }
        if d <= 1e-14 * scale.max(1e-300) {
            return Err(Error::SingularSystem);
        }
        let d = d.sqrt();
        a[j * k + j] = d;
        for i in (j + 1)..k {
            let mut s = a[i * k + j];
            for m in 0..j {
                s -= a[i * k + m] * a[j * k + m];
            }
            a[i * k + j] = s / d;
        }
    }
    let mut z = b.to_vec();
    for i in 0..k {
        for m in 0..i {
            z[i] -= a[i * k + m] * z[m];
        }
        z[i] /= a[i * k + i];
    }
    for i in (0..k).rev() {
        for m in (i + 1)..k {
            z[i] -= a[m * k + i] * z[m];
        }
        z[i] /= a[i * k + i];
    }
    Ok(z)
}

/// Roots of the monic polynomial `z^n + c[0] z^(n-1) + ... + c[n-1]`
/// by Durand-Kerner iteration.
pub fn monic_roots(c: &[f64]) -> Vec<Complex64> {
    let n = c.len();
    if n == 0 {
        return Vec::new();
    }
    let eval = |z: Complex64| c.iter().fold(Complex64::new(1.0, 0.0), |acc, &ci| acc * z + ci);
    let bound = 1.0 + c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n).map(|i| seed.powu(i as u32) * bound * 0.5).collect();
    for _ in 0..500 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() < 1e-300 {
                denom = Complex64::new(1e-12, 1e-12);
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    roots
}

/// Coefficients `[c0, ..., c_{n-1}]` of the monic polynomial with the given
/// roots, i.e. the inverse of [`monic_roots`]. Imaginary parts are dropped,
/// so the roots must come in conjugate pairs.
pub fn monic_from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (i, &p) in poly.iter().enumerate() {
            next[i] += p;
            next[i + 1] -= p * r;
        }
        poly = next;
    }
    poly[1..].iter().map(|z| z.re).collect()
}

//! Dense symmetric matrices and the spectral routines the solver needs.

use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Dense symmetric matrix stored row-major (both triangles kept).
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Panics if `data.len() != n * n`. Symmetry is not checked; the lower
    /// triangle is what the spectral routines read.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "matrix data has the wrong length");
        Self { n, data }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.data[i * self.n + i]).sum()
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.data[i * n + j] - self.data[j * n + i]).abs());
            }
        }
        worst
    }

    fn to_faer(&self) -> Mat<f64> {
        Mat::from_fn(self.n, self.n, |i, j| self.data[i * self.n + j])
    }

    fn from_faer(m: &Mat<f64>) -> Self {
        let n = m.nrows();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = m[(i, j)];
            }
        }
        Self { n, data }
    }
}

/// Eigenvalues in ascending order with eigenvectors as the columns of a
/// row-major `n × n` matrix.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

impl Eigen {
    pub fn vector(&self, col: usize) -> Vec<f64> {
        let n = self.values.len();
        (0..n).map(|r| self.vectors[r * n + col]).collect()
    }
}

pub fn eigh(m: &SymMatrix) -> Result<Eigen> {
    let n = m.n;
    if n == 0 {
        return Ok(Eigen {
            values: Vec::new(),
            vectors: Vec::new(),
        });
    }
    check_finite(m)?;
    let evd = m
        .to_faer()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let values = order.iter().map(|&i| s[i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (c, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors[r * n + c] = u[(r, src)];
        }
    }
    Ok(Eigen { values, vectors })
}

/// Ascending eigenvalues.
pub fn eigenvalues(m: &SymMatrix) -> Vec<f64> {
    if m.n == 0 {
        return Vec::new();
    }
    let mut values = match m.to_faer().self_adjoint_eigenvalues(Side::Lower) {
        Ok(v) => v,
        Err(_) => jacobi_eigenvalues(m),
    };
    values.sort_by(f64::total_cmp);
    values
}

pub fn min_eigenvalue(m: &SymMatrix) -> f64 {
    eigenvalues(m).first().copied().unwrap_or(0.0)
}

fn check_finite(m: &SymMatrix) -> Result<()> {
    if m.data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical("matrix has non-finite entries".into()))
    }
}

/// Projection onto the PSD cone in the Frobenius norm, together with the
/// smallest eigenvalue of the input.
///
/// The result is assembled from whichever side of the spectrum has fewer
/// eigenpairs.
pub fn project_psd(m: &SymMatrix) -> Result<(SymMatrix, f64)> {
    let n = m.n;
    if n == 0 {
        return Ok((m.clone(), 0.0));
    }
    check_finite(m)?;
    let a = m.to_faer();
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let min = (0..n).map(|i| s[i]).fold(f64::INFINITY, f64::min);
    let n_pos = (0..n).filter(|&i| s[i] > 0.0).count();
    let keep_positive = n_pos <= n - n_pos;
    let cols: Vec<usize> = (0..n)
        .filter(|&i| if keep_positive { s[i] > 0.0 } else { s[i] < 0.0 })
        .collect();
    let mut w = Mat::<f64>::zeros(n, cols.len());
    for (c, &i) in cols.iter().enumerate() {
        let scale = s[i].abs().sqrt();
        for r in 0..n {
            w[(r, c)] = u[(r, i)] * scale;
        }
    }
    let low_rank = &w * w.transpose();
    let x = if keep_positive { low_rank } else { &a + &low_rank };
    let mut out = SymMatrix::from_faer(&x);
    symmetrize(&mut out);
    Ok((out, min))
}

fn symmetrize(m: &mut SymMatrix) {
    let n = m.n;
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m.data[i * n + j] + m.data[j * n + i]);
            m.data[i * n + j] = v;
            m.data[j * n + i] = v;
        }
    }
}

/// Ascending eigenvalues by cyclic Jacobi rotations.
///
/// Slower than [`eigenvalues`] but shares no code with it, so it serves as
/// an independent check.
pub fn jacobi_eigenvalues(m: &SymMatrix) -> Vec<f64> {
    let n = m.n;
    let mut a = m.data.clone();
    symmetrize_slice(&mut a, n);
    let scale = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if scale == 0.0 {
        return vec![0.0; n];
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
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
            }
        }
    }
    let mut values: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    values.sort_by(f64::total_cmp);
    values
}

fn symmetrize_slice(a: &mut [f64], n: usize) {
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lcg_matrix(n: usize, seed: u64) -> SymMatrix {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                m.set(i, j, next());
            }
        }
        m
    }

    #[test]
    fn two_by_two() {
        let m = SymMatrix::from_row_major(2, vec![1.0, 0.5, 0.5, 1.0]);
        let e = eigenvalues(&m);
        assert!((e[0] - 0.5).abs() < 1e-15 && (e[1] - 1.5).abs() < 1e-15);
        let j = jacobi_eigenvalues(&m);
        assert!((j[0] - 0.5).abs() < 1e-15 && (j[1] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn eigh_reconstructs() {
        let m = lcg_matrix(30, 7);
        let e = eigh(&m).unwrap();
        let n = 30;
        for i in 0..n {
            for j in 0..n {
                let v: f64 = (0..n)
                    .map(|c| e.vectors[i * n + c] * e.values[c] * e.vectors[j * n + c])
                    .sum();
                assert!((v - m.get(i, j)).abs() < 1e-12);
            }
        }
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn jacobi_matches_faer() {
        for n in [1, 5, 17, 60] {
            let m = lcg_matrix(n, n as u64);
            let a = eigenvalues(&m);
            let b = jacobi_eigenvalues(&m);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-11, "n={n}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn projection_properties() {
        for (n, seed) in [(8, 1), (25, 2), (40, 3)] {
            let m = lcg_matrix(n, seed);
            let (x, min) = project_psd(&m).unwrap();
            assert!((min - eigenvalues(&m)[0]).abs() < 1e-12);
            assert!(eigenvalues(&x)[0] > -1e-12);
            let mut r = m.clone();
            for (a, b) in r.as_mut_slice().iter_mut().zip(x.as_slice()) {
                *a -= b;
            }
            // the residual is the negative part, orthogonal to the projection
            assert!(x.dot(&r).abs() < 1e-10);
            assert!(eigenvalues(&r).last().unwrap() < &1e-12);
            let (x2, _) = project_psd(&x).unwrap();
            for (a, b) in x.as_slice().iter().zip(x2.as_slice()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn psd_input_is_fixed_point_and_nsd_maps_to_zero() {
        let id = SymMatrix::identity(6);
        let (x, _) = project_psd(&id).unwrap();
        for i in 0..6 {
            assert!((x.get(i, i) - 1.0).abs() < 1e-14);
        }
        let mut neg = SymMatrix::identity(6);
        neg.as_mut_slice().iter_mut().for_each(|v| *v = -*v);
        let (x, min) = project_psd(&neg).unwrap();
        assert_eq!(min, -1.0);
        assert!(x.frobenius_norm() < 1e-14);
    }

    #[test]
    fn non_finite_rejected() {
        let m = SymMatrix::from_row_major(2, vec![f64::NAN, 0.0, 0.0, 1.0]);
        assert!(project_psd(&m).is_err());
        assert!(eigh(&m).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn trace_equals_eigenvalue_sum(seed in any::<u64>(), n in 1usize..20) {
            let m = lcg_matrix(n, seed);
            let sum: f64 = eigenvalues(&m).iter().sum();
            prop_assert!((sum - m.trace()).abs() < 1e-11);
            let jsum: f64 = jacobi_eigenvalues(&m).iter().sum();
            prop_assert!((jsum - m.trace()).abs() < 1e-11);
        }
    }
}

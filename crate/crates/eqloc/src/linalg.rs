//! Small dense matrix kernels. Everything here runs on matrices of order at
//! most eight, so plain row-major `Vec<f64>` storage and textbook algorithms
//! are adequate.

use crate::{Error, Result};

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub n: usize,
    pub a: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Mat {
        Mat { n, a: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Mat {
        let n = rows.len();
        let mut m = Mat::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n);
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut c = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self[(i, k)];
                for j in 0..n {
                    c[(i, j)] += aik * other[(k, j)];
                }
            }
        }
        c
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(x.len(), n);
        (0..n).map(|i| (0..n).map(|j| self[(i, j)] * x[j]).sum()).collect()
    }

    pub fn scale(&self, c: f64) -> Mat {
        Mat { n: self.n, a: self.a.iter().map(|v| c * v).collect() }
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!(self.n, other.n);
        Mat {
            n: self.n,
            a: self.a.iter().zip(other.a.iter()).map(|(x, y)| x + y).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Determinant by LU with partial pivoting.
    pub fn det(&self) -> f64 {
        let n = self.n;
        let mut a = self.a.clone();
        let mut det = 1.0;
        for col in 0..n {
            let mut pivot = col;
            for r in col + 1..n {
                if a[r * n + col].abs() > a[pivot * n + col].abs() {
                    pivot = r;
                }
            }
            if a[pivot * n + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot * n + j);
                }
                det = -det;
            }
            let d = a[col * n + col];
            det *= d;
            for r in col + 1..n {
                let f = a[r * n + col] / d;
                for j in col..n {
                    a[r * n + j] -= f * a[col * n + j];
                }
            }
        }
        det
    }

    /// Solve `A x = b` by LU with partial pivoting.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut a = self.a.clone();
        let mut x = b.to_vec();
        for col in 0..n {
            let mut pivot = col;
            for r in col + 1..n {
                if a[r * n + col].abs() > a[pivot * n + col].abs() {
                    pivot = r;
                }
            }
            if a[pivot * n + col].abs() < 1e-300 {
                return Err(Error::SingularMatrix);
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot * n + j);
                }
                x.swap(col, pivot);
            }
            let d = a[col * n + col];
            for r in col + 1..n {
                let f = a[r * n + col] / d;
                if f != 0.0 {
                    for j in col..n {
                        a[r * n + j] -= f * a[col * n + j];
                    }
                    x[r] -= f * x[col];
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= a[i * n + j] * x[j];
            }
            x[i] = s / a[i * n + i];
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<Mat> {
        let n = self.n;
        let mut inv = Mat::zeros(n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = self.solve(&e)?;
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        Ok(inv)
    }

    /// Cholesky factor `C` with `A = C^T C`, `C` upper triangular.
    pub fn cholesky_upper(&self) -> Result<Mat> {
        let n = self.n;
        let mut c = Mat::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut s = self[(i, j)];
                for k in 0..i {
                    s -= c[(k, i)] * c[(k, j)];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(Error::NonSpdMetric);
                    }
                    c[(i, i)] = s.sqrt();
                } else {
                    c[(i, j)] = s / c[(i, i)];
                }
            }
        }
        Ok(c)
    }

    /// Matrix exponential by scaled Taylor series. Intended for small-norm
    /// arguments (flow consistency checks use `eps * L`).
    pub fn expm(&self) -> Mat {
        let n = self.n;
        let norm = self.max_abs() * n as f64;
        let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
        let scaled = self.scale(0.5f64.powi(squarings as i32));
        let mut term = Mat::identity(n);
        let mut sum = Mat::identity(n);
        for k in 1..=20 {
            term = term.matmul(&scaled).scale(1.0 / k as f64);
            sum = sum.add(&term);
            if term.max_abs() < 1e-18 {
                break;
            }
        }
        let mut result = sum;
        for _ in 0..squarings {
            result = result.matmul(&result);
        }
        result
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.a[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.a[i * self.n + j]
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(m: &Mat) -> Vec<f64> {
    let n = m.n;
    let mut a = m.clone();
    for _ in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eig
}

/// Pfaffian of a skew-symmetric matrix by Parlett-Reid tridiagonalization
/// with partial pivoting. Convention: `pfaffian([[0, a], [-a, 0]]) = a`.
/// Returns zero for odd order.
pub fn pfaffian(m: &Mat) -> f64 {
    let n = m.n;
    if n % 2 == 1 {
        return 0.0;
    }
    if n == 0 {
        return 1.0;
    }
    let mut a = m.clone();
    let mut pf = 1.0;
    let mut k = 0;
    while k < n - 1 {
        // Pivot: largest entry in column k below the diagonal.
        let mut pivot = k + 1;
        for r in k + 2..n {
            if a[(r, k)].abs() > a[(pivot, k)].abs() {
                pivot = r;
            }
        }
        if a[(pivot, k)] == 0.0 {
            return 0.0;
        }
        if pivot != k + 1 {
            // Swap rows and columns k+1 <-> pivot; each pair flips the sign.
            for j in 0..n {
                let x = a[(k + 1, j)];
                a[(k + 1, j)] = a[(pivot, j)];
                a[(pivot, j)] = x;
            }
            for i in 0..n {
                let x = a[(i, k + 1)];
                a[(i, k + 1)] = a[(i, pivot)];
                a[(i, pivot)] = x;
            }
            pf = -pf;
        }
        let akk1 = a[(k, k + 1)];
        pf *= akk1;
        // Eliminate the rest of column k / row k with Gauss updates that
        // preserve skew symmetry.
        for r in k + 2..n {
            let f = a[(k, r)] / akk1;
            if f != 0.0 {
                for j in 0..n {
                    let upd = f * a[(k + 1, j)];
                    a[(r, j)] -= upd;
                }
                for i in 0..n {
                    let upd = f * a[(i, k + 1)];
                    a[(i, r)] -= upd;
                }
            }
        }
        k += 2;
    }
    pf
}

/// Pfaffian by recursive cofactor expansion along the first row. Exponential
/// cost; used as the independent cross-check for small orders.
pub fn pfaffian_cofactor(m: &Mat) -> f64 {
    let n = m.n;
    if n % 2 == 1 {
        return 0.0;
    }
    if n == 0 {
        return 1.0;
    }
    if n == 2 {
        return m[(0, 1)];
    }
    let mut total = 0.0;
    let mut sign = 1.0;
    for j in 1..n {
        let sub_idx: Vec<usize> = (1..n).filter(|&k| k != j).collect();
        let mut sub = Mat::zeros(n - 2);
        for (si, &i) in sub_idx.iter().enumerate() {
            for (sj, &jj) in sub_idx.iter().enumerate() {
                sub[(si, sj)] = m[(i, jj)];
            }
        }
        total += sign * m[(0, j)] * pfaffian_cofactor(&sub);
        sign = -sign;
    }
    total
}

//! Small dense matrix helpers.
//!
//! Everything in this crate works with matrices of order at most a few
//! (ball dimension plus one), so a plain row-major buffer with direct
//! algorithms is both simpler and faster than pulling in a linear algebra
//! dependency.

/// Dense square matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
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

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            data.extend_from_slice(r);
        }
        SquareMatrix { n, data }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn mul(&self, other: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.n, v.len());
        let n = self.n;
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            *o = v.iter().enumerate().map(|(j, vj)| self.get(i, j) * vj).sum();
        }
        out
    }

    pub fn transpose(&self) -> SquareMatrix {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// Entry-wise maximum absolute difference.
    pub fn max_norm_distance(&self, other: &SquareMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Determinant by LU decomposition with partial pivoting.
    pub fn det(&self) -> f64 {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for col in 0..n {
            let mut piv = col;
            let mut best = a[col * n + col].abs();
            for r in (col + 1)..n {
                let v = a[r * n + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 {
                return 0.0;
            }
            if piv != col {
                for j in 0..n {
                    a.swap(col * n + j, piv * n + j);
                }
                det = -det;
            }
            let d = a[col * n + col];
            det *= d;
            for r in (col + 1)..n {
                let f = a[r * n + col] / d;
                if f == 0.0 {
                    continue;
                }
                for j in col..n {
                    a[r * n + j] -= f * a[col * n + j];
                }
            }
        }
        det
    }

    /// Largest singular value, computed as the square root of the largest
    /// eigenvalue of `AᵀA` (cyclic Jacobi on the symmetric product).
    pub fn operator_norm(&self) -> f64 {
        let n = self.n;
        let at = self.transpose();
        let mut s = at.mul(self);
        // Cyclic Jacobi sweeps; the product matrix is symmetric PSD.
        for _sweep in 0..64 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += s.get(p, q).abs();
                }
            }
            if off < 1e-15 * (1.0 + s.data.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = s.get(p, q);
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let app = s.get(p, p);
                    let aqq = s.get(q, q);
                    let theta = 0.5 * (aqq - app) / apq;
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let sn = t * c;
                    for k in 0..n {
                        let skp = s.get(k, p);
                        let skq = s.get(k, q);
                        s.set(k, p, c * skp - sn * skq);
                        s.set(k, q, sn * skp + c * skq);
                    }
                    for k in 0..n {
                        let spk = s.get(p, k);
                        let sqk = s.get(q, k);
                        s.set(p, k, c * spk - sn * sqk);
                        s.set(q, k, sn * spk + c * sqk);
                    }
                }
            }
        }
        let mut lam = 0.0f64;
        for i in 0..n {
            lam = lam.max(s.get(i, i));
        }
        lam.max(0.0).sqrt()
    }

    /// Frobenius norm: `sqrt(Σ_ij a_ij²)`.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Max-norm residual of `RᵀR - I`.
    pub fn orthogonality_residual(&self) -> f64 {
        self.transpose()
            .mul(self)
            .max_norm_distance(&SquareMatrix::identity(self.n))
    }
}

/// Euclidean norm of a vector.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean distance between two points.
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

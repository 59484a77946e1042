//! Dense symmetric kernels for the tiny (k+1)×(k+1) systems that appear in
//! local polynomial fitting. Dimensions stay below ~8, so everything here is
//! plain row-major `Vec<f64>` without blocking.

/// Row-major dense symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.dim + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.dim + c] = v;
    }

    /// Adds `scale · v vᵀ` to the matrix.
    pub fn add_outer(&mut self, v: &[f64], scale: f64) {
        debug_assert_eq!(v.len(), self.dim);
        for r in 0..self.dim {
            let sr = scale * v[r];
            for c in 0..self.dim {
                self.data[r * self.dim + c] += sr * v[c];
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.data
            .chunks(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Eigenvalues by cyclic Jacobi rotations, sorted ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.dim;
        let mut a = self.data.clone();
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
                .map(|(r, c)| a[r * n + c] * a[r * n + c])
                .sum();
            let diag: f64 = (0..n).map(|i| a[i * n + i] * a[i * n + i]).sum();
            if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
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
                }
            }
        }
        let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
        eig.sort_by(|x, y| x.total_cmp(y));
        eig
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Solves `A x = b`. Tries Cholesky first and falls back to an LDLᵀ
    /// factorisation with symmetric diagonal pivoting. Returns `None` when
    /// both factorisations break down.
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        self.cholesky_solve(rhs)
            .or_else(|| self.pivoted_ldl_solve(rhs))
    }

    pub fn cholesky_solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.dim;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) {
                return None;
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        // L y = b, then Lᵀ x = y
        let mut y = rhs.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= l[i * n + k] * y[k];
            }
            y[i] /= l[i * n + i];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= l[k * n + i] * y[k];
            }
            y[i] /= l[i * n + i];
        }
        Some(y)
    }

    /// `P A Pᵀ = L D Lᵀ` with the largest remaining diagonal chosen as pivot.
    pub fn pivoted_ldl_solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.dim;
        let mut a = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut d = vec![0.0; n];
        let swap_sym = |a: &mut [f64], i: usize, j: usize| {
            if i == j {
                return;
            }
            for k in 0..n {
                a.swap(i * n + k, j * n + k);
            }
            for k in 0..n {
                a.swap(k * n + i, k * n + j);
            }
        };
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let piv = (j..n)
                .max_by(|&x, &y| a[x * n + x].abs().total_cmp(&a[y * n + y].abs()))
                .unwrap();
            swap_sym(&mut a, j, piv);
            perm.swap(j, piv);
            for k in 0..j {
                l.swap(j * n + k, piv * n + k);
            }
            let dj = a[j * n + j];
            if dj.abs() <= f64::EPSILON * 1e-3 {
                return None;
            }
            d[j] = dj;
            l[j * n + j] = 1.0;
            for i in (j + 1)..n {
                l[i * n + j] = a[i * n + j] / dj;
            }
            for r in (j + 1)..n {
                for c in (j + 1)..n {
                    a[r * n + c] -= l[r * n + j] * dj * l[c * n + j];
                }
            }
        }
        let mut y: Vec<f64> = perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            for k in 0..i {
                y[i] -= l[i * n + k] * y[k];
            }
        }
        for i in 0..n {
            y[i] /= d[i];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= l[k * n + i] * y[k];
            }
        }
        let mut x = vec![0.0; n];
        for (i, &p) in perm.iter().enumerate() {
            x[p] = y[i];
        }
        Some(x)
    }
}

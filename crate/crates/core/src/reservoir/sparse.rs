//! Sparse recurrent matrix and its spectral radius.

use nalgebra::DMatrix;
use rand::Rng;

/// Square sparse matrix in compressed-sparse-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCsr {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseCsr {
    /// Random sparse matrix: each entry present independently with
    /// probability `density`, values i.i.d. uniform on [-1, 1]. Draw order
    /// is row-major, one Bernoulli draw per entry followed by a value draw
    /// when present, so the pattern is reproducible from the RNG state.
    pub fn random<R: Rng>(n: usize, density: f64, rng: &mut R) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for _ in 0..n {
            for j in 0..n {
                if rng.gen::<f64>() < density {
                    col_idx.push(j as u32);
                    vals.push(rng.gen_range(-1.0..=1.0));
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            col_idx: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.vals {
            *v *= c;
        }
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.col_idx[k] as usize];
            }
            y[i] = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[k] as usize)] = self.vals[k];
            }
        }
        m
    }

    /// Rebuild from a dense matrix, keeping exact nonzeros.
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let n = m.nrows();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if v != 0.0 {
                    col_idx.push(j as u32);
                    vals.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n,
            row_ptr,
            col_idx,
            vals,
        }
    }

    /// Row-major dense bytes (little-endian f64), streamed row by row.
    pub fn write_dense_rows<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        let mut row = vec![0.0f64; self.n];
        for i in 0..self.n {
            row.iter_mut().for_each(|v| *v = 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row[self.col_idx[k] as usize] = self.vals[k];
            }
            for v in &row {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Modulus of the dominant eigenvalue by power iteration, with a two-term
/// recurrence fit so a complex dominant pair converges as well: asymptotic
/// iterates satisfy v_{k+1} = a v_k + b v_{k-1} and the dominant modulus is
/// the larger root modulus of x^2 - a x - b. Deterministic (fixed internal
/// start vector).
pub fn spectral_radius(a: &SparseCsr) -> f64 {
    let n = a.n();
    if n == 0 || a.nnz() == 0 {
        return 0.0;
    }
    // Fixed quasi-random start vector; independent of caller RNG state.
    let mut v0: Vec<f64> = (0..n)
        .map(|i| {
            let mut x = (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ 0x5de1_78ac;
            x ^= x >> 31;
            x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
            x ^= x >> 29;
            (x as f64 / u64::MAX as f64) - 0.5
        })
        .collect();
    normalize(&mut v0);
    let mut v1 = vec![0.0; n];
    a.matvec(&v0, &mut v1);
    let s1 = norm(&v1);
    if s1 == 0.0 {
        return 0.0;
    }
    scale(&mut v1, 1.0 / s1);

    // Iterate with unit vectors and explicit scale bookkeeping:
    // A prev = s_cur * cur, A cur = s_next * next, so in unnormalized terms
    // w0 = prev, w1 = s_cur cur, w2 = s_cur s_next next.
    let mut prev = v0;
    let mut cur = v1;
    let mut next = vec![0.0; n];
    let mut s_cur = s1;
    let mut est = s1;
    for iter in 0..200_000 {
        a.matvec(&cur, &mut next);
        let s_next = norm(&next);
        if s_next == 0.0 {
            return 0.0;
        }
        scale(&mut next, 1.0 / s_next);
        let mut g11 = 0.0;
        let mut g12 = 0.0;
        let mut g22 = 0.0;
        let mut r1 = 0.0;
        let mut r2 = 0.0;
        for i in 0..a.n() {
            let x1 = s_cur * cur[i];
            let x2 = prev[i];
            let y = s_cur * s_next * next[i];
            g11 += x1 * x1;
            g12 += x1 * x2;
            g22 += x2 * x2;
            r1 += x1 * y;
            r2 += x2 * y;
        }
        let det = g11 * g22 - g12 * g12;
        let new_est = if det.abs() > 1e-300 {
            let alpha = (r1 * g22 - r2 * g12) / det;
            let beta = (g11 * r2 - g12 * r1) / det;
            let disc = 0.25 * alpha * alpha + beta;
            if disc >= 0.0 {
                let q = disc.sqrt();
                (0.5 * alpha + q).abs().max((0.5 * alpha - q).abs())
            } else {
                (-beta).sqrt()
            }
        } else {
            s_next
        };
        if iter > 64 && (new_est - est).abs() <= 1e-13 * est.max(1e-300) {
            return new_est;
        }
        est = new_est;
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        s_cur = s_next;
    }
    est
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn scale(v: &mut [f64], c: f64) {
    v.iter_mut().for_each(|x| *x *= c);
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        scale(v, 1.0 / n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dense_spectral_radius(m: &DMatrix<f64>) -> f64 {
        m.complex_eigenvalues()
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn matvec_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = SparseCsr::random(40, 0.2, &mut rng);
        let dense = a.to_dense();
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut y = vec![0.0; 40];
        a.matvec(&x, &mut y);
        let xd = nalgebra::DVector::from_column_slice(&x);
        let yd = &dense * xd;
        for i in 0..40 {
            assert!((y[i] - yd[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn dense_roundtrip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = SparseCsr::random(25, 0.1, &mut rng);
        let back = SparseCsr::from_dense(&a.to_dense());
        assert_eq!(a, back);
    }

    #[test]
    fn spectral_radius_matches_dense_eigenvalues() {
        for (seed, n, density) in [(1u64, 60, 0.1), (2, 100, 0.05), (9, 2, 1.0), (4, 30, 0.5)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = SparseCsr::random(n, density, &mut rng);
            let est = spectral_radius(&a);
            let truth = dense_spectral_radius(&a.to_dense());
            assert!(
                (est - truth).abs() <= 1e-7 * truth.max(1e-12),
                "n={n} seed={seed}: est {est} vs dense {truth}"
            );
        }
    }

    #[test]
    fn spectral_radius_of_zero_matrix_is_zero() {
        assert_eq!(spectral_radius(&SparseCsr::zeros(10)), 0.0);
    }

    #[test]
    fn spectral_radius_handles_nilpotent() {
        // Strictly upper triangular: all eigenvalues zero although nnz > 0.
        let mut m = DMatrix::zeros(5, 5);
        m[(0, 1)] = 2.0;
        m[(1, 3)] = -1.0;
        let a = SparseCsr::from_dense(&m);
        assert!(spectral_radius(&a) < 1e-8);
    }
}

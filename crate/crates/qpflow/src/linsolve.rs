//! Symmetric profile (skyline) storage with an LDL^T factorization and a
//! Levenberg-style diagonal shift for indefinite matrices. Rows store the
//! lower triangle from the first structurally nonzero column through the
//! diagonal, which is all a lattice-stencil matrix needs.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SkylineMatrix {
    n: usize,
    col_start: Vec<usize>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineMatrix {
    /// `col_start[i]` is the first stored column of row i (must be <= i).
    pub fn new(col_start: Vec<usize>) -> SkylineMatrix {
        let n = col_start.len();
        let mut offsets = Vec::with_capacity(n);
        let mut len = 0usize;
        for (i, &c) in col_start.iter().enumerate() {
            assert!(c <= i, "profile row {i} starts after the diagonal");
            offsets.push(len);
            len += i - c + 1;
        }
        SkylineMatrix {
            n,
            col_start,
            offsets,
            data: vec![0.0; len],
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn reset(&mut self) {
        self.data.fill(0.0);
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && j >= self.col_start[i]);
        self.offsets[i] + (j - self.col_start[i])
    }

    /// Adds into the symmetric matrix. Entries above the diagonal are the
    /// mirror of stored ones and are ignored, so assembling a full symmetric
    /// block keeps the lower triangle consistent.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if j > i {
            return;
        }
        assert!(
            j >= self.col_start[i],
            "entry ({i},{j}) outside the profile"
        );
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn add_diag(&mut self, i: usize, v: f64) {
        let s = self.slot(i, i);
        self.data[s] += v;
    }

    pub fn scale_all(&mut self, alpha: f64) {
        for v in &mut self.data {
            *v *= alpha;
        }
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.data[self.slot(i, i)]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let c = self.col_start[i];
            let row = &self.data[self.offsets[i]..=self.slot(i, i)];
            let mut acc = row[i - c] * x[i];
            for (k, &a) in row[..i - c].iter().enumerate() {
                let j = c + k;
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc;
        }
        y
    }

    /// LDL^T with `shift` added to every diagonal entry. Indefinite
    /// matrices factor fine (D may have negative entries); the attempt
    /// fails with the offending row only when a pivot degenerates.
    pub fn ldlt(&self, shift: f64) -> std::result::Result<SkylineFactor, usize> {
        let n = self.n;
        let mut lower = self.data.clone();
        let mut diag = vec![0.0; n];
        let scale = (0..n)
            .map(|i| self.diag(i).abs())
            .fold(0.0f64, f64::max)
            .max(1.0);
        let floor = 1e-13 * scale;
        for i in 0..n {
            let ci = self.col_start[i];
            let oi = self.offsets[i];
            for j in ci..i {
                let cj = self.col_start[j];
                let oj = self.offsets[j];
                let lo = ci.max(cj);
                let mut sum = 0.0;
                for k in lo..j {
                    sum += lower[oi + (k - ci)] * diag[k] * lower[oj + (k - cj)];
                }
                let idx = oi + (j - ci);
                lower[idx] = (lower[idx] - sum) / diag[j];
            }
            let mut d = lower[oi + (i - ci)] + shift;
            for k in ci..i {
                let l = lower[oi + (k - ci)];
                d -= l * l * diag[k];
            }
            if !d.is_finite() || d.abs() <= floor {
                return Err(i);
            }
            diag[i] = d;
            lower[oi + (i - ci)] = 1.0;
        }
        Ok(SkylineFactor {
            n,
            col_start: self.col_start.clone(),
            offsets: self.offsets.clone(),
            lower,
            diag,
            shift,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SkylineFactor {
    n: usize,
    col_start: Vec<usize>,
    offsets: Vec<usize>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    pub shift: f64,
}

impl SkylineFactor {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = b.to_vec();
        for i in 0..self.n {
            let ci = self.col_start[i];
            let oi = self.offsets[i];
            let mut acc = x[i];
            for k in ci..i {
                acc -= self.lower[oi + (k - ci)] * x[k];
            }
            x[i] = acc;
        }
        for i in 0..self.n {
            x[i] /= self.diag[i];
        }
        for i in (0..self.n).rev() {
            let ci = self.col_start[i];
            let oi = self.offsets[i];
            let xi = x[i];
            for k in ci..i {
                x[k] -= self.lower[oi + (k - ci)] * xi;
            }
        }
        x
    }
}

/// Factors with escalating diagonal shifts until elimination survives.
/// Returns the factor; `factor.shift` records the shift that succeeded.
pub fn factor_with_shift(mat: &SkylineMatrix, base_shift: f64) -> Result<SkylineFactor> {
    if let Ok(f) = mat.ldlt(base_shift) {
        return Ok(f);
    }
    let scale = (0..mat.order())
        .map(|i| mat.diag(i).abs())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let mut shift = base_shift.max(1e-10 * scale);
    for _ in 0..60 {
        if let Ok(f) = mat.ldlt(shift) {
            return Ok(f);
        }
        shift *= 10.0;
    }
    Err(Error::SolverStall {
        iterations: 60,
        residual: shift,
    })
}

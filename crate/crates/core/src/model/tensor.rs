//! Minimal row-major dense matrix used by the recurrent network.
//!
//! Operations that read a "column range" treat `W[:, off..off+len]` as its
//! own matrix, which lets `W [a; b]` over a concatenated input be evaluated
//! as two partial products without building the concatenation.

use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Mat { rows, cols, data }
    }

    pub fn uniform<R: Rng + ?Sized>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Mat { rows, cols, data }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// out += W x
    pub fn matvec_add(&self, x: &[f64], out: &mut [f64]) {
        self.matvec_add_cols(0, x, out);
    }

    /// out += W[:, off..off+x.len()] x
    pub fn matvec_add_cols(&self, off: usize, x: &[f64], out: &mut [f64]) {
        debug_assert!(off + x.len() <= self.cols && out.len() == self.rows);
        for (row, o) in self.data.chunks_exact(self.cols).zip(out.iter_mut()) {
            *o += dot(&row[off..off + x.len()], x);
        }
    }

    /// out += Wᵀ d
    pub fn matvec_t_add(&self, d: &[f64], out: &mut [f64]) {
        self.matvec_t_add_cols(0, d, out);
    }

    /// out += W[:, off..off+out.len()]ᵀ d
    pub fn matvec_t_add_cols(&self, off: usize, d: &[f64], out: &mut [f64]) {
        debug_assert!(off + out.len() <= self.cols && d.len() == self.rows);
        let n = out.len();
        for (row, &di) in self.data.chunks_exact(self.cols).zip(d) {
            if di != 0.0 {
                axpy(di, &row[off..off + n], out);
            }
        }
    }

    /// W += d xᵀ
    pub fn outer_add(&mut self, d: &[f64], x: &[f64]) {
        self.outer_add_cols(0, d, x);
    }

    /// W[:, off..off+x.len()] += d xᵀ
    pub fn outer_add_cols(&mut self, off: usize, d: &[f64], x: &[f64]) {
        debug_assert!(off + x.len() <= self.cols && d.len() == self.rows);
        let cols = self.cols;
        for (row, &di) in self.data.chunks_exact_mut(cols).zip(d) {
            if di != 0.0 {
                axpy(di, x, &mut row[off..off + x.len()]);
            }
        }
    }

    /// Adds `d` to the data viewed as a flat vector (biases are `n × 1`).
    pub fn add_vec(&mut self, d: &[f64]) {
        axpy(1.0, d, &mut self.data);
    }

    pub fn add_scaled(&mut self, other: &Mat, scale: f64) {
        debug_assert_eq!(self.shape(), other.shape());
        axpy(scale, &other.data, &mut self.data);
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// y += a x
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|&l| l - lse).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_range_products() {
        // W = [[1 2 3], [4 5 6]]
        let w = Mat::from_vec(2, 3, vec![1., 2., 3., 4., 5., 6.]);
        let mut out = vec![0.0; 2];
        w.matvec_add_cols(1, &[1., 1.], &mut out);
        assert_eq!(out, vec![5., 11.]);
        let mut back = vec![0.0; 2];
        w.matvec_t_add_cols(1, &[1., 2.], &mut back);
        assert_eq!(back, vec![12., 15.]);
        let mut g = Mat::zeros(2, 3);
        g.outer_add_cols(2, &[1., 2.], &[3.]);
        assert_eq!(g.data, vec![0., 0., 3., 0., 0., 6.]);
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax(&[1000.0, 1000.0]);
        assert_eq!(p, vec![0.5, 0.5]);
        let lp = log_softmax(&[0.0, 0.0, 0.0]);
        assert!((lp[0] + 3f64.ln()).abs() < 1e-15);
        assert!((sigmoid(-800.0)).abs() < 1e-300);
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }
}

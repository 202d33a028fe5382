//! LSTM and GRU steps with cached activations for backpropagation.

use super::params::CellParams;
use super::tensor::sigmoid;
use super::RnnType;

#[derive(Debug, Clone)]
pub struct LstmCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// activated gates, `[i; f; g; o]`
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GruCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    /// `W_hn h_prev`, the reset-gated term
    hn: Vec<f64>,
    h: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum CellCache {
    Lstm(LstmCache),
    Gru(GruCache),
}

impl CellCache {
    pub fn h(&self) -> &[f64] {
        match self {
            CellCache::Lstm(c) => &c.h,
            CellCache::Gru(c) => &c.h,
        }
    }

    /// Cell state; empty for GRU.
    pub fn c(&self) -> &[f64] {
        match self {
            CellCache::Lstm(c) => &c.c,
            CellCache::Gru(_) => &[],
        }
    }
}

pub fn forward(p: &CellParams, x: &[f64], h: &[f64], c: &[f64]) -> CellCache {
    let hd = p.hidden();
    match p.kind {
        RnnType::Lstm => {
            let mut a = p.b.data.clone();
            p.w_x.matvec_add(x, &mut a);
            p.w_h.matvec_add(h, &mut a);
            for (k, v) in a.iter_mut().enumerate() {
                *v = if (2 * hd..3 * hd).contains(&k) {
                    v.tanh()
                } else {
                    sigmoid(*v)
                };
            }
            let (i, rest) = a.split_at(hd);
            let (f, rest) = rest.split_at(hd);
            let (g, o) = rest.split_at(hd);
            let c_new: Vec<f64> = (0..hd).map(|k| f[k] * c[k] + i[k] * g[k]).collect();
            let tanh_c: Vec<f64> = c_new.iter().map(|v| v.tanh()).collect();
            let h_new: Vec<f64> = (0..hd).map(|k| o[k] * tanh_c[k]).collect();
            CellCache::Lstm(LstmCache {
                x: x.to_vec(),
                h_prev: h.to_vec(),
                c_prev: c.to_vec(),
                gates: a,
                c: c_new,
                tanh_c,
                h: h_new,
            })
        }
        RnnType::Gru => {
            let mut ax = p.b.data.clone();
            p.w_x.matvec_add(x, &mut ax);
            let mut ah = vec![0.0; 3 * hd];
            p.w_h.matvec_add(h, &mut ah);
            let r: Vec<f64> = (0..hd).map(|k| sigmoid(ax[k] + ah[k])).collect();
            let z: Vec<f64> = (0..hd).map(|k| sigmoid(ax[hd + k] + ah[hd + k])).collect();
            let hn = ah[2 * hd..].to_vec();
            let n: Vec<f64> = (0..hd)
                .map(|k| (ax[2 * hd + k] + r[k] * hn[k]).tanh())
                .collect();
            let h_new: Vec<f64> = (0..hd).map(|k| (1.0 - z[k]) * n[k] + z[k] * h[k]).collect();
            CellCache::Gru(GruCache {
                x: x.to_vec(),
                h_prev: h.to_vec(),
                r,
                z,
                n,
                hn,
                h: h_new,
            })
        }
    }
}

/// Gradients flowing out of one step.
pub struct CellGrads {
    pub dx: Vec<f64>,
    pub dh_prev: Vec<f64>,
    /// empty for GRU
    pub dc_prev: Vec<f64>,
}

/// Backpropagates `dh` (and `dc` for LSTM) through one step, accumulating
/// weight gradients into `g`.
pub fn backward(
    p: &CellParams,
    cache: &CellCache,
    dh: &[f64],
    dc: &[f64],
    g: &mut CellParams,
) -> CellGrads {
    let mut dx = vec![0.0; p.input()];
    let mut dh_prev = vec![0.0; p.hidden()];
    match cache {
        CellCache::Lstm(s) => {
            let hd = p.hidden();
            let (i, rest) = s.gates.split_at(hd);
            let (f, rest) = rest.split_at(hd);
            let (gg, o) = rest.split_at(hd);
            let mut da = vec![0.0; 4 * hd];
            let mut dc_prev = vec![0.0; hd];
            for k in 0..hd {
                let d_o = dh[k] * s.tanh_c[k];
                let dct = dc[k] + dh[k] * o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
                let d_f = dct * s.c_prev[k];
                let d_i = dct * gg[k];
                let d_g = dct * i[k];
                dc_prev[k] = dct * f[k];
                da[k] = d_i * i[k] * (1.0 - i[k]);
                da[hd + k] = d_f * f[k] * (1.0 - f[k]);
                da[2 * hd + k] = d_g * (1.0 - gg[k] * gg[k]);
                da[3 * hd + k] = d_o * o[k] * (1.0 - o[k]);
            }
            g.w_x.outer_add(&da, &s.x);
            g.w_h.outer_add(&da, &s.h_prev);
            g.b.add_vec(&da);
            p.w_x.matvec_t_add(&da, &mut dx);
            p.w_h.matvec_t_add(&da, &mut dh_prev);
            CellGrads {
                dx,
                dh_prev,
                dc_prev,
            }
        }
        CellCache::Gru(s) => {
            let hd = p.hidden();
            let mut da_x = vec![0.0; 3 * hd];
            let mut da_h = vec![0.0; 3 * hd];
            for k in 0..hd {
                let dn = dh[k] * (1.0 - s.z[k]);
                let dz = dh[k] * (s.h_prev[k] - s.n[k]);
                dh_prev[k] = dh[k] * s.z[k];
                let dan = dn * (1.0 - s.n[k] * s.n[k]);
                let dr = dan * s.hn[k];
                let dar = dr * s.r[k] * (1.0 - s.r[k]);
                let daz = dz * s.z[k] * (1.0 - s.z[k]);
                da_x[k] = dar;
                da_x[hd + k] = daz;
                da_x[2 * hd + k] = dan;
                da_h[k] = dar;
                da_h[hd + k] = daz;
                da_h[2 * hd + k] = dan * s.r[k];
            }
            g.w_x.outer_add(&da_x, &s.x);
            g.b.add_vec(&da_x);
            g.w_h.outer_add(&da_h, &s.h_prev);
            p.w_x.matvec_t_add(&da_x, &mut dx);
            p.w_h.matvec_t_add(&da_h, &mut dh_prev);
            CellGrads {
                dx,
                dh_prev,
                dc_prev: Vec::new(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tensor::Mat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cell(kind: RnnType, input: usize, hidden: usize, seed: u64) -> CellParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = kind.gates() * hidden;
        CellParams {
            kind,
            w_x: Mat::uniform(g, input, 0.5, &mut rng),
            w_h: Mat::uniform(g, hidden, 0.5, &mut rng),
            b: Mat::uniform(g, 1, 0.5, &mut rng),
        }
    }

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    // Scalar-loop oracle: every gate pre-activation is its own explicit sum.
    fn lstm_oracle(p: &CellParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let hd = h.len();
        let pre = |row: usize| {
            let mut s = p.b.data[row];
            for j in 0..x.len() {
                s += p.w_x.data[row * x.len() + j] * x[j];
            }
            for (j, &hj) in h.iter().enumerate() {
                s += p.w_h.data[row * hd + j] * hj;
            }
            s
        };
        let mut h_out = vec![0.0; hd];
        let mut c_out = vec![0.0; hd];
        for k in 0..hd {
            let i = sig(pre(k));
            let f = sig(pre(hd + k));
            let g = pre(2 * hd + k).tanh();
            let o = sig(pre(3 * hd + k));
            c_out[k] = f * c[k] + i * g;
            h_out[k] = o * c_out[k].tanh();
        }
        (h_out, c_out)
    }

    fn gru_oracle(p: &CellParams, x: &[f64], h: &[f64]) -> Vec<f64> {
        let hd = h.len();
        let wx = |row: usize| {
            (0..x.len())
                .map(|j| p.w_x.data[row * x.len() + j] * x[j])
                .sum::<f64>()
                + p.b.data[row]
        };
        let wh = |row: usize| {
            (0..hd)
                .map(|j| p.w_h.data[row * hd + j] * h[j])
                .sum::<f64>()
        };
        (0..hd)
            .map(|k| {
                let r = sig(wx(k) + wh(k));
                let z = sig(wx(hd + k) + wh(hd + k));
                let n = (wx(2 * hd + k) + r * wh(2 * hd + k)).tanh();
                (1.0 - z) * n + z * h[k]
            })
            .collect()
    }

    #[test]
    fn zero_lstm_stays_zero() {
        let p = CellParams::zeros(RnnType::Lstm, 3, 4);
        let (h, c) = p.lstm_step(&[0.0; 3], &[0.0; 4], &[0.0; 4]);
        assert_eq!(h, vec![0.0; 4]);
        assert_eq!(c, vec![0.0; 4]);
    }

    #[test]
    fn saturated_forget_gate_is_pure_memory() {
        let mut p = CellParams::zeros(RnnType::Lstm, 2, 3);
        p.b.data[0..3].fill(-1e3); // input gate closed
        p.b.data[3..6].fill(1e3); // forget gate open
        let c = vec![0.3, -0.7, 1.2];
        let (_, c_new) = p.lstm_step(&[0.5, -0.5], &[0.1, 0.2, 0.3], &c);
        assert_eq!(c_new, c);
    }

    #[test]
    fn lstm_matches_scalar_oracle() {
        let p = random_cell(RnnType::Lstm, 5, 7, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (x, h, c) = (
            random_vec(5, &mut rng),
            random_vec(7, &mut rng),
            random_vec(7, &mut rng),
        );
        let (h1, c1) = p.lstm_step(&x, &h, &c);
        let (h2, c2) = lstm_oracle(&p, &x, &h, &c);
        for k in 0..7 {
            assert!((h1[k] - h2[k]).abs() < 1e-12);
            assert!((c1[k] - c2[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_gru_stays_zero() {
        let p = CellParams::zeros(RnnType::Gru, 3, 4);
        assert_eq!(p.gru_step(&[0.0; 3], &[0.0; 4]), vec![0.0; 4]);
    }

    #[test]
    fn closed_update_gate_carries_state() {
        let mut p = random_cell(RnnType::Gru, 2, 3, 5);
        p.b.data[3..6].fill(1e3);
        let h = vec![0.25, -0.5, 0.75];
        assert_eq!(p.gru_step(&[1.0, -1.0], &h), h);
    }

    #[test]
    fn gru_matches_scalar_oracle() {
        let p = random_cell(RnnType::Gru, 4, 6, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let (x, h) = (random_vec(4, &mut rng), random_vec(6, &mut rng));
        let a = p.gru_step(&x, &h);
        let b = gru_oracle(&p, &x, &h);
        for k in 0..6 {
            assert!((a[k] - b[k]).abs() < 1e-12);
        }
    }

    fn check_cell_gradients(kind: RnnType) {
        // loss = w·h' + u·c' for fixed random w, u
        let p = random_cell(kind, 3, 4, 31);
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let x = random_vec(3, &mut rng);
        let h = random_vec(4, &mut rng);
        let c = if kind == RnnType::Lstm {
            random_vec(4, &mut rng)
        } else {
            vec![]
        };
        let wh = random_vec(4, &mut rng);
        let wc = if kind == RnnType::Lstm {
            random_vec(4, &mut rng)
        } else {
            vec![]
        };
        let loss = |p: &CellParams, x: &[f64], h: &[f64], c: &[f64]| {
            let out = forward(p, x, h, c);
            out.h().iter().zip(&wh).map(|(a, b)| a * b).sum::<f64>()
                + out.c().iter().zip(&wc).map(|(a, b)| a * b).sum::<f64>()
        };
        let cache = forward(&p, &x, &h, &c);
        let mut g = CellParams::zeros(kind, 3, 4);
        let grads = backward(&p, &cache, &wh, &wc, &mut g);
        let eps = 1e-6;
        let fd = |f: &dyn Fn(f64) -> f64| (f(eps) - f(-eps)) / (2.0 * eps);
        for k in 0..3 {
            let num = fd(&|e| {
                let mut x2 = x.clone();
                x2[k] += e;
                loss(&p, &x2, &h, &c)
            });
            assert!((num - grads.dx[k]).abs() < 1e-8);
        }
        for k in 0..4 {
            let num = fd(&|e| {
                let mut h2 = h.clone();
                h2[k] += e;
                loss(&p, &x, &h2, &c)
            });
            assert!((num - grads.dh_prev[k]).abs() < 1e-8);
        }
        for k in 0..g.w_h.data.len() {
            let num = fd(&|e| {
                let mut p2 = p.clone();
                p2.w_h.data[k] += e;
                loss(&p2, &x, &h, &c)
            });
            assert!((num - g.w_h.data[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn lstm_step_gradients() {
        check_cell_gradients(RnnType::Lstm);
    }

    #[test]
    fn gru_step_gradients() {
        check_cell_gradients(RnnType::Gru);
    }
}

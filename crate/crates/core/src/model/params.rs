use rand::Rng;

use super::tensor::Mat;
use super::{AttentionKind, ModelConfig, ModelError, RnnType};

pub const INIT_BOUND: f64 = 0.08;
pub const FORGET_BIAS: f64 = 1.0;

/// Weights of one recurrent cell, gate blocks stacked row-wise:
/// LSTM `[i; f; g; o]`, GRU `[r; z; n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellParams {
    pub kind: RnnType,
    pub w_x: Mat,
    pub w_h: Mat,
    pub b: Mat,
}

impl CellParams {
    pub fn zeros(kind: RnnType, input: usize, hidden: usize) -> Self {
        let g = kind.gates() * hidden;
        CellParams {
            kind,
            w_x: Mat::zeros(g, input),
            w_h: Mat::zeros(g, hidden),
            b: Mat::zeros(g, 1),
        }
    }

    fn init<R: Rng + ?Sized>(kind: RnnType, input: usize, hidden: usize, rng: &mut R) -> Self {
        let g = kind.gates() * hidden;
        let w_x = Mat::uniform(g, input, INIT_BOUND, rng);
        let w_h = Mat::uniform(g, hidden, INIT_BOUND, rng);
        let mut b = Mat::uniform(g, 1, INIT_BOUND, rng);
        if kind == RnnType::Lstm {
            b.data[hidden..2 * hidden].fill(FORGET_BIAS);
        }
        CellParams { kind, w_x, w_h, b }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.cols
    }

    pub fn input(&self) -> usize {
        self.w_x.cols
    }

    /// One LSTM step: `i, f, o = σ(·)`, `g = tanh(·)`, `c' = f⊙c + i⊙g`,
    /// `h' = o⊙tanh(c')`.
    pub fn lstm_step(&self, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(self.kind, RnnType::Lstm);
        let cache = super::cell::forward(self, x, h, c);
        (cache.h().to_vec(), cache.c().to_vec())
    }

    /// One GRU step: `r, z = σ(·)`, `n = tanh(W_xn x + b_n + r⊙(W_hn h))`,
    /// `h' = (1−z)⊙n + z⊙h`.
    pub fn gru_step(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        assert_eq!(self.kind, RnnType::Gru);
        super::cell::forward(self, x, h, &[]).h().to_vec()
    }
}

/// Maps `[forward; backward]` direction outputs back to the hidden size.
#[derive(Debug, Clone, PartialEq)]
pub struct BiProjection {
    pub w: Mat,
    pub b: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    pub fwd: CellParams,
    pub bwd: Option<CellParams>,
    pub proj: Option<BiProjection>,
}

/// `w_a` is `H×H` for general scoring and `H×2H` (applied to `[h_d; h_e]`)
/// for concat; `v_a` exists only for concat. `w_c` combines
/// `[context; h_d]` into the attentional hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub kind: AttentionKind,
    pub w_a: Option<Mat>,
    pub v_a: Option<Mat>,
    pub w_c: Mat,
}

/// Every trainable tensor of the encoder-decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub input_w: Mat,
    pub input_b: Mat,
    pub encoder: Vec<EncoderLayer>,
    pub embedding: Mat,
    pub decoder: CellParams,
    pub attention: Option<AttentionParams>,
    pub out_w: Mat,
    pub out_b: Mat,
}

impl ModelParams {
    /// Uniform(−0.08, 0.08) everywhere except LSTM forget-gate biases (1.0).
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<Self, ModelError> {
        config.validate()?;
        Ok(Self::build(
            config,
            &mut |kind, rows, cols, role| match role {
                Role::Cell(input) => CellParams::init(kind, input, rows, rng).into(),
                Role::Plain => Mat::uniform(rows, cols, INIT_BOUND, rng).into(),
            },
        ))
    }

    /// All-zero tensors shaped for `config`; used as a gradient buffer.
    pub fn zeros(config: &ModelConfig) -> Self {
        Self::build(config, &mut |kind, rows, cols, role| match role {
            Role::Cell(input) => CellParams::zeros(kind, input, rows).into(),
            Role::Plain => Mat::zeros(rows, cols).into(),
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.config)
    }

    fn build(
        config: &ModelConfig,
        make: &mut dyn FnMut(RnnType, usize, usize, Role) -> Built,
    ) -> Self {
        let h = config.hidden_units;
        let kind = config.rnn_type;
        let input_w = make(kind, h, config.feature_dim, Role::Plain).mat();
        let input_b = make(kind, h, 1, Role::Plain).mat();
        let encoder = (0..config.encoder_layers)
            .map(|_| EncoderLayer {
                fwd: make(kind, h, 0, Role::Cell(h)).cell(),
                bwd: config
                    .bidirectional
                    .then(|| make(kind, h, 0, Role::Cell(h)).cell()),
                proj: config.bidirectional.then(|| BiProjection {
                    w: make(kind, h, 2 * h, Role::Plain).mat(),
                    b: make(kind, h, 1, Role::Plain).mat(),
                }),
            })
            .collect();
        let embedding = make(kind, config.vocab_size, config.embed_dim, Role::Plain).mat();
        let decoder = make(kind, h, 0, Role::Cell(config.embed_dim)).cell();
        let attention = match config.attention {
            AttentionKind::None => None,
            k => Some(AttentionParams {
                kind: k,
                w_a: match k {
                    AttentionKind::General => Some(make(kind, h, h, Role::Plain).mat()),
                    AttentionKind::Concat => Some(make(kind, h, 2 * h, Role::Plain).mat()),
                    _ => None,
                },
                v_a: (k == AttentionKind::Concat).then(|| make(kind, h, 1, Role::Plain).mat()),
                w_c: make(kind, h, 2 * h, Role::Plain).mat(),
            }),
        };
        let out_w = make(kind, config.vocab_size, h, Role::Plain).mat();
        let out_b = make(kind, config.vocab_size, 1, Role::Plain).mat();
        ModelParams {
            config: config.clone(),
            input_w,
            input_b,
            encoder,
            embedding,
            decoder,
            attention,
            out_w,
            out_b,
        }
    }

    /// Named tensors in a fixed order (the checkpoint and optimizer order).
    pub fn named(&self) -> Vec<(String, &Mat)> {
        let mut out: Vec<(String, &Mat)> = vec![
            ("input.w".into(), &self.input_w),
            ("input.b".into(), &self.input_b),
        ];
        for (l, layer) in self.encoder.iter().enumerate() {
            push_cell(&mut out, &format!("encoder.{l}.fwd"), &layer.fwd);
            if let Some(bwd) = &layer.bwd {
                push_cell(&mut out, &format!("encoder.{l}.bwd"), bwd);
            }
            if let Some(p) = &layer.proj {
                out.push((format!("encoder.{l}.proj.w"), &p.w));
                out.push((format!("encoder.{l}.proj.b"), &p.b));
            }
        }
        out.push(("embedding".into(), &self.embedding));
        push_cell(&mut out, "decoder", &self.decoder);
        if let Some(a) = &self.attention {
            if let Some(w) = &a.w_a {
                out.push(("attention.w_a".into(), w));
            }
            if let Some(v) = &a.v_a {
                out.push(("attention.v_a".into(), v));
            }
            out.push(("attention.w_c".into(), &a.w_c));
        }
        out.push(("output.w".into(), &self.out_w));
        out.push(("output.b".into(), &self.out_b));
        out
    }

    /// Mutable counterpart of [`named`](Self::named), same order.
    pub fn named_mut(&mut self) -> Vec<(String, &mut Mat)> {
        let mut out: Vec<(String, &mut Mat)> = vec![
            ("input.w".into(), &mut self.input_w),
            ("input.b".into(), &mut self.input_b),
        ];
        for (l, layer) in self.encoder.iter_mut().enumerate() {
            push_cell_mut(&mut out, &format!("encoder.{l}.fwd"), &mut layer.fwd);
            if let Some(bwd) = &mut layer.bwd {
                push_cell_mut(&mut out, &format!("encoder.{l}.bwd"), bwd);
            }
            if let Some(p) = &mut layer.proj {
                out.push((format!("encoder.{l}.proj.w"), &mut p.w));
                out.push((format!("encoder.{l}.proj.b"), &mut p.b));
            }
        }
        out.push(("embedding".into(), &mut self.embedding));
        push_cell_mut(&mut out, "decoder", &mut self.decoder);
        if let Some(a) = &mut self.attention {
            if let Some(w) = &mut a.w_a {
                out.push(("attention.w_a".into(), w));
            }
            if let Some(v) = &mut a.v_a {
                out.push(("attention.v_a".into(), v));
            }
            out.push(("attention.w_c".into(), &mut a.w_c));
        }
        out.push(("output.w".into(), &mut self.out_w));
        out.push(("output.b".into(), &mut self.out_b));
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.named().iter().map(|(_, m)| m.data.len()).sum()
    }

    /// self += scale · other
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for ((_, a), (_, b)) in self.named_mut().into_iter().zip(other.named()) {
            a.add_scaled(b, scale);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (_, m) in self.named_mut() {
            m.data.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.named()
            .iter()
            .flat_map(|(_, m)| m.data.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.named()
            .iter()
            .all(|(_, m)| m.data.iter().all(|x| x.is_finite()))
    }

    /// Rounds every value to the nearest f32, the checkpoint precision.
    pub fn round_to_f32(&mut self) {
        for (_, m) in self.named_mut() {
            m.data.iter_mut().for_each(|x| *x = *x as f32 as f64);
        }
    }

    /// Copies external vectors into embedding rows. Returns rows replaced.
    pub fn load_embeddings(
        &mut self,
        rows: impl IntoIterator<Item = (usize, Vec<f64>)>,
    ) -> Result<usize, ModelError> {
        let mut n = 0;
        for (id, v) in rows {
            if v.len() != self.embedding.cols {
                return Err(ModelError::Shape(format!(
                    "embedding vector has {} dims, model expects {}",
                    v.len(),
                    self.embedding.cols
                )));
            }
            if id < self.embedding.rows {
                self.embedding.row_mut(id).copy_from_slice(&v);
                n += 1;
            }
        }
        Ok(n)
    }
}

enum Role {
    Cell(usize),
    Plain,
}

enum Built {
    Cell(CellParams),
    Mat(Mat),
}

impl From<CellParams> for Built {
    fn from(c: CellParams) -> Self {
        Built::Cell(c)
    }
}

impl From<Mat> for Built {
    fn from(m: Mat) -> Self {
        Built::Mat(m)
    }
}

impl Built {
    fn mat(self) -> Mat {
        match self {
            Built::Mat(m) => m,
            Built::Cell(_) => unreachable!("expected a matrix"),
        }
    }

    fn cell(self) -> CellParams {
        match self {
            Built::Cell(c) => c,
            Built::Mat(_) => unreachable!("expected a cell"),
        }
    }
}

fn push_cell<'a>(out: &mut Vec<(String, &'a Mat)>, prefix: &str, cell: &'a CellParams) {
    out.push((format!("{prefix}.w_x"), &cell.w_x));
    out.push((format!("{prefix}.w_h"), &cell.w_h));
    out.push((format!("{prefix}.b"), &cell.b));
}

fn push_cell_mut<'a>(out: &mut Vec<(String, &'a mut Mat)>, prefix: &str, cell: &'a mut CellParams) {
    out.push((format!("{prefix}.w_x"), &mut cell.w_x));
    out.push((format!("{prefix}.w_h"), &mut cell.w_h));
    out.push((format!("{prefix}.b"), &mut cell.b));
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(kind: RnnType, attention: AttentionKind, bi: bool, layers: usize) -> ModelConfig {
        ModelConfig {
            rnn_type: kind,
            hidden_units: 8,
            bidirectional: bi,
            encoder_layers: layers,
            attention,
            embed_dim: 6,
            feature_dim: 5,
            vocab_size: 12,
            ..Default::default()
        }
    }

    #[test]
    fn init_shapes_and_forget_bias() {
        let c = cfg(RnnType::Lstm, AttentionKind::Concat, true, 2);
        let p = ModelParams::init(&c, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(p.encoder.len(), 2);
        assert_eq!(p.encoder[0].fwd.w_x.shape(), (32, 8));
        assert_eq!(p.decoder.w_x.shape(), (32, 6));
        assert_eq!(
            p.attention.as_ref().unwrap().w_a.as_ref().unwrap().shape(),
            (8, 16)
        );
        assert!(p.decoder.b.data[8..16].iter().all(|&b| b == FORGET_BIAS));
        for (name, m) in p.named() {
            if !name.ends_with(".b")
                || name.starts_with("input")
                || name.starts_with("output")
                || name.contains("proj")
            {
                assert!(m.data.iter().all(|x| x.abs() < INIT_BOUND), "{name}");
            }
        }
        let zeros = p.zeros_like();
        assert_eq!(zeros.num_parameters(), p.num_parameters());
        assert_eq!(zeros.l2_norm(), 0.0);
    }

    #[test]
    fn names_unique_and_orders_agree() {
        let c = cfg(RnnType::Gru, AttentionKind::General, true, 2);
        let mut p = ModelParams::init(&c, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let names: Vec<String> = p.named().into_iter().map(|(n, _)| n).collect();
        let mut dedup = names.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), names.len());
        let names_mut: Vec<String> = p.named_mut().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, names_mut);
    }

    #[test]
    fn embedding_bootstrap_checks_dims() {
        let c = cfg(RnnType::Lstm, AttentionKind::None, false, 1);
        let mut p = ModelParams::init(&c, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(p.load_embeddings([(5, vec![1.0; 6])]).unwrap(), 1);
        assert_eq!(p.embedding.row(5), &[1.0; 6]);
        assert!(p.load_embeddings([(5, vec![1.0; 3])]).is_err());
    }
}

//! Encoder-decoder forward pass, exact reverse-mode gradients and greedy
//! decoding.
//!
//! Frames are projected to the hidden size, run through stacked (optionally
//! bidirectional) recurrent layers, and the deepest layer's final state
//! initializes a single-layer decoder. With attention, each decoder state
//! scores every encoder state, and the attentional vector
//! `h̃ = tanh(W_c [context; h_d])` feeds the output softmax; without it the
//! decoder state feeds the softmax directly.

use rand::{Rng, RngCore};

use super::cell::{self, CellCache};
use super::params::{CellParams, ModelParams};
use super::tensor::{argmax, axpy, dot, log_softmax, softmax};
use super::{AttentionKind, ModelError, RnnType};
use crate::vocab::{BOS_ID, EOS_ID, PAD_ID, UNK_ID};

/// Attention distributions, one row per decoder step over encoder steps.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    pub rows: Vec<Vec<f64>>,
}

impl AttentionMap {
    pub fn steps(&self) -> usize {
        self.rows.len()
    }

    pub fn frames(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone)]
pub struct EncoderOutput {
    /// Deepest-layer outputs, one row per frame.
    pub states: Vec<Vec<f64>>,
    pub final_h: Vec<f64>,
    /// Empty for GRU.
    pub final_c: Vec<f64>,
    /// Per-frame attention keys: `W_a h_e` (general) or the `h_e` half of
    /// the concat projection. Empty for dot and no attention.
    keys: Vec<Vec<f64>>,
}

/// Decoder state at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub t: usize,
}

#[derive(Debug, Clone)]
pub struct DecodeOutput {
    /// Full log-distribution over the vocabulary at every step.
    pub log_probs: Vec<Vec<f64>>,
    /// `log p(y_t | ·)` of each gold target.
    pub gold_log_probs: Vec<f64>,
    pub attention: Option<AttentionMap>,
    /// `log p(y | x) = Σ_t log p(y_t | ·)`.
    pub log_likelihood: f64,
}

/// Inverted dropout: kept units scale by `1/(1−rate)`.
struct Dropout<'a> {
    rate: f64,
    rng: &'a mut dyn RngCore,
}

impl Dropout<'_> {
    fn mask(&mut self, n: usize) -> Vec<f64> {
        let keep = 1.0 / (1.0 - self.rate);
        (0..n)
            .map(|_| {
                if self.rng.random::<f64>() < self.rate {
                    0.0
                } else {
                    keep
                }
            })
            .collect()
    }
}

fn draw_mask(dropout: &mut Option<Dropout<'_>>, n: usize) -> Option<Vec<f64>> {
    dropout.as_mut().filter(|d| d.rate > 0.0).map(|d| d.mask(n))
}

fn apply_mask(x: &[f64], mask: &Option<Vec<f64>>) -> Vec<f64> {
    match mask {
        Some(m) => x.iter().zip(m).map(|(a, b)| a * b).collect(),
        None => x.to_vec(),
    }
}

fn unmask(d: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        d.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
    }
}

struct LayerTape {
    masks: Vec<Option<Vec<f64>>>,
    fwd: Vec<CellCache>,
    /// indexed by frame position, not processing order
    bwd: Vec<CellCache>,
}

struct EncoderTape {
    x: Vec<Vec<f64>>,
    layers: Vec<LayerTape>,
    output: EncoderOutput,
}

struct AttnStep {
    alpha: Vec<f64>,
    context: Vec<f64>,
    htilde: Vec<f64>,
    /// concat only: `tanh(W1 h_d + P_j)` per frame
    hidden_scores: Vec<Vec<f64>>,
}

struct StepTape {
    input: usize,
    emb_mask: Option<Vec<f64>>,
    cell: CellCache,
    attn: Option<AttnStep>,
    out_mask: Option<Vec<f64>>,
    z: Vec<f64>,
    logits: Vec<f64>,
}

/// A recorded teacher-forced forward pass over one example.
pub struct Tape {
    enc: EncoderTape,
    steps: Vec<StepTape>,
    targets: Vec<usize>,
}

impl Tape {
    /// Per-step log-distributions.
    pub fn log_probs(&self) -> Vec<Vec<f64>> {
        self.steps.iter().map(|s| log_softmax(&s.logits)).collect()
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    /// Number of non-pad target steps.
    pub fn num_targets(&self) -> usize {
        self.targets.iter().filter(|&&t| t != PAD_ID).count()
    }

    /// Summed negative log-likelihood over non-pad targets.
    pub fn nll_sum(&self) -> f64 {
        self.steps
            .iter()
            .zip(&self.targets)
            .filter(|(_, &y)| y != PAD_ID)
            .map(|(s, &y)| -log_softmax(&s.logits)[y])
            .sum()
    }

    pub fn attention(&self) -> Option<AttentionMap> {
        attention_map(&self.steps)
    }

    /// Gradients of `scale · nll_sum()` with respect to every parameter.
    pub fn backward(&self, params: &ModelParams, scale: f64) -> ModelParams {
        let mut g = params.zeros_like();
        params.backward_into(self, scale, &mut g);
        g
    }

    /// Like [`Tape::backward`], adding into an existing gradient buffer.
    pub fn backward_into(&self, params: &ModelParams, scale: f64, grads: &mut ModelParams) {
        params.backward_into(self, scale, grads);
    }
}

fn attention_map(steps: &[StepTape]) -> Option<AttentionMap> {
    steps
        .iter()
        .map(|s| s.attn.as_ref().map(|a| a.alpha.clone()))
        .collect::<Option<Vec<_>>>()
        .map(|rows| AttentionMap { rows })
}

impl ModelParams {
    fn hidden(&self) -> usize {
        self.config.hidden_units
    }

    fn check_frames(&self, frames: &[Vec<f64>]) -> Result<(), ModelError> {
        if frames.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        if frames.len() > self.config.max_encoder_len {
            return Err(ModelError::LengthExceeded {
                len: frames.len(),
                max: self.config.max_encoder_len,
            });
        }
        if let Some(bad) = frames.iter().find(|f| f.len() != self.config.feature_dim) {
            return Err(ModelError::Shape(format!(
                "frame has {} features, model expects {}",
                bad.len(),
                self.config.feature_dim
            )));
        }
        Ok(())
    }

    /// Runs the encoder without dropout.
    pub fn encode(&self, frames: &[Vec<f64>]) -> Result<EncoderOutput, ModelError> {
        self.check_frames(frames)?;
        Ok(self.encode_recorded(frames, &mut None).output)
    }

    fn encode_recorded(
        &self,
        frames: &[Vec<f64>],
        dropout: &mut Option<Dropout<'_>>,
    ) -> EncoderTape {
        let hd = self.hidden();
        let p = frames.len();
        let lstm = self.config.rnn_type == RnnType::Lstm;
        let zero_c = if lstm { vec![0.0; hd] } else { Vec::new() };

        let mut inputs: Vec<Vec<f64>> = frames
            .iter()
            .map(|x| {
                let mut u = self.input_b.data.clone();
                self.input_w.matvec_add(x, &mut u);
                u
            })
            .collect();
        let mut layers = Vec::with_capacity(self.encoder.len());
        let mut final_h = Vec::new();
        let mut final_c = Vec::new();

        for layer in &self.encoder {
            let masks: Vec<Option<Vec<f64>>> = (0..p).map(|_| draw_mask(dropout, hd)).collect();
            let masked: Vec<Vec<f64>> = inputs
                .iter()
                .zip(&masks)
                .map(|(u, m)| apply_mask(u, m))
                .collect();

            let run = |cellp: &CellParams, order: &mut dyn Iterator<Item = usize>| {
                let mut caches: Vec<Option<CellCache>> = vec![None; p];
                let (mut h, mut c) = (vec![0.0; hd], zero_c.clone());
                for t in order {
                    let cache = cell::forward(cellp, &masked[t], &h, &c);
                    h = cache.h().to_vec();
                    c = cache.c().to_vec();
                    caches[t] = Some(cache);
                }
                caches.into_iter().map(Option::unwrap).collect::<Vec<_>>()
            };
            let fwd = run(&layer.fwd, &mut (0..p));
            let bwd = layer
                .bwd
                .as_ref()
                .map(|b| run(b, &mut (0..p).rev()))
                .unwrap_or_default();

            let outputs: Vec<Vec<f64>> = match &layer.proj {
                Some(proj) => (0..p)
                    .map(|t| {
                        let mut o = proj.b.data.clone();
                        proj.w.matvec_add_cols(0, fwd[t].h(), &mut o);
                        proj.w.matvec_add_cols(hd, bwd[t].h(), &mut o);
                        o
                    })
                    .collect(),
                None => fwd.iter().map(|c| c.h().to_vec()).collect(),
            };
            (final_h, final_c) = match &layer.proj {
                Some(proj) => {
                    let join = |a: &[f64], b: &[f64]| {
                        let mut o = proj.b.data.clone();
                        proj.w.matvec_add_cols(0, a, &mut o);
                        proj.w.matvec_add_cols(hd, b, &mut o);
                        o
                    };
                    let h = join(fwd[p - 1].h(), bwd[0].h());
                    let c = if lstm {
                        join(fwd[p - 1].c(), bwd[0].c())
                    } else {
                        Vec::new()
                    };
                    (h, c)
                }
                None => (fwd[p - 1].h().to_vec(), fwd[p - 1].c().to_vec()),
            };
            layers.push(LayerTape { masks, fwd, bwd });
            inputs = outputs;
        }

        let keys = match &self.attention {
            Some(a) if a.kind == AttentionKind::General => {
                let w = a.w_a.as_ref().unwrap();
                inputs
                    .iter()
                    .map(|he| {
                        let mut k = vec![0.0; hd];
                        w.matvec_add(he, &mut k);
                        k
                    })
                    .collect()
            }
            Some(a) if a.kind == AttentionKind::Concat => {
                let w = a.w_a.as_ref().unwrap();
                inputs
                    .iter()
                    .map(|he| {
                        let mut k = vec![0.0; hd];
                        w.matvec_add_cols(hd, he, &mut k);
                        k
                    })
                    .collect()
            }
            _ => Vec::new(),
        };

        EncoderTape {
            x: frames.to_vec(),
            layers,
            output: EncoderOutput {
                states: inputs,
                final_h,
                final_c,
                keys,
            },
        }
    }

    /// Luong attention for decoder state `h_d`: returns the context vector
    /// and the attention distribution over encoder steps.
    pub fn attend(&self, h_d: &[f64], enc: &EncoderOutput) -> Option<(Vec<f64>, Vec<f64>)> {
        self.attend_step(h_d, enc).map(|a| (a.context, a.alpha))
    }

    fn attend_step(&self, h_d: &[f64], enc: &EncoderOutput) -> Option<AttnStep> {
        let a = self.attention.as_ref()?;
        let hd = self.hidden();
        let mut hidden_scores = Vec::new();
        let scores: Vec<f64> = match a.kind {
            AttentionKind::Dot => enc.states.iter().map(|he| dot(h_d, he)).collect(),
            AttentionKind::General => enc.keys.iter().map(|k| dot(h_d, k)).collect(),
            AttentionKind::Concat => {
                let w = a.w_a.as_ref().unwrap();
                let v = &a.v_a.as_ref().unwrap().data;
                let mut q = vec![0.0; hd];
                w.matvec_add_cols(0, h_d, &mut q);
                hidden_scores = enc
                    .keys
                    .iter()
                    .map(|k| {
                        q.iter()
                            .zip(k)
                            .map(|(a, b)| (a + b).tanh())
                            .collect::<Vec<f64>>()
                    })
                    .collect();
                hidden_scores.iter().map(|u| dot(v, u)).collect()
            }
            AttentionKind::None => unreachable!("attention params exist only for scoring kinds"),
        };
        let alpha = softmax(&scores);
        let mut context = vec![0.0; hd];
        for (w, he) in alpha.iter().zip(&enc.states) {
            axpy(*w, he, &mut context);
        }
        let mut pre = vec![0.0; hd];
        a.w_c.matvec_add_cols(0, &context, &mut pre);
        a.w_c.matvec_add_cols(hd, h_d, &mut pre);
        let htilde = pre.iter().map(|x| x.tanh()).collect();
        Some(AttnStep {
            alpha,
            context,
            htilde,
            hidden_scores,
        })
    }

    fn decoder_step(
        &self,
        enc: &EncoderOutput,
        input: usize,
        h: &[f64],
        c: &[f64],
        dropout: &mut Option<Dropout<'_>>,
    ) -> StepTape {
        let input = if input < self.embedding.rows {
            input
        } else {
            UNK_ID
        };
        let emb_mask = draw_mask(dropout, self.embedding.cols);
        let x = apply_mask(self.embedding.row(input), &emb_mask);
        let cell = cell::forward(&self.decoder, &x, h, c);
        let attn = self.attend_step(cell.h(), enc);
        let pre_out = attn.as_ref().map_or(cell.h(), |a| &a.htilde);
        let out_mask = draw_mask(dropout, self.hidden());
        let z = apply_mask(pre_out, &out_mask);
        let mut logits = self.out_b.data.clone();
        self.out_w.matvec_add(&z, &mut logits);
        StepTape {
            input,
            emb_mask,
            cell,
            attn,
            out_mask,
            z,
            logits,
        }
    }

    fn run_decoder(
        &self,
        enc: &EncoderOutput,
        ids: &[usize],
        dropout: &mut Option<Dropout<'_>>,
    ) -> Vec<StepTape> {
        let mut h = enc.final_h.clone();
        let mut c = enc.final_c.clone();
        let mut steps = Vec::with_capacity(ids.len().saturating_sub(1));
        for &input in &ids[..ids.len() - 1] {
            let step = self.decoder_step(enc, input, &h, &c, dropout);
            h = step.cell.h().to_vec();
            c = step.cell.c().to_vec();
            steps.push(step);
        }
        steps
    }

    fn check_gold(&self, ids: &[usize]) -> Result<(), ModelError> {
        if ids.len() < 2 || ids[0] != BOS_ID || *ids.last().unwrap() != EOS_ID {
            return Err(ModelError::BadGold);
        }
        Ok(())
    }

    /// Teacher-forced decoding of `ids` (`<s> … </s>`). With `train` set,
    /// dropout masks are drawn from it at the configured rate; otherwise
    /// dropout is off.
    pub fn decode_forward(
        &self,
        enc: &EncoderOutput,
        ids: &[usize],
        train: Option<&mut dyn RngCore>,
    ) -> Result<DecodeOutput, ModelError> {
        self.check_gold(ids)?;
        let mut dropout = train.map(|rng| Dropout {
            rate: self.config.dropout_rate,
            rng,
        });
        let steps = self.run_decoder(enc, ids, &mut dropout);
        let log_probs: Vec<Vec<f64>> = steps.iter().map(|s| log_softmax(&s.logits)).collect();
        let gold_log_probs: Vec<f64> = log_probs
            .iter()
            .zip(&ids[1..])
            .map(|(lp, &y)| lp[y.min(lp.len() - 1)])
            .collect();
        let log_likelihood = gold_log_probs.iter().sum();
        Ok(DecodeOutput {
            attention: attention_map(&steps),
            log_probs,
            gold_log_probs,
            log_likelihood,
        })
    }

    /// Records a full forward pass for [`Tape::backward`].
    pub fn forward_train(
        &self,
        frames: &[Vec<f64>],
        ids: &[usize],
        train: Option<&mut dyn RngCore>,
    ) -> Result<Tape, ModelError> {
        self.check_frames(frames)?;
        self.check_gold(ids)?;
        let mut dropout = train.map(|rng| Dropout {
            rate: self.config.dropout_rate,
            rng,
        });
        let enc = self.encode_recorded(frames, &mut dropout);
        let steps = self.run_decoder(&enc.output, ids, &mut dropout);
        let targets = ids[1..]
            .iter()
            .map(|&y| if y < self.out_w.rows { y } else { UNK_ID })
            .collect();
        Ok(Tape {
            enc,
            steps,
            targets,
        })
    }

    /// Argmax decoding from `<s>` until `</s>` or `max_decode_len` tokens.
    /// Returns emitted ids (without `</s>`) and one attention row per
    /// emitted id.
    pub fn greedy_decode(&self, enc: &EncoderOutput) -> (Vec<usize>, Option<AttentionMap>) {
        let mut state = DecoderState {
            h: enc.final_h.clone(),
            c: enc.final_c.clone(),
            t: 0,
        };
        let mut input = BOS_ID;
        let mut out = Vec::new();
        let mut rows = Vec::new();
        while state.t < self.config.max_decode_len {
            let step = self.decoder_step(enc, input, &state.h, &state.c, &mut None);
            let next = argmax(&step.logits);
            if next == EOS_ID {
                break;
            }
            out.push(next);
            if let Some(a) = step.attn {
                rows.push(a.alpha);
            }
            state = DecoderState {
                h: step.cell.h().to_vec(),
                c: step.cell.c().to_vec(),
                t: state.t + 1,
            };
            input = next;
        }
        let attention = self.attention.as_ref().map(|_| AttentionMap { rows });
        (out, attention)
    }

    fn backward_into(&self, tape: &Tape, scale: f64, g: &mut ModelParams) {
        let hd = self.hidden();
        let enc = &tape.enc.output;
        let p = enc.states.len();
        let mut d_states = vec![vec![0.0; hd]; p];
        let mut d_keys = vec![vec![0.0; hd]; enc.keys.len()];
        let mut dh_next = vec![0.0; hd];
        let mut dc_next = enc.final_c.iter().map(|_| 0.0).collect::<Vec<f64>>();

        for (step, &target) in tape.steps.iter().zip(&tape.targets).rev() {
            let mut dh = dh_next.clone();
            if target != PAD_ID {
                let mut dlogits = softmax(&step.logits);
                dlogits[target] -= 1.0;
                dlogits.iter_mut().for_each(|d| *d *= scale);
                g.out_w.outer_add(&dlogits, &step.z);
                g.out_b.add_vec(&dlogits);
                let mut dz = vec![0.0; hd];
                self.out_w.matvec_t_add(&dlogits, &mut dz);
                unmask(&mut dz, &step.out_mask);

                match (&step.attn, &self.attention) {
                    (Some(at), Some(ap)) => {
                        let ga = g.attention.as_mut().unwrap();
                        let h_d = step.cell.h();
                        let dpre: Vec<f64> = dz
                            .iter()
                            .zip(&at.htilde)
                            .map(|(d, t)| d * (1.0 - t * t))
                            .collect();
                        ga.w_c.outer_add_cols(0, &dpre, &at.context);
                        ga.w_c.outer_add_cols(hd, &dpre, h_d);
                        let mut dctx = vec![0.0; hd];
                        ap.w_c.matvec_t_add_cols(0, &dpre, &mut dctx);
                        ap.w_c.matvec_t_add_cols(hd, &dpre, &mut dh);

                        let dalpha: Vec<f64> = enc.states.iter().map(|he| dot(&dctx, he)).collect();
                        for (ds, &a) in d_states.iter_mut().zip(&at.alpha) {
                            axpy(a, &dctx, ds);
                        }
                        let mean = dot(&at.alpha, &dalpha);
                        let dscores: Vec<f64> = at
                            .alpha
                            .iter()
                            .zip(&dalpha)
                            .map(|(a, d)| a * (d - mean))
                            .collect();

                        match ap.kind {
                            AttentionKind::Dot => {
                                for j in 0..p {
                                    axpy(dscores[j], &enc.states[j], &mut dh);
                                    axpy(dscores[j], h_d, &mut d_states[j]);
                                }
                            }
                            AttentionKind::General => {
                                for j in 0..p {
                                    axpy(dscores[j], &enc.keys[j], &mut dh);
                                    axpy(dscores[j], h_d, &mut d_keys[j]);
                                }
                            }
                            AttentionKind::Concat => {
                                let v = &ap.v_a.as_ref().unwrap().data;
                                let mut dq = vec![0.0; hd];
                                for j in 0..p {
                                    let u = &at.hidden_scores[j];
                                    axpy(dscores[j], u, &mut ga.v_a.as_mut().unwrap().data);
                                    let du: Vec<f64> = (0..hd)
                                        .map(|k| dscores[j] * v[k] * (1.0 - u[k] * u[k]))
                                        .collect();
                                    axpy(1.0, &du, &mut dq);
                                    axpy(1.0, &du, &mut d_keys[j]);
                                }
                                ga.w_a.as_mut().unwrap().outer_add_cols(0, &dq, h_d);
                                ap.w_a.as_ref().unwrap().matvec_t_add_cols(0, &dq, &mut dh);
                            }
                            AttentionKind::None => unreachable!(),
                        }
                    }
                    _ => axpy(1.0, &dz, &mut dh),
                }
            }

            let grads = cell::backward(&self.decoder, &step.cell, &dh, &dc_next, &mut g.decoder);
            let mut dx = grads.dx;
            unmask(&mut dx, &step.emb_mask);
            axpy(1.0, &dx, g.embedding.row_mut(step.input));
            dh_next = grads.dh_prev;
            dc_next = grads.dc_prev;
        }

        if let (Some(ap), Some(ga)) = (&self.attention, g.attention.as_mut()) {
            match ap.kind {
                AttentionKind::General => {
                    let (w, gw) = (ap.w_a.as_ref().unwrap(), ga.w_a.as_mut().unwrap());
                    for j in 0..p {
                        gw.outer_add(&d_keys[j], &enc.states[j]);
                        w.matvec_t_add(&d_keys[j], &mut d_states[j]);
                    }
                }
                AttentionKind::Concat => {
                    let (w, gw) = (ap.w_a.as_ref().unwrap(), ga.w_a.as_mut().unwrap());
                    for j in 0..p {
                        gw.outer_add_cols(hd, &d_keys[j], &enc.states[j]);
                        w.matvec_t_add_cols(hd, &d_keys[j], &mut d_states[j]);
                    }
                }
                _ => {}
            }
        }

        self.backward_encoder(&tape.enc, d_states, dh_next, dc_next, g);
    }

    fn backward_encoder(
        &self,
        tape: &EncoderTape,
        mut d_out: Vec<Vec<f64>>,
        d_final_h: Vec<f64>,
        d_final_c: Vec<f64>,
        g: &mut ModelParams,
    ) {
        let hd = self.hidden();
        let p = tape.x.len();
        let lstm = self.config.rnn_type == RnnType::Lstm;
        let zero_c = || if lstm { vec![0.0; hd] } else { Vec::new() };
        let deepest = self.encoder.len() - 1;

        for l in (0..self.encoder.len()).rev() {
            let layer = &self.encoder[l];
            let lt = &tape.layers[l];
            let gl = &mut g.encoder[l];
            let (dfh, dfc) = if l == deepest {
                (d_final_h.clone(), d_final_c.clone())
            } else {
                (vec![0.0; hd], zero_c())
            };
            let mut d_in = vec![vec![0.0; hd]; p];

            match (&layer.proj, &layer.bwd) {
                (Some(proj), Some(bwd)) => {
                    let gp = gl.proj.as_mut().unwrap();
                    let mut d_hf = vec![vec![0.0; hd]; p];
                    let mut d_hb = vec![vec![0.0; hd]; p];
                    for t in 0..p {
                        gp.w.outer_add_cols(0, &d_out[t], lt.fwd[t].h());
                        gp.w.outer_add_cols(hd, &d_out[t], lt.bwd[t].h());
                        gp.b.add_vec(&d_out[t]);
                        proj.w.matvec_t_add_cols(0, &d_out[t], &mut d_hf[t]);
                        proj.w.matvec_t_add_cols(hd, &d_out[t], &mut d_hb[t]);
                    }
                    // the final state reuses the same projection
                    gp.w.outer_add_cols(0, &dfh, lt.fwd[p - 1].h());
                    gp.w.outer_add_cols(hd, &dfh, lt.bwd[0].h());
                    gp.b.add_vec(&dfh);
                    proj.w.matvec_t_add_cols(0, &dfh, &mut d_hf[p - 1]);
                    proj.w.matvec_t_add_cols(hd, &dfh, &mut d_hb[0]);
                    let (mut dcf, mut dcb) = (zero_c(), zero_c());
                    if lstm {
                        gp.w.outer_add_cols(0, &dfc, lt.fwd[p - 1].c());
                        gp.w.outer_add_cols(hd, &dfc, lt.bwd[0].c());
                        gp.b.add_vec(&dfc);
                        proj.w.matvec_t_add_cols(0, &dfc, &mut dcf);
                        proj.w.matvec_t_add_cols(hd, &dfc, &mut dcb);
                    }
                    bptt(
                        &layer.fwd,
                        &lt.fwd,
                        (0..p).rev(),
                        &d_hf,
                        dcf,
                        &mut gl.fwd,
                        &mut d_in,
                    );
                    bptt(
                        bwd,
                        &lt.bwd,
                        0..p,
                        &d_hb,
                        dcb,
                        gl.bwd.as_mut().unwrap(),
                        &mut d_in,
                    );
                }
                _ => {
                    axpy(1.0, &dfh, &mut d_out[p - 1]);
                    bptt(
                        &layer.fwd,
                        &lt.fwd,
                        (0..p).rev(),
                        &d_out,
                        dfc,
                        &mut gl.fwd,
                        &mut d_in,
                    );
                }
            }

            for (d, m) in d_in.iter_mut().zip(&lt.masks) {
                unmask(d, m);
            }
            d_out = d_in;
        }

        for (d, x) in d_out.iter().zip(&tape.x) {
            g.input_w.outer_add(d, x);
            g.input_b.add_vec(d);
        }
    }
}

/// Backpropagation through time over one direction. `order` visits frames
/// in reverse processing order.
fn bptt(
    cellp: &CellParams,
    caches: &[CellCache],
    order: impl Iterator<Item = usize>,
    d_h: &[Vec<f64>],
    dc_last: Vec<f64>,
    g: &mut CellParams,
    d_in: &mut [Vec<f64>],
) {
    let mut dh_carry = vec![0.0; cellp.hidden()];
    let mut dc_carry = dc_last;
    for t in order {
        let mut dh = d_h[t].clone();
        axpy(1.0, &dh_carry, &mut dh);
        let grads = cell::backward(cellp, &caches[t], &dh, &dc_carry, g);
        axpy(1.0, &grads.dx, &mut d_in[t]);
        dh_carry = grads.dh_prev;
        dc_carry = grads.dc_prev;
    }
}

/// Central finite-difference check of [`Tape::backward`] for every
/// parameter of a (small) model. Returns the worst relative error per tensor.
pub fn gradient_check(
    params: &ModelParams,
    frames: &[Vec<f64>],
    ids: &[usize],
    eps: f64,
) -> Result<Vec<(String, f64)>, ModelError> {
    let loss = |p: &ModelParams| -> Result<f64, ModelError> {
        let tape = p.forward_train(frames, ids, None)?;
        Ok(tape.nll_sum() / tape.num_targets() as f64)
    };
    let tape = params.forward_train(frames, ids, None)?;
    let grads = tape.backward(params, 1.0 / tape.num_targets() as f64);
    let mut probe = params.clone();
    let mut report = Vec::new();
    let names: Vec<String> = params.named().into_iter().map(|(n, _)| n).collect();
    for (ti, name) in names.iter().enumerate() {
        let analytic = grads.named()[ti].1.data.clone();
        let mut worst: f64 = 0.0;
        for (k, &a) in analytic.iter().enumerate() {
            let orig = params.named()[ti].1.data[k];
            probe.named_mut()[ti].1.data[k] = orig + eps;
            let up = loss(&probe)?;
            probe.named_mut()[ti].1.data[k] = orig - eps;
            let down = loss(&probe)?;
            probe.named_mut()[ti].1.data[k] = orig;
            let numeric = (up - down) / (2.0 * eps);
            worst = worst.max(relative_error(a, numeric));
        }
        report.push((name.clone(), worst));
    }
    Ok(report)
}

/// `|a − b| / max(|a|, |b|, 1e−6)`; the floor keeps tiny gradients from
/// dominating through round-off in the numeric difference.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Uniform(−1, 1) frames, handy for checks on small models.
pub fn random_frames<R: Rng + ?Sized>(p: usize, d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..p)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

//! Multi-layer self-attention encoder with relative positional encoding and
//! optional segment-level recurrence.
//!
//! Attention logits decompose into a content term `(q + u)·kᵀ` and a
//! position term `(q + v)·rᵀ` gathered by relative offset, with `u` and `v`
//! learned global bias vectors. No absolute position ever enters the
//! computation, so outputs are invariant to translating the whole sequence.
//! With `memory_len > 0`, each layer attends over the cached (gradient-
//! detached) hidden states of the previous segment concatenated before the
//! current one; `memory_len = 0` is the same code path with an empty cache.

use crate::rng::SeedRng;
use crate::tensor::{Mode, Tensor, TensorError};

#[derive(Debug, thiserror::Error)]
pub enum EncoderError {
    #[error("invalid encoder config: {0}")]
    BadConfig(String),
    #[error("sequence length {seq_len} exceeds max_seq_len {max_seq_len}")]
    SequenceTooLong { seq_len: usize, max_seq_len: usize },
    #[error("token id {id} at position {position} out of vocabulary (size {vocab_size})")]
    TokenOutOfVocab {
        position: usize,
        id: usize,
        vocab_size: usize,
    },
    #[error("segment memory has {got} layers, encoder has {expected}")]
    MemoryLayerMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EncoderConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub dropout_p: f64,
    pub max_seq_len: usize,
    pub memory_len: usize,
    pub vocab_size: usize,
}

impl EncoderConfig {
    /// Minutes-scale default: 2 layers, 2 heads, width 32.
    pub fn toy(vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            n_layers: 2,
            n_heads: 2,
            d_model: 32,
            d_ff: 64,
            dropout_p: 0.1,
            max_seq_len: 1024,
            memory_len: 0,
            vocab_size,
        }
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        if self.n_layers == 0 || self.n_heads == 0 || self.d_model == 0 || self.d_ff == 0 {
            return Err(EncoderError::BadConfig(
                "n_layers, n_heads, d_model, d_ff must all be positive".into(),
            ));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(EncoderError::BadConfig(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.max_seq_len == 0 {
            return Err(EncoderError::BadConfig("max_seq_len must be >= 1".into()));
        }
        if self.vocab_size == 0 {
            return Err(EncoderError::BadConfig("vocab_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(EncoderError::BadConfig(format!(
                "dropout_p must be in [0, 1), got {}",
                self.dropout_p
            )));
        }
        Ok(())
    }
}

/// Per-layer cache of previous-segment hidden states, gradient-detached.
/// Entry `l` holds the inputs that layer `l` saw, as flat `[rows, d_model]`.
#[derive(Clone, Debug, Default)]
pub struct SegmentMemory {
    layers: Vec<(usize, Vec<f64>)>, // (rows, data)
}

impl SegmentMemory {
    pub fn empty(n_layers: usize) -> SegmentMemory {
        SegmentMemory {
            layers: vec![(0, Vec::new()); n_layers],
        }
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn rows(&self, layer: usize) -> usize {
        self.layers[layer].0
    }
}

pub struct EncoderLayer {
    pub wq: Tensor,
    pub bq: Tensor,
    pub wk: Tensor,
    pub bk: Tensor,
    pub wv: Tensor,
    pub bv: Tensor,
    pub wo: Tensor,
    pub bo: Tensor,
    /// Projection of the sinusoidal relative-offset encodings.
    pub wr: Tensor,
    pub ln1_gain: Tensor,
    pub ln1_bias: Tensor,
    pub ln2_gain: Tensor,
    pub ln2_bias: Tensor,
    pub ff1_w: Tensor,
    pub ff1_b: Tensor,
    pub ff2_w: Tensor,
    pub ff2_b: Tensor,
}

pub struct Encoder {
    pub config: EncoderConfig,
    pub embedding: Tensor,
    /// Global content bias, one slot per head (flattened to `[d_model]`).
    pub u_bias: Tensor,
    /// Global position bias, same layout as `u_bias`.
    pub v_bias: Tensor,
    pub layers: Vec<EncoderLayer>,
}

const INIT_STD: f64 = 0.02;
const LN_EPS: f64 = 1e-5;

fn normal_tensor(shape: Vec<usize>, std: f64, rng: &mut SeedRng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.normal(0.0, std)).collect();
    Tensor::param(shape, data)
}

impl Encoder {
    /// All weights drawn N(0, 0.02²), biases zero, layer-norm gains one.
    pub fn init(config: EncoderConfig, rng: &mut SeedRng) -> Result<Encoder, EncoderError> {
        config.validate()?;
        let d = config.d_model;
        let embedding = normal_tensor(vec![config.vocab_size, d], INIT_STD, rng);
        let u_bias = normal_tensor(vec![d], INIT_STD, rng);
        let v_bias = normal_tensor(vec![d], INIT_STD, rng);
        let layers = (0..config.n_layers)
            .map(|_| EncoderLayer {
                wq: normal_tensor(vec![d, d], INIT_STD, rng),
                bq: Tensor::param(vec![d], vec![0.0; d]),
                wk: normal_tensor(vec![d, d], INIT_STD, rng),
                bk: Tensor::param(vec![d], vec![0.0; d]),
                wv: normal_tensor(vec![d, d], INIT_STD, rng),
                bv: Tensor::param(vec![d], vec![0.0; d]),
                wo: normal_tensor(vec![d, d], INIT_STD, rng),
                bo: Tensor::param(vec![d], vec![0.0; d]),
                wr: normal_tensor(vec![d, d], INIT_STD, rng),
                ln1_gain: Tensor::param(vec![d], vec![1.0; d]),
                ln1_bias: Tensor::param(vec![d], vec![0.0; d]),
                ln2_gain: Tensor::param(vec![d], vec![1.0; d]),
                ln2_bias: Tensor::param(vec![d], vec![0.0; d]),
                ff1_w: normal_tensor(vec![d, config.d_ff], INIT_STD, rng),
                ff1_b: Tensor::param(vec![config.d_ff], vec![0.0; config.d_ff]),
                ff2_w: normal_tensor(vec![config.d_ff, d], INIT_STD, rng),
                ff2_b: Tensor::param(vec![d], vec![0.0; d]),
            })
            .collect();
        Ok(Encoder {
            config,
            embedding,
            u_bias,
            v_bias,
            layers,
        })
    }

    /// Closed-form parameter count for a given config.
    pub fn param_count(config: &EncoderConfig) -> usize {
        let d = config.d_model;
        let per_layer = 5 * d * d          // wq wk wv wo wr
            + 4 * d                        // qkvo biases
            + 4 * d                        // two layer norms
            + d * config.d_ff + config.d_ff
            + config.d_ff * d + d;
        config.vocab_size * d + 2 * d + config.n_layers * per_layer
    }

    pub fn for_each_param(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("embedding", &mut self.embedding);
        f("u_bias", &mut self.u_bias);
        f("v_bias", &mut self.v_bias);
        for (i, l) in self.layers.iter_mut().enumerate() {
            for (suffix, t) in [
                ("wq", &mut l.wq),
                ("bq", &mut l.bq),
                ("wk", &mut l.wk),
                ("bk", &mut l.bk),
                ("wv", &mut l.wv),
                ("bv", &mut l.bv),
                ("wo", &mut l.wo),
                ("bo", &mut l.bo),
                ("wr", &mut l.wr),
                ("ln1_gain", &mut l.ln1_gain),
                ("ln1_bias", &mut l.ln1_bias),
                ("ln2_gain", &mut l.ln2_gain),
                ("ln2_bias", &mut l.ln2_bias),
                ("ff1_w", &mut l.ff1_w),
                ("ff1_b", &mut l.ff1_b),
                ("ff2_w", &mut l.ff2_w),
                ("ff2_b", &mut l.ff2_b),
            ] {
                f(&format!("layer{i}.{suffix}"), t);
            }
        }
    }

    /// Hidden states for every position, plus the updated per-layer memory.
    pub fn encode(
        &self,
        tokens: &[usize],
        memory: Option<&SegmentMemory>,
        mode: Mode,
        rng: &mut SeedRng,
    ) -> Result<(Tensor, SegmentMemory), EncoderError> {
        let cfg = &self.config;
        let q_len = tokens.len();
        if q_len > cfg.max_seq_len {
            return Err(EncoderError::SequenceTooLong {
                seq_len: q_len,
                max_seq_len: cfg.max_seq_len,
            });
        }
        for (position, &id) in tokens.iter().enumerate() {
            if id >= cfg.vocab_size {
                return Err(EncoderError::TokenOutOfVocab {
                    position,
                    id,
                    vocab_size: cfg.vocab_size,
                });
            }
        }
        if let Some(m) = memory {
            if m.n_layers() != cfg.n_layers {
                return Err(EncoderError::MemoryLayerMismatch {
                    got: m.n_layers(),
                    expected: cfg.n_layers,
                });
            }
        }

        let mut h = Tensor::embedding_lookup(&self.embedding, tokens)?;
        if mode == Mode::Train && cfg.dropout_p > 0.0 {
            h = h.dropout(cfg.dropout_p, mode, rng)?;
        }

        let mut new_memory = SegmentMemory::empty(cfg.n_layers);
        for (li, layer) in self.layers.iter().enumerate() {
            let (mem_rows, mem_data) = match memory {
                Some(m) => (m.layers[li].0, m.layers[li].1.as_slice()),
                None => (0, &[][..]),
            };
            // Cache this layer's input for the next segment before transforming.
            if cfg.memory_len > 0 {
                new_memory.layers[li] = trail_memory(
                    mem_rows,
                    mem_data,
                    h.data(),
                    q_len,
                    cfg.d_model,
                    cfg.memory_len,
                );
            }

            let kv_input = if mem_rows > 0 {
                let mem_t = Tensor::new(vec![mem_rows, cfg.d_model], mem_data.to_vec());
                Tensor::concat_rows(&[mem_t, h.clone()])?
            } else {
                h.clone()
            };

            let attn = self.layer_attention(layer, &h, &kv_input, mem_rows, mode, rng)?;
            h = h.add(&attn)?.layer_norm(&layer.ln1_gain, &layer.ln1_bias, LN_EPS)?;

            let mut ff = h
                .matmul(&layer.ff1_w)?
                .add_row_broadcast(&layer.ff1_b)?
                .gelu()
                .matmul(&layer.ff2_w)?
                .add_row_broadcast(&layer.ff2_b)?;
            if mode == Mode::Train && cfg.dropout_p > 0.0 {
                ff = ff.dropout(cfg.dropout_p, mode, rng)?;
            }
            h = h.add(&ff)?.layer_norm(&layer.ln2_gain, &layer.ln2_bias, LN_EPS)?;
        }
        Ok((h, new_memory))
    }

    fn layer_attention(
        &self,
        layer: &EncoderLayer,
        h_q: &Tensor,
        h_kv: &Tensor,
        m_len: usize,
        mode: Mode,
        rng: &mut SeedRng,
    ) -> Result<Tensor, TensorError> {
        let cfg = &self.config;
        let q = h_q.matmul(&layer.wq)?.add_row_broadcast(&layer.bq)?;
        let k = h_kv.matmul(&layer.wk)?.add_row_broadcast(&layer.bk)?;
        let v = h_kv.matmul(&layer.wv)?.add_row_broadcast(&layer.bv)?;
        let q_len = q.shape()[0];
        let k_len = k.shape()[0];
        let r = rel_encoding(q_len, k_len, cfg.d_model).matmul(&layer.wr)?;

        let weights =
            attention_weights(&q, &k, &r, &self.u_bias, &self.v_bias, cfg.n_heads, m_len)?;
        let d_head = cfg.d_model / cfg.n_heads;
        let mut head_outs = Vec::with_capacity(cfg.n_heads);
        for (hi, w) in weights.into_iter().enumerate() {
            let w = if mode == Mode::Train && cfg.dropout_p > 0.0 {
                w.dropout(cfg.dropout_p, mode, rng)?
            } else {
                w
            };
            let v_h = v.slice_cols(hi * d_head, (hi + 1) * d_head)?;
            head_outs.push(w.matmul(&v_h)?);
        }
        let merged = Tensor::concat_cols(&head_outs)?;
        let mut out = merged.matmul(&layer.wo)?.add_row_broadcast(&layer.bo)?;
        if mode == Mode::Train && cfg.dropout_p > 0.0 {
            out = out.dropout(cfg.dropout_p, mode, rng)?;
        }
        Ok(out)
    }
}

/// Last `memory_len` rows of `[old_memory; current]`, copied out of the graph.
fn trail_memory(
    mem_rows: usize,
    mem_data: &[f64],
    cur: &[f64],
    cur_rows: usize,
    d: usize,
    memory_len: usize,
) -> (usize, Vec<f64>) {
    let total = mem_rows + cur_rows;
    let keep = memory_len.min(total);
    let start = total - keep;
    let mut out = Vec::with_capacity(keep * d);
    for row in start..total {
        if row < mem_rows {
            out.extend_from_slice(&mem_data[row * d..(row + 1) * d]);
        } else {
            let r = row - mem_rows;
            out.extend_from_slice(&cur[r * d..(r + 1) * d]);
        }
    }
    (keep, out)
}

/// Sinusoidal encodings of relative offsets, `[q_len + k_len − 1, d_model]`.
/// Row `r` encodes distance `d = r − (q_len − 1)`.
pub fn rel_encoding(q_len: usize, k_len: usize, d_model: usize) -> Tensor {
    let n_rel = q_len + k_len - 1;
    let half = d_model / 2;
    let mut data = vec![0.0; n_rel * d_model];
    for r in 0..n_rel {
        let dist = r as f64 - (q_len as f64 - 1.0);
        for i in 0..half {
            let freq = 1.0 / 10_000f64.powf(2.0 * i as f64 / d_model as f64);
            data[r * d_model + i] = (dist * freq).sin();
            data[r * d_model + half + i] = (dist * freq).cos();
        }
    }
    Tensor::new(vec![n_rel, d_model], data)
}

/// Per-head softmax-normalized attention weights `[q_len, k_len]`.
///
/// Logits depend only on content and on the relative offset between query
/// and key; queries sit `m_len` positions past the start of the key range.
pub fn attention_weights(
    q: &Tensor,
    k: &Tensor,
    r: &Tensor,
    u_bias: &Tensor,
    v_bias: &Tensor,
    n_heads: usize,
    m_len: usize,
) -> Result<Vec<Tensor>, TensorError> {
    let d_model = q.shape()[1];
    let d_head = d_model / n_heads;
    let scale = 1.0 / (d_head as f64).sqrt();
    let mut out = Vec::with_capacity(n_heads);
    for hi in 0..n_heads {
        let (c0, c1) = (hi * d_head, (hi + 1) * d_head);
        let q_h = q.slice_cols(c0, c1)?;
        let k_h = k.slice_cols(c0, c1)?;
        let r_h = r.slice_cols(c0, c1)?;
        let u_h = u_bias.reshape(vec![1, d_model])?.slice_cols(c0, c1)?.reshape(vec![d_head])?;
        let v_h = v_bias.reshape(vec![1, d_model])?.slice_cols(c0, c1)?.reshape(vec![d_head])?;
        let content = q_h.add_row_broadcast(&u_h)?.matmul(&k_h.transpose2()?)?;
        let position = q_h
            .add_row_broadcast(&v_h)?
            .matmul(&r_h.transpose2()?)?
            .gather_rel(m_len)?;
        out.push(content.add(&position)?.scale(scale).softmax_last());
    }
    Ok(out)
}

/// All heads' attention weights stacked as `[n_heads, q_len, k_len]`.
pub fn attention_scores(
    q: &Tensor,
    k: &Tensor,
    r: &Tensor,
    u_bias: &Tensor,
    v_bias: &Tensor,
    n_heads: usize,
    m_len: usize,
) -> Result<Tensor, TensorError> {
    let per_head = attention_weights(q, k, r, u_bias, v_bias, n_heads, m_len)?;
    let q_len = per_head[0].shape()[0];
    let k_len = per_head[0].shape()[1];
    Tensor::concat_rows(&per_head)?.reshape(vec![n_heads, q_len, k_len])
}

//! Weighted multi-task objective, AdamW, and the training loop.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError, Precision};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::eval::{self, EvalError};
use crate::heads;
use crate::model::{EmotionModel, ModelError};
use crate::rng::SeedRng;
use crate::tensor::{Mode, Tensor, TensorError};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    BadConfig(String),
    #[error("all task weights are zero, nothing to optimize")]
    AllZeroLambdas,
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("document '{id}' is missing a {what}")]
    MissingField { id: String, what: &'static str },
    #[error("non-finite gradient in parameter '{param}'")]
    NonFiniteGradient { param: String },
    #[error("loss diverged to a non-finite value at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

// ── configuration ───────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Task weights for quadrant, valence, arousal in that order.
    pub lambdas: (f64, f64, f64),
    pub epochs: usize,
    pub weight_decay: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub seed: u64,
    pub grad_clip: Option<f64>,
    /// Stop after this many epochs without validation macro-F1 improvement.
    /// Only active when a validation split is supplied.
    pub patience: Option<usize>,
}

impl Default for TrainingConfig {
    fn default() -> TrainingConfig {
        TrainingConfig {
            learning_rate: 2e-5,
            batch_size: 8,
            lambdas: (1.0, 1.0, 1.0),
            epochs: 1,
            weight_decay: 0.01,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            seed: 0,
            grad_clip: None,
            patience: None,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let (l1, l2, l3) = self.lambdas;
        if l1 < 0.0 || l2 < 0.0 || l3 < 0.0 {
            return Err(TrainError::BadConfig("negative task weight".into()));
        }
        if l1 == 0.0 && l2 == 0.0 && l3 == 0.0 {
            return Err(TrainError::AllZeroLambdas);
        }
        if !(self.learning_rate > 0.0) {
            return Err(TrainError::BadConfig("learning_rate must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::BadConfig("batch_size must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(TrainError::BadConfig("epochs must be >= 1".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(TrainError::BadConfig("weight_decay must be >= 0".into()));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return Err(TrainError::BadConfig("grad_clip must be > 0".into()));
            }
        }
        Ok(())
    }
}

// ── objective ───────────────────────────────────────────────────────

/// Weighted sum of the three task losses. Zero-weight terms are left out of
/// the graph entirely, so their parameters receive no gradient at all.
pub fn multi_task_loss(
    l_quadrant: &Tensor,
    l_valence: &Tensor,
    l_arousal: &Tensor,
    lambdas: (f64, f64, f64),
) -> Result<Tensor, TrainError> {
    let terms = [
        (l_quadrant, lambdas.0),
        (l_valence, lambdas.1),
        (l_arousal, lambdas.2),
    ];
    let mut total: Option<Tensor> = None;
    for (loss, lambda) in terms {
        if lambda < 0.0 {
            return Err(TrainError::BadConfig("negative task weight".into()));
        }
        if lambda == 0.0 {
            continue;
        }
        let term = loss.scale(lambda);
        total = Some(match total {
            None => term,
            Some(t) => t.add(&term)?,
        });
    }
    total.ok_or(TrainError::AllZeroLambdas)
}

// ── optimizer ───────────────────────────────────────────────────────

/// Anything exposing a stable named-parameter traversal.
pub trait Parameters {
    fn visit(&mut self, f: &mut dyn FnMut(&str, &mut Tensor));
}

impl Parameters for EmotionModel {
    fn visit(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        self.for_each_param(f);
    }
}

impl Parameters for Vec<(String, Tensor)> {
    fn visit(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        for (name, t) in self.iter_mut() {
            f(name, t);
        }
    }
}

struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Adam with bias correction followed by decoupled weight decay:
/// w ← w − lr·m̂/(√v̂+ε) − lr·wd·w. Parameters whose gradient slot is empty
/// are skipped entirely, decay included.
pub struct AdamW {
    learning_rate: f64,
    betas: (f64, f64),
    eps: f64,
    weight_decay: f64,
    grad_clip: Option<f64>,
    state: HashMap<String, Moments>,
    t: u64,
}

impl AdamW {
    pub fn new(config: &TrainingConfig) -> AdamW {
        AdamW {
            learning_rate: config.learning_rate,
            betas: config.adam_betas,
            eps: config.adam_eps,
            weight_decay: config.weight_decay,
            grad_clip: config.grad_clip,
            state: HashMap::new(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn step<P: Parameters>(&mut self, params: &mut P) -> Result<(), TrainError> {
        // Inspect every gradient before touching any parameter so a bad
        // gradient aborts the step atomically.
        let mut bad: Option<String> = None;
        let mut sq_norm = 0.0;
        params.visit(&mut |name, p| {
            if let Some(g) = p.grad() {
                if bad.is_none() && g.iter().any(|v| !v.is_finite()) {
                    bad = Some(name.to_string());
                }
                sq_norm += g.iter().map(|v| v * v).sum::<f64>();
            }
        });
        if let Some(param) = bad {
            return Err(TrainError::NonFiniteGradient { param });
        }
        let clip_scale = match self.grad_clip {
            Some(max) if sq_norm.sqrt() > max => max / sq_norm.sqrt(),
            _ => 1.0,
        };

        self.t += 1;
        let (b1, b2) = self.betas;
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        let (lr, wd, eps) = (self.learning_rate, self.weight_decay, self.eps);
        let state = &mut self.state;
        params.visit(&mut |name, p| {
            let Some(g) = p.grad() else { return };
            let n = p.len();
            let slot = state.entry(name.to_string()).or_insert_with(|| Moments {
                m: vec![0.0; n],
                v: vec![0.0; n],
            });
            let mut data = p.data().to_vec();
            for i in 0..n {
                let gi = g[i] * clip_scale;
                slot.m[i] = b1 * slot.m[i] + (1.0 - b1) * gi;
                slot.v[i] = b2 * slot.v[i] + (1.0 - b2) * gi * gi;
                let m_hat = slot.m[i] / bc1;
                let v_hat = slot.v[i] / bc2;
                let w = data[i];
                data[i] = w - lr * m_hat / (v_hat.sqrt() + eps) - lr * wd * w;
            }
            *p = Tensor::param(p.shape().to_vec(), data);
        });
        Ok(())
    }
}

// ── training loop ───────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub total_loss: f64,
    pub quadrant_loss: f64,
    pub valence_loss: f64,
    pub arousal_loss: f64,
    pub quadrant_accuracy: f64,
    pub valence_accuracy: f64,
    pub arousal_accuracy: f64,
    pub validation_macro_f1: Option<f64>,
}

/// One document's supervision, pulled out of the corpus up front.
struct Example<'a> {
    tokens: &'a [usize],
    quadrant: usize,
    valence: usize,
    arousal: usize,
}

fn examples_of(corpus: &Corpus) -> Result<Vec<Example<'_>>, TrainError> {
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    corpus
        .docs
        .iter()
        .map(|doc| {
            let label = doc.label.ok_or_else(|| TrainError::MissingField {
                id: doc.id.clone(),
                what: "label",
            })?;
            let tokens = doc.tokens.as_deref().ok_or_else(|| TrainError::MissingField {
                id: doc.id.clone(),
                what: "token encoding",
            })?;
            Ok(Example {
                tokens,
                quadrant: label.quadrant().index(),
                valence: label.valence().index(),
                arousal: label.arousal().index(),
            })
        })
        .collect()
}

/// Epochs of seeded-shuffle minibatch AdamW on the Eq-style weighted
/// objective. Returns the per-epoch log; the model is updated in place.
pub fn train(
    model: &mut EmotionModel,
    corpus: &Corpus,
    validation: Option<&Corpus>,
    config: &TrainingConfig,
) -> Result<Vec<EpochLog>, TrainError> {
    config.validate()?;
    let examples = examples_of(corpus)?;
    let n = examples.len();
    let (l1, l2, l3) = config.lambdas;
    let mut rng = SeedRng::new(config.seed);
    let mut optimizer = AdamW::new(config);
    let mut log = Vec::with_capacity(config.epochs);
    let mut best_f1 = f64::NEG_INFINITY;
    let mut stale = 0usize;

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);

        let mut sums = [0.0f64; 4]; // total, per-task losses, doc-weighted
        let mut correct = [0usize; 3];
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            model.zero_grads();
            let mut q_rows = Vec::with_capacity(batch.len());
            let mut v_rows = Vec::with_capacity(batch.len());
            let mut a_rows = Vec::with_capacity(batch.len());
            let mut targets = (Vec::new(), Vec::new(), Vec::new());
            for &i in batch {
                let ex = &examples[i];
                let logits = model.forward_doc(ex.tokens, Mode::Train, &mut rng)?;
                let pred = heads::predict(&logits);
                correct[0] += usize::from(pred.quadrant == ex.quadrant);
                correct[1] += usize::from(pred.valence == ex.valence);
                correct[2] += usize::from(pred.arousal == ex.arousal);
                q_rows.push(logits.quadrant.reshape(vec![1, heads::QUADRANT_CLASSES])?);
                v_rows.push(logits.valence.reshape(vec![1, heads::VALENCE_CLASSES])?);
                a_rows.push(logits.arousal.reshape(vec![1, heads::AROUSAL_CLASSES])?);
                targets.0.push(ex.quadrant);
                targets.1.push(ex.valence);
                targets.2.push(ex.arousal);
            }
            let batch_loss = |rows: &[Tensor], t: &[usize]| -> Result<Tensor, TrainError> {
                Ok(Tensor::concat_rows(rows)?.cross_entropy(t)?)
            };
            // Skipped tasks stay out of the graph so their heads keep a
            // None gradient and the optimizer leaves them untouched.
            let zero = Tensor::scalar(0.0);
            let l_q = if l1 > 0.0 { batch_loss(&q_rows, &targets.0)? } else { zero.clone() };
            let l_v = if l2 > 0.0 { batch_loss(&v_rows, &targets.1)? } else { zero.clone() };
            let l_a = if l3 > 0.0 { batch_loss(&a_rows, &targets.2)? } else { zero };
            let total = multi_task_loss(&l_q, &l_v, &l_a, config.lambdas)?;
            let total_val = total.item();
            if !total_val.is_finite() {
                return Err(TrainError::Divergence {
                    epoch,
                    batch: batch_idx,
                });
            }
            total.backward();
            optimizer.step(model)?;

            let b = batch.len() as f64;
            sums[0] += total_val * b;
            sums[1] += l_q.item() * b;
            sums[2] += l_v.item() * b;
            sums[3] += l_a.item() * b;
        }

        let nf = n as f64;
        let mut entry = EpochLog {
            epoch,
            total_loss: sums[0] / nf,
            quadrant_loss: sums[1] / nf,
            valence_loss: sums[2] / nf,
            arousal_loss: sums[3] / nf,
            quadrant_accuracy: correct[0] as f64 / nf,
            valence_accuracy: correct[1] as f64 / nf,
            arousal_accuracy: correct[2] as f64 / nf,
            validation_macro_f1: None,
        };
        if let Some(val) = validation {
            let report = eval::evaluate(model, val)?;
            entry.validation_macro_f1 = Some(report.quadrant.macro_f1);
        }
        let val_f1 = entry.validation_macro_f1;
        log.push(entry);

        if let (Some(patience), Some(f1)) = (config.patience, val_f1) {
            if f1 > best_f1 {
                best_f1 = f1;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    break;
                }
            }
        }
    }
    Ok(log)
}

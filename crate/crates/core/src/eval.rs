//! Per-class precision/recall/F1, macro and micro averages, and corpus
//! evaluation with multi-split aggregation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{quadrant_of, Arousal, Corpus, EmotionLabel, Quadrant, Valence};
use crate::heads::{self, QUADRANT_CLASSES};
use crate::model::{EmotionModel, ModelError};
use crate::rng::SeedRng;
use crate::tensor::Mode;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("confusion matrix has no recorded examples")]
    EmptyMatrix,
    #[error("class index {index} out of range for {n_classes} classes")]
    ClassOutOfRange { index: usize, n_classes: usize },
    #[error("evaluation split is empty")]
    EmptySplit,
    #[error("document '{id}' is missing a {what}")]
    MissingField { id: String, what: &'static str },
    #[error(
        "document '{id}' holds token id {token_id} but the model vocabulary has {vocab_size} \
         entries; re-encode the split with the model's vocabulary (out-of-vocabulary words map \
         to the reserved unknown id)"
    )]
    VocabularyMismatch {
        id: String,
        token_id: usize,
        vocab_size: usize,
    },
    #[error("cannot aggregate zero reports")]
    NoReports,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("serialization failed: {0}")]
    Io(#[from] std::io::Error),
}

// ── confusion matrix ────────────────────────────────────────────────

/// Rows index the gold class, columns the predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> ConfusionMatrix {
        ConfusionMatrix {
            n_classes,
            counts: vec![0; n_classes * n_classes],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn record(&mut self, gold: usize, pred: usize) -> Result<(), EvalError> {
        for index in [gold, pred] {
            if index >= self.n_classes {
                return Err(EvalError::ClassOutOfRange {
                    index,
                    n_classes: self.n_classes,
                });
            }
        }
        self.counts[gold * self.n_classes + pred] += 1;
        Ok(())
    }

    pub fn count(&self, gold: usize, pred: usize) -> u64 {
        self.counts[gold * self.n_classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn trace(&self) -> u64 {
        (0..self.n_classes).map(|i| self.count(i, i)).sum()
    }

    /// Zero-division convention: precision is 0 when the class is never
    /// predicted.
    pub fn precision(&self, class: usize) -> f64 {
        let predicted: u64 = (0..self.n_classes).map(|g| self.count(g, class)).sum();
        if predicted == 0 {
            0.0
        } else {
            self.count(class, class) as f64 / predicted as f64
        }
    }

    /// Zero-division convention: recall is 0 when the class is absent from
    /// the gold labels.
    pub fn recall(&self, class: usize) -> f64 {
        let gold: u64 = (0..self.n_classes).map(|p| self.count(class, p)).sum();
        if gold == 0 {
            0.0
        } else {
            self.count(class, class) as f64 / gold as f64
        }
    }

    pub fn f1(&self, class: usize) -> f64 {
        let p = self.precision(class);
        let r = self.recall(class);
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// Mean of the per-class F1 over every configured class.
    pub fn macro_f1(&self) -> Result<f64, EvalError> {
        if self.total() == 0 {
            return Err(EvalError::EmptyMatrix);
        }
        let sum: f64 = (0..self.n_classes).map(|c| self.f1(c)).sum();
        Ok(sum / self.n_classes as f64)
    }

    /// For single-label classification this is the overall accuracy.
    pub fn micro_f1(&self) -> Result<f64, EvalError> {
        let total = self.total();
        if total == 0 {
            return Err(EvalError::EmptyMatrix);
        }
        Ok(self.trace() as f64 / total as f64)
    }
}

// ── reports ─────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub accuracy: f64,
}

impl TaskMetrics {
    pub fn from_matrix(matrix: &ConfusionMatrix) -> Result<TaskMetrics, EvalError> {
        let n = matrix.n_classes();
        let per_class: Vec<ClassMetrics> = (0..n)
            .map(|c| ClassMetrics {
                precision: matrix.precision(c),
                recall: matrix.recall(c),
                f1: matrix.f1(c),
            })
            .collect();
        let micro = matrix.micro_f1()?;
        Ok(TaskMetrics {
            macro_precision: per_class.iter().map(|m| m.precision).sum::<f64>() / n as f64,
            macro_recall: per_class.iter().map(|m| m.recall).sum::<f64>() / n as f64,
            macro_f1: matrix.macro_f1()?,
            micro_f1: micro,
            accuracy: micro,
            per_class,
        })
    }

    fn values(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for c in &self.per_class {
            v.extend([c.precision, c.recall, c.f1]);
        }
        v.extend([
            self.macro_precision,
            self.macro_recall,
            self.macro_f1,
            self.micro_f1,
            self.accuracy,
        ]);
        v
    }

    fn from_values(n_classes: usize, v: &[f64]) -> TaskMetrics {
        let per_class = (0..n_classes)
            .map(|c| ClassMetrics {
                precision: v[c * 3],
                recall: v[c * 3 + 1],
                f1: v[c * 3 + 2],
            })
            .collect();
        let tail = &v[n_classes * 3..];
        TaskMetrics {
            per_class,
            macro_precision: tail[0],
            macro_recall: tail[1],
            macro_f1: tail[2],
            micro_f1: tail[3],
            accuracy: tail[4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n_examples: usize,
    pub quadrant: TaskMetrics,
    pub valence: TaskMetrics,
    pub arousal: TaskMetrics,
    /// Fraction of examples where the predicted quadrant equals the quadrant
    /// implied by the predicted valence/arousal pair.
    pub quadrant_hemisphere_agreement: f64,
}

impl EvaluationReport {
    fn values(&self) -> Vec<f64> {
        let mut v = self.quadrant.values();
        v.extend(self.valence.values());
        v.extend(self.arousal.values());
        v.push(self.quadrant_hemisphere_agreement);
        v
    }
}

// ── inference over a split ──────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocPrediction {
    pub id: String,
    pub gold_quadrant: Quadrant,
    pub gold_valence: Valence,
    pub gold_arousal: Arousal,
    pub pred_quadrant: Quadrant,
    pub pred_valence: Valence,
    pub pred_arousal: Arousal,
    pub quadrant_logits: Vec<f64>,
    pub valence_logits: Vec<f64>,
    pub arousal_logits: Vec<f64>,
}

fn gold_of(doc_id: &str, label: Option<EmotionLabel>) -> Result<EmotionLabel, EvalError> {
    label.ok_or_else(|| EvalError::MissingField {
        id: doc_id.to_string(),
        what: "label",
    })
}

/// Eval-mode inference over every document of a labeled, encoded split.
pub fn predict_corpus(
    model: &EmotionModel,
    corpus: &Corpus,
) -> Result<Vec<DocPrediction>, EvalError> {
    if corpus.is_empty() {
        return Err(EvalError::EmptySplit);
    }
    let vocab_size = model.encoder.config.vocab_size;
    let mut out = Vec::with_capacity(corpus.len());
    // Dropout is disabled in eval mode, so the rng is never consulted.
    let mut rng = SeedRng::new(0);
    for doc in &corpus.docs {
        let label = gold_of(&doc.id, doc.label)?;
        let tokens = doc.tokens.as_ref().ok_or_else(|| EvalError::MissingField {
            id: doc.id.clone(),
            what: "token encoding",
        })?;
        if let Some(&bad) = tokens.iter().find(|&&t| t >= vocab_size) {
            return Err(EvalError::VocabularyMismatch {
                id: doc.id.clone(),
                token_id: bad,
                vocab_size,
            });
        }
        let logits = model.forward_doc(tokens, Mode::Eval, &mut rng)?;
        let pred = heads::predict(&logits);
        out.push(DocPrediction {
            id: doc.id.clone(),
            gold_quadrant: label.quadrant(),
            gold_valence: label.valence(),
            gold_arousal: label.arousal(),
            pred_quadrant: Quadrant::from_index(pred.quadrant).unwrap(),
            pred_valence: Valence::from_index(pred.valence).unwrap(),
            pred_arousal: Arousal::from_index(pred.arousal).unwrap(),
            quadrant_logits: logits.quadrant.data().to_vec(),
            valence_logits: logits.valence.data().to_vec(),
            arousal_logits: logits.arousal.data().to_vec(),
        });
    }
    Ok(out)
}

pub fn report_from_predictions(preds: &[DocPrediction]) -> Result<EvaluationReport, EvalError> {
    if preds.is_empty() {
        return Err(EvalError::EmptySplit);
    }
    let mut q = ConfusionMatrix::new(QUADRANT_CLASSES);
    let mut v = ConfusionMatrix::new(2);
    let mut a = ConfusionMatrix::new(2);
    let mut agree = 0usize;
    for p in preds {
        q.record(p.gold_quadrant.index(), p.pred_quadrant.index())?;
        v.record(p.gold_valence.index(), p.pred_valence.index())?;
        a.record(p.gold_arousal.index(), p.pred_arousal.index())?;
        if quadrant_of(p.pred_valence, p.pred_arousal) == p.pred_quadrant {
            agree += 1;
        }
    }
    Ok(EvaluationReport {
        n_examples: preds.len(),
        quadrant: TaskMetrics::from_matrix(&q)?,
        valence: TaskMetrics::from_matrix(&v)?,
        arousal: TaskMetrics::from_matrix(&a)?,
        quadrant_hemisphere_agreement: agree as f64 / preds.len() as f64,
    })
}

pub fn evaluate(model: &EmotionModel, corpus: &Corpus) -> Result<EvaluationReport, EvalError> {
    report_from_predictions(&predict_corpus(model, corpus)?)
}

/// One JSON record per line: id, gold labels, predicted labels, logits.
pub fn write_predictions<W: Write>(mut w: W, preds: &[DocPrediction]) -> Result<(), EvalError> {
    for p in preds {
        serde_json::to_writer(&mut w, p).map_err(std::io::Error::other)?;
        writeln!(w)?;
    }
    Ok(())
}

// ── multi-split aggregation ─────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryMetrics {
    pub quadrant: TaskMetrics,
    pub valence: TaskMetrics,
    pub arousal: TaskMetrics,
    pub quadrant_hemisphere_agreement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub n_reports: usize,
    pub mean: SummaryMetrics,
    pub std: SummaryMetrics,
}

fn summary_from_values(v: &[f64]) -> SummaryMetrics {
    let q_len = QUADRANT_CLASSES * 3 + 5;
    let b_len = 2 * 3 + 5;
    SummaryMetrics {
        quadrant: TaskMetrics::from_values(QUADRANT_CLASSES, &v[..q_len]),
        valence: TaskMetrics::from_values(2, &v[q_len..q_len + b_len]),
        arousal: TaskMetrics::from_values(2, &v[q_len + b_len..q_len + 2 * b_len]),
        quadrant_hemisphere_agreement: v[q_len + 2 * b_len],
    }
}

/// Arithmetic mean and population standard deviation of every metric.
pub fn multi_split_average(reports: &[EvaluationReport]) -> Result<AggregateReport, EvalError> {
    let first = reports.first().ok_or(EvalError::NoReports)?;
    let dim = first.values().len();
    let n = reports.len() as f64;
    let mut mean = vec![0.0; dim];
    for r in reports {
        let v = r.values();
        if v.len() != dim {
            return Err(EvalError::NoReports);
        }
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x / n;
        }
    }
    let mut var = vec![0.0; dim];
    for r in reports {
        for ((s, x), m) in var.iter_mut().zip(r.values()).zip(&mean) {
            *s += (x - m) * (x - m) / n;
        }
    }
    let std: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
    Ok(AggregateReport {
        n_reports: reports.len(),
        mean: summary_from_values(&mean),
        std: summary_from_values(&std),
    })
}

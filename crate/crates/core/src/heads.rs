//! Sequence summary, shared bottleneck trunk, and the three task heads
//! (Quadrant 4-way, Valence 2-way, Arousal 2-way).

use crate::rng::SeedRng;
use crate::tensor::{Mode, Tensor, TensorError};

pub const QUADRANT_CLASSES: usize = 4;
pub const VALENCE_CLASSES: usize = 2;
pub const AROUSAL_CLASSES: usize = 2;

#[derive(Debug, thiserror::Error)]
pub enum HeadError {
    #[error("cannot summarize an empty sequence")]
    EmptySequence,
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryMode {
    LastToken,
    Mean,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HeadConfig {
    pub summary_mode: SummaryMode,
    pub bottleneck_dim: usize,
    pub dropout_p: f64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            summary_mode: SummaryMode::Mean,
            bottleneck_dim: 16,
            dropout_p: 0.1,
        }
    }
}

/// Raw per-task logits for one document.
#[derive(Clone, Debug)]
pub struct TaskLogits {
    pub quadrant: Tensor,
    pub valence: Tensor,
    pub arousal: Tensor,
}

/// Hard per-task class decisions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TaskPrediction {
    pub quadrant: usize,
    pub valence: usize,
    pub arousal: usize,
}

/// Reduce per-token hidden states `[seq_len, d_model]` to one vector.
pub fn summarize(hidden: &Tensor, mode: SummaryMode) -> Result<Tensor, HeadError> {
    let shape = hidden.shape();
    if shape.len() != 2 || shape[0] == 0 {
        return Err(HeadError::EmptySequence);
    }
    let out = match mode {
        SummaryMode::LastToken => hidden.row(shape[0] - 1)?,
        SummaryMode::Mean => hidden.mean_rows()?,
    };
    Ok(out)
}

pub struct HeadStack {
    pub config: HeadConfig,
    pub d_model: usize,
    pub trunk_w: Tensor,
    pub trunk_b: Tensor,
    pub quadrant_w: Tensor,
    pub quadrant_b: Tensor,
    pub valence_w: Tensor,
    pub valence_b: Tensor,
    pub arousal_w: Tensor,
    pub arousal_b: Tensor,
}

impl HeadStack {
    pub fn init(d_model: usize, config: HeadConfig, rng: &mut SeedRng) -> HeadStack {
        let b = config.bottleneck_dim;
        let normal = |shape: Vec<usize>, rng: &mut SeedRng| {
            let n: usize = shape.iter().product();
            Tensor::param(shape, (0..n).map(|_| rng.normal(0.0, 0.02)).collect())
        };
        HeadStack {
            config,
            d_model,
            trunk_w: normal(vec![d_model, b], rng),
            trunk_b: Tensor::param(vec![b], vec![0.0; b]),
            quadrant_w: normal(vec![b, QUADRANT_CLASSES], rng),
            quadrant_b: Tensor::param(vec![QUADRANT_CLASSES], vec![0.0; QUADRANT_CLASSES]),
            valence_w: normal(vec![b, VALENCE_CLASSES], rng),
            valence_b: Tensor::param(vec![VALENCE_CLASSES], vec![0.0; VALENCE_CLASSES]),
            arousal_w: normal(vec![b, AROUSAL_CLASSES], rng),
            arousal_b: Tensor::param(vec![AROUSAL_CLASSES], vec![0.0; AROUSAL_CLASSES]),
        }
    }

    pub fn param_count(d_model: usize, config: &HeadConfig) -> usize {
        let b = config.bottleneck_dim;
        d_model * b + b
            + b * QUADRANT_CLASSES + QUADRANT_CLASSES
            + b * VALENCE_CLASSES + VALENCE_CLASSES
            + b * AROUSAL_CLASSES + AROUSAL_CLASSES
    }

    pub fn for_each_param(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        for (name, t) in [
            ("heads.trunk_w", &mut self.trunk_w),
            ("heads.trunk_b", &mut self.trunk_b),
            ("heads.quadrant_w", &mut self.quadrant_w),
            ("heads.quadrant_b", &mut self.quadrant_b),
            ("heads.valence_w", &mut self.valence_w),
            ("heads.valence_b", &mut self.valence_b),
            ("heads.arousal_w", &mut self.arousal_w),
            ("heads.arousal_b", &mut self.arousal_b),
        ] {
            f(name, t);
        }
    }

    /// Bottleneck activation for one summary vector: dropout → FC → tanh.
    pub fn bottleneck(
        &self,
        summary: &Tensor,
        mode: Mode,
        rng: &mut SeedRng,
    ) -> Result<Tensor, HeadError> {
        let mut s = summary.reshape(vec![1, self.d_model])?;
        if mode == Mode::Train && self.config.dropout_p > 0.0 {
            s = s.dropout(self.config.dropout_p, mode, rng)?;
        }
        Ok(s
            .matmul(&self.trunk_w)?
            .add_row_broadcast(&self.trunk_b)?
            .tanh_act())
    }

    /// Logits for all three tasks from one summary vector.
    pub fn forward(
        &self,
        summary: &Tensor,
        mode: Mode,
        rng: &mut SeedRng,
    ) -> Result<TaskLogits, HeadError> {
        let z = self.bottleneck(summary, mode, rng)?;
        let head = |w: &Tensor, b: &Tensor, n: usize| -> Result<Tensor, TensorError> {
            z.matmul(w)?.add_row_broadcast(b)?.reshape(vec![n])
        };
        Ok(TaskLogits {
            quadrant: head(&self.quadrant_w, &self.quadrant_b, QUADRANT_CLASSES)?,
            valence: head(&self.valence_w, &self.valence_b, VALENCE_CLASSES)?,
            arousal: head(&self.arousal_w, &self.arousal_b, AROUSAL_CLASSES)?,
        })
    }
}

/// Argmax per task, ties broken toward the lowest class index.
pub fn predict(logits: &TaskLogits) -> TaskPrediction {
    TaskPrediction {
        quadrant: argmax_lowest(logits.quadrant.data()),
        valence: argmax_lowest(logits.valence.data()),
        arousal: argmax_lowest(logits.arousal.data()),
    }
}

fn argmax_lowest(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in xs.iter().enumerate().skip(1) {
        if *v > xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summarize_single_position_both_modes() {
        let h = Tensor::new(vec![1, 3], vec![1.0, 2.0, 3.0]);
        for mode in [SummaryMode::LastToken, SummaryMode::Mean] {
            let s = summarize(&h, mode).unwrap();
            assert_eq!(s.data(), &[1.0, 2.0, 3.0]);
        }
    }

    #[test]
    fn summarize_mean() {
        let h = Tensor::new(vec![2, 2], vec![1.0, 3.0, 3.0, 5.0]);
        let s = summarize(&h, SummaryMode::Mean).unwrap();
        assert_eq!(s.data(), &[2.0, 4.0]);
    }

    #[test]
    fn summarize_last_token_is_final_row() {
        let data: Vec<f64> = (0..7 * 4).map(|v| v as f64).collect();
        let h = Tensor::new(vec![7, 4], data.clone());
        let s = summarize(&h, SummaryMode::LastToken).unwrap();
        assert_eq!(s.data(), &data[24..28]);
    }

    #[test]
    fn summarize_rejects_empty_sequence() {
        let h = Tensor::new(vec![0, 4], vec![]);
        assert!(matches!(
            summarize(&h, SummaryMode::Mean),
            Err(HeadError::EmptySequence)
        ));
    }

    #[test]
    fn zero_summary_zero_heads_give_zero_logits() {
        let mut stack = HeadStack::init(8, HeadConfig::default(), &mut SeedRng::new(1));
        stack.for_each_param(&mut |_, t| {
            *t = Tensor::param(t.shape().to_vec(), vec![0.0; t.len()]);
        });
        let summary = Tensor::new(vec![8], vec![0.0; 8]);
        let logits = stack
            .forward(&summary, Mode::Eval, &mut SeedRng::new(0))
            .unwrap();
        assert!(logits.quadrant.data().iter().all(|v| *v == 0.0));
        assert!(logits.valence.data().iter().all(|v| *v == 0.0));
        assert!(logits.arousal.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn logit_shapes() {
        let stack = HeadStack::init(16, HeadConfig::default(), &mut SeedRng::new(2));
        let summary = Tensor::new(vec![16], (0..16).map(|v| v as f64 / 16.0).collect());
        let logits = stack
            .forward(&summary, Mode::Eval, &mut SeedRng::new(0))
            .unwrap();
        assert_eq!(logits.quadrant.shape(), &[4]);
        assert_eq!(logits.valence.shape(), &[2]);
        assert_eq!(logits.arousal.shape(), &[2]);
    }

    #[test]
    fn predict_breaks_ties_toward_lowest_index() {
        let logits = TaskLogits {
            quadrant: Tensor::new(vec![4], vec![0.2, 0.2, 0.1, 0.2]),
            valence: Tensor::new(vec![2], vec![-1.0, 3.0]),
            arousal: Tensor::new(vec![2], vec![0.5, 0.5]),
        };
        let p = predict(&logits);
        assert_eq!(p.quadrant, 0);
        assert_eq!(p.valence, 1);
        assert_eq!(p.arousal, 0);
    }

    #[test]
    fn predict_shift_invariant() {
        let base = TaskLogits {
            quadrant: Tensor::new(vec![4], vec![0.1, 2.0, -0.5, 1.9]),
            valence: Tensor::new(vec![2], vec![0.3, 0.1]),
            arousal: Tensor::new(vec![2], vec![-4.0, 4.0]),
        };
        let shifted = TaskLogits {
            quadrant: base.quadrant.add_scalar(123.0),
            valence: base.valence.add_scalar(-55.5),
            arousal: base.arousal.add_scalar(1e6),
        };
        assert_eq!(predict(&base), predict(&shifted));
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let stack = HeadStack::init(8, HeadConfig::default(), &mut SeedRng::new(3));
        let summary = Tensor::new(vec![8], (0..8).map(|v| v as f64).collect());
        let a = stack
            .forward(&summary, Mode::Eval, &mut SeedRng::new(10))
            .unwrap();
        let b = stack
            .forward(&summary, Mode::Eval, &mut SeedRng::new(99))
            .unwrap();
        assert_eq!(a.quadrant.data(), b.quadrant.data());
        assert_eq!(a.valence.data(), b.valence.data());
        assert_eq!(a.arousal.data(), b.arousal.data());
    }

    #[test]
    fn joint_backward_equals_sum_of_per_task_backwards() {
        // Gradient w.r.t. the shared trunk from the joint loss must equal the
        // sum of gradients from per-task passes run separately.
        let run = |tasks: &[usize]| -> Vec<f64> {
            let mut rng = SeedRng::new(42);
            let stack = HeadStack::init(8, HeadConfig::default(), &mut rng);
            let summary = Tensor::new(vec![8], (0..8).map(|v| v as f64 / 8.0).collect());
            let logits = stack
                .forward(&summary, Mode::Eval, &mut SeedRng::new(0))
                .unwrap();
            let mut terms = Vec::new();
            for &t in tasks {
                let loss = match t {
                    0 => logits.quadrant.reshape(vec![1, 4]).unwrap().cross_entropy(&[2]),
                    1 => logits.valence.reshape(vec![1, 2]).unwrap().cross_entropy(&[0]),
                    _ => logits.arousal.reshape(vec![1, 2]).unwrap().cross_entropy(&[1]),
                }
                .unwrap();
                terms.push(loss);
            }
            let mut total = terms[0].clone();
            for t in &terms[1..] {
                total = total.add(t).unwrap();
            }
            total.backward();
            stack.trunk_w.grad().unwrap()
        };
        let joint = run(&[0, 1, 2]);
        let q = run(&[0]);
        let v = run(&[1]);
        let a = run(&[2]);
        for i in 0..joint.len() {
            assert!((joint[i] - (q[i] + v[i] + a[i])).abs() < 1e-10);
        }
    }
}

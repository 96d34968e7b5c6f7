//! Registry of finite-difference gradient checks covering every
//! differentiable primitive plus the composed attention block, head stack,
//! and full multi-task loss. Powers the `gradcheck` subcommand.

use crate::encoder::{attention_scores, EncoderConfig, Encoder};
use crate::heads::{HeadConfig, HeadStack, SummaryMode};
use crate::rng::SeedRng;
use crate::tensor::{grad_check, Mode, Tensor, TensorError};
use crate::train::multi_task_loss;

pub const DEFAULT_TOLERANCE: f64 = 1e-4;
const STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub max_rel_err: f64,
    pub passed: bool,
}

fn uniform(shape: Vec<usize>, rng: &mut SeedRng) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::param(shape, (0..n).map(|_| rng.uniform() * 4.0 - 2.0).collect())
}

fn weights(shape: Vec<usize>, rng: &mut SeedRng) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.normal(0.0, 1.0)).collect())
}

/// Identity forward with a deliberately wrong backward rule; used as a
/// negative fixture to prove the checker catches bad gradients.
fn corrupted_identity(x: &Tensor) -> Tensor {
    Tensor::from_op(
        x.shape().to_vec(),
        x.data().to_vec(),
        vec![x.clone()],
        Box::new(|g, parents| {
            let wrong: Vec<f64> = g.iter().map(|v| v * 1.05).collect();
            parents[0].accum_grad(&wrong);
        }),
    )
}

/// Run every registered check. Each entry perturbs its leaf inputs with
/// central differences at 64-bit and compares against the reverse-mode
/// gradient.
pub fn run_gradcheck_suite(
    tolerance: f64,
    include_corrupted_fixture: bool,
) -> Result<Vec<SuiteResult>, TensorError> {
    let mut rng = SeedRng::new(0x9e3779b9);
    let mut results = Vec::new();
    let push = |name: &'static str,
                    report: Result<crate::tensor::GradCheckReport, TensorError>,
                    results: &mut Vec<SuiteResult>|
     -> Result<(), TensorError> {
        let report = report?;
        let err = report.max_rel_err();
        results.push(SuiteResult {
            name,
            max_rel_err: err,
            passed: err < tolerance,
        });
        Ok(())
    };

    {
        let a = uniform(vec![3, 4], &mut rng);
        let b = uniform(vec![3, 4], &mut rng);
        let w = weights(vec![3, 4], &mut rng);
        let r = grad_check(
            move |x| Ok(x[0].add(&x[1])?.mul(&w)?.sum()),
            &[a, b],
            STEP,
        );
        push("add", r, &mut results)?;
    }
    {
        let a = uniform(vec![3, 4], &mut rng);
        let b = uniform(vec![3, 4], &mut rng);
        let w = weights(vec![3, 4], &mut rng);
        let r = grad_check(
            move |x| Ok(x[0].mul(&x[1])?.mul(&w)?.sum()),
            &[a, b],
            STEP,
        );
        push("mul", r, &mut results)?;
    }
    {
        let a = uniform(vec![4, 5], &mut rng);
        let b = uniform(vec![5, 3], &mut rng);
        let w = weights(vec![4, 3], &mut rng);
        let r = grad_check(
            move |x| Ok(x[0].matmul(&x[1])?.mul(&w)?.sum()),
            &[a, b],
            STEP,
        );
        push("matmul", r, &mut results)?;
    }
    {
        let a = uniform(vec![3, 5], &mut rng);
        let w = weights(vec![5, 3], &mut rng);
        let r = grad_check(move |x| Ok(x[0].transpose2()?.mul(&w)?.sum()), &[a], STEP);
        push("transpose", r, &mut results)?;
    }
    {
        let a = uniform(vec![2, 6], &mut rng);
        let w = weights(vec![4, 3], &mut rng);
        let r = grad_check(
            move |x| Ok(x[0].reshape(vec![4, 3])?.mul(&w)?.sum()),
            &[a],
            STEP,
        );
        push("reshape", r, &mut results)?;
    }
    {
        let a = uniform(vec![2, 4], &mut rng);
        let b = uniform(vec![3, 4], &mut rng);
        let w = weights(vec![5, 4], &mut rng);
        let r = grad_check(
            move |x| Ok(Tensor::concat_rows(&[x[0].clone(), x[1].clone()])?.mul(&w)?.sum()),
            &[a, b],
            STEP,
        );
        push("concat_rows", r, &mut results)?;
    }
    {
        let a = uniform(vec![3, 6], &mut rng);
        let w = weights(vec![3, 6], &mut rng);
        let r = grad_check(move |x| Ok(x[0].softmax_last().mul(&w)?.sum()), &[a], STEP);
        push("softmax", r, &mut results)?;
    }
    {
        let a = uniform(vec![3, 4], &mut rng);
        let w = weights(vec![3, 4], &mut rng);
        let r = grad_check(move |x| Ok(x[0].gelu().mul(&w)?.sum()), &[a], STEP);
        push("gelu", r, &mut results)?;
    }
    {
        let a = uniform(vec![3, 4], &mut rng);
        let w = weights(vec![3, 4], &mut rng);
        let r = grad_check(move |x| Ok(x[0].tanh_act().mul(&w)?.sum()), &[a], STEP);
        push("tanh", r, &mut results)?;
    }
    {
        let a = uniform(vec![2, 8], &mut rng);
        let gain = uniform(vec![8], &mut rng);
        let bias = uniform(vec![8], &mut rng);
        let w = weights(vec![2, 8], &mut rng);
        let r = grad_check(
            move |x| Ok(x[0].layer_norm(&x[1], &x[2], 1e-5)?.mul(&w)?.sum()),
            &[a, gain, bias],
            STEP,
        );
        push("layer_norm", r, &mut results)?;
    }
    {
        // fresh generator per evaluation keeps the mask fixed across the
        // central-difference probes
        let a = uniform(vec![4, 8], &mut rng);
        let w = weights(vec![4, 8], &mut rng);
        let r = grad_check(
            move |x| {
                let mut mask_rng = SeedRng::new(7);
                Ok(x[0]
                    .dropout(0.25, Mode::Train, &mut mask_rng)?
                    .mul(&w)?
                    .sum())
            },
            &[a],
            STEP,
        );
        push("dropout", r, &mut results)?;
    }
    {
        let table = uniform(vec![6, 4], &mut rng);
        let w = weights(vec![5, 4], &mut rng);
        let r = grad_check(
            move |x| Ok(Tensor::embedding_lookup(&x[0], &[0, 3, 5, 3, 1])?.mul(&w)?.sum()),
            &[table],
            STEP,
        );
        push("embedding_lookup", r, &mut results)?;
    }
    {
        let logits = uniform(vec![3, 4], &mut rng);
        let r = grad_check(move |x| x[0].cross_entropy(&[1, 0, 3]), &[logits], STEP);
        push("cross_entropy", r, &mut results)?;
    }
    {
        let scores = uniform(vec![4, 9], &mut rng); // q_len 4, 2q-1+m rows
        let w = weights(vec![4, 6], &mut rng);
        let r = grad_check(
            move |x| Ok(x[0].gather_rel(2)?.mul(&w)?.sum()),
            &[scores],
            STEP,
        );
        push("gather_rel", r, &mut results)?;
    }
    {
        let d = 8;
        let q = uniform(vec![4, d], &mut rng);
        let k = uniform(vec![4, d], &mut rng);
        let rel = uniform(vec![7, d], &mut rng);
        let u = uniform(vec![d], &mut rng);
        let v = uniform(vec![d], &mut rng);
        let w = weights(vec![8, 4], &mut rng);
        let r = grad_check(
            move |x| {
                let s = attention_scores(&x[0], &x[1], &x[2], &x[3], &x[4], 2, 0)?;
                Ok(s.reshape(vec![8, 4])?.mul(&w)?.sum())
            },
            &[q, k, rel, u, v],
            STEP,
        );
        push("attention_block", r, &mut results)?;
    }
    {
        let d = 8;
        let stack = HeadStack::init(
            d,
            HeadConfig {
                summary_mode: SummaryMode::Mean,
                bottleneck_dim: 8,
                dropout_p: 0.0,
            },
            &mut SeedRng::new(5),
        );
        let summary = uniform(vec![1, d], &mut rng);
        let trunk_w = uniform(vec![d, 8], &mut rng);
        let quadrant_w = uniform(vec![8, 4], &mut rng);
        let valence_w = uniform(vec![8, 2], &mut rng);
        let arousal_w = uniform(vec![8, 2], &mut rng);
        let r = grad_check(
            move |x| {
                let mut heads = stack_clone(&stack);
                heads.trunk_w = x[1].clone();
                heads.quadrant_w = x[2].clone();
                heads.valence_w = x[3].clone();
                heads.arousal_w = x[4].clone();
                let logits = heads
                    .forward(&x[0], Mode::Eval, &mut SeedRng::new(0))
                    .map_err(|_| TensorError::InvalidParameter {
                        op: "head_stack",
                        msg: "forward failed".into(),
                    })?;
                let l_q = logits.quadrant.reshape(vec![1, 4])?.cross_entropy(&[2])?;
                let l_v = logits.valence.reshape(vec![1, 2])?.cross_entropy(&[1])?;
                let l_a = logits.arousal.reshape(vec![1, 2])?.cross_entropy(&[0])?;
                multi_task_loss(&l_q, &l_v, &l_a, (1.0, 1.0, 1.0)).map_err(|_| {
                    TensorError::InvalidParameter {
                        op: "head_stack",
                        msg: "loss failed".into(),
                    }
                })
            },
            &[summary, trunk_w, quadrant_w, valence_w, arousal_w],
            STEP,
        );
        push("head_stack", r, &mut results)?;
    }
    {
        // end to end: embeddings through a 1-layer encoder, mean summary,
        // all three heads, weighted loss
        let config = EncoderConfig {
            n_layers: 1,
            n_heads: 2,
            d_model: 8,
            d_ff: 16,
            dropout_p: 0.0,
            max_seq_len: 16,
            memory_len: 0,
            vocab_size: 12,
        };
        let encoder = Encoder::init(config, &mut SeedRng::new(6)).unwrap();
        let heads = HeadStack::init(
            8,
            HeadConfig {
                summary_mode: SummaryMode::Mean,
                bottleneck_dim: 8,
                dropout_p: 0.0,
            },
            &mut SeedRng::new(7),
        );
        let embedding = uniform(vec![12, 8], &mut rng);
        let trunk_w = uniform(vec![8, 8], &mut rng);
        let r = grad_check(
            move |x| {
                let mut enc = encoder_clone(&encoder);
                enc.embedding = x[0].clone();
                let mut h = stack_clone(&heads);
                h.trunk_w = x[1].clone();
                let bad = |msg: &str| TensorError::InvalidParameter {
                    op: "full_loss",
                    msg: msg.into(),
                };
                let (hidden, _) = enc
                    .encode(&[0, 4, 7, 11, 2], None, Mode::Eval, &mut SeedRng::new(0))
                    .map_err(|_| bad("encode failed"))?;
                let summary =
                    crate::heads::summarize(&hidden, SummaryMode::Mean).map_err(|_| bad("summary"))?;
                let logits = h
                    .forward(&summary, Mode::Eval, &mut SeedRng::new(0))
                    .map_err(|_| bad("heads"))?;
                let l_q = logits.quadrant.reshape(vec![1, 4])?.cross_entropy(&[1])?;
                let l_v = logits.valence.reshape(vec![1, 2])?.cross_entropy(&[0])?;
                let l_a = logits.arousal.reshape(vec![1, 2])?.cross_entropy(&[1])?;
                multi_task_loss(&l_q, &l_v, &l_a, (1.0, 0.7, 0.3)).map_err(|_| bad("loss"))
            },
            &[embedding, trunk_w],
            STEP,
        );
        push("full_loss", r, &mut results)?;
    }

    if include_corrupted_fixture {
        let a = uniform(vec![3, 3], &mut rng);
        let w = weights(vec![3, 3], &mut rng);
        let r = grad_check(
            move |x| Ok(corrupted_identity(&x[0]).mul(&w)?.sum()),
            &[a],
            STEP,
        );
        push("corrupted_backward_fixture", r, &mut results)?;
    }

    Ok(results)
}

// Cheap structural clones: tensors are reference counted, so cloning the
// containers just copies handles.
fn stack_clone(s: &HeadStack) -> HeadStack {
    HeadStack {
        config: s.config.clone(),
        d_model: s.d_model,
        trunk_w: s.trunk_w.clone(),
        trunk_b: s.trunk_b.clone(),
        quadrant_w: s.quadrant_w.clone(),
        quadrant_b: s.quadrant_b.clone(),
        valence_w: s.valence_w.clone(),
        valence_b: s.valence_b.clone(),
        arousal_w: s.arousal_w.clone(),
        arousal_b: s.arousal_b.clone(),
    }
}

fn encoder_clone(e: &Encoder) -> Encoder {
    Encoder {
        config: e.config.clone(),
        embedding: e.embedding.clone(),
        u_bias: e.u_bias.clone(),
        v_bias: e.v_bias.clone(),
        layers: e.layers.iter().map(|l| crate::encoder::EncoderLayer {
            wq: l.wq.clone(),
            bq: l.bq.clone(),
            wk: l.wk.clone(),
            bk: l.bk.clone(),
            wv: l.wv.clone(),
            bv: l.bv.clone(),
            wo: l.wo.clone(),
            bo: l.bo.clone(),
            wr: l.wr.clone(),
            ln1_gain: l.ln1_gain.clone(),
            ln1_bias: l.ln1_bias.clone(),
            ln2_gain: l.ln2_gain.clone(),
            ln2_bias: l.ln2_bias.clone(),
            ff1_w: l.ff1_w.clone(),
            ff1_b: l.ff1_b.clone(),
            ff2_w: l.ff2_w.clone(),
            ff2_b: l.ff2_b.clone(),
        }).collect(),
    }
}

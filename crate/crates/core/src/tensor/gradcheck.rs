//! Finite-difference verification of backward rules.

use super::{Tensor, TensorError};

#[derive(Clone, Debug)]
pub struct GradCheckEntry {
    pub input_index: usize,
    pub max_rel_err: f64,
    /// Flat index of the worst element within the input.
    pub worst_element: usize,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub per_input: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.per_input
            .iter()
            .map(|e| e.max_rel_err)
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_err() < tolerance
    }
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / f64::max(1e-8, a.abs() + n.abs())
}

/// Compare the reverse-mode gradient of a scalar-valued function against
/// central finite differences `(f(x+h) − f(x−h)) / 2h`, elementwise over
/// every input.
pub fn grad_check<F>(f: F, inputs: &[Tensor], step: f64) -> Result<GradCheckReport, TensorError>
where
    F: Fn(&[Tensor]) -> Result<Tensor, TensorError>,
{
    // Fresh leaves so caller gradients stay untouched.
    let leaves: Vec<Tensor> = inputs
        .iter()
        .map(|t| Tensor::param(t.shape().to_vec(), t.data().to_vec()))
        .collect();
    let out = f(&leaves)?;
    if out.len() != 1 {
        return Err(TensorError::NonScalarOutput {
            op: "grad_check",
            shape: out.shape().to_vec(),
        });
    }
    out.backward();
    let analytic: Vec<Vec<f64>> = leaves
        .iter()
        .map(|l| l.grad().unwrap_or_else(|| vec![0.0; l.len()]))
        .collect();

    let eval_at = |perturbed: usize, elem: usize, delta: f64| -> Result<f64, TensorError> {
        let probe: Vec<Tensor> = leaves
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let mut data = l.data().to_vec();
                if i == perturbed {
                    data[elem] += delta;
                }
                Tensor::param(l.shape().to_vec(), data)
            })
            .collect();
        Ok(f(&probe)?.item())
    };

    let mut per_input = Vec::with_capacity(leaves.len());
    for (i, leaf) in leaves.iter().enumerate() {
        let mut worst = 0.0;
        let mut worst_elem = 0;
        for e in 0..leaf.len() {
            let plus = eval_at(i, e, step)?;
            let minus = eval_at(i, e, -step)?;
            let numeric = (plus - minus) / (2.0 * step);
            let err = rel_err(analytic[i][e], numeric);
            if err > worst {
                worst = err;
                worst_elem = e;
            }
        }
        per_input.push(GradCheckEntry {
            input_index: i,
            max_rel_err: worst,
            worst_element: worst_elem,
        });
    }
    Ok(GradCheckReport { per_input })
}

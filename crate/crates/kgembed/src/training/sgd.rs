//! Gradient-descent parameter updates.
//!
//! The canonical update is plain SGD, `theta <- theta - alpha * (grad +
//! 2*lambda*theta)`, where the decay term applies only to parameters touched
//! in the step. An adaptive first/second-moment optimizer is available
//! behind the same step interface.

use crate::error::{Error, Result};
use crate::model::{ModelState, OptimizerKind};

/// One SGD update on a raw parameter slice. Rejects non-finite gradients
/// before mutating anything.
pub fn sgd_step(values: &mut [f64], grads: &[f64], lr: f64, lambda: f64) -> Result<()> {
    if values.len() != grads.len() {
        return Err(Error::DimensionMismatch(format!(
            "parameter/gradient length mismatch: {} vs {}",
            values.len(),
            grads.len()
        )));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient".into()));
    }
    for (v, &g) in values.iter_mut().zip(grads.iter()) {
        *v -= lr * (g + 2.0 * lambda * *v);
    }
    Ok(())
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Apply the accumulated gradients to every parameter touched since the
/// last step, then clear gradients and touched marks. Errors out (leaving
/// parameters unchanged) if any touched gradient is non-finite.
pub fn apply_step(model: &mut ModelState, lr: f64, lambda: f64) -> Result<()> {
    // validation pass
    let mut bad: Option<String> = None;
    model.visit_touched(&mut |p| {
        if bad.is_none() && p.grad.iter().any(|g| !g.is_finite()) {
            bad = Some(p.name.clone());
        }
    });
    if let Some(name) = bad {
        return Err(Error::NonFinite(format!("gradient of {name}")));
    }

    match model.optimizer() {
        OptimizerKind::Sgd => {
            model.visit_touched(&mut |p| {
                for (v, &g) in p.value.iter_mut().zip(p.grad.iter()) {
                    *v -= lr * (g + 2.0 * lambda * *v);
                }
            });
        }
        OptimizerKind::Adam => {
            let t = model.adam_tick();
            let bias1 = 1.0 - ADAM_BETA1.powi(t as i32);
            let bias2 = 1.0 - ADAM_BETA2.powi(t as i32);
            let mut updates: Vec<(String, Vec<f64>)> = Vec::new();
            model.visit_touched(&mut |p| {
                updates.push((p.name.clone(), p.grad.to_vec()));
            });
            // moment buffers live outside the visited slices, so update them
            // first and then write the step back through a second visit
            let mut steps: std::collections::HashMap<String, Vec<f64>> = std::collections::HashMap::new();
            for (name, grad) in updates {
                let adjusted: Vec<f64> = {
                    let (m, v) = model.adam_buffers(&name, grad.len());
                    grad.iter()
                        .enumerate()
                        .map(|(i, &g)| {
                            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
                            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
                            let m_hat = m[i] / bias1;
                            let v_hat = v[i] / bias2;
                            m_hat / (v_hat.sqrt() + ADAM_EPS)
                        })
                        .collect()
                };
                steps.insert(name, adjusted);
            }
            model.visit_touched(&mut |p| {
                if let Some(step) = steps.get(&p.name) {
                    for (i, v) in p.value.iter_mut().enumerate() {
                        *v -= lr * (step[i] + 2.0 * lambda * *v);
                    }
                }
            });
        }
    }
    model.zero_grad();
    Ok(())
}

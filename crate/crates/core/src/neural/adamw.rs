//! AdamW with decoupled weight decay.
//!
//! ```text
//! p <- p * (1 - lr * wd)
//! m <- b1 * m + (1 - b1) * g
//! v <- b2 * v + (1 - b2) * g^2
//! p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
//! ```

use crate::error::{Error, Result};
use crate::real::Real;

/// Learning rate and weight decay applied to one parameter tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamGroup {
    pub lr: f64,
    pub weight_decay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState<T = f32> {
    pub first_moment: Vec<Vec<T>>,
    pub second_moment: Vec<Vec<T>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<T: Real> AdamWState<T> {
    pub fn new(shapes: &[usize]) -> Self {
        AdamWState {
            first_moment: shapes.iter().map(|n| vec![T::zero(); *n]).collect(),
            second_moment: shapes.iter().map(|n| vec![T::zero(); *n]).collect(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn shapes(&self) -> Vec<usize> {
        self.first_moment.iter().map(Vec::len).collect()
    }
}

/// One optimizer step over a list of tensors. `groups[k]` configures tensor `k`.
pub fn adamw_step<T: Real>(
    params: &mut [&mut [T]],
    grads: &[&[T]],
    state: &mut AdamWState<T>,
    groups: &[ParamGroup],
) -> Result<()> {
    let n = params.len();
    if grads.len() != n || groups.len() != n || state.first_moment.len() != n {
        return Err(Error::Argument(format!(
            "optimizer tensor count mismatch: {n} params, {} grads, {} groups, {} moments",
            grads.len(),
            groups.len(),
            state.first_moment.len()
        )));
    }
    for k in 0..n {
        let len = params[k].len();
        if grads[k].len() != len || state.first_moment[k].len() != len || state.second_moment[k].len() != len {
            return Err(Error::Argument(format!("optimizer shape mismatch in tensor {k}")));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2) = (T::lit(state.beta1), T::lit(state.beta2));
    let (ob1, ob2) = (T::lit(1.0 - state.beta1), T::lit(1.0 - state.beta2));
    let inv_bc1 = T::lit(1.0 / bc1);
    let inv_bc2 = T::lit(1.0 / bc2);
    let eps = T::lit(state.eps);

    for k in 0..n {
        let lr = T::lit(groups[k].lr);
        let decay = T::lit(1.0 - groups[k].lr * groups[k].weight_decay);
        let apply_decay = groups[k].weight_decay != 0.0;
        let (m, v) = (&mut state.first_moment[k], &mut state.second_moment[k]);
        for (((p, g), mi), vi) in params[k].iter_mut().zip(grads[k]).zip(m.iter_mut()).zip(v.iter_mut()) {
            if apply_decay {
                *p *= decay;
            }
            *mi = b1 * *mi + ob1 * *g;
            *vi = b2 * *vi + ob2 * *g * *g;
            let m_hat = *mi * inv_bc1;
            let v_hat = *vi * inv_bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

//! Adam with bias correction.

use crate::error::{Error, Result};

/// Something that exposes its trainable tensors as flat slices in a fixed order.
pub trait Parameterized {
    fn param_names(&self) -> &'static [&'static str];
    fn params(&self) -> Vec<&[f64]>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        AdamState {
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// Applies one Adam update to `params` in place.
///
/// Gradients are checked for finiteness before anything is written, so a
/// failed step leaves both the parameters and the optimizer state untouched.
pub fn adam_step<P: Parameterized + ?Sized>(
    params: &mut P,
    grads: &[&[f64]],
    state: &mut AdamState,
) -> Result<()> {
    let names = params.param_names();
    let shapes: Vec<usize> = params.params().iter().map(|p| p.len()).collect();
    if grads.len() != shapes.len() {
        return Err(Error::dim("adam_step tensors", shapes.len(), grads.len()));
    }
    for ((g, &len), name) in grads.iter().zip(&shapes).zip(names) {
        if g.len() != len {
            return Err(Error::dim("adam_step gradient", len, g.len()));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of {name}")));
        }
    }
    if state.m.is_empty() {
        state.m = shapes.iter().map(|&n| vec![0.0; n]).collect();
        state.v = state.m.clone();
    } else if state.m.iter().map(Vec::len).ne(shapes.iter().copied()) {
        return Err(Error::State("adam moments do not match parameter shapes".into()));
    }

    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.lr, state.eps);
    for (((p, g), m), v) in params
        .params_mut()
        .into_iter()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

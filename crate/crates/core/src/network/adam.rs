use super::{Gradients, NetworkParams};
use crate::{Error, Result};

/// Bias-corrected Adam moments for every trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: Gradients,
    pub second: Gradients,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &NetworkParams) -> Self {
        Self::with_betas(params, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(params: &NetworkParams, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            first: Gradients::zeros_like(params),
            second: Gradients::zeros_like(params),
            step: 0,
            beta1,
            beta2,
            eps,
        }
    }
}

/// One Adam update of `params` in place.
///
/// Nothing is modified when a gradient is non-finite or shapes disagree.
pub fn adam_step(params: &mut NetworkParams, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    let g = grads.tensors();
    {
        let p = params.trainables();
        let m = state.first.tensors();
        if g.len() != p.len() || m.len() != p.len() {
            return Err(Error::invalid("gradient and parameter tensor counts differ"));
        }
        for ((name, pt), ((_, gt), (_, mt))) in p.iter().zip(g.iter().zip(&m)) {
            if pt.len() != gt.len() || pt.len() != mt.len() {
                return Err(Error::invalid(format!("shape mismatch for {name}")));
            }
        }
    }
    for (name, gt) in &g {
        if let Some(pos) = gt.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("non-finite gradient in {name} at index {pos}")));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let mut first = state.first.tensors_mut();
    let mut second = state.second.tensors_mut();
    for (((_, theta), (_, grad)), ((_, m), (_, v))) in params
        .trainables_mut()
        .into_iter()
        .zip(&g)
        .zip(first.iter_mut().zip(second.iter_mut()))
    {
        for k in 0..theta.len() {
            let gk = grad[k];
            m[k] = b1 * m[k] + (1.0 - b1) * gk;
            v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            theta[k] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    params.bump_generation();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init_network;

    fn filled(params: &NetworkParams, value: f64) -> Gradients {
        let mut g = Gradients::zeros_like(params);
        for (_, t) in g.tensors_mut() {
            t.fill(value);
        }
        g
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = init_network(16, 3, 0).unwrap();
        let before = p.clone();
        let mut state = AdamState::new(&p);
        let lr = 1e-3;
        let g = filled(&p, 0.37);
        adam_step(&mut p, &g, &mut state, lr).unwrap();
        for ((_, a), (_, b)) in p.trainables().iter().zip(before.trainables()) {
            for (x, y) in a.iter().zip(b) {
                assert!(((x - y) + lr).abs() < 1e-6 * lr.max(1.0));
            }
        }
        let mut q = before.clone();
        let mut state = AdamState::new(&q);
        let g = filled(&q, -2.0);
        adam_step(&mut q, &g, &mut state, lr).unwrap();
        assert!((q.output.bias[0] - before.output.bias[0] - lr).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = init_network(16, 3, 0).unwrap();
        let before = p.clone();
        let mut state = AdamState::new(&p);
        let g = Gradients::zeros_like(&p);
        adam_step(&mut p, &g, &mut state, 1e-3).unwrap();
        assert_eq!(p.trainables(), before.trainables());
        assert_eq!(state.step, 1);
    }

    #[test]
    fn deterministic_with_cloned_state() {
        let p0 = init_network(16, 3, 4).unwrap();
        let g = filled(&p0, 0.1);
        let s0 = AdamState::new(&p0);
        let (mut p1, mut s1) = (p0.clone(), s0.clone());
        let (mut p2, mut s2) = (p0.clone(), s0);
        adam_step(&mut p1, &g, &mut s1, 1e-2).unwrap();
        adam_step(&mut p2, &g, &mut s2, 1e-2).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn non_finite_gradient_named() {
        let mut p = init_network(16, 3, 0).unwrap();
        let before = p.clone();
        let mut g = Gradients::zeros_like(&p);
        g.hidden[1].gamma[2] = f64::NAN;
        let mut state = AdamState::new(&p);
        let err = adam_step(&mut p, &g, &mut state, 1e-3).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
        assert!(err.to_string().contains("hidden1.gamma"));
        assert_eq!(p, before);
        assert_eq!(state.step, 0);
    }
}

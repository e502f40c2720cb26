use super::Tensor;
use crate::error::{Error, Result};

/// Classic momentum SGD with L2 weight decay folded into the velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sgd {
    pub lr: f32,
    pub momentum: f32,
    pub weight_decay: f32,
}

impl Sgd {
    /// `v ← momentum·v + g + wd·θ;  θ ← θ − lr·v`
    pub fn step(&self, params: &mut [&mut Tensor], grads: &[&Tensor], state: &mut [&mut Tensor]) -> Result<()> {
        sgd_step(params, grads, self.lr, self.momentum, self.weight_decay, state)
    }
}

pub fn sgd_step(
    params: &mut [&mut Tensor],
    grads: &[&Tensor],
    lr: f32,
    momentum: f32,
    weight_decay: f32,
    state: &mut [&mut Tensor],
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.len() {
        return Err(Error::shape(
            "sgd_step",
            format!("{} params, {} grads, {} states", params.len(), grads.len(), state.len()),
        ));
    }
    for ((p, g), v) in params.iter().zip(grads).zip(state.iter()) {
        if p.shape() != g.shape() || p.shape() != v.shape() {
            return Err(Error::shape(
                "sgd_step",
                format!("param {:?}, grad {:?}, state {:?}", p.shape(), g.shape(), v.shape()),
            ));
        }
    }
    for ((p, g), v) in params.iter_mut().zip(grads).zip(state.iter_mut()) {
        for ((theta, &grad), vel) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
            *vel = momentum * *vel + grad + weight_decay * *theta;
            *theta -= lr * *vel;
        }
    }
    Ok(())
}

fn l2(t: &Tensor) -> f64 {
    t.data().iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
}

/// Layer-wise adaptive rate scaling on top of momentum SGD. Each weight tensor
/// gets the local rate `η‖θ‖ / (‖g‖ + wd‖θ‖)`; rank-1 tensors (biases) take a
/// plain momentum step without weight decay.
///
/// `v ← momentum·v + lr·local·(g + wd·θ);  θ ← θ − v`
pub fn lars_step(
    params: &mut [&mut Tensor],
    grads: &[&Tensor],
    lr: f32,
    momentum: f32,
    weight_decay: f32,
    trust: f32,
    state: &mut [&mut Tensor],
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.len() {
        return Err(Error::shape(
            "lars_step",
            format!("{} params, {} grads, {} states", params.len(), grads.len(), state.len()),
        ));
    }
    for ((p, g), v) in params.iter().zip(grads).zip(state.iter()) {
        if p.shape() != g.shape() || p.shape() != v.shape() {
            return Err(Error::shape(
                "lars_step",
                format!("param {:?}, grad {:?}, state {:?}", p.shape(), g.shape(), v.shape()),
            ));
        }
    }
    for ((p, g), v) in params.iter_mut().zip(grads).zip(state.iter_mut()) {
        let (scale, wd) = if p.shape().len() > 1 {
            let (wn, gn) = (l2(p), l2(g));
            let local = if wn > 0.0 && gn > 0.0 {
                trust as f64 * wn / (gn + weight_decay as f64 * wn)
            } else {
                1.0
            };
            ((lr as f64 * local) as f32, weight_decay)
        } else {
            (lr, 0.0)
        };
        for ((theta, &grad), vel) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
            *vel = momentum * *vel + scale * (grad + wd * *theta);
            *theta -= *vel;
        }
    }
    Ok(())
}

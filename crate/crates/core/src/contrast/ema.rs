use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// A model whose learnable tensors can be enumerated in a fixed order.
pub trait Parameters {
    fn param_names(&self) -> Vec<&'static str>;
    fn params(&self) -> Vec<&Tensor>;
    fn params_mut(&mut self) -> Vec<&mut Tensor>;
}

/// `θ^m ← m·θ^m + (1 − m)·θ`, elementwise.
pub fn ema_update(online: &[&Tensor], momentum: &mut [&mut Tensor], m: f32) -> Result<()> {
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::Config(format!("momentum coefficient {m} outside [0, 1]")));
    }
    if online.len() != momentum.len() {
        return Err(Error::shape("ema_update", format!("{} vs {} tensors", online.len(), momentum.len())));
    }
    for (o, t) in online.iter().zip(momentum.iter()) {
        if o.shape() != t.shape() {
            return Err(Error::shape("ema_update", format!("{:?} vs {:?}", o.shape(), t.shape())));
        }
    }
    for (o, t) in online.iter().zip(momentum.iter_mut()) {
        for (slow, &fast) in t.data_mut().iter_mut().zip(o.data()) {
            *slow = m * *slow + (1.0 - m) * fast;
        }
    }
    Ok(())
}

/// Online parameters θ, their slow copy θ^m and the coefficient m.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderPair<P> {
    pub online: P,
    pub momentum: P,
    pub m: f32,
}

impl<P: Parameters + Clone> EncoderPair<P> {
    pub fn new(online: P, m: f32) -> Self {
        Self {
            momentum: online.clone(),
            online,
            m,
        }
    }

    pub fn ema_update(&mut self) -> Result<()> {
        let online = self.online.params();
        ema_update(&online, &mut self.momentum.params_mut(), self.m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(m: f32, slow: f32, fast: f32) -> f32 {
        let o = Tensor::full(&[2], fast);
        let mut t = Tensor::full(&[2], slow);
        ema_update(&[&o], &mut [&mut t], m).unwrap();
        t.data()[0]
    }

    #[test]
    fn coefficient_edges() {
        assert_eq!(step(1.0, 0.3, 5.0), 0.3);
        assert_eq!(step(0.0, 0.3, 5.0), 5.0);
        assert!((step(0.99, 1.0, 0.0) - 0.99).abs() < 1e-7);
    }

    #[test]
    fn rejects_bad_coefficient() {
        let o = Tensor::zeros(&[1]);
        let mut t = Tensor::zeros(&[1]);
        assert!(ema_update(&[&o], &mut [&mut t], 1.5).is_err());
    }
}

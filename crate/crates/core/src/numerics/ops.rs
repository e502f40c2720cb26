use super::{OpGrad, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct ReluBackward {
    active: Vec<bool>,
    shape: Vec<usize>,
}

impl ReluBackward {
    pub fn backward(&self, grad_out: &Tensor) -> Result<Tensor> {
        if grad_out.shape() != self.shape.as_slice() {
            return Err(Error::shape(
                "relu backward",
                format!("grad {:?}, expected {:?}", grad_out.shape(), self.shape),
            ));
        }
        let data = grad_out
            .data()
            .iter()
            .zip(&self.active)
            .map(|(&g, &on)| if on { g } else { 0.0 })
            .collect();
        Tensor::new(self.shape.clone(), data)
    }
}

pub fn relu(input: &Tensor) -> OpGrad<ReluBackward> {
    let active: Vec<bool> = input.data().iter().map(|&v| v > 0.0).collect();
    OpGrad {
        output: relu_forward(input),
        backward: ReluBackward {
            active,
            shape: input.shape().to_vec(),
        },
    }
}

pub fn relu_forward(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResizeMode {
    Bilinear,
    Nearest,
}

/// Per output coordinate: two source indices and the weight of the second.
fn bilinear_taps(src: usize, dst: usize) -> Vec<(usize, usize, f32)> {
    let scale = src as f32 / dst as f32;
    (0..dst)
        .map(|i| {
            // align_corners = false: pixel centres at (i + 0.5) / n
            let pos = ((i as f32 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f32);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, pos - lo as f32)
        })
        .collect()
}

fn nearest_taps(src: usize, dst: usize) -> Vec<usize> {
    (0..dst)
        .map(|i| (((i as f64 + 0.5) * src as f64 / dst as f64).floor() as usize).min(src - 1))
        .collect()
}

/// Resizes every plane of an NCHW tensor to `out_h × out_w`.
pub fn resize(input: &Tensor, out_h: usize, out_w: usize, mode: ResizeMode) -> Result<Tensor> {
    let (n, c, h, w) = input.dims4()?;
    if out_h == 0 || out_w == 0 {
        return Err(Error::shape("resize", "output extents must be >= 1"));
    }
    let planes = n * c;
    let mut out = vec![0.0f32; planes * out_h * out_w];
    match mode {
        ResizeMode::Nearest => {
            let ty = nearest_taps(h, out_h);
            let tx = nearest_taps(w, out_w);
            for p in 0..planes {
                let src = &input.data()[p * h * w..(p + 1) * h * w];
                let dst = &mut out[p * out_h * out_w..(p + 1) * out_h * out_w];
                for (oy, &sy) in ty.iter().enumerate() {
                    for (ox, &sx) in tx.iter().enumerate() {
                        dst[oy * out_w + ox] = src[sy * w + sx];
                    }
                }
            }
        }
        ResizeMode::Bilinear => {
            let ty = bilinear_taps(h, out_h);
            let tx = bilinear_taps(w, out_w);
            for p in 0..planes {
                let src = &input.data()[p * h * w..(p + 1) * h * w];
                let dst = &mut out[p * out_h * out_w..(p + 1) * out_h * out_w];
                for (oy, &(y0, y1, fy)) in ty.iter().enumerate() {
                    for (ox, &(x0, x1, fx)) in tx.iter().enumerate() {
                        let top = src[y0 * w + x0] * (1.0 - fx) + src[y0 * w + x1] * fx;
                        let bottom = src[y1 * w + x0] * (1.0 - fx) + src[y1 * w + x1] * fx;
                        dst[oy * out_w + ox] = top * (1.0 - fy) + bottom * fy;
                    }
                }
            }
        }
    }
    Tensor::new(vec![n, c, out_h, out_w], out)
}

/// Adjoint of [`resize`]: maps a gradient at the output size back to `in_h × in_w`.
pub fn resize_backward(grad_out: &Tensor, in_h: usize, in_w: usize, mode: ResizeMode) -> Result<Tensor> {
    let (n, c, out_h, out_w) = grad_out.dims4()?;
    let planes = n * c;
    let mut grad = vec![0.0f32; planes * in_h * in_w];
    match mode {
        ResizeMode::Nearest => {
            let ty = nearest_taps(in_h, out_h);
            let tx = nearest_taps(in_w, out_w);
            for p in 0..planes {
                let src = &grad_out.data()[p * out_h * out_w..(p + 1) * out_h * out_w];
                let dst = &mut grad[p * in_h * in_w..(p + 1) * in_h * in_w];
                for (oy, &sy) in ty.iter().enumerate() {
                    for (ox, &sx) in tx.iter().enumerate() {
                        dst[sy * in_w + sx] += src[oy * out_w + ox];
                    }
                }
            }
        }
        ResizeMode::Bilinear => {
            let ty = bilinear_taps(in_h, out_h);
            let tx = bilinear_taps(in_w, out_w);
            for p in 0..planes {
                let src = &grad_out.data()[p * out_h * out_w..(p + 1) * out_h * out_w];
                let dst = &mut grad[p * in_h * in_w..(p + 1) * in_h * in_w];
                for (oy, &(y0, y1, fy)) in ty.iter().enumerate() {
                    for (ox, &(x0, x1, fx)) in tx.iter().enumerate() {
                        let g = src[oy * out_w + ox];
                        dst[y0 * in_w + x0] += g * (1.0 - fy) * (1.0 - fx);
                        dst[y0 * in_w + x1] += g * (1.0 - fy) * fx;
                        dst[y1 * in_w + x0] += g * fy * (1.0 - fx);
                        dst[y1 * in_w + x1] += g * fy * fx;
                    }
                }
            }
        }
    }
    Tensor::new(vec![n, c, in_h, in_w], grad)
}

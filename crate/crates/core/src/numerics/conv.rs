use super::gemm::{gemm, Layout};
use super::{OpGrad, Tensor};
use crate::error::{Error, Result};

/// Geometry of one convolution call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct ConvGeom {
    batch: usize,
    in_c: usize,
    in_h: usize,
    in_w: usize,
    out_c: usize,
    k: usize,
    stride: usize,
    pad: usize,
    out_h: usize,
    out_w: usize,
}

impl ConvGeom {
    fn rows(&self) -> usize {
        self.in_c * self.k * self.k
    }

    fn pixels(&self) -> usize {
        self.out_h * self.out_w
    }

    /// 1x1, stride 1, no padding: the column matrix is the input itself.
    fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1 && self.pad == 0
    }
}

fn geometry(input: &Tensor, weight: &Tensor, bias: &Tensor, stride: usize, pad: usize) -> Result<ConvGeom> {
    let (batch, in_c, in_h, in_w) = input.dims4()?;
    let (out_c, w_c, kh, kw) = weight.dims4()?;
    if kh != kw || kh % 2 == 0 {
        return Err(Error::shape("conv2d", format!("kernel must be square and odd, got {kh}x{kw}")));
    }
    if w_c != in_c {
        return Err(Error::shape(
            "conv2d",
            format!("weight expects {w_c} input channels, input has {in_c}"),
        ));
    }
    if bias.shape() != [out_c] {
        return Err(Error::shape(
            "conv2d",
            format!("bias shape {:?}, expected [{out_c}]", bias.shape()),
        ));
    }
    if stride == 0 {
        return Err(Error::shape("conv2d", "stride must be >= 1"));
    }
    let k = kh;
    if in_h + 2 * pad < k || in_w + 2 * pad < k {
        return Err(Error::shape(
            "conv2d",
            format!("input {in_h}x{in_w} with pad {pad} smaller than kernel {k}"),
        ));
    }
    Ok(ConvGeom {
        batch,
        in_c,
        in_h,
        in_w,
        out_c,
        k,
        stride,
        pad,
        out_h: (in_h + 2 * pad - k) / stride + 1,
        out_w: (in_w + 2 * pad - k) / stride + 1,
    })
}

/// Unfolds one image (C×H×W slice) into a (C·k·k)×(Ho·Wo) column matrix.
fn im2col(g: &ConvGeom, img: &[f32], cols: &mut [f32]) {
    let p = g.pixels();
    for c in 0..g.in_c {
        let plane = &img[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    let line = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                    if iy < 0 || iy >= g.in_h as isize {
                        line.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        *v = if ix < 0 || ix >= g.in_w as isize {
                            0.0
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of `im2col`: scatters-adds columns back onto an image slice.
fn col2im(g: &ConvGeom, cols: &[f32], img: &mut [f32]) {
    let p = g.pixels();
    for c in 0..g.in_c {
        let plane = &mut img[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.in_h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    for ox in 0..g.out_w {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.in_w as isize {
                            dst[ix as usize] += src[oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}

fn forward(g: &ConvGeom, input: &Tensor, weight: &Tensor, bias: &Tensor, keep_cols: bool) -> (Tensor, Vec<f32>) {
    let rows = g.rows();
    let p = g.pixels();
    let in_stride = g.in_c * g.in_h * g.in_w;
    let out_stride = g.out_c * p;
    let mut out = vec![0.0f32; g.batch * out_stride];
    let mut kept = Vec::new();
    let mut scratch = if g.is_pointwise() { Vec::new() } else { vec![0.0f32; rows * p] };
    for n in 0..g.batch {
        let img = &input.data()[n * in_stride..(n + 1) * in_stride];
        let cols: &[f32] = if g.is_pointwise() {
            img
        } else {
            im2col(g, img, &mut scratch);
            &scratch
        };
        let dst = &mut out[n * out_stride..(n + 1) * out_stride];
        for (o, line) in dst.chunks_exact_mut(p).enumerate() {
            line.fill(bias.data()[o]);
        }
        gemm(
            g.out_c,
            rows,
            p,
            weight.data(),
            Layout::row_major(rows),
            cols,
            Layout::row_major(p),
            1.0,
            dst,
        );
        if keep_cols && !g.is_pointwise() {
            kept.extend_from_slice(cols);
        }
    }
    let shape = vec![g.batch, g.out_c, g.out_h, g.out_w];
    (Tensor::new(shape, out).expect("conv output shape"), kept)
}

/// Saved state for the convolution backward pass.
#[derive(Clone, Debug)]
pub struct Conv2dBackward {
    geom: ConvGeom,
    weight: Tensor,
    /// Unfolded input columns per batch item; empty for pointwise convolutions.
    cols: Vec<f32>,
    /// Input kept only for pointwise convolutions, where it doubles as the column matrix.
    input: Option<Tensor>,
}

#[derive(Clone, Debug)]
pub struct Conv2dGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Conv2dBackward {
    pub fn backward(&self, grad_out: &Tensor) -> Result<Conv2dGrads> {
        let g = &self.geom;
        let expected = [g.batch, g.out_c, g.out_h, g.out_w];
        if grad_out.shape() != expected {
            return Err(Error::shape(
                "conv2d backward",
                format!("grad {:?}, expected {expected:?}", grad_out.shape()),
            ));
        }
        let rows = g.rows();
        let p = g.pixels();
        let in_stride = g.in_c * g.in_h * g.in_w;
        let out_stride = g.out_c * p;

        let mut d_weight = vec![0.0f32; g.out_c * rows];
        let mut d_bias = vec![0.0f32; g.out_c];
        let mut d_input = vec![0.0f32; g.batch * in_stride];
        let mut d_cols = if g.is_pointwise() { Vec::new() } else { vec![0.0f32; rows * p] };

        for n in 0..g.batch {
            let dout = &grad_out.data()[n * out_stride..(n + 1) * out_stride];
            let cols: &[f32] = match &self.input {
                Some(inp) => &inp.data()[n * in_stride..(n + 1) * in_stride],
                None => &self.cols[n * rows * p..(n + 1) * rows * p],
            };
            for (o, line) in dout.chunks_exact(p).enumerate() {
                d_bias[o] += line.iter().sum::<f32>();
            }
            // dW += dOut · colsᵀ
            gemm(
                g.out_c,
                p,
                rows,
                dout,
                Layout::row_major(p),
                cols,
                Layout::transposed(p),
                1.0,
                &mut d_weight,
            );
            // dCols = Wᵀ · dOut
            let d_img = &mut d_input[n * in_stride..(n + 1) * in_stride];
            if g.is_pointwise() {
                gemm(
                    rows,
                    g.out_c,
                    p,
                    self.weight.data(),
                    Layout::transposed(rows),
                    dout,
                    Layout::row_major(p),
                    0.0,
                    d_img,
                );
            } else {
                gemm(
                    rows,
                    g.out_c,
                    p,
                    self.weight.data(),
                    Layout::transposed(rows),
                    dout,
                    Layout::row_major(p),
                    0.0,
                    &mut d_cols,
                );
                col2im(g, &d_cols, d_img);
            }
        }

        Ok(Conv2dGrads {
            input: Tensor::new(vec![g.batch, g.in_c, g.in_h, g.in_w], d_input)?,
            weight: Tensor::new(self.weight.shape().to_vec(), d_weight)?,
            bias: Tensor::new(vec![g.out_c], d_bias)?,
        })
    }
}

/// 2-D convolution over an NCHW batch with an `O×C×k×k` kernel, keeping what backward needs.
pub fn conv2d(
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<OpGrad<Conv2dBackward>> {
    let geom = geometry(input, weight, bias, stride, pad)?;
    let (output, cols) = forward(&geom, input, weight, bias, true);
    Ok(OpGrad {
        output,
        backward: Conv2dBackward {
            geom,
            weight: weight.clone(),
            cols,
            input: geom.is_pointwise().then(|| input.clone()),
        },
    })
}

/// Forward-only convolution (no saved state).
pub fn conv2d_forward(input: &Tensor, weight: &Tensor, bias: &Tensor, stride: usize, pad: usize) -> Result<Tensor> {
    let geom = geometry(input, weight, bias, stride, pad)?;
    Ok(forward(&geom, input, weight, bias, false).0)
}

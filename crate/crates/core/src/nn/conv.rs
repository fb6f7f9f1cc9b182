use ndarray::{Array1, Array2, Ix1, Ix2};
use rand::Rng;

use super::param::{Param, ParamVisitor};

/// 1-d convolution over time-major input [T_in, C_in] -> [T_out, C_out],
/// implemented as an im2col GEMM.
#[derive(Debug, Clone)]
pub struct Conv1d {
    /// [out, in * kernel]
    pub w: Param,
    /// [out]
    pub b: Param,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

/// Cached im2col matrix for the backward pass.
pub struct Conv1dCache {
    pub x_col: Array2<f32>,
    pub t_in: usize,
}

impl Conv1d {
    pub fn new(
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = (in_channels * kernel) as f32;
        Conv1d {
            w: Param::randn(format!("{name}.w"), &[out_channels, in_channels * kernel], (1.0 / fan_in).sqrt(), rng),
            b: Param::zeros(format!("{name}.b"), &[out_channels]),
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
        }
    }

    pub fn output_len(&self, t_in: usize) -> usize {
        (t_in + 2 * self.padding - self.kernel) / self.stride + 1
    }

    fn im2col(&self, x: &Array2<f32>) -> Array2<f32> {
        let t_in = x.nrows();
        let t_out = self.output_len(t_in);
        let mut col = Array2::zeros((t_out, self.in_channels * self.kernel));
        for t in 0..t_out {
            for k in 0..self.kernel {
                let src = (t * self.stride + k) as isize - self.padding as isize;
                if src < 0 || src as usize >= t_in {
                    continue;
                }
                for c in 0..self.in_channels {
                    col[[t, c * self.kernel + k]] = x[[src as usize, c]];
                }
            }
        }
        col
    }

    pub fn forward(&self, x: &Array2<f32>) -> (Array2<f32>, Conv1dCache) {
        assert_eq!(x.ncols(), self.in_channels, "conv input channel mismatch");
        let x_col = self.im2col(x);
        let w = self.w.data.view().into_dimensionality::<Ix2>().unwrap();
        let b = self.b.data.view().into_dimensionality::<Ix1>().unwrap();
        let mut y = x_col.dot(&w.t());
        super::ops::add_row_inplace(&mut y, &b.to_owned());
        (y, Conv1dCache { x_col, t_in: x.nrows() })
    }

    pub fn backward(&mut self, cache: &Conv1dCache, grad_out: &Array2<f32>) -> Array2<f32> {
        let w = self.w.data.view().into_dimensionality::<Ix2>().unwrap();
        if self.w.trainable {
            let gw = grad_out.t().dot(&cache.x_col);
            let mut dst = self.w.grad.view_mut().into_dimensionality::<Ix2>().unwrap();
            dst += &gw;
        }
        if self.b.trainable {
            let gb: Array1<f32> = grad_out.sum_axis(ndarray::Axis(0));
            let mut dst = self.b.grad.view_mut().into_dimensionality::<Ix1>().unwrap();
            dst += &gb;
        }
        // scatter dL/dx_col back onto the input timeline
        let grad_col = grad_out.dot(&w);
        let mut grad_x = Array2::zeros((cache.t_in, self.in_channels));
        let t_out = grad_out.nrows();
        for t in 0..t_out {
            for k in 0..self.kernel {
                let src = (t * self.stride + k) as isize - self.padding as isize;
                if src < 0 || src as usize >= cache.t_in {
                    continue;
                }
                for c in 0..self.in_channels {
                    grad_x[[src as usize, c]] += grad_col[[t, c * self.kernel + k]];
                }
            }
        }
        grad_x
    }
}

impl ParamVisitor for Conv1d {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.w);
        f(&mut self.b);
    }
}

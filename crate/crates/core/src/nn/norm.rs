use ndarray::{Array1, Array2, Ix1};

use super::param::{Param, ParamVisitor};

const EPS: f32 = 1e-5;

/// Layer normalization over the last dimension of [T, d].
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: Param,
    pub beta: Param,
}

pub struct LayerNormCache {
    normalized: Array2<f32>,
    inv_std: Array1<f32>,
}

impl LayerNorm {
    pub fn new(name: &str, dim: usize) -> Self {
        let mut gamma = Param::zeros(format!("{name}.gamma"), &[dim]);
        gamma.data.fill(1.0);
        LayerNorm {
            gamma,
            beta: Param::zeros(format!("{name}.beta"), &[dim]),
        }
    }

    pub fn forward(&self, x: &Array2<f32>) -> (Array2<f32>, LayerNormCache) {
        let d = x.ncols() as f32;
        let gamma = self.gamma.data.view().into_dimensionality::<Ix1>().unwrap();
        let beta = self.beta.data.view().into_dimensionality::<Ix1>().unwrap();
        let mut normalized = x.clone();
        let mut inv_std = Array1::zeros(x.nrows());
        for (mut row, inv) in normalized.rows_mut().into_iter().zip(inv_std.iter_mut()) {
            let mean = row.sum() / d;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / d;
            *inv = 1.0 / (var + EPS).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mean) * *inv;
            }
        }
        let mut y = normalized.clone();
        for mut row in y.rows_mut() {
            for ((v, &g), &b) in row.iter_mut().zip(gamma.iter()).zip(beta.iter()) {
                *v = *v * g + b;
            }
        }
        (y, LayerNormCache { normalized, inv_std })
    }

    pub fn backward(&mut self, cache: &LayerNormCache, grad_out: &Array2<f32>) -> Array2<f32> {
        let d = grad_out.ncols() as f32;
        let gamma = self.gamma.data.view().into_dimensionality::<Ix1>().unwrap();
        if self.gamma.trainable {
            let gg: Array1<f32> = (grad_out * &cache.normalized).sum_axis(ndarray::Axis(0));
            let mut dst = self.gamma.grad.view_mut().into_dimensionality::<Ix1>().unwrap();
            dst += &gg;
        }
        if self.beta.trainable {
            let gb: Array1<f32> = grad_out.sum_axis(ndarray::Axis(0));
            let mut dst = self.beta.grad.view_mut().into_dimensionality::<Ix1>().unwrap();
            dst += &gb;
        }
        let mut grad_x = Array2::zeros(grad_out.dim());
        for ((g_row, n_row), (mut out_row, &inv)) in grad_out
            .rows()
            .into_iter()
            .zip(cache.normalized.rows())
            .zip(grad_x.rows_mut().into_iter().zip(cache.inv_std.iter()))
        {
            // dL/dn with gamma folded in
            let dn: Vec<f32> = g_row.iter().zip(gamma.iter()).map(|(g, gm)| g * gm).collect();
            let sum_dn: f32 = dn.iter().sum();
            let sum_dn_n: f32 = dn.iter().zip(n_row.iter()).map(|(a, b)| a * b).sum();
            for ((o, &dni), &ni) in out_row.iter_mut().zip(dn.iter()).zip(n_row.iter()) {
                *o = inv * (dni - sum_dn / d - ni * sum_dn_n / d);
            }
        }
        grad_x
    }
}

impl ParamVisitor for LayerNorm {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }
}

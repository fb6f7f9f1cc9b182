use ndarray::{Array1, Array2, Ix1, Ix2};
use rand::Rng;

use super::param::{Param, ParamVisitor};

/// Low-rank additive adapter: dW = scale * b_up . a_down, with a per-rank
/// keep mask used by the adaptive rank-budget schedule.
#[derive(Debug, Clone)]
pub struct LoraAdapter {
    /// [rank, in]
    pub down: Param,
    /// [out, rank]
    pub up: Param,
    pub scale: f32,
    /// 1.0 for active rank components, 0.0 for pruned ones.
    pub rank_keep: Vec<f32>,
}

impl LoraAdapter {
    pub fn new(name: &str, in_dim: usize, out_dim: usize, rank: usize, rng: &mut impl Rng) -> Self {
        // standard init: down random, up zero, so the adapter starts as a no-op
        let down = Param::randn(format!("{name}.lora_down"), &[rank, in_dim], 0.02, rng);
        let up = Param::zeros(format!("{name}.lora_up"), &[out_dim, rank]);
        LoraAdapter {
            down,
            up,
            scale: 1.0,
            rank_keep: vec![1.0; rank],
        }
    }

    pub fn rank(&self) -> usize {
        self.rank_keep.len()
    }

    /// Importance score per rank component: |up_col| * |down_row|.
    pub fn rank_importance(&self) -> Vec<f32> {
        let down = self.down.data.view().into_dimensionality::<Ix2>().unwrap();
        let up = self.up.data.view().into_dimensionality::<Ix2>().unwrap();
        (0..self.rank())
            .map(|r| {
                let dn = down.row(r).iter().map(|v| v * v).sum::<f32>().sqrt();
                let un = up.column(r).iter().map(|v| v * v).sum::<f32>().sqrt();
                dn * un * self.rank_keep[r]
            })
            .collect()
    }
}

/// Dense layer y = x W^T + b, optionally with a low-rank adapter on W.
#[derive(Debug, Clone)]
pub struct Linear {
    /// [out, in]
    pub w: Param,
    /// [out]
    pub b: Param,
    pub lora: Option<LoraAdapter>,
}

impl Linear {
    pub fn new(name: &str, in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let std = (1.0 / in_dim as f32).sqrt();
        Linear {
            w: Param::randn(format!("{name}.w"), &[out_dim, in_dim], std, rng),
            b: Param::zeros(format!("{name}.b"), &[out_dim]),
            lora: None,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.data.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.w.data.shape()[0]
    }

    pub fn attach_lora(&mut self, rank: usize, rng: &mut impl Rng) {
        let name = self.w.name.trim_end_matches(".w").to_string();
        self.lora = Some(LoraAdapter::new(&name, self.in_dim(), self.out_dim(), rank, rng));
    }

    /// x: [T, in] -> [T, out]
    pub fn forward(&self, x: &Array2<f32>) -> Array2<f32> {
        let w = self.w.data.view().into_dimensionality::<Ix2>().unwrap();
        let b = self.b.data.view().into_dimensionality::<Ix1>().unwrap();
        let mut y = x.dot(&w.t());
        super::ops::add_row_inplace(&mut y, &b.to_owned());
        if let Some(lora) = &self.lora {
            let down = lora.down.data.view().into_dimensionality::<Ix2>().unwrap();
            let up = lora.up.data.view().into_dimensionality::<Ix2>().unwrap();
            let mut h = x.dot(&down.t()); // [T, rank]
            for (mut col, &keep) in h.columns_mut().into_iter().zip(&lora.rank_keep) {
                col.mapv_inplace(|v| v * keep);
            }
            y += &(h.dot(&up.t()) * lora.scale);
        }
        y
    }

    /// Accumulates parameter gradients and returns dL/dx.
    pub fn backward(&mut self, x: &Array2<f32>, grad_out: &Array2<f32>) -> Array2<f32> {
        let w = self.w.data.view().into_dimensionality::<Ix2>().unwrap();
        let mut grad_x = grad_out.dot(&w);
        if self.w.trainable {
            let gw = grad_out.t().dot(x);
            let mut dst = self.w.grad.view_mut().into_dimensionality::<Ix2>().unwrap();
            dst += &gw;
        }
        if self.b.trainable {
            let gb: Array1<f32> = grad_out.sum_axis(ndarray::Axis(0));
            let mut dst = self.b.grad.view_mut().into_dimensionality::<Ix1>().unwrap();
            dst += &gb;
        }
        if let Some(lora) = &mut self.lora {
            let down = lora.down.data.view().into_dimensionality::<Ix2>().unwrap();
            let up = lora.up.data.view().into_dimensionality::<Ix2>().unwrap();
            let keep = &lora.rank_keep;
            // forward pieces: h = x down^T (masked), y += scale * h up^T
            let mut h = x.dot(&down.t());
            for (mut col, &k) in h.columns_mut().into_iter().zip(keep) {
                col.mapv_inplace(|v| v * k);
            }
            // grad wrt h (including mask and scale)
            let mut grad_h = grad_out.dot(&up) * lora.scale;
            for (mut col, &k) in grad_h.columns_mut().into_iter().zip(keep) {
                col.mapv_inplace(|v| v * k);
            }
            if lora.up.trainable {
                let gu = (grad_out.t().dot(&h)) * lora.scale;
                let mut dst = lora.up.grad.view_mut().into_dimensionality::<Ix2>().unwrap();
                dst += &gu;
            }
            if lora.down.trainable {
                let gd = grad_h.t().dot(x);
                let mut dst = lora.down.grad.view_mut().into_dimensionality::<Ix2>().unwrap();
                dst += &gd;
            }
            grad_x += &grad_h.dot(&down);
        }
        grad_x
    }
}

impl ParamVisitor for Linear {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.w);
        f(&mut self.b);
        if let Some(lora) = &mut self.lora {
            f(&mut lora.down);
            f(&mut lora.up);
        }
    }
}

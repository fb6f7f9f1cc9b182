use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{gelu, gelu_backward, Conv1d, Conv1dCache, Param, ParamVisitor};
use crate::{Error, Result};

/// Two-convolution channel adapter replacing the backbone's audio input
/// embedding: kernel 3 throughout, strides 1 then 2, padding 1 each, with
/// a smooth nonlinearity between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontendConfig {
    pub in_channels: usize,
    pub d_model: usize,
}

impl FrontendConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 {
            return Err(Error::config("frontend in_channels must be >= 1"));
        }
        if self.d_model == 0 {
            return Err(Error::config("frontend d_model must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Frontend {
    pub conv1: Conv1d,
    pub conv2: Conv1d,
}

pub struct FrontendCache {
    c1: Conv1dCache,
    /// pre-nonlinearity activations of the first convolution
    h1: Array2<f32>,
    c2: Conv1dCache,
}

pub fn build_frontend(cfg: FrontendConfig, rng: &mut impl Rng) -> Result<Frontend> {
    cfg.validate()?;
    Ok(Frontend {
        conv1: Conv1d::new("frontend.conv1", cfg.in_channels, cfg.d_model, 3, 1, 1, rng),
        conv2: Conv1d::new("frontend.conv2", cfg.d_model, cfg.d_model, 3, 2, 1, rng),
    })
}

impl Frontend {
    pub fn in_channels(&self) -> usize {
        self.conv1.in_channels
    }

    pub fn d_model(&self) -> usize {
        self.conv2.out_channels
    }

    /// ceil(T/2) for every T >= 1.
    pub fn output_frames(&self, t_samples: usize) -> usize {
        self.conv2.output_len(self.conv1.output_len(t_samples))
    }

    /// [T, in_channels] -> [ceil(T/2), d_model]
    pub fn forward(&self, x: &Array2<f32>) -> (Array2<f32>, FrontendCache) {
        let (h1, c1) = self.conv1.forward(x);
        let g = gelu(&h1);
        let (y, c2) = self.conv2.forward(&g);
        (y, FrontendCache { c1, h1, c2 })
    }

    pub fn backward(&mut self, cache: &FrontendCache, grad_out: &Array2<f32>) -> Array2<f32> {
        let grad_g = self.conv2.backward(&cache.c2, grad_out);
        let grad_h1 = gelu_backward(&cache.h1, &grad_g);
        self.conv1.backward(&cache.c1, &grad_h1)
    }
}

impl ParamVisitor for Frontend {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.conv1.visit_params(f);
        self.conv2.visit_params(f);
    }
}

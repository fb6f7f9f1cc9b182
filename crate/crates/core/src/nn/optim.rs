use std::collections::HashMap;

use ndarray::ArrayD;

use super::param::Param;

/// Adam with decoupled weight decay and a linear learning-rate warmup.
/// Optimizer state is keyed by parameter name, so the visit order of the
/// model does not matter as long as names are unique.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    pub weight_decay: f32,
    pub warmup_steps: usize,
    step: usize,
    state: HashMap<String, Moments>,
}

#[derive(Debug, Clone)]
struct Moments {
    m: ArrayD<f32>,
    v: ArrayD<f32>,
}

impl AdamW {
    pub fn new(lr: f32, weight_decay: f32, warmup_steps: usize) -> Self {
        AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            warmup_steps,
            step: 0,
            state: HashMap::new(),
        }
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// Effective learning rate after warmup scaling for the upcoming step.
    pub fn current_lr(&self) -> f32 {
        let next = self.step + 1;
        if self.warmup_steps > 0 && next <= self.warmup_steps {
            self.lr * next as f32 / self.warmup_steps as f32
        } else {
            self.lr
        }
    }

    /// Call once per optimizer step before updating any parameter.
    pub fn begin_step(&mut self) {
        self.step += 1;
    }

    /// Apply one Adam update to a trainable parameter using its accumulated
    /// gradient. No-op for frozen parameters.
    pub fn update(&mut self, p: &mut Param) {
        if !p.trainable {
            return;
        }
        let t = self.step.max(1) as i32;
        let lr = if self.warmup_steps > 0 && (t as usize) <= self.warmup_steps {
            self.lr * t as f32 / self.warmup_steps as f32
        } else {
            self.lr
        };
        let moments = self.state.entry(p.name.clone()).or_insert_with(|| Moments {
            m: ArrayD::zeros(p.data.raw_dim()),
            v: ArrayD::zeros(p.data.raw_dim()),
        });
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (((x, &g), m), v) in p
            .data
            .iter_mut()
            .zip(p.grad.iter())
            .zip(moments.m.iter_mut())
            .zip(moments.v.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            // decoupled decay: applied to the weight, not the gradient
            *x -= lr * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * *x);
        }
    }
}

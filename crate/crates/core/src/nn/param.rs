use ndarray::{ArrayD, IxDyn};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// A named tensor with its gradient accumulator and trainability flag.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub data: ArrayD<f32>,
    pub grad: ArrayD<f32>,
    pub trainable: bool,
}

impl Param {
    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Param {
        let data = ArrayD::zeros(IxDyn(shape));
        let grad = data.clone();
        Param {
            name: name.into(),
            data,
            grad,
            trainable: false,
        }
    }

    /// Gaussian init with the given standard deviation.
    pub fn randn(name: impl Into<String>, shape: &[usize], std: f32, rng: &mut impl Rng) -> Param {
        let normal = Normal::new(0.0f32, std).expect("std must be finite");
        let mut p = Param::zeros(name, shape);
        for v in p.data.iter_mut() {
            *v = normal.sample(rng);
        }
        p
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Depth-first parameter enumeration in a fixed, stable order.
pub trait ParamVisitor {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param));
}

//! Minimal neural-network stack with hand-written backpropagation on
//! ndarray: linear (+ low-rank adapters), 1-d convolution, layer norm,
//! multi-head attention, GELU, embeddings, and a decoupled-weight-decay
//! Adam optimizer. f32 throughout.

mod attention;
mod conv;
mod linear;
mod norm;
mod ops;
mod optim;
mod param;

pub use attention::{AttnCache, MultiHeadAttention};
pub use conv::{Conv1d, Conv1dCache};
pub use linear::{Linear, LoraAdapter};
pub use norm::{LayerNorm, LayerNormCache};
pub use ops::{
    cross_entropy_grad, gelu, gelu_backward, log_softmax_rows, sinusoid_positions, softmax_rows,
};
pub use optim::AdamW;
pub use param::{Param, ParamVisitor};

#[cfg(test)]
mod gradcheck;

//! Dependency-free learning core: a small rectifier MLP regressing action
//! values, RMSProp with global-norm clipping, and a FIFO replay memory.

mod mlp;
mod optim;
mod replay;

pub use mlp::{loss, loss_and_gradient, Mlp, Snapshot};
pub use optim::{clip_gradient, l2_norm, RmsProp};
pub use replay::{ReplayMemory, Transition};

//! The learned allocator.
//!
//! A fully convolutional network maps the six-channel encoding of an
//! `n x m` valuation matrix to an `n x m` matrix of logits; a low-temperature
//! softmax over agents turns each item's column into a near one-hot share
//! vector. Everything, including backpropagation, is implemented here on
//! plain `Vec` buffers.

pub mod bag;
pub mod encode;
pub mod io;
pub mod layers;
pub mod loss;
pub mod network;
pub mod train;

pub use bag::{bag_predict, bag_train, load_bag, save_bag, BagManifest, BaggedModel, DEFAULT_LAMBDAS};
pub use encode::{encode, InputTensor};
pub use io::{load_model, save_model};
pub use loss::{loss, loss_and_gradient, Sample};
pub use network::{discretize, AdamConfig, ArchConfig, NetworkParams};
pub use train::{train, train_with_progress, xavier_init, TrainConfig};

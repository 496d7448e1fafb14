//! Synthetic proxy task used to score candidates: dataset generation, training
//! and evaluation.

mod dataset;
mod train;

pub use dataset::{generate_dataset, ClipSet, DatasetConfig, ProxyDataset, MAGIC};
pub use train::{accuracy_of, evaluate, lr_schedule, train, Accuracy, Sgd, TrainReport, TrainerConfig};

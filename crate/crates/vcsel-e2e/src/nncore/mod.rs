//! Feed-forward networks with exact reverse-mode gradients, Adam/SGD
//! training, magnitude pruning and JSON serialisation.

mod io;
mod network;
mod prune;
mod train;

pub use io::{from_json, to_json, FORMAT, VERSION};
pub use network::{argmax, batch_loss, gradients, one_hot, Activation, Dense, Gradients, Loss, Network, Trace};
pub use prune::{prune_step, prune_to, PruneSchedule};
pub use train::{moving_average, train, train_with, DataSource, Dataset, Optimizer, OptimizerKind, TrainConfig};

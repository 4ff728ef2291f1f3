//! Relevance scoring over encoded query/document pairs, the pairwise hinge
//! objective and its Adam training loop.

mod adam;
mod io;
mod model;
mod scorer;
mod train;

pub use adam::Adam;
pub use io::{load_model, save_model, ModelMetadata, MODEL_VERSION};
pub use model::{hinge, DocFeatures, EncodedDoc, Gradients, Mode, ModelSpec, RankModel};
pub use scorer::{Dense, ScorerGrads, ScorerParams};
pub use train::{dev_ndcg, train, DevQuery, EpochRecord, TrainConfig, TrainLog};

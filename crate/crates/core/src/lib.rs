//! Sentence embeddings from recurrent encoders trained on click-through data.
pub mod analysis;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod grad;
pub mod model;
pub mod objective;
pub mod optim;
pub mod trainer;
pub mod texthash;

pub use error::{Error, Result};

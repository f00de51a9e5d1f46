pub mod error;
pub mod evaluate;
pub mod explain;
pub mod learners;
pub mod pipeline;
pub mod plot;
pub mod preprocess;
pub mod resample;
pub mod select;
pub mod stages;
pub mod synthgen;
pub mod tabular;
pub mod tune;

pub use error::{Error, Result};

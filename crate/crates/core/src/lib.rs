//! Transfer-task evaluation of sentence encoders: encode task sentences,
//! train small heads under fixed protocols, report standard metrics.

pub mod classifiers;
pub mod encoders;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod numerics;
pub mod protocols;
pub mod report;
pub mod runner;
pub mod tasks;

pub use error::{Error, Result};

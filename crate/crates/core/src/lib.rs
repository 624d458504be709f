//! Speech-based depressive-mood screening pipeline: segmentation, acoustic
//! and linguistic feature extraction, rank-based feature selection,
//! speaker-independent model selection and speaker-level evaluation.

pub mod acoustic;
pub mod audio;
pub mod corpus;
pub mod error;
pub mod evalreport;
pub mod features;
pub mod ingest;
pub mod matrix;
pub mod modeling;
pub mod pipeline;
pub mod stats;
pub mod textfeat;

pub use error::{Error, Result};

//! Character-level sequence labeling for Chinese NER.
//!
//! A CNN-BiLSTM-CRF tagger, optionally trained jointly with a word
//! segmentation CRF over the shared convolutional features, plus generation of
//! pseudo labeled sentences by same-type entity replacement. The numeric core
//! is a small reverse-mode tape with finite-difference checking.

#![allow(clippy::needless_range_loop)]

pub mod augment;
pub mod corpus;
pub mod crf;
pub mod error;
pub mod eval;
pub mod layers;
pub mod numcore;
pub mod synthetic;
pub mod tagset;
pub mod trainer;

pub use augment::{extract_inventory, generate_pseudo, merge, EntityInventory, PseudoSample};
pub use corpus::{Dataset, LabeledSentence, Provenance, Sample, Sentence, Vocabulary};
pub use crf::CrfHead;
pub use error::{Error, Result};
pub use eval::EvalReport;
pub use tagset::{CwsLabel, EntityMention, NerAlphabet, NerLabel};
pub use trainer::{fit, Model, TrainState, TrainingConfig};

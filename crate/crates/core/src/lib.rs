//! Multitask detector for tweets submitted to blackmarket engagement
//! services.
//!
//! A character-level bidirectional GRU encoder and a twelve-feature content
//! extractor feed two fully connected branches that are coupled by
//! cross-stitch units. Branch A classifies a tweet as blackmarket or genuine;
//! branch B regresses its five-day retweet and like counts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod data;
pub mod encoder;
pub mod error;
pub mod experiment;
pub mod features;
pub mod layers;
pub mod model;
pub mod optim;
mod par;
pub mod record;
pub mod stitch;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use tensor::{Matrix, SeededRng};

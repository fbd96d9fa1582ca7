//! Core algorithms for inductive knowledge-graph link prediction.
//!
//! This crate is the computational half of the toolkit: triple data model,
//! relation-relation network construction, biased random-walk relation
//! embeddings, text feature assembly, TransE/ComplEx scorers with analytic
//! gradients, the negative-sampling training loop, filtered ranking
//! evaluation, and the relation-disjoint dataset pipeline.
//!
//! It is `no_std`-compatible (requires `alloc`); all file formats, JSON
//! config, parallel drivers, and the CLI live in the companion `kglp` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod datasetgen;
pub mod evaluator;
pub mod features;
pub mod gradcheck;
pub mod kg;
mod math;
pub mod model;
pub mod relwalk;
pub mod rng;
pub mod trainer;
pub mod weidner;

//! QoR prediction from HLS synthesis reports and fmax search on timing landscapes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dataset;
pub mod ensemble;
pub mod evaluation;
pub mod learners;
pub mod linalg;
pub mod manifest;
pub mod reduction;
pub mod report;
pub mod rng;
pub mod synth;
pub mod timing;

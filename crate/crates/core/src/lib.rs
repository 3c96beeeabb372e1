//! Weight-sequence analysis for the Stieltjes and origin moment problems:
//! growth conditions, growth indices, injectivity/surjectivity verdicts and
//! numerical checks of the transform identities behind them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod indices;
pub mod jet;
pub mod logmath;
pub mod moments;
pub mod conditions;
pub mod quadrature;
pub mod report;
pub mod sequence;
pub mod special;
pub mod taylor;
pub mod verdicts;
pub mod verify;

pub use error::{Error, Result};
pub use exec::Exec;
pub use sequence::{
    dc_minorant, derive, example38_log_m, BigIndex, DeriveOp, Metadata, Property, SequenceSpec,
    TailRule, WeightSequence,
};

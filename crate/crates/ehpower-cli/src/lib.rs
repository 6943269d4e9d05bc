//! Library half of the `ehpower` experiment runner: model/policy selectors,
//! report encodings and the sweep engine. The binary in `main.rs` is a thin
//! argument parser over these pieces.

pub mod family;
pub mod report;
pub mod sweep;

//! The chapters of the guide in `book/`, compiled as doc-tests so every
//! snippet keeps working.

#[doc = include_str!("../../../book/src/overview.md")]
pub mod overview {}

#[doc = include_str!("../../../book/src/topology.md")]
pub mod topology {}

#[doc = include_str!("../../../book/src/simnet.md")]
pub mod simnet {}

#[doc = include_str!("../../../book/src/runtime.md")]
pub mod runtime {}

#[doc = include_str!("../../../book/src/checkpoint.md")]
pub mod checkpoint {}

#[doc = include_str!("../../../book/src/failure.md")]
pub mod failure {}

#[doc = include_str!("../../../book/src/bench.md")]
pub mod bench {}

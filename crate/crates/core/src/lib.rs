#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod dvc;
pub mod error;
mod kv;
pub mod materials;
pub mod mesh;
pub mod phantom;
pub mod pipeline;
pub mod report;
pub mod solver;
pub mod tensor;
pub mod validate;
pub mod volume;

pub use error::{HfeError, Result};
pub use tensor::{principal_strains, SymTensor};

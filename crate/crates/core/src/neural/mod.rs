//! MPP estimators: two small feedforward networks mapping irradiance and cell
//! temperature to the MPP voltage and current, trained by
//! Levenberg-Marquardt on oracle-labeled grid data.

mod dataset;
mod lm;
mod mlp;

pub use dataset::*;
pub use lm::*;
pub use mlp::*;

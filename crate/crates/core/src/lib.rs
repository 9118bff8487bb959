// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eval;
pub mod geo;
pub mod graph;
pub mod net;
pub mod pedestrianfer;
pub mod raster;
pub mod refine;
pub mod registry;
pub mod schema;
pub mod synthetic;

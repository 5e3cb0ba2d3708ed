pub mod bench;
pub mod builtin;
pub mod cache;
pub mod canon;
pub mod env;
pub mod eval;
pub mod model;
pub mod path;
pub mod reward;
pub mod rng;
pub mod schema;
pub mod service;
pub mod synth;
pub mod template;

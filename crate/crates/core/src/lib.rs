pub mod classical;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod histogram;
pub mod linalg;
pub mod nems;
pub mod observables;
pub mod operators;
pub mod oracle;
pub mod qsd;
pub mod run;

pub use error::{Error, Result};

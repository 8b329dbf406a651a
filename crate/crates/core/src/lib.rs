pub mod charts;
pub mod closed_set;
pub mod concavity;
pub mod config;
pub mod cutlocus;
pub mod error;
pub mod export;
pub mod field;
pub mod flow;
pub mod mesh;
pub mod par;
pub mod reach;
pub mod run;
pub mod scenario;
pub mod surface;
pub mod verify;

pub use error::{Error, Result};

pub mod ac_basis;
pub mod bs_lab;
pub mod cli;
pub mod asymptotics;
pub mod error;
pub mod field_model;
pub mod numerics;
pub mod validator;

pub use error::{Error, Result};

pub mod actions;
pub mod constants;
pub mod cosine;
pub mod error;
pub mod inversion;
pub mod io;
pub mod morse;
pub mod poly;
pub mod potential;
pub mod quadrature;
pub mod report;
pub mod singular;
pub mod standard_form;
pub mod trig;
pub mod verify;

pub use error::{Error, Result};

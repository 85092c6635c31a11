#![no_std]
extern crate alloc;

pub mod analysis;
pub mod conformal;
pub mod error;
pub mod exactlin;
pub mod fractal;
pub mod mstar;
pub mod numeric;
pub mod random;
pub mod simplex;
pub mod weights;

pub use error::{Error, Result};

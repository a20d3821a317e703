#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` rejects NaN as well
#![allow(clippy::needless_range_loop)]

pub mod checks;
pub mod cli;
pub mod cluster;
pub mod config;
pub mod entropy;
pub mod error;
mod fft;
pub mod grid;
pub mod imc;
pub mod oracle;
pub mod potentials;
pub mod thermo;

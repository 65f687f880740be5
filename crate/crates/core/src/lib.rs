pub mod cli;
pub mod dataset;
pub mod error;
pub mod fom;
pub mod gpr;
pub mod modes;
pub mod pod;
pub mod rom;

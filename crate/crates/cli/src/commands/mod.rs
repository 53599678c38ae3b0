pub mod benchmark;
pub mod diagnose;
pub mod select;

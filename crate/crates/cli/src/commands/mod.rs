pub mod account;
pub mod average;
pub mod dropout;
pub mod graph;
pub mod optimize;

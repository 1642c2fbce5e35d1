pub mod algebra;
pub mod checker;
pub mod cli;
pub mod exprlang;
pub mod generator;
pub mod manifold;
pub mod report;
pub mod rng;
pub mod space;
pub mod theorems;

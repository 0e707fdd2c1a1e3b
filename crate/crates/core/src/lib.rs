//! Numerics laboratory for long-range random-cluster models whose couplings
//! decay like `psi(x) * exp(-rho(x))`.

pub mod asymptotics;
pub mod cli;
pub mod cluster;
pub mod couplings;
pub mod exact;
pub mod geometry;
pub mod mc;
pub mod region;
pub mod saw;
pub mod seqlab;
pub mod stats;
pub mod unionfind;

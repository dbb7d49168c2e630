//! Approximate-circuit netlists, profiling, Trojan insertion and detection.

pub mod arith;
pub mod netlist;
pub mod sim;
pub mod scoap;
pub mod sta;
pub mod justify;
pub mod attack;
pub mod bench;
pub mod detect;
pub mod config;

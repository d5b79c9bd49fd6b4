pub mod coefficients;
pub mod config;
pub mod diagnostics;
pub mod driver;
pub mod grid;
pub mod ksl;
pub mod lowrank;
pub mod maxwell;
pub mod oracle;
pub mod phase;
pub mod qr;
pub mod rk;
pub mod scenarios;
pub mod spectral;

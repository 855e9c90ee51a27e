//! Library surface of the experiment runner, used by the binary and tests.

pub mod presets;
pub mod runner;

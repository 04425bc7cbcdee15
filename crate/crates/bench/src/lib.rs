//! Shared fixtures for the benchmarks.

use diot_core::protocols::ProtocolConfig;

/// Parameters at the scale the acceptance runs use.
pub fn config(n: usize, l: usize) -> ProtocolConfig {
    ProtocolConfig { n, l, ..Default::default() }
}

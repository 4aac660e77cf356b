//! The bundled 13-bus test network.
//!
//! Bus loads and DG limits are the reference values of the 13-bus case. The feeder list and
//! the uniform 0.08 + j0.06 Ω span impedance are synthetic, so objective values are
//! not comparable with studies that used the original line data. Buses 4 and 11 host the two DGs and are
//! sources; bus 13 is the substation.

use crate::io::parse_network;
use crate::network::Network;

pub const FIXTURE13: &str = include_str!("../data/fixture13.net");
pub const FIXTURE13_RESTORE: &str = include_str!("../data/fixture13_restore.net");
pub const NETWORK_SCHEMA: &str = include_str!("../data/network.schema.json");

/// Fixture for reconfiguration: every bus served, substation available.
pub fn fixture13() -> Network {
    parse_network(FIXTURE13).expect("bundled fixture is valid")
}

/// Same network with the substation disconnected, for restoration.
pub fn fixture13_restoration() -> Network {
    parse_network(FIXTURE13_RESTORE).expect("bundled fixture is valid")
}

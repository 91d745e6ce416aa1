//! Bundled test systems.

use crate::error::Result;
use crate::topology::{parse_matpower_case, GridCase};

/// MATPOWER source of the IEEE 118-bus system.
pub const IEEE118_SOURCE: &str = include_str!("../data/case118.m");

pub fn ieee118() -> Result<GridCase> {
    parse_matpower_case(IEEE118_SOURCE)
}

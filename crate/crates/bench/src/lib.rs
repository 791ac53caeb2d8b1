//! Fixtures shared by the benchmarks.

use spt_core::cache::BuildingBlocks;
use spt_core::{InteractionModel, Pipeline, SystemSpec};

/// Range used for the unitary benchmarks, in oscillator lengths.
pub const RANGE: f64 = 0.01;

pub fn unitary_spec(n: usize) -> SystemSpec {
    SystemSpec::balanced(
        n,
        InteractionModel::unitary(RANGE).expect("tuning succeeds"),
    )
}

pub fn blocks(n: usize) -> BuildingBlocks {
    Pipeline::new()
        .building_blocks(&unitary_spec(n))
        .expect("pipeline succeeds")
        .0
}

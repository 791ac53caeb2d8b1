//! Symmetry-invariant dimensional perturbation theory for `N` spin-1/2
//! fermions in an isotropic harmonic trap.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`interaction`]: pair potentials, zero-energy scattering length and
//!    unitarity tuning of the dimensionally continued square well.
//! 2. [`geometry`]: the large-dimension effective potential over radii and
//!    pair angle cosines, and its totally symmetric minimum.
//! 3. [`spectrum`]: FG normal-mode analysis at the minimum, reduced to the
//!    five distinct roots of the `S_N`-invariant problem.
//! 4. [`pauli`]: oscillator shell filling and the normal-mode occupancy
//!    constraints that make the state antisymmetric.
//! 5. [`assembler`]: energy through harmonic order, sweeps over `N`,
//!    zero-range extrapolation, caching and benchmark comparison.
//!
//! All energies are reported in units of `ħω_ho` and all lengths in units of
//! `a_ho` unless a type states that it holds scaled (barred) quantities.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembler;
pub mod cache;
pub mod error;
pub mod geometry;
pub mod interaction;
pub mod model;
pub mod pauli;
pub mod spectrum;

pub use assembler::{
    assemble_energy, compare, extrapolate_zero_range, fit_zero_range, load_references,
    BenchmarkRecord, ComparisonReport, Pipeline, PipelineResult, SweepRow, SweepTable,
    ZeroRangeFit,
};
pub use cache::{Cache, CacheEntry};
pub use error::{Error, Result};
pub use geometry::{find_symmetric_minimum, InternalCoordinates, SymmetricMinimum};
pub use interaction::{InteractionModel, ScatteringResult, UnitarityTuning};
pub use model::{EnergyResult, Mode, ScalingFrame, SystemSpec};
pub use pauli::{HOConfiguration, OccupancyState, SpectrumLevel, SpectrumTable};
pub use spectrum::{FGPatterns, NormalModeSpectrum};

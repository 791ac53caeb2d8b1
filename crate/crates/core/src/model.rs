//! Shared domain types and the dimensional-scaling convention.
//!
//! Units are oscillator units, `ħ = m = 1`, with lengths in `a_ho` and
//! energies in `ħω_ho`. In `D` dimensions the scaled (barred) quantities are
//!
//! ```text
//! r = sqrt(D/2) · r̄          (length unit sqrt(D/2) a_ho)
//! E = (D/2) · Ē              (energy unit D/2 ħω_ho)
//! ```
//!
//! which is `Ē = κ(D)·E` with `κ(D) = D²/ω̄_ho` and `ω̄_ho = D³ω_ho/2`. With
//! this choice the kinetic prefactor of the scaled Hamiltonian is `2δ²` and the
//! `δ → 0` effective potential of one free particle is `1/(2r̄²) + r̄²/2`,
//! minimized at `r̄ = 1` with value 1.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interaction::InteractionModel;

/// The five distinct normal-mode roots of the `S_N`-invariant FG problem.
///
/// `-` modes carry radial quanta and `+` modes angular quanta in the
/// double limit used for the Pauli constraints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "0+")]
    ZeroPlus,
    #[serde(rename = "0-")]
    ZeroMinus,
    #[serde(rename = "1+")]
    OnePlus,
    #[serde(rename = "1-")]
    OneMinus,
    #[serde(rename = "2")]
    Two,
}

/// Physical character of a mode family, assigned by symmetry sector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeCharacter {
    CenterOfMassBreathing,
    SingleParticle,
    Phonon,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::ZeroPlus,
        Mode::ZeroMinus,
        Mode::OnePlus,
        Mode::OneMinus,
        Mode::Two,
    ];

    pub const RADIAL: [Mode; 2] = [Mode::ZeroMinus, Mode::OneMinus];
    pub const ANGULAR: [Mode; 3] = [Mode::ZeroPlus, Mode::OnePlus, Mode::Two];

    pub fn label(self) -> &'static str {
        match self {
            Mode::ZeroPlus => "0+",
            Mode::ZeroMinus => "0-",
            Mode::OnePlus => "1+",
            Mode::OneMinus => "1-",
            Mode::Two => "2",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_radial(self) -> bool {
        matches!(self, Mode::ZeroMinus | Mode::OneMinus)
    }

    pub fn character(self) -> ModeCharacter {
        match self {
            Mode::ZeroPlus | Mode::ZeroMinus => ModeCharacter::CenterOfMassBreathing,
            Mode::OnePlus | Mode::OneMinus => ModeCharacter::SingleParticle,
            Mode::Two => ModeCharacter::Phonon,
        }
    }

    /// Number of degenerate normal coordinates in this family for `n`
    /// particles. Families that do not exist for small `n` have multiplicity
    /// zero: for `n = 2` only `0±` and `1-` exist, for `n = 3` the `2` family
    /// is empty.
    pub fn multiplicity(self, n: usize) -> usize {
        match (self, n) {
            (_, 0 | 1) => 0,
            (Mode::ZeroPlus | Mode::ZeroMinus, _) => 1,
            (Mode::OneMinus, _) => n - 1,
            (Mode::OnePlus, 2) => 0,
            (Mode::OnePlus, _) => n - 1,
            (Mode::Two, n) if n < 4 => 0,
            (Mode::Two, n) => n * (n - 3) / 2,
        }
    }

    pub fn parse(label: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.label() == label)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Full problem statement for one pipeline run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub n_up: usize,
    pub n_down: usize,
    /// `ω_ho`; energies are reported in units of `ħω_ho` so this only enters
    /// the frame bookkeeping.
    pub trap_frequency: f64,
    pub interaction: InteractionModel,
    /// Physical dimension `D` at which the series is summed.
    pub dimension_target: u32,
}

impl SystemSpec {
    pub fn new(n_up: usize, n_down: usize, interaction: InteractionModel) -> Self {
        Self {
            n_up,
            n_down,
            trap_frequency: 1.0,
            interaction,
            dimension_target: 3,
        }
    }

    /// `n` particles split as evenly as possible, the extra one spin up.
    pub fn balanced(n: usize, interaction: InteractionModel) -> Self {
        Self::new(n.div_ceil(2), n / 2, interaction)
    }

    pub fn n_particles(&self) -> usize {
        self.n_up + self.n_down
    }

    /// Number of unlike-spin pairs, `N₁N₂`.
    pub fn unlike_pairs(&self) -> usize {
        self.n_up * self.n_down
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_up < 1 {
            return Err(Error::InvalidInput("n_up must be at least 1".into()));
        }
        if self.n_particles() < 2 {
            return Err(Error::InvalidInput(
                "at least two particles are required for the pair geometry".into(),
            ));
        }
        if !(self.trap_frequency > 0.0 && self.trap_frequency.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "trap frequency must be positive, got {}",
                self.trap_frequency
            )));
        }
        if self.dimension_target < 2 {
            return Err(Error::InvalidInput(format!(
                "dimension must be at least 2, got {}",
                self.dimension_target
            )));
        }
        self.interaction.validate()
    }

    pub fn frame(&self) -> Result<ScalingFrame> {
        ScalingFrame::new(self.dimension_target, self.trap_frequency)
    }
}

/// Conversion between scaled (barred) and oscillator units at one dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFrame {
    pub dimension: u32,
    /// `δ = 1/D`.
    pub delta: f64,
    /// `κ(D) = D²/ω̄_ho`, in units where `ħ = 1`.
    pub kappa: f64,
    pub trap_frequency: f64,
    /// `ω̄_ho = D³ω_ho/2`.
    pub omega_bar: f64,
    /// Oscillator lengths `a_ho` per scaled length unit: `sqrt(D/2)`.
    pub length_unit: f64,
    /// `ħω_ho` per scaled energy unit: `D/2`.
    pub energy_unit: f64,
}

impl ScalingFrame {
    pub fn new(dimension: u32, trap_frequency: f64) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::InvalidInput(format!(
                "dimension must be at least 2 for the angle-cosine geometry, got {dimension}"
            )));
        }
        if !(trap_frequency > 0.0 && trap_frequency.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "trap frequency must be positive, got {trap_frequency}"
            )));
        }
        let d = f64::from(dimension);
        let omega_bar = d * d * d * trap_frequency / 2.0;
        Ok(Self {
            dimension,
            delta: 1.0 / d,
            kappa: d * d / omega_bar,
            trap_frequency,
            omega_bar,
            length_unit: (d / 2.0).sqrt(),
            energy_unit: d / 2.0,
        })
    }

    /// Scaled energy to units of `ħω_ho`.
    pub fn unscale_energy(&self, scaled: f64) -> f64 {
        scaled * self.energy_unit
    }

    /// Energy in units of `ħω_ho` to scaled units.
    pub fn scale_energy(&self, energy: f64) -> f64 {
        energy / self.energy_unit
    }

    pub fn unscale_length(&self, scaled: f64) -> f64 {
        scaled * self.length_unit
    }

    pub fn scale_length(&self, length: f64) -> f64 {
        length / self.length_unit
    }
}

/// Energy through harmonic order, scaled and unscaled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyResult {
    pub dimension: u32,
    /// `Ē∞`.
    pub e_infinity_scaled: f64,
    /// `δ[Σ_μ (n_μ + d_μ/2) ω̄_μ + v₀]`.
    pub harmonic_term_scaled: f64,
    pub total_scaled: f64,
    /// Total energy in units of `ħω_ho`.
    pub total_unscaled: f64,
    /// Per-mode scaled contributions `δ(n_μ + d_μ/2)ω̄_μ`.
    pub breakdown: BTreeMap<Mode, f64>,
    /// Scaled `δ·v₀`; together with `breakdown` it sums to the harmonic term.
    pub v0_contribution: f64,
}

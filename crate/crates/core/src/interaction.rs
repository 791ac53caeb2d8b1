//! Pair interactions and s-wave scattering.
//!
//! The square well is continued away from `D = 3` as
//!
//! ```text
//! v̄(r̄; δ) = V₀(δ) [1 - tanh((r̄ - 3δR̄) / (1 - 3δ))],   V₀(δ) = 1 / (1 - 3bδ)
//! ```
//!
//! in scaled units, with `b > 1`. At `δ = 1/3` the bracket becomes a step of
//! height 2 at `r̄ = R̄` and `V₀ = 1/(1 - b) < 0`, so the well is attractive
//! with scaled depth `2/(b - 1)`. Converted with the `D = 3` frame this is a
//! well of physical radius `R` and depth `v_depth = 3/(b - 1)`, and tuning
//! `b` places it on the first zero-energy resonance.
//!
//! The amplitude passes through a pole at `δ = 1/(3b)`, just below `1/3`,
//! and is a soft repulsion of unit height at `δ = 0` whatever `R` is. Only
//! the value and first `δ` derivative at `δ = 0` enter the harmonic-order
//! energy, so `R` acts through the `δ`-linear terms alone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ScalingFrame, SystemSpec};

/// Scaled energy and length units of the physical three-dimensional frame.
fn physical_frame() -> ScalingFrame {
    ScalingFrame::new(3, 1.0).expect("D = 3 frame is valid")
}

/// Largest `δ` for which the continued well is defined.
pub const MAX_CONTINUED_DELTA: f64 = 1.0 / 3.0;

/// Below this `|1/a_s|` (in `1/a_ho`) the well is reported as resonant.
pub const RESONANCE_TOLERANCE: f64 = 1e-8;

/// Target residual of [`tune_unitarity`].
pub const UNITARITY_TOLERANCE: f64 = 1e-10;

/// Radial steps per well range for the zero-energy integration.
const INTEGRATION_STEPS_PER_RANGE: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum InteractionModel {
    NonInteracting,
    /// Continued square well of physical range `range` (in `a_ho`) with
    /// depth parameter `b`.
    SquareWellContinued {
        range: f64,
        depth_parameter: f64,
    },
    /// `(λ/2) r²` between every pair; the exactly solvable test model.
    HarmonicPair {
        coupling: f64,
    },
}

/// Value and radial derivatives of a scaled pair potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairDerivatives {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

impl InteractionModel {
    /// Square well tuned to unitarity at the given range.
    pub fn unitary(range: f64) -> Result<Self> {
        let tuning = tune_unitarity(range)?;
        Ok(tuning.model())
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            InteractionModel::NonInteracting => Ok(()),
            InteractionModel::SquareWellContinued {
                range,
                depth_parameter,
            } => {
                if !(range > 0.0 && range.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "square-well range must be positive, got {range}"
                    )));
                }
                if !(depth_parameter > 1.0 && depth_parameter.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "depth parameter must exceed 1 for an attractive well, got {depth_parameter}"
                    )));
                }
                if range >= 1.0 {
                    log::warn!("square-well range {range} a_ho is not small compared to a_ho");
                }
                Ok(())
            }
            InteractionModel::HarmonicPair { coupling } => {
                if !coupling.is_finite() {
                    return Err(Error::InvalidInput(
                        "harmonic coupling must be finite".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Checks conditions that depend on the particle number.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        self.validate()?;
        if let InteractionModel::HarmonicPair { coupling } = *self {
            if 1.0 + n as f64 * coupling <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "harmonic coupling {coupling} is below -1/N for N = {n}; the system is unbound"
                )));
            }
        }
        Ok(())
    }

    /// Weight applied to every one of the `N(N-1)/2` pairs.
    ///
    /// The square well acts between unlike spins only; spreading the
    /// `N₁N₂` unlike pairs uniformly over all pairs keeps the effective
    /// potential `S_N` invariant. The harmonic test model couples all pairs.
    pub fn pair_weight(&self, spec: &SystemSpec) -> f64 {
        let n = spec.n_particles();
        match self {
            InteractionModel::NonInteracting => 0.0,
            InteractionModel::HarmonicPair { .. } => 1.0,
            InteractionModel::SquareWellContinued { .. } => {
                if n < 2 {
                    0.0
                } else {
                    spec.unlike_pairs() as f64 / (n * (n - 1) / 2) as f64
                }
            }
        }
    }

    /// Scaled depth of the well at `δ = 1/3`, `2/(b - 1)`.
    pub fn scaled_depth(&self) -> Option<f64> {
        match *self {
            InteractionModel::SquareWellContinued {
                depth_parameter, ..
            } => Some(2.0 / (depth_parameter - 1.0)),
            _ => None,
        }
    }

    /// Physical depth of the `D = 3` well in `ħω_ho`.
    pub fn physical_depth(&self) -> Option<f64> {
        self.scaled_depth()
            .map(|d| physical_frame().unscale_energy(d))
    }

    /// Scaled radius of the `D = 3` well.
    pub fn scaled_range(&self) -> Option<f64> {
        match *self {
            InteractionModel::SquareWellContinued { range, .. } => {
                Some(physical_frame().scale_length(range))
            }
            _ => None,
        }
    }

    fn check_args(&self, r: f64, delta: f64) -> Result<()> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::InvalidInput(format!(
                "pair distance must be >= 0, got {r}"
            )));
        }
        if !(delta >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "delta must be >= 0, got {delta}"
            )));
        }
        if matches!(self, InteractionModel::SquareWellContinued { .. })
            && delta > MAX_CONTINUED_DELTA
        {
            return Err(Error::InvalidInput(format!(
                "the continued square well is undefined for delta = {delta} > 1/3"
            )));
        }
        Ok(())
    }

    /// `v̄(r̄; δ)` in scaled units.
    pub fn evaluate(&self, r: f64, delta: f64) -> Result<f64> {
        Ok(self.derivatives(r, delta)?.value)
    }

    /// Value and first two `r̄` derivatives of `v̄(r̄; δ)`.
    pub fn derivatives(&self, r: f64, delta: f64) -> Result<PairDerivatives> {
        self.check_args(r, delta)?;
        Ok(match *self {
            InteractionModel::NonInteracting => PairDerivatives {
                value: 0.0,
                first: 0.0,
                second: 0.0,
            },
            InteractionModel::HarmonicPair { coupling } => PairDerivatives {
                value: 0.5 * coupling * r * r,
                first: coupling * r,
                second: coupling,
            },
            InteractionModel::SquareWellContinued {
                depth_parameter, ..
            } => {
                let amp = amplitude(depth_parameter, delta)?;
                let range = self.scaled_range().unwrap_or_default();
                let width = 1.0 - 3.0 * delta;
                if width <= 0.0 {
                    // D = 3: the bracket is a step.
                    let value = if r < range {
                        2.0 * amp
                    } else if r > range {
                        0.0
                    } else {
                        amp
                    };
                    return Ok(PairDerivatives {
                        value,
                        first: 0.0,
                        second: 0.0,
                    });
                }
                let c = 1.0 / width;
                let s = (r - 3.0 * delta * range) * c;
                let t = s.tanh();
                let sech2 = sech(s).powi(2);
                PairDerivatives {
                    value: amp * one_minus_tanh(s),
                    first: -amp * c * sech2,
                    second: 2.0 * amp * c * c * sech2 * t,
                }
            }
        })
    }

    /// `∂v̄/∂δ` at fixed `r̄`.
    pub fn delta_derivative(&self, r: f64, delta: f64) -> Result<f64> {
        self.check_args(r, delta)?;
        Ok(match *self {
            InteractionModel::NonInteracting | InteractionModel::HarmonicPair { .. } => 0.0,
            InteractionModel::SquareWellContinued {
                depth_parameter, ..
            } => {
                let b = depth_parameter;
                let width = 1.0 - 3.0 * delta;
                if width <= 0.0 {
                    return Err(Error::InvalidInput(
                        "the delta derivative of the continued well is singular at delta = 1/3"
                            .into(),
                    ));
                }
                let range = self.scaled_range().unwrap_or_default();
                let amp = amplitude(b, delta)?;
                let amp_prime = 3.0 * b * amp * amp;
                let s = (r - 3.0 * delta * range) / width;
                let s_prime = 3.0 * (r - range) / (width * width);
                amp_prime * one_minus_tanh(s) - amp * sech(s).powi(2) * s_prime
            }
        })
    }

    /// Canonical text used for cache keys. Floats are written by bit pattern
    /// so distinct parameters never collide.
    pub fn fingerprint(&self) -> String {
        match *self {
            InteractionModel::NonInteracting => "non_interacting".to_string(),
            InteractionModel::SquareWellContinued {
                range,
                depth_parameter,
            } => format!(
                "square_well_continued(range={:016x},b={:016x})",
                range.to_bits(),
                depth_parameter.to_bits()
            ),
            InteractionModel::HarmonicPair { coupling } => {
                format!("harmonic_pair(lambda={:016x})", coupling.to_bits())
            }
        }
    }
}

/// `V₀(δ) = 1/(1 - 3bδ)`, rejecting the pole at `δ = 1/(3b)`.
fn amplitude(b: f64, delta: f64) -> Result<f64> {
    let denom = 1.0 - 3.0 * b * delta;
    if denom.abs() < 1e-12 {
        return Err(Error::InvalidInput(format!(
            "the continued well amplitude has a pole at delta = 1/(3b) = {}",
            1.0 / (3.0 * b)
        )));
    }
    Ok(1.0 / denom)
}

fn sech(s: f64) -> f64 {
    1.0 / s.cosh()
}

/// `1 - tanh(s)` without cancellation for large positive `s`.
fn one_minus_tanh(s: f64) -> f64 {
    if s > 0.0 {
        let e = (-2.0 * s).exp();
        2.0 * e / (1.0 + e)
    } else {
        1.0 - s.tanh()
    }
}

pub fn evaluate_pair_potential(model: &InteractionModel, r: f64, delta: f64) -> Result<f64> {
    model.evaluate(r, delta)
}

pub fn pair_potential_derivatives(
    model: &InteractionModel,
    r: f64,
    delta: f64,
) -> Result<PairDerivatives> {
    model.derivatives(r, delta)
}

/// Zero-energy s-wave scattering by a square well, in oscillator units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringResult {
    pub v_depth: f64,
    pub range: f64,
    /// `1/a_s` from the closed form.
    pub inverse_scattering_length: f64,
    /// `1/a_s` from radial integration and log-derivative matching.
    pub numerical_inverse_scattering_length: f64,
    /// `|1/a_s|` is below [`RESONANCE_TOLERANCE`].
    pub resonant: bool,
}

impl ScatteringResult {
    /// `a_s` from the closed form, `None` on resonance.
    pub fn scattering_length(&self) -> Option<f64> {
        (!self.resonant).then(|| 1.0 / self.inverse_scattering_length)
    }

    pub fn numerical_scattering_length(&self) -> Option<f64> {
        (!self.resonant).then(|| 1.0 / self.numerical_inverse_scattering_length)
    }

    /// Relative disagreement of the two routes, measured on `a_s` away from
    /// resonance and on `1/a_s` (absolute, times the range) at resonance.
    pub fn method_disagreement(&self) -> f64 {
        match (self.scattering_length(), self.numerical_scattering_length()) {
            (Some(a), Some(b)) => ((a - b) / a).abs(),
            _ => ((self.inverse_scattering_length - self.numerical_inverse_scattering_length)
                * self.range)
                .abs(),
        }
    }
}

/// Wave number inside the well, `k₀ = sqrt(2μ v)` with `μ = m/2`.
fn well_wave_number(v_depth: f64) -> f64 {
    let reduced_mass = 0.5;
    (2.0 * reduced_mass * v_depth).sqrt()
}

/// `1/a_s = x cos x / (R (x cos x − sin x))` with `x = k₀R`; finite through
/// the first resonance.
fn closed_form_inverse(v_depth: f64, range: f64) -> f64 {
    let x = well_wave_number(v_depth) * range;
    let denom = if x < 1e-3 {
        let x2 = x * x;
        -x * x2 * (1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0)
    } else {
        x * x.cos() - x.sin()
    };
    x * x.cos() / (range * denom)
}

/// Integrates `u'' = -k₀² u` from the origin with RK4 and matches the free
/// solution `u ∝ r - a` at `r = 2R`. Steps are aligned with `r = R` so no
/// step straddles the edge of the well.
fn integrated_inverse(v_depth: f64, range: f64) -> f64 {
    let k2 = well_wave_number(v_depth).powi(2);
    let h = range / INTEGRATION_STEPS_PER_RANGE as f64;
    let (mut u, mut du) = (0.0_f64, 1.0_f64);
    for step in 0..2 * INTEGRATION_STEPS_PER_RANGE {
        let k = if step < INTEGRATION_STEPS_PER_RANGE {
            k2
        } else {
            0.0
        };
        let k1u = du;
        let k1v = -k * u;
        let k2u = du + 0.5 * h * k1v;
        let k2v = -k * (u + 0.5 * h * k1u);
        let k3u = du + 0.5 * h * k2v;
        let k3v = -k * (u + 0.5 * h * k2u);
        let k4u = du + h * k3v;
        let k4v = -k * (u + h * k3u);
        u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        du += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    let r = 2.0 * range;
    du / (r * du - u)
}

pub fn compute_scattering_length(v_depth: f64, range: f64) -> Result<ScatteringResult> {
    if !(v_depth > 0.0 && v_depth.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "well depth must be positive, got {v_depth}"
        )));
    }
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "well range must be positive, got {range}"
        )));
    }
    let inverse = closed_form_inverse(v_depth, range);
    let numerical = integrated_inverse(v_depth, range);
    Ok(ScatteringResult {
        v_depth,
        range,
        inverse_scattering_length: inverse,
        numerical_inverse_scattering_length: numerical,
        resonant: inverse.abs() < RESONANCE_TOLERANCE,
    })
}

/// Unitarity-tuned square well.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitarityTuning {
    pub range: f64,
    /// Physical depth in `ħω_ho`.
    pub v_depth: f64,
    pub depth_parameter: f64,
    /// Closed-form `1/a_s` at the tuned depth.
    pub inverse_scattering_length: f64,
    pub iterations: usize,
}

impl UnitarityTuning {
    pub fn model(&self) -> InteractionModel {
        InteractionModel::SquareWellContinued {
            range: self.range,
            depth_parameter: self.depth_parameter,
        }
    }
}

/// Depth parameter `b` whose `D = 3` well has physical depth `v_depth`.
pub fn depth_parameter_for(v_depth: f64) -> f64 {
    let scaled = physical_frame().scale_energy(v_depth);
    1.0 + 2.0 / scaled
}

/// Finds the depth that puts a well of the given range on its first
/// zero-energy resonance by bisection on `1/a_s`.
pub fn tune_unitarity(range: f64) -> Result<UnitarityTuning> {
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "well range must be positive, got {range}"
        )));
    }
    if range >= 1.0 {
        log::warn!("square-well range {range} a_ho is not small compared to a_ho");
    }
    // Scan k₀R upward for the first sign change of 1/a_s (negative below the
    // resonance, positive just above it).
    let depth_at = |x: f64| (x / range).powi(2);
    let inv = |v: f64| closed_form_inverse(v, range);
    let step = 0.05;
    let mut x_lo = step;
    let mut bracket = None;
    while x_lo < 3.0 {
        let x_hi = x_lo + step;
        if inv(depth_at(x_lo)) < 0.0 && inv(depth_at(x_hi)) >= 0.0 {
            bracket = Some((depth_at(x_lo), depth_at(x_hi)));
            break;
        }
        x_lo = x_hi;
    }
    let (mut lo, mut hi) = bracket.ok_or(Error::BracketFailure {
        lo: depth_at(step),
        hi: depth_at(3.0),
    })?;
    let mut iterations = 0;
    let mut best = hi;
    while iterations < 400 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let f = inv(mid);
        if f.abs() < inv(best).abs() {
            best = mid;
        }
        if f.abs() < UNITARITY_TOLERANCE * 1e-2 || mid <= lo || mid >= hi {
            break;
        }
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let residual = inv(best);
    if residual.abs() >= UNITARITY_TOLERANCE {
        return Err(Error::BracketFailure { lo, hi });
    }
    Ok(UnitarityTuning {
        range,
        v_depth: best,
        depth_parameter: depth_parameter_for(best),
        inverse_scattering_length: residual,
        iterations,
    })
}

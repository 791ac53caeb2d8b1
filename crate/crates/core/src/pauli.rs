//! Antisymmetry at the level of normal-mode occupancies.
//!
//! In the double limit `D → ∞, ω → ∞` the normal-mode energy and the
//! oscillator shell energy coincide, which ties the two sets of quantum
//! numbers together:
//!
//! ```text
//! 2n(0-) + 2n(1-)        = Σ 2νᵢ
//! 2n(0+) + 2n(1+) + 2n(2) = Σ lᵢ
//! ```
//!
//! A filling whose `Σ lᵢ` is odd has no solution and is inadmissible.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SymmetricMinimum;
use crate::model::{Mode, SystemSpec};
use crate::spectrum::NormalModeSpectrum;

/// Relative tolerance below which two frequencies count as degenerate.
pub const FREQUENCY_TIE_TOLERANCE: f64 = 1e-9;

/// Shell promotions tried when no minimal filling is admissible.
pub const MAX_PROMOTION: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spin {
    Up,
    Down,
}

/// One spatial oscillator orbital `(ν, l)`; holds `2l + 1` particles per spin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Orbital {
    pub nu: u32,
    pub l: u32,
}

impl Orbital {
    pub fn energy(self) -> u32 {
        2 * self.nu + self.l
    }

    pub fn capacity(self) -> u32 {
        2 * self.l + 1
    }

    /// Orbitals ordered by energy, then `l`, up to `max_energy`.
    fn up_to(max_energy: u32) -> Vec<Orbital> {
        (0..=max_energy)
            .flat_map(|e| {
                (e % 2..=e)
                    .step_by(2)
                    .map(move |l| Orbital { nu: (e - l) / 2, l })
            })
            .collect()
    }
}

impl fmt::Display for Orbital {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const LETTERS: &[u8] = b"spdfghik";
        match LETTERS.get(self.l as usize) {
            Some(&c) => write!(f, "{}{}", self.nu, c as char),
            None => write!(f, "{}l{}", self.nu, self.l),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrbitalOccupation {
    pub spin: Spin,
    pub orbital: Orbital,
    pub count: u32,
}

/// A filling of oscillator orbitals by both spin species.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HOConfiguration {
    pub orbitals: Vec<OrbitalOccupation>,
    /// `Σ 2νᵢ`.
    pub radial_sum: u32,
    /// `Σ lᵢ`.
    pub angular_sum: u32,
    /// `Σ (2νᵢ + lᵢ)`, without the zero-point `3N/2`.
    pub shell_energy: u32,
}

impl HOConfiguration {
    pub fn new(mut orbitals: Vec<OrbitalOccupation>) -> Result<Self> {
        orbitals.retain(|o| o.count > 0);
        orbitals.sort();
        for w in orbitals.windows(2) {
            if w[0].spin == w[1].spin && w[0].orbital == w[1].orbital {
                return Err(Error::InvalidInput(format!(
                    "orbital {} listed twice for one spin",
                    w[0].orbital
                )));
            }
        }
        let mut radial_sum = 0;
        let mut angular_sum = 0;
        for o in &orbitals {
            if o.count > o.orbital.capacity() {
                return Err(Error::InvalidInput(format!(
                    "orbital {} holds at most {} particles per spin, got {}",
                    o.orbital,
                    o.orbital.capacity(),
                    o.count
                )));
            }
            radial_sum += 2 * o.orbital.nu * o.count;
            angular_sum += o.orbital.l * o.count;
        }
        Ok(Self {
            orbitals,
            radial_sum,
            angular_sum,
            shell_energy: radial_sum + angular_sum,
        })
    }

    pub fn count(&self, spin: Spin) -> usize {
        self.orbitals
            .iter()
            .filter(|o| o.spin == spin)
            .map(|o| o.count as usize)
            .sum()
    }

    pub fn n_particles(&self) -> usize {
        self.count(Spin::Up) + self.count(Spin::Down)
    }

    /// Whether the occupancy constraints have an integer solution.
    pub fn is_admissible(&self) -> bool {
        self.angular_sum.is_multiple_of(2)
    }

    /// Oscillator energy `Σ(2νᵢ + lᵢ + 3/2)` in `ħω_ho`.
    pub fn oscillator_energy(&self) -> f64 {
        f64::from(self.shell_energy) + 1.5 * self.n_particles() as f64
    }

    /// Compact text form, e.g. `up[0s1 0p3] down[0s1 0p2]`.
    pub fn summary(&self) -> String {
        let part = |spin: Spin| {
            self.orbitals
                .iter()
                .filter(|o| o.spin == spin)
                .map(|o| format!("{}{}", o.orbital, o.count))
                .collect::<Vec<_>>()
                .join(" ")
        };
        format!("up[{}] down[{}]", part(Spin::Up), part(Spin::Down))
    }
}

/// `(radial_sum, angular_sum)` targets of the occupancy constraints.
pub fn constraint_sums(config: &HOConfiguration) -> (u32, u32) {
    (config.radial_sum, config.angular_sum)
}

/// Lowest oscillator energy `Σ(2ν + l)` of `k` identical fermions.
pub fn min_shell_energy(k: usize) -> u32 {
    let mut left = k;
    let mut energy = 0;
    let mut shell = 0u32;
    while left > 0 {
        let cap = ((shell + 1) * (shell + 2) / 2) as usize;
        let take = cap.min(left);
        energy += shell * take as u32;
        left -= take;
        shell += 1;
    }
    energy
}

type Counts = Vec<(Orbital, u32)>;

/// Distinct `(radial_sum, angular_sum)` fillings of `k` fermions of one spin
/// with `Σ(2ν + l) ≤ budget`, each with one representative filling.
fn species_options(k: usize, budget: u32) -> BTreeMap<(u32, u32), Counts> {
    let k = k as u32;
    let orbitals = Orbital::up_to(budget);
    // (placed, R, A) -> representative.
    let mut states: BTreeMap<(u32, u32, u32), Counts> = BTreeMap::new();
    states.insert((0, 0, 0), Vec::new());
    for (idx, orb) in orbitals.iter().enumerate() {
        let next_energy = orbitals.get(idx + 1).map_or(u32::MAX, |o| o.energy());
        let mut next: BTreeMap<(u32, u32, u32), Counts> = BTreeMap::new();
        for (&(placed, r, a), rep) in &states {
            for c in 0..=orb.capacity().min(k - placed) {
                let (p2, r2, a2) = (placed + c, r + 2 * orb.nu * c, a + orb.l * c);
                let spent = r2 + a2;
                let left = k - p2;
                if spent > budget
                    || (left > 0
                        && u64::from(spent) + u64::from(left) * u64::from(next_energy)
                            > u64::from(budget))
                {
                    continue;
                }
                next.entry((p2, r2, a2)).or_insert_with(|| {
                    let mut v = rep.clone();
                    if c > 0 {
                        v.push((*orb, c));
                    }
                    v
                });
            }
        }
        states = next;
    }
    states
        .into_iter()
        .filter(|((placed, _, _), _)| *placed == k)
        .map(|((_, r, a), rep)| ((r, a), rep))
        .collect()
}

/// All distinct `(radial_sum, angular_sum)` fillings with total shell energy
/// at most `max_shell_energy`, ordered by shell energy then radial sum.
pub fn configurations_up_to(
    n_up: usize,
    n_down: usize,
    max_shell_energy: u32,
) -> Vec<HOConfiguration> {
    let (min_up, min_down) = (min_shell_energy(n_up), min_shell_energy(n_down));
    if min_up + min_down > max_shell_energy {
        return Vec::new();
    }
    let up = species_options(n_up, max_shell_energy - min_down);
    let down = species_options(n_down, max_shell_energy - min_up);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (&(ru, au), rep_up) in &up {
        for (&(rd, ad), rep_down) in &down {
            let key = (ru + rd + au + ad, ru + rd);
            if key.0 > max_shell_energy || !seen.insert(key) {
                continue;
            }
            let orbitals = rep_up
                .iter()
                .map(|&(orbital, count)| OrbitalOccupation {
                    spin: Spin::Up,
                    orbital,
                    count,
                })
                .chain(rep_down.iter().map(|&(orbital, count)| OrbitalOccupation {
                    spin: Spin::Down,
                    orbital,
                    count,
                }))
                .collect();
            out.push(HOConfiguration::new(orbitals).expect("enumerated filling is valid"));
        }
    }
    out.sort_by_key(|c| (c.shell_energy, c.radial_sum));
    out
}

/// Minimal-energy fillings: closed shells plus every distinct
/// `(radial_sum, angular_sum)` split of the Fermi shell.
pub fn fill_shells(n_up: usize, n_down: usize) -> Vec<HOConfiguration> {
    configurations_up_to(
        n_up,
        n_down,
        min_shell_energy(n_up) + min_shell_energy(n_down),
    )
}

/// Lowest-energy admissible fillings together with the number of shell
/// units they lie above the minimal filling (0 unless every minimal filling
/// has odd `Σl`).
pub fn lowest_admissible_configurations(
    n_up: usize,
    n_down: usize,
) -> Result<(Vec<HOConfiguration>, u32)> {
    let base = min_shell_energy(n_up) + min_shell_energy(n_down);
    for promotion in 0..=MAX_PROMOTION {
        let configs: Vec<_> = configurations_up_to(n_up, n_down, base + promotion)
            .into_iter()
            .filter(|c| c.shell_energy == base + promotion && c.is_admissible())
            .collect();
        if !configs.is_empty() {
            return Ok((configs, promotion));
        }
    }
    Err(Error::PauliInfeasible { n_up, n_down })
}

/// Normal-mode quantum numbers `|n(0+), n(0-), n(1+), n(1-), n(2)⟩`.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(into = "BTreeMap<Mode, u32>", from = "BTreeMap<Mode, u32>")]
pub struct OccupancyState {
    n: [u32; 5],
}

impl From<OccupancyState> for BTreeMap<Mode, u32> {
    fn from(s: OccupancyState) -> Self {
        Mode::ALL.iter().map(|&m| (m, s.get(m))).collect()
    }
}

impl From<BTreeMap<Mode, u32>> for OccupancyState {
    fn from(map: BTreeMap<Mode, u32>) -> Self {
        let mut s = OccupancyState::default();
        for (m, v) in map {
            s.set(m, v);
        }
        s
    }
}

impl OccupancyState {
    pub fn new(n: [u32; 5]) -> Self {
        Self { n }
    }

    pub fn get(&self, mode: Mode) -> u32 {
        self.n[mode.index()]
    }

    pub fn set(&mut self, mode: Mode, value: u32) {
        self.n[mode.index()] = value;
    }

    pub fn as_array(&self) -> [u32; 5] {
        self.n
    }

    pub fn total_quanta(&self) -> u32 {
        self.n.iter().sum()
    }

    pub fn radial_quanta(&self) -> u32 {
        Mode::RADIAL.iter().map(|&m| self.get(m)).sum()
    }

    pub fn angular_quanta(&self) -> u32 {
        Mode::ANGULAR.iter().map(|&m| self.get(m)).sum()
    }

    /// Both occupancy constraints as exact integer equations.
    pub fn satisfies(&self, config: &HOConfiguration) -> bool {
        2 * self.radial_quanta() == config.radial_sum
            && 2 * self.angular_quanta() == config.angular_sum
    }

    /// `Π_μ C(n_μ + d_μ - 1, n_μ)` for `n` particles; `None` on overflow.
    pub fn degeneracy(&self, n: usize) -> Option<u128> {
        Mode::ALL.iter().try_fold(1u128, |acc, &m| {
            let q = self.get(m) as u128;
            let d = m.multiplicity(n) as u128;
            if q > 0 && d == 0 {
                return Some(0);
            }
            acc.checked_mul(multiset_count(d, q)?)
        })
    }

    /// Excitation sum `Σ n_μ ω̄_μ` in scaled units, without the factor `δ`.
    pub fn excitation(&self, spectrum: &NormalModeSpectrum) -> f64 {
        spectrum
            .roots
            .iter()
            .map(|r| f64::from(self.get(r.mode)) * r.omega)
            .sum()
    }
}

impl fmt::Display for OccupancyState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d, e] = self.n;
        write!(f, "|{a},{b},{c},{d},{e}>")
    }
}

/// `C(q + d - 1, q)`: ways to place `q` quanta on `d` degenerate oscillators.
pub fn multiset_count(d: u128, q: u128) -> Option<u128> {
    if q == 0 {
        return Some(1);
    }
    if d == 0 {
        return Some(0);
    }
    let mut acc: u128 = 1;
    for i in 1..=q {
        // acc = C(d - 1 + i, i), exact at every step.
        acc = acc.checked_mul(d - 1 + i)? / i;
    }
    Some(acc)
}

/// Every split of `total` quanta over `parts` slots, lexicographic.
fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 0 {
        return if total == 0 {
            vec![Vec::new()]
        } else {
            Vec::new()
        };
    }
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn existing(spectrum: &NormalModeSpectrum, family: &[Mode]) -> Vec<(Mode, f64)> {
    family
        .iter()
        .filter_map(|&m| {
            spectrum
                .root(m)
                .filter(|r| r.multiplicity > 0)
                .map(|r| (m, r.omega))
        })
        .collect()
}

/// Modes of `family` whose frequency ties the lowest one.
fn cheapest(spectrum: &NormalModeSpectrum, family: &[Mode]) -> Vec<Mode> {
    let modes = existing(spectrum, family);
    let low = modes.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    modes
        .into_iter()
        .filter(|&(_, w)| (w - low).abs() <= FREQUENCY_TIE_TOLERANCE * low.abs())
        .map(|(m, _)| m)
        .collect()
}

fn occupancies_over(
    radial: u32,
    angular: u32,
    radial_modes: &[Mode],
    angular_modes: &[Mode],
) -> Vec<OccupancyState> {
    let mut out = Vec::new();
    for r in compositions(radial, radial_modes.len()) {
        for a in compositions(angular, angular_modes.len()) {
            let mut s = OccupancyState::default();
            for (m, v) in radial_modes.iter().zip(&r) {
                s.set(*m, *v);
            }
            for (m, v) in angular_modes.iter().zip(&a) {
                s.set(*m, *v);
            }
            out.push(s);
        }
    }
    out
}

/// Every admissible occupancy for `config` that puts its quanta on the
/// cheapest radial and angular modes (all splits when frequencies tie).
pub fn optimal_occupancies(
    config: &HOConfiguration,
    spectrum: &NormalModeSpectrum,
) -> Vec<OccupancyState> {
    if !config.is_admissible() {
        return Vec::new();
    }
    occupancies_over(
        config.radial_sum / 2,
        config.angular_sum / 2,
        &cheapest(spectrum, &Mode::RADIAL),
        &cheapest(spectrum, &Mode::ANGULAR),
    )
}

/// Every admissible occupancy for `config` over all existing modes.
pub fn all_occupancies(
    config: &HOConfiguration,
    spectrum: &NormalModeSpectrum,
) -> Vec<OccupancyState> {
    if !config.is_admissible() {
        return Vec::new();
    }
    let radial: Vec<Mode> = existing(spectrum, &Mode::RADIAL)
        .into_iter()
        .map(|m| m.0)
        .collect();
    let angular: Vec<Mode> = existing(spectrum, &Mode::ANGULAR)
        .into_iter()
        .map(|m| m.0)
        .collect();
    occupancies_over(
        config.radial_sum / 2,
        config.angular_sum / 2,
        &radial,
        &angular,
    )
}

/// All minimizers of `Σ n_μ ω̄_μ` over the given fillings, ties included,
/// in deterministic order.
pub fn ground_candidates(
    configs: &[HOConfiguration],
    spectrum: &NormalModeSpectrum,
) -> Result<Vec<(OccupancyState, HOConfiguration)>> {
    let mut all: Vec<(f64, OccupancyState, &HOConfiguration)> = Vec::new();
    for c in configs {
        for occ in optimal_occupancies(c, spectrum) {
            all.push((occ.excitation(spectrum), occ, c));
        }
    }
    if all.is_empty() {
        let (n_up, n_down) = configs
            .first()
            .map_or((0, 0), |c| (c.count(Spin::Up), c.count(Spin::Down)));
        return Err(Error::PauliInfeasible { n_up, n_down });
    }
    let best = all.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
    let tol = FREQUENCY_TIE_TOLERANCE * best.abs().max(1e-300);
    Ok(all
        .into_iter()
        .filter(|x| x.0 - best <= tol)
        .map(|(_, o, c)| (o, c.clone()))
        .collect())
}

/// The minimal-energy admissible occupancy and its source filling.
pub fn select_ground_occupancy(
    configs: &[HOConfiguration],
    spectrum: &NormalModeSpectrum,
) -> Result<(OccupancyState, HOConfiguration)> {
    Ok(ground_candidates(configs, spectrum)?.swap_remove(0))
}

/// One level of the harmonic-order spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumLevel {
    /// `ħω_ho`.
    pub energy: f64,
    pub degeneracy: u128,
    pub occupancy: OccupancyState,
    pub configuration: HOConfiguration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTable {
    pub levels: Vec<SpectrumLevel>,
    pub e_max: f64,
    pub ground_energy: f64,
    /// Smallest energy step `δ·min ω̄` in `ħω_ho`.
    pub quantum: f64,
    /// Levels in `(e_max, e_max + quantum]`, cut by the truncation.
    pub boundary_count: usize,
    /// `(energy, degeneracy)` of the cut boundary levels.
    pub boundary: Vec<(f64, u128)>,
}

impl SpectrumTable {
    pub fn ground_degeneracy(&self) -> u128 {
        let tol = 1e-9 * self.ground_energy.abs().max(1.0);
        self.levels
            .iter()
            .take_while(|l| l.energy - self.ground_energy <= tol)
            .map(|l| l.degeneracy)
            .sum()
    }
}

/// Levels up to `e_max` (`ħω_ho`), sorted by energy.
pub fn enumerate_spectrum(
    minimum: &SymmetricMinimum,
    spectrum: &NormalModeSpectrum,
    spec: &SystemSpec,
    e_max: f64,
) -> Result<SpectrumTable> {
    let n = spec.n_particles();
    if spectrum.n != n {
        return Err(Error::DimensionMismatch(format!(
            "spectrum for N = {} used with N = {n}",
            spectrum.n
        )));
    }
    let frame = spec.frame()?;
    let energy_of = |occ: &OccupancyState| -> Result<f64> {
        Ok(crate::assembler::assemble_energy(minimum, spectrum, occ, &frame)?.total_unscaled)
    };
    let (ground_configs, _) = lowest_admissible_configurations(spec.n_up, spec.n_down)?;
    let (ground_occ, _) = select_ground_occupancy(&ground_configs, spectrum)?;
    let ground_energy = energy_of(&ground_occ)?;
    if !(e_max >= ground_energy) {
        return Err(Error::InvalidInput(format!(
            "e_max = {e_max} lies below the ground energy {ground_energy}"
        )));
    }
    let zero = energy_of(&OccupancyState::default())?;
    let omega_min = spectrum
        .roots
        .iter()
        .filter(|r| r.multiplicity > 0)
        .map(|r| r.omega)
        .fold(f64::INFINITY, f64::min);
    let quantum = frame.unscale_energy(frame.delta * omega_min);
    let cutoff = e_max + quantum;
    let max_quanta = ((cutoff - zero) / quantum + 1e-9).floor().max(0.0) as u32;
    let slack = 1e-12 * cutoff.abs().max(1.0);

    let mut levels = Vec::new();
    for config in configurations_up_to(spec.n_up, spec.n_down, 2 * max_quanta) {
        for occ in all_occupancies(&config, spectrum) {
            let energy = energy_of(&occ)?;
            if energy > cutoff + slack {
                continue;
            }
            let degeneracy = occ.degeneracy(n).ok_or_else(|| {
                Error::InvalidInput(format!("degeneracy of {occ} overflows 128 bits"))
            })?;
            levels.push(SpectrumLevel {
                energy,
                degeneracy,
                occupancy: occ,
                configuration: config.clone(),
            });
        }
    }
    levels.sort_by(|a, b| {
        a.energy
            .total_cmp(&b.energy)
            .then(a.occupancy.cmp(&b.occupancy))
    });
    let split = levels.partition_point(|l| l.energy <= e_max + slack);
    let boundary: Vec<(f64, u128)> = levels[split..]
        .iter()
        .map(|l| (l.energy, l.degeneracy))
        .collect();
    levels.truncate(split);
    Ok(SpectrumTable {
        levels,
        e_max,
        ground_energy,
        quantum,
        boundary_count: boundary.len(),
        boundary,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionFunction {
    pub beta: f64,
    /// `Σ g_k exp(-β(E_k - E_0))` over the included levels.
    pub z: f64,
    /// Geometric estimate of the omitted tail from the boundary levels.
    pub tail_bound: f64,
    pub tail_exceeds_tolerance: bool,
}

/// Ground-referenced partition function of a truncated spectrum.
pub fn partition_function(table: &SpectrumTable, beta: f64) -> Result<PartitionFunction> {
    if !(beta > 0.0) {
        return Err(Error::InvalidInput(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let e0 = table.ground_energy;
    let z = table
        .levels
        .iter()
        .map(|l| l.degeneracy as f64 * (-beta * (l.energy - e0)).exp())
        .sum::<f64>();
    let edge: f64 = table
        .boundary
        .iter()
        .map(|&(e, g)| g as f64 * (-beta * (e - e0)).exp())
        .sum();
    let ratio = (-beta * table.quantum).exp();
    let tail_bound = if ratio < 1.0 {
        edge / (1.0 - ratio)
    } else {
        f64::INFINITY
    };
    let tail_exceeds_tolerance = tail_bound > 1e-6 * z;
    if tail_exceeds_tolerance {
        log::warn!(
            "partition function at beta = {beta}: truncation tail {tail_bound:e} exceeds 1e-6 Z (Z = {z:e})"
        );
    }
    Ok(PartitionFunction {
        beta,
        z,
        tail_bound,
        tail_exceeds_tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::ModeRoot;

    fn fake_spectrum(n: usize, omegas: [f64; 5]) -> NormalModeSpectrum {
        let roots = Mode::ALL
            .iter()
            .filter(|m| m.multiplicity(n) > 0)
            .map(|&m| ModeRoot {
                mode: m,
                lambda: omegas[m.index()].powi(2),
                omega: omegas[m.index()],
                multiplicity: m.multiplicity(n),
                radial_weight: 0.0,
            })
            .collect();
        NormalModeSpectrum { n, roots, v0: 0.0 }
    }

    fn sums(cs: &[HOConfiguration]) -> Vec<(u32, u32)> {
        cs.iter().map(constraint_sums).collect()
    }

    #[test]
    fn two_particles_fill_the_s_shell() {
        assert_eq!(sums(&fill_shells(1, 1)), vec![(0, 0)]);
    }

    #[test]
    fn eight_particles_close_the_p_shell() {
        let cs = fill_shells(4, 4);
        assert_eq!(sums(&cs), vec![(0, 6)]);
        assert_eq!(cs[0].summary(), "up[0s1 0p3] down[0s1 0p3]");
    }

    #[test]
    fn six_particles_put_two_p_per_spin() {
        assert_eq!(sums(&fill_shells(3, 3)), vec![(0, 4)]);
    }

    #[test]
    fn sixteen_particles_split_the_sd_shell() {
        // Four shell-2 particles per spin, 0 or 1 of them in 1s.
        let cs = fill_shells(8, 8);
        assert_eq!(sums(&cs), vec![(0, 22), (2, 20), (4, 18)]);
        assert!(cs.iter().all(|c| c.shell_energy == 22));
    }

    #[test]
    fn fill_shells_matches_brute_force_placement() {
        // Place particles into individual (ν, l, m) states explicitly.
        fn brute(k: usize) -> BTreeSet<(u32, u32)> {
            let states: Vec<(u32, u32)> = Orbital::up_to(4)
                .into_iter()
                .flat_map(|o| std::iter::repeat_n((2 * o.nu, o.l), o.capacity() as usize))
                .collect();
            let emin = min_shell_energy(k);
            let mut out = BTreeSet::new();
            fn rec(
                s: &[(u32, u32)],
                k: usize,
                start: usize,
                r: u32,
                a: u32,
                emin: u32,
                out: &mut BTreeSet<(u32, u32)>,
            ) {
                if r + a > emin {
                    return;
                }
                if k == 0 {
                    if r + a == emin {
                        out.insert((r, a));
                    }
                    return;
                }
                for i in start..s.len() {
                    rec(s, k - 1, i + 1, r + s[i].0, a + s[i].1, emin, out);
                }
            }
            rec(&states, k, 0, 0, 0, emin, &mut out);
            out
        }
        for k in 0..=12 {
            let ours: BTreeSet<(u32, u32)> = species_options(k, min_shell_energy(k))
                .into_keys()
                .collect();
            assert_eq!(ours, brute(k), "k = {k}");
        }
    }

    #[test]
    fn promotion_raises_radial_sum() {
        let ground = fill_shells(1, 1).remove(0);
        let promoted = HOConfiguration::new(vec![
            OrbitalOccupation {
                spin: Spin::Up,
                orbital: Orbital { nu: 1, l: 0 },
                count: 1,
            },
            OrbitalOccupation {
                spin: Spin::Down,
                orbital: Orbital { nu: 0, l: 0 },
                count: 1,
            },
        ])
        .unwrap();
        assert_eq!(promoted.radial_sum, ground.radial_sum + 2);
        assert_eq!(promoted.angular_sum, ground.angular_sum);
    }

    #[test]
    fn capacity_is_enforced() {
        let bad = HOConfiguration::new(vec![OrbitalOccupation {
            spin: Spin::Up,
            orbital: Orbital { nu: 0, l: 1 },
            count: 4,
        }]);
        assert!(bad.is_err());
    }

    #[test]
    fn min_shell_energies() {
        assert_eq!(min_shell_energy(0), 0);
        assert_eq!(min_shell_energy(1), 0);
        assert_eq!(min_shell_energy(4), 3);
        assert_eq!(min_shell_energy(10), 3 + 12);
        assert_eq!(min_shell_energy(15), 3 + 12 + 15);
    }

    #[test]
    fn ground_occupancy_for_two_is_empty() {
        let s = fake_spectrum(2, [3.0, 2.0, 0.0, 1.5, 0.0]);
        let (occ, _) = select_ground_occupancy(&fill_shells(1, 1), &s).unwrap();
        assert_eq!(occ.total_quanta(), 0);
    }

    #[test]
    fn eight_particles_load_the_phonon_mode() {
        let s = fake_spectrum(8, [3.0, 2.5, 2.9, 2.0, 1.7]);
        let (occ, c) = select_ground_occupancy(&fill_shells(4, 4), &s).unwrap();
        assert_eq!(occ.as_array(), [0, 0, 0, 0, 3]);
        assert!(occ.satisfies(&c));
    }

    #[test]
    fn degenerate_frequencies_split_every_way() {
        let s = fake_spectrum(8, [4.0; 5]);
        let cands = ground_candidates(&fill_shells(4, 4), &s).unwrap();
        // Three angular quanta over three tied modes: C(5, 2) splits.
        assert_eq!(cands.len(), 10);
        let e: Vec<f64> = cands.iter().map(|(o, _)| o.excitation(&s)).collect();
        assert!(e.iter().all(|&x| x == e[0]));
    }

    #[test]
    fn odd_angular_sum_is_infeasible() {
        let s = fake_spectrum(7, [4.0; 5]);
        let cs = fill_shells(4, 3);
        assert_eq!(sums(&cs), vec![(0, 5)]);
        assert!(matches!(
            select_ground_occupancy(&cs, &s),
            Err(Error::PauliInfeasible { n_up: 4, n_down: 3 })
        ));
        let (admissible, promotion) = lowest_admissible_configurations(4, 3).unwrap();
        assert_eq!(promotion, 1);
        assert!(admissible
            .iter()
            .all(|c| c.is_admissible() && c.shell_energy == 6));
    }

    #[test]
    fn degeneracy_examples() {
        let mut o = OccupancyState::default();
        assert_eq!(o.degeneracy(10), Some(1));
        o.set(Mode::Two, 1);
        assert_eq!(o.degeneracy(10), Some(35));
        let mut o = OccupancyState::default();
        o.set(Mode::OnePlus, 2);
        assert_eq!(o.degeneracy(5), Some(10));
        let mut o = OccupancyState::default();
        o.set(Mode::Two, 1);
        assert_eq!(o.degeneracy(3), Some(0));
    }

    #[test]
    fn multiset_counts() {
        assert_eq!(multiset_count(35, 1), Some(35));
        assert_eq!(multiset_count(4, 2), Some(10));
        assert_eq!(multiset_count(1, 7), Some(1));
        assert_eq!(multiset_count(405, 3), Some(405 * 406 * 407 / 6));
    }

    #[test]
    fn compositions_are_complete() {
        assert_eq!(compositions(3, 3).len(), 10);
        assert_eq!(compositions(0, 2), vec![vec![0, 0]]);
        assert!(compositions(3, 2)
            .iter()
            .all(|c| c.iter().sum::<u32>() == 3));
    }

    #[test]
    fn occupancy_serializes_as_mode_map() {
        let o = OccupancyState::new([1, 0, 2, 0, 3]);
        let text = serde_json::to_string(&o).unwrap();
        assert_eq!(text, r#"{"0+":1,"0-":0,"1+":2,"1-":0,"2":3}"#);
        assert_eq!(serde_json::from_str::<OccupancyState>(&text).unwrap(), o);
    }

    fn table(levels: &[(f64, u128)], boundary: &[(f64, u128)], quantum: f64) -> SpectrumTable {
        let ground = HOConfiguration::new(Vec::new()).unwrap();
        SpectrumTable {
            levels: levels
                .iter()
                .map(|&(energy, degeneracy)| SpectrumLevel {
                    energy,
                    degeneracy,
                    occupancy: OccupancyState::default(),
                    configuration: ground.clone(),
                })
                .collect(),
            e_max: levels.last().unwrap().0,
            ground_energy: levels[0].0,
            quantum,
            boundary_count: boundary.len(),
            boundary: boundary.to_vec(),
        }
    }

    #[test]
    fn partition_single_level() {
        let t = table(&[(3.0, 1)], &[], 1.0);
        for beta in [0.1, 1.0, 50.0] {
            assert_eq!(partition_function(&t, beta).unwrap().z, 1.0);
        }
    }

    #[test]
    fn partition_two_levels_closed_form() {
        let t = table(&[(2.0, 1), (2.7, 35)], &[], 0.7);
        for beta in [0.3, 1.0, 4.0] {
            let z = partition_function(&t, beta).unwrap().z;
            let exact = 1.0 + 35.0 * (-beta * 0.7f64).exp();
            assert!((z - exact).abs() < 1e-14 * exact);
        }
        assert!(partition_function(&t, 0.0).is_err());
    }

    #[test]
    fn partition_tail_flag() {
        let t = table(&[(0.0, 1)], &[(1.0, 1000)], 1.0);
        assert!(partition_function(&t, 0.1).unwrap().tail_exceeds_tolerance);
        assert!(!partition_function(&t, 40.0).unwrap().tail_exceeds_tolerance);
    }
}

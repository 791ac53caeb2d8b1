//! Energy assembly through harmonic order, `N` sweeps, zero-range
//! extrapolation and comparison against reference tables.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::{BuildingBlocks, Cache};
use crate::error::{Error, Result, StageExt};
use crate::geometry::{find_symmetric_minimum, SymmetricMinimum};
use crate::interaction::{compute_scattering_length, InteractionModel, ScatteringResult};
use crate::model::{EnergyResult, Mode, ScalingFrame, SystemSpec};
use crate::pauli::{
    enumerate_spectrum, lowest_admissible_configurations, select_ground_occupancy, HOConfiguration,
    OccupancyState, SpectrumTable,
};
use crate::spectrum::{solve_normal_modes, NormalModeSpectrum};

/// `Ē = Ē∞ + δ[Σ_μ (n_μ + d_μ/2) ω̄_μ + v₀]`, unscaled with `frame`.
pub fn assemble_energy(
    minimum: &SymmetricMinimum,
    spectrum: &NormalModeSpectrum,
    occupancy: &OccupancyState,
    frame: &ScalingFrame,
) -> Result<EnergyResult> {
    if minimum.n != spectrum.n {
        return Err(Error::DimensionMismatch(format!(
            "minimum for N = {} combined with spectrum for N = {}",
            minimum.n, spectrum.n
        )));
    }
    let mut breakdown = BTreeMap::new();
    for mode in Mode::ALL {
        let d = mode.multiplicity(spectrum.n);
        let q = occupancy.get(mode);
        match spectrum.root(mode) {
            Some(root) => {
                if root.multiplicity != d {
                    return Err(Error::DimensionMismatch(format!(
                        "mode {mode} has multiplicity {} but N = {} requires {d}",
                        root.multiplicity, spectrum.n
                    )));
                }
                let term = (f64::from(q) + 0.5 * d as f64) * root.omega;
                breakdown.insert(mode, frame.delta * term);
            }
            None if d > 0 => {
                return Err(Error::DimensionMismatch(format!(
                    "spectrum lacks mode {mode}, which exists for N = {}",
                    spectrum.n
                )))
            }
            None if q > 0 => {
                return Err(Error::DimensionMismatch(format!(
                    "occupancy puts {q} quanta in mode {mode}, absent for N = {}",
                    spectrum.n
                )))
            }
            None => {}
        }
    }
    let v0_contribution = frame.delta * spectrum.v0;
    let harmonic_term_scaled = breakdown.values().sum::<f64>() + v0_contribution;
    let total_scaled = minimum.e_infinity + harmonic_term_scaled;
    Ok(EnergyResult {
        dimension: frame.dimension,
        e_infinity_scaled: minimum.e_infinity,
        harmonic_term_scaled,
        total_scaled,
        total_unscaled: frame.unscale_energy(total_scaled),
        breakdown,
        v0_contribution,
    })
}

/// Everything produced for one system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub spec: SystemSpec,
    pub scattering: Option<ScatteringResult>,
    pub blocks: BuildingBlocks,
    pub occupancy: OccupancyState,
    pub configuration: HOConfiguration,
    /// Shell units the selected filling lies above the minimal one; nonzero
    /// only when every minimal filling has odd `Σl`.
    pub pauli_promotion: u32,
    pub energy: EnergyResult,
    pub from_cache: bool,
}

/// The staged pipeline: tune, minimize, FG patterns, reduced eigensolve,
/// Pauli selection, assembly.
#[derive(Debug, Default)]
pub struct Pipeline {
    cache: Option<Cache>,
    oracle_check: bool,
}

impl Pipeline {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_cache(mut self, cache: Cache) -> Self {
        self.cache = Some(cache);
        self
    }

    /// Diagonalizes the dense `GF` for every fresh computation and fails on
    /// disagreement with the reduced solve.
    pub fn with_oracle_check(mut self, on: bool) -> Self {
        self.oracle_check = on;
        self
    }

    pub fn cache(&self) -> Option<&Cache> {
        self.cache.as_ref()
    }

    fn scattering(spec: &SystemSpec) -> Result<Option<ScatteringResult>> {
        match spec.interaction {
            InteractionModel::SquareWellContinued { range, .. } => {
                let depth = spec.interaction.physical_depth().unwrap_or_default();
                let s = compute_scattering_length(depth, range)?;
                if !s.resonant {
                    log::warn!(
                        "square well (R = {range}) is not at unitarity: 1/a_s = {:e}",
                        s.inverse_scattering_length
                    );
                }
                Ok(Some(s))
            }
            _ => Ok(None),
        }
    }

    /// Minimum, patterns and spectrum, from the cache when possible.
    pub fn building_blocks(&self, spec: &SystemSpec) -> Result<(BuildingBlocks, bool)> {
        if let Some(cache) = &self.cache {
            if let Some(entry) = cache.get(spec).stage("cache")? {
                return Ok((entry.payload, true));
            }
        }
        let model = &spec.interaction;
        let minimum = find_symmetric_minimum(model, spec).stage("minimize")?;
        let (patterns, spectrum) =
            solve_normal_modes(&minimum, model, spec, self.oracle_check).stage("modes")?;
        let blocks = BuildingBlocks {
            minimum,
            patterns,
            spectrum,
        };
        if let Some(cache) = &self.cache {
            cache.put(spec, blocks.clone()).stage("cache")?;
        }
        Ok((blocks, false))
    }

    pub fn run(&self, spec: &SystemSpec) -> Result<PipelineResult> {
        spec.validate().stage("validate")?;
        spec.interaction
            .validate_for(spec.n_particles())
            .stage("validate")?;
        let frame = spec.frame().stage("validate")?;
        let scattering = Self::scattering(spec).stage("tune")?;
        let (blocks, from_cache) = self.building_blocks(spec)?;
        let (configs, pauli_promotion) =
            lowest_admissible_configurations(spec.n_up, spec.n_down).stage("pauli")?;
        if pauli_promotion > 0 {
            log::warn!(
                "N = {} ({} up, {} down): every minimal filling has odd angular sum; using fillings {} shell unit(s) higher",
                spec.n_particles(),
                spec.n_up,
                spec.n_down,
                pauli_promotion
            );
        }
        let (occupancy, configuration) =
            select_ground_occupancy(&configs, &blocks.spectrum).stage("pauli")?;
        let energy = assemble_energy(&blocks.minimum, &blocks.spectrum, &occupancy, &frame)
            .stage("assemble")?;
        Ok(PipelineResult {
            spec: spec.clone(),
            scattering,
            blocks,
            occupancy,
            configuration,
            pauli_promotion,
            energy,
            from_cache,
        })
    }

    /// Energy with every normal mode in its ground state, ignoring the
    /// Pauli constraints.
    pub fn boson_reference(&self, spec: &SystemSpec) -> Result<EnergyResult> {
        spec.validate().stage("validate")?;
        let frame = spec.frame().stage("validate")?;
        let (blocks, _) = self.building_blocks(spec)?;
        assemble_energy(
            &blocks.minimum,
            &blocks.spectrum,
            &OccupancyState::default(),
            &frame,
        )
        .stage("assemble")
    }

    /// Harmonic-order levels up to `e_max` (`ħω_ho`).
    pub fn spectrum(&self, spec: &SystemSpec, e_max: f64) -> Result<SpectrumTable> {
        spec.validate().stage("validate")?;
        let (blocks, _) = self.building_blocks(spec)?;
        enumerate_spectrum(&blocks.minimum, &blocks.spectrum, spec, e_max).stage("pauli")
    }

    /// Ground energies for every `N` in `ns`, spins split as evenly as
    /// possible. Failures are recorded per row.
    pub fn sweep(&self, template: &SystemSpec, ns: &[usize]) -> Result<SweepTable> {
        if ns.is_empty() {
            return Err(Error::InvalidInput("empty particle-number list".into()));
        }
        let mut ns = ns.to_vec();
        ns.sort_unstable();
        ns.dedup();
        let rows: Vec<SweepRow> = ns
            .par_iter()
            .map(|&n| {
                let spec = SystemSpec {
                    n_up: n.div_ceil(2),
                    n_down: n / 2,
                    ..template.clone()
                };
                match self.run(&spec) {
                    Ok(r) => SweepRow::from_result(&r),
                    Err(e) => SweepRow::failed(&spec, &e),
                }
            })
            .collect();
        Ok(SweepTable::new(rows))
    }
}

/// Share of sign changes in the detrended first differences above which a
/// sweep counts as odd/even staggered.
pub const STAGGERING_THRESHOLD: f64 = 0.75;

/// One row of an `N` sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub n_up: usize,
    pub n_down: usize,
    /// `ħω_ho`; absent when the pipeline failed.
    pub energy: Option<f64>,
    pub e_infinity_scaled: Option<f64>,
    pub harmonic_term_scaled: Option<f64>,
    /// `E(N) - E(N-1)` when both rows succeeded and `N-1` is in the table.
    pub first_difference: Option<f64>,
    pub r_infinity: Option<f64>,
    pub gamma_infinity: Option<f64>,
    #[serde(rename = "n_0+")]
    pub n_zero_plus: Option<u32>,
    #[serde(rename = "n_0-")]
    pub n_zero_minus: Option<u32>,
    #[serde(rename = "n_1+")]
    pub n_one_plus: Option<u32>,
    #[serde(rename = "n_1-")]
    pub n_one_minus: Option<u32>,
    #[serde(rename = "n_2")]
    pub n_two: Option<u32>,
    pub pauli_promotion: Option<u32>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn from_result(r: &PipelineResult) -> Self {
        let o = r.occupancy.as_array();
        Self {
            n: r.spec.n_particles(),
            n_up: r.spec.n_up,
            n_down: r.spec.n_down,
            energy: Some(r.energy.total_unscaled),
            e_infinity_scaled: Some(r.energy.e_infinity_scaled),
            harmonic_term_scaled: Some(r.energy.harmonic_term_scaled),
            first_difference: None,
            r_infinity: Some(r.blocks.minimum.r_infinity),
            gamma_infinity: Some(r.blocks.minimum.gamma_infinity),
            n_zero_plus: Some(o[0]),
            n_zero_minus: Some(o[1]),
            n_one_plus: Some(o[2]),
            n_one_minus: Some(o[3]),
            n_two: Some(o[4]),
            pauli_promotion: Some(r.pauli_promotion),
            error: None,
        }
    }

    pub fn failed(spec: &SystemSpec, e: &Error) -> Self {
        Self {
            n: spec.n_particles(),
            n_up: spec.n_up,
            n_down: spec.n_down,
            energy: None,
            e_infinity_scaled: None,
            harmonic_term_scaled: None,
            first_difference: None,
            r_infinity: None,
            gamma_infinity: None,
            n_zero_plus: None,
            n_zero_minus: None,
            n_one_plus: None,
            n_one_minus: None,
            n_two: None,
            pauli_promotion: None,
            error: Some(e.to_string()),
        }
    }

    pub fn occupancy(&self) -> Option<OccupancyState> {
        Some(OccupancyState::new([
            self.n_zero_plus?,
            self.n_zero_minus?,
            self.n_one_plus?,
            self.n_one_minus?,
            self.n_two?,
        ]))
    }
}

/// Shape of `E(N)` over consecutive particle numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepDiagnostics {
    /// Every available first difference is positive.
    pub monotone_increasing: bool,
    /// `alternation_fraction` reaches [`STAGGERING_THRESHOLD`].
    pub staggering: bool,
    /// `E(N+1) - 2E(N) + E(N-1)` for each interior `N` with both neighbours.
    pub second_differences: Vec<(usize, f64)>,
    /// Share of consecutive `N` at which the detrended first difference
    /// `ΔE(N) - [ΔE(N-1) + ΔE(N+1)]/2` changes sign.
    pub alternation_fraction: f64,
    /// Mean first difference into even `N` minus that into odd `N`.
    pub even_odd_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub diagnostics: SweepDiagnostics,
}

impl SweepTable {
    /// Sorts rows by `N` and fills in differences and diagnostics.
    pub fn new(mut rows: Vec<SweepRow>) -> Self {
        rows.sort_by_key(|r| r.n);
        let energy: BTreeMap<usize, f64> =
            rows.iter().filter_map(|r| Some((r.n, r.energy?))).collect();
        for row in &mut rows {
            row.first_difference = match (
                row.energy,
                row.n.checked_sub(1).and_then(|m| energy.get(&m)),
            ) {
                (Some(e), Some(prev)) => Some(e - prev),
                _ => None,
            };
        }
        let diffs: Vec<(usize, f64)> = rows
            .iter()
            .filter_map(|r| Some((r.n, r.first_difference?)))
            .collect();
        let second_differences: Vec<(usize, f64)> = energy
            .iter()
            .filter_map(|(&n, &e)| {
                let lo = energy.get(&n.checked_sub(1)?)?;
                let hi = energy.get(&(n + 1))?;
                Some((n, hi - 2.0 * e + lo))
            })
            .collect();
        let d: BTreeMap<usize, f64> = diffs.iter().copied().collect();
        let detrended: Vec<(usize, f64)> = d
            .iter()
            .filter_map(|(&n, &v)| {
                let lo = d.get(&n.checked_sub(1)?)?;
                let hi = d.get(&(n + 1))?;
                Some((n, v - 0.5 * (lo + hi)))
            })
            .collect();
        let pairs: Vec<bool> = detrended
            .windows(2)
            .filter(|w| w[1].0 == w[0].0 + 1)
            .map(|w| w[0].1 * w[1].1 < 0.0)
            .collect();
        let alternation_fraction = if pairs.is_empty() {
            0.0
        } else {
            pairs.iter().filter(|&&b| b).count() as f64 / pairs.len() as f64
        };
        let mean = |even: bool| {
            let v: Vec<f64> = diffs
                .iter()
                .filter(|(n, _)| (n % 2 == 0) == even)
                .map(|d| d.1)
                .collect();
            if v.is_empty() {
                f64::NAN
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        let diagnostics = SweepDiagnostics {
            monotone_increasing: diffs.iter().all(|d| d.1 > 0.0),
            second_differences,
            staggering: alternation_fraction >= STAGGERING_THRESHOLD,
            alternation_fraction,
            even_odd_gap: mean(true) - mean(false),
        };
        Self { rows, diagnostics }
    }

    pub fn energies(&self) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter_map(|r| Some((r.n, r.energy?)))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let rows = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<SweepRow>, _>>()?;
        Ok(Self::new(rows))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Two-column `N E` series followed by a blank line and the `N ΔE` series.
    pub fn write_plot_series<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# N E")?;
        for (n, e) in self.energies() {
            writeln!(w, "{n} {e}")?;
        }
        writeln!(w)?;
        writeln!(w, "# N dE")?;
        for r in &self.rows {
            if let Some(d) = r.first_difference {
                writeln!(w, "{} {d}", r.n)?;
            }
        }
        Ok(())
    }
}

/// Residual RMS above which the linear fit in `R` is replaced by a quadratic.
pub const LINEAR_FIT_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroRangeFit {
    /// Extrapolated `E(R → 0)`.
    pub e0: f64,
    pub slope: f64,
    /// Coefficient of `R²` when the quadratic fallback was used.
    pub curvature: Option<f64>,
    /// RMS residual of the accepted fit.
    pub residual: f64,
    /// `E(R)` is not monotone over the sorted ranges.
    pub non_monotone: bool,
    pub points: Vec<(f64, f64)>,
}

fn least_squares(points: &[(f64, f64)], degree: usize) -> Result<(Vec<f64>, f64)> {
    let m = points.len();
    let a = nalgebra::DMatrix::from_fn(m, degree + 1, |i, j| points[i].0.powi(j as i32));
    let b = nalgebra::DVector::from_iterator(m, points.iter().map(|p| p.1));
    let svd = a.clone().svd(true, true);
    let coef = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::InvalidInput(format!("least-squares fit failed: {e}")))?;
    let resid = &a * &coef - &b;
    Ok((
        coef.iter().copied().collect(),
        (resid.norm_squared() / m as f64).sqrt(),
    ))
}

/// Fits `E(R) = E₀ + cR`, falling back to `E₀ + cR + c₂R²` when the linear
/// residual exceeds [`LINEAR_FIT_TOLERANCE`].
pub fn fit_zero_range(points: &[(f64, f64)]) -> Result<ZeroRangeFit> {
    if points.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "zero-range extrapolation needs at least 3 ranges, got {}",
            points.len()
        )));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.windows(2).any(|w| w[0].0 == w[1].0) || pts[0].0 <= 0.0 {
        return Err(Error::InvalidInput(
            "ranges must be positive and distinct".into(),
        ));
    }
    let steps: Vec<f64> = pts.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let non_monotone = !(steps.iter().all(|&d| d >= 0.0) || steps.iter().all(|&d| d <= 0.0));
    if non_monotone {
        log::warn!("E(R) is not monotone over the fitted ranges");
    }
    let (lin, lin_res) = least_squares(&pts, 1)?;
    let (coef, residual, curvature) = if lin_res > LINEAR_FIT_TOLERANCE {
        let (q, q_res) = least_squares(&pts, 2)?;
        (q.clone(), q_res, Some(q[2]))
    } else {
        (lin, lin_res, None)
    };
    Ok(ZeroRangeFit {
        e0: coef[0],
        slope: coef[1],
        curvature,
        residual,
        non_monotone,
        points: pts,
    })
}

/// Runs the pipeline at each range and fits `E(R)`. Square-well models are
/// re-tuned to unitarity at every range; other models ignore `R`.
pub fn extrapolate_zero_range(
    pipeline: &Pipeline,
    template: &SystemSpec,
    ranges: &[f64],
) -> Result<ZeroRangeFit> {
    let points = ranges
        .par_iter()
        .map(|&r| {
            let mut spec = template.clone();
            if let InteractionModel::SquareWellContinued { .. } = spec.interaction {
                spec.interaction = InteractionModel::unitary(r).stage("tune")?;
            }
            Ok((r, pipeline.run(&spec)?.energy.total_unscaled))
        })
        .collect::<Result<Vec<_>>>()?;
    fit_zero_range(&points)
}

/// One reference energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    #[serde(rename = "N")]
    pub n_particles: usize,
    #[serde(rename = "E_ref")]
    pub energy_ref: f64,
    #[serde(rename = "sigma")]
    pub uncertainty: f64,
    #[serde(rename = "source")]
    pub source_label: String,
}

impl BenchmarkRecord {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::InvalidInput(format!(
                "reference for N = {} (need N >= 2)",
                self.n_particles
            )));
        }
        if !(self.uncertainty >= 0.0) || !self.energy_ref.is_finite() {
            return Err(Error::InvalidInput(format!(
                "reference for N = {} has invalid energy or uncertainty",
                self.n_particles
            )));
        }
        Ok(())
    }
}

/// Reads a CSV with columns `N, E_ref, sigma, source`.
pub fn load_references(path: impl AsRef<Path>) -> Result<Vec<BenchmarkRecord>> {
    read_references(std::fs::File::open(path)?)
}

pub fn read_references<R: Read>(r: R) -> Result<Vec<BenchmarkRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        let rec: BenchmarkRecord = rec?;
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

/// Allowed deviation `σ + absolute + relative·|E_ref|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub absolute: f64,
    pub relative: f64,
}

impl Tolerance {
    /// Digitization limit for values read off a plot: ±0.3 ħω plus 5%.
    pub const DIGITIZED: Tolerance = Tolerance {
        absolute: 0.3,
        relative: 0.05,
    };

    pub const EXACT: Tolerance = Tolerance {
        absolute: 0.0,
        relative: 0.0,
    };
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub n: usize,
    pub energy: f64,
    pub energy_ref: f64,
    pub uncertainty: f64,
    pub source: String,
    /// `E - E_ref`.
    pub absolute: f64,
    /// `(E - E_ref)/|E_ref|`.
    pub relative: f64,
    pub allowed: f64,
    pub within: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub mean_absolute: f64,
    pub max_absolute: f64,
    pub rms: f64,
    /// Least-squares slope of `|relative|` against `N`; positive when the
    /// error grows with `N`.
    pub relative_trend: f64,
    pub all_within: bool,
}

pub fn compare(
    table: &SweepTable,
    references: &[BenchmarkRecord],
    tolerance: Tolerance,
) -> Result<ComparisonReport> {
    let energy: BTreeMap<usize, f64> = table.energies().into_iter().collect();
    let mut rows: Vec<ComparisonRow> = references
        .iter()
        .filter_map(|r| {
            let e = *energy.get(&r.n_particles)?;
            let absolute = e - r.energy_ref;
            let allowed =
                r.uncertainty + tolerance.absolute + tolerance.relative * r.energy_ref.abs();
            Some(ComparisonRow {
                n: r.n_particles,
                energy: e,
                energy_ref: r.energy_ref,
                uncertainty: r.uncertainty,
                source: r.source_label.clone(),
                absolute,
                relative: absolute / r.energy_ref.abs(),
                allowed,
                within: absolute.abs() <= allowed,
            })
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    rows.sort_by(|a, b| (a.n, &a.source).cmp(&(b.n, &b.source)));
    let m = rows.len() as f64;
    let abs: Vec<f64> = rows.iter().map(|r| r.absolute.abs()).collect();
    let relative_trend = if rows.len() >= 2 {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| (r.n as f64, r.relative.abs()))
            .collect();
        let xm = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let ym = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxx: f64 = pts.iter().map(|p| (p.0 - xm).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
        if sxx > 0.0 {
            sxy / sxx
        } else {
            0.0
        }
    } else {
        0.0
    };
    Ok(ComparisonReport {
        mean_absolute: abs.iter().sum::<f64>() / m,
        max_absolute: abs.iter().copied().fold(0.0, f64::max),
        rms: (abs.iter().map(|a| a * a).sum::<f64>() / m).sqrt(),
        relative_trend,
        all_within: rows.iter().all(|r| r.within),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pipeline() -> Pipeline {
        Pipeline::new()
    }

    #[test]
    fn ideal_gas_six_particles() {
        let spec = SystemSpec::balanced(6, InteractionModel::NonInteracting);
        let r = pipeline().run(&spec).unwrap();
        assert!((r.energy.total_unscaled - 13.0).abs() < 1e-10);
        assert_eq!(r.occupancy.total_quanta(), 2);
        assert_eq!(r.pauli_promotion, 0);
    }

    #[test]
    fn harmonic_pair_five_particles_boson_reference() {
        let spec = SystemSpec::balanced(5, InteractionModel::HarmonicPair { coupling: 0.1 });
        let e = pipeline().boson_reference(&spec).unwrap();
        let exact = 1.5 + 4.0 * 1.5 * 1.5f64.sqrt();
        assert!(
            (e.total_unscaled - exact).abs() < 1e-8,
            "{}",
            e.total_unscaled
        );
    }

    #[test]
    fn removing_a_quantum_lowers_energy_by_one_frequency() {
        let spec = SystemSpec::balanced(8, InteractionModel::unitary(0.01).unwrap());
        let r = pipeline().run(&spec).unwrap();
        let frame = spec.frame().unwrap();
        for mode in Mode::ALL {
            let q = r.occupancy.get(mode);
            if q == 0 {
                continue;
            }
            let mut fewer = r.occupancy;
            fewer.set(mode, q - 1);
            let e = assemble_energy(&r.blocks.minimum, &r.blocks.spectrum, &fewer, &frame).unwrap();
            let drop = r.energy.total_scaled - e.total_scaled;
            let w = r.blocks.spectrum.omega(mode).unwrap();
            assert!((drop - frame.delta * w).abs() < 1e-12);
        }
    }

    #[test]
    fn breakdown_sums_to_harmonic_term() {
        let spec = SystemSpec::balanced(10, InteractionModel::unitary(0.01).unwrap());
        let r = pipeline().run(&spec).unwrap();
        let sum: f64 = r.energy.breakdown.values().sum::<f64>() + r.energy.v0_contribution;
        assert!((sum - r.energy.harmonic_term_scaled).abs() < 1e-13);
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let p = pipeline();
        let a = p
            .run(&SystemSpec::balanced(4, InteractionModel::NonInteracting))
            .unwrap();
        let b = p
            .run(&SystemSpec::balanced(5, InteractionModel::NonInteracting))
            .unwrap();
        let frame = ScalingFrame::new(3, 1.0).unwrap();
        assert!(matches!(
            assemble_energy(&a.blocks.minimum, &b.blocks.spectrum, &a.occupancy, &frame),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn stage_tags_name_the_failing_stage() {
        let spec = SystemSpec::balanced(5, InteractionModel::HarmonicPair { coupling: -0.5 });
        let err = pipeline().run(&spec).unwrap_err();
        assert_eq!(err.stage(), Some("validate"));
        let spec = SystemSpec::new(0, 2, InteractionModel::NonInteracting);
        assert_eq!(pipeline().run(&spec).unwrap_err().stage(), Some("validate"));
    }

    #[test]
    fn linear_fit_recovers_generator() {
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&r| (r, 5.0 + 2.0 * r))
            .collect();
        let fit = fit_zero_range(&pts).unwrap();
        assert!((fit.e0 - 5.0).abs() < 1e-12);
        assert!((fit.slope - 2.0).abs() < 1e-10);
        assert!(fit.residual < 1e-12);
        assert!(fit.curvature.is_none());
        assert!(!fit.non_monotone);
    }

    #[test]
    fn quadratic_fallback_and_monotonicity_flag() {
        let pts: Vec<(f64, f64)> = [0.4, 0.2, 0.1, 0.05]
            .iter()
            .map(|&r| (r, 1.0 + r - 3.0 * r * r))
            .collect();
        let fit = fit_zero_range(&pts).unwrap();
        assert_eq!(fit.curvature.map(|c| (c + 3.0).abs() < 1e-9), Some(true));
        assert!((fit.e0 - 1.0).abs() < 1e-10);
        assert!(fit.non_monotone);
        assert!(fit_zero_range(&pts[..2]).is_err());
    }

    #[test]
    fn ideal_gas_extrapolation_has_zero_slope() {
        let spec = SystemSpec::balanced(6, InteractionModel::NonInteracting);
        let fit = extrapolate_zero_range(&pipeline(), &spec, &[0.08, 0.04, 0.02]).unwrap();
        assert!(fit.slope.abs() < 1e-10);
        assert!((fit.e0 - 13.0).abs() < 1e-10);
    }

    fn sweep(model: InteractionModel, ns: &[usize]) -> SweepTable {
        pipeline()
            .sweep(&SystemSpec::balanced(2, model), ns)
            .unwrap()
    }

    #[test]
    fn singleton_sweep() {
        let t = sweep(InteractionModel::NonInteracting, &[6]);
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].first_difference, None);
    }

    #[test]
    fn sweep_records_failures_and_continues() {
        let t = sweep(
            InteractionModel::HarmonicPair { coupling: -0.2 },
            &[3, 4, 6],
        );
        // 1 + Nλ > 0 fails from N = 5 upward only.
        assert!(t.rows[0].energy.is_some() && t.rows[1].energy.is_some());
        assert!(t.rows[2].energy.is_none() && t.rows[2].error.is_some());
    }

    #[test]
    fn sweep_csv_and_json_round_trip() {
        let t = sweep(InteractionModel::unitary(0.01).unwrap(), &[4, 5, 6, 7]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = SweepTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, t);
        let back = SweepTable::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
    }

    fn records(pairs: &[(usize, f64)]) -> Vec<BenchmarkRecord> {
        pairs
            .iter()
            .map(|&(n, e)| BenchmarkRecord {
                n_particles: n,
                energy_ref: e,
                uncertainty: 0.0,
                source_label: "test".into(),
            })
            .collect()
    }

    #[test]
    fn compare_identical_and_shifted() {
        let t = sweep(InteractionModel::NonInteracting, &[2, 4, 6, 8]);
        let e = t.energies();
        let same = compare(&t, &records(&e), Tolerance::EXACT).unwrap();
        assert!(same.rows.iter().all(|r| r.absolute == 0.0));
        assert!(same.all_within);
        let shifted: Vec<(usize, f64)> = e.iter().map(|&(n, v)| (n, v - 0.5)).collect();
        let rep = compare(&t, &records(&shifted), Tolerance::EXACT).unwrap();
        assert!(rep.rows.iter().all(|r| (r.absolute - 0.5).abs() < 1e-12));
        assert!(!rep.all_within);
        assert!(matches!(
            compare(&t, &records(&[(40, 1.0)]), Tolerance::DIGITIZED),
            Err(Error::EmptyOverlap)
        ));
    }

    #[test]
    fn reference_csv_parsing() {
        let text = "N,E_ref,sigma,source\n6, 8.0, 0.1, GFMC\n8,11.0,0.0,AFMC\n";
        let refs = read_references(text.as_bytes()).unwrap();
        assert_eq!(refs.len(), 2);
        assert_eq!(refs[0].source_label, "GFMC");
        assert!(read_references("N,E_ref,sigma,source\n6,8.0,-1,X\n".as_bytes()).is_err());
        assert!(read_references("N,E_ref,sigma,source\n1,8.0,0,X\n".as_bytes()).is_err());
    }

    #[test]
    fn cache_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SystemSpec::balanced(9, InteractionModel::unitary(0.01).unwrap());
        let first = Pipeline::new()
            .with_cache(Cache::open(dir.path()).unwrap())
            .run(&spec)
            .unwrap();
        assert!(!first.from_cache);
        // A fresh process-level cache reads the file back.
        let second = Pipeline::new()
            .with_cache(Cache::open(dir.path()).unwrap())
            .run(&spec)
            .unwrap();
        assert!(second.from_cache);
        assert_eq!(first.blocks, second.blocks);
        assert_eq!(first.energy, second.energy);
        assert_eq!(
            first.energy.total_unscaled.to_bits(),
            second.energy.total_unscaled.to_bits()
        );
        let cache = Cache::open(dir.path()).unwrap();
        assert_eq!(cache.list().unwrap().len(), 1);
        assert_eq!(cache.clear().unwrap(), 1);
        assert!(cache.list().unwrap().is_empty());
    }
}

//! Harmonic-order normal modes at the symmetric minimum.
//!
//! Expanding about the minimum with displacements `q = q∞ + δ^½ x`, the
//! scaled Hamiltonian at order `δ` is `½ pᵀGp + ½ xᵀFx` with `F` the Hessian
//! of `V̄_eff(δ = 0)` and `G = 4·g(q∞)`, where `g` is the contravariant
//! metric of the Laplacian in internal coordinates:
//!
//! ```text
//! g(rᵢ, rᵢ)       = 1
//! g(γᵢⱼ, γᵢⱼ)     = (1 - γᵢⱼ²)(1/rᵢ² + 1/rⱼ²)
//! g(γᵢⱼ, γᵢₖ)     = (γⱼₖ - γᵢⱼγᵢₖ)/rᵢ²
//! ```
//!
//! and every other entry zero. At the symmetric point both matrices are
//! `S_N` invariant, so each is fixed by seven scalars (a [`BlockPattern`]) and
//! `GF` splits into a 2×2 problem in the `[N]` sector, a 2×2 problem in the
//! `[N-1,1]` sector and a scalar in the `[N-2,2]` sector.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    coordinates, symmetric_inverse_diagonal, Coord, Curvature, InternalCoordinates,
    SymmetricMinimum,
};
use crate::interaction::InteractionModel;
use crate::model::{Mode, ModeCharacter, SystemSpec};

/// Factor between the Laplacian metric and the `G` matrix in scaled units.
pub const KINETIC_SCALE: f64 = 4.0;

/// Largest allowed spread between representatives of one entry class.
pub const PATTERN_TOLERANCE: f64 = 1e-8;

/// Relative agreement required between reduced and dense eigenvalues.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

/// Absolute tolerance on `λ` when grouping dense eigenvalues.
pub const CLUSTER_TOLERANCE: f64 = 1e-9;

/// The seven distinct entries of an `S_N`-invariant matrix over radii and
/// pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockPattern {
    /// `(rᵢ, rᵢ)`.
    pub radial_diag: f64,
    /// `(rᵢ, rⱼ)`.
    pub radial_off: f64,
    /// `(γᵢⱼ, γᵢⱼ)`.
    pub pair_same: f64,
    /// `(γᵢⱼ, γᵢₖ)`.
    pub pair_share: f64,
    /// `(γᵢⱼ, γₖₗ)`.
    pub pair_disjoint: f64,
    /// `(rᵢ, γᵢⱼ)`.
    pub coupling_in: f64,
    /// `(rₖ, γᵢⱼ)`, `k ∉ {i, j}`.
    pub coupling_out: f64,
}

impl BlockPattern {
    /// Entry for a pair of coordinates.
    pub fn entry(&self, a: Coord, b: Coord) -> f64 {
        match (a, b) {
            (Coord::Radial(i), Coord::Radial(j)) => {
                if i == j {
                    self.radial_diag
                } else {
                    self.radial_off
                }
            }
            (Coord::Radial(k), Coord::Pair(i, j)) | (Coord::Pair(i, j), Coord::Radial(k)) => {
                if k == i || k == j {
                    self.coupling_in
                } else {
                    self.coupling_out
                }
            }
            (Coord::Pair(i, j), Coord::Pair(k, l)) => match shared(i, j, k, l) {
                2 => self.pair_same,
                1 => self.pair_share,
                _ => self.pair_disjoint,
            },
        }
    }

    /// Dense matrix in [`coordinates`] order.
    pub fn dense(&self, n: usize) -> DMatrix<f64> {
        let coords = coordinates(n);
        let p = coords.len();
        DMatrix::from_fn(p, p, |x, y| self.entry(coords[x], coords[y]))
    }

    /// Eigenvalues of the pair block on the `[N]`, `[N-1,1]` and `[N-2,2]`
    /// sectors.
    pub fn pair_eigenvalues(&self, n: usize) -> [f64; 3] {
        johnson_eigenvalues(self.pair_same, self.pair_share, self.pair_disjoint, n)
    }

    /// Symmetric-sector block in the basis (radial, pair), both normalized.
    fn sector_n(&self, n: usize) -> [[f64; 2]; 2] {
        let nf = n as f64;
        let rr = self.radial_diag + (nf - 1.0) * self.radial_off;
        let gg = self.pair_eigenvalues(n)[0];
        let rg =
            (2.0 * (nf - 1.0)).sqrt() * (self.coupling_in + 0.5 * (nf - 2.0) * self.coupling_out);
        [[rr, rg], [rg, gg]]
    }

    /// Standard-sector block in the basis (radial, pair). For `N = 2` the
    /// pair component does not exist and only `[0][0]` is meaningful.
    fn sector_standard(&self, n: usize) -> [[f64; 2]; 2] {
        let nf = n as f64;
        let rr = self.radial_diag - self.radial_off;
        let gg = self.pair_eigenvalues(n)[1];
        let rg = (nf - 2.0).max(0.0).sqrt() * (self.coupling_in - self.coupling_out);
        [[rr, rg], [rg, gg]]
    }
}

fn shared(i: usize, j: usize, k: usize, l: usize) -> usize {
    [k, l].iter().filter(|&&x| x == i || x == j).count()
}

/// Closed-form spectrum of `c₁I + c₂A₁ + c₃A₂` on the pairs of `n` objects,
/// where `A₁` joins pairs sharing one element and `A₂` joins disjoint pairs.
/// Returns the eigenvalues on the `[N]`, `[N-1,1]` and `[N-2,2]` sectors, with
/// multiplicities `1`, `N-1` and `N(N-3)/2`.
pub fn johnson_eigenvalues(c1: f64, c2: f64, c3: f64, n: usize) -> [f64; 3] {
    let nf = n as f64;
    [
        c1 + 2.0 * (nf - 2.0) * c2 + 0.5 * (nf - 2.0) * (nf - 3.0) * c3,
        c1 + (nf - 4.0) * c2 - (nf - 3.0) * c3,
        c1 - 2.0 * c2 + c3,
    ]
}

/// Multiplicities of the three Johnson sectors on the pairs of `n` objects.
pub fn johnson_multiplicities(n: usize) -> [usize; 3] {
    match n {
        0 | 1 => [0, 0, 0],
        2 => [1, 0, 0],
        3 => [1, 2, 0],
        n => [1, n - 1, n * (n - 3) / 2],
    }
}

/// `S_N`-invariant patterns of `F` and `G` at the symmetric minimum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FGPatterns {
    pub n: usize,
    pub f: BlockPattern,
    pub g: BlockPattern,
    /// Largest spread between representatives of one entry class.
    pub residual: f64,
}

/// One representative list per entry class; the first element defines the
/// pattern value, the rest check class independence.
fn representatives(n: usize) -> Vec<(Class, Vec<(Coord, Coord)>)> {
    use Coord::{Pair as P, Radial as R};
    let last = n - 1;
    let mut out = vec![
        (Class::RadialDiag, vec![(R(0), R(0)), (R(last), R(last))]),
        (Class::RadialOff, vec![(R(0), R(1)), (R(last), R(0))]),
        (
            Class::PairSame,
            vec![(P(0, 1), P(0, 1)), (P(last - 1, last), P(last - 1, last))],
        ),
        (
            Class::CouplingIn,
            vec![(R(0), P(0, 1)), (R(last), P(0, last))],
        ),
    ];
    if n >= 3 {
        out.push((
            Class::PairShare,
            vec![
                (P(0, 1), P(0, 2)),
                (P(0, 2), P(1, 2)),
                (P(last - 1, last), P(0, last)),
            ],
        ));
        out.push((
            Class::CouplingOut,
            vec![(R(2), P(0, 1)), (R(0), P(1, last))],
        ));
    }
    if n >= 4 {
        out.push((
            Class::PairDisjoint,
            vec![(P(0, 1), P(2, 3)), (P(0, last), P(1, last - 1))],
        ));
    }
    out
}

#[derive(Clone, Copy, Debug)]
enum Class {
    RadialDiag,
    RadialOff,
    PairSame,
    PairShare,
    PairDisjoint,
    CouplingIn,
    CouplingOut,
}

impl BlockPattern {
    fn set(&mut self, class: Class, v: f64) {
        match class {
            Class::RadialDiag => self.radial_diag = v,
            Class::RadialOff => self.radial_off = v,
            Class::PairSame => self.pair_same = v,
            Class::PairShare => self.pair_share = v,
            Class::PairDisjoint => self.pair_disjoint = v,
            Class::CouplingIn => self.coupling_in = v,
            Class::CouplingOut => self.coupling_out = v,
        }
    }
}

/// Entry of the kinetic matrix `G` at arbitrary coordinates.
pub fn kinetic_entry(coords: &InternalCoordinates, a: Coord, b: Coord) -> f64 {
    let r = &coords.radii;
    let g = &coords.gammas;
    let metric = match (a, b) {
        (Coord::Radial(i), Coord::Radial(j)) => {
            if i == j {
                1.0
            } else {
                0.0
            }
        }
        (Coord::Radial(_), Coord::Pair(..)) | (Coord::Pair(..), Coord::Radial(_)) => 0.0,
        (Coord::Pair(i, j), Coord::Pair(k, l)) => match shared(i, j, k, l) {
            2 => (1.0 - g[(i, j)].powi(2)) * (1.0 / r[i].powi(2) + 1.0 / r[j].powi(2)),
            1 => {
                let common = if i == k || i == l { i } else { j };
                let x = if i == common { j } else { i };
                let y = if k == common { l } else { k };
                (g[(x, y)] - g[(common, x)] * g[(common, y)]) / r[common].powi(2)
            }
            _ => 0.0,
        },
    };
    KINETIC_SCALE * metric
}

/// Dense `G` at arbitrary coordinates.
pub fn dense_kinetic(coords: &InternalCoordinates) -> DMatrix<f64> {
    let cs = coordinates(coords.n());
    let p = cs.len();
    DMatrix::from_fn(p, p, |x, y| kinetic_entry(coords, cs[x], cs[y]))
}

/// Samples the analytic `F` and `G` at the symmetric minimum, one entry per
/// class plus extra representatives for the invariance check.
pub fn build_fg_patterns(
    minimum: &SymmetricMinimum,
    model: &InteractionModel,
    spec: &SystemSpec,
) -> Result<FGPatterns> {
    let n = spec.n_particles();
    if minimum.n != n {
        return Err(Error::DimensionMismatch(format!(
            "minimum for N = {} used with N = {n}",
            minimum.n
        )));
    }
    let coords = minimum.coordinates();
    let curv = Curvature::new(&coords, model, spec)?;
    let mut f = BlockPattern::default();
    let mut g = BlockPattern::default();
    let mut residual: f64 = 0.0;
    for (class, reps) in representatives(n) {
        let mut fv = Vec::with_capacity(reps.len());
        let mut gv = Vec::with_capacity(reps.len());
        for (a, b) in reps {
            fv.push(curv.hessian_entry(a, b)?);
            gv.push(kinetic_entry(&coords, a, b));
        }
        for vals in [&fv, &gv] {
            let scale = vals[0].abs().max(1.0);
            for v in &vals[1..] {
                residual = residual.max((v - vals[0]).abs() / scale);
            }
        }
        f.set(class, fv[0]);
        g.set(class, gv[0]);
    }
    if residual > PATTERN_TOLERANCE {
        return Err(Error::SymmetryBroken { residual });
    }
    Ok(FGPatterns { n, f, g, residual })
}

/// Largest deviation of the dense analytic `F` and `G` from their pattern
/// reconstructions. Costs a full Hessian evaluation.
pub fn dense_pattern_residual(
    minimum: &SymmetricMinimum,
    model: &InteractionModel,
    spec: &SystemSpec,
    patterns: &FGPatterns,
) -> Result<f64> {
    let coords = minimum.coordinates();
    let f = Curvature::new(&coords, model, spec)?.hessian()?;
    let g = dense_kinetic(&coords);
    let fd = (f - patterns.f.dense(patterns.n)).amax();
    let gd = (g - patterns.g.dense(patterns.n)).amax();
    Ok(fd.max(gd))
}

/// One of the five distinct roots.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeRoot {
    pub mode: Mode,
    /// `λ_μ = ω̄_μ²`.
    pub lambda: f64,
    pub omega: f64,
    pub multiplicity: usize,
    /// Share of the normal coordinate lying along the radial direction of its
    /// sector; decides the `±` label.
    pub radial_weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalModeSpectrum {
    pub n: usize,
    /// Existing mode families in [`Mode`] order.
    pub roots: Vec<ModeRoot>,
    /// The constant `v₀` of the harmonic-order energy.
    pub v0: f64,
}

impl NormalModeSpectrum {
    pub fn root(&self, mode: Mode) -> Option<&ModeRoot> {
        self.roots.iter().find(|r| r.mode == mode)
    }

    pub fn omega(&self, mode: Mode) -> Option<f64> {
        self.root(mode).map(|r| r.omega)
    }

    pub fn multiplicity(&self, mode: Mode) -> usize {
        self.root(mode).map_or(0, |r| r.multiplicity)
    }

    pub fn character(&self, mode: Mode) -> ModeCharacter {
        mode.character()
    }

    pub fn modes(&self) -> impl Iterator<Item = Mode> + '_ {
        self.roots.iter().map(|r| r.mode)
    }

    pub fn with_v0(mut self, v0: f64) -> Self {
        self.v0 = v0;
        self
    }

    /// Every `λ` repeated by its multiplicity, ascending.
    pub fn eigenvalue_multiset(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .roots
            .iter()
            .flat_map(|r| std::iter::repeat_n(r.lambda, r.multiplicity))
            .collect();
        out.sort_by(f64::total_cmp);
        out
    }

    /// `Σ_μ d_μ ω̄_μ / 2`, the zero-point part of the harmonic term.
    pub fn zero_point(&self) -> f64 {
        self.roots
            .iter()
            .map(|r| 0.5 * r.multiplicity as f64 * r.omega)
            .sum()
    }
}

/// Eigen-decomposition of the symmetric 2×2 matrix `m`: eigenvalues in
/// ascending order with unit eigenvectors.
fn sym2_eigen(m: [[f64; 2]; 2]) -> [(f64, [f64; 2]); 2] {
    let mean = 0.5 * (m[0][0] + m[1][1]);
    let half = 0.5 * (m[0][0] - m[1][1]);
    let q = m[0][1];
    let rad = half.hypot(q);
    if rad == 0.0 {
        return [(mean, [1.0, 0.0]), (mean, [0.0, 1.0])];
    }
    let upper = if half >= 0.0 {
        [rad + half, q]
    } else {
        [q, rad - half]
    };
    let norm = upper[0].hypot(upper[1]);
    let upper = [upper[0] / norm, upper[1] / norm];
    let lower = [-upper[1], upper[0]];
    [(mean - rad, lower), (mean + rad, upper)]
}

/// Roots of `GF` for one 2×2 sector with their radial weights.
fn solve_sector(g: [[f64; 2]; 2], f: [[f64; 2]; 2]) -> Result<[(f64, f64); 2]> {
    // G = L Lᵀ; GF x = λx  <=>  (LᵀFL) y = λy with x = L y.
    let l00 = g[0][0].sqrt();
    let l10 = g[1][0] / l00;
    let l11 = (g[1][1] - l10 * l10).sqrt();
    if !(l00 > 0.0 && l11 > 0.0) {
        return Err(Error::InvalidInput(
            "kinetic sector block is not positive definite".into(),
        ));
    }
    let l = [[l00, 0.0], [l10, l11]];
    let mut fl = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            fl[i][j] = f[i][0] * l[0][j] + f[i][1] * l[1][j];
        }
    }
    let mut m = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = l[0][i] * fl[0][j] + l[1][i] * fl[1][j];
        }
    }
    m[0][1] = 0.5 * (m[0][1] + m[1][0]);
    m[1][0] = m[0][1];
    let pairs = sym2_eigen(m);
    Ok(pairs.map(|(lambda, y)| {
        let x = [l[0][0] * y[0], l[1][0] * y[0] + l[1][1] * y[1]];
        let w = x[0] * x[0] / (x[0] * x[0] + x[1] * x[1]);
        (lambda, w)
    }))
}

fn make_root(mode: Mode, lambda: f64, radial_weight: f64, n: usize) -> Result<ModeRoot> {
    if !(lambda > 0.0) {
        return Err(Error::ImaginaryFrequency { mode, lambda });
    }
    Ok(ModeRoot {
        mode,
        lambda,
        omega: lambda.sqrt(),
        multiplicity: mode.multiplicity(n),
        radial_weight,
    })
}

/// Labels the two roots of a mixed sector: the more radial one is `minus`.
fn label_pair(roots: [(f64, f64); 2], plus: Mode, minus: Mode, n: usize) -> Result<[ModeRoot; 2]> {
    let [(l0, w0), (l1, w1)] = roots;
    let (radial, angular) = if w0 >= w1 {
        ((l0, w0), (l1, w1))
    } else {
        ((l1, w1), (l0, w0))
    };
    Ok([
        make_root(plus, angular.0, angular.1, n)?,
        make_root(minus, radial.0, radial.1, n)?,
    ])
}

/// Five distinct roots from the sector-reduced problems; `v₀` is left at
/// zero and set with [`NormalModeSpectrum::with_v0`].
pub fn reduced_eigensolve(patterns: &FGPatterns) -> Result<NormalModeSpectrum> {
    let n = patterns.n;
    if n < 2 {
        return Err(Error::InvalidInput(
            "at least two particles are required".into(),
        ));
    }
    let (f, g) = (&patterns.f, &patterns.g);
    let mut roots = Vec::with_capacity(5);

    let sym = solve_sector(g.sector_n(n), f.sector_n(n))?;
    roots.extend(label_pair(sym, Mode::ZeroPlus, Mode::ZeroMinus, n)?);

    if n == 2 {
        // Only the antisymmetric radial coordinate exists in this sector.
        let lambda = g.sector_standard(n)[0][0] * f.sector_standard(n)[0][0];
        roots.push(make_root(Mode::OneMinus, lambda, 1.0, n)?);
    } else {
        let std = solve_sector(g.sector_standard(n), f.sector_standard(n))?;
        roots.extend(label_pair(std, Mode::OnePlus, Mode::OneMinus, n)?);
    }

    if n >= 4 {
        let lambda = g.pair_eigenvalues(n)[2] * f.pair_eigenvalues(n)[2];
        roots.push(make_root(Mode::Two, lambda, 0.0, n)?);
    }
    roots.sort_by_key(|r| r.mode);
    Ok(NormalModeSpectrum { n, roots, v0: 0.0 })
}

/// All `N(N+1)/2` eigenvalues of `GF` for dense symmetric `G` (positive
/// definite) and `F`, ascending.
pub fn dense_gf_eigenvalues(g: &DMatrix<f64>, f: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("dense G is not positive definite".into()))?;
    let l = chol.l();
    let m = l.transpose() * f * &l;
    let m = (&m + m.transpose()) * 0.5;
    let mut vals: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Dense oracle: materializes `F` and `G` from the patterns and solves the
/// full generalized eigenproblem.
pub fn full_eigensolve(patterns: &FGPatterns) -> Result<Vec<f64>> {
    if patterns.n > 60 {
        return Err(Error::InvalidInput(format!(
            "dense oracle limited to N <= 60, got {}",
            patterns.n
        )));
    }
    dense_gf_eigenvalues(&patterns.g.dense(patterns.n), &patterns.f.dense(patterns.n))
}

/// Groups ascending eigenvalues whose neighbours differ by less than `tol`.
pub fn cluster_eigenvalues(sorted: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for &v in sorted {
        match out.last_mut() {
            Some((_, count)) if v - last < tol => *count += 1,
            _ => out.push((v, 1)),
        }
        last = v;
    }
    out
}

/// Largest relative deviation between the reduced multiset and dense
/// eigenvalues.
pub fn oracle_deviation(spectrum: &NormalModeSpectrum, dense: &[f64]) -> Result<f64> {
    let reduced = spectrum.eigenvalue_multiset();
    if reduced.len() != dense.len() {
        return Err(Error::DimensionMismatch(format!(
            "reduced spectrum has {} eigenvalues, dense has {}",
            reduced.len(),
            dense.len()
        )));
    }
    Ok(reduced
        .iter()
        .zip(dense)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1e-300))
        .fold(0.0, f64::max))
}

/// `v₀ = ∂V̄_eff/∂δ` at `δ = 0`, evaluated at the symmetric minimum.
pub fn compute_v0(
    minimum: &SymmetricMinimum,
    model: &InteractionModel,
    spec: &SystemSpec,
) -> Result<f64> {
    let n = spec.n_particles();
    let nf = n as f64;
    let (r, gamma) = (minimum.r_infinity, minimum.gamma_infinity);
    let centrifugal = -(nf + 1.0) * nf * symmetric_inverse_diagonal(n, gamma) / (r * r);
    let weight = model.pair_weight(spec);
    let pair = if weight == 0.0 {
        0.0
    } else {
        let rho = r * (2.0 * (1.0 - gamma)).sqrt();
        weight * (n * (n - 1) / 2) as f64 * model.delta_derivative(rho, 0.0)?
    };
    Ok(centrifugal + pair)
}

/// Patterns and spectrum (with `v₀`) for one system. With `oracle_check`
/// the dense analytic `F` and `G` are diagonalized as well and any
/// disagreement above [`ORACLE_TOLERANCE`] is an error.
pub fn solve_normal_modes(
    minimum: &SymmetricMinimum,
    model: &InteractionModel,
    spec: &SystemSpec,
    oracle_check: bool,
) -> Result<(FGPatterns, NormalModeSpectrum)> {
    let patterns = build_fg_patterns(minimum, model, spec)?;
    let spectrum = reduced_eigensolve(&patterns)?.with_v0(compute_v0(minimum, model, spec)?);
    if oracle_check {
        let residual = dense_pattern_residual(minimum, model, spec, &patterns)?;
        if residual > PATTERN_TOLERANCE {
            return Err(Error::SymmetryBroken { residual });
        }
        let coords = minimum.coordinates();
        let f = Curvature::new(&coords, model, spec)?.hessian()?;
        let dense = dense_gf_eigenvalues(&dense_kinetic(&coords), &f)?;
        let deviation = oracle_deviation(&spectrum, &dense)?;
        if deviation > ORACLE_TOLERANCE {
            return Err(Error::OracleMismatch { deviation });
        }
    }
    Ok((patterns, spectrum))
}

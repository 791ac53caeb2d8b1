//! Large-dimension effective potential and its totally symmetric minimum.
//!
//! Internal coordinates are the `N` scaled radii `r̄ᵢ` and the `N(N-1)/2`
//! pair angle cosines `γᵢⱼ`. In scaled units
//!
//! ```text
//! V̄_eff(δ) = Σᵢ [ ((1-(N+1)δ)² (Γ⁻¹)ᵢᵢ + N(N-2)δ²) / (2r̄ᵢ²) + r̄ᵢ²/2 ]
//!          + w Σ_{i<j} v̄(r̄ᵢⱼ; δ),     r̄ᵢⱼ² = r̄ᵢ² + r̄ⱼ² - 2r̄ᵢr̄ⱼγᵢⱼ
//! ```
//!
//! where `Γ` is the Gramian of angle cosines. The centrifugal term comes from
//! removing the first-derivative terms of the `D`-dimensional Laplacian with
//! the Jacobian `Πᵢ rᵢ^(D-1) · det(Γ)^((D-N-1)/2)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interaction::InteractionModel;
use crate::model::SystemSpec;

pub const GRADIENT_TOLERANCE: f64 = 1e-10;
pub const STEP_TOLERANCE: f64 = 1e-12;
const MAX_NEWTON_ITERATIONS: usize = 200;

/// One internal coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Coord {
    Radial(usize),
    /// Angle cosine of the pair `(i, j)`, `i < j`.
    Pair(usize, usize),
}

impl Coord {
    pub fn pair(i: usize, j: usize) -> Coord {
        if i < j {
            Coord::Pair(i, j)
        } else {
            Coord::Pair(j, i)
        }
    }
}

/// Lexicographic position of pair `(i, j)`, `i < j`, among all pairs of `n`.
pub fn pair_index(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// All pairs of `n` in lexicographic order.
pub fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect()
}

/// All `N(N+1)/2` coordinates: radii first, then pairs.
pub fn coordinates(n: usize) -> Vec<Coord> {
    (0..n)
        .map(Coord::Radial)
        .chain(pairs(n).into_iter().map(|(i, j)| Coord::Pair(i, j)))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct InternalCoordinates {
    pub radii: Vec<f64>,
    /// Symmetric matrix of angle cosines with unit diagonal.
    pub gammas: DMatrix<f64>,
}

impl InternalCoordinates {
    pub fn new(radii: Vec<f64>, gammas: DMatrix<f64>) -> Result<Self> {
        let n = radii.len();
        if gammas.nrows() != n || gammas.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} radii but a {}x{} cosine matrix",
                gammas.nrows(),
                gammas.ncols()
            )));
        }
        if let Some(r) = radii.iter().find(|r| !(**r > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "radii must be positive, got {r}"
            )));
        }
        for i in 0..n {
            if (gammas[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "cosine matrix diagonal must be 1, entry {i} is {}",
                    gammas[(i, i)]
                )));
            }
            for j in 0..i {
                if (gammas[(i, j)] - gammas[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidInput("cosine matrix is not symmetric".into()));
                }
            }
        }
        Ok(Self { radii, gammas })
    }

    /// All radii `r` and all cosines `γ`.
    pub fn symmetric(n: usize, r: f64, gamma: f64) -> Self {
        let mut gammas = DMatrix::from_element(n, n, gamma);
        gammas.fill_diagonal(1.0);
        Self {
            radii: vec![r; n],
            gammas,
        }
    }

    pub fn n(&self) -> usize {
        self.radii.len()
    }

    pub fn get(&self, c: Coord) -> f64 {
        match c {
            Coord::Radial(i) => self.radii[i],
            Coord::Pair(i, j) => self.gammas[(i, j)],
        }
    }

    pub fn set(&mut self, c: Coord, value: f64) {
        match c {
            Coord::Radial(i) => self.radii[i] = value,
            Coord::Pair(i, j) => {
                self.gammas[(i, j)] = value;
                self.gammas[(j, i)] = value;
            }
        }
    }

    /// Permutes particle labels: particle `i` becomes `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        let n = self.n();
        let mut radii = vec![0.0; n];
        let mut gammas = DMatrix::identity(n, n);
        for i in 0..n {
            radii[perm[i]] = self.radii[i];
            for j in 0..n {
                gammas[(perm[i], perm[j])] = self.gammas[(i, j)];
            }
        }
        Self { radii, gammas }
    }

    pub fn pair_distance(&self, i: usize, j: usize) -> f64 {
        let (ri, rj) = (self.radii[i], self.radii[j]);
        (ri * ri + rj * rj - 2.0 * ri * rj * self.gammas[(i, j)])
            .max(0.0)
            .sqrt()
    }
}

/// Cholesky factor of the Gramian, reporting the first non-positive leading
/// minor (1-based) on failure.
fn cholesky(gammas: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = gammas.nrows();
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = gammas[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(Error::GramianNotPositiveDefinite { minor: j + 1 });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = gammas[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// `Γ⁻¹` for a positive-definite Gramian.
pub fn gramian_inverse(gammas: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let l = cholesky(gammas)?;
    let n = gammas.nrows();
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or(Error::GramianNotPositiveDefinite { minor: n })?;
    Ok(linv.transpose() * linv)
}

pub fn gramian_inverse_diagonal(gammas: &DMatrix<f64>) -> Result<Vec<f64>> {
    let inv = gramian_inverse(gammas)?;
    Ok((0..gammas.nrows()).map(|i| inv[(i, i)]).collect())
}

/// `(Γ⁻¹)ᵢᵢ` when every off-diagonal cosine equals `gamma`.
///
/// The Gramian `(1-γ)I + γJ` has eigenvalue `1-γ` (multiplicity `N-1`) and
/// `1+(N-1)γ`, so the diagonal of its inverse is the mean of their inverses.
pub fn symmetric_inverse_diagonal(n: usize, gamma: f64) -> f64 {
    let nf = n as f64;
    ((nf - 1.0) / (1.0 - gamma) + 1.0 / (1.0 + (nf - 1.0) * gamma)) / nf
}

fn centrifugal_factor(n: usize, delta: f64) -> (f64, f64) {
    let nf = n as f64;
    let a = 1.0 - (nf + 1.0) * delta;
    (a * a, nf * (nf - 2.0) * delta * delta)
}

/// `V̄_eff` at `δ = 0`.
pub fn effective_potential(
    coords: &InternalCoordinates,
    model: &InteractionModel,
    spec: &SystemSpec,
) -> Result<f64> {
    effective_potential_at(coords, model, spec, 0.0)
}

/// `V̄_eff` at arbitrary `δ`.
pub fn effective_potential_at(
    coords: &InternalCoordinates,
    model: &InteractionModel,
    spec: &SystemSpec,
    delta: f64,
) -> Result<f64> {
    let n = coords.n();
    let diag = gramian_inverse_diagonal(&coords.gammas)?;
    let (lead, constant) = centrifugal_factor(n, delta);
    let mut v = 0.0;
    for (r, s) in coords.radii.iter().zip(&diag) {
        v += (lead * s + constant) / (2.0 * r * r) + 0.5 * r * r;
    }
    let w = model.pair_weight(spec);
    if w != 0.0 {
        for (i, j) in pairs(n) {
            v += w * model.evaluate(coords.pair_distance(i, j), delta)?;
        }
    }
    Ok(v)
}

/// Second derivatives of `v̄(ρ)` for one pair with respect to its local
/// coordinates `(rₐ, r_b, γ)`, plus the first derivatives.
struct PairLocal {
    grad: [f64; 3],
    hess: [[f64; 3]; 3],
}

fn pair_local(model: &InteractionModel, ra: f64, rb: f64, g: f64) -> Result<PairLocal> {
    let q = (ra * ra + rb * rb - 2.0 * ra * rb * g).max(0.0);
    let rho = q.sqrt();
    let d = model.derivatives(rho, 0.0)?;
    let dq = [2.0 * (ra - rb * g), 2.0 * (rb - ra * g), -2.0 * ra * rb];
    let ddq = [
        [2.0, -2.0 * g, -2.0 * rb],
        [-2.0 * g, 2.0, -2.0 * ra],
        [-2.0 * rb, -2.0 * ra, 0.0],
    ];
    let drho: [f64; 3] = std::array::from_fn(|x| dq[x] / (2.0 * rho));
    let mut hess = [[0.0; 3]; 3];
    for x in 0..3 {
        for y in 0..3 {
            let ddrho = ddq[x][y] / (2.0 * rho) - dq[x] * dq[y] / (4.0 * rho * q);
            hess[x][y] = d.second * drho[x] * drho[y] + d.first * ddrho;
        }
    }
    Ok(PairLocal {
        grad: std::array::from_fn(|x| d.first * drho[x]),
        hess,
    })
}

/// Analytic first and second derivatives of `V̄_eff(δ = 0)` at one point.
pub struct Curvature<'a> {
    coords: &'a InternalCoordinates,
    model: &'a InteractionModel,
    weight: f64,
    inverse: DMatrix<f64>,
}

impl<'a> Curvature<'a> {
    pub fn new(
        coords: &'a InternalCoordinates,
        model: &'a InteractionModel,
        spec: &SystemSpec,
    ) -> Result<Self> {
        Ok(Self {
            coords,
            model,
            weight: model.pair_weight(spec),
            inverse: gramian_inverse(&coords.gammas)?,
        })
    }

    fn n(&self) -> usize {
        self.coords.n()
    }

    fn local(&self, a: usize, b: usize) -> Result<PairLocal> {
        let c = self.coords;
        pair_local(self.model, c.radii[a], c.radii[b], c.gammas[(a, b)])
    }

    pub fn gradient_entry(&self, c: Coord) -> Result<f64> {
        let s = &self.inverse;
        let radii = &self.coords.radii;
        Ok(match c {
            Coord::Radial(k) => {
                let rk = radii[k];
                let mut g = -s[(k, k)] / (rk * rk * rk) + rk;
                if self.weight != 0.0 {
                    for q in (0..self.n()).filter(|&q| q != k) {
                        g += self.weight * self.local(k, q)?.grad[0];
                    }
                }
                g
            }
            Coord::Pair(a, b) => {
                let mut g = 0.0;
                for (i, r) in radii.iter().enumerate() {
                    g -= s[(i, a)] * s[(i, b)] / (r * r);
                }
                if self.weight != 0.0 {
                    g += self.weight * self.local(a, b)?.grad[2];
                }
                g
            }
        })
    }

    pub fn gradient(&self) -> Result<DVector<f64>> {
        let coords = coordinates(self.n());
        let mut g = DVector::zeros(coords.len());
        for (k, c) in coords.into_iter().enumerate() {
            g[k] = self.gradient_entry(c)?;
        }
        Ok(g)
    }

    pub fn hessian_entry(&self, a: Coord, b: Coord) -> Result<f64> {
        let s = &self.inverse;
        let radii = &self.coords.radii;
        let w = self.weight;
        Ok(match (a, b) {
            (Coord::Radial(i), Coord::Radial(j)) => {
                if i == j {
                    let ri = radii[i];
                    let mut h = 3.0 * s[(i, i)] / ri.powi(4) + 1.0;
                    if w != 0.0 {
                        for q in (0..self.n()).filter(|&q| q != i) {
                            h += w * self.local(i, q)?.hess[0][0];
                        }
                    }
                    h
                } else if w != 0.0 {
                    w * self.local(i, j)?.hess[0][1]
                } else {
                    0.0
                }
            }
            (Coord::Radial(k), Coord::Pair(p, q)) | (Coord::Pair(p, q), Coord::Radial(k)) => {
                let rk = radii[k];
                let mut h = 2.0 * s[(k, p)] * s[(k, q)] / (rk * rk * rk);
                if w != 0.0 && (k == p || k == q) {
                    let x = if k == p { 0 } else { 1 };
                    h += w * self.local(p, q)?.hess[x][2];
                }
                h
            }
            (Coord::Pair(a1, b1), Coord::Pair(c1, d1)) => {
                let mut h = 0.0;
                for (i, r) in radii.iter().enumerate() {
                    let u = |k: usize| s[(i, k)];
                    h += (u(a1) * u(d1) * s[(b1, c1)]
                        + u(a1) * u(c1) * s[(b1, d1)]
                        + u(b1) * u(d1) * s[(a1, c1)]
                        + u(b1) * u(c1) * s[(a1, d1)])
                        / (r * r);
                }
                if w != 0.0 && (a1, b1) == (c1, d1) {
                    h += w * self.local(a1, b1)?.hess[2][2];
                }
                h
            }
        })
    }

    /// Dense `N(N+1)/2` square Hessian in [`coordinates`] order.
    pub fn hessian(&self) -> Result<DMatrix<f64>> {
        let coords = coordinates(self.n());
        let p = coords.len();
        let mut h = DMatrix::zeros(p, p);
        for x in 0..p {
            for y in x..p {
                let v = self.hessian_entry(coords[x], coords[y])?;
                h[(x, y)] = v;
                h[(y, x)] = v;
            }
        }
        Ok(h)
    }
}

/// `V̄_eff(δ = 0)` restricted to equal radii and equal cosines, with its
/// derivatives in `(r̄, γ)`.
#[derive(Clone, Debug)]
pub struct SymmetricPotential {
    n: usize,
    /// `w · N(N-1)/2`.
    total_weight: f64,
    model: InteractionModel,
}

/// Value, gradient and Hessian of the restricted potential.
#[derive(Clone, Copy, Debug)]
pub struct RestrictedEval {
    pub value: f64,
    pub gradient: [f64; 2],
    pub hessian: [[f64; 2]; 2],
}

impl SymmetricPotential {
    pub fn new(model: &InteractionModel, spec: &SystemSpec) -> Self {
        let n = spec.n_particles();
        Self {
            n,
            total_weight: model.pair_weight(spec) * (n * (n - 1) / 2) as f64,
            model: model.clone(),
        }
    }

    /// Open interval of admissible cosines, `(-1/(N-1), 1)`.
    pub fn gamma_bounds(&self) -> (f64, f64) {
        (-1.0 / (self.n as f64 - 1.0), 1.0)
    }

    pub fn in_domain(&self, r: f64, gamma: f64) -> bool {
        let (lo, hi) = self.gamma_bounds();
        r > 0.0 && gamma > lo && gamma < hi
    }

    pub fn eval(&self, r: f64, gamma: f64) -> Result<RestrictedEval> {
        if !self.in_domain(r, gamma) {
            return Err(Error::InvalidInput(format!(
                "(r, gamma) = ({r}, {gamma}) is outside the symmetric domain"
            )));
        }
        let nf = self.n as f64;
        let m = nf - 1.0;
        let a = 1.0 - gamma;
        let c = 1.0 + m * gamma;
        let p = (m / a + 1.0 / c) / nf;
        let dp = (m / (a * a) - m / (c * c)) / nf;
        let ddp = (2.0 * m / (a * a * a) + 2.0 * m * m / (c * c * c)) / nf;

        let r2 = r * r;
        let mut value = nf * (p / (2.0 * r2) + 0.5 * r2);
        let mut vr = nf * (-p / (r2 * r) + r);
        let mut vg = nf * dp / (2.0 * r2);
        let mut vrr = nf * (3.0 * p / (r2 * r2) + 1.0);
        let mut vrg = -nf * dp / (r2 * r);
        let mut vgg = nf * ddp / (2.0 * r2);

        if self.total_weight != 0.0 {
            let w = self.total_weight;
            let s = (2.0 * a).sqrt();
            let ds = -1.0 / s;
            let dds = -1.0 / (s * s * s);
            let d = self.model.derivatives(r * s, 0.0)?;
            value += w * d.value;
            vr += w * d.first * s;
            vg += w * d.first * r * ds;
            vrr += w * d.second * s * s;
            vrg += w * (d.second * r * s * ds + d.first * ds);
            vgg += w * (d.second * r2 * ds * ds + d.first * r * dds);
        }
        Ok(RestrictedEval {
            value,
            gradient: [vr, vg],
            hessian: [[vrr, vrg], [vrg, vgg]],
        })
    }
}

/// The `δ → 0` symmetric configuration and its energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetricMinimum {
    pub n: usize,
    pub r_infinity: f64,
    pub gamma_infinity: f64,
    /// `Ē∞`, the restricted potential at the minimum.
    pub e_infinity: f64,
    /// Curvature of the restricted potential in `(r̄, γ)`.
    pub reduced_hessian: [[f64; 2]; 2],
    /// Weight applied to every pair.
    pub pair_weight: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
}

impl SymmetricMinimum {
    pub fn coordinates(&self) -> InternalCoordinates {
        InternalCoordinates::symmetric(self.n, self.r_infinity, self.gamma_infinity)
    }
}

fn sym2_eigenvalues(h: &[[f64; 2]; 2]) -> (f64, f64) {
    let mean = 0.5 * (h[0][0] + h[1][1]);
    let rad = (0.5 * (h[0][0] - h[1][1])).hypot(h[0][1]);
    (mean - rad, mean + rad)
}

/// Minimizes the two-variable restriction of `V̄_eff(δ = 0)` by damped
/// Newton iteration from `(r̄, γ) = (1, 0)`.
pub fn find_symmetric_minimum(
    model: &InteractionModel,
    spec: &SystemSpec,
) -> Result<SymmetricMinimum> {
    spec.validate()?;
    model.validate_for(spec.n_particles())?;
    let pot = SymmetricPotential::new(model, spec);
    let (mut r, mut g) = (1.0_f64, 0.0_f64);
    let mut cur = pot.eval(r, g)?;
    let norm = |e: &RestrictedEval| e.gradient[0].hypot(e.gradient[1]);
    let mut iterations = 0;
    while norm(&cur) >= GRADIENT_TOLERANCE {
        if iterations == MAX_NEWTON_ITERATIONS {
            return Err(Error::NoConvergence {
                iterations,
                gradient_norm: norm(&cur),
            });
        }
        iterations += 1;
        let mut h = cur.hessian;
        let (lo, _) = sym2_eigenvalues(&h);
        let positive = lo > 0.0;
        if !positive {
            // Levenberg shift keeps the step a descent direction.
            let shift = -lo + 1e-3 * (1.0 + h[0][0].abs() + h[1][1].abs());
            h[0][0] += shift;
            h[1][1] += shift;
        }
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let [gr, gg] = cur.gradient;
        let step = [
            -(h[1][1] * gr - h[0][1] * gg) / det,
            -(h[0][0] * gg - h[1][0] * gr) / det,
        ];
        let slope = gr * step[0] + gg * step[1];
        let step_norm = step[0].hypot(step[1]);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let (rn, gn) = (r + alpha * step[0], g + alpha * step[1]);
            if pot.in_domain(rn, gn) {
                let next = pot.eval(rn, gn)?;
                let local = positive && alpha == 1.0 && step_norm < 1e-4;
                if local || next.value <= cur.value + 1e-4 * alpha * slope {
                    accepted = Some((rn, gn, next));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((rn, gn, next)) = accepted else {
            return Err(Error::NoConvergence {
                iterations,
                gradient_norm: norm(&cur),
            });
        };
        let moved = (rn - r).hypot(gn - g);
        r = rn;
        g = gn;
        cur = next;
        if moved < STEP_TOLERANCE && norm(&cur) >= GRADIENT_TOLERANCE {
            return Err(Error::NoConvergence {
                iterations,
                gradient_norm: norm(&cur),
            });
        }
    }
    let (lo, _) = sym2_eigenvalues(&cur.hessian);
    if !(lo > 0.0) {
        return Err(Error::SaddlePoint { eigenvalue: lo });
    }
    Ok(SymmetricMinimum {
        n: spec.n_particles(),
        r_infinity: r,
        gamma_infinity: g,
        e_infinity: cur.value,
        reduced_hessian: cur.hessian,
        pair_weight: model.pair_weight(spec),
        gradient_norm: norm(&cur),
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal(n: usize) -> SystemSpec {
        SystemSpec::balanced(n, InteractionModel::NonInteracting)
    }

    #[test]
    fn gramian_identity_and_symmetric_closed_form() {
        for n in 2..6 {
            let d = gramian_inverse_diagonal(&DMatrix::identity(n, n)).unwrap();
            assert!(d.iter().all(|x| (x - 1.0).abs() < 1e-15));
        }
        let c = InternalCoordinates::symmetric(2, 1.0, 0.5);
        let d = gramian_inverse_diagonal(&c.gammas).unwrap();
        assert!((d[0] - 4.0 / 3.0).abs() < 1e-14);
        let c = InternalCoordinates::symmetric(3, 1.0, 0.2);
        let d = gramian_inverse_diagonal(&c.gammas).unwrap();
        assert!((d[1] - 1.2 / (0.8 * 1.4)).abs() < 1e-14);
        assert!((d[1] - 1.071_428_571_428_571_4).abs() < 1e-14);
    }

    #[test]
    fn gramian_rejects_indefinite() {
        let c = InternalCoordinates::symmetric(4, 1.0, -0.5);
        match gramian_inverse_diagonal(&c.gammas) {
            Err(Error::GramianNotPositiveDefinite { minor }) => assert_eq!(minor, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn effective_potential_examples() {
        let m = InteractionModel::NonInteracting;
        let c = InternalCoordinates::symmetric(5, 1.0, 0.0);
        assert!((effective_potential(&c, &m, &ideal(5)).unwrap() - 5.0).abs() < 1e-14);
        let c = InternalCoordinates::symmetric(2, 1.0, 0.5);
        assert!((effective_potential(&c, &m, &ideal(2)).unwrap() - 7.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn harmonic_pair_adds_pair_distance_term() {
        let lambda = 0.1;
        let m = InteractionModel::HarmonicPair { coupling: lambda };
        let spec = SystemSpec::balanced(4, m.clone());
        let (r, g) = (0.9, 0.15);
        let c = InternalCoordinates::symmetric(4, r, g);
        let base = effective_potential(&c, &InteractionModel::NonInteracting, &spec).unwrap();
        let with = effective_potential(&c, &m, &spec).unwrap();
        let expected = 6.0 * (lambda / 2.0) * 2.0 * r * r * (1.0 - g);
        assert!((with - base - expected).abs() < 1e-13);
    }

    #[test]
    fn pair_index_matches_enumeration() {
        for n in 2..9 {
            for (k, (i, j)) in pairs(n).into_iter().enumerate() {
                assert_eq!(pair_index(i, j, n), k);
            }
        }
    }

    #[test]
    fn ideal_minimum_is_unit_radius_zero_cosine() {
        for n in [2, 3, 7, 20] {
            let m = find_symmetric_minimum(&InteractionModel::NonInteracting, &ideal(n)).unwrap();
            assert!((m.r_infinity - 1.0).abs() < 1e-12);
            assert!(m.gamma_infinity.abs() < 1e-12);
            assert!((m.e_infinity - n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_gradient_and_hessian_match_finite_differences() {
        let model = InteractionModel::unitary(0.01).unwrap();
        let spec = SystemSpec::balanced(5, model.clone());
        let mut c = InternalCoordinates::symmetric(5, 0.9, 0.05);
        // Break the symmetry so every entry class is exercised generically.
        for (k, coord) in coordinates(5).into_iter().enumerate() {
            let v = c.get(coord);
            c.set(coord, v + 0.01 * ((k * 7 % 5) as f64 - 2.0));
        }
        let curv = Curvature::new(&c, &model, &spec).unwrap();
        let coords = coordinates(5);
        let f = |c: &InternalCoordinates| effective_potential(c, &model, &spec).unwrap();
        let h = 1e-4;
        for &a in &coords {
            let mut p = c.clone();
            p.set(a, c.get(a) + h);
            let mut m = c.clone();
            m.set(a, c.get(a) - h);
            let fd = (f(&p) - f(&m)) / (2.0 * h);
            let an = curv.gradient_entry(a).unwrap();
            assert!(
                (fd - an).abs() < 1e-6 * an.abs().max(1.0),
                "{a:?}: {fd} {an}"
            );
            for &b in &coords {
                let shifted = |da: f64, db: f64| {
                    let mut x = c.clone();
                    x.set(a, x.get(a) + da);
                    x.set(b, x.get(b) + db);
                    f(&x)
                };
                let fd = (shifted(h, h) - shifted(h, -h) - shifted(-h, h) + shifted(-h, -h))
                    / (4.0 * h * h);
                let an = curv.hessian_entry(a, b).unwrap();
                assert!(
                    (fd - an).abs() < 1e-5 * an.abs().max(1.0),
                    "{a:?},{b:?}: {fd} {an}"
                );
            }
        }
    }

    #[test]
    fn harmonic_minimum_satisfies_closed_form_stationarity() {
        // Restricted potential for N = 3, λ = 0.1 written out independently.
        let lambda = 0.1;
        let model = InteractionModel::HarmonicPair { coupling: lambda };
        let spec = SystemSpec::balanced(3, model.clone());
        let m = find_symmetric_minimum(&model, &spec).unwrap();
        let v = |r: f64, g: f64| {
            let p = (2.0 / (1.0 - g) + 1.0 / (1.0 + 2.0 * g)) / 3.0;
            3.0 * (p / (2.0 * r * r) + r * r / 2.0) + 3.0 * (lambda / 2.0) * 2.0 * r * r * (1.0 - g)
        };
        let h = 1e-5;
        let (r, g) = (m.r_infinity, m.gamma_infinity);
        let dr = (v(r + h, g) - v(r - h, g)) / (2.0 * h);
        let dg = (v(r, g + h) - v(r, g - h)) / (2.0 * h);
        assert!(dr.abs() < 1e-8 && dg.abs() < 1e-8, "{dr} {dg}");
        assert!((v(r, g) - m.e_infinity).abs() < 1e-12);
        assert!(m.gradient_norm < GRADIENT_TOLERANCE);
        // Coarse grid oracle: nothing on the grid is lower.
        let mut best = f64::INFINITY;
        for i in 1..200 {
            for j in 1..200 {
                let (rr, gg) = (0.5 + i as f64 * 0.005, -0.45 + j as f64 * 0.0072);
                best = best.min(v(rr, gg));
            }
        }
        assert!(m.e_infinity <= best + 1e-12);
    }

    #[test]
    fn unitary_minimum_has_nonzero_cosine() {
        let model = InteractionModel::unitary(0.01).unwrap();
        let spec = SystemSpec::balanced(10, model.clone());
        let m = find_symmetric_minimum(&model, &spec).unwrap();
        assert!(m.gamma_infinity.abs() > 1e-3, "{}", m.gamma_infinity);
        let (lo, hi) = (-1.0 / 9.0, 1.0);
        assert!(m.gamma_infinity > lo && m.gamma_infinity < hi);
    }

    #[test]
    fn symmetric_minimum_is_stationary_in_full_space() {
        for model in [
            InteractionModel::HarmonicPair { coupling: 0.1 },
            InteractionModel::unitary(0.01).unwrap(),
        ] {
            for n in [3, 6, 11] {
                let spec = SystemSpec::balanced(n, model.clone());
                let m = find_symmetric_minimum(&model, &spec).unwrap();
                let c = m.coordinates();
                let g = Curvature::new(&c, &model, &spec)
                    .unwrap()
                    .gradient()
                    .unwrap();
                assert!(g.amax() < 1e-8, "n = {n}: {}", g.amax());
            }
        }
    }
}

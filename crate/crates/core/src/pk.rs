//! Fibered holomorphic endomorphisms of `P^k` given by homogeneous lifts `F_λ` of
//! `C^{k+1}`: growth constants, Green functions, basins and Fatou detection.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::{Base, BasePoint};
use crate::error::{Error, Result};
use crate::henon::CoeffPoly;
use crate::slice::{Bitmap, Window};
use crate::util::{random_unit, rng_for};

pub const MAX_PK_ITER: usize = 200;
/// Relative outward margin on sampled sphere extrema.
pub const GROWTH_MARGIN: f64 = 0.01;
pub const DEGENERACY_FLOOR: f64 = 1e-9;

type Vector = Vec<Complex64>;

fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn scale(x: &mut [Complex64], s: f64) {
    x.iter_mut().for_each(|c| *c *= s);
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(u, v)| u.conj() * v).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub exponents: Vec<u32>,
    pub coeff: CoeffPoly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousMap {
    pub k: usize,
    pub degree: u32,
    /// `k + 1` coordinate polynomials.
    pub components: Vec<Vec<Monomial>>,
}

impl HomogeneousMap {
    pub fn new(k: usize, degree: u32, components: Vec<Vec<Monomial>>) -> Result<Self> {
        if k == 0 || degree < 2 {
            return Err(Error::Config(format!("need k ≥ 1 and degree ≥ 2, got k = {k}, d = {degree}")));
        }
        if components.len() != k + 1 {
            return Err(Error::Config(format!("expected {} components, got {}", k + 1, components.len())));
        }
        for (i, comp) in components.iter().enumerate() {
            for m in comp {
                if m.exponents.len() != k + 1 || m.exponents.iter().sum::<u32>() != degree {
                    return Err(Error::Config(format!("component {i} has a monomial {:?} not homogeneous of degree {degree}", m.exponents)));
                }
            }
        }
        Ok(HomogeneousMap { k, degree, components })
    }

    /// `(x_0^d, …, x_k^d)`.
    pub fn power(k: usize, degree: u32) -> Self {
        let components = (0..=k)
            .map(|i| {
                let mut e = vec![0; k + 1];
                e[i] = degree;
                vec![Monomial { exponents: e, coeff: CoeffPoly::real(1.0) }]
            })
            .collect();
        HomogeneousMap { k, degree, components }
    }

    pub fn at(&self, lambda: BasePoint) -> MapAt {
        MapAt {
            degree: self.degree,
            components: self.components.iter().map(|c| c.iter().map(|m| (m.exponents.clone(), m.coeff.eval(lambda))).collect()).collect(),
        }
    }
}

/// `F_λ` with coefficients evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct MapAt {
    pub degree: u32,
    pub components: Vec<Vec<(Vec<u32>, Complex64)>>,
}

impl MapAt {
    pub fn apply(&self, x: &[Complex64]) -> Vector {
        self.components
            .iter()
            .map(|c| c.iter().map(|(e, a)| e.iter().zip(x).fold(*a, |acc, (&p, xi)| acc * xi.powu(p))).sum())
            .collect()
    }

    /// `DF_λ(x) v`.
    pub fn jvp(&self, x: &[Complex64], v: &[Complex64]) -> Vector {
        self.components
            .iter()
            .map(|c| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (e, a) in c {
                    for (j, &p) in e.iter().enumerate() {
                        if p == 0 {
                            continue;
                        }
                        let term = e.iter().enumerate().fold(*a * p as f64 * v[j], |t, (i, &q)| t * x[i].powu(if i == j { q - 1 } else { q }));
                        acc += term;
                    }
                }
                acc
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PkSkewSystem {
    pub base: Base,
    pub map: HomogeneousMap,
}

impl PkSkewSystem {
    pub fn new(base: Base, map: HomogeneousMap) -> Result<Self> {
        let base = Base::new(base.space, base.map)?;
        let map = HomogeneousMap::new(map.k, map.degree, map.components)?;
        Ok(PkSkewSystem { base, map })
    }

    pub fn degree(&self) -> f64 {
        self.map.degree as f64
    }

    pub fn dim(&self) -> usize {
        self.map.k + 1
    }

    pub fn at(&self, lambda: BasePoint) -> Result<MapAt> {
        self.base.space.check(lambda)?;
        Ok(self.map.at(lambda))
    }

    fn maps_along(&self, lambda: BasePoint, n: usize) -> Result<Vec<MapAt>> {
        if self.base.is_identity() {
            return Ok(vec![self.at(lambda)?]);
        }
        self.base.sigma_orbit(lambda, n).map(|ls| ls.into_iter().map(|l| self.map.at(l)).collect())
    }
}

fn get(maps: &[MapAt], k: usize) -> &MapAt {
    &maps[k.min(maps.len() - 1)]
}

pub fn random_sphere_point<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vector {
    let mut x: Vector = (0..dim).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
    let n = norm(&x);
    scale(&mut x, 1.0 / n);
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthConstants {
    pub l: f64,
    #[serde(rename = "L")]
    pub big_l: f64,
    /// Bound on `d^{n+1} |G_{n+1} − G_n|` through `log C`.
    pub c: f64,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    /// `(2/l)^{1/(d−1)}`: `‖F_λ(x)‖ ≥ 2‖x‖` whenever `‖x‖` is at least this.
    pub doubling_radius: f64,
    pub samples: usize,
}

/// Sphere extrema of `‖F_λ‖` over `samples` random points on each base point of a
/// `density` grid, polished by local descent/ascent and widened by [`GROWTH_MARGIN`].
pub fn estimate_growth(sys: &PkSkewSystem, samples: usize, density: usize, seed: u64) -> Result<GrowthConstants> {
    if samples == 0 {
        return Err(Error::Argument("need at least one sphere sample".into()));
    }
    let ls = sys.base.space.dense_sample(density);
    let dim = sys.dim();
    let (lo, hi) = ls
        .par_iter()
        .enumerate()
        .map(|(i, &l)| {
            let f = sys.map.at(l);
            let mut rng = rng_for(seed, i as u64);
            let (mut lo, mut hi) = ((f64::INFINITY, Vec::new()), (0.0f64, Vec::new()));
            for _ in 0..samples {
                let u = random_sphere_point(&mut rng, dim);
                let v = norm(&f.apply(&u));
                if v < lo.0 {
                    lo = (v, u.clone());
                }
                if v > hi.0 {
                    hi = (v, u);
                }
            }
            (polish(&f, lo.1, false), polish(&f, hi.1, true))
        })
        .reduce(|| (f64::INFINITY, 0.0), |a, b| (a.0.min(b.0), a.1.max(b.1)));
    if lo < DEGENERACY_FLOOR {
        return Err(Error::Degenerate(lo));
    }
    let l = lo * (1.0 - GROWTH_MARGIN);
    let big_l = hi * (1.0 + GROWTH_MARGIN);
    let e = 1.0 / (sys.degree() - 1.0);
    Ok(GrowthConstants {
        l,
        big_l,
        c: big_l.max(1.0 / l).max(1.0 + 1e-12),
        r: (2.0 * big_l).powf(-e),
        big_r: (2.0 * l).powf(-e),
        doubling_radius: (2.0 / l).powf(e),
        samples: samples * ls.len(),
    })
}

/// Local extremum of `‖F(u)‖` on the unit sphere from `u`, by steps along the
/// Wirtinger gradient `DF(u)^* F(u)` (Polyak length toward zero when minimizing).
fn polish(f: &MapAt, mut u: Vector, maximize: bool) -> f64 {
    let dim = u.len();
    let obj = |u: &[Complex64]| norm(&f.apply(u)).powi(2);
    let mut val = obj(&u);
    for _ in 0..200 {
        let fu = f.apply(&u);
        let mut g: Vector = (0..dim)
            .map(|j| {
                let mut e = vec![Complex64::new(0.0, 0.0); dim];
                e[j] = Complex64::new(1.0, 0.0);
                dot(&f.jvp(&u, &e), &fu)
            })
            .collect();
        project_out(&mut g, &u);
        let gn = norm(&g).powi(2);
        if !(gn > 0.0) || !(val > 0.0) {
            break;
        }
        let mut t = val / gn;
        let mut moved = false;
        for _ in 0..30 {
            let sign = if maximize { t } else { -t };
            let mut cand: Vector = u.iter().zip(&g).map(|(a, b)| a + b * sign).collect();
            let n = norm(&cand);
            scale(&mut cand, 1.0 / n);
            let cv = obj(&cand);
            if (maximize && cv > val) || (!maximize && cv < val) {
                u = cand;
                val = cv;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    val.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PkGreenValue {
    pub value: f64,
    pub n_used: usize,
    pub error_bound: f64,
}

/// Green function engine for a lift; the constant `C` fixes the stopping rule.
#[derive(Debug, Clone)]
pub struct PkEngine {
    pub sys: PkSkewSystem,
    pub growth: GrowthConstants,
}

impl PkEngine {
    pub fn new(sys: PkSkewSystem, seed: u64) -> Result<Self> {
        let growth = estimate_growth(&sys, 10_000, 4, seed)?;
        Ok(PkEngine { sys, growth })
    }

    /// `G_{n,λ}` for `n = 0..=n_max` along the renormalized orbit.
    pub fn green_sequence(&self, lambda: BasePoint, x: &[Complex64], n_max: usize) -> Result<Vec<f64>> {
        let maps = self.sys.maps_along(lambda, n_max)?;
        let d = self.sys.degree();
        let mut u = x.to_vec();
        let mut log_norm = norm(&u).ln();
        let mut out = vec![log_norm];
        let mut w = 1.0;
        if !log_norm.is_finite() {
            return Ok(vec![f64::NEG_INFINITY; n_max + 1]);
        }
        scale(&mut u, (-log_norm).exp());
        for k in 0..n_max {
            let mut next = get(&maps, k).apply(&u);
            let m = norm(&next);
            scale(&mut next, 1.0 / m);
            u = next;
            w *= d;
            log_norm = d * log_norm + m.ln();
            out.push(log_norm / w);
        }
        Ok(out)
    }

    pub fn green(&self, lambda: BasePoint, x: &[Complex64], tol: f64) -> Result<PkGreenValue> {
        if !(tol > 0.0) {
            return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
        }
        if x.len() != self.sys.dim() {
            return Err(Error::Argument(format!("point has {} coordinates, expected {}", x.len(), self.sys.dim())));
        }
        let n0 = norm(x);
        if n0 == 0.0 {
            return Ok(PkGreenValue { value: f64::NEG_INFINITY, n_used: 0, error_bound: 0.0 });
        }
        let d = self.sys.degree();
        let log_c = self.growth.c.ln();
        // Tail after n steps: Σ_{j>n} log C / d^j.
        let n_needed = (0..MAX_PK_ITER).find(|&n| log_c / (d.powi(n as i32) * (d - 1.0)) < tol).unwrap_or(MAX_PK_ITER);
        let maps = self.sys.maps_along(lambda, n_needed)?;
        let mut u = x.to_vec();
        let mut log_norm = n0.ln();
        scale(&mut u, 1.0 / n0);
        let mut w = 1.0;
        for k in 0..n_needed {
            let mut next = get(&maps, k).apply(&u);
            let m = norm(&next);
            scale(&mut next, 1.0 / m);
            u = next;
            log_norm = d * log_norm + m.ln();
            w *= d;
        }
        Ok(PkGreenValue { value: log_norm / w, n_used: n_needed, error_bound: log_c / (w * (d - 1.0)) })
    }

    pub fn basin_membership(&self, lambda: BasePoint, x: &[Complex64], tol: f64) -> Result<Basin> {
        let g = self.green(lambda, x, (tol * 1e-3).max(1e-15))?.value;
        Ok(if g < -tol {
            Basin::Inside
        } else if g > tol {
            Basin::Outside
        } else {
            Basin::Band
        })
    }

    /// Direct orbit verdict: inside once the orbit enters `B_r`, outside once it
    /// passes the doubling radius; `None` if neither happens within `steps`.
    pub fn orbit_verdict(&self, lambda: BasePoint, x: &[Complex64], steps: usize) -> Result<Option<Basin>> {
        let maps = self.sys.maps_along(lambda, steps)?;
        let mut p = x.to_vec();
        for k in 0..=steps {
            let n = norm(&p);
            if n < self.growth.r {
                return Ok(Some(Basin::Inside));
            }
            if n > self.growth.doubling_radius {
                return Ok(Some(Basin::Outside));
            }
            if k < steps {
                p = get(&maps, k).apply(&p);
            }
        }
        Ok(None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PkResiduals {
    /// `max |G_λ(cx) − log|c| − G_λ(x)|`
    pub homogeneity: f64,
    /// `max |d·G_λ(x) − G_{σλ}(F_λ(x))|`
    pub invariance: f64,
    pub samples: usize,
}

impl PkEngine {
    /// Both functional identities at random λ, x with `‖x‖ ∈ [0.1, 4]` and `|c| ∈ [0.1, 10]`.
    pub fn check_identities(&self, samples: usize, tol: f64, seed: u64) -> Result<PkResiduals> {
        let mut rng = rng_for(seed, 0);
        let d = self.sys.degree();
        let mut out = PkResiduals { homogeneity: 0.0, invariance: 0.0, samples };
        for _ in 0..samples {
            let l = self.sys.base.space.random_point(&mut rng);
            let mut x = random_sphere_point(&mut rng, self.sys.dim());
            scale(&mut x, rng.random_range(0.1..4.0));
            let c = random_unit(&mut rng) * 10f64.powf(rng.random_range(-1.0..1.0));
            let g = self.green(l, &x, tol)?.value;
            let cx: Vector = x.iter().map(|v| v * c).collect();
            let gc = self.green(l, &cx, tol)?.value;
            out.homogeneity = out.homogeneity.max((gc - c.norm().ln() - g).abs());
            let fx = self.sys.at(l)?.apply(&x);
            let g1 = self.green(self.sys.base.apply(l)?, &fx, tol)?.value;
            out.invariance = out.invariance.max((d * g - g1).abs());
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basin {
    Inside,
    Outside,
    Band,
}

/// A grid over one coordinate of the affine chart `x_0 = 1`, other chart
/// coordinates held at `anchor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartGrid {
    pub window: Window,
    pub anchor: Vec<Complex64>,
    pub axis: usize,
}

impl ChartGrid {
    pub fn plane(window: Window) -> Self {
        ChartGrid { window, anchor: vec![Complex64::new(0.0, 0.0)], axis: 0 }
    }

    pub fn chart_point(&self, i: usize, j: usize) -> Vector {
        let mut z = self.anchor.clone();
        z[self.axis] = self.window.node(i, j);
        z
    }
}

fn lift(z: &[Complex64]) -> Vector {
    std::iter::once(Complex64::new(1.0, 0.0)).chain(z.iter().copied()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FatouParams {
    pub probes: usize,
    pub green_tol: f64,
    /// Orbit length in the normality proxy.
    pub n_probe: usize,
    pub collar: usize,
    pub seed: u64,
}

impl Default for FatouParams {
    fn default() -> Self {
        FatouParams { probes: 4, green_tol: 1e-13, n_probe: 30, collar: 2, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FatouReport {
    pub res: usize,
    /// Pluriharmonicity test: `true` for Fatou cells.
    pub harmonic: Bitmap,
    /// Normality proxy: `true` for Fatou cells.
    pub normal: Bitmap,
    pub indeterminate: Bitmap,
    pub threshold_harm: f64,
    pub calibration_residual: f64,
    /// Fraction of cells beyond the collar where both tests agree.
    pub agreement: f64,
    pub compared_cells: usize,
}

fn stencil_residual(f: impl Fn(Complex64) -> f64, delta: f64, dir: Complex64) -> f64 {
    let c = f(Complex64::new(0.0, 0.0));
    let i = Complex64::new(0.0, 1.0);
    let s = f(dir * delta) + f(-dir * delta) + f(i * dir * delta) + f(-i * dir * delta);
    ((s - 4.0 * c) / (delta * delta)).abs()
}

/// Classify chart cells as Fatou by (a) vanishing Laplacian of `G_λ(1, ·)` on random
/// probe lines and (b) a cell-scale equicontinuity proxy: the Fubini–Study stretch
/// along the orbit of the cell center, times the cell size, stays below one.
pub fn fatou_detect(engine: &PkEngine, lambda: BasePoint, grid: &ChartGrid, params: &FatouParams) -> Result<FatouReport> {
    let k = engine.sys.map.k;
    if grid.anchor.len() != k || grid.axis >= k {
        return Err(Error::Argument(format!("chart grid needs {k} anchor coordinates and an axis below {k}")));
    }
    if params.probes < 4 {
        return Err(Error::Argument("at least 4 probe lines per cell".into()));
    }
    let res = grid.window.res;
    let delta = 0.5 * grid.window.spacing();
    // Calibration: log|t| at unit distance from its pole, same stencil.
    let calibration_residual = (0..16)
        .map(|j| stencil_residual(|t| (Complex64::new(1.0, 0.0) + t).norm().ln(), delta, Complex64::from_polar(1.0, j as f64 * 0.3927)))
        .fold(0.0, f64::max)
        .max(8.0 * params.green_tol / (delta * delta));
    let threshold_harm = 10.0 * calibration_residual;
    let h = grid.window.spacing();
    let maps = engine.sys.maps_along(lambda, params.n_probe)?;

    let cells: Vec<(bool, Option<bool>)> = (0..res * res)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % res, idx / res);
            let z = grid.chart_point(i, j);
            let mut rng = rng_for(params.seed, idx as u64);
            let harmonic = (0..params.probes).all(|_| {
                let v = random_sphere_point(&mut rng, k);
                let g = |t: Complex64| {
                    let p: Vector = z.iter().zip(&v).map(|(a, b)| a + t * b).collect();
                    engine.green(lambda, &lift(&p), params.green_tol).map(|g| g.value).unwrap_or(f64::NAN)
                };
                stencil_residual(g, delta, Complex64::new(1.0, 0.0)) < threshold_harm
            });
            // The cell's images stay below one radian in the Fubini–Study metric.
            let h_fs = h / (1.0 + z.iter().map(|c| c.norm_sqr()).sum::<f64>());
            let normal = tangent_growth(&maps, params.n_probe, &lift(&z), &mut rng).map(|g| g + h_fs.ln() < 0.0);
            (harmonic, normal)
        })
        .collect();

    let harmonic = Bitmap { res, cells: cells.iter().map(|c| c.0).collect() };
    let normal = Bitmap { res, cells: cells.iter().map(|c| c.1.unwrap_or(false)).collect() };
    let indeterminate = Bitmap { res, cells: cells.iter().map(|c| c.1.is_none()).collect() };
    let boundary = Bitmap {
        res,
        cells: (0..res * res)
            .map(|idx| {
                let (i, j) = ((idx % res) as isize, (idx / res) as isize);
                let me = harmonic.cells[idx];
                (-1..=1).any(|di| {
                    (-1..=1).any(|dj| {
                        let (a, b) = (i + di, j + dj);
                        a >= 0 && b >= 0 && (a as usize) < res && (b as usize) < res && harmonic.cells[a as usize + b as usize * res] != me
                    })
                })
            })
            .collect(),
    };
    let excluded = boundary.dilate(params.collar);
    let (mut agree, mut compared) = (0usize, 0usize);
    for idx in 0..res * res {
        if excluded.cells[idx] || indeterminate.cells[idx] {
            continue;
        }
        compared += 1;
        if harmonic.cells[idx] == normal.cells[idx] {
            agree += 1;
        }
    }
    let agreement = if compared > 0 { agree as f64 / compared as f64 } else { f64::NAN };
    Ok(FatouReport { res, harmonic, normal, indeterminate, threshold_harm, calibration_residual, agreement, compared_cells: compared })
}

/// Largest `log` Fubini–Study stretch of a random tangent vector over `steps` steps.
/// The projective derivative at `[x]` with `‖x‖ = 1` and `v ⊥ x` is the component of
/// `DF(x)v` orthogonal to `F(x)`, divided by `‖F(x)‖`.
fn tangent_growth<R: Rng + ?Sized>(maps: &[MapAt], steps: usize, x: &[Complex64], rng: &mut R) -> Option<f64> {
    let mut u = x.to_vec();
    let n0 = norm(&u);
    scale(&mut u, 1.0 / n0);
    let mut v = random_sphere_point(rng, u.len());
    project_out(&mut v, &u);
    let nv = norm(&v);
    scale(&mut v, 1.0 / nv);
    let mut total = 0.0;
    let mut peak = 0.0f64;
    for k in 0..steps {
        let f = get(maps, k);
        let mut fu = f.apply(&u);
        let mut dv = f.jvp(&u, &v);
        let m = norm(&fu);
        if !(m.is_finite() && m > 0.0) {
            return None;
        }
        scale(&mut fu, 1.0 / m);
        project_out(&mut dv, &fu);
        let s = norm(&dv) / m;
        if !s.is_finite() {
            return None;
        }
        if s == 0.0 {
            return Some(peak);
        }
        total += s.ln();
        peak = peak.max(total);
        scale(&mut dv, 1.0 / (s * m));
        u = fu;
        v = dv;
    }
    Some(peak)
}

fn project_out(v: &mut [Complex64], u: &[Complex64]) {
    let c = dot(u, v);
    v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{BaseMap, BaseSpace};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn squares() -> PkEngine {
        let sys = PkSkewSystem::new(Base::identity(BaseSpace::ClosedDisc { radius: 0.25 }).unwrap(), HomogeneousMap::power(1, 2)).unwrap();
        PkEngine::new(sys, 1).unwrap()
    }

    fn perturbed() -> PkEngine {
        let mono = |e: [u32; 2], coeff| Monomial { exponents: e.to_vec(), coeff };
        let map = HomogeneousMap::new(
            1,
            2,
            vec![
                vec![mono([2, 0], CoeffPoly::real(1.0)), mono([0, 2], CoeffPoly::linear(c(1.0, 0.0)))],
                vec![mono([0, 2], CoeffPoly::real(1.0)), mono([2, 0], CoeffPoly::linear(c(1.0, 0.0)))],
            ],
        )
        .unwrap();
        let base = Base::new(BaseSpace::ClosedDisc { radius: 0.2 }, BaseMap::LinearContraction { c: c(0.5, 0.0) }).unwrap();
        PkEngine::new(PkSkewSystem::new(base, map).unwrap(), 2).unwrap()
    }

    #[test]
    fn rejects_inhomogeneous_components() {
        let bad = vec![vec![Monomial { exponents: vec![1, 0], coeff: CoeffPoly::real(1.0) }], vec![Monomial { exponents: vec![0, 2], coeff: CoeffPoly::real(1.0) }]];
        assert!(HomogeneousMap::new(1, 2, bad).is_err());
        assert!(HomogeneousMap::new(1, 1, vec![vec![], vec![]]).is_err());
    }

    #[test]
    fn squares_growth_constants() {
        let g = squares().growth;
        let s = 0.5f64.sqrt();
        for (est, exact) in [(g.l, s), (g.big_l, 1.0), (g.r, 0.5), (g.big_r, s)] {
            assert!((est / exact - 1.0).abs() < 0.02, "{g:?}");
        }
        assert!(g.l <= s && g.big_l >= 1.0 && g.c >= 1.0);
    }

    #[test]
    fn degenerate_map_is_rejected() {
        let comps = vec![vec![Monomial { exponents: vec![2, 0], coeff: CoeffPoly::real(1.0) }], vec![Monomial { exponents: vec![2, 0], coeff: CoeffPoly::real(1.0) }]];
        let sys = PkSkewSystem::new(Base::identity(BaseSpace::ClosedDisc { radius: 0.1 }).unwrap(), HomogeneousMap::new(1, 2, comps).unwrap()).unwrap();
        assert!(matches!(estimate_growth(&sys, 2000, 2, 0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn balls_shrink_inside_r_and_double_outside_big_r() {
        for e in [squares(), perturbed()] {
            let mut rng = rng_for(5, 0);
            let g = e.growth;
            for _ in 0..2000 {
                let l = e.sys.base.space.random_point(&mut rng);
                let f = e.sys.at(l).unwrap();
                let u = random_sphere_point(&mut rng, 2);
                let inner: Vector = u.iter().map(|x| x * g.r).collect();
                assert!(norm(&f.apply(&inner)) <= 0.5 * g.r * (1.0 + 1e-12));
                let outer: Vector = u.iter().map(|x| x * g.doubling_radius).collect();
                assert!(norm(&f.apply(&outer)) >= 2.0 * norm(&outer) * (1.0 - 1e-12));
                let twice: Vector = u.iter().map(|x| x * 2.0).collect();
                assert!((norm(&f.apply(&twice)) / norm(&f.apply(&u)) - 4.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn squares_green_closed_form() {
        let e = squares();
        let l = BasePoint::real(0.0);
        assert!(e.green(l, &[c(1.0, 0.0), c(1.0, 0.0)], 1e-12).unwrap().value.abs() < 1e-12);
        assert!((e.green(l, &[c(2.0, 0.0), c(1.0, 0.0)], 1e-12).unwrap().value - 2f64.ln()).abs() < 1e-9);
        let mut rng = rng_for(9, 0);
        for _ in 0..200 {
            let x = [c(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)), c(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0))];
            let v = e.green(l, &x, 1e-12).unwrap();
            assert!((v.value - x[0].norm().ln().max(x[1].norm().ln())).abs() < 1e-10);
            assert!(v.error_bound <= 1e-12);
        }
        assert_eq!(e.green(l, &[c(0.0, 0.0), c(0.0, 0.0)], 1e-9).unwrap().value, f64::NEG_INFINITY);
        assert!(e.green(l, &[c(1.0, 0.0)], 1e-9).is_err());
    }

    #[test]
    fn cauchy_bound_and_invariance_on_perturbed_family() {
        let e = perturbed();
        let log_c = e.growth.c.ln();
        let mut rng = rng_for(13, 0);
        for _ in 0..300 {
            let l = e.sys.base.space.random_point(&mut rng);
            let x: Vector = random_sphere_point(&mut rng, 2).iter().map(|v| v * rng.random_range(0.1..4.0)).collect();
            let seq = e.green_sequence(l, &x, 20).unwrap();
            for n in 0..20 {
                assert!((seq[n + 1] - seq[n]).abs() <= log_c / 2f64.powi(n as i32 + 1) + 1e-12);
            }
            let tol = 1e-10;
            let g = e.green(l, &x, tol).unwrap().value;
            let fx = e.sys.at(l).unwrap().apply(&x);
            let g1 = e.green(e.sys.base.apply(l).unwrap(), &fx, tol).unwrap().value;
            assert!((2.0 * g - g1).abs() < 2.0 * tol * 2.0);
        }
        let r = e.check_identities(200, 1e-12, 3).unwrap();
        assert!(r.homogeneity < 1e-8 && r.invariance < 1e-8, "{r:?}");
    }

    #[test]
    fn basin_examples_and_orbit_agreement() {
        let e = squares();
        let l = BasePoint::real(0.0);
        assert_eq!(e.basin_membership(l, &[c(0.5, 0.0), c(0.5, 0.0)], 1e-4).unwrap(), Basin::Inside);
        assert_eq!(e.orbit_verdict(l, &[c(0.5, 0.0), c(0.5, 0.0)], 50).unwrap(), Some(Basin::Inside));
        assert_eq!(e.basin_membership(l, &[c(2.0, 0.0), c(1.0, 0.0)], 1e-4).unwrap(), Basin::Outside);
        assert_eq!(e.orbit_verdict(l, &[c(2.0, 0.0), c(1.0, 0.0)], 50).unwrap(), Some(Basin::Outside));
        assert_eq!(e.basin_membership(l, &[c(1.0, 0.0), c(0.0, 1.0)], 1e-4).unwrap(), Basin::Band);
    }

    #[test]
    fn squares_fatou_classification() {
        let e = squares();
        let w = Window::new(c(0.0, 0.0), 2.0, 96);
        let grid = ChartGrid::plane(w);
        let r = fatou_detect(&e, BasePoint::real(0.0), &grid, &FatouParams::default()).unwrap();
        for idx in 0..w.res * w.res {
            let z = w.node(idx % w.res, idx / w.res).norm();
            if z < 0.9 || z > 1.1 {
                assert!(r.harmonic.cells[idx] && r.normal.cells[idx], "{z}");
            }
        }
        assert!(r.harmonic.count() < w.res * w.res && r.normal.count() < w.res * w.res);
        assert!(r.agreement >= 0.95);
        let few = FatouParams { probes: 2, ..Default::default() };
        assert!(fatou_detect(&e, BasePoint::real(0.0), &grid, &few).is_err());
    }
}

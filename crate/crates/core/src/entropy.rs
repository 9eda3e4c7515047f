//! Separated-set entropy estimates on sampled Julia sets, and the product measure
//! assembled from fiber measures and a finitely supported base measure.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::BasePoint;
use crate::error::{Error, Result};
use crate::filtration::{escape_along, EscapeStatus};
use crate::green::GreenEngine;
use crate::henon::{Direction, Fiber, FiberSequence, PlanePoint};
use crate::util::{linear_fit, random_in_square, rng_for, LinearFit};
use crate::wedge::{wedge_measure, Window4};

pub const MIN_CLOUD: usize = 100;
/// Smallest `n` entering the slope fit.
pub const FIT_START: usize = 3;
const RAY_STEPS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudParams {
    /// Threshold on both Green functions.
    pub eta: f64,
    /// Seeds are drawn from `[-half, half]⁴`.
    pub box_half: f64,
    /// Forward escape horizon defining the bounded side of the bisection.
    pub horizon: usize,
    pub bisect_tol: f64,
    /// Forward iterates applied to each bisection point; each one divides `G^-` by `d`.
    pub pushes: usize,
    pub seed: u64,
}

impl Default for CloudParams {
    fn default() -> Self {
        CloudParams { eta: 1e-3, box_half: 1.0, horizon: 100, bisect_tol: 1e-12, pushes: 20, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JuliaCloud {
    /// Fiber holding the points, `σ^{pushes}` of the requested one.
    pub lambda: BasePoint,
    pub points: Vec<PlanePoint>,
    /// Bisection brackets `(bounded, escaping)` before pushing forward.
    pub brackets: Vec<(PlanePoint, PlanePoint)>,
    pub eta: f64,
    pub attempts: usize,
    /// Set when every point is periodic with this period; `d_n` stops refining at `n = period`.
    pub period: Option<usize>,
    pub warnings: Vec<String>,
}

fn escapes(fibers: &FiberSequence, z: PlanePoint, horizon: usize, radius: f64) -> bool {
    !matches!(escape_along(fibers, z, horizon, radius, Direction::Forward).status, EscapeStatus::BoundedThrough { .. })
}

fn bracket(mut inside: PlanePoint, mut outside: PlanePoint, tol: f64, escapes: impl Fn(PlanePoint) -> bool) -> (PlanePoint, PlanePoint) {
    while inside.dist(&outside) > tol {
        let mid = (inside + outside) * Complex64::new(0.5, 0.0);
        if escapes(mid) {
            outside = mid;
        } else {
            inside = mid;
        }
    }
    (inside, outside)
}

/// Points with `max(G^+, G^-) < η`: bisect along rays in vertical slices
/// toward the forward escape boundary, then push the bounded endpoint forward.
pub fn sample_julia_cloud(engine: &GreenEngine, lambda: BasePoint, count: usize, params: &CloudParams) -> Result<JuliaCloud> {
    if count < MIN_CLOUD {
        return Err(Error::Argument(format!("cloud size {count} below minimum {MIN_CLOUD}")));
    }
    if !(params.eta > 0.0 && params.bisect_tol > 0.0 && params.box_half > 0.0) || params.horizon == 0 {
        return Err(Error::Argument("cloud parameters must be positive".into()));
    }
    let sys = &engine.sys;
    let radius = engine.radius();
    let fibers = sys.fiber_sequence(lambda, params.horizon.max(params.pushes))?;
    let later = sys.base.iterate(lambda, params.pushes)?;
    let later_fibers = engine.fibers(later)?;
    let zero = Complex64::new(0.0, 0.0);
    let half = params.box_half;
    let esc = |z| escapes(&fibers, z, params.horizon, radius);

    // Rays on vertical lines {x = x0} run from the circle |y| = R + 1 toward a random
    // target; the first bounded sample is bisected against its predecessor, so the
    // crossing lies on the outer boundary of the slice of K^+.
    let rho = radius + 1.0;
    let attempt = |i: usize| -> Option<(PlanePoint, (PlanePoint, PlanePoint))> {
        let mut rng = rng_for(params.seed, i as u64);
        let x0 = random_in_square(&mut rng, zero, half);
        let start = PlanePoint::new(x0, Complex64::from_polar(rho, std::f64::consts::TAU * rng.random::<f64>()));
        let target = PlanePoint::new(x0, random_in_square(&mut rng, zero, half));
        let mut prev = start;
        let br = (1..=RAY_STEPS).find_map(|k| {
            let t = k as f64 / RAY_STEPS as f64;
            let p = start + (target - start) * Complex64::new(t, 0.0);
            if esc(p) {
                prev = p;
                None
            } else {
                Some(bracket(p, prev, params.bisect_tol, esc))
            }
        })?;
        let mut p = br.0;
        for k in 0..params.pushes {
            p = fibers.get(k).apply(p);
        }
        let gp = engine.green_along(&later_fibers, p, Direction::Forward, 1e-12).value;
        let gm = engine.green_along(&later_fibers, p, Direction::Backward, 1e-12).value;
        (gp < params.eta && gm < params.eta).then_some((p, br))
    };
    let max_attempts = 4 * count;
    let mut points = Vec::with_capacity(count);
    let mut brackets = Vec::with_capacity(count);
    let mut used = 0;
    while points.len() < count && used < max_attempts {
        let chunk = (count - points.len()).min(max_attempts - used);
        let found: Vec<_> = (used..used + chunk).into_par_iter().map(attempt).collect();
        used += chunk;
        for (p, br) in found.into_iter().flatten() {
            points.push(p);
            brackets.push(br);
        }
    }
    let mut warnings = Vec::new();
    if points.len() < count / 2 {
        warnings.push(format!("sparse cloud: {} of {count} points", points.len()));
    }
    Ok(JuliaCloud { lambda: later, points, brackets, eta: params.eta, attempts: used, period: None, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicParams {
    pub period: usize,
    /// Newton starts are drawn from `[-half, half]` in each complex coordinate.
    pub start_half: f64,
    pub max_starts: usize,
    pub max_newton: usize,
    pub seed: u64,
}

impl Default for PeriodicParams {
    fn default() -> Self {
        PeriodicParams { period: 14, start_half: 2.0, max_starts: 40_000, max_newton: 60, seed: 0 }
    }
}

/// Saddle points of period `period` on one fiber of an identity base map.
///
/// Each start solves the cyclic recurrence `t_{k+2} = p_k(t_{k+1}) − a_k t_k`
/// (one step per factor) by Newton's method; the whole cycle is kept when its
/// monodromy has one eigenvalue outside and one inside the unit circle.
pub fn periodic_cloud(engine: &GreenEngine, lambda: BasePoint, count: usize, params: &PeriodicParams) -> Result<JuliaCloud> {
    if !engine.sys.base.is_identity() {
        return Err(Error::Unsupported("periodic clouds need an identity base map".into()));
    }
    if params.period == 0 || count == 0 {
        return Err(Error::Argument("period and count must be positive".into()));
    }
    let fiber = engine.sys.fiber(lambda);
    let factors = &fiber.factors;
    let len = params.period * factors.len();
    let radius = engine.radius();
    let solve_from = |i: usize| -> Option<Vec<PlanePoint>> {
        let mut rng = rng_for(params.seed, i as u64);
        let zero = Complex64::new(0.0, 0.0);
        let mut t: Vec<Complex64> = (0..len).map(|_| random_in_square(&mut rng, zero, params.start_half)).collect();
        let mut converged = false;
        for _ in 0..params.max_newton {
            let r = DVector::from_fn(len, |k, _| {
                let f = &factors[k % factors.len()];
                t[(k + 2) % len] - f.p(t[(k + 1) % len]) + f.a * t[k]
            });
            let rn = r.camax();
            if !rn.is_finite() || rn > 1e8 {
                return None;
            }
            if rn < 1e-12 {
                converged = true;
                break;
            }
            let mut jac = DMatrix::<Complex64>::zeros(len, len);
            for k in 0..len {
                let f = &factors[k % factors.len()];
                jac[(k, k)] += f.a;
                jac[(k, (k + 1) % len)] -= f.p_prime(t[(k + 1) % len]);
                jac[(k, (k + 2) % len)] += Complex64::new(1.0, 0.0);
            }
            let step = jac.lu().solve(&(-r))?;
            t.iter_mut().zip(step.iter()).for_each(|(a, b)| *a += b);
        }
        if !converged {
            return None;
        }
        let orbit: Vec<PlanePoint> = (0..params.period).map(|k| PlanePoint::new(t[k * factors.len()], t[(k * factors.len() + 1) % len])).collect();
        if orbit.iter().any(|p| p.x.norm() > radius || p.y.norm() > radius) || !is_saddle(&fiber, orbit[0], params.period) {
            return None;
        }
        Some(orbit)
    };

    let mut points: Vec<PlanePoint> = Vec::new();
    let mut seen: HashMap<Cell, Vec<usize>> = HashMap::new();
    let dedup = 1e-7;
    let mut starts = 0;
    while points.len() < count && starts < params.max_starts {
        let chunk = 256.min(params.max_starts - starts);
        let orbits: Vec<Option<Vec<PlanePoint>>> = (starts..starts + chunk).into_par_iter().map(solve_from).collect();
        starts += chunk;
        for orbit in orbits.into_iter().flatten() {
            if near_any(orbit[0], &points, &seen, dedup) {
                continue;
            }
            for p in orbit {
                if points.len() == count || near_any(p, &points, &seen, dedup) {
                    continue;
                }
                seen.entry(cell_of(p, dedup)).or_default().push(points.len());
                points.push(p);
            }
        }
    }
    let mut warnings = Vec::new();
    if points.len() < count / 2 {
        warnings.push(format!("sparse cloud: {} of {count} points", points.len()));
    }
    Ok(JuliaCloud { lambda, points, brackets: Vec::new(), eta: 0.0, attempts: starts, period: Some(params.period), warnings })
}

fn near_any(p: PlanePoint, points: &[PlanePoint], grid: &HashMap<Cell, Vec<usize>>, tol: f64) -> bool {
    neighbours(cell_of(p, tol)).any(|c| grid.get(&c).is_some_and(|v| v.iter().any(|&j| points[j].dist(&p) <= tol)))
}

fn neighbours(c: Cell) -> impl Iterator<Item = Cell> {
    (0..81).map(move |k| {
        let o = [k % 3, (k / 3) % 3, (k / 9) % 3, k / 27].map(|v| v as i64 - 1);
        [c[0] + o[0], c[1] + o[1], c[2] + o[2], c[3] + o[3]]
    })
}

fn is_saddle(fiber: &Fiber, z: PlanePoint, period: usize) -> bool {
    let mut m = Matrix2::<Complex64>::identity();
    let mut p = z;
    for _ in 0..period {
        let d = fiber.derivative(p);
        m = Matrix2::new(d[0][0], d[0][1], d[1][0], d[1][1]) * m;
        p = fiber.apply(p);
    }
    let tr = m.trace();
    let disc = (tr * tr - 4.0 * m.determinant()).sqrt();
    let (e1, e2) = (((tr + disc) * 0.5).norm(), ((tr - disc) * 0.5).norm());
    e1.max(e2) > 1.0 + 1e-6 && e1.min(e2) < 1.0 - 1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatedSetRun {
    pub n: Vec<usize>,
    pub epsilon: f64,
    pub cloud_size: usize,
    /// Largest separated set found for each `n`.
    pub counts: Vec<usize>,
    pub fit_range: Option<(usize, usize)>,
    pub fit: Option<LinearFit>,
    pub rate: f64,
    pub warnings: Vec<String>,
}

impl SeparatedSetRun {
    pub fn count_at(&self, n: usize) -> Option<usize> {
        self.n.iter().position(|&k| k == n).map(|i| self.counts[i])
    }
}

type Cell = [i64; 4];

fn cell_of(z: PlanePoint, eps: f64) -> Cell {
    [z.x.re, z.x.im, z.y.re, z.y.im].map(|c| (c / eps).floor() as i64)
}

/// Growth rate of `(n, ε)`-separated sets in the cloud under
/// `d_n(p, q) = max_{i<n} d(H^i p, H^i q)`.
///
/// For each shuffle the set for `n` extends the set for `n − 1` greedily, which
/// stays separated since `d_n ≥ d_{n−1}`; counts are the best over shuffles.
pub fn entropy_estimate(engine: &GreenEngine, cloud: &JuliaCloud, n_max: usize, epsilon: f64, shuffles: usize, seed: u64) -> Result<SeparatedSetRun> {
    if n_max == 0 || !(epsilon > 0.0) || shuffles == 0 {
        return Err(Error::Argument("need n_max ≥ 1, ε > 0 and at least one shuffle".into()));
    }
    let mut warnings = Vec::new();
    if !engine.sys.base.is_identity() {
        warnings.push("base map is not the identity: rate is exploratory".into());
    }
    let fibers = engine.sys.fiber_sequence(cloud.lambda, n_max)?;
    // Base points along each orbit coincide, so the product metric reduces to the plane.
    let orbits: Vec<Vec<PlanePoint>> = cloud
        .points
        .par_iter()
        .map(|&z| {
            let mut o = Vec::with_capacity(n_max);
            let mut p = z;
            for k in 0..n_max {
                o.push(p);
                p = fibers.get(k).apply(p);
            }
            o
        })
        .collect();
    let cells: Vec<Cell> = cloud.points.iter().map(|&z| cell_of(z, epsilon)).collect();

    let per_shuffle: Vec<Vec<usize>> = (0..shuffles as u64)
        .into_par_iter()
        .map(|s| {
            let mut order: Vec<usize> = (0..orbits.len()).collect();
            order.shuffle(&mut rng_for(seed, s));
            let mut grid: HashMap<Cell, Vec<usize>> = HashMap::new();
            let mut chosen = vec![false; orbits.len()];
            let mut size = 0;
            let mut counts = Vec::with_capacity(n_max);
            for n in 1..=n_max {
                for &i in &order {
                    if chosen[i] {
                        continue;
                    }
                    if separated_from_all(i, n, epsilon, &orbits, &cells, &grid) {
                        chosen[i] = true;
                        size += 1;
                        grid.entry(cells[i]).or_default().push(i);
                    }
                }
                counts.push(size);
            }
            counts
        })
        .collect();
    let counts: Vec<usize> = (0..n_max).map(|k| per_shuffle.iter().map(|c| c[k]).max().unwrap_or(0)).collect();
    let ns: Vec<usize> = (1..=n_max).collect();

    // Saturation: once a quarter of the cloud is selected, counts stop tracking growth.
    let cap = orbits.len() / 4;
    let horizon = cloud.period.map_or(n_max, |p| n_max.min(p.saturating_sub(1)));
    let last = ns.iter().zip(&counts).take_while(|(&n, &c)| c <= cap && n <= horizon).map(|(&n, _)| n).last().unwrap_or(0);
    if last < n_max {
        warnings.push(format!("cloud too sparse beyond n = {last}: fit truncated"));
    }
    let (fit_range, fit) = if last >= FIT_START + 1 {
        let xs: Vec<f64> = (FIT_START..=last).map(|n| n as f64).collect();
        let ys: Vec<f64> = (FIT_START..=last).map(|n| (counts[n - 1] as f64).ln()).collect();
        (Some((FIT_START, last)), linear_fit(&xs, &ys))
    } else {
        warnings.push("fewer than two usable n values: no fit".into());
        (None, None)
    };
    let rate = fit.map(|f| f.slope).unwrap_or(f64::NAN);
    Ok(SeparatedSetRun { n: ns, epsilon, cloud_size: orbits.len(), counts, fit_range, fit, rate, warnings })
}

fn separated_from_all(i: usize, n: usize, eps: f64, orbits: &[Vec<PlanePoint>], cells: &[Cell], grid: &HashMap<Cell, Vec<usize>>) -> bool {
    !neighbours(cells[i]).any(|c| grid.get(&c).is_some_and(|members| members.iter().any(|&j| (0..n).all(|k| orbits[i][k].dist(&orbits[j][k]) <= eps))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub lambda: BasePoint,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductMeasureSpec {
    pub atoms: Vec<Atom>,
    pub window: Window4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomMass {
    pub lambda: BasePoint,
    pub weight: f64,
    pub mass: f64,
    /// Mass at nodes outside `|x|, |y| ≤ R`.
    pub outside_bidisc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductMeasureReport {
    pub atoms: Vec<AtomMass>,
    pub total: f64,
    pub outside_bidisc: f64,
}

pub fn product_measure(engine: &GreenEngine, spec: &ProductMeasureSpec) -> Result<ProductMeasureReport> {
    if spec.atoms.is_empty() || spec.atoms.iter().any(|a| !(a.weight > 0.0)) {
        return Err(Error::Argument("base measure needs atoms with positive weights".into()));
    }
    let sum: f64 = spec.atoms.iter().map(|a| a.weight).sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Argument(format!("atom weights sum to {sum}, not 1")));
    }
    let mut atoms = Vec::with_capacity(spec.atoms.len());
    for a in &spec.atoms {
        engine.sys.base.space.check(a.lambda)?;
        let g = wedge_measure(engine, a.lambda, spec.window, None)?;
        atoms.push(AtomMass { lambda: a.lambda, weight: a.weight, mass: g.mixed.total, outside_bidisc: g.mixed.total - g.mixed.inside_bidisc });
    }
    let total = atoms.iter().map(|a| a.weight * a.mass).sum();
    let outside_bidisc = atoms.iter().map(|a| a.weight * a.outside_bidisc).sum();
    Ok(ProductMeasureReport { atoms, total, outside_bidisc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{Base, BaseMap, BaseSpace};
    use crate::filtration::escape_classify;
    use crate::henon::{HenonFactor, SkewHenonSystem};

    fn engine(m: usize) -> GreenEngine {
        let base = Base::identity(BaseSpace::ClosedDisc { radius: 0.25 }).unwrap();
        GreenEngine::new(SkewHenonSystem::new(base, vec![HenonFactor::pure_power(2); m]).unwrap()).unwrap()
    }

    #[test]
    fn bisection_cloud_lies_in_vr_and_straddles_escape_boundary() {
        let e = engine(1);
        let l = BasePoint::real(0.0);
        let params = CloudParams { horizon: 60, ..Default::default() };
        let cloud = sample_julia_cloud(&e, l, 120, &params).unwrap();
        assert!(cloud.points.len() >= 60, "{:?}", cloud.warnings);
        let r = e.radius();
        for p in &cloud.points {
            assert!(p.x.norm() <= r && p.y.norm() <= r);
            let gp = e.green(cloud.lambda, *p, Direction::Forward, 1e-12).unwrap().value;
            let gm = e.green(cloud.lambda, *p, Direction::Backward, 1e-12).unwrap().value;
            assert!(gp.max(gm) < 1e-2);
        }
        for (inside, outside) in &cloud.brackets {
            assert!(inside.dist(outside) <= 2.0 * params.bisect_tol);
            let a = escape_classify(&e.sys, l, *inside, params.horizon, &e.filt, Direction::Forward).unwrap();
            let b = escape_classify(&e.sys, l, *outside, params.horizon, &e.filt, Direction::Forward).unwrap();
            assert!(!a.status.escaped() && b.status.escaped());
        }
        assert!(sample_julia_cloud(&e, l, 50, &params).is_err());
    }

    #[test]
    fn periodic_cloud_points_are_distinct_saddles() {
        let e = engine(1);
        let l = BasePoint::real(0.0);
        let cloud = periodic_cloud(&e, l, 400, &PeriodicParams { period: 8, max_starts: 4000, ..Default::default() }).unwrap();
        assert!(cloud.points.len() > 150);
        let fiber = e.sys.fiber(l);
        for (i, &z) in cloud.points.iter().enumerate() {
            let mut p = z;
            for _ in 0..8 {
                p = fiber.apply(p);
            }
            assert!(p.dist(&z) < 1e-8);
            assert!(is_saddle(&fiber, z, 8));
            assert!(cloud.points[..i].iter().all(|q| q.dist(&z) > 1e-7));
        }
    }

    #[test]
    fn periodic_cloud_needs_identity_base() {
        let base = Base::new(BaseSpace::ClosedDisc { radius: 0.25 }, BaseMap::LinearContraction { c: Complex64::new(0.5, 0.0) }).unwrap();
        let e = GreenEngine::new(SkewHenonSystem::new(base, vec![HenonFactor::pure_power(2)]).unwrap()).unwrap();
        assert!(matches!(periodic_cloud(&e, BasePoint::real(0.0), 10, &PeriodicParams::default()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn separated_counts_monotone_and_rate_positive() {
        let e = engine(1);
        let l = BasePoint::real(0.0);
        let cloud = periodic_cloud(&e, l, 2000, &PeriodicParams { period: 11, max_starts: 8000, ..Default::default() }).unwrap();
        let coarse = entropy_estimate(&e, &cloud, 10, 0.8, 2, 1).unwrap();
        let fine = entropy_estimate(&e, &cloud, 10, 0.4, 2, 1).unwrap();
        assert!(coarse.counts[0] >= 1);
        assert!(coarse.counts.windows(2).all(|w| w[0] <= w[1]));
        assert!(fine.counts.iter().zip(&coarse.counts).all(|(f, c)| f >= c));
        assert!(coarse.rate > 0.45 && coarse.rate < 0.8, "{coarse:?}");
        assert!(coarse.fit_range.unwrap().1 <= 10);
    }

    #[test]
    fn single_point_cloud_has_unit_counts() {
        let e = engine(1);
        let cloud = JuliaCloud { lambda: BasePoint::real(0.0), points: vec![PlanePoint::real(2.0, 2.0)], brackets: vec![], eta: 0.0, attempts: 1, period: Some(1), warnings: vec![] };
        let r = entropy_estimate(&e, &cloud, 4, 0.1, 1, 0).unwrap();
        assert_eq!(r.counts, vec![1; 4]);
        assert!(r.fit.is_none() && !r.warnings.is_empty());
    }

    #[test]
    fn product_measure_checks_weights_and_matches_single_atom() {
        let e = engine(1);
        let window = Window4::cube(3.0, 24);
        let l = BasePoint::real(0.0);
        let bad = ProductMeasureSpec { atoms: vec![Atom { lambda: l, weight: 0.7 }], window };
        assert!(product_measure(&e, &bad).is_err());
        let one = product_measure(&e, &ProductMeasureSpec { atoms: vec![Atom { lambda: l, weight: 1.0 }], window }).unwrap();
        let direct = wedge_measure(&e, l, window, None).unwrap().mixed.total;
        assert!((one.total - direct).abs() < 1e-12);
        assert!((one.total - 1.0).abs() < 0.15, "{one:?}");
        assert!(one.outside_bidisc.abs() < 1e-9);
    }
}

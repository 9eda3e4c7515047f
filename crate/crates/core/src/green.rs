//! Fibered Green functions `G_λ^±` with certified tail bounds.
//!
//! Orbits are iterated in plain coordinates until the dominant coordinate
//! passes `LOG_SWITCH`, then continued in log-polar form: the normalized
//! log-modulus `g = log|w_n| / d^n`, the unit phase of `w_n`, and the ratio of the
//! other coordinate to `w_n`. Here `w` is `y` on the forward side and `x` on the
//! backward side.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::BasePoint;
use crate::error::{Error, Result};
use crate::filtration::{classify_region, find_radius, FiltrationData, Region};
use crate::henon::{Direction, FactorAt, Fiber, FiberSequence, PlanePoint, SkewHenonSystem};
use crate::util::{linear_fit, random_in_disc, random_unit, rng_for, LinearFit};

pub const DEFAULT_MAX_ITER: usize = 200;
/// Dominant modulus above which iteration switches to log-polar form.
pub const LOG_SWITCH: f64 = 1e8;

/// Side of the Green function: `Forward` is `G^+`, `Backward` is `G^-`.
pub type Side = Direction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenValue {
    pub value: f64,
    pub n_used: usize,
    pub error_bound: f64,
    pub side: Side,
    /// The orbit never entered the escaping cone within the iteration cap.
    pub cap_limited: bool,
}

/// Log-polar state: dominant coordinate `w = exp(g·scale)·phase`, other coordinate `ratio·w`.
#[derive(Debug, Clone, Copy)]
struct LogState {
    g: f64,
    scale: f64,
    phase: Complex64,
    ratio: Complex64,
    /// log|ratio|, kept separately since `ratio` underflows.
    log_ratio: f64,
}

impl LogState {
    fn new(z: PlanePoint, side: Side, scale: f64) -> Self {
        let (dom, other) = match side {
            Direction::Forward => (z.y, z.x),
            Direction::Backward => (z.x, z.y),
        };
        let m = dom.norm();
        LogState { g: m.ln() / scale, scale, phase: dom / m, ratio: other / dom, log_ratio: other.norm().ln() - m.ln() }
    }

    fn log_modulus(&self) -> f64 {
        let l = self.g * self.scale;
        if l.is_finite() { l } else { f64::MAX }
    }

    /// 1/w, underflowing cleanly to 0.
    fn reciprocal(&self) -> Complex64 {
        self.phase.conj() * (-self.log_modulus()).exp()
    }

    fn forward(&mut self, f: &FactorAt) {
        let d = f.degree();
        let w = self.reciprocal();
        let mut acc = Complex64::new(0.0, 0.0);
        for c in &f.lower {
            acc = (acc + c) * w;
        }
        let wd1 = w.powu(d as u32 - 1);
        let one_q = Complex64::new(1.0, 0.0) + acc - f.a * self.ratio * wd1;
        let m = one_q.norm();
        self.log_ratio = -(d as f64 - 1.0) * self.log_modulus() - m.ln();
        self.scale *= d as f64;
        self.g += m.ln() / self.scale;
        let ph = self.phase.powu(d as u32) * one_q / m;
        self.phase = ph / ph.norm();
        self.ratio = wd1 / one_q;
    }

    fn backward(&mut self, f: &FactorAt) {
        let d = f.degree();
        let w = self.reciprocal();
        let mut acc = Complex64::new(0.0, 0.0);
        for c in &f.lower {
            acc = (acc + c) * w;
        }
        let wd1 = w.powu(d as u32 - 1);
        let one_q = Complex64::new(1.0, 0.0) + acc - self.ratio * wd1;
        let m = one_q.norm();
        let am = f.a.norm();
        self.log_ratio = am.ln() - (d as f64 - 1.0) * self.log_modulus() - m.ln();
        self.scale *= d as f64;
        self.g += (m.ln() - am.ln()) / self.scale;
        let ph = self.phase.powu(d as u32) * one_q / m * (f.a.conj() / am);
        self.phase = ph / ph.norm();
        self.ratio = f.a * wd1 / one_q;
    }

    fn step(&mut self, fiber: &Fiber, side: Side) {
        match side {
            Direction::Forward => fiber.factors.iter().for_each(|f| self.forward(f)),
            Direction::Backward => fiber.factors.iter().rev().for_each(|f| self.backward(f)),
        }
    }

    /// `log‖z‖ / d^n`.
    fn normalized_log_norm(&self) -> f64 {
        self.g + 0.5 * self.ratio.norm_sqr().ln_1p() / self.scale
    }

    fn in_cone(&self, radius: f64) -> bool {
        self.ratio.norm() < 1.0 && self.log_modulus() > radius.ln()
    }
}

enum State {
    Plain(PlanePoint),
    Log(LogState),
}

fn dominant(z: PlanePoint, side: Side) -> f64 {
    match side {
        Direction::Forward => z.y.norm(),
        Direction::Backward => z.x.norm(),
    }
}

fn cone(side: Side) -> Region {
    match side {
        Direction::Forward => Region::Plus,
        Direction::Backward => Region::Minus,
    }
}

/// Orbit of one point under a chosen sequence of fiber maps, switching to log-polar
/// form when the dominant coordinate grows past `LOG_SWITCH`.
pub struct LogOrbit {
    state: State,
    scale: f64,
    side: Side,
    degree: f64,
}

impl LogOrbit {
    pub fn new(z: PlanePoint, side: Side, degree: f64) -> Self {
        let mut o = LogOrbit { state: State::Plain(z), scale: 1.0, side, degree };
        o.promote();
        o
    }

    fn promote(&mut self) {
        if let State::Plain(p) = self.state {
            if dominant(p, self.side) > LOG_SWITCH {
                self.state = State::Log(LogState::new(p, self.side, self.scale));
            }
        }
    }

    pub fn advance(&mut self, fiber: &Fiber) {
        let side = self.side;
        match &mut self.state {
            State::Plain(p) => match fiber.step(*p, side) {
                Ok(next) if next.is_finite() => *p = next,
                _ => {
                    let mut s = LogState::new(*p, side, self.scale);
                    s.step(fiber, side);
                    self.state = State::Log(s);
                }
            },
            State::Log(s) => s.step(fiber, side),
        }
        self.scale *= self.degree;
        self.promote();
    }

    /// `d^{-n} log‖z_n‖`.
    pub fn normalized_log_norm(&self) -> f64 {
        match &self.state {
            State::Plain(p) => p.norm().ln() / self.scale,
            State::Log(s) => s.normalized_log_norm(),
        }
    }

    /// `d^{-n} log|x_n − x0|` for a forward orbit; `-∞` on an exact hit.
    pub fn normalized_log_first(&self, x0: Complex64) -> f64 {
        match &self.state {
            State::Plain(p) => (p.x - x0).norm().ln() / self.scale,
            State::Log(s) => match self.side {
                // x_n = ratio·y_n, so x_n − x0 = y_n·(ratio − x0/y_n).
                Direction::Forward if s.log_ratio > -600.0 => s.g + (s.ratio - x0 * s.reciprocal()).norm().ln() / s.scale,
                // x_n itself is astronomically large.
                Direction::Forward => s.g + s.log_ratio / s.scale,
                // x_n is the dominant coordinate.
                Direction::Backward => s.g + (Complex64::new(1.0, 0.0) - x0 * s.reciprocal()).norm().ln() / s.scale,
            },
        }
    }
}

/// Evaluation context: a system with its filtration and the coefficient bounds
/// that feed the tail estimate.
#[derive(Debug, Clone)]
pub struct GreenEngine {
    pub sys: SkewHenonSystem,
    pub filt: FiltrationData,
    pub max_iter: usize,
    degree: f64,
    /// Per factor: sup over M of |c_{j,i}|.
    coeff_sup: Vec<Vec<f64>>,
    /// Per factor: sup over M of |a_j|, and of |log|a_j||.
    a_sup: Vec<f64>,
    log_a_sup: Vec<f64>,
    /// d_{j+1}⋯d_m.
    weights: Vec<f64>,
}

impl GreenEngine {
    pub fn new(sys: SkewHenonSystem) -> Result<Self> {
        let filt = find_radius(&sys)?;
        Ok(Self::with_filtration(sys, filt))
    }

    pub fn with_filtration(sys: SkewHenonSystem, filt: FiltrationData) -> Self {
        let lam = sys.base.space.modulus_bound();
        let samples = sys.base.space.dense_sample(24);
        let coeff_sup = sys
            .factors
            .iter()
            .map(|f| f.lower.iter().map(|c| c.sup_bound(lam)).collect())
            .collect();
        let a_sup = sys.factors.iter().map(|f| f.a.sup_bound(lam)).collect();
        let log_a_sup = sys
            .factors
            .iter()
            .map(|f| samples.iter().map(|&l| f.a.eval(l).norm().ln().abs()).fold(0.0, f64::max) * 1.01)
            .collect();
        let degs = sys.factor_degrees();
        let weights = (0..degs.len()).map(|j| degs[j + 1..].iter().product::<usize>() as f64).collect();
        let degree = sys.degree() as f64;
        GreenEngine { sys, filt, max_iter: DEFAULT_MAX_ITER, degree, coeff_sup, a_sup, log_a_sup, weights }
    }

    pub fn with_max_iter(mut self, n: usize) -> Self {
        self.max_iter = n;
        self
    }

    pub fn degree(&self) -> f64 {
        self.degree
    }

    pub fn radius(&self) -> f64 {
        self.filt.radius
    }

    pub fn fibers(&self, lambda: BasePoint) -> Result<FiberSequence> {
        self.sys.fiber_sequence(lambda, self.max_iter + 1)
    }

    /// Bound on |log|w_{n+1}| − d·log|w_n|| once |w_n| ≥ `modulus` inside the cone.
    pub fn step_defect(&self, log_modulus: f64, side: Side) -> f64 {
        let mut beta = 0.0;
        for (j, cs) in self.coeff_sup.iter().enumerate() {
            let dj = cs.len() as f64;
            let a_term = match side {
                Direction::Forward => self.a_sup[j],
                Direction::Backward => 1.0,
            };
            let mut eps = a_term * ((1.0 - dj) * log_modulus).exp();
            for (i, c) in cs.iter().enumerate() {
                eps += c * ((i as f64 - dj) * log_modulus).exp();
            }
            if eps >= 0.5 {
                return f64::INFINITY;
            }
            let mut b = -(-eps).ln_1p();
            if side == Direction::Backward {
                b += self.log_a_sup[j];
            }
            beta += self.weights[j] * b;
        }
        beta
    }

    /// Certified Green value: iterate until the tail bound falls below `tol`.
    pub fn green_along(&self, fibers: &FiberSequence, z: PlanePoint, side: Side, tol: f64) -> GreenValue {
        let radius = self.filt.radius;
        let mut state = State::Plain(z);
        let mut scale = 1.0;
        for n in 0..=self.max_iter {
            // Promote to log form once the dominant coordinate is large.
            if let State::Plain(p) = state {
                if dominant(p, side) > LOG_SWITCH {
                    state = State::Log(LogState::new(p, side, scale));
                }
            }
            let certified = match &state {
                State::Plain(p) => {
                    if classify_region(*p, radius) == cone(side) {
                        let lm = dominant(*p, side).ln();
                        let tail = self.step_defect(lm, side) / (scale * (self.degree - 1.0));
                        (tail < tol).then(|| (lm / scale, tail))
                    } else {
                        None
                    }
                }
                State::Log(s) => {
                    if s.in_cone(radius) {
                        let tail = self.step_defect(s.log_modulus(), side) / (s.scale * (self.degree - 1.0));
                        (tail < tol).then_some((s.g, tail))
                    } else {
                        None
                    }
                }
            };
            if let Some((value, tail)) = certified {
                return GreenValue { value: value.max(0.0), n_used: n, error_bound: tail, side, cap_limited: false };
            }
            if n == self.max_iter {
                break;
            }
            let fiber = fibers.get(n);
            match &mut state {
                State::Plain(p) => match fiber.step(*p, side) {
                    Ok(next) if next.is_finite() => *p = next,
                    _ => {
                        // Only reachable from a non-dominant huge coordinate; restart in log form.
                        let mut s = LogState::new(*p, side, scale);
                        s.step(fiber, side);
                        state = State::Log(s);
                    }
                },
                State::Log(s) => s.step(fiber, side),
            }
            scale *= self.degree;
        }
        GreenValue { value: 0.0, n_used: self.max_iter, error_bound: 0.0, side, cap_limited: true }
    }

    pub fn green(&self, lambda: BasePoint, z: PlanePoint, side: Side, tol: f64) -> Result<GreenValue> {
        if !(tol > 0.0) {
            return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
        }
        let fibers = self.fibers(lambda)?;
        Ok(self.green_along(&fibers, z, side, tol))
    }

    /// `G_0, …, G_n` with `G_k = d^{-k} log⁺‖H^{±k}(z)‖`.
    pub fn green_sequence_along(&self, fibers: &FiberSequence, z: PlanePoint, side: Side, n: usize) -> Vec<f64> {
        let mut orbit = LogOrbit::new(z, side, self.degree);
        let mut out = Vec::with_capacity(n + 1);
        out.push(orbit.normalized_log_norm().max(0.0));
        for k in 0..n {
            orbit.advance(fibers.get(k));
            out.push(orbit.normalized_log_norm().max(0.0));
        }
        out
    }

    pub fn green_sequence(&self, lambda: BasePoint, z: PlanePoint, side: Side, n: usize) -> Result<Vec<f64>> {
        let fibers = self.sys.fiber_sequence(lambda, n)?;
        Ok(self.green_sequence_along(&fibers, z, side, n))
    }

    /// `G_{n,λ}^±(z)`.
    pub fn green_n(&self, lambda: BasePoint, z: PlanePoint, n: usize, side: Side) -> Result<f64> {
        Ok(*self.green_sequence(lambda, z, side, n)?.last().expect("sequence has n+1 entries"))
    }

    /// `max(G^+, G^-)`, the pluricomplex Green function of `K_λ`.
    pub fn pluricomplex(&self, lambda: BasePoint, z: PlanePoint, tol: f64) -> Result<f64> {
        let p = self.green(lambda, z, Direction::Forward, tol)?;
        let m = self.green(lambda, z, Direction::Backward, tol)?;
        Ok(p.value.max(m.value))
    }

    /// `G_λ^+(z) − log|y|` on `V_R^+`.
    pub fn u_correction(&self, lambda: BasePoint, z: PlanePoint, tol: f64) -> Result<f64> {
        if classify_region(z, self.filt.radius) != Region::Plus {
            return Err(Error::Domain(format!("({}, {}) is not in V_R^+", z.x, z.y)));
        }
        Ok(self.green(lambda, z, Direction::Forward, tol)?.value - z.y.norm().ln())
    }

    /// Bound on `|u_λ|` on `V_R^+` from the first-step defect at `|y| = R`.
    pub fn u_bound(&self) -> f64 {
        self.step_defect(self.filt.radius.ln(), Direction::Forward) / (self.degree - 1.0)
    }

    pub fn check_invariance(&self, lambda: BasePoint, samples: usize, tol: f64, seed: u64) -> Result<InvarianceResiduals> {
        let next = self.sys.base.apply(lambda)?;
        let f_here = self.fibers(lambda)?;
        let f_next = self.fibers(next)?;
        let fiber = self.sys.fiber(lambda);
        let d = self.degree;
        let half = 1.5 * self.filt.radius;
        let rows: Vec<[f64; 4]> = (0..samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng_for(seed, i as u64);
                let z = PlanePoint::new(
                    crate::util::random_in_square(&mut rng, Complex64::new(0.0, 0.0), half),
                    crate::util::random_in_square(&mut rng, Complex64::new(0.0, 0.0), half),
                );
                let g = |fs: &FiberSequence, p: PlanePoint, s: Side| self.green_along(fs, p, s, tol).value;
                let fz = fiber.apply(z);
                let mut r = [0.0; 4];
                r[0] = (d * g(&f_here, z, Direction::Forward) - g(&f_next, fz, Direction::Forward)).abs();
                r[3] = (g(&f_here, fz, Direction::Backward) - g(&f_next, z, Direction::Backward) / d).abs();
                if let Ok(iz) = fiber.inverse(z) {
                    r[1] = (g(&f_here, iz, Direction::Forward) - g(&f_next, z, Direction::Forward) / d).abs();
                    r[2] = (d * g(&f_here, z, Direction::Backward) - g(&f_next, iz, Direction::Backward)).abs();
                }
                r
            })
            .collect();
        let mut out = [0.0f64; 4];
        for r in rows {
            for k in 0..4 {
                out[k] = out[k].max(r[k]);
            }
        }
        Ok(InvarianceResiduals {
            plus_forward: out[0],
            plus_inverse: out[1],
            minus_inverse: out[2],
            minus_forward: out[3],
            samples,
        })
    }

    /// Values of `G^±` on a square grid of `res × res` points in one complex coordinate.
    pub fn grid_sup_difference(&self, l1: BasePoint, l2: BasePoint, half_width: f64, res: usize, side: Side, tol: f64) -> Result<f64> {
        let f1 = self.fibers(l1)?;
        let f2 = self.fibers(l2)?;
        let pts = crate::util::linspace(-half_width, half_width, res);
        let sup = (0..res * res)
            .into_par_iter()
            .map(|k| {
                // Real slice (x, y) ∈ [−h, h]², the box of the continuity experiment.
                let z = PlanePoint::real(pts[k % res], pts[k / res]);
                (self.green_along(&f1, z, side, tol).value - self.green_along(&f2, z, side, tol).value).abs()
            })
            .reduce(|| 0.0, f64::max);
        Ok(sup)
    }

    /// `sup |G_λ^+ − G_{λ'}^+|` over a real box grid.
    pub fn lambda_continuity(&self, l1: BasePoint, l2: BasePoint, half_width: f64, res: usize) -> Result<f64> {
        self.sys.base.space.check(l1)?;
        self.sys.base.space.check(l2)?;
        self.grid_sup_difference(l1, l2, half_width, res, Direction::Forward, 1e-10)
    }

    /// Sup differences for λ′ = λ + δ·dir along a dyadic ladder of δ.
    pub fn lambda_continuity_table(&self, lambda: BasePoint, dir: Complex64, deltas: &[f64], half_width: f64, res: usize) -> Result<Vec<(f64, f64)>> {
        deltas
            .iter()
            .map(|&delta| {
                let other = BasePoint(lambda.0 + dir * delta);
                Ok((delta, self.lambda_continuity(lambda, other, half_width, res)?))
            })
            .collect()
    }

    pub fn holder_estimate(&self, lambda: BasePoint, box_half_width: f64, scales: &[f64], pairs: usize, seed: u64) -> Result<HolderEstimate> {
        if !self.sys.base.is_surjective() {
            return Err(Error::Unsupported("Hölder estimate needs a surjective base map".into()));
        }
        let a = self.derivative_bound(2000, seed);
        let theoretical = self.degree.ln() / (2.0 * a).ln();
        let fibers = self.fibers(lambda)?;
        // Points of J^+ by bisection between bounded and escaping points of the box.
        let anchors = self.julia_plus_points(&fibers, box_half_width, pairs / scales.len().max(1), seed ^ 0x5eed);
        let mut log_delta = Vec::new();
        let mut log_diff = Vec::new();
        for (s, &delta) in scales.iter().enumerate() {
            let diffs: Vec<f64> = anchors
                .par_iter()
                .enumerate()
                .filter_map(|(i, &p)| {
                    let mut rng = rng_for(seed, (s * anchors.len() + i) as u64);
                    let q = PlanePoint::new(p.x + random_unit(&mut rng) * delta * rng.random::<f64>().sqrt(), p.y)
                        + PlanePoint::new(Complex64::new(0.0, 0.0), random_unit(&mut rng) * delta * 0.5);
                    let q = p + (q - p) * Complex64::new(delta / q.dist(&p), 0.0);
                    let gp = self.green_along(&fibers, p, Direction::Forward, 1e-12).value;
                    let gq = self.green_along(&fibers, q, Direction::Forward, 1e-12).value;
                    let diff = (gp - gq).abs();
                    (diff > 0.0).then(|| diff.ln())
                })
                .collect();
            if !diffs.is_empty() {
                log_delta.push(delta.ln());
                log_diff.push(diffs.iter().sum::<f64>() / diffs.len() as f64);
            }
        }
        let fit = linear_fit(&log_delta, &log_diff);
        Ok(HolderEstimate {
            derivative_bound: a,
            theoretical_exponent: theoretical,
            empirical_exponent: fit.map(|f| f.slope).unwrap_or(f64::NAN),
            fit,
            anchors: anchors.len(),
            scales: scales.to_vec(),
            mean_log_differences: log_diff,
        })
    }

    /// Max over sampled `V_R` points and λ of the operator norm of `DH_λ` and `DH_λ^{-1}`,
    /// by complex central differences.
    pub fn derivative_bound(&self, samples: usize, seed: u64) -> f64 {
        let r = self.filt.radius;
        (0..samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng_for(seed, i as u64);
                let lam = self.sys.base.space.random_point(&mut rng);
                let fiber = self.sys.fiber(lam);
                let z = PlanePoint::new(random_in_disc(&mut rng, r), random_in_disc(&mut rng, r));
                let fwd = fd_norm(|p| Some(fiber.apply(p)), z);
                let bwd = fd_norm(|p| fiber.inverse(p).ok(), z);
                fwd.max(bwd)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Points on the bounded side of `J_λ^+` (60-step horizon), by bisection between
    /// bounded seeds in the box `[-half, half]⁴` and escaping points along random rays.
    pub fn julia_plus_points(&self, fibers: &FiberSequence, half: f64, count: usize, seed: u64) -> Vec<PlanePoint> {
        let horizon = 60;
        let bounded = |z: PlanePoint| {
            !crate::filtration::escape_along(fibers, z, horizon, self.filt.radius, Direction::Forward).status.escaped()
        };
        let mut rng = rng_for(seed, 0);
        let mut seeds_in = Vec::new();
        let mut tries = 0;
        while seeds_in.len() < 64 && tries < 200_000 {
            tries += 1;
            let z = PlanePoint::new(
                crate::util::random_in_square(&mut rng, Complex64::new(0.0, 0.0), half),
                crate::util::random_in_square(&mut rng, Complex64::new(0.0, 0.0), half),
            );
            if bounded(z) {
                seeds_in.push(z);
            }
        }
        if seeds_in.is_empty() {
            return Vec::new();
        }
        (0..count)
            .into_par_iter()
            .filter_map(|i| {
                let mut rng = rng_for(seed, 1 + i as u64);
                let a = seeds_in[rng.random_range(0..seeds_in.len())];
                let dir = PlanePoint::new(random_unit(&mut rng), random_unit(&mut rng) * rng.random::<f64>());
                let mut out = a;
                let mut step = 0.05;
                while bounded(out) && step < 4.0 * half {
                    out = a + dir * Complex64::new(step, 0.0);
                    step *= 1.5;
                }
                if bounded(out) {
                    return None;
                }
                Some(bisect(a, out, 1e-12, &bounded))
            })
            .collect()
    }
}

/// Bisection on a segment for the boundary of a predicate; returns the `true` side.
pub fn bisect(mut inside: PlanePoint, mut outside: PlanePoint, tol: f64, pred: &(impl Fn(PlanePoint) -> bool + ?Sized)) -> PlanePoint {
    while inside.dist(&outside) > tol {
        let mid = (inside + outside) * Complex64::new(0.5, 0.0);
        if pred(mid) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

/// Largest singular value of the complex derivative of `f` at `z`.
fn fd_norm(f: impl Fn(PlanePoint) -> Option<PlanePoint>, z: PlanePoint) -> f64 {
    let h = 1e-6 * (1.0 + z.norm());
    let e = [PlanePoint::real(h, 0.0), PlanePoint::real(0.0, h)];
    let mut cols = [PlanePoint::ORIGIN; 2];
    for k in 0..2 {
        match (f(z + e[k]), f(z - e[k])) {
            (Some(a), Some(b)) => cols[k] = (a - b) * Complex64::new(0.5 / h, 0.0),
            _ => return 0.0,
        }
    }
    spectral_norm([[cols[0].x, cols[1].x], [cols[0].y, cols[1].y]])
}

pub fn spectral_norm(m: [[Complex64; 2]; 2]) -> f64 {
    let a = m[0][0].norm_sqr() + m[1][0].norm_sqr();
    let d = m[0][1].norm_sqr() + m[1][1].norm_sqr();
    let b = m[0][0].conj() * m[0][1] + m[1][0].conj() * m[1][1];
    let tr = a + d;
    let det = a * d - b.norm_sqr();
    (0.5 * (tr + (tr * tr - 4.0 * det).max(0.0).sqrt())).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvarianceResiduals {
    /// `|d·G_λ^+ − G_{σλ}^+ ∘ H_λ|`
    pub plus_forward: f64,
    /// `|G_λ^+ ∘ H_λ^{-1} − d^{-1} G_{σλ}^+|`
    pub plus_inverse: f64,
    /// `|d·G_λ^- − G_{σλ}^- ∘ H_λ^{-1}|`
    pub minus_inverse: f64,
    /// `|G_λ^- ∘ H_λ − d^{-1} G_{σλ}^-|`
    pub minus_forward: f64,
    pub samples: usize,
}

impl InvarianceResiduals {
    pub fn max(&self) -> f64 {
        self.plus_forward.max(self.plus_inverse).max(self.minus_inverse).max(self.minus_forward)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub derivative_bound: f64,
    pub theoretical_exponent: f64,
    pub empirical_exponent: f64,
    pub fit: Option<LinearFit>,
    pub anchors: usize,
    pub scales: Vec<f64>,
    pub mean_log_differences: Vec<f64>,
}

/// Successive differences `sup_z |G_{n+1}(z) − G_n(z)|` over a sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub n: Vec<usize>,
    pub sup_difference: Vec<f64>,
    pub fitted_ratio: f64,
}

/// Mixed sample set for uniform-convergence tables: `count / 2` uniform points of the
/// box `[-half, half]⁴` and `count / 2` points near `J^+`, each at a random λ.
pub fn convergence_samples(engine: &GreenEngine, half: f64, count: usize, seed: u64) -> Result<Vec<(BasePoint, PlanePoint)>> {
    let mut rng = rng_for(seed, u64::MAX);
    let mut out = Vec::with_capacity(count);
    let zero = Complex64::new(0.0, 0.0);
    for _ in 0..count / 2 {
        let lam = engine.sys.base.space.random_point(&mut rng);
        let z = PlanePoint::new(crate::util::random_in_square(&mut rng, zero, half), crate::util::random_in_square(&mut rng, zero, half));
        out.push((lam, z));
    }
    let lambdas: Vec<BasePoint> = (0..8).map(|_| engine.sys.base.space.random_point(&mut rng)).collect();
    let per = (count - count / 2).div_ceil(lambdas.len());
    for (i, &lam) in lambdas.iter().enumerate() {
        let fibers = engine.fibers(lam)?;
        for z in engine.julia_plus_points(&fibers, half, per, seed.wrapping_add(i as u64 + 1)) {
            if out.len() < count {
                out.push((lam, z));
            }
        }
    }
    Ok(out)
}

/// Sup over sample points and λ of `|G_{n+1} − G_n|` for `n` in `n_lo..n_hi`, with a
/// log-linear fit of the decay ratio.
pub fn successive_differences(engine: &GreenEngine, samples: &[(BasePoint, PlanePoint)], side: Side, n_lo: usize, n_hi: usize) -> Result<ConvergenceTable> {
    let rows: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|&(lam, z)| engine.green_sequence(lam, z, side, n_hi + 1))
        .collect::<Result<_>>()?;
    let mut ns = Vec::new();
    let mut sups = Vec::new();
    for n in n_lo..=n_hi {
        let sup = rows.iter().map(|r| (r[n + 1] - r[n]).abs()).fold(0.0, f64::max);
        ns.push(n);
        sups.push(sup);
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = sups.iter().map(|s| s.max(1e-300).ln()).collect();
    let ratio = linear_fit(&xs, &ys).map(|f| f.slope.exp()).unwrap_or(f64::NAN);
    Ok(ConvergenceTable { n: ns, sup_difference: sups, fitted_ratio: ratio })
}

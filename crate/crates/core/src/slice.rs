//! Slice measures `(1/2π) dd^c G^±` on complex lines, Julia supports and the
//! pullback/pushforward identities.

use std::collections::VecDeque;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::BasePoint;
use crate::error::{Error, Result};
use crate::filtration::escape_along;
use crate::green::{GreenEngine, Side};
use crate::henon::{Direction, PlanePoint};

pub const MIN_SLICE_RES: usize = 64;
/// Green tolerance used for grid potentials.
pub const GRID_TOL: f64 = 1e-8;

/// A complex line in C², parametrized by `t ∈ C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SliceSpec {
    /// `{x = x0}`, parameter `y`.
    Vertical { x0: Complex64 },
    /// `{y = y0}`, parameter `x`.
    Horizontal { y0: Complex64 },
    /// `{origin + t·direction}`.
    Affine { origin: PlanePoint, direction: PlanePoint },
}

impl SliceSpec {
    #[inline]
    pub fn point(&self, t: Complex64) -> PlanePoint {
        match *self {
            SliceSpec::Vertical { x0 } => PlanePoint::new(x0, t),
            SliceSpec::Horizontal { y0 } => PlanePoint::new(t, y0),
            SliceSpec::Affine { origin, direction } => origin + direction * t,
        }
    }
}

/// Square window `center + [-half_width, half_width]²` sampled at `res × res` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: Complex64,
    pub half_width: f64,
    pub res: usize,
}

impl Window {
    pub fn new(center: Complex64, half_width: f64, res: usize) -> Self {
        Window { center, half_width, res }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.res - 1) as f64
    }

    /// Node `(i, j)`: `i` along the real axis, `j` along the imaginary axis.
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Complex64 {
        let h = self.spacing();
        self.center + Complex64::new(-self.half_width + i as f64 * h, -self.half_width + j as f64 * h)
    }

    fn validate(&self, min_res: usize) -> Result<()> {
        if self.res < min_res {
            return Err(Error::Argument(format!("resolution {} below minimum {min_res}", self.res)));
        }
        if !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return Err(Error::Argument(format!("bad window half-width {}", self.half_width)));
        }
        Ok(())
    }
}

/// Sampled potential on a slice window, row-major with `j` (imaginary part) as row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSliceGrid {
    pub slice: SliceSpec,
    pub window: Window,
    pub values: Vec<f64>,
    pub cap_limited_fraction: f64,
}

impl ComplexSliceGrid {
    pub fn h(&self) -> f64 {
        self.window.spacing()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.window.res + i]
    }

    /// Grid of an arbitrary potential `f` on the slice.
    pub fn from_fn(slice: SliceSpec, window: Window, f: impl Fn(PlanePoint) -> (f64, bool) + Sync) -> Self {
        let n = window.res;
        let vals: Vec<(f64, bool)> = (0..n * n)
            .into_par_iter()
            .map(|k| f(slice.point(window.node(k % n, k / n))))
            .collect();
        let capped = vals.iter().filter(|v| v.1).count();
        ComplexSliceGrid {
            slice,
            window,
            values: vals.into_iter().map(|v| v.0).collect(),
            cap_limited_fraction: capped as f64 / (n * n) as f64,
        }
    }

    pub fn green(engine: &GreenEngine, lambda: BasePoint, side: Side, slice: SliceSpec, window: Window) -> Result<Self> {
        let fibers = engine.fibers(lambda)?;
        Ok(Self::from_fn(slice, window, |z| {
            let v = engine.green_along(&fibers, z, side, GRID_TOL);
            (v.value, v.cap_limited)
        }))
    }

    /// Cell masses `(1/2π) Δu h²` by the isotropic 9-point stencil; boundary nodes carry
    /// no mass. The interior sum telescopes to a discrete boundary flux.
    pub fn measure(&self) -> SliceMeasure {
        let n = self.window.res;
        let mut masses = vec![0.0; n * n];
        masses.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
            if j == 0 || j == n - 1 {
                return;
            }
            for i in 1..n - 1 {
                let edges = self.at(i + 1, j) + self.at(i - 1, j) + self.at(i, j + 1) + self.at(i, j - 1);
                let corners = self.at(i + 1, j + 1) + self.at(i - 1, j - 1) + self.at(i + 1, j - 1) + self.at(i - 1, j + 1);
                let lap = (4.0 * edges + corners - 20.0 * self.at(i, j)) / 6.0;
                row[i] = lap / std::f64::consts::TAU;
            }
        });
        let mut negative = 0.0;
        let mut total = 0.0;
        for m in masses.iter_mut() {
            if *m < 0.0 {
                negative -= *m;
                *m = 0.0;
            }
            total += *m;
        }
        let mut warnings = Vec::new();
        if self.cap_limited_fraction > 0.5 {
            warnings.push(format!(
                "unreliable window: {:.1}% of nodes hit the iteration cap",
                100.0 * self.cap_limited_fraction
            ));
        }
        SliceMeasure { window: self.window, masses, total, clamped_negative: negative, warnings }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceMeasure {
    pub window: Window,
    pub masses: Vec<f64>,
    pub total: f64,
    /// Total negative stencil mass removed by clamping.
    pub clamped_negative: f64,
    pub warnings: Vec<String>,
}

impl SliceMeasure {
    pub fn res(&self) -> usize {
        self.window.res
    }

    /// Sum of `weight(t) · mass` over cells.
    pub fn weighted_total(&self, weight: impl Fn(Complex64) -> f64) -> f64 {
        let n = self.res();
        self.masses
            .iter()
            .enumerate()
            .filter(|(_, m)| **m > 0.0)
            .map(|(k, m)| m * weight(self.window.node(k % n, k / n)))
            .sum()
    }
}

pub fn mu_slice(engine: &GreenEngine, lambda: BasePoint, side: Side, slice: SliceSpec, window: Window) -> Result<SliceMeasure> {
    window.validate(MIN_SLICE_RES)?;
    Ok(ComplexSliceGrid::green(engine, lambda, side, slice, window)?.measure())
}

/// Square boolean bitmap, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bitmap {
    pub res: usize,
    pub cells: Vec<bool>,
}

impl Bitmap {
    pub fn empty(res: usize) -> Self {
        Bitmap { res, cells: vec![false; res * res] }
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[j * self.res + i]
    }

    pub fn is_subset(&self, other: &Bitmap) -> bool {
        self.cells.iter().zip(&other.cells).all(|(a, b)| !*a || *b)
    }

    /// Chebyshev distance from every cell to the nearest set cell (`usize::MAX` if empty).
    pub fn distance_field(&self) -> Vec<usize> {
        let n = self.res;
        let mut dist = vec![usize::MAX; n * n];
        let mut queue = VecDeque::new();
        for (k, &c) in self.cells.iter().enumerate() {
            if c {
                dist[k] = 0;
                queue.push_back(k);
            }
        }
        while let Some(k) = queue.pop_front() {
            let (i, j) = ((k % n) as isize, (k / n) as isize);
            for dj in -1..=1 {
                for di in -1..=1 {
                    let (a, b) = (i + di, j + dj);
                    if a < 0 || b < 0 || a >= n as isize || b >= n as isize {
                        continue;
                    }
                    let kk = b as usize * n + a as usize;
                    if dist[kk] == usize::MAX {
                        dist[kk] = dist[k] + 1;
                        queue.push_back(kk);
                    }
                }
            }
        }
        dist
    }

    /// Cells within Chebyshev distance `r` of a set cell.
    pub fn dilate(&self, r: usize) -> Bitmap {
        Bitmap { res: self.res, cells: self.distance_field().into_iter().map(|d| d <= r).collect() }
    }

    /// Largest distance from a cell of `self` to the nearest cell of `other`.
    pub fn max_distance_to(&self, other: &Bitmap) -> Option<usize> {
        let field = other.distance_field();
        self.cells.iter().zip(&field).filter(|(c, _)| **c).map(|(_, d)| *d).max()
    }
}

/// Smallest set of cells, taken by decreasing mass, that carries `fraction` of the total.
pub fn julia_support(measure: &SliceMeasure, fraction: f64) -> Result<Bitmap> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Argument(format!("mass fraction must lie in (0, 1), got {fraction}")));
    }
    let mut out = Bitmap::empty(measure.res());
    if measure.total <= 0.0 {
        return Ok(out);
    }
    let mut order: Vec<usize> = (0..measure.masses.len()).filter(|&k| measure.masses[k] > 0.0).collect();
    order.sort_by(|&a, &b| measure.masses[b].total_cmp(&measure.masses[a]).then(a.cmp(&b)));
    let target = fraction * measure.total;
    let mut acc = 0.0;
    for k in order {
        if acc >= target {
            break;
        }
        out.cells[k] = true;
        acc += measure.masses[k];
    }
    Ok(out)
}

/// Escape step of every window node (`None` when bounded through `horizon`).
pub fn escape_times(engine: &GreenEngine, lambda: BasePoint, side: Side, slice: SliceSpec, window: Window, horizon: usize) -> Result<Vec<Option<usize>>> {
    let fibers = engine.fibers(lambda)?;
    let n = window.res;
    let r = engine.radius();
    Ok((0..n * n)
        .into_par_iter()
        .map(|k| escape_along(&fibers, slice.point(window.node(k % n, k / n)), horizon, r, side).status.step())
        .collect())
}

/// Nodes where the "bounded through N" verdict differs from a 4-neighbour for some
/// horizon `N` in `n_lo..=n_hi`.
pub fn escape_boundary(times: &[Option<usize>], res: usize, n_lo: usize, n_hi: usize) -> Bitmap {
    let t = |k: usize| times[k].unwrap_or(usize::MAX);
    let mut out = Bitmap::empty(res);
    for j in 0..res {
        for i in 0..res {
            let k = j * res + i;
            let mut nbrs = [None; 4];
            if i > 0 { nbrs[0] = Some(k - 1); }
            if i + 1 < res { nbrs[1] = Some(k + 1); }
            if j > 0 { nbrs[2] = Some(k - res); }
            if j + 1 < res { nbrs[3] = Some(k + res); }
            out.cells[k] = nbrs.iter().flatten().any(|&b| {
                let (lo, hi) = (t(k).min(t(b)), t(k).max(t(b)));
                lo < hi && lo <= n_hi && hi > n_lo
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullbackReport {
    pub side: Side,
    /// Transformed-potential mass over reference mass.
    pub mass_ratio: f64,
    pub expected_ratio: f64,
    /// `Σ|m_transformed − expected·m_reference| / (expected·Σ m_reference)`.
    pub l1_discrepancy: f64,
    pub reference_mass: f64,
    pub transformed_mass: f64,
}

/// `(H^{±1})^* μ^±_{σλ} = d μ^±_λ` on one slice: the slice mass of
/// `G^±_{σλ} ∘ H_λ^{±1}` against that of `G^±_λ`.
pub fn pullback_identity_check(engine: &GreenEngine, lambda: BasePoint, side: Side, slice: SliceSpec, window: Window) -> Result<PullbackReport> {
    window.validate(MIN_SLICE_RES)?;
    let next = engine.sys.base.apply(lambda)?;
    let fiber = engine.sys.fiber(lambda);
    let f_next = engine.fibers(next)?;
    let reference = ComplexSliceGrid::green(engine, lambda, side, slice, window)?.measure();
    let pulled = ComplexSliceGrid::from_fn(slice, window, |z| match fiber.step(z, side) {
        Ok(w) => {
            let v = engine.green_along(&f_next, w, side, GRID_TOL);
            (v.value, v.cap_limited)
        }
        Err(_) => (f64::NAN, true),
    })
    .measure();
    Ok(compare(side, &reference, &pulled, engine.degree()))
}

/// `(H_λ)_* μ^±_λ` against `μ^±_{σλ}`: the slice mass of `G^±_λ ∘ H_λ^{-1}` over that of
/// `G^±_{σλ}`. Expected ratio `1/d` for `+`; for `−` it is `d` when σ is the identity.
pub fn pushforward_check(engine: &GreenEngine, lambda: BasePoint, side: Side, slice: SliceSpec, window: Window) -> Result<PullbackReport> {
    window.validate(MIN_SLICE_RES)?;
    if side == Direction::Backward && !engine.sys.base.is_identity() {
        return Err(Error::Unsupported("the pushforward of μ^- relates fibers only when σ = id".into()));
    }
    let next = engine.sys.base.apply(lambda)?;
    let fiber = engine.sys.fiber(lambda);
    let f_here = engine.fibers(lambda)?;
    let reference = ComplexSliceGrid::green(engine, next, side, slice, window)?.measure();
    let pushed = ComplexSliceGrid::from_fn(slice, window, |z| match fiber.inverse(z) {
        Ok(w) => {
            let v = engine.green_along(&f_here, w, side, GRID_TOL);
            (v.value, v.cap_limited)
        }
        Err(_) => (f64::NAN, true),
    })
    .measure();
    let d = engine.degree();
    let expected = match side {
        Direction::Forward => 1.0 / d,
        Direction::Backward => d,
    };
    Ok(compare(side, &reference, &pushed, expected))
}

fn compare(side: Side, reference: &SliceMeasure, transformed: &SliceMeasure, expected: f64) -> PullbackReport {
    let l1: f64 = reference
        .masses
        .iter()
        .zip(&transformed.masses)
        .map(|(r, t)| (t - expected * r).abs())
        .sum();
    PullbackReport {
        side,
        mass_ratio: transformed.total / reference.total,
        expected_ratio: expected,
        l1_discrepancy: l1 / (expected * reference.total),
        reference_mass: reference.total,
        transformed_mass: transformed.total,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemicontinuityRow {
    pub delta: f64,
    pub lambda: Complex64,
    /// Smallest ε (cells) such that every support cell at λ₀ lies within ε of the support at λ.
    pub epsilon_cells: usize,
}

/// Lower semicontinuity probe for `λ ↦ J_λ^+` along a δ ladder.
pub fn julia_lower_semicontinuity(
    engine: &GreenEngine,
    lambda0: BasePoint,
    deltas: &[f64],
    slice: SliceSpec,
    window: Window,
    fraction: f64,
) -> Result<Vec<SemicontinuityRow>> {
    engine.sys.base.space.check(lambda0)?;
    let support = |l: BasePoint| -> Result<Bitmap> {
        julia_support(&mu_slice(engine, l, Direction::Forward, slice, window)?, fraction)
    };
    let s0 = support(lambda0)?;
    // Step toward the center of M so the perturbed parameter stays inside.
    let dir = if lambda0.0.norm() > 0.0 { -lambda0.0 / lambda0.0.norm() } else { Complex64::new(1.0, 0.0) };
    deltas
        .iter()
        .map(|&delta| {
            let mut lam = BasePoint(lambda0.0 + dir * (0.999 * delta));
            if !engine.sys.base.space.contains(lam) {
                lam = lambda0;
            }
            let s = support(lam)?;
            let eps = s0.max_distance_to(&s).unwrap_or(0);
            Ok(SemicontinuityRow { delta, lambda: lam.0, epsilon_cells: eps })
        })
        .collect()
}

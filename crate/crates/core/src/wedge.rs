//! Discrete `μ_λ = μ^+ ∧ μ^-` on a 4-real-dimensional grid.
//!
//! Every second derivative is a product of two central differences of step
//! `h`, so grid sums of the mixed complex Hessian telescope to boundary terms,
//! as the wedge product does in the continuum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::BasePoint;
use crate::error::{Error, Result};
use crate::green::GreenEngine;
use crate::henon::{Direction, PlanePoint};
use crate::slice::GRID_TOL;

pub const MIN_WEDGE_RES: usize = 24;

/// Axis-aligned box `center ± half_width` in `(Re x, Im x, Re y, Im y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window4 {
    pub center: [f64; 4],
    pub half_width: f64,
    pub res: usize,
}

impl Window4 {
    pub fn cube(half_width: f64, res: usize) -> Self {
        Window4 { center: [0.0; 4], half_width, res }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.res - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.res.pow(4)
    }

    pub fn is_empty(&self) -> bool {
        self.res == 0
    }

    #[inline]
    pub fn index(&self, i: [usize; 4]) -> usize {
        ((i[0] * self.res + i[1]) * self.res + i[2]) * self.res + i[3]
    }

    #[inline]
    pub fn unindex(&self, mut k: usize) -> [usize; 4] {
        let n = self.res;
        let mut out = [0; 4];
        for a in (0..4).rev() {
            out[a] = k % n;
            k /= n;
        }
        out
    }

    pub fn point(&self, i: [usize; 4]) -> PlanePoint {
        let h = self.spacing();
        let c = |a: usize| self.center[a] - self.half_width + i[a] as f64 * h;
        PlanePoint::new(num_complex::Complex64::new(c(0), c(1)), num_complex::Complex64::new(c(2), c(3)))
    }
}

/// Complex Hessian entries `(u_{11̄}, u_{22̄}, u_{12̄})` at an interior node.
#[inline]
fn complex_hessian(f: &[f64], w: &Window4, i: [usize; 4]) -> (f64, f64, num_complex::Complex64) {
    let n = w.res;
    let stride = [n * n * n, n * n, n, 1];
    let k = w.index(i);
    let h2 = 4.0 * w.spacing() * w.spacing();
    let pure = |a: usize| (f[k + 2 * stride[a]] - 2.0 * f[k] + f[k - 2 * stride[a]]) / h2;
    let mixed = |a: usize, b: usize| {
        (f[k + stride[a] + stride[b]] - f[k + stride[a] - stride[b]] - f[k - stride[a] + stride[b]] + f[k - stride[a] - stride[b]]) / h2
    };
    let u11 = 0.25 * (pure(0) + pure(1));
    let u22 = 0.25 * (pure(2) + pure(3));
    let u12 = 0.25 * num_complex::Complex64::new(mixed(0, 2) + mixed(1, 3), mixed(0, 3) - mixed(1, 2));
    (u11, u22, u12)
}

/// `u_{11̄}v_{22̄} + u_{22̄}v_{11̄} − 2 Re(u_{12̄} conj(v_{12̄}))`.
#[inline]
fn mix(u: (f64, f64, num_complex::Complex64), v: (f64, f64, num_complex::Complex64)) -> f64 {
    u.0 * v.1 + u.1 * v.0 - 2.0 * (u.2 * v.2.conj()).re
}

const DENSITY_SCALE: f64 = 4.0 / (std::f64::consts::PI * std::f64::consts::PI);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedgeMass {
    pub total: f64,
    pub negative: f64,
    /// Mass in nodes inside the filtration bidisc `|x|, |y| ≤ R`.
    pub inside_bidisc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedgeGrid {
    pub window: Window4,
    pub epsilon: f64,
    /// Mode (a): mixed Hessian of `(G^+, G^-)`.
    pub mixed: WedgeMass,
    /// Mode (b): Monge–Ampère of `max(G^+, G^-, ε)`.
    pub regularized: WedgeMass,
    /// Mode (b) at `ε/2`.
    pub regularized_half: WedgeMass,
    /// Mode (a) density per node (zero on the two-node margin).
    #[serde(skip)]
    pub density: Vec<f64>,
}

impl WedgeGrid {
    pub fn max_mode_spread(&self) -> f64 {
        let m = [self.mixed.total, self.regularized.total, self.regularized_half.total];
        let hi = m.iter().cloned().fold(f64::MIN, f64::max);
        let lo = m.iter().cloned().fold(f64::MAX, f64::min);
        (hi - lo) / hi.abs().max(f64::MIN_POSITIVE)
    }
}

/// Default regularization level: ten grid spacings, capped at 0.1 so the level set
/// `{G^+ = G^- = ε}` stays inside moderate windows.
pub fn default_epsilon(window: &Window4) -> f64 {
    (10.0 * window.spacing()).min(0.1)
}

fn accumulate(window: &Window4, radius: f64, density: impl Fn([usize; 4]) -> f64 + Sync) -> (WedgeMass, Vec<f64>) {
    let n = window.res;
    let h4 = window.spacing().powi(4);
    let vals: Vec<f64> = (0..window.len())
        .into_par_iter()
        .map(|k| {
            let i = window.unindex(k);
            if i.iter().any(|&c| c < 2 || c + 2 >= n) {
                return 0.0;
            }
            density(i) * h4
        })
        .collect();
    let mut mass = WedgeMass { total: 0.0, negative: 0.0, inside_bidisc: 0.0 };
    for (k, &v) in vals.iter().enumerate() {
        mass.total += v;
        if v < 0.0 {
            mass.negative -= v;
        }
        let p = window.point(window.unindex(k));
        if p.x.norm() <= radius && p.y.norm() <= radius {
            mass.inside_bidisc += v;
        }
    }
    (mass, vals)
}

pub fn wedge_measure(engine: &GreenEngine, lambda: BasePoint, window: Window4, epsilon: Option<f64>) -> Result<WedgeGrid> {
    if window.res < MIN_WEDGE_RES {
        return Err(Error::Argument(format!("wedge resolution {} below minimum {MIN_WEDGE_RES}", window.res)));
    }
    let eps = epsilon.unwrap_or_else(|| default_epsilon(&window));
    if !(eps > 0.0) {
        return Err(Error::Argument(format!("regularization level must be positive, got {eps}")));
    }
    let fibers = engine.fibers(lambda)?;
    let (gp, gm): (Vec<f64>, Vec<f64>) = (0..window.len())
        .into_par_iter()
        .map(|k| {
            let z = window.point(window.unindex(k));
            (
                engine.green_along(&fibers, z, Direction::Forward, GRID_TOL).value,
                engine.green_along(&fibers, z, Direction::Backward, GRID_TOL).value,
            )
        })
        .unzip();
    let r = engine.radius();
    let (mixed, density) = accumulate(&window, r, |i| {
        DENSITY_SCALE * mix(complex_hessian(&gp, &window, i), complex_hessian(&gm, &window, i))
    });
    let regularized_at = |e: f64| {
        let w: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| a.max(*b).max(e)).collect();
        accumulate(&window, r, |i| {
            let hw = complex_hessian(&w, &window, i);
            DENSITY_SCALE * mix(hw, hw)
        })
        .0
    };
    Ok(WedgeGrid {
        window,
        epsilon: eps,
        mixed,
        regularized: regularized_at(eps),
        regularized_half: regularized_at(0.5 * eps),
        density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{Base, BaseSpace};
    use crate::henon::{HenonFactor, SkewHenonSystem};

    #[test]
    fn pluriharmonic_pair_has_no_mass() {
        // u = log|x|, v = log|y| away from the axes: MIX(u, v) vanishes.
        let w = Window4 { center: [3.0, 0.0, 3.0, 0.0], half_width: 1.0, res: 24 };
        let n = w.len();
        let u: Vec<f64> = (0..n).map(|k| w.point(w.unindex(k)).x.norm().ln()).collect();
        let v: Vec<f64> = (0..n).map(|k| w.point(w.unindex(k)).y.norm().ln()).collect();
        let (m, _) = accumulate(&w, 10.0, |i| DENSITY_SCALE * mix(complex_hessian(&u, &w, i), complex_hessian(&v, &w, i)));
        assert!(m.total.abs() < 1e-6, "{m:?}");
    }

    #[test]
    fn product_of_log_plus_has_unit_mass() {
        // log⁺|x| ∧ log⁺|y| is the product of unit circle measures.
        let w = Window4::cube(2.0, 33);
        let n = w.len();
        let u: Vec<f64> = (0..n).map(|k| w.point(w.unindex(k)).x.norm().ln().max(0.0)).collect();
        let v: Vec<f64> = (0..n).map(|k| w.point(w.unindex(k)).y.norm().ln().max(0.0)).collect();
        let (m, _) = accumulate(&w, 10.0, |i| DENSITY_SCALE * mix(complex_hessian(&u, &w, i), complex_hessian(&v, &w, i)));
        assert!((m.total - 1.0).abs() < 0.05, "{m:?}");
    }

    #[test]
    fn escape_window_is_massless_and_res_checked() {
        let sys = SkewHenonSystem::new(Base::identity(BaseSpace::ClosedDisc { radius: 0.25 }).unwrap(), vec![HenonFactor::pure_power(2)]).unwrap();
        let e = GreenEngine::new(sys).unwrap();
        let w = Window4 { center: [20.0, 0.0, 40.0, 0.0], half_width: 2.0, res: 24 };
        let g = wedge_measure(&e, BasePoint::real(0.0), w, None).unwrap();
        assert!(g.mixed.total.abs() < 1e-3, "{:?}", g.mixed);
        assert!(wedge_measure(&e, BasePoint::real(0.0), Window4::cube(3.0, 16), None).is_err());
    }
}

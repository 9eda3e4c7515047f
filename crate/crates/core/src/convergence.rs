//! Pullback of line currents toward `μ^+` at the potential level, the constant
//! `∫ψ T ∧ μ^-` for identity base maps, and the Cauchy behaviour of `G̃^-`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::BasePoint;
use crate::error::{Error, Result};
use crate::green::{GreenEngine, LogOrbit};
use crate::henon::{Direction, FiberSequence, PlanePoint};
use crate::slice::{mu_slice, Bitmap, ComplexSliceGrid, SliceSpec, Window};
use crate::util::{linear_fit, random_in_square, rng_for};

/// Cells within this Chebyshev distance of a logarithmic pole are left out of norms.
pub const SENTINEL_COLLAR: usize = 3;

/// `d^{-n} log|π₁(H_λ^{+n}(z)) − x₀|`; `-∞` on an exact hit.
pub fn pullback_potential_along(engine: &GreenEngine, fibers: &FiberSequence, n: usize, x0: Complex64, z: PlanePoint) -> f64 {
    let mut orbit = LogOrbit::new(z, Direction::Forward, engine.degree());
    for k in 0..n {
        orbit.advance(fibers.get(k));
    }
    orbit.normalized_log_first(x0)
}

pub fn pullback_potential(engine: &GreenEngine, lambda: BasePoint, n: usize, x0: Complex64, z: PlanePoint) -> Result<f64> {
    if n == 0 {
        return Err(Error::Argument("pullback order must be at least 1".into()));
    }
    let fibers = engine.sys.fiber_sequence(lambda, n)?;
    Ok(pullback_potential_along(engine, &fibers, n, x0, z))
}

/// Current pulled back by `H_λ^{+n}` and normalized by `d^{-n}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PullbackTarget {
    /// Integration current on `{x = x0}`.
    Line { x0: Complex64 },
    /// The current `μ^+_{σ^n(λ)}` itself.
    GreenPlus,
}

impl PullbackTarget {
    /// Multiple `c` with potentials converging to `c·G^+_λ`: `π₁ ∘ H_λ` has degree
    /// `d/d_m` in the fiber coordinates, so the line target gives `1/d_m`.
    pub fn limit_multiple(&self, engine: &GreenEngine) -> f64 {
        match self {
            PullbackTarget::Line { .. } => 1.0 / engine.sys.last_factor_degree() as f64,
            PullbackTarget::GreenPlus => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub n: usize,
    pub l1_distance: f64,
    pub kappa: f64,
    pub excluded_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullbackExperiment {
    pub target: PullbackTarget,
    pub slice: SliceSpec,
    pub window: Window,
    pub multiple: f64,
    pub rows: Vec<DistanceRow>,
}

impl PullbackExperiment {
    pub fn final_over_initial(&self) -> f64 {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) if a.l1_distance > 0.0 => b.l1_distance / a.l1_distance,
            _ => f64::NAN,
        }
    }

    /// Distances strictly decrease for all rows with `n ≥ from`.
    pub fn tail_monotone(&self, from: usize) -> bool {
        let tail: Vec<f64> = self.rows.iter().filter(|r| r.n >= from).map(|r| r.l1_distance).collect();
        tail.windows(2).all(|w| w[1] < w[0])
    }
}

pub fn pullback_convergence(
    engine: &GreenEngine,
    lambda: BasePoint,
    target: PullbackTarget,
    n_list: &[usize],
    slice: SliceSpec,
    window: Window,
) -> Result<PullbackExperiment> {
    if n_list.iter().any(|&n| n == 0) {
        return Err(Error::Argument("pullback order must be at least 1".into()));
    }
    let n_max = n_list.iter().copied().max().unwrap_or(1);
    let fibers = engine.sys.fiber_sequence(lambda, n_max + engine.max_iter + 1)?;
    let c = target.limit_multiple(engine);
    let reference = ComplexSliceGrid::green(engine, lambda, Direction::Forward, slice, window)?;
    let res = window.res;
    let h2 = window.spacing().powi(2);
    let orbit_lambdas = engine.sys.base.sigma_orbit(lambda, n_max + 1)?;
    let rows = n_list
        .iter()
        .map(|&n| {
            let values: Vec<f64> = (0..res * res)
                .into_par_iter()
                .map(|k| {
                    let z = slice.point(window.node(k % res, k / res));
                    match target {
                        PullbackTarget::Line { x0 } => pullback_potential_along(engine, &fibers, n, x0, z),
                        PullbackTarget::GreenPlus => pulled_green(engine, &fibers, &orbit_lambdas, n, z),
                    }
                })
                .collect();
            let poles = Bitmap { res, cells: values.iter().map(|v| !v.is_finite()).collect() };
            let excluded = if poles.count() > 0 { poles.dilate(SENTINEL_COLLAR) } else { poles };
            let diffs: Vec<f64> = values
                .iter()
                .zip(&reference.values)
                .zip(&excluded.cells)
                .filter(|(_, ex)| !**ex)
                .map(|((p, g), _)| p - c * g)
                .collect();
            let kappa = diffs.iter().sum::<f64>() / diffs.len().max(1) as f64;
            let l1 = diffs.iter().map(|d| (d - kappa).abs()).sum::<f64>() * h2;
            DistanceRow { n, l1_distance: l1, kappa, excluded_cells: excluded.count() }
        })
        .collect();
    Ok(PullbackExperiment { target, slice, window, multiple: c, rows })
}

/// `d^{-n} G^+_{σ^n λ}(H_λ^{+n} z)`, stopping early once the orbit is large.
fn pulled_green(engine: &GreenEngine, fibers: &FiberSequence, lambdas: &[BasePoint], n: usize, z: PlanePoint) -> f64 {
    let mut p = z;
    let mut k = 0;
    while k < n && p.norm() < 1e50 {
        p = fibers.get(k).apply(p);
        k += 1;
    }
    let later = engine.fibers(lambdas[k]).expect("σ-orbit points lie in M");
    engine.green_along(&later, p, Direction::Forward, 1e-12).value / engine.degree().powi(k as i32)
}

/// Weight function ψ on the line parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Bump {
    Constant,
    /// `(1 − s²)³` with `s = |t − center| / radius`, zero for `s ≥ 1`.
    Radial { center: Complex64, radius: f64 },
}

impl Bump {
    pub fn eval(&self, t: Complex64) -> f64 {
        match *self {
            Bump::Constant => 1.0,
            Bump::Radial { center, radius } => {
                let s2 = ((t - center).norm() / radius).powi(2);
                if s2 >= 1.0 { 0.0 } else { (1.0 - s2).powi(3) }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitConstantReport {
    pub constant: f64,
    pub slice_mass: f64,
    pub warnings: Vec<String>,
}

/// `∫ψ [x = x0] ∧ μ^-_λ` as the ψ-weighted `μ^-` mass of the slice `{x = x0}`.
pub fn limit_constant(engine: &GreenEngine, lambda: BasePoint, psi: Bump, x0: Complex64, window: Window) -> Result<LimitConstantReport> {
    if !engine.sys.base.is_identity() {
        return Err(Error::Unsupported("the limit constant is computed for identity base maps only".into()));
    }
    let m = mu_slice(engine, lambda, Direction::Backward, SliceSpec::Vertical { x0 }, window)?;
    let constant = m.weighted_total(|t| psi.eval(t));
    let mut warnings = m.warnings.clone();
    if constant < 1e-3 {
        warnings.push("line misses J^- inside the window: constant is zero".into());
    }
    Ok(LimitConstantReport { constant, slice_mass: m.total, warnings })
}

/// `G̃^-_{n,λ}(z) = d^{-n} log⁺‖(H_λ^{+n})^{-1}(z)‖`.
pub fn gtilde_minus_along(engine: &GreenEngine, fibers: &FiberSequence, z: PlanePoint, n: usize) -> f64 {
    let mut orbit = LogOrbit::new(z, Direction::Backward, engine.degree());
    for k in (0..n).rev() {
        orbit.advance(fibers.get(k));
    }
    orbit.normalized_log_norm().max(0.0)
}

pub fn gtilde_minus(engine: &GreenEngine, lambda: BasePoint, z: PlanePoint, n: usize) -> Result<f64> {
    let fibers = engine.sys.fiber_sequence(lambda, n)?;
    Ok(gtilde_minus_along(engine, &fibers, z, n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionCheck {
    pub lambdas: Vec<Complex64>,
    pub n: Vec<usize>,
    /// `sup |G̃^-_{n+1} − G̃^-_n|` over the sample set.
    pub sup_difference: Vec<f64>,
    pub fitted_ratio: f64,
}

/// Sup-norm Cauchy differences of `G̃^-_n` over `[-half, half]⁴` for `n` in `n_lo..=n_hi`.
pub fn contraction_cauchy_check(engine: &GreenEngine, half: f64, n_lo: usize, n_hi: usize, samples: usize, lambdas: usize, seed: u64) -> Result<ContractionCheck> {
    if !engine.sys.base.is_contraction() {
        return Err(Error::Unsupported("Cauchy check for G̃^- needs a contracting base map".into()));
    }
    let mut rng = rng_for(seed, u64::MAX);
    let lams: Vec<BasePoint> = (0..lambdas).map(|_| engine.sys.base.space.random_point(&mut rng)).collect();
    let zero = Complex64::new(0.0, 0.0);
    let points: Vec<PlanePoint> = (0..samples)
        .map(|_| PlanePoint::new(random_in_square(&mut rng, zero, half), random_in_square(&mut rng, zero, half)))
        .collect();
    let mut sups = vec![0.0f64; n_hi - n_lo + 1];
    for &lam in &lams {
        let fibers = engine.sys.fiber_sequence(lam, n_hi + 1)?;
        let rows: Vec<Vec<f64>> = points
            .par_iter()
            .map(|&z| (n_lo..=n_hi + 1).map(|n| gtilde_minus_along(engine, &fibers, z, n)).collect())
            .collect();
        for r in rows {
            for (k, s) in sups.iter_mut().enumerate() {
                *s = s.max((r[k + 1] - r[k]).abs());
            }
        }
    }
    let ns: Vec<usize> = (n_lo..=n_hi).collect();
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = sups.iter().map(|s| s.max(1e-300).ln()).collect();
    let fitted_ratio = linear_fit(&xs, &ys).map(|f| f.slope.exp()).unwrap_or(f64::NAN);
    Ok(ContractionCheck { lambdas: lams.iter().map(|l| l.0).collect(), n: ns, sup_difference: sups, fitted_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{Base, BaseMap, BaseSpace};
    use crate::henon::{CoeffPoly, HenonFactor, SkewHenonSystem};

    const ZERO: Complex64 = Complex64::new(0.0, 0.0);

    fn classical() -> GreenEngine {
        let sys = SkewHenonSystem::new(Base::identity(BaseSpace::ClosedDisc { radius: 0.25 }).unwrap(), vec![HenonFactor::pure_power(2)]).unwrap();
        GreenEngine::new(sys).unwrap()
    }

    fn disc_contraction() -> GreenEngine {
        let base = Base::new(BaseSpace::ClosedDisc { radius: 0.25 }, BaseMap::LinearContraction { c: Complex64::new(0.5, 0.0) }).unwrap();
        let f = HenonFactor::new(vec![CoeffPoly::linear(Complex64::new(1.0, 0.0)), CoeffPoly::zero()], CoeffPoly::real(1.0)).unwrap();
        GreenEngine::new(SkewHenonSystem::new(base, vec![f]).unwrap()).unwrap()
    }

    #[test]
    fn pullback_potential_tends_to_scaled_green() {
        let e = classical();
        let l = BasePoint::real(0.0);
        let z = PlanePoint::real(0.3, 3.5);
        let g = e.green(l, z, Direction::Forward, 1e-12).unwrap().value;
        let mut prev = f64::INFINITY;
        for n in [4, 8, 16, 40] {
            let p = pullback_potential(&e, l, n, Complex64::new(10.0, 0.0), z).unwrap();
            let err = (p - 0.5 * g).abs();
            assert!(err <= prev);
            prev = err;
        }
        assert!(prev < 1e-10);
        assert!(pullback_potential(&e, l, 0, ZERO, z).is_err());
    }

    #[test]
    fn exact_hit_is_a_pole() {
        let e = classical();
        // π₁(H(x, y)) = y, so the line {y = 2} is pulled back to itself at n = 1.
        let v = pullback_potential(&e, BasePoint::real(0.0), 1, Complex64::new(2.0, 0.0), PlanePoint::real(0.7, 2.0)).unwrap();
        assert_eq!(v, f64::NEG_INFINITY);
    }

    #[test]
    fn green_target_is_a_fixed_point() {
        let e = classical();
        let w = Window::new(ZERO, 3.0, 48);
        let ex = pullback_convergence(&e, BasePoint::real(0.0), PullbackTarget::GreenPlus, &[1, 2, 3], SliceSpec::Vertical { x0: ZERO }, w).unwrap();
        for r in &ex.rows {
            assert!(r.l1_distance < 1e-8, "{r:?}");
        }
    }

    #[test]
    fn line_pullbacks_converge() {
        let e = classical();
        let w = Window::new(ZERO, 3.0, 64);
        let ex = pullback_convergence(&e, BasePoint::real(0.0), PullbackTarget::Line { x0: Complex64::new(10.0, 0.0) }, &[1, 2, 3, 4, 5, 6, 7, 8], SliceSpec::Vertical { x0: ZERO }, w).unwrap();
        assert!(ex.final_over_initial() < 1e-2, "{ex:?}");
        assert!(ex.tail_monotone(3));
        assert!(ex.rows[3].l1_distance > 1.5 * ex.rows[4].l1_distance);
    }

    #[test]
    fn identity_base_gtilde_is_plain_backward_green() {
        let e = classical();
        let l = BasePoint::real(0.0);
        let z = PlanePoint::real(2.5, -0.4);
        for n in 0..6 {
            let a = gtilde_minus(&e, l, z, n).unwrap();
            let b = e.green_n(l, z, n, Direction::Backward).unwrap();
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn gtilde_deep_in_minus_cone_is_log_x() {
        let e = disc_contraction();
        let z = PlanePoint::real(1e6, 3.0);
        let v = gtilde_minus(&e, BasePoint::real(0.2), z, 10).unwrap();
        assert!((v - 1e6f64.ln()).abs() < 1e-3);
    }

    #[test]
    fn cauchy_check_requires_contraction() {
        assert!(matches!(contraction_cauchy_check(&classical(), 5.0, 2, 4, 10, 1, 0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn bump_profile() {
        let b = Bump::Radial { center: ZERO, radius: 2.0 };
        assert_eq!(b.eval(ZERO), 1.0);
        assert_eq!(b.eval(Complex64::new(2.0, 0.0)), 0.0);
        assert!(b.eval(Complex64::new(1.0, 0.0)) < b.eval(Complex64::new(0.5, 0.0)));
    }

    #[test]
    fn limit_constant_needs_identity_and_vanishes_off_j_minus() {
        let e = disc_contraction();
        let w = Window::new(ZERO, 3.0, 64);
        assert!(limit_constant(&e, BasePoint::real(0.0), Bump::Constant, ZERO, w).is_err());
        let e = classical();
        let far = Bump::Radial { center: Complex64::new(0.0, 6.0), radius: 0.5 };
        let w = Window::new(ZERO, e.radius() + 1.0, 128);
        let r = limit_constant(&e, BasePoint::real(0.0), far, ZERO, w).unwrap();
        assert!(r.constant < 1e-3, "{r:?}");
    }

    #[test]
    fn line_constant_is_inverse_last_degree() {
        let e = classical();
        let w = Window::new(ZERO, e.radius() + 1.0, 128);
        let l = BasePoint::real(0.0);
        let full = limit_constant(&e, l, Bump::Constant, ZERO, w).unwrap();
        assert!((full.constant - 0.5).abs() < 0.02, "{full:?}");
        let mut prev = full.constant;
        for radius in [4.0, 2.0, 1.0] {
            let c = limit_constant(&e, l, Bump::Radial { center: ZERO, radius }, ZERO, w).unwrap().constant;
            assert!(c < prev);
            prev = c;
        }
    }

    #[test]
    fn contraction_differences_decay_like_inverse_degree() {
        let c = contraction_cauchy_check(&disc_contraction(), 3.0, 2, 10, 300, 4, 7).unwrap();
        assert!(c.fitted_ratio <= 0.6, "{c:?}");
        assert_eq!(c.sup_difference.len(), 9);
    }
}

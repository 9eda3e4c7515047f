//! Compact parameter spaces and the base dynamics driving the fibers.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used by membership predicates to absorb rounding in σ.
const MEMBERSHIP_TOL: f64 = 1e-12;

/// A point λ of the parameter space. Finite point sets carry complex labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasePoint(pub Complex64);

impl BasePoint {
    pub fn new(re: f64, im: f64) -> Self {
        BasePoint(Complex64::new(re, im))
    }

    pub fn real(re: f64) -> Self {
        BasePoint(Complex64::new(re, 0.0))
    }

    pub fn value(self) -> Complex64 {
        self.0
    }
}

impl From<Complex64> for BasePoint {
    fn from(c: Complex64) -> Self {
        BasePoint(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaseSpace {
    /// Closed disc |λ| ≤ radius.
    ClosedDisc { radius: f64 },
    /// Circle |λ| = radius.
    Circle { radius: f64 },
    /// Closed real interval [lo, hi].
    ClosedRealInterval { lo: f64, hi: f64 },
    /// Finite set with the discrete metric.
    FinitePointSet { points: Vec<Complex64> },
}

impl BaseSpace {
    pub fn validate(&self) -> Result<()> {
        match self {
            BaseSpace::ClosedDisc { radius } | BaseSpace::Circle { radius } => {
                if !(radius.is_finite() && *radius >= 0.0) {
                    return Err(Error::Config(format!("radius must be finite and ≥ 0, got {radius}")));
                }
            }
            BaseSpace::ClosedRealInterval { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::Config(format!("interval [{lo}, {hi}] is not a closed interval")));
                }
            }
            BaseSpace::FinitePointSet { points } => {
                if points.is_empty() {
                    return Err(Error::Config("finite point set is empty".into()));
                }
                for (i, p) in points.iter().enumerate() {
                    if points[..i].iter().any(|q| (p - q).norm() <= MEMBERSHIP_TOL) {
                        return Err(Error::Config(format!("duplicate point {p} in finite set")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, lambda: BasePoint) -> bool {
        let z = lambda.0;
        if !(z.re.is_finite() && z.im.is_finite()) {
            return false;
        }
        match self {
            BaseSpace::ClosedDisc { radius } => z.norm() <= radius + MEMBERSHIP_TOL,
            BaseSpace::Circle { radius } => (z.norm() - radius).abs() <= MEMBERSHIP_TOL * (1.0 + radius),
            BaseSpace::ClosedRealInterval { lo, hi } => {
                z.im.abs() <= MEMBERSHIP_TOL && z.re >= lo - MEMBERSHIP_TOL && z.re <= hi + MEMBERSHIP_TOL
            }
            BaseSpace::FinitePointSet { points } => self.index_of(lambda).is_some() && !points.is_empty(),
        }
    }

    pub fn index_of(&self, lambda: BasePoint) -> Option<usize> {
        match self {
            BaseSpace::FinitePointSet { points } => {
                points.iter().position(|p| (p - lambda.0).norm() <= MEMBERSHIP_TOL)
            }
            _ => None,
        }
    }

    pub fn check(&self, lambda: BasePoint) -> Result<()> {
        if self.contains(lambda) {
            Ok(())
        } else {
            Err(Error::OutsideBase(format!("{}", lambda.0)))
        }
    }

    /// Euclidean distance for the continuous kinds, discrete metric on finite sets.
    pub fn distance(&self, a: BasePoint, b: BasePoint) -> f64 {
        match self {
            BaseSpace::FinitePointSet { .. } => {
                if (a.0 - b.0).norm() <= MEMBERSHIP_TOL {
                    0.0
                } else {
                    1.0
                }
            }
            _ => (a.0 - b.0).norm(),
        }
    }

    /// Upper bound on |λ| over the space; used for coefficient sup bounds.
    pub fn modulus_bound(&self) -> f64 {
        match self {
            BaseSpace::ClosedDisc { radius } | BaseSpace::Circle { radius } => *radius,
            BaseSpace::ClosedRealInterval { lo, hi } => lo.abs().max(hi.abs()),
            BaseSpace::FinitePointSet { points } => points.iter().map(|p| p.norm()).fold(0.0, f64::max),
        }
    }

    /// Deterministic covering sample: polar grid for discs (boundary included),
    /// equispaced for circles and intervals, every point for finite sets.
    pub fn dense_sample(&self, density: usize) -> Vec<BasePoint> {
        let density = density.max(2);
        match self {
            BaseSpace::ClosedDisc { radius } => {
                let mut out = vec![BasePoint::real(0.0)];
                if *radius == 0.0 {
                    return out;
                }
                let rings = density;
                for i in 1..=rings {
                    let r = radius * i as f64 / rings as f64;
                    let spokes = 4 * i.max(2);
                    for k in 0..spokes {
                        out.push(BasePoint(Complex64::from_polar(r, TAU * k as f64 / spokes as f64)));
                    }
                }
                out
            }
            BaseSpace::Circle { radius } => {
                let n = 8 * density;
                (0..n)
                    .map(|k| BasePoint(Complex64::from_polar(*radius, TAU * k as f64 / n as f64)))
                    .collect()
            }
            BaseSpace::ClosedRealInterval { lo, hi } => {
                let n = 4 * density;
                (0..=n).map(|k| BasePoint::real(lo + (hi - lo) * k as f64 / n as f64)).collect()
            }
            BaseSpace::FinitePointSet { points } => points.iter().map(|&p| BasePoint(p)).collect(),
        }
    }

    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> BasePoint {
        match self {
            BaseSpace::ClosedDisc { radius } => {
                let r = radius * rng.random::<f64>().sqrt();
                BasePoint(Complex64::from_polar(r, TAU * rng.random::<f64>()))
            }
            BaseSpace::Circle { radius } => BasePoint(Complex64::from_polar(*radius, TAU * rng.random::<f64>())),
            BaseSpace::ClosedRealInterval { lo, hi } => BasePoint::real(lo + (hi - lo) * rng.random::<f64>()),
            BaseSpace::FinitePointSet { points } => BasePoint(points[rng.random_range(0..points.len())]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaseMap {
    Identity,
    /// λ ↦ cλ with |c| ≤ 1.
    LinearContraction { c: Complex64 },
    /// λ ↦ e^{iθ}λ.
    Rotation { theta: f64 },
    /// Index permutation of a finite point set.
    FinitePermutation { table: Vec<usize> },
}

/// The base dynamics (M, σ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Base {
    pub space: BaseSpace,
    pub map: BaseMap,
}

impl Base {
    pub fn new(space: BaseSpace, map: BaseMap) -> Result<Self> {
        space.validate()?;
        match (&space, &map) {
            (_, BaseMap::LinearContraction { c }) if !(c.norm() <= 1.0 + 1e-15) => {
                return Err(Error::Config(format!("contraction factor |c| = {} exceeds 1", c.norm())));
            }
            (BaseSpace::FinitePointSet { points }, BaseMap::FinitePermutation { table }) => {
                let mut seen = vec![false; points.len()];
                if table.len() != points.len() {
                    return Err(Error::Config("permutation table length differs from point count".into()));
                }
                for &t in table {
                    if t >= points.len() || seen[t] {
                        return Err(Error::Config("permutation table is not a bijection".into()));
                    }
                    seen[t] = true;
                }
            }
            (_, BaseMap::FinitePermutation { .. }) => {
                return Err(Error::Config("finite permutation requires a finite point set".into()));
            }
            _ => {}
        }
        let base = Base { space, map };
        // σ(M) ⊂ M, checked on a covering sample.
        for p in base.space.dense_sample(16) {
            let q = base.apply_unchecked(p);
            if !base.space.contains(q) {
                return Err(Error::Config(format!("base map sends {} outside the space (to {})", p.0, q.0)));
            }
        }
        Ok(base)
    }

    pub fn identity(space: BaseSpace) -> Result<Self> {
        Base::new(space, BaseMap::Identity)
    }

    fn apply_unchecked(&self, lambda: BasePoint) -> BasePoint {
        match &self.map {
            BaseMap::Identity => lambda,
            BaseMap::LinearContraction { c } => BasePoint(c * lambda.0),
            BaseMap::Rotation { theta } => BasePoint(Complex64::from_polar(1.0, *theta) * lambda.0),
            BaseMap::FinitePermutation { table } => match (&self.space, self.space.index_of(lambda)) {
                (BaseSpace::FinitePointSet { points }, Some(i)) => BasePoint(points[table[i]]),
                _ => lambda,
            },
        }
    }

    /// σ(λ).
    pub fn apply(&self, lambda: BasePoint) -> Result<BasePoint> {
        self.space.check(lambda)?;
        Ok(self.apply_unchecked(lambda))
    }

    /// [λ, σ(λ), …, σ^{n−1}(λ)].
    pub fn sigma_orbit(&self, lambda: BasePoint, n: usize) -> Result<Vec<BasePoint>> {
        self.space.check(lambda)?;
        let mut out = Vec::with_capacity(n);
        let mut cur = lambda;
        for _ in 0..n {
            out.push(cur);
            cur = self.apply_unchecked(cur);
        }
        Ok(out)
    }

    /// σ^n(λ).
    pub fn iterate(&self, lambda: BasePoint, n: usize) -> Result<BasePoint> {
        self.space.check(lambda)?;
        let mut cur = lambda;
        for _ in 0..n {
            cur = self.apply_unchecked(cur);
        }
        Ok(cur)
    }

    pub fn is_surjective(&self) -> bool {
        match &self.map {
            BaseMap::Identity | BaseMap::Rotation { .. } | BaseMap::FinitePermutation { .. } => true,
            BaseMap::LinearContraction { c } => (c.norm() - 1.0).abs() <= 1e-15,
        }
    }

    pub fn is_identity(&self) -> bool {
        match &self.map {
            BaseMap::Identity => true,
            BaseMap::LinearContraction { c } => *c == Complex64::new(1.0, 0.0),
            BaseMap::Rotation { theta } => *theta == 0.0,
            BaseMap::FinitePermutation { table } => table.iter().enumerate().all(|(i, &t)| i == t),
        }
    }

    /// Strict contraction towards λ₀ = 0.
    pub fn is_contraction(&self) -> bool {
        matches!(&self.map, BaseMap::LinearContraction { c } if c.norm() < 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn disc(r: f64) -> BaseSpace {
        BaseSpace::ClosedDisc { radius: r }
    }

    #[test]
    fn identity_orbit_is_constant() {
        let base = Base::identity(disc(1.0)).unwrap();
        let orbit = base.sigma_orbit(BasePoint::real(0.3), 4).unwrap();
        assert_eq!(orbit, vec![BasePoint::real(0.3); 4]);
    }

    #[test]
    fn contraction_orbit_is_geometric() {
        let base = Base::new(disc(1.0), BaseMap::LinearContraction { c: Complex64::new(0.5, 0.0) }).unwrap();
        let orbit = base.sigma_orbit(BasePoint::real(1.0), 4).unwrap();
        let re: Vec<f64> = orbit.iter().map(|p| p.0.re).collect();
        assert_eq!(re, vec![1.0, 0.5, 0.25, 0.125]);
    }

    #[test]
    fn rotation_by_pi_flips_sign() {
        let base = Base::new(disc(1.0), BaseMap::Rotation { theta: PI }).unwrap();
        let orbit = base.sigma_orbit(BasePoint::real(0.2), 3).unwrap();
        let expected = [0.2, -0.2, 0.2];
        for (p, e) in orbit.iter().zip(expected) {
            assert!((p.0 - Complex64::new(e, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn outside_point_is_a_domain_error() {
        let base = Base::identity(disc(0.25)).unwrap();
        assert!(matches!(base.sigma_orbit(BasePoint::real(0.3), 2), Err(Error::OutsideBase(_))));
    }

    #[test]
    fn surjectivity_catalogue() {
        assert!(Base::identity(disc(1.0)).unwrap().is_surjective());
        let c = Base::new(disc(1.0), BaseMap::LinearContraction { c: Complex64::new(0.5, 0.0) }).unwrap();
        assert!(!c.is_surjective());
        assert!(Base::new(disc(1.0), BaseMap::Rotation { theta: 1.0 }).unwrap().is_surjective());
        let pts = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let perm = Base::new(
            BaseSpace::FinitePointSet { points: pts },
            BaseMap::FinitePermutation { table: vec![1, 0] },
        )
        .unwrap();
        assert!(perm.is_surjective());
        let unit = Base::new(disc(1.0), BaseMap::LinearContraction { c: Complex64::new(0.0, 1.0) }).unwrap();
        assert!(unit.is_surjective());
    }

    #[test]
    fn rotation_of_an_interval_is_rejected() {
        let r = Base::new(BaseSpace::ClosedRealInterval { lo: 0.1, hi: 1.0 }, BaseMap::Rotation { theta: 1.0 });
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn permutation_moves_labels() {
        let pts = vec![Complex64::new(0.0, 0.0), Complex64::new(0.1, 0.0), Complex64::new(0.0, 0.2)];
        let base = Base::new(
            BaseSpace::FinitePointSet { points: pts.clone() },
            BaseMap::FinitePermutation { table: vec![2, 0, 1] },
        )
        .unwrap();
        let orbit = base.sigma_orbit(BasePoint(pts[0]), 4).unwrap();
        assert_eq!(orbit.iter().map(|p| p.0).collect::<Vec<_>>(), vec![pts[0], pts[2], pts[1], pts[0]]);
        assert_eq!(base.space.distance(BasePoint(pts[0]), BasePoint(pts[1])), 1.0);
    }

    #[test]
    fn contraction_decays_by_factor_each_step() {
        let c = Complex64::new(0.3, 0.4);
        let base = Base::new(disc(1.0), BaseMap::LinearContraction { c }).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        use rand::SeedableRng;
        for _ in 0..50 {
            let lam = base.space.random_point(&mut rng);
            let orbit = base.sigma_orbit(lam, 30).unwrap();
            for w in orbit.windows(2) {
                let expected = w[0].0.norm() * c.norm();
                assert!((w[1].0.norm() - expected).abs() <= 1e-15 * (1.0 + expected));
            }
            let mut cur = lam;
            let mut steps = 0;
            while cur.0.norm() >= 1e-12 {
                cur = base.apply(cur).unwrap();
                steps += 1;
                assert!(steps < 1000);
            }
        }
    }

    #[test]
    fn metric_axioms_on_samples() {
        let spaces = [
            disc(0.5),
            BaseSpace::Circle { radius: 1.0 },
            BaseSpace::ClosedRealInterval { lo: -1.0, hi: 2.0 },
            BaseSpace::FinitePointSet { points: vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0)] },
        ];
        for space in spaces {
            let pts = space.dense_sample(4);
            for &a in &pts {
                assert!(space.contains(a));
                for &b in &pts {
                    let dab = space.distance(a, b);
                    assert!(dab >= 0.0);
                    assert_eq!(dab, space.distance(b, a));
                    assert_eq!(dab == 0.0, (a.0 - b.0).norm() <= MEMBERSHIP_TOL);
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn orbit_prefix_property(re in -0.7f64..0.7, im in -0.7f64..0.7, n in 0usize..20, m in 0usize..20) {
            let base = Base::new(disc(1.0), BaseMap::Rotation { theta: 0.7 }).unwrap();
            let lam = BasePoint::new(re, im);
            let long = base.sigma_orbit(lam, n + m).unwrap();
            let short = base.sigma_orbit(lam, n).unwrap();
            proptest::prop_assert_eq!(&long[..n], &short[..]);
        }
    }
}

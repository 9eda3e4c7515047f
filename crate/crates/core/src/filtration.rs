//! Uniform filtration `V_R^+ ∪ V_R^- ∪ V_R` and the escape dichotomy.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::BasePoint;
use crate::error::{Error, Result};
use crate::henon::{Direction, FactorAt, FiberSequence, PlanePoint, SkewHenonSystem};
use crate::util::{random_in_disc, random_unit, rng_for};

pub const RADIUS_GRID_START: f64 = 0.01;
pub const RADIUS_GRID_FACTOR: f64 = 1.05;
pub const RADIUS_CAP: f64 = 1e6;
pub const DEFAULT_HORIZON: usize = 200;
const CIRCLE_POINTS: usize = 64;
const LAMBDA_DENSITY: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiltrationData {
    pub radius: f64,
    pub rho: f64,
    pub a_sup: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    #[serde(rename = "V+")]
    Plus,
    #[serde(rename = "V-")]
    Minus,
    #[serde(rename = "V")]
    Central,
}

/// Ties `|x| = |y|` and points with the dominant modulus equal to `R` go to the central block.
pub fn classify_region(z: PlanePoint, radius: f64) -> Region {
    let (ax, ay) = (z.x.norm(), z.y.norm());
    if ay > ax && ay > radius {
        Region::Plus
    } else if ax > ay && ax > radius {
        Region::Minus
    } else {
        Region::Central
    }
}

fn radius_ok(factors: &[FactorAt], r: f64, a_sup: f64) -> bool {
    for f in factors {
        let d = f.degree() as i32;
        if r.powi(d) <= 2.0 * r {
            return false;
        }
        // Beyond this modulus all three inequalities follow from the triangle inequality.
        let auto = 2.0 * (f.lower.iter().map(|c| c.norm()).sum::<f64>() + 2.0 + a_sup) + 2.0;
        // Circles just outside R, then radially outward past `auto`.
        let circles = (0..=6)
            .map(|i| r * (1.0 + 0.5f64.powi(i)))
            .chain(std::iter::once(r))
            .chain((1..).map(|k| r * 1.25f64.powi(k)).take_while(move |&s| s <= 1.25 * auto));
        for s in circles {
            for k in 0..CIRCLE_POINTS {
                let y = Complex64::from_polar(s, std::f64::consts::TAU * (k as f64 + 0.5) / CIRCLE_POINTS as f64);
                let py = f.p(y).norm();
                if py < (2.0 + a_sup) * s || py < 0.5 * s.powi(d) {
                    return false;
                }
            }
        }
    }
    true
}

/// Smallest grid radius satisfying the dominance inequalities for every sampled λ, doubled.
pub fn find_radius(sys: &SkewHenonSystem) -> Result<FiltrationData> {
    let a_sup = sys.a_sup();
    let fibers: Vec<Vec<FactorAt>> = sys
        .base
        .space
        .dense_sample(LAMBDA_DENSITY)
        .into_iter()
        .map(|l| sys.fiber(l).factors)
        .collect();
    let mut r = RADIUS_GRID_START;
    while r <= RADIUS_CAP {
        if fibers.par_iter().all(|fs| radius_ok(fs, r, a_sup)) {
            let radius = 2.0 * r;
            let rho = estimate_rho(&fibers, radius);
            return Ok(FiltrationData { radius, rho, a_sup });
        }
        r *= RADIUS_GRID_FACTOR;
    }
    Err(Error::Config(format!("no filtration radius below {RADIUS_CAP:e}; coefficients too large")))
}

/// 0.99 × the sampled minimum of the per-factor expansion on the closed cones.
fn estimate_rho(fibers: &[Vec<FactorAt>], radius: f64) -> f64 {
    let mut min_ratio = f64::INFINITY;
    let fractions = [0.0, 0.25, 0.5, 0.75, 0.9, 1.0];
    for fs in fibers {
        for f in fs {
            let am = f.a.norm();
            for i in 0..=6 {
                let s = radius * (1.0 + 0.5f64.powi(i)) * if i == 6 { 1.0 / (1.0 + 0.5f64.powi(6)) } else { 1.0 };
                for k in 0..CIRCLE_POINTS / 4 {
                    let w = Complex64::from_polar(s, std::f64::consts::TAU * k as f64 / (CIRCLE_POINTS / 4) as f64);
                    let pw = f.p(w);
                    for &t in &fractions {
                        for m in 0..8 {
                            let other = w * Complex64::from_polar(t, std::f64::consts::TAU * m as f64 / 8.0);
                            let plus = (pw - f.a * other).norm() / s;
                            let minus = (pw - other).norm() / (am * s);
                            min_ratio = min_ratio.min(plus).min(minus);
                        }
                    }
                }
            }
        }
    }
    0.99 * min_ratio
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum EscapeStatus {
    EscapedPlus { step: usize },
    EscapedMinus { step: usize },
    BoundedThrough { horizon: usize },
}

impl EscapeStatus {
    pub fn escaped(&self) -> bool {
        !matches!(self, EscapeStatus::BoundedThrough { .. })
    }

    pub fn step(&self) -> Option<usize> {
        match *self {
            EscapeStatus::EscapedPlus { step } | EscapeStatus::EscapedMinus { step } => Some(step),
            EscapeStatus::BoundedThrough { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeRecord {
    pub status: EscapeStatus,
    pub final_point: PlanePoint,
}

/// Escape test along a precomputed fiber sequence (at least `horizon` fibers when varying).
pub fn escape_along(fibers: &FiberSequence, z: PlanePoint, horizon: usize, radius: f64, direction: Direction) -> EscapeRecord {
    let target = match direction {
        Direction::Forward => Region::Plus,
        Direction::Backward => Region::Minus,
    };
    let verdict = |step| match direction {
        Direction::Forward => EscapeStatus::EscapedPlus { step },
        Direction::Backward => EscapeStatus::EscapedMinus { step },
    };
    let mut cur = z;
    for step in 0..=horizon {
        if classify_region(cur, radius) == target {
            return EscapeRecord { status: verdict(step), final_point: cur };
        }
        if step == horizon {
            break;
        }
        let next = match fibers.get(step).step(cur, direction) {
            Ok(p) => p,
            Err(_) => return EscapeRecord { status: verdict(step + 1), final_point: cur },
        };
        if next.is_escaped() {
            return EscapeRecord { status: verdict(step + 1), final_point: cur };
        }
        cur = next;
    }
    EscapeRecord { status: EscapeStatus::BoundedThrough { horizon }, final_point: cur }
}

pub fn escape_classify(
    sys: &SkewHenonSystem,
    lambda: BasePoint,
    z: PlanePoint,
    horizon: usize,
    filt: &FiltrationData,
    direction: Direction,
) -> Result<EscapeRecord> {
    if horizon == 0 {
        return Err(Error::Argument("escape horizon must be at least 1".into()));
    }
    let fibers = sys.fiber_sequence(lambda, horizon)?;
    Ok(escape_along(&fibers, z, horizon, filt.radius, direction))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub lambda: Complex64,
    pub point: PlanePoint,
    pub image: PlanePoint,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub radius: f64,
    pub rho: f64,
    pub samples: usize,
    pub plus_violations: usize,
    pub minus_violations: usize,
    pub growth_violations: usize,
    pub witnesses: Vec<Witness>,
}

impl InvarianceReport {
    pub fn passed(&self) -> bool {
        self.plus_violations + self.minus_violations + self.growth_violations == 0
    }
}

/// Random point strictly inside the cone where the coordinate `dominant` wins.
fn sample_cone<R: rand::Rng>(rng: &mut R, radius: f64) -> (Complex64, Complex64) {
    // Log-uniform modulus in (R, 1000R), the other coordinate strictly smaller.
    let s = radius * (1.0 + 1e-9) * 1000f64.powf(rng.random::<f64>());
    let dom = random_unit(rng) * s;
    let other = random_in_disc(rng, s * (1.0 - 1e-9));
    (dom, other)
}

/// Samples both cones and checks invariance plus the `ρ^m` growth of the dominant coordinate.
pub fn verify_invariance(sys: &SkewHenonSystem, filt: &FiltrationData, samples: usize, seed: u64) -> InvarianceReport {
    let m = sys.factors.len() as i32;
    let growth = filt.rho.powi(m);
    let results: Vec<(usize, usize, usize, Vec<Witness>)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i as u64);
            let lambda = sys.base.space.random_point(&mut rng);
            let fiber = sys.fiber(lambda);
            let mut out = (0, 0, 0, Vec::new());
            let (dom, other) = sample_cone(&mut rng, filt.radius);
            let z = PlanePoint::new(other, dom);
            let img = fiber.apply(z);
            if classify_region(img, filt.radius) != Region::Plus {
                out.0 += 1;
                out.3.push(Witness { lambda: lambda.0, point: z, image: img, kind: "forward-invariance".into() });
            } else if img.y.norm() <= growth * z.y.norm() {
                out.2 += 1;
                out.3.push(Witness { lambda: lambda.0, point: z, image: img, kind: "forward-growth".into() });
            }
            let (dom, other) = sample_cone(&mut rng, filt.radius);
            let w = PlanePoint::new(dom, other);
            match fiber.inverse(w) {
                Ok(pre) if classify_region(pre, filt.radius) == Region::Minus => {
                    if pre.x.norm() <= growth * w.x.norm() {
                        out.2 += 1;
                        out.3.push(Witness { lambda: lambda.0, point: w, image: pre, kind: "backward-growth".into() });
                    }
                }
                Ok(pre) => {
                    out.1 += 1;
                    out.3.push(Witness { lambda: lambda.0, point: w, image: pre, kind: "backward-invariance".into() });
                }
                Err(_) => out.1 += 1,
            }
            out
        })
        .collect();
    let mut report = InvarianceReport {
        radius: filt.radius,
        rho: filt.rho,
        samples,
        plus_violations: 0,
        minus_violations: 0,
        growth_violations: 0,
        witnesses: Vec::new(),
    };
    for (p, mi, g, w) in results {
        report.plus_violations += p;
        report.minus_violations += mi;
        report.growth_violations += g;
        if report.witnesses.len() < 16 {
            report.witnesses.extend(w);
        }
    }
    report.witnesses.truncate(16);
    report
}

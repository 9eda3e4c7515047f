//! Named example systems.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::base::{Base, BaseMap, BaseSpace};
use crate::error::{Error, Result};
use crate::henon::{CoeffPoly, HenonFactor, SkewHenonSystem};
use crate::pk::{HomogeneousMap, Monomial, PkSkewSystem};

pub const HENON_EXAMPLES: [&str; 3] = ["classical", "disc-contraction", "degree4"];
pub const PK_EXAMPLES: [&str; 2] = ["pk-squares", "pk-perturbed"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum System {
    Henon(SkewHenonSystem),
    Pk(PkSkewSystem),
}

fn disc(radius: f64) -> BaseSpace {
    BaseSpace::ClosedDisc { radius }
}

/// `p = y²`, `a = 1`, identity base.
pub fn classical() -> SkewHenonSystem {
    SkewHenonSystem::new(Base::identity(disc(0.25)).expect("valid base"), vec![HenonFactor::pure_power(2)]).expect("valid system")
}

/// `p = y² + λ`, `a = 1`, `σ(λ) = λ/2` on `|λ| ≤ 1/4`.
pub fn disc_contraction() -> SkewHenonSystem {
    let base = Base::new(disc(0.25), BaseMap::LinearContraction { c: Complex64::new(0.5, 0.0) }).expect("valid base");
    let f = HenonFactor::new(vec![CoeffPoly::linear(Complex64::new(1.0, 0.0)), CoeffPoly::zero()], CoeffPoly::real(1.0)).expect("valid factor");
    SkewHenonSystem::new(base, vec![f]).expect("valid system")
}

/// Two quadratic factors, identity base.
pub fn degree4() -> SkewHenonSystem {
    SkewHenonSystem::new(Base::identity(disc(0.25)).expect("valid base"), vec![HenonFactor::pure_power(2); 2]).expect("valid system")
}

/// `F = (x₀², x₁²)`.
pub fn pk_squares() -> PkSkewSystem {
    PkSkewSystem::new(Base::identity(disc(0.25)).expect("valid base"), HomogeneousMap::power(1, 2)).expect("valid system")
}

/// `F_λ = (x₀² + λx₁², x₁² + λx₀²)` on `|λ| ≤ 0.2` with `σ(λ) = λ/2`.
pub fn pk_perturbed() -> PkSkewSystem {
    let mono = |e: [u32; 2], coeff| Monomial { exponents: e.to_vec(), coeff };
    let lam = || CoeffPoly::linear(Complex64::new(1.0, 0.0));
    let map = HomogeneousMap::new(
        1,
        2,
        vec![vec![mono([2, 0], CoeffPoly::real(1.0)), mono([0, 2], lam())], vec![mono([0, 2], CoeffPoly::real(1.0)), mono([2, 0], lam())]],
    )
    .expect("homogeneous");
    let base = Base::new(disc(0.2), BaseMap::LinearContraction { c: Complex64::new(0.5, 0.0) }).expect("valid base");
    PkSkewSystem::new(base, map).expect("valid system")
}

pub fn example(name: &str) -> Result<System> {
    Ok(match name {
        "classical" => System::Henon(classical()),
        "disc-contraction" => System::Henon(disc_contraction()),
        "degree4" => System::Henon(degree4()),
        "pk-squares" => System::Pk(pk_squares()),
        "pk-perturbed" => System::Pk(pk_perturbed()),
        other => {
            let known: Vec<&str> = HENON_EXAMPLES.iter().chain(&PK_EXAMPLES).copied().collect();
            return Err(Error::Config(format!("unknown example system {other:?}; known: {}", known.join(", "))));
        }
    })
}

pub fn henon_example(name: &str) -> Result<SkewHenonSystem> {
    match example(name)? {
        System::Henon(s) => Ok(s),
        System::Pk(_) => Err(Error::Config(format!("{name} is a P^k system"))),
    }
}

pub fn pk_example(name: &str) -> Result<PkSkewSystem> {
    match example(name)? {
        System::Pk(s) => Ok(s),
        System::Henon(_) => Err(Error::Config(format!("{name} is a Hénon system"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalogue_builds_and_round_trips() {
        for name in HENON_EXAMPLES.iter().chain(&PK_EXAMPLES) {
            let s = example(name).unwrap();
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(serde_json::from_str::<System>(&json).unwrap(), s);
        }
        assert!(example("nope").is_err());
        assert!(henon_example("pk-squares").is_err());
        assert_eq!(degree4().degree(), 4);
    }
}

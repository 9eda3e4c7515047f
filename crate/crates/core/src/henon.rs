//! Generalized Hénon factors, fiber maps and skew iterates.
//!
//! A factor is `(x, y) ↦ (y, p(y) − a·x)` with `p` monic. The fiber map at λ
//! composes the factors in order; skew iterates step the base point through
//! σ between fibers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::base::{Base, BasePoint};
use crate::error::{Error, Result};

/// Orbit points beyond this norm (or non-finite) raise the escape signal.
pub const ESCAPE_CUTOFF: f64 = 1e100;
/// Inverse factors refuse to divide by |a_j(λ)| below this.
pub const ILL_CONDITIONED: f64 = 1e-12;
pub const MAX_FACTORS: usize = 8;
pub const MAX_FACTOR_DEGREE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanePoint {
    pub x: Complex64,
    pub y: Complex64,
}

impl PlanePoint {
    pub const ORIGIN: PlanePoint = PlanePoint { x: Complex64::new(0.0, 0.0), y: Complex64::new(0.0, 0.0) };

    pub fn new(x: Complex64, y: Complex64) -> Self {
        PlanePoint { x, y }
    }

    pub fn real(x: f64, y: f64) -> Self {
        PlanePoint { x: Complex64::new(x, 0.0), y: Complex64::new(y, 0.0) }
    }

    pub fn norm(&self) -> f64 {
        self.x.norm().hypot(self.y.norm())
    }

    pub fn dist(&self, other: &PlanePoint) -> f64 {
        (self.x - other.x).norm().hypot((self.y - other.y).norm())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn is_escaped(&self) -> bool {
        !self.is_finite() || self.norm() > ESCAPE_CUTOFF
    }

    pub fn swap(self) -> Self {
        PlanePoint { x: self.y, y: self.x }
    }
}

impl std::ops::Add for PlanePoint {
    type Output = PlanePoint;
    fn add(self, o: PlanePoint) -> PlanePoint {
        PlanePoint { x: self.x + o.x, y: self.y + o.y }
    }
}

impl std::ops::Sub for PlanePoint {
    type Output = PlanePoint;
    fn sub(self, o: PlanePoint) -> PlanePoint {
        PlanePoint { x: self.x - o.x, y: self.y - o.y }
    }
}

impl std::ops::Mul<Complex64> for PlanePoint {
    type Output = PlanePoint;
    fn mul(self, c: Complex64) -> PlanePoint {
        PlanePoint { x: self.x * c, y: self.y * c }
    }
}

/// One term `coeff · λ^lam_pow · λ̄^conj_pow`, serialized as `[lam_pow, conj_pow, [re, im]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(u32, u32, Complex64)", into = "(u32, u32, Complex64)")]
pub struct CoeffTerm {
    pub lam_pow: u32,
    pub conj_pow: u32,
    pub coeff: Complex64,
}

impl From<(u32, u32, Complex64)> for CoeffTerm {
    fn from((lam_pow, conj_pow, coeff): (u32, u32, Complex64)) -> Self {
        CoeffTerm { lam_pow, conj_pow, coeff }
    }
}

impl From<CoeffTerm> for (u32, u32, Complex64) {
    fn from(t: CoeffTerm) -> Self {
        (t.lam_pow, t.conj_pow, t.coeff)
    }
}

/// Coefficient function on M: a polynomial in λ and λ̄.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoeffPoly {
    pub terms: Vec<CoeffTerm>,
}

impl CoeffPoly {
    pub fn zero() -> Self {
        CoeffPoly { terms: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        CoeffPoly { terms: vec![CoeffTerm { lam_pow: 0, conj_pow: 0, coeff: c }] }
    }

    pub fn real(c: f64) -> Self {
        Self::constant(Complex64::new(c, 0.0))
    }

    /// `c · λ`.
    pub fn linear(c: Complex64) -> Self {
        CoeffPoly { terms: vec![CoeffTerm { lam_pow: 1, conj_pow: 0, coeff: c }] }
    }

    pub fn eval(&self, lambda: BasePoint) -> Complex64 {
        let l = lambda.0;
        let lc = l.conj();
        self.terms
            .iter()
            .map(|t| t.coeff * l.powu(t.lam_pow) * lc.powu(t.conj_pow))
            .sum()
    }

    /// sup_{|λ| ≤ modulus} |c(λ)| bound via the triangle inequality.
    pub fn sup_bound(&self, modulus: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff.norm() * modulus.powi((t.lam_pow + t.conj_pow) as i32))
            .sum()
    }
}

/// `H^{(j)}(x, y) = (y, p_{j,λ}(y) − a_j(λ)x)` with `p_{j,λ}` monic of degree `lower.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HenonFactor {
    /// Coefficients of y^0 … y^{d−1}; the leading coefficient is 1 and not stored.
    pub lower: Vec<CoeffPoly>,
    pub a: CoeffPoly,
}

impl HenonFactor {
    pub fn new(lower: Vec<CoeffPoly>, a: CoeffPoly) -> Result<Self> {
        if lower.len() < 2 || lower.len() > MAX_FACTOR_DEGREE {
            return Err(Error::Config(format!(
                "factor degree must lie in 2..={MAX_FACTOR_DEGREE}, got {}",
                lower.len()
            )));
        }
        Ok(HenonFactor { lower, a })
    }

    /// `p(y) = y^d`, `a = 1`.
    pub fn pure_power(d: usize) -> Self {
        HenonFactor { lower: vec![CoeffPoly::zero(); d], a: CoeffPoly::real(1.0) }
    }

    pub fn degree(&self) -> usize {
        self.lower.len()
    }

    pub fn at(&self, lambda: BasePoint) -> FactorAt {
        FactorAt { lower: self.lower.iter().map(|c| c.eval(lambda)).collect(), a: self.a.eval(lambda) }
    }
}

/// A factor with its coefficient functions evaluated at one λ.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorAt {
    pub lower: Vec<Complex64>,
    pub a: Complex64,
}

impl FactorAt {
    pub fn degree(&self) -> usize {
        self.lower.len()
    }

    /// Horner evaluation of the monic polynomial.
    #[inline]
    pub fn p(&self, y: Complex64) -> Complex64 {
        let mut acc = Complex64::new(1.0, 0.0);
        for c in self.lower.iter().rev() {
            acc = acc * y + c;
        }
        acc
    }

    #[inline]
    pub fn p_prime(&self, y: Complex64) -> Complex64 {
        let d = self.lower.len();
        let mut acc = Complex64::new(d as f64, 0.0);
        for i in (1..d).rev() {
            acc = acc * y + self.lower[i] * i as f64;
        }
        acc
    }

    #[inline]
    pub fn apply(&self, z: PlanePoint) -> PlanePoint {
        PlanePoint { x: z.y, y: self.p(z.y) - self.a * z.x }
    }

    #[inline]
    pub fn inverse(&self, z: PlanePoint) -> Result<PlanePoint> {
        let m = self.a.norm();
        if !(m >= ILL_CONDITIONED) {
            return Err(Error::IllConditioned { modulus: m, threshold: ILL_CONDITIONED });
        }
        Ok(PlanePoint { x: (self.p(z.x) - z.y) / self.a, y: z.x })
    }
}

/// The fiber map `H_λ` with all coefficients evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct Fiber {
    pub factors: Vec<FactorAt>,
}

impl Fiber {
    #[inline]
    pub fn apply(&self, z: PlanePoint) -> PlanePoint {
        self.factors.iter().fold(z, |acc, f| f.apply(acc))
    }

    pub fn inverse(&self, z: PlanePoint) -> Result<PlanePoint> {
        let mut acc = z;
        for f in self.factors.iter().rev() {
            acc = f.inverse(acc)?;
        }
        Ok(acc)
    }

    pub fn step(&self, z: PlanePoint, direction: Direction) -> Result<PlanePoint> {
        match direction {
            Direction::Forward => Ok(self.apply(z)),
            Direction::Backward => self.inverse(z),
        }
    }

    pub fn jacobian(&self) -> Complex64 {
        self.factors.iter().map(|f| f.a).product()
    }

    /// Holomorphic derivative matrix `[[∂x'/∂x, ∂x'/∂y], [∂y'/∂x, ∂y'/∂y]]`.
    pub fn derivative(&self, z: PlanePoint) -> [[Complex64; 2]; 2] {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let mut m = [[one, zero], [zero, one]];
        let mut cur = z;
        for f in &self.factors {
            let df = [[zero, one], [-f.a, f.p_prime(cur.y)]];
            m = matmul(df, m);
            cur = f.apply(cur);
        }
        m
    }
}

fn matmul(a: [[Complex64; 2]; 2], b: [[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Fibers along a σ-orbit; the identity base stores one fiber.
#[derive(Debug, Clone, PartialEq)]
pub enum FiberSequence {
    Constant(Fiber),
    Varying(Vec<Fiber>),
}

impl FiberSequence {
    /// Fiber at σ^k(λ).
    #[inline]
    pub fn get(&self, k: usize) -> &Fiber {
        match self {
            FiberSequence::Constant(f) => f,
            FiberSequence::Varying(v) => &v[k],
        }
    }

    /// Number of stored fibers, `None` when every step uses the same one.
    pub fn len_hint(&self) -> Option<usize> {
        match self {
            FiberSequence::Constant(_) => None,
            FiberSequence::Varying(v) => Some(v.len()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> i32 {
        match self {
            Direction::Forward => 1,
            Direction::Backward => -1,
        }
    }
}

/// Raised when an orbit leaves the representable range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Escaped {
    /// Number of fiber maps applied when the cutoff was crossed.
    pub step: usize,
    pub last: PlanePoint,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OrbitError {
    Escaped(Escaped),
    Map(Error),
}

impl From<Error> for OrbitError {
    fn from(e: Error) -> Self {
        OrbitError::Map(e)
    }
}

impl std::fmt::Display for OrbitError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OrbitError::Escaped(e) => write!(f, "orbit escaped at step {}", e.step),
            OrbitError::Map(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for OrbitError {}

/// Orbit trace: `points[0]` is the start, `points[n]` the end.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    pub points: Vec<PlanePoint>,
}

impl Orbit {
    pub fn end(&self) -> PlanePoint {
        *self.points.last().expect("orbit always holds its start point")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewHenonSystem {
    pub base: Base,
    pub factors: Vec<HenonFactor>,
}

impl SkewHenonSystem {
    pub fn new(base: Base, factors: Vec<HenonFactor>) -> Result<Self> {
        if factors.is_empty() || factors.len() > MAX_FACTORS {
            return Err(Error::Config(format!("need 1..={MAX_FACTORS} factors, got {}", factors.len())));
        }
        for f in &factors {
            HenonFactor::new(f.lower.clone(), f.a.clone())?;
        }
        let sys = SkewHenonSystem { base, factors };
        for lam in sys.base.space.dense_sample(16) {
            for (j, f) in sys.factors.iter().enumerate() {
                let a = f.a.eval(lam).norm();
                if !(a > ILL_CONDITIONED) {
                    return Err(Error::Config(format!("a_{}(λ) vanishes near λ = {}", j + 1, lam.0)));
                }
            }
        }
        Ok(sys)
    }

    /// d = d₁⋯d_m.
    pub fn degree(&self) -> u64 {
        self.factors.iter().map(|f| f.degree() as u64).product()
    }

    pub fn factor_degrees(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.degree()).collect()
    }

    /// Degree of the last factor; π₁∘H_λ has degree d / d_m in y.
    pub fn last_factor_degree(&self) -> usize {
        self.factors.last().map(|f| f.degree()).unwrap_or(1)
    }

    pub fn fiber(&self, lambda: BasePoint) -> Fiber {
        Fiber { factors: self.factors.iter().map(|f| f.at(lambda)).collect() }
    }

    /// Fibers at λ, σ(λ), …, σ^{n−1}(λ). For σ = id the single fiber is cloned.
    pub fn fibers_along(&self, lambda: BasePoint, n: usize) -> Result<Vec<Fiber>> {
        self.base.space.check(lambda)?;
        if self.base.is_identity() {
            return Ok(vec![self.fiber(lambda); n]);
        }
        Ok(self.base.sigma_orbit(lambda, n)?.into_iter().map(|l| self.fiber(l)).collect())
    }

    pub fn fiber_sequence(&self, lambda: BasePoint, n: usize) -> Result<FiberSequence> {
        self.base.space.check(lambda)?;
        if self.base.is_identity() {
            return Ok(FiberSequence::Constant(self.fiber(lambda)));
        }
        Ok(FiberSequence::Varying(self.base.sigma_orbit(lambda, n)?.into_iter().map(|l| self.fiber(l)).collect()))
    }

    pub fn factor_apply(&self, j: usize, lambda: BasePoint, z: PlanePoint) -> Result<PlanePoint, OrbitError> {
        self.base.space.check(lambda)?;
        let out = self.factors[j].at(lambda).apply(z);
        if out.is_escaped() {
            return Err(OrbitError::Escaped(Escaped { step: 1, last: z }));
        }
        Ok(out)
    }

    pub fn factor_inverse(&self, j: usize, lambda: BasePoint, z: PlanePoint) -> Result<PlanePoint, OrbitError> {
        self.base.space.check(lambda)?;
        let out = self.factors[j].at(lambda).inverse(z)?;
        if out.is_escaped() {
            return Err(OrbitError::Escaped(Escaped { step: 1, last: z }));
        }
        Ok(out)
    }

    pub fn fiber_apply(&self, lambda: BasePoint, z: PlanePoint, direction: Direction) -> Result<PlanePoint, OrbitError> {
        self.base.space.check(lambda)?;
        let out = self.fiber(lambda).step(z, direction)?;
        if out.is_escaped() {
            return Err(OrbitError::Escaped(Escaped { step: 1, last: z }));
        }
        Ok(out)
    }

    fn trace<I>(start: PlanePoint, steps: I) -> Result<Orbit, OrbitError>
    where
        I: IntoIterator<Item = (Fiber, Direction)>,
    {
        let mut points = vec![start];
        let mut cur = start;
        for (k, (fiber, dir)) in steps.into_iter().enumerate() {
            let next = fiber.step(cur, dir)?;
            if next.is_escaped() {
                return Err(OrbitError::Escaped(Escaped { step: k + 1, last: cur }));
            }
            points.push(next);
            cur = next;
        }
        Ok(Orbit { points })
    }

    /// `H_λ^{+n} = H_{σ^{n−1}(λ)} ∘ ⋯ ∘ H_λ`.
    pub fn skew_forward(&self, lambda: BasePoint, z: PlanePoint, n: usize) -> Result<Orbit, OrbitError> {
        let fibers = self.fibers_along(lambda, n)?;
        Self::trace(z, fibers.into_iter().map(|f| (f, Direction::Forward)))
    }

    /// `H_λ^{−n} = H_{σ^{n−1}(λ)}^{−1} ∘ ⋯ ∘ H_λ^{−1}`.
    pub fn skew_backward(&self, lambda: BasePoint, z: PlanePoint, n: usize) -> Result<Orbit, OrbitError> {
        let fibers = self.fibers_along(lambda, n)?;
        Self::trace(z, fibers.into_iter().map(|f| (f, Direction::Backward)))
    }

    /// `(H_λ^{+n})^{−1} = H_λ^{−1} ∘ ⋯ ∘ H_{σ^{n−1}(λ)}^{−1}`: the innermost map sits at σ^{n−1}(λ).
    pub fn inverse_of_forward(&self, lambda: BasePoint, z: PlanePoint, n: usize) -> Result<Orbit, OrbitError> {
        let fibers = self.fibers_along(lambda, n)?;
        Self::trace(z, fibers.into_iter().rev().map(|f| (f, Direction::Backward)))
    }

    /// `(H_λ^{−n})^{−1} = H_λ ∘ ⋯ ∘ H_{σ^{n−1}(λ)}`.
    pub fn inverse_of_backward(&self, lambda: BasePoint, z: PlanePoint, n: usize) -> Result<Orbit, OrbitError> {
        let fibers = self.fibers_along(lambda, n)?;
        Self::trace(z, fibers.into_iter().rev().map(|f| (f, Direction::Forward)))
    }

    /// Constant Jacobian determinant a₁(λ)⋯a_m(λ) of `H_λ`.
    pub fn jacobian_constant(&self, lambda: BasePoint) -> Result<Complex64> {
        self.base.space.check(lambda)?;
        Ok(self.fiber(lambda).jacobian())
    }

    /// sup over M of |a_j(λ)|, from the coefficient bound and a dense sample.
    pub fn a_sup(&self) -> f64 {
        let samples = self.base.space.dense_sample(24);
        self.factors
            .iter()
            .flat_map(|f| samples.iter().map(move |&l| f.a.eval(l).norm()))
            .fold(0.0, f64::max)
    }
}

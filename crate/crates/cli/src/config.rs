//! Versioned JSON job configuration.

use std::path::{Path, PathBuf};

use fhd_core::convergence::{Bump, PullbackTarget};
use fhd_core::entropy::Atom;
use fhd_core::pk::{HomogeneousMap, PkSkewSystem};
use fhd_core::slice::SliceSpec;
use fhd_core::systems::{self, System};
use fhd_core::{Base, Direction, HenonFactor, PlanePoint, SkewHenonSystem};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;
/// Largest 2-d grid side.
pub const MAX_RES: usize = 4096;
/// Largest 4-d grid side.
pub const MAX_RES_4D: usize = 64;
/// Cap on every sample count.
pub const MAX_SAMPLES: usize = 1_000_000;
pub const MAX_ITERATES: usize = 10_000;
const MAX_PK_PROBE: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("schema violation at {pointer:?}: {message}")]
    Schema { pointer: String, message: String },
}

impl ConfigError {
    fn at(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Schema { pointer: pointer.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum JobKind {
    RenderJulia,
    GreenEval,
    Measure,
    Convergence,
    Entropy,
    PkBasin,
    PkFatou,
    VerifyAll,
}

impl JobKind {
    pub fn name(self) -> &'static str {
        match self {
            JobKind::RenderJulia => "render-julia",
            JobKind::GreenEval => "green-eval",
            JobKind::Measure => "measure",
            JobKind::Convergence => "convergence",
            JobKind::Entropy => "entropy",
            JobKind::PkBasin => "pk-basin",
            JobKind::PkFatou => "pk-fatou",
            JobKind::VerifyAll => "verify-all",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub version: u32,
    pub system: SystemDef,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub job: Job,
}

/// A catalogue name or an explicit definition.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum SystemDef {
    Example(String),
    Henon(SkewHenonSystem),
    Pk(PkSkewSystem),
}

impl SystemDef {
    pub fn label(&self) -> String {
        match self {
            SystemDef::Example(name) => name.clone(),
            SystemDef::Henon(_) => "inline-henon".into(),
            SystemDef::Pk(_) => "inline-pk".into(),
        }
    }

    /// Builds the system through the validating constructors.
    pub fn resolve(&self) -> Result<System, ConfigError> {
        fn err(p: &str) -> impl Fn(fhd_core::Error) -> ConfigError + '_ {
            move |e| ConfigError::at(p, e.to_string())
        }
        match self {
            SystemDef::Example(name) => systems::example(name).map_err(err("/system/example")),
            SystemDef::Henon(s) => {
                let base = Base::new(s.base.space.clone(), s.base.map.clone()).map_err(err("/system/henon/base"))?;
                let factors = s
                    .factors
                    .iter()
                    .enumerate()
                    .map(|(i, f)| HenonFactor::new(f.lower.clone(), f.a.clone()).map_err(err(&format!("/system/henon/factors/{i}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                SkewHenonSystem::new(base, factors).map(System::Henon).map_err(err("/system/henon"))
            }
            SystemDef::Pk(s) => {
                let map = HomogeneousMap::new(s.map.k, s.map.degree, s.map.components.clone()).map_err(err("/system/pk/map"))?;
                PkSkewSystem::new(s.base.clone(), map).map(System::Pk).map_err(err("/system/pk"))
            }
        }
    }
}

/// Job parameters, keyed by job kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Job {
    RenderJulia(RenderParams),
    GreenEval(GreenEvalParams),
    Measure(MeasureParams),
    Convergence(ConvergenceParams),
    Entropy(EntropyParams),
    PkBasin(PkBasinParams),
    PkFatou(PkFatouParams),
    VerifyAll(VerifyAllParams),
}

impl Job {
    pub fn kind(&self) -> JobKind {
        match self {
            Job::RenderJulia(_) => JobKind::RenderJulia,
            Job::GreenEval(_) => JobKind::GreenEval,
            Job::Measure(_) => JobKind::Measure,
            Job::Convergence(_) => JobKind::Convergence,
            Job::Entropy(_) => JobKind::Entropy,
            Job::PkBasin(_) => JobKind::PkBasin,
            Job::PkFatou(_) => JobKind::PkFatou,
            Job::VerifyAll(_) => JobKind::VerifyAll,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideDef {
    #[default]
    Plus,
    Minus,
}

impl From<SideDef> for Direction {
    fn from(s: SideDef) -> Self {
        match s {
            SideDef::Plus => Direction::Forward,
            SideDef::Minus => Direction::Backward,
        }
    }
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn vertical() -> SliceSpec {
    SliceSpec::Vertical { x0: zero() }
}

/// Square slice window; `half_width` defaults to `R + 1` for Hénon systems.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowDef {
    #[serde(default = "zero")]
    pub center: Complex64,
    #[serde(default)]
    pub half_width: Option<f64>,
    pub res: usize,
}

impl WindowDef {
    fn with_res(res: usize) -> Self {
        WindowDef { center: zero(), half_width: None, res }
    }

    fn sized(half_width: f64, res: usize) -> Self {
        WindowDef { center: zero(), half_width: Some(half_width), res }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window4Def {
    #[serde(default)]
    pub center: [f64; 4],
    pub half_width: f64,
    pub res: usize,
}

impl Default for Window4Def {
    fn default() -> Self {
        Window4Def { center: [0.0; 4], half_width: 2.0, res: 32 }
    }
}

/// Grid over one coordinate of the affine chart `x_0 = 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartDef {
    pub window: WindowDef,
    /// Values of the other chart coordinates; empty means all zero.
    #[serde(default)]
    pub anchor: Vec<Complex64>,
    #[serde(default)]
    pub axis: usize,
}

impl ChartDef {
    fn with_res(res: usize) -> Self {
        ChartDef { window: WindowDef::sized(2.0, res), anchor: Vec::new(), axis: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderParams {
    pub lambda: Complex64,
    pub side: SideDef,
    pub slice: SliceSpec,
    pub window: WindowDef,
    pub horizon: usize,
}

impl Default for RenderParams {
    fn default() -> Self {
        RenderParams { lambda: zero(), side: SideDef::Plus, slice: vertical(), window: WindowDef::with_res(512), horizon: 200 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreenEvalParams {
    pub lambda: Complex64,
    pub side: SideDef,
    pub tol: f64,
    /// Explicit evaluation points.
    pub points: Vec<PlanePoint>,
    /// Extra uniform points in the box `[-half, half]⁴`.
    pub random: usize,
    /// Defaults to `1.5 R`.
    pub half: Option<f64>,
    pub invariance_samples: usize,
    pub invariance_tol: f64,
}

impl Default for GreenEvalParams {
    fn default() -> Self {
        GreenEvalParams {
            lambda: zero(),
            side: SideDef::Plus,
            tol: 1e-8,
            points: Vec::new(),
            random: 1000,
            half: None,
            invariance_samples: 1000,
            invariance_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureTarget {
    Slice(SliceTarget),
    Wedge(WedgeTarget),
    Product(ProductTarget),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SliceTarget {
    pub side: SideDef,
    pub slice: SliceSpec,
    pub window: WindowDef,
    pub expected_mass: f64,
    pub mass_tol: f64,
    /// Largest clamped negative mass relative to the total.
    pub negative_tol: f64,
    pub pullback: bool,
    pub pullback_tol: f64,
}

impl Default for SliceTarget {
    fn default() -> Self {
        SliceTarget {
            side: SideDef::Plus,
            slice: vertical(),
            window: WindowDef::with_res(512),
            expected_mass: 1.0,
            mass_tol: 0.02,
            negative_tol: 0.01,
            pullback: true,
            pullback_tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WedgeTarget {
    pub window: Window4Def,
    pub epsilon: Option<f64>,
    pub mass_tol: f64,
    pub mode_tol: f64,
}

impl Default for WedgeTarget {
    fn default() -> Self {
        WedgeTarget { window: Window4Def::default(), epsilon: None, mass_tol: 0.1, mode_tol: 0.1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductTarget {
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub window: Window4Def,
    #[serde(default = "ProductTarget::default_tol")]
    pub mass_tol: f64,
}

impl ProductTarget {
    fn default_tol() -> f64 {
        0.1
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureParams {
    pub lambda: Complex64,
    pub target: MeasureTarget,
}

impl Default for MeasureParams {
    fn default() -> Self {
        MeasureParams { lambda: zero(), target: MeasureTarget::Slice(SliceTarget::default()) }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Uniform(UniformExperiment),
    Pullback(PullbackExperimentDef),
    Contraction(ContractionExperiment),
    LimitConstant(LimitConstantExperiment),
    Holder(HolderExperiment),
}

/// Sup-norm successive differences of `G_n` over a mixed sample set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UniformExperiment {
    pub side: SideDef,
    pub half: f64,
    pub samples: usize,
    pub n_lo: usize,
    pub n_hi: usize,
    /// Allowed relative deviation of the fitted ratio from `1/d`.
    pub ratio_tol: f64,
}

impl Default for UniformExperiment {
    fn default() -> Self {
        UniformExperiment { side: SideDef::Plus, half: 3.0, samples: 1000, n_lo: 2, n_hi: 20, ratio_tol: 0.1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PullbackExperimentDef {
    pub lambda: Complex64,
    pub target: PullbackTarget,
    pub n: Vec<usize>,
    pub slice: SliceSpec,
    pub window: WindowDef,
    /// Required `final / initial` distance ratio.
    pub decay: f64,
    pub monotone_from: usize,
}

impl Default for PullbackExperimentDef {
    fn default() -> Self {
        PullbackExperimentDef {
            lambda: zero(),
            target: PullbackTarget::Line { x0: Complex64::new(10.0, 0.0) },
            n: (1..=8).collect(),
            slice: vertical(),
            window: WindowDef::sized(3.0, 128),
            decay: 1e-2,
            monotone_from: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContractionExperiment {
    pub half: f64,
    pub n_lo: usize,
    pub n_hi: usize,
    pub samples: usize,
    pub lambdas: usize,
    /// The fitted ratio must not exceed `1/d + slack`.
    pub slack: f64,
}

impl Default for ContractionExperiment {
    fn default() -> Self {
        ContractionExperiment { half: 3.0, n_lo: 2, n_hi: 10, samples: 300, lambdas: 8, slack: 0.1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitConstantExperiment {
    pub lambda: Complex64,
    pub psi: Bump,
    pub x0: Complex64,
    pub window: WindowDef,
    /// Defaults to `1/d_m`.
    pub expected: Option<f64>,
    pub tol: f64,
}

impl Default for LimitConstantExperiment {
    fn default() -> Self {
        LimitConstantExperiment { lambda: zero(), psi: Bump::Constant, x0: zero(), window: WindowDef::with_res(128), expected: None, tol: 0.02 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HolderExperiment {
    pub lambda: Complex64,
    pub half: f64,
    pub pairs: usize,
    pub scales: Vec<f64>,
    pub slack: f64,
}

impl Default for HolderExperiment {
    fn default() -> Self {
        let scales = (0..8).map(|k| 10f64.powf(-1.0 - 2.5 * k as f64 / 7.0)).collect();
        HolderExperiment { lambda: zero(), half: 2.0, pairs: 10_000, scales, slack: 0.05 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceParams {
    pub experiment: Experiment,
}

impl Default for ConvergenceParams {
    fn default() -> Self {
        ConvergenceParams { experiment: Experiment::Pullback(PullbackExperimentDef::default()) }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum CloudDef {
    Periodic(PeriodicCloud),
    Bisection(BisectionCloud),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeriodicCloud {
    pub count: usize,
    pub period: usize,
    pub start_half: f64,
    pub max_starts: usize,
    pub max_newton: usize,
}

impl Default for PeriodicCloud {
    fn default() -> Self {
        PeriodicCloud { count: 20_000, period: 14, start_half: 2.0, max_starts: 40_000, max_newton: 60 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BisectionCloud {
    pub count: usize,
    pub eta: f64,
    pub box_half: f64,
    pub horizon: usize,
    pub bisect_tol: f64,
    pub pushes: usize,
}

impl Default for BisectionCloud {
    fn default() -> Self {
        BisectionCloud { count: 2000, eta: 1e-3, box_half: 1.0, horizon: 100, bisect_tol: 1e-12, pushes: 20 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropyParams {
    pub lambda: Complex64,
    pub cloud: CloudDef,
    pub n_max: usize,
    pub epsilon: f64,
    pub shuffles: usize,
    /// The rate must reach `log d − rate_margin` (identity base only).
    pub rate_margin: f64,
}

impl Default for EntropyParams {
    fn default() -> Self {
        EntropyParams { lambda: zero(), cloud: CloudDef::Periodic(PeriodicCloud::default()), n_max: 12, epsilon: 0.8, shuffles: 5, rate_margin: 0.1 }
    }
}

/// A point of `C^{k+1}` with its expected Green value.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenProbe {
    pub x: Vec<Complex64>,
    pub expected: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PkBasinParams {
    pub lambda: Complex64,
    pub chart: ChartDef,
    /// Half-width of the `|G| < band` strip excluded from the agreement check.
    pub band: f64,
    pub steps: usize,
    pub growth_samples: usize,
    /// Expected `[l, L, r, R]`.
    pub expected_growth: Option<[f64; 4]>,
    pub growth_tol: f64,
    pub probes: Vec<GreenProbe>,
    pub probe_tol: f64,
    pub identity_samples: usize,
    pub identity_tol: f64,
}

impl Default for PkBasinParams {
    fn default() -> Self {
        PkBasinParams {
            lambda: zero(),
            chart: ChartDef::with_res(256),
            band: 1e-4,
            steps: 200,
            growth_samples: 10_000,
            expected_growth: None,
            growth_tol: 0.05,
            probes: Vec::new(),
            probe_tol: 1e-6,
            identity_samples: 1000,
            identity_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PkFatouParams {
    pub lambda: Complex64,
    pub chart: ChartDef,
    pub probes: usize,
    pub green_tol: f64,
    pub n_probe: usize,
    pub collar: usize,
    pub min_agreement: f64,
}

impl Default for PkFatouParams {
    fn default() -> Self {
        PkFatouParams { lambda: zero(), chart: ChartDef::with_res(256), probes: 4, green_tol: 1e-13, n_probe: 30, collar: 2, min_agreement: 0.95 }
    }
}

/// Property suite for the configured system. Hénon systems run the filtration,
/// Green and slice checks; P^k systems run the growth, identity and basin checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyAllParams {
    pub lambda: Complex64,
    pub filtration_samples: usize,
    pub green_samples: usize,
    pub green_tol: f64,
    pub invariance_tol: f64,
    pub convergence_samples: usize,
    pub ratio_tol: f64,
    pub slice_res: usize,
    pub mass_tol: f64,
    pub pullback_tol: f64,
    pub chart_res: usize,
}

impl Default for VerifyAllParams {
    fn default() -> Self {
        VerifyAllParams {
            lambda: zero(),
            filtration_samples: 10_000,
            green_samples: 1000,
            green_tol: 1e-8,
            invariance_tol: 1e-6,
            convergence_samples: 1000,
            ratio_tol: 0.1,
            slice_res: 256,
            mass_tol: 0.02,
            pullback_tol: 0.05,
            chart_res: 128,
        }
    }
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        let token = match seg {
            Segment::Seq { index } => index.to_string(),
            Segment::Map { key } => key.clone(),
            Segment::Enum { variant } => variant.clone(),
            Segment::Unknown => "?".into(),
        };
        out.push_str(&token.replace('~', "~0").replace('/', "~1"));
    }
    out
}

pub fn parse(text: &str) -> Result<JobConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: JobConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = json_pointer(e.path());
        ConfigError::Schema { pointer, message: e.into_inner().to_string() }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load(path: &Path) -> Result<JobConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse(&text)
}

/// Collects range violations with their pointers.
struct Checker {
    prefix: String,
    first: Option<ConfigError>,
}

impl Checker {
    fn positive(&mut self, field: &str, v: f64) {
        if !(v > 0.0 && v.is_finite()) {
            self.fail(field, format!("must be positive and finite, got {v}"));
        }
    }

    fn count(&mut self, field: &str, v: usize, lo: usize, hi: usize) {
        if v < lo || v > hi {
            self.fail(field, format!("must lie in [{lo}, {hi}], got {v}"));
        }
    }

    fn window(&mut self, field: &str, w: &WindowDef, lo: usize) {
        self.count(&format!("{field}/res"), w.res, lo, MAX_RES);
        if let Some(h) = w.half_width {
            self.positive(&format!("{field}/half_width"), h);
        }
    }

    fn window4(&mut self, field: &str, w: &Window4Def) {
        self.count(&format!("{field}/res"), w.res, fhd_core::wedge::MIN_WEDGE_RES, MAX_RES_4D);
        self.positive(&format!("{field}/half_width"), w.half_width);
    }

    fn fail(&mut self, field: &str, message: String) {
        if self.first.is_none() {
            self.first = Some(ConfigError::at(format!("{}/{field}", self.prefix), message));
        }
    }
}

impl JobConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != SCHEMA_VERSION {
            return Err(ConfigError::at("/version", format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.version)));
        }
        self.system.resolve()?;
        let kind = self.job.kind().name();
        let mut c = Checker { prefix: format!("/job/{kind}"), first: None };
        let min_slice = fhd_core::slice::MIN_SLICE_RES;
        match &self.job {
            Job::RenderJulia(p) => {
                c.window("window", &p.window, 8);
                c.count("horizon", p.horizon, 1, MAX_ITERATES);
            }
            Job::GreenEval(p) => {
                c.positive("tol", p.tol);
                c.positive("invariance_tol", p.invariance_tol);
                c.count("random", p.random, 0, MAX_SAMPLES);
                c.count("invariance_samples", p.invariance_samples, 0, MAX_SAMPLES);
                if let Some(h) = p.half {
                    c.positive("half", h);
                }
            }
            Job::Measure(p) => match &p.target {
                MeasureTarget::Slice(s) => {
                    c.window("target/slice/window", &s.window, min_slice);
                    c.positive("target/slice/expected_mass", s.expected_mass);
                    c.positive("target/slice/mass_tol", s.mass_tol);
                    c.positive("target/slice/negative_tol", s.negative_tol);
                    c.positive("target/slice/pullback_tol", s.pullback_tol);
                }
                MeasureTarget::Wedge(w) => {
                    c.window4("target/wedge/window", &w.window);
                    if let Some(e) = w.epsilon {
                        c.positive("target/wedge/epsilon", e);
                    }
                    c.positive("target/wedge/mass_tol", w.mass_tol);
                    c.positive("target/wedge/mode_tol", w.mode_tol);
                }
                MeasureTarget::Product(t) => {
                    c.window4("target/product/window", &t.window);
                    c.positive("target/product/mass_tol", t.mass_tol);
                    c.count("target/product/atoms", t.atoms.len(), 1, 64);
                }
            },
            Job::Convergence(p) => match &p.experiment {
                Experiment::Uniform(u) => {
                    c.positive("experiment/uniform/half", u.half);
                    c.count("experiment/uniform/samples", u.samples, 2, MAX_SAMPLES);
                    c.count("experiment/uniform/n_hi", u.n_hi, u.n_lo + 1, MAX_ITERATES);
                    c.positive("experiment/uniform/ratio_tol", u.ratio_tol);
                }
                Experiment::Pullback(e) => {
                    c.window("experiment/pullback/window", &e.window, 8);
                    c.count("experiment/pullback/n", e.n.len(), 1, 64);
                    if e.n.iter().any(|&n| n == 0 || n > 200) {
                        c.fail("experiment/pullback/n", "orders must lie in [1, 200]".into());
                    }
                    c.positive("experiment/pullback/decay", e.decay);
                }
                Experiment::Contraction(e) => {
                    c.positive("experiment/contraction/half", e.half);
                    c.count("experiment/contraction/n_hi", e.n_hi, e.n_lo + 1, 200);
                    c.count("experiment/contraction/samples", e.samples, 1, MAX_SAMPLES);
                    c.count("experiment/contraction/lambdas", e.lambdas, 1, 1000);
                    c.positive("experiment/contraction/slack", e.slack);
                }
                Experiment::LimitConstant(e) => {
                    c.window("experiment/limit-constant/window", &e.window, min_slice);
                    c.positive("experiment/limit-constant/tol", e.tol);
                }
                Experiment::Holder(e) => {
                    c.positive("experiment/holder/half", e.half);
                    c.count("experiment/holder/pairs", e.pairs, e.scales.len().max(1), MAX_SAMPLES);
                    c.count("experiment/holder/scales", e.scales.len(), 2, 64);
                    for (i, &s) in e.scales.iter().enumerate() {
                        c.positive(&format!("experiment/holder/scales/{i}"), s);
                    }
                    c.positive("experiment/holder/slack", e.slack);
                }
            },
            Job::Entropy(p) => {
                c.count("n_max", p.n_max, 1, 64);
                c.positive("epsilon", p.epsilon);
                c.count("shuffles", p.shuffles, 1, 1000);
                c.positive("rate_margin", p.rate_margin);
                match &p.cloud {
                    CloudDef::Periodic(q) => {
                        c.count("cloud/periodic/count", q.count, fhd_core::entropy::MIN_CLOUD, MAX_SAMPLES);
                        c.count("cloud/periodic/period", q.period, 1, 64);
                        c.positive("cloud/periodic/start_half", q.start_half);
                    }
                    CloudDef::Bisection(q) => {
                        c.count("cloud/bisection/count", q.count, fhd_core::entropy::MIN_CLOUD, MAX_SAMPLES);
                        c.positive("cloud/bisection/eta", q.eta);
                        c.positive("cloud/bisection/box_half", q.box_half);
                        c.positive("cloud/bisection/bisect_tol", q.bisect_tol);
                    }
                }
            }
            Job::PkBasin(p) => {
                c.window("chart/window", &p.chart.window, 8);
                c.positive("band", p.band);
                c.count("steps", p.steps, 1, MAX_ITERATES);
                c.count("growth_samples", p.growth_samples, 1, MAX_SAMPLES);
                c.positive("growth_tol", p.growth_tol);
                c.positive("probe_tol", p.probe_tol);
                c.positive("identity_tol", p.identity_tol);
                c.count("identity_samples", p.identity_samples, 0, MAX_SAMPLES);
            }
            Job::PkFatou(p) => {
                c.window("chart/window", &p.chart.window, 8);
                c.positive("green_tol", p.green_tol);
                c.count("probes", p.probes, 4, 64);
                c.count("n_probe", p.n_probe, 1, MAX_PK_PROBE);
                c.positive("min_agreement", p.min_agreement);
            }
            Job::VerifyAll(p) => {
                c.count("filtration_samples", p.filtration_samples, 1, MAX_SAMPLES);
                c.count("green_samples", p.green_samples, 1, MAX_SAMPLES);
                c.count("convergence_samples", p.convergence_samples, 2, MAX_SAMPLES);
                c.count("slice_res", p.slice_res, min_slice, MAX_RES);
                c.count("chart_res", p.chart_res, 8, MAX_RES);
                for (f, v) in [
                    ("green_tol", p.green_tol),
                    ("invariance_tol", p.invariance_tol),
                    ("ratio_tol", p.ratio_tol),
                    ("mass_tol", p.mass_tol),
                    ("pullback_tol", p.pullback_tol),
                ] {
                    c.positive(f, v);
                }
            }
        }
        match c.first {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = parse(r#"{"version": 1, "system": {"example": "classical"}, "job": {"render-julia": {}}}"#).unwrap();
        match cfg.job {
            Job::RenderJulia(p) => assert_eq!(p.window.res, 512),
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn errors_carry_json_pointers() {
        let e = parse(r#"{"version": 1, "system": {"example": "classical"}, "job": {"render-julia": {"window": {"res": "big"}}}}"#).unwrap_err();
        assert!(matches!(&e, ConfigError::Schema { pointer, .. } if pointer == "/job/render-julia/window/res"), "{e}");
        let e = parse(r#"{"version": 1, "system": {"example": "classical"}, "job": {"green-eval": {"tol": -1.0}}}"#).unwrap_err();
        assert!(matches!(&e, ConfigError::Schema { pointer, .. } if pointer == "/job/green-eval/tol"), "{e}");
        let e = parse(r#"{"version": 2, "system": {"example": "classical"}, "job": {"entropy": {}}}"#).unwrap_err();
        assert!(matches!(&e, ConfigError::Schema { pointer, .. } if pointer == "/version"), "{e}");
        let e = parse(r#"{"version": 1, "system": {"example": "nope"}, "job": {"entropy": {}}}"#).unwrap_err();
        assert!(matches!(&e, ConfigError::Schema { pointer, .. } if pointer == "/system/example"), "{e}");
        let e = parse(r#"{"version": 1, "system": {"example": "classical"}, "job": {"measure": {"target": {"slice": {"window": {"res": 100000}}}}}}"#).unwrap_err();
        assert!(matches!(&e, ConfigError::Schema { pointer, .. } if pointer == "/job/measure/target/slice/window/res"), "{e}");
    }

    #[test]
    fn inline_henon_system_uses_coefficient_triples() {
        let text = r#"{
            "version": 1,
            "system": {"henon": {
                "base": {"space": {"kind": "closed-disc", "radius": 0.25}, "map": {"kind": "linear-contraction", "c": [0.5, 0.0]}},
                "factors": [{"lower": [[[1, 0, [1.0, 0.0]]], []], "a": [[0, 0, [1.0, 0.0]]]}]
            }},
            "job": {"green-eval": {"random": 10}}
        }"#;
        let cfg = parse(text).unwrap();
        match cfg.system.resolve().unwrap() {
            System::Henon(s) => assert_eq!(s, systems::disc_contraction()),
            System::Pk(_) => panic!("wrong family"),
        }
    }

    #[test]
    fn inline_systems_are_revalidated() {
        // |c| > 1 is rejected by the base constructor even though it deserializes.
        let text = r#"{
            "version": 1,
            "system": {"henon": {
                "base": {"space": {"kind": "closed-disc", "radius": 0.25}, "map": {"kind": "linear-contraction", "c": [2.0, 0.0]}},
                "factors": [{"lower": [[], []], "a": [[0, 0, [1.0, 0.0]]]}]
            }},
            "job": {"green-eval": {}}
        }"#;
        let e = parse(text).unwrap_err();
        assert!(matches!(&e, ConfigError::Schema { pointer, .. } if pointer == "/system/henon/base"), "{e}");
    }
}

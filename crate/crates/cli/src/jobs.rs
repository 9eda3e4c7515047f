//! One runner per job kind. Each pushes checks and results into a [`Ctx`].

use std::io;

use fhd_core::convergence::{contraction_cauchy_check, limit_constant, pullback_convergence};
use fhd_core::entropy::{entropy_estimate, periodic_cloud, product_measure, sample_julia_cloud, CloudParams, PeriodicParams, ProductMeasureSpec};
use fhd_core::filtration::{find_radius, verify_invariance};
use fhd_core::green::{convergence_samples, successive_differences, GreenEngine};
use fhd_core::pk::{estimate_growth, fatou_detect, Basin, ChartGrid, FatouParams, PkEngine, PkSkewSystem};
use fhd_core::slice::{escape_boundary, escape_times, mu_slice, pullback_identity_check, SliceSpec, Window};
use fhd_core::systems::System;
use fhd_core::util::{random_in_square, rng_for};
use fhd_core::wedge::{wedge_measure, Window4};
use fhd_core::{BasePoint, Direction, PlanePoint, SkewHenonSystem};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::config::*;
use crate::output::{gray_mask, gray_sqrt, Cell, Outputs};
use crate::report::{Check, Failure};

#[derive(Debug, thiserror::Error)]
pub enum JobError {
    #[error(transparent)]
    Numeric(#[from] fhd_core::Error),
    #[error("writing output: {0}")]
    Io(#[from] io::Error),
}

type Res<T = ()> = Result<T, JobError>;

pub struct Ctx<'a> {
    pub seed: u64,
    pub out: &'a mut Outputs,
    pub checks: Vec<Check>,
    pub failures: Vec<Failure>,
    pub results: serde_json::Map<String, Value>,
}

impl Ctx<'_> {
    fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn result(&mut self, key: &str, value: impl Serialize) {
        self.results.insert(key.into(), serde_json::to_value(value).expect("serializable result"));
    }

    /// Records a numeric error as a failure entry; I/O errors propagate.
    pub fn stage(&mut self, name: &str, r: Res) -> io::Result<()> {
        match r {
            Ok(()) => Ok(()),
            Err(JobError::Numeric(e)) => {
                self.failures.push(Failure { stage: name.into(), error: e.to_string() });
                Ok(())
            }
            Err(JobError::Io(e)) => Err(e),
        }
    }
}

fn bp(c: Complex64) -> BasePoint {
    BasePoint(c)
}

fn henon(sys: &System) -> Res<&SkewHenonSystem> {
    match sys {
        System::Henon(s) => Ok(s),
        System::Pk(_) => Err(fhd_core::Error::Unsupported("this job needs a Hénon system".into()).into()),
    }
}

fn pk(sys: &System) -> Res<&PkSkewSystem> {
    match sys {
        System::Pk(s) => Ok(s),
        System::Henon(_) => Err(fhd_core::Error::Unsupported("this job needs a P^k system".into()).into()),
    }
}

fn window(def: &WindowDef, default_half: f64) -> Window {
    Window::new(def.center, def.half_width.unwrap_or(default_half), def.res)
}

fn grid_index(res: usize, k: usize) -> (usize, usize) {
    (k % res, k / res)
}

pub fn run_job(ctx: &mut Ctx, sys: &System, job: &Job) -> io::Result<()> {
    let name = job.kind().name();
    let r = match job {
        Job::RenderJulia(p) => render_julia(ctx, sys, p),
        Job::GreenEval(p) => green_eval(ctx, sys, p),
        Job::Measure(p) => measure(ctx, sys, p),
        Job::Convergence(p) => convergence(ctx, sys, p),
        Job::Entropy(p) => entropy(ctx, sys, p),
        Job::PkBasin(p) => pk_basin(ctx, sys, p),
        Job::PkFatou(p) => pk_fatou(ctx, sys, p),
        Job::VerifyAll(p) => return verify_all(ctx, sys, p),
    };
    ctx.stage(name, r)
}

fn render_julia(ctx: &mut Ctx, sys: &System, p: &RenderParams) -> Res {
    let engine = GreenEngine::new(henon(sys)?.clone())?;
    let w = window(&p.window, engine.radius() + 1.0);
    let times = escape_times(&engine, bp(p.lambda), p.side.into(), p.slice, w, p.horizon)?;
    // Level sets of the escape time finer than the grid spacing.
    let n_lo = ((1.0 / w.spacing()).ln() / engine.degree().ln()).ceil().clamp(1.0, p.horizon as f64) as usize;
    let boundary = escape_boundary(&times, w.res, n_lo, p.horizon);
    let scale = (1.0 + p.horizon as f64).ln();
    let shade: Vec<u8> = times
        .iter()
        .map(|t| match t {
            None => 0,
            Some(t) => (255.0 * (1.0 - (1.0 + *t as f64).ln() / scale)).round().clamp(1.0, 255.0) as u8,
        })
        .collect();
    ctx.out.image("escape", w.res, &shade)?;
    ctx.out.image("boundary", w.res, &gray_mask(&boundary.cells))?;
    let rows = boundary.cells.iter().enumerate().filter(|(_, &b)| b).map(|(k, _)| {
        let (i, j) = grid_index(w.res, k);
        let t = w.node(i, j);
        vec![Cell::U(i), Cell::U(j), Cell::F(t.re), Cell::F(t.im)]
    });
    ctx.out.csv("boundary.csv", &["i", "j", "t_re", "t_im"], rows)?;
    let bounded = times.iter().filter(|t| t.is_none()).count();
    ctx.result("window", w);
    ctx.result("bounded_cells", bounded);
    ctx.result("boundary_cells", boundary.count());
    ctx.result("boundary_levels", [n_lo, p.horizon]);
    ctx.check(Check::at_least("boundary-nonempty", boundary.count() as f64, 1.0));
    Ok(())
}

fn green_eval(ctx: &mut Ctx, sys: &System, p: &GreenEvalParams) -> Res {
    let engine = GreenEngine::new(henon(sys)?.clone())?;
    let lambda = bp(p.lambda);
    engine.sys.base.space.check(lambda)?;
    let half = p.half.unwrap_or(1.5 * engine.radius());
    let mut rng = rng_for(ctx.seed, 0);
    let zero = Complex64::new(0.0, 0.0);
    let mut points = p.points.clone();
    points.extend((0..p.random).map(|_| PlanePoint::new(random_in_square(&mut rng, zero, half), random_in_square(&mut rng, zero, half))));
    let fibers = engine.fibers(lambda)?;
    let side: Direction = p.side.into();
    let values: Vec<_> = points.par_iter().map(|&z| engine.green_along(&fibers, z, side, p.tol)).collect();
    let rows = points.iter().zip(&values).map(|(z, v)| {
        vec![
            Cell::F(z.x.re),
            Cell::F(z.x.im),
            Cell::F(z.y.re),
            Cell::F(z.y.im),
            Cell::F(v.value),
            Cell::U(v.n_used),
            Cell::F(v.error_bound),
            Cell::from(v.cap_limited),
        ]
    });
    ctx.out.csv("green.csv", &["x_re", "x_im", "y_re", "y_im", "value", "n_used", "error_bound", "cap_limited"], rows)?;
    let worst = values.iter().filter(|v| !v.cap_limited).map(|v| v.error_bound).fold(0.0, f64::max);
    ctx.result("points", points.len());
    ctx.result("cap_limited", values.iter().filter(|v| v.cap_limited).count());
    ctx.result("radius", engine.radius());
    ctx.check(Check::at_most("error-bound", worst, p.tol));
    if p.invariance_samples > 0 {
        let r = engine.check_invariance(lambda, p.invariance_samples, p.tol, ctx.seed)?;
        ctx.result("invariance", r);
        ctx.check(Check::at_most("invariance", r.max(), p.invariance_tol));
    }
    Ok(())
}

fn measure(ctx: &mut Ctx, sys: &System, p: &MeasureParams) -> Res {
    let engine = GreenEngine::new(henon(sys)?.clone())?;
    let lambda = bp(p.lambda);
    match &p.target {
        MeasureTarget::Slice(s) => slice_measure(ctx, &engine, lambda, s),
        MeasureTarget::Wedge(t) => {
            let w = Window4 { center: t.window.center, half_width: t.window.half_width, res: t.window.res };
            let g = wedge_measure(&engine, lambda, w, t.epsilon)?;
            let modes = [("mixed", g.epsilon, &g.mixed), ("regularized", g.epsilon, &g.regularized), ("regularized-half", 0.5 * g.epsilon, &g.regularized_half)];
            let rows = modes.iter().map(|(name, eps, m)| vec![Cell::from(*name), Cell::F(*eps), Cell::F(m.total), Cell::F(m.negative), Cell::F(m.inside_bidisc)]);
            ctx.out.csv("wedge_mass.csv", &["mode", "epsilon", "total", "negative", "inside_bidisc"], rows)?;
            ctx.check(Check::near("wedge-mass", g.mixed.total, 1.0, t.mass_tol));
            ctx.check(Check::at_most("mode-spread", g.max_mode_spread(), t.mode_tol));
            ctx.result("wedge", &g);
            Ok(())
        }
        MeasureTarget::Product(t) => {
            let window = Window4 { center: t.window.center, half_width: t.window.half_width, res: t.window.res };
            let r = product_measure(&engine, &ProductMeasureSpec { atoms: t.atoms.clone(), window })?;
            let rows = r.atoms.iter().map(|a| vec![Cell::F(a.lambda.0.re), Cell::F(a.lambda.0.im), Cell::F(a.weight), Cell::F(a.mass), Cell::F(a.outside_bidisc)]);
            ctx.out.csv("atoms.csv", &["lambda_re", "lambda_im", "weight", "mass", "outside_bidisc"], rows)?;
            ctx.check(Check::near("product-mass", r.total, 1.0, t.mass_tol));
            ctx.result("product", r);
            Ok(())
        }
    }
}

fn slice_measure(ctx: &mut Ctx, engine: &GreenEngine, lambda: BasePoint, s: &SliceTarget) -> Res {
    let w = window(&s.window, engine.radius() + 1.0);
    let side: Direction = s.side.into();
    let m = mu_slice(engine, lambda, side, s.slice, w)?;
    ctx.out.image("slice_mass", w.res, &gray_sqrt(&m.masses))?;
    let rows = m.masses.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(k, &v)| {
        let (i, j) = grid_index(w.res, k);
        let t = w.node(i, j);
        vec![Cell::U(i), Cell::U(j), Cell::F(t.re), Cell::F(t.im), Cell::F(v)]
    });
    ctx.out.csv("slice_mass.csv", &["i", "j", "t_re", "t_im", "mass"], rows)?;
    ctx.check(Check::near("slice-mass", m.total, s.expected_mass, s.mass_tol));
    ctx.check(Check::at_most("negative-mass-fraction", m.clamped_negative / m.total.abs(), s.negative_tol));
    ctx.result("window", w);
    ctx.result("total", m.total);
    ctx.result("clamped_negative", m.clamped_negative);
    ctx.result("warnings", &m.warnings);
    if s.pullback {
        let r = pullback_identity_check(engine, lambda, side, s.slice, w)?;
        ctx.check(Check::rel_near("pullback-ratio", r.mass_ratio, r.expected_ratio, s.pullback_tol));
        ctx.result("pullback", r);
    }
    Ok(())
}

fn convergence(ctx: &mut Ctx, sys: &System, p: &ConvergenceParams) -> Res {
    let engine = GreenEngine::new(henon(sys)?.clone())?;
    let d = engine.degree();
    match &p.experiment {
        Experiment::Uniform(u) => {
            let samples = convergence_samples(&engine, u.half, u.samples, ctx.seed)?;
            let t = successive_differences(&engine, &samples, u.side.into(), u.n_lo, u.n_hi)?;
            let rows = t.n.iter().zip(&t.sup_difference).map(|(&n, &s)| vec![Cell::U(n), Cell::F(s)]);
            ctx.out.csv("successive_differences.csv", &["n", "sup_difference"], rows)?;
            ctx.check(Check::rel_near("uniform-ratio", t.fitted_ratio, 1.0 / d, u.ratio_tol));
            ctx.result("table", t);
        }
        Experiment::Pullback(e) => {
            let w = window(&e.window, engine.radius() + 1.0);
            let ex = pullback_convergence(&engine, bp(e.lambda), e.target, &e.n, e.slice, w)?;
            let rows = ex.rows.iter().map(|r| vec![Cell::U(r.n), Cell::F(r.l1_distance), Cell::F(r.kappa), Cell::U(r.excluded_cells)]);
            ctx.out.csv("pullback_distances.csv", &["n", "l1_distance", "kappa", "excluded_cells"], rows)?;
            ctx.check(Check::at_most("final-over-initial", ex.final_over_initial(), e.decay));
            ctx.check(Check::holds("tail-monotone", ex.tail_monotone(e.monotone_from)));
            ctx.result("experiment", ex);
        }
        Experiment::Contraction(e) => {
            let c = contraction_cauchy_check(&engine, e.half, e.n_lo, e.n_hi, e.samples, e.lambdas, ctx.seed)?;
            let rows = c.n.iter().zip(&c.sup_difference).map(|(&n, &s)| vec![Cell::U(n), Cell::F(s)]);
            ctx.out.csv("cauchy_differences.csv", &["n", "sup_difference"], rows)?;
            ctx.check(Check::at_most("contraction-ratio", c.fitted_ratio, 1.0 / d + e.slack));
            ctx.result("check", c);
        }
        Experiment::LimitConstant(e) => {
            let w = window(&e.window, engine.radius() + 1.0);
            let r = limit_constant(&engine, bp(e.lambda), e.psi, e.x0, w)?;
            let expected = e.expected.unwrap_or(1.0 / engine.sys.last_factor_degree() as f64);
            ctx.check(Check::near("limit-constant", r.constant, expected, e.tol));
            ctx.result("report", r);
        }
        Experiment::Holder(e) => {
            let h = engine.holder_estimate(bp(e.lambda), e.half, &e.scales, e.pairs, ctx.seed)?;
            let rows = h.scales.iter().zip(&h.mean_log_differences).map(|(&s, &m)| vec![Cell::F(s), Cell::F(m)]);
            ctx.out.csv("holder_scales.csv", &["delta", "mean_log_difference"], rows)?;
            ctx.check(Check::at_least("holder-exponent", h.empirical_exponent, h.theoretical_exponent - e.slack));
            ctx.result("estimate", h);
        }
    }
    Ok(())
}

fn entropy(ctx: &mut Ctx, sys: &System, p: &EntropyParams) -> Res {
    let engine = GreenEngine::new(henon(sys)?.clone())?;
    let lambda = bp(p.lambda);
    let cloud = match &p.cloud {
        CloudDef::Periodic(q) => {
            let params = PeriodicParams { period: q.period, start_half: q.start_half, max_starts: q.max_starts, max_newton: q.max_newton, seed: ctx.seed };
            periodic_cloud(&engine, lambda, q.count, &params)?
        }
        CloudDef::Bisection(q) => {
            let params = CloudParams { eta: q.eta, box_half: q.box_half, horizon: q.horizon, bisect_tol: q.bisect_tol, pushes: q.pushes, seed: ctx.seed };
            sample_julia_cloud(&engine, lambda, q.count, &params)?
        }
    };
    let run = entropy_estimate(&engine, &cloud, p.n_max, p.epsilon, p.shuffles, ctx.seed)?;
    let rows = cloud.points.iter().map(|z| vec![Cell::F(z.x.re), Cell::F(z.x.im), Cell::F(z.y.re), Cell::F(z.y.im)]);
    ctx.out.csv("cloud.csv", &["x_re", "x_im", "y_re", "y_im"], rows)?;
    let rows = run.n.iter().zip(&run.counts).map(|(&n, &c)| vec![Cell::U(n), Cell::U(c)]);
    ctx.out.csv("separated_counts.csv", &["n", "count"], rows)?;
    ctx.check(Check::holds("counts-nondecreasing", run.counts.windows(2).all(|w| w[1] >= w[0])));
    if engine.sys.base.is_identity() {
        ctx.check(Check::at_least("entropy-rate", run.rate, engine.degree().ln() - p.rate_margin));
    }
    ctx.result("cloud_size", cloud.points.len());
    ctx.result("cloud_lambda", cloud.lambda);
    ctx.result("cloud_period", cloud.period);
    ctx.result("cloud_warnings", &cloud.warnings);
    ctx.result("log_degree", engine.degree().ln());
    ctx.result("run", run);
    Ok(())
}

fn chart(def: &ChartDef, k: usize) -> Res<ChartGrid> {
    let anchor = if def.anchor.is_empty() { vec![Complex64::new(0.0, 0.0); k] } else { def.anchor.clone() };
    if anchor.len() != k || def.axis >= k {
        return Err(fhd_core::Error::Argument(format!("chart needs {k} anchor coordinates and an axis below {k}")).into());
    }
    Ok(ChartGrid { window: window(&def.window, 2.0), anchor, axis: def.axis })
}

/// Homogeneous coordinates `(1, z)` of a chart point.
fn lift(z: Vec<Complex64>) -> Vec<Complex64> {
    std::iter::once(Complex64::new(1.0, 0.0)).chain(z).collect()
}

fn basin_code(b: Basin) -> &'static str {
    match b {
        Basin::Inside => "inside",
        Basin::Outside => "outside",
        Basin::Band => "band",
    }
}

/// Fraction of off-band chart cells where the Green verdict matches the orbit verdict.
fn basin_grid(ctx: &mut Ctx, engine: &PkEngine, lambda: BasePoint, grid: &ChartGrid, band: f64, steps: usize, write: bool) -> Res<f64> {
    let res = grid.window.res;
    let cells: Vec<(f64, Basin, Option<Basin>)> = (0..res * res)
        .into_par_iter()
        .map(|k| {
            let (i, j) = grid_index(res, k);
            let x = lift(grid.chart_point(i, j));
            let g = engine.green(lambda, &x, (band * 1e-3).max(1e-15))?.value;
            let basin = engine.basin_membership(lambda, &x, band)?;
            Ok((g, basin, engine.orbit_verdict(lambda, &x, steps)?))
        })
        .collect::<fhd_core::Result<_>>()?;
    let judged: Vec<bool> = cells.iter().filter(|c| c.1 != Basin::Band).map(|c| Some(c.1) == c.2).collect();
    let agreement = if judged.is_empty() { 1.0 } else { judged.iter().filter(|&&a| a).count() as f64 / judged.len() as f64 };
    if write {
        let shade: Vec<u8> = cells
            .iter()
            .map(|c| match c.1 {
                Basin::Inside => 0,
                Basin::Band => 128,
                Basin::Outside => 255,
            })
            .collect();
        ctx.out.image("basin", res, &shade)?;
        let rows = cells.iter().enumerate().map(|(k, c)| {
            let (i, j) = grid_index(res, k);
            let t = grid.window.node(i, j);
            vec![Cell::U(i), Cell::U(j), Cell::F(t.re), Cell::F(t.im), Cell::F(c.0), Cell::from(basin_code(c.1)), Cell::from(c.2.map_or("none", basin_code))]
        });
        ctx.out.csv("basin.csv", &["i", "j", "z_re", "z_im", "green", "basin", "orbit"], rows)?;
    }
    ctx.result("off_band_cells", judged.len());
    Ok(agreement)
}

fn pk_basin(ctx: &mut Ctx, sys: &System, p: &PkBasinParams) -> Res {
    let sys = pk(sys)?.clone();
    let growth = estimate_growth(&sys, p.growth_samples, 4, ctx.seed)?;
    let engine = PkEngine { sys, growth };
    let lambda = bp(p.lambda);
    ctx.result("growth", growth);
    if let Some([l, big_l, r, big_r]) = p.expected_growth {
        for (name, est, exp) in [("growth-l", growth.l, l), ("growth-L", growth.big_l, big_l), ("growth-r", growth.r, r), ("growth-R", growth.big_r, big_r)] {
            ctx.check(Check::rel_near(name, est, exp, p.growth_tol));
        }
    }
    for (i, probe) in p.probes.iter().enumerate() {
        let v = engine.green(lambda, &probe.x, p.probe_tol * 1e-3)?;
        ctx.check(Check::near(&format!("green-probe-{i}"), v.value, probe.expected, p.probe_tol));
    }
    if p.identity_samples > 0 {
        let r = engine.check_identities(p.identity_samples, p.identity_tol * 1e-3, ctx.seed)?;
        ctx.check(Check::at_most("homogeneity", r.homogeneity, p.identity_tol));
        ctx.check(Check::at_most("invariance", r.invariance, p.identity_tol));
        ctx.result("identities", r);
    }
    let grid = chart(&p.chart, engine.sys.map.k)?;
    let agreement = basin_grid(ctx, &engine, lambda, &grid, p.band, p.steps, true)?;
    ctx.check(Check::at_least("basin-agreement", agreement, 1.0));
    Ok(())
}

fn pk_fatou(ctx: &mut Ctx, sys: &System, p: &PkFatouParams) -> Res {
    let engine = PkEngine::new(pk(sys)?.clone(), ctx.seed)?;
    let grid = chart(&p.chart, engine.sys.map.k)?;
    let params = FatouParams { probes: p.probes, green_tol: p.green_tol, n_probe: p.n_probe, collar: p.collar, seed: ctx.seed };
    let r = fatou_detect(&engine, bp(p.lambda), &grid, &params)?;
    let res = r.res;
    ctx.out.image("fatou_harmonic", res, &gray_mask(&r.harmonic.cells))?;
    ctx.out.image("fatou_normal", res, &gray_mask(&r.normal.cells))?;
    let rows = (0..res * res).map(|k| {
        let (i, j) = grid_index(res, k);
        let t = grid.window.node(i, j);
        vec![
            Cell::U(i),
            Cell::U(j),
            Cell::F(t.re),
            Cell::F(t.im),
            Cell::from(r.harmonic.cells[k]),
            Cell::from(r.normal.cells[k]),
            Cell::from(r.indeterminate.cells[k]),
        ]
    });
    ctx.out.csv("fatou.csv", &["i", "j", "z_re", "z_im", "harmonic", "normal", "indeterminate"], rows)?;
    ctx.check(Check::at_least("fatou-agreement", r.agreement, p.min_agreement));
    ctx.result("growth", engine.growth);
    ctx.result("julia_cells_harmonic", res * res - r.harmonic.count());
    ctx.result("julia_cells_normal", res * res - r.normal.count());
    ctx.result("indeterminate_cells", r.indeterminate.count());
    ctx.result("threshold_harm", r.threshold_harm);
    ctx.result("calibration_residual", r.calibration_residual);
    ctx.result("agreement", r.agreement);
    ctx.result("compared_cells", r.compared_cells);
    Ok(())
}

fn verify_all(ctx: &mut Ctx, sys: &System, p: &VerifyAllParams) -> io::Result<()> {
    match sys {
        System::Henon(s) => verify_henon(ctx, s, p),
        System::Pk(s) => verify_pk(ctx, s, p),
    }
}

fn verify_henon(ctx: &mut Ctx, sys: &SkewHenonSystem, p: &VerifyAllParams) -> io::Result<()> {
    let filt = match find_radius(sys) {
        Ok(f) => f,
        Err(e) => return ctx.stage("filtration", Err(e.into())),
    };
    let inv = verify_invariance(sys, &filt, p.filtration_samples, ctx.seed);
    let violations = inv.plus_violations + inv.minus_violations + inv.growth_violations;
    ctx.check(Check::at_most("filtration-invariance", violations as f64, 0.0));
    ctx.result("filtration", filt);
    ctx.result("filtration_report", &inv);
    let engine = GreenEngine::with_filtration(sys.clone(), filt);
    let lambda = bp(p.lambda);
    let d = engine.degree();

    let r = (|| -> Res {
        let r = engine.check_invariance(lambda, p.green_samples, p.green_tol, ctx.seed)?;
        ctx.check(Check::at_most("green-invariance", r.max(), p.invariance_tol));
        ctx.result("green_invariance", r);
        let big = 1e8;
        let g = engine.green(lambda, PlanePoint::new(Complex64::new(0.0, 0.0), Complex64::new(big, 0.0)), Direction::Forward, 1e-12)?;
        ctx.check(Check::near("green-asymptotic", g.value, big.ln(), 1e-6));
        Ok(())
    })();
    ctx.stage("green-invariance", r)?;

    let r = (|| -> Res {
        let samples = convergence_samples(&engine, 3.0, p.convergence_samples, ctx.seed)?;
        let t = successive_differences(&engine, &samples, Direction::Forward, 2, 20)?;
        let rows = t.n.iter().zip(&t.sup_difference).map(|(&n, &s)| vec![Cell::U(n), Cell::F(s)]);
        ctx.out.csv("successive_differences.csv", &["n", "sup_difference"], rows)?;
        ctx.check(Check::rel_near("green-uniform-ratio", t.fitted_ratio, 1.0 / d, p.ratio_tol));
        ctx.result("green_convergence", t);
        Ok(())
    })();
    ctx.stage("green-convergence", r)?;

    let r = (|| -> Res {
        let slice = SliceSpec::Vertical { x0: Complex64::new(0.0, 0.0) };
        let w = Window::new(Complex64::new(0.0, 0.0), engine.radius() + 1.0, p.slice_res);
        let m = mu_slice(&engine, lambda, Direction::Forward, slice, w)?;
        ctx.check(Check::near("slice-mass", m.total, 1.0, p.mass_tol));
        let pb = pullback_identity_check(&engine, lambda, Direction::Forward, slice, w)?;
        ctx.check(Check::rel_near("pullback-ratio", pb.mass_ratio, pb.expected_ratio, p.pullback_tol));
        ctx.result("slice_mass", m.total);
        ctx.result("pullback", pb);
        Ok(())
    })();
    ctx.stage("slice-measure", r)
}

fn verify_pk(ctx: &mut Ctx, sys: &PkSkewSystem, p: &VerifyAllParams) -> io::Result<()> {
    let engine = match PkEngine::new(sys.clone(), ctx.seed) {
        Ok(e) => e,
        Err(e) => return ctx.stage("growth", Err(e.into())),
    };
    let g = engine.growth;
    ctx.check(Check::holds("growth-ordered", g.l > 0.0 && g.l <= g.big_l && g.r <= g.big_r));
    ctx.result("growth", g);
    let lambda = bp(p.lambda);
    let r = (|| -> Res {
        let r = engine.check_identities(p.green_samples, p.green_tol * 1e-3, ctx.seed)?;
        ctx.check(Check::at_most("homogeneity", r.homogeneity, p.green_tol));
        ctx.check(Check::at_most("invariance", r.invariance, p.green_tol));
        ctx.result("identities", r);
        let def = ChartDef { window: WindowDef { center: Complex64::new(0.0, 0.0), half_width: Some(2.0), res: p.chart_res }, anchor: Vec::new(), axis: 0 };
        let grid = chart(&def, engine.sys.map.k)?;
        let agreement = basin_grid(ctx, &engine, lambda, &grid, 1e-4, 200, false)?;
        ctx.check(Check::at_least("basin-agreement", agreement, 1.0));
        Ok(())
    })();
    ctx.stage("pk-identities", r)
}

pub fn write_checks(ctx: &mut Ctx) -> io::Result<()> {
    let rows: Vec<Vec<Cell>> = ctx
        .checks
        .iter()
        .map(|c| vec![Cell::S(c.name.clone()), Cell::from(c.passed), Cell::F(c.value), Cell::F(c.target.unwrap_or(f64::NAN)), Cell::F(c.bound)])
        .collect();
    ctx.out.csv("checks.csv", &["name", "passed", "value", "target", "bound"], rows)
}

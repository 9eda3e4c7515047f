use fhd_core::filtration::{escape_along, find_radius};
use fhd_core::green::{GreenEngine, Side};
use fhd_core::henon::CoeffTerm;
use fhd_core::pk::PkEngine;
use fhd_core::slice::{pushforward_check, SliceSpec, Window};
use fhd_core::systems::{classical, degree4, disc_contraction, pk_perturbed};
use fhd_core::{BasePoint, Direction, Error, PlanePoint};
use num_complex::Complex64;
use proptest::prelude::*;
use std::sync::OnceLock;

fn classical_engine() -> &'static GreenEngine {
    static E: OnceLock<GreenEngine> = OnceLock::new();
    E.get_or_init(|| GreenEngine::new(classical()).unwrap())
}

fn contraction_engine() -> &'static GreenEngine {
    static E: OnceLock<GreenEngine> = OnceLock::new();
    E.get_or_init(|| GreenEngine::new(disc_contraction()).unwrap())
}

fn pk_engine() -> &'static PkEngine {
    static E: OnceLock<PkEngine> = OnceLock::new();
    E.get_or_init(|| PkEngine::new(pk_perturbed(), 11).unwrap())
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn base_point() -> impl Strategy<Value = BasePoint> {
    (0.0..0.25f64, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| BasePoint(Complex64::from_polar(r, t)))
}

fn plane_point(half: f64) -> impl Strategy<Value = PlanePoint> {
    prop::array::uniform4(-half..half).prop_map(|[a, b, p, q]| PlanePoint::new(c(a, b), c(p, q)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sigma_orbit_is_prefix_closed(l in base_point(), n in 1usize..20, m in 0usize..10) {
        let base = &disc_contraction().base;
        let short = base.sigma_orbit(l, n).unwrap();
        let long = base.sigma_orbit(l, n + m).unwrap();
        prop_assert_eq!(&long[..n], &short[..]);
        prop_assert_eq!(base.iterate(l, n - 1).unwrap(), short[n - 1]);
    }

    #[test]
    fn contraction_orbits_shrink(l in base_point(), n in 1usize..30) {
        let base = &disc_contraction().base;
        let far = base.iterate(l, n).unwrap();
        prop_assert!(far.0.norm() <= l.0.norm() * 0.5f64.powi(n as i32) + 1e-300);
    }

    #[test]
    fn fiber_inverse_undoes_the_fiber(l in base_point(), z in plane_point(3.0)) {
        for sys in [classical(), disc_contraction(), degree4()] {
            let f = sys.fiber(l);
            let back = f.inverse(f.apply(z)).unwrap();
            prop_assert!(back.dist(&z) <= 1e-9 * (1.0 + z.norm().powi(4)));
        }
    }

    #[test]
    fn green_is_nonnegative_and_equivariant(l in base_point(), z in plane_point(2.5)) {
        let e = contraction_engine();
        let g = e.green(l, z, Side::Forward, 1e-12).unwrap();
        prop_assert!(g.value >= 0.0);
        let next = e.sys.base.apply(l).unwrap();
        let image = e.sys.fiber(l).apply(z);
        let g1 = e.green(next, image, Side::Forward, 1e-12).unwrap();
        prop_assert!((g1.value - 2.0 * g.value).abs() <= 1e-8 * (1.0 + g1.value));
    }

    #[test]
    fn green_minus_is_equivariant_for_identity_base(z in plane_point(2.5)) {
        let e = classical_engine();
        let l = BasePoint::real(0.0);
        let g = e.green(l, z, Side::Backward, 1e-12).unwrap();
        let pre = e.sys.fiber(l).inverse(z).unwrap();
        let g1 = e.green(l, pre, Side::Backward, 1e-12).unwrap();
        prop_assert!((g1.value - 2.0 * g.value).abs() <= 1e-8 * (1.0 + g1.value));
    }

    #[test]
    fn escape_verdicts_are_stable_under_longer_horizons(z in plane_point(4.0), h in 1usize..20) {
        let sys = classical();
        let r = find_radius(&sys).unwrap().radius;
        let fibers = sys.fiber_sequence(BasePoint::real(0.0), 60).unwrap();
        let short = escape_along(&fibers, z, h, r, Direction::Forward);
        let long = escape_along(&fibers, z, h + 20, r, Direction::Forward);
        if short.status.escaped() {
            prop_assert_eq!(short.status, long.status);
        }
    }

    #[test]
    fn pk_green_is_log_homogeneous(
        x in prop::array::uniform4(-2.0..2.0f64),
        s in 0.1..10.0f64,
        t in 0.0..std::f64::consts::TAU,
        l in 0.0..0.2f64,
    ) {
        let v = [c(x[0], x[1]), c(x[2], x[3])];
        prop_assume!(v.iter().map(|u| u.norm_sqr()).sum::<f64>() > 1e-4);
        let k = Complex64::from_polar(s, t);
        let e = pk_engine();
        let lam = BasePoint::real(l);
        let g = e.green(lam, &v, 1e-13).unwrap().value;
        let gk = e.green(lam, &[k * v[0], k * v[1]], 1e-13).unwrap().value;
        prop_assert!((gk - g - s.ln()).abs() <= 1e-9);
    }

    #[test]
    fn coeff_terms_round_trip_through_json(lp in 0u32..5, cp in 0u32..5, re in -1e3..1e3f64, im in -1e3..1e3f64) {
        let t = CoeffTerm { lam_pow: lp, conj_pow: cp, coeff: c(re, im) };
        let text = serde_json::to_string(&t).unwrap();
        prop_assert_eq!(serde_json::from_str::<CoeffTerm>(&text).unwrap(), t);
    }
}

#[test]
fn systems_round_trip_through_json() {
    for sys in [classical(), disc_contraction(), degree4()] {
        let text = serde_json::to_string(&sys).unwrap();
        assert_eq!(serde_json::from_str::<fhd_core::SkewHenonSystem>(&text).unwrap(), sys);
    }
    let pk = pk_perturbed();
    let text = serde_json::to_string(&pk).unwrap();
    assert_eq!(serde_json::from_str::<fhd_core::pk::PkSkewSystem>(&text).unwrap(), pk);
}

#[test]
fn minus_pushforward_needs_identity_base() {
    let w = Window::new(c(0.0, 0.0), 3.0, 64);
    let r = pushforward_check(contraction_engine(), BasePoint::real(0.1), Side::Backward, SliceSpec::Vertical { x0: c(0.0, 0.0) }, w);
    assert!(matches!(r, Err(Error::Unsupported(_))));
}

#[test]
fn green_grows_like_log_norm_far_out() {
    let e = classical_engine();
    for y in [1e4, 1e8, 1e12] {
        let g = e.green(BasePoint::real(0.0), PlanePoint::real(0.0, y), Side::Forward, 1e-12).unwrap();
        assert!((g.value - f64::ln(y)).abs() < 1e-6, "y = {y}: {}", g.value);
    }
}

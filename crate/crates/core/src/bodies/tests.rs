use super::*;
use crate::design::{generate_design, DesignConfig};
use crate::rng::{gaussian_vec, stream, unit_vector};
use crate::solver::{conic, support_polytope, Membership};
use proptest::prelude::*;

fn axes() -> QuasiOrthogonalSystem {
    QuasiOrthogonalSystem::from_vectors(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 1.0).unwrap()
}

fn desk(n: usize, m: usize, seed: u64) -> QuasiOrthogonalSystem {
    generate_design(&DesignConfig::desk(n, m, seed)).unwrap()
}

/// A small design whose vectors are long enough to cut the ball in `Q₁°`.
fn long_system(seed: u64) -> QuasiOrthogonalSystem {
    let mut rng = stream(seed, "long-system", 0);
    let v = (0..6).map(|_| gaussian_vec(&mut rng, 3)).collect();
    QuasiOrthogonalSystem::from_vectors(v, 1.0).unwrap()
}

#[test]
fn q_examples() {
    let q = build_q(&axes()).unwrap();
    assert_eq!(q.support(&[3.0, 4.0]).unwrap().value, 4.0);
    assert!((q.gauge(&[1.0, 1.0]).unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(q.membership(&[0.0, 0.0], 1e-9).unwrap(), Membership::Inside);
    let sys = desk(8, 40, 1);
    let q = build_q(&sys).unwrap();
    let p = crate::solver::GeneratorPolytope::new(sys.vectors.clone(), true).unwrap();
    let mut rng = stream(1, "q-support", 0);
    for _ in 0..100 {
        let d = gaussian_vec(&mut rng, 8);
        assert_eq!(q.support(&d).unwrap().value.to_bits(), support_polytope(&p, &d).to_bits());
    }
}

#[test]
fn qt_examples() {
    let qt = build_qt(&axes(), 0.5).unwrap();
    assert_eq!(qt.support(&[1.0, 0.0]).unwrap().value, 2.0);
    assert_eq!(qt.support(&[0.0, 0.0]).unwrap().value, 0.0);
    let far = build_qt(&axes(), 1e6).unwrap();
    assert_eq!(far.support(&[0.3, -0.4]).unwrap().value, 0.5);
    assert!(matches!(build_qt(&axes(), 0.0), Err(Error::NonPositiveT(_))));
}

#[test]
fn qt_polar_examples() {
    let p1 = build_qt_polar(&axes(), 1.0).unwrap();
    assert_eq!(p1.membership(&[0.72, 0.72], 1e-9).unwrap(), Membership::Outside);
    assert_eq!(p1.membership(&[0.7, 0.7], 1e-9).unwrap(), Membership::Inside);
    assert_eq!(p1.membership(&[0.9, 0.0], 1e-9).unwrap(), Membership::Inside);
    let p2 = build_qt_polar(&axes(), 0.5).unwrap();
    assert_eq!(p2.membership(&[0.9, 0.0], 1e-9).unwrap(), Membership::Outside);
}

#[test]
fn k_examples() {
    let sys = axes();
    let k = build_k_eta_kappa(&HardBodyParams::new(sys.clone(), 0.0, 1.0)).unwrap();
    assert_eq!(k.descriptor(), Descriptor::K);
    assert_ne!(k.membership(&[1.0, 1.0, 0.0], 1e-9).unwrap(), Membership::Outside);
    assert_eq!(k.membership(&[1.0 + 1e-6, 1.0, 0.0], 1e-9).unwrap(), Membership::Outside);
    let k2 = build_k_eta_kappa(&HardBodyParams::new(sys, 0.1, 2.0)).unwrap();
    assert!((k2.support(&[1.0, 0.0, 0.0]).unwrap().value - 0.9).abs() < 1e-15);
}

#[test]
fn k_bottom_face_is_q1_polar() {
    for sys in [desk(4, 12, 3), long_system(4)] {
        let n = sys.n;
        let k = build_k_eta_kappa(&HardBodyParams::new(sys.clone(), 0.0, 1.0)).unwrap();
        let q1p = build_qt_polar(&sys, 1.0).unwrap();
        let mut rng = stream(9, "bottom", 0);
        for _ in 0..60 {
            let y: Vec<f64> = gaussian_vec(&mut rng, n).iter().map(|v| 0.6 * v).collect();
            let inside = q1p.gauge(&y).unwrap();
            if (inside - 1.0).abs() < 1e-6 {
                continue;
            }
            let mut p = vec![0.0];
            p.extend(&y);
            let m = k.membership(&p, 1e-9).unwrap();
            // at η = 0 the height 0 is the bottom facet, so points are Boundary rather than Inside
            assert_eq!(m != Membership::Outside, inside < 1.0, "gauge {inside} vs {m:?}");
        }
    }
}

#[test]
fn cone_examples() {
    let sys = axes();
    let cp = cone_oracle(ConeKind::CPlus, &sys, 0.0, 0.02).unwrap();
    assert_eq!(cp.membership(&[1.0, 0.0, 0.0], 1e-9).unwrap(), Membership::Boundary);
    let cm = cone_oracle(ConeKind::CMinus, &sys, 0.5, 0.02).unwrap();
    assert_eq!(cm.membership(&[-2.0, 0.0, 0.0], 1e-9).unwrap(), Membership::Boundary);
    let cmp = cone_oracle(ConeKind::CMinusPrime, &sys, 0.5, 0.02).unwrap();
    let qtp = build_qt_polar(&sys, 0.02).unwrap();
    let mut rng = stream(2, "cone", 0);
    for _ in 0..200 {
        let y: Vec<f64> = gaussian_vec(&mut rng, 2).iter().map(|v| 0.03 * v).collect();
        let expect = qtp.membership(&y, 1e-9).unwrap();
        assert_eq!(cmp.membership(&[0.0, y[0], y[1]], 1e-9).unwrap(), expect);
    }
    // The cap of C₋′ at 0.98.
    assert_eq!(cmp.membership(&[0.99, 0.0, 0.0], 1e-9).unwrap(), Membership::Outside);
    // Cylinder limit at η = 0.
    let cyl = cone_oracle(ConeKind::CMinus, &sys, 0.0, 0.02).unwrap();
    assert_eq!(cyl.membership(&[-1e6, 0.5, 0.2], 1e-9).unwrap(), Membership::Inside);
}

#[test]
fn cone_supports_match_section_scan() {
    // h(d) = sup over heights of d₀y₀ + scale(y₀)·h_section(d⊥), scanned on a grid.
    let sys = desk(3, 10, 5);
    let eta = 0.3;
    let mut rng = stream(5, "cone-support", 0);
    for kind in [ConeKind::CPlus, ConeKind::CMinus, ConeKind::CMinusPrime] {
        let cone = cone_oracle(kind, &sys, eta, 0.5).unwrap();
        for _ in 0..20 {
            let d = gaussian_vec(&mut rng, 4);
            let h = cone.support(&d).unwrap().value;
            let (lo, hi) = match kind {
                ConeKind::CPlus => (-50.0, 1.0 / (1.0 - eta)),
                ConeKind::CMinus => (-1.0 / eta, 50.0),
                ConeKind::CMinusPrime => (-1.0 / eta, PRIME_CAP),
            };
            let f = |y0: f64| {
                let (scale, base) = match kind {
                    ConeKind::CPlus => (1.0 - (1.0 - eta) * y0, cone.gauge_q_for_test(&d[1..])),
                    ConeKind::CMinus => (1.0 + eta * y0, cone.q.support(&d[1..]).max(norm(&d[1..]))),
                    ConeKind::CMinusPrime => (1.0 + eta * y0, conic::support_polar_cap_socp(&cone.q, 0.5, 1.0, &d[1..]).unwrap()),
                };
                d[0] * y0 + scale * base
            };
            let best = (0..=2000)
                .map(|k| f(lo + (hi - lo) * k as f64 / 2000.0))
                .fold(f64::NEG_INFINITY, f64::max);
            if h.is_finite() {
                assert!((h - best).abs() < 1e-6 * (1.0 + h.abs()), "{kind:?}: {h} vs {best}");
            } else {
                // the objective keeps growing along the unbounded end
                let far = if kind == ConeKind::CPlus { f(-1e6) } else { f(1e6) };
                assert!(far > best, "{kind:?}: infinite support but {far} <= {best}");
            }
        }
    }
}

impl ConeOracle {
    fn gauge_q_for_test(&self, v: &[f64]) -> f64 {
        crate::solver::gauge_polytope(&self.q, v, &self.tol).unwrap()
    }
}

#[test]
fn cross_section_examples() {
    let sys = axes();
    let mid = cross_section(&sys, 0.5).unwrap();
    assert!((mid.support(&[1.0, 0.0]).unwrap().value - 1.0).abs() < 1e-12);
    let mut rng = stream(3, "cs", 0);
    for sys in [desk(5, 20, 2), long_system(7)] {
        let s0 = cross_section(&sys, 0.0).unwrap();
        let s1 = cross_section(&sys, 1.0).unwrap();
        let q = build_q(&sys).unwrap();
        let q1p = build_qt_polar(&sys, 1.0).unwrap();
        let ks = cross_section(&sys, 0.3).unwrap();
        for _ in 0..100 {
            let y = gaussian_vec(&mut rng, sys.n);
            assert!((s0.gauge(&y).unwrap() - q1p.gauge(&y).unwrap()).abs() < 1e-12);
            assert!((s1.gauge(&y).unwrap() - q.gauge(&y).unwrap()).abs() < 1e-12);
            let expect = 0.3 * q.support(&y).unwrap().value + 0.7 * q1p.support(&y).unwrap().value;
            assert!((ks.support(&y).unwrap().value - expect).abs() < 1e-7);
        }
    }
}

#[test]
fn cross_section_is_slice_of_k() {
    for sys in [desk(4, 16, 8), long_system(2)] {
        let k = build_k_eta_kappa(&HardBodyParams::new(sys.clone(), 0.0, 1.0)).unwrap();
        let mut rng = stream(4, "slice", 0);
        for s in [0.2, 0.5, 0.8] {
            let ks = cross_section(&sys, s).unwrap();
            for _ in 0..20 {
                let y = gaussian_vec(&mut rng, sys.n);
                let g = ks.gauge(&y).unwrap();
                let mut p = vec![s];
                p.extend(y.iter().map(|v| v / g));
                // boundary of the slice is boundary of K at that height
                let lvl = k.level(&p).unwrap();
                let inner: Vec<f64> = p.iter().enumerate().map(|(i, v)| if i == 0 { *v } else { 0.99 * v }).collect();
                let outer: Vec<f64> = p.iter().enumerate().map(|(i, v)| if i == 0 { *v } else { 1.01 * v }).collect();
                assert!(k.level(&inner).unwrap() < 1.0 && k.level(&outer).unwrap() > 1.0, "level {lvl}");
            }
        }
    }
}

#[test]
fn k_gauge_routes_agree() {
    // The pencil route and the cone program must agree on uncut and cut bottoms.
    for sys in [desk(4, 16, 10), long_system(11)] {
        let k = build_k_eta_kappa(&HardBodyParams::new(sys.clone(), 0.15, 1.7)).unwrap();
        let mut rng = stream(12, "routes", 0);
        for _ in 0..30 {
            let y = gaussian_vec(&mut rng, sys.n + 1);
            let g = k.gauge(&y).unwrap();
            let c = conic::two_level_gauge_socp(&k.q, &k.long, k.top, k.bottom, k.rho, 0.0, y[0], &y[1..]).unwrap();
            assert!((g - c).abs() < 1e-6 * (1.0 + g), "{g} vs {c}");
        }
    }
}

#[test]
fn k_chords_end_on_boundary() {
    for sys in [desk(5, 20, 13), long_system(14)] {
        let k = build_k_eta_kappa(&HardBodyParams::new(sys.clone(), 0.1, 1.0)).unwrap();
        let mut rng = stream(15, "k-chord", 0);
        let y = k.interior_point();
        for _ in 0..20 {
            let u = unit_vector(&mut rng, sys.n + 1);
            let (lo, hi) = k.chord(&y, &u).unwrap();
            for s in [lo, hi] {
                let p: Vec<f64> = y.iter().zip(&u).map(|(a, b)| a + s * b).collect();
                assert!((k.level(&p).unwrap() - 1.0).abs() < 1e-7);
            }
        }
    }
}

#[test]
fn ball_fixture() {
    assert!((Ball::unit_volume(2) - std::f64::consts::PI).abs() < 1e-14);
    assert!((Ball::unit_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-14);
    let b = Ball::new(vec![0.5, 0.0], 1.0).unwrap();
    // boundary point (1.5, 0) has gauge 1
    assert!((b.gauge(&[1.5, 0.0]).unwrap() - 1.0).abs() < 1e-15);
    assert!((b.gauge(&[-0.5, 0.0]).unwrap() - 1.0).abs() < 1e-15);
    let (lo, hi) = b.chord(&[0.5, 0.0], &[1.0, 0.0]).unwrap();
    assert!((lo + 1.0).abs() < 1e-15 && (hi - 1.0).abs() < 1e-15);
    let generic = boundary_along(&b, &[0.5, 0.0], &[0.0, 1.0]).unwrap();
    assert!((generic - 1.0).abs() < 1e-10);
}

#[test]
fn wrappers() {
    let disk: Arc<dyn BodyOracle> = Arc::new(Ball::unit(2));
    let t = Translated::new(disk.clone(), vec![0.5, 0.0]);
    assert!((t.gauge(&[1.5, 0.0]).unwrap() - 1.0).abs() < 1e-9);
    assert!((t.support(&[1.0, 0.0]).unwrap().value - 1.5).abs() < 1e-15);
    let s = Scaled::new(disk, 2.0).unwrap();
    assert_eq!(s.gauge(&[1.0, 0.0]).unwrap(), 0.5);
    let (lo, hi) = s.chord(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
    assert!((lo + 2.0).abs() < 1e-14 && (hi - 2.0).abs() < 1e-14);
    let tri = HPolytope::new(
        vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]],
        vec![0.0, 0.0, 1.0],
        vec![0.25, 0.25],
    )
    .unwrap();
    let (lo, hi) = tri.chord(&[0.25, 0.25], &[1.0, 0.0]).unwrap();
    assert!((lo + 0.25).abs() < 1e-15 && (hi - 0.5).abs() < 1e-15);
    let v = VPolytope::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    assert_eq!(v.support(&[1.0, 1.0]).unwrap().value, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn qt_sandwich_and_polar_consistency(seed in 0u64..1000, t in 0.05f64..3.0) {
        let sys = desk(6, 24, seed);
        let qt = build_qt(&sys, t).unwrap();
        let qtp = build_qt_polar(&sys, t).unwrap();
        let big = 1f64.max(sys.max_norm() / t);
        let mut rng = stream(seed, "qt-prop", 0);
        for _ in 0..10 {
            let y = gaussian_vec(&mut rng, 6);
            let r = norm(&y) / qt.gauge(&y).unwrap();
            prop_assert!(r >= 1.0 - 1e-9 && r <= big + 1e-9);
            let z: Vec<f64> = y.iter().map(|v| 0.4 * v).collect();
            let inside = qtp.gauge(&z).unwrap() <= 1.0;
            let hq = qt.support(&z).unwrap().value;
            if (hq - 1.0).abs() > 1e-9 {
                prop_assert_eq!(inside, hq <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn k_slab_and_reflection(seed in 0u64..1000, eta in 0.0f64..0.5, kappa in 0.3f64..3.0) {
        let sys = desk(4, 12, seed);
        let k = build_k_eta_kappa(&HardBodyParams::new(sys, eta, kappa)).unwrap();
        let mut rng = stream(seed, "k-prop", 0);
        for _ in 0..10 {
            let mut y = gaussian_vec(&mut rng, 5);
            y[0] = 1.4 * y[0] * (1.0 + kappa * eta);
            let m = k.membership(&y, 1e-9).unwrap();
            if m != Membership::Outside {
                prop_assert!(y[0] >= -kappa * eta - 1e-9 && y[0] <= 1.0 - eta + 1e-9);
            }
            let mut r = y.clone();
            r[1..].iter_mut().for_each(|v| *v = -*v);
            let a = k.level(&y).unwrap();
            let b = k.level(&r).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
        }
    }

    #[test]
    fn supports_are_sublinear(seed in 0u64..1000) {
        let sys = long_system(seed);
        let bodies: Vec<Box<dyn BodyOracle>> = vec![
            Box::new(build_q(&sys).unwrap()),
            Box::new(build_qt(&sys, 0.7).unwrap()),
            Box::new(build_qt_polar(&sys, 0.7).unwrap()),
            Box::new(cross_section(&sys, 0.4).unwrap()),
        ];
        let mut rng = stream(seed, "sublinear", 0);
        for body in &bodies {
            let a = gaussian_vec(&mut rng, 3);
            let b = gaussian_vec(&mut rng, 3);
            let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let h = |d: &[f64]| body.support(d).unwrap().value;
            prop_assert!(h(&ab) <= h(&a) + h(&b) + 1e-8, "{:?}: {} > {} + {}", body.descriptor(), h(&ab), h(&a), h(&b));
        }
    }
}


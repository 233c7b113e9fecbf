use hardbody::approx::{greedy_polytope, sandwich_ratio, GreedyConfig};
use hardbody::bodies::{BodyOracle, HardBodyParams, LiftedPoint};
use hardbody::design::{generate_design, DesignConfig};
use hardbody::hardness::{covering_certificate, decompose_vertex, hull_for, paper_constants, verify_sandwich, Conclusion};
use hardbody::linalg::dist;

#[test]
fn greedy_polytope_in_k_end_to_end() {
    let sys = generate_design(&DesignConfig::desk(6, 48, 11)).unwrap();
    let params = HardBodyParams::new(sys.clone(), 0.1, 1.0);
    let k = hull_for(&params).unwrap();
    let p = greedy_polytope(&k, &GreedyConfig::new(24, 400), 11).unwrap();

    // every vertex sits on the boundary and decomposes back into K's generators
    for w in &p.vertices {
        let y = w.to_vec();
        assert!((k.level(&y).unwrap() - 1.0).abs() < 1e-6, "{}", k.level(&y).unwrap());
        let d = decompose_vertex(w, &k, 1e-7).unwrap();
        assert!(dist(&d.reconstruct(&k), &y) < 1e-6);
    }

    let r = paper_constants(6, 48, 1.0, 3.0).unwrap().r;
    let rep = verify_sandwich(&p, &params, &k, r, 200, 11, 1e-9).unwrap();
    assert!(rep.inner_ok);
    assert!(rep.r_at_most_one);
    let cert = covering_certificate(&p, &sys, 1.0, rep.inner_ok && rep.outer_necessary_passed).unwrap();
    assert_ne!(cert.conclusion, Conclusion::SandwichViolated);

    // P ⊆ K forces a ratio of at least one in some direction
    let center = LiftedPoint::new(k.interior_point()[0], vec![0.0; 6]);
    let ratio = sandwich_ratio(&p, &k, &center, 500, 11).unwrap();
    assert!(ratio.lambda_lower >= 1.0 - 1e-9, "{ratio:?}");
    assert!(ratio.lambda_lower <= ratio.lambda_estimate);
    assert_eq!(ratio.directions_used, 2 * 48 + 500);
}

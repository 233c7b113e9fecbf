"""Smoke test for the hardbody Python module.

Build first:  pip install --no-build-isolation -e crates/py
Then run:     python python/smoke_test.py
"""

import math
import os
import tempfile

import hardbody


def main():
    sys_ = hardbody.QuasiOrthogonalSystem.generate(16, 128, seed=1)
    assert (sys_.n, sys_.m) == (16, 128)
    assert abs(sys_.unit - 4.0 / sys_.delta) < 1e-12
    report = sys_.verify()
    assert set(report) >= {"passed", "norm_violations", "extremal_values"}
    again = hardbody.QuasiOrthogonalSystem.from_json(sys_.to_json())
    assert again.vectors == sys_.vectors

    sep = hardbody.separation_report(sys_, 0.25)
    assert sep["identities_hold"] and sep["off_diagonal_violations"] == 0

    kappa, scale = hardbody.polar_shift(0.0, -1.0)
    assert (kappa, scale) == (2.0, 0.5)

    k = hardbody.HardBody(sys_, 0.1, 1.0)
    assert k.dim == 17 and abs(k.top - 0.9) < 1e-15
    e0 = [1.0] + [0.0] * 16
    assert abs(k.support(e0) - 0.9) < 1e-12
    assert k.membership(k.interior_point()) == "inside"
    assert k.membership([5.0] + [0.0] * 16) == "outside"
    lo, hi = k.chord(k.interior_point(), e0)
    assert lo < 0 < hi
    assert len(k.test_directions()) == 2 * 128

    p = hardbody.random_vertex_polytope(k, 19, seed=2)
    assert len(p) == 19 and p.dim == 17
    consts = hardbody.paper_constants(16, 128)
    sandwich = hardbody.verify_sandwich(p, k, consts["r"], n_directions=200, seed=2)
    assert sandwich["inner_ok"]
    cert = hardbody.covering_certificate(p, sys_, 1.0, claims_sandwich=False)
    assert cert["threshold"] == 12.0

    g = hardbody.greedy_polytope(k, 24, direction_budget=300, seed=3)
    center = [k.interior_point()[0]] + [0.0] * 16
    ratio = hardbody.sandwich_ratio(g, k, center, n_directions=300, seed=3)
    assert 1.0 - 1e-9 <= ratio["lambda_lower"] <= ratio["lambda_estimate"]

    bary = hardbody.estimate_barycenter(k, chains=2, points_per_chain=200, seed=4)
    assert -0.1 < bary["eta"] < 0.9

    assert abs(hardbody.cone_volume("prime", 0.5, 2.0, 1) - 4.4402) < 1e-12

    square = [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]
    dual = hardbody.dual_count([[x, y, 0.5 * s] for x, y in square for s in (1.0, -1.0)])
    assert dual["counts_match"] and dual["facet_count"] == 6

    w = hardbody.mean_width_ratio(sys_, n_samples=2000, seed=5)
    assert abs(w["mean_width_ball"] - math.sqrt(2) * math.gamma(8.5) / math.gamma(8)) < 1e-9

    try:
        hardbody.HardBody(sys_, 1.5, 1.0)
        raise AssertionError("expected a ValueError")
    except ValueError:
        pass
    try:
        hardbody.random_vertex_polytope(k, 3)
        raise AssertionError("expected a ValueError")
    except ValueError:
        pass

    with tempfile.TemporaryDirectory() as out:
        code = hardbody.run_cli(["dual", "--dims", "3", "--count", "3", "--out", out])
        assert code == 0, code
        assert os.path.exists(os.path.join(out, "dual.json"))

    print("python smoke test passed")


if __name__ == "__main__":
    main()

import json

import numpy as np
import pytest

from jumpbsde import (
    GeneratorSpec,
    LevyModel,
    TimeGrid,
    build_tree,
    constant_coeff,
    l2_distance,
    linear_driver,
    shift_generator,
    solve_backward,
    stability_bound,
)
from jumpbsde.experiments import (
    default_comparison_pairs,
    default_counterexample_config,
    default_truncation_config,
    run_apriori_check,
    run_comparison,
    run_convergence,
    run_counterexample,
    run_truncation_study,
    search_counterexample,
    stability_inputs,
)
from jumpbsde.terminals import make_terminal


def small_comparison_config(pairs):
    return {"fixed_point_tol": 1e-12, "refine": True, "pairs": pairs}


def test_equal_pair_gives_identical_solutions():
    pair = {
        "name": "equal",
        "model": {"drift": 0.0, "sigma": 1.0, "marks": [{"x": 0.5, "lambda": 0.6}]},
        "steps": 3,
        "generator": {"name": "linear_driver", "a": 0.2, "b": 0.1, "c": -0.5},
        "generator_prime": {"name": "linear_driver", "a": 0.2, "b": 0.1, "c": -0.5},
        "terminal": "tanh_x",
        "terminal_prime": "tanh_x",
    }
    report = run_comparison(small_comparison_config([pair]))
    case = report.cases[0]
    assert case.status == "pass"
    assert case.data["max_violation"] == 0.0  # same fixed points bit for bit


def test_boundary_shift_pair_gap_is_horizon():
    # driver gap of one with y-free drivers: the value gap integrates to T
    pair = [p for p in default_comparison_pairs() if p["name"] == "jump_boundary_shift"][0]
    report = run_comparison(small_comparison_config([pair]))
    case = report.cases[0]
    assert case.status == "pass"
    assert case.data["y0_prime"] - case.data["y0"] == pytest.approx(1.0, abs=1e-10)


def test_unordered_drivers_mark_preconditions_unmet():
    pair = {
        "name": "unordered",
        "model": {"drift": 0.0, "sigma": 1.0, "marks": []},
        "steps": 2,
        "generator": {"name": "linear_y", "k": 1.0},
        "generator_prime": "zero",
        "terminal": "x",
        "terminal_prime": "x",
    }
    report = run_comparison(small_comparison_config([pair]))
    case = report.cases[0]
    assert case.status == "preconditions-unmet"
    assert not case.verdicts  # no ordering verdict was asserted
    assert not report.passed


def test_unordered_terminals_mark_preconditions_unmet():
    pair = {
        "name": "bad_terminals",
        "model": {"drift": 0.0, "sigma": 1.0, "marks": []},
        "steps": 2,
        "generator": "zero",
        "generator_prime": "zero",
        "terminal": {"name": "x", "shift": 1.0},
        "terminal_prime": "x",
    }
    report = run_comparison(small_comparison_config([pair]))
    assert report.cases[0].status == "preconditions-unmet"


def test_default_comparison_suite_has_enough_pairs():
    assert len(default_comparison_pairs()) >= 10


def test_counterexample_default_instance():
    report = run_counterexample()
    main, boundary = report.cases
    assert main.status == "pass"
    assert main.data["max_margin"] > 100 * 1e-12
    assert main.witnesses, "a violating node must be reported"
    assert boundary.status == "pass"
    assert boundary.data["max_margin"] <= 1e-11


def test_counterexample_equal_terminals_find_nothing():
    cfg = default_counterexample_config()
    cfg["terminal_prime"] = cfg["terminal"]
    report = run_counterexample(cfg)
    main = report.cases[0]
    assert main.data["max_margin"] == 0.0
    assert main.status == "fail"  # no violation found is recorded, not asserted away
    assert not report.passed


def test_counterexample_search_contains_shipped_instance():
    rows = search_counterexample()
    shipped = [r for r in rows if r["lambda"] == 1.0 and r["steps"] == 4]
    assert shipped and shipped[0]["margin"] > 1.0
    assert all(rows[i]["margin"] >= rows[i + 1]["margin"] for i in range(len(rows) - 1))


def test_truncation_study_default_and_small_mark_free_data():
    report = run_truncation_study()
    assert report.passed
    rows = report.cases[0].data["levels"]
    assert rows[-1]["dY"] == 0.0 and rows[-1]["dU"] == 0.0
    assert rows[0]["dY"] >= rows[1]["dY"] >= rows[2]["dY"]

    cfg = default_truncation_config()
    cfg["terminal"] = {"name": "jump_indicator", "mark": 1}  # kept mark only
    cfg["generator"] = "zero"
    cfg["levels"] = [3, 4, 100]
    report2 = run_truncation_study(cfg)
    assert report2.passed
    assert all(r["dY"] == 0.0 and r["dZ"] == 0.0 for r in report2.cases[0].data["levels"])


def test_truncation_study_preconditions():
    cfg = default_truncation_config()
    cfg["levels"] = [1, 2]  # the finest level still removes the 0.05 mark
    report = run_truncation_study(cfg)
    assert report.cases[0].status == "preconditions-unmet"


def test_apriori_default_sweep():
    report = run_apriori_check()
    assert report.passed
    for case in report.cases:
        sup_v = [v for v in case.verdicts if v.name == "sup_Y_dominated"][0]
        assert sup_v.lhs <= sup_v.rhs


def test_apriori_flags_wrong_declared_coefficients():
    bad = GeneratorSpec(
        name="underdeclared",
        eval=lambda ctx, t, y, z, u: 3.0 * np.asarray(y, dtype=float),
        K1=constant_coeff(1.0),
        alpha=lambda t: 3.0,
    )
    cfg = {
        "model": {"drift": 0.0, "sigma": 1.0, "marks": []},
        "grid": {"T": 1.0, "steps": 3},
        "instances": [{"generator": bad, "terminal": "x"}],
    }
    report = run_apriori_check(cfg)
    assert report.cases[0].status == "preconditions-unmet"


def test_convergence_default_order_and_mc_agreement():
    report = run_convergence()
    ref, mc = report.cases
    assert ref.status == "pass"
    assert abs(ref.data["fitted_order"] - 1.0) <= 0.3
    assert mc.status == "pass"
    assert abs(mc.data["y0_mc"] - mc.data["y0_tree"]) <= 3 * mc.data["se"]


def test_convergence_zero_driver_gaps_vanish():
    cfg = {
        "model": {"drift": 0.3, "sigma": 1.0, "marks": []},
        "T": 1.0,
        "steps_list": [4, 8, 16],
        "generator": "zero",
        "terminal": "x",
        "reference": None,
        "mc": None,
    }
    report = run_convergence(cfg)
    assert all(g <= 1e-13 for g in report.cases[0].data["gaps"])


def test_reports_are_reproducible_modulo_meta():
    r1 = run_counterexample()
    r2 = run_counterexample()
    assert r1.to_json(include_meta=False) == r2.to_json(include_meta=False)
    d1, d2 = r1.to_dict(), r2.to_dict()
    assert "timestamp" in d1["meta"] and "runtime_seconds" in d1["meta"]
    d1.pop("meta"), d2.pop("meta")
    assert json.dumps(d1, sort_keys=True) == json.dumps(d2, sort_keys=True)


def test_report_verdicts_carry_measured_sides():
    report = run_truncation_study()
    payload = json.loads(report.to_json())
    for case in payload["cases"]:
        for verdict in case["verdicts"]:
            assert "lhs" in verdict and "rhs" in verdict


def test_stability_bound_dominates_measured_gaps():
    model = LevyModel(0.1, 1.0, ((0.5, 0.5), (-0.3, 0.4)))
    tree = build_tree(model, TimeGrid(1.0, 4))
    g = linear_driver(0.3, 0.2, -0.5)
    g_prime = shift_generator(linear_driver(0.3, 0.2, -0.5), 0.4)
    xi = make_terminal({"name": "tanh_x", "scale": 0.5})
    xi_prime = make_terminal({"name": "tanh_x", "shift": 0.3})
    sol = solve_backward(tree, g, xi)
    sol_prime = solve_backward(tree, g_prime, xi_prime)
    inputs = stability_inputs(tree, sol, sol_prime, g, g_prime)
    bound = stability_bound(inputs["a"], inputs["b"], inputs["delta"], g_prime.rho)
    d = l2_distance(sol, sol_prime)
    sup_gap = max(
        tree.expectation((ya - yb) ** 2, lvl) for lvl, (ya, yb) in enumerate(zip(sol.Y, sol_prime.Y))
    )
    assert sup_gap + d.dZ + d.dU <= bound
    assert d.total() <= bound  # horizon is 1 here, so the integral version holds too

import numpy as np
import pytest

from jumpbsde import (
    LevyModel,
    RegressionBasis,
    TimeGrid,
    bootstrap_y0,
    build_tree,
    l2_distance,
    linear_driver,
    linear_y,
    solve_backward,
    solve_mc,
    zero_generator,
)
from jumpbsde.mc import RegressionError
from jumpbsde.terminals import make_terminal

XI_X = make_terminal("x")


def test_zero_driver_brownian_terminal_mean():
    model = LevyModel(0.0, 1.0)
    grid = TimeGrid(1.0, 6)
    est = bootstrap_y0(model, grid, zero_generator(), make_terminal("w"), paths=4000, seed=5)
    assert abs(est.y0 - 0.0) <= 3 * est.se


def test_exponential_growth_within_two_percent():
    # deterministic data, so the path count is irrelevant: the explicit
    # recursion gives (1 + k dt)^N, within 2% of e^k at N = 100
    k, n = 1.0, 100
    model = LevyModel(0.0, 0.0)
    sol = solve_mc(model, TimeGrid(1.0, n), linear_y(k), make_terminal({"name": "const", "value": 1.0}),
                   paths=500, seed=1)
    assert sol.y0 == pytest.approx((1.0 + k / n) ** n, rel=1e-10)
    assert abs(sol.y0 - np.e) / np.e < 0.02


def test_oracle_equivalence_small_instance():
    model = LevyModel(0.0, 1.0, ((0.5, 0.2),))
    grid = TimeGrid(1.0, 8)
    g = linear_driver(0.15, 0.2, -0.5)
    tree_y0 = solve_backward(build_tree(model, grid), g, XI_X).y0
    est = bootstrap_y0(model, grid, g, XI_X, paths=20000, seed=2024)
    assert abs(est.y0 - tree_y0) <= 3 * est.se


def test_bootstrap_se_shrinks_like_inverse_sqrt_paths():
    model = LevyModel(0.05, 1.0)
    grid = TimeGrid(1.0, 6)
    counts = [2500, 10000, 40000]
    ses = [bootstrap_y0(model, grid, zero_generator(), XI_X, paths=m, seed=77, n_boot=40).se for m in counts]
    slope = np.polyfit(np.log(counts), np.log(ses), 1)[0]
    assert abs(slope + 0.5) <= 0.1


def test_seed_determinism():
    model = LevyModel(0.0, 1.0, ((0.4, 0.3),))
    grid = TimeGrid(1.0, 5)
    g = linear_driver(0.2, 0.2, -0.4)
    a = solve_mc(model, grid, g, XI_X, paths=3000, seed=9)
    b = solve_mc(model, grid, g, XI_X, paths=3000, seed=9)
    assert np.array_equal(a.Y, b.Y) and np.array_equal(a.Z, b.Z) and np.array_equal(a.U, b.U)


def test_degree_reduction_on_degenerate_state():
    # drift-only model: the state is deterministic, only the constant survives
    sol = solve_mc(LevyModel(1.0, 0.0), TimeGrid(1.0, 4), zero_generator(), XI_X, paths=200, seed=0)
    assert all(d == 0 for d in sol.degrees_used)
    assert sol.y0 == pytest.approx(1.0, abs=1e-12)


def test_path_count_validation():
    with pytest.raises(RegressionError):
        solve_mc(LevyModel(0.0, 1.0), TimeGrid(1.0, 2), zero_generator(), XI_X,
                 paths=20, basis=RegressionBasis(degree=3), seed=0)


def test_mc_rejects_fast_marks():
    model = LevyModel(0.0, 0.0, ((1.0, 3.0),))
    with pytest.raises(RegressionError):
        solve_mc(model, TimeGrid(1.0, 2), zero_generator(), XI_X, paths=500, seed=0)


def test_l2_distance_mc_solutions():
    from dataclasses import replace

    model = LevyModel(0.0, 1.0)
    grid = TimeGrid(1.0, 5)
    a = solve_mc(model, grid, zero_generator(), XI_X, paths=400, seed=3)
    same = solve_mc(model, grid, zero_generator(), XI_X, paths=400, seed=3)
    d0 = l2_distance(a, same)
    assert (d0.dY, d0.dZ, d0.dU) == (0.0, 0.0, 0.0)
    offset = replace(a, Y=a.Y + 2.0)
    d = l2_distance(a, offset)
    assert d.dY == pytest.approx(4.0 * grid.horizon)
    assert d.dZ == 0.0 and d.dU == 0.0


def test_l2_distance_rejects_mixed_kinds():
    model = LevyModel(0.0, 1.0)
    grid = TimeGrid(1.0, 3)
    mc = solve_mc(model, grid, zero_generator(), XI_X, paths=200, seed=0)
    tree_sol = solve_backward(build_tree(model, grid), zero_generator(), XI_X)
    with pytest.raises(Exception):
        l2_distance(mc, tree_sol)

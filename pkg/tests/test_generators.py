import numpy as np
import pytest

from jumpbsde import (
    GeneratorSpec,
    LevyModel,
    SamplerConfig,
    StepContext,
    jump_ordering_violator,
    builtin_generators,
    check_jump_ordering,
    check_growth,
    check_monotonicity,
    check_ordering,
    clamp,
    constant_coeff,
    tanh_jump_integral,
    levy_norm,
    linear_driver,
    linear_y,
    project_ball,
    rho_report,
    shift_generator,
    truncate_generator,
    zero_generator,
)
from jumpbsde.bounds import rho_catalog

MODEL = LevyModel(0.1, 1.0, ((0.5, 0.8), (-0.3, 0.4)))
FAST = SamplerConfig(count=60, seed=3)


def ctx_for(model, m=1, x=0.0):
    return StepContext(model=model, x=np.full(m, float(x)))


def test_clamp_examples():
    assert clamp(5.0, 2) == 2.0
    assert clamp(-3.0, 2) == -2.0
    assert clamp(1.5, 2) == 1.5
    assert np.array_equal(clamp(np.array([-9.0, 0.3, 9.0]), 1), np.array([-1.0, 0.3, 1.0]))


def test_project_ball_examples():
    one_mark = LevyModel(0.0, 0.0, ((1.0, 1.0),))
    out = project_ball(np.array([3.0]), 2, one_mark)
    assert out[0] == pytest.approx(2.0)
    assert levy_norm(out, one_mark) == pytest.approx(2.0)
    # norm 4 with n = 2: every entry halves
    two = LevyModel(0.0, 0.0, ((1.0, 4.0), (2.0, 4.0)))
    u = np.array([np.sqrt(2.0), np.sqrt(2.0)])
    assert levy_norm(u, two) == pytest.approx(4.0)
    assert np.allclose(project_ball(u, 2, two), u / 2.0)
    # inside the ball: unchanged
    small = np.array([0.1, 0.1])
    assert np.array_equal(project_ball(small, 2, two), small)


def test_project_ball_idempotent_and_contractive():
    rng = np.random.default_rng(0)
    for _ in range(50):
        u = rng.standard_normal(2) * rng.uniform(0.1, 20.0)
        n = int(rng.integers(1, 6))
        p = project_ball(u, n, MODEL)
        assert levy_norm(p, MODEL) <= min(levy_norm(u, MODEL), n) + 1e-12
        assert np.allclose(project_ball(p, n, MODEL), p, atol=1e-15)


def test_truncate_generator_caps_strong_y_growth():
    # f = 10y with declared slope 10, level 3: at y=1 the cap is (10^3)=3
    g = GeneratorSpec(
        name="ten_y",
        eval=lambda ctx, t, y, z, u: 10.0 * np.asarray(y, dtype=float),
        K1=constant_coeff(10.0),
    )
    g3 = truncate_generator(g, 3)
    ctx = ctx_for(MODEL)
    val = g3.eval(ctx, 0.5, np.array([1.0]), np.array([0.0]), np.zeros((1, 2)))
    assert val[0] == pytest.approx(3.0)
    # negative side keeps the sign
    val_neg = g3.eval(ctx, 0.5, np.array([-1.0]), np.array([0.0]), np.zeros((1, 2)))
    assert val_neg[0] == pytest.approx(-3.0)


def test_truncate_generator_z_cutoff():
    # f = z with coefficient 1, level 2 at z=5: the cutoff gives 2 on both routes
    g = GeneratorSpec(
        name="z_id",
        eval=lambda ctx, t, y, z, u: np.asarray(z, dtype=float) + 0.0,
        K2=constant_coeff(1.0),
    )
    g2 = truncate_generator(g, 2)
    val = g2.eval(ctx_for(MODEL), 0.5, np.array([0.0]), np.array([5.0]), np.zeros((1, 2)))
    assert val[0] == pytest.approx(2.0)


def sample_points(model, m, seed):
    rng = np.random.default_rng(seed)
    ctx = StepContext(model=model, x=rng.uniform(-2, 2, m))
    t = rng.uniform(1e-3, 1.0)
    y = rng.uniform(-6, 6, m)
    z = rng.uniform(-6, 6, m)
    u = rng.standard_normal((m, model.n_marks)) * 3.0
    return ctx, t, y, z, u


@pytest.mark.parametrize("name", ["zero", "linear_y", "linear_driver", "tanh_jump_integral", "jump_ordering_violator"])
def test_truncated_generator_respects_cap_and_matches_inside_cutoffs(name):
    g = builtin_generators()[name]
    n = 2
    gn = truncate_generator(g, n)
    ctx, t, y, z, u = sample_points(MODEL, 400, seed=sum(name.encode()))
    cz = clamp(z, n)
    cu = project_ball(u, n, MODEL)
    cap = (
        np.minimum(g.F(ctx, t), n)
        + np.minimum(g.K1(ctx, t), n) * np.abs(y)
        + np.minimum(g.K2(ctx, t), n) * (np.abs(cz) + levy_norm(cu, MODEL))
    )
    val = np.asarray(gn.eval(ctx, t, y, z, u))
    assert np.all(np.abs(val) <= cap + 1e-12)
    # well inside every cutoff the truncation is invisible
    big_n = 1000
    g_big = truncate_generator(g, big_n)
    small_u = u / 10.0
    inside = np.asarray(g_big.eval(ctx, t, y, z / 10.0, small_u))
    raw = np.asarray(g.eval(ctx, t, y, z / 10.0, small_u))
    assert np.allclose(inside, raw, atol=1e-14)


def test_truncated_coefficients_are_capped():
    g = GeneratorSpec(name="big", eval=lambda ctx, t, y, z, u: 0.0 * y, F=constant_coeff(7.0), K1=constant_coeff(9.0))
    g4 = truncate_generator(g, 4)
    ctx = ctx_for(MODEL, 3)
    assert np.all(g4.F(ctx, 0.1) == 4.0)
    assert np.all(g4.K1(ctx, 0.1) == 4.0)
    assert g4.rho is g.rho and g4.alpha is g.alpha


def test_check_growth_pass_and_fail():
    assert check_growth(zero_generator(), MODEL, FAST).passed
    bad = GeneratorSpec(
        name="two_y_underdeclared",
        eval=lambda ctx, t, y, z, u: 2.0 * np.asarray(y, dtype=float),
        K1=constant_coeff(1.0),
    )
    report = check_growth(bad, MODEL, FAST)
    assert not report.passed
    assert report.violations  # carries a witness point
    w = report.violations[0]
    assert w.lhs > w.rhs


def test_check_growth_tanh_jump_integral():
    report = check_growth(tanh_jump_integral(), MODEL, FAST)
    assert report.passed, report.violations


def test_check_monotonicity_cases():
    cubic = GeneratorSpec(name="minus_y_cubed", eval=lambda ctx, t, y, z, u: -np.asarray(y, dtype=float) ** 3)
    assert check_monotonicity(cubic, MODEL, FAST).passed
    drift_up = GeneratorSpec(name="y_no_alpha", eval=lambda ctx, t, y, z, u: np.asarray(y, dtype=float) + 0.0)
    assert not check_monotonicity(drift_up, MODEL, FAST).passed
    z_lin = GeneratorSpec(
        name="z_lin", eval=lambda ctx, t, y, z, u: np.asarray(z, dtype=float) + 0.0, beta=constant_coeff(1.0)
    )
    assert check_monotonicity(z_lin, MODEL, FAST).passed


def test_check_jump_ordering_cases():
    boundary = linear_driver(0.0, 0.0, -1.0)
    assert check_jump_ordering(boundary, MODEL, FAST).passed
    violator = jump_ordering_violator()
    report = check_jump_ordering(violator, MODEL, FAST)
    assert not report.passed and report.violations
    independent = linear_y(0.7)
    assert check_jump_ordering(independent, MODEL, FAST).passed


def test_linear_driver_gamma_threshold():
    assert check_jump_ordering(linear_driver(0.0, 0.0, (-1.0, 0.5)), MODEL, FAST).passed
    below = linear_driver(0.0, 0.0, (-1.2, 0.5))
    assert not below.satisfies_jump_ordering
    assert not check_jump_ordering(below, MODEL, FAST).passed


def test_catalog_contents_and_zero_eval():
    catalog = builtin_generators()
    assert {"zero", "linear_y", "linear_driver", "tanh_jump_integral", "jump_ordering_violator"} <= set(catalog)
    ctx, t, y, z, u = sample_points(MODEL, 16, seed=4)
    assert np.all(catalog["zero"].eval(ctx, t, y, z, u) == 0.0)
    two = catalog["linear_y"].eval(ctx, t, np.full(16, 2.0), z, u)
    assert np.allclose(two, 2.0)


def test_tanh_jump_integral_zero_time_convention():
    g = tanh_jump_integral()
    ctx = ctx_for(MODEL, 4)
    u = np.ones((4, 2))
    assert np.all(g.eval(ctx, 0.0, np.zeros(4), np.zeros(4), u) == 0.0)
    assert np.all(np.asarray(g.K2(ctx, 0.0)) == 0.0)
    assert np.all(np.isfinite(g.eval(ctx, 1e-8, np.zeros(4), np.zeros(4), u)))


def test_shift_generator_orders_and_grows():
    g = linear_driver(0.2, 0.1, -0.5)
    gp = shift_generator(g, 1.0)
    assert check_ordering(g, gp, MODEL, FAST).passed
    assert not check_ordering(gp, g, MODEL, FAST).passed
    ctx, t, y, z, u = sample_points(MODEL, 8, seed=9)
    assert np.allclose(gp.eval(ctx, t, y, z, u), np.asarray(g.eval(ctx, t, y, z, u)) + 1.0)
    assert np.allclose(np.asarray(gp.F(ctx, t)), np.asarray(g.F(ctx, t)) + 1.0)


def test_pointwise_convergence_of_truncation_levels():
    # once every cutoff clears the point, the truncated evaluation equals f
    g = linear_driver(0.5, 0.5, 0.5)
    ctx, t, y, z, u = sample_points(MODEL, 32, seed=21)
    raw = np.asarray(g.eval(ctx, t, y, z, u))
    for n in (1, 2, 8, 64):
        gn = truncate_generator(g, n)
        val = np.asarray(gn.eval(ctx, t, y, z, u))
        level = max(
            np.abs(z).max(), levy_norm(u, MODEL).max(), float(np.max(g.K1(ctx, t))), float(np.max(g.K2(ctx, t)))
        )
        if n >= level:
            assert np.allclose(val, raw, atol=1e-13)


def test_rho_reports():
    for name, rho in rho_catalog().items():
        report = rho_report(rho, name)
        assert report.passed, (name, [v.to_dict() for v in report.violations])
        assert "below the grid" in report.note
    convex = rho_report(lambda x: np.asarray(x, dtype=float) ** 2, "square")
    assert not convex.passed  # convex: the midpoint check must flag it

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from jumpbsde import (
    PiecewiseConstantRate,
    apriori_bound,
    bihari_bound,
    bihari_transform,
    stability_bound,
    weighted_y_bound,
)
from jumpbsde.bounds import BoundInputError, rho_catalog
from jumpbsde.generators import RhoFunction


def backward_ode_value(c, rate, rho, t, T):
    """Independent oracle: integrate y' = -K(t) rho(y) backward from y(T) = c."""

    def rhs(s, y):
        return -rate(s) * float(rho(max(y[0], 0.0)))

    out = solve_ivp(rhs, (T, t), [c], rtol=1e-10, atol=1e-13, dense_output=False, max_step=(T - t) / 50)
    return float(out.y[0, -1])


def test_identity_rho_reproduces_exponential_bound():
    rng = np.random.default_rng(12)
    for _ in range(100):
        c = float(rng.uniform(0.05, 5.0))
        k0 = float(rng.uniform(0.0, 3.0))
        t = float(rng.uniform(0.0, 0.9))
        T = t + float(rng.uniform(0.05, 2.0))
        res = bihari_bound(c, PiecewiseConstantRate([t, T], [k0]), "identity", t, T)
        exact = c * math.exp(k0 * (T - t))
        assert res.status == "ok"
        assert abs(res.bound - exact) / exact <= 1e-8


def test_zero_rate_returns_c():
    res = bihari_bound(2.5, PiecewiseConstantRate([0.0, 1.0], [0.0]), "identity", 0.0, 1.0)
    assert res.bound == pytest.approx(2.5, rel=1e-12)
    assert res.integral_K == 0.0


def test_sqrt_rho_analytic_inversion():
    # G(x) = 2(sqrt(x) - 1): target 2 from c=1 gives bound (1 + 1)^2 = 4
    res = bihari_bound(1.0, PiecewiseConstantRate([0.0, 1.0], [2.0]), "sqrt", 0.0, 1.0)
    assert res.bound == pytest.approx(4.0, rel=1e-9)
    assert res.G_of_c == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("rho_name", ["identity", "sqrt", "xlogx"])
def test_bound_matches_backward_ode_oracle(rho_name):
    rho = rho_catalog()[rho_name]
    for c, k0, t, T in [(1.0, 2.0, 0.0, 1.0), (0.3, 1.5, 0.2, 1.4), (2.0, 0.7, 0.0, 2.0)]:
        res = bihari_bound(c, PiecewiseConstantRate([t, T], [k0]), rho, t, T)
        oracle = backward_ode_value(c, lambda s: k0, rho, t, T)
        assert res.status == "ok"
        assert abs(res.bound - oracle) / oracle <= 1e-6


def test_transform_satisfies_defining_identity():
    res = bihari_bound(0.8, PiecewiseConstantRate([0.0, 1.0], [1.3]), "xlogx", 0.0, 1.0)
    rho = rho_catalog()["xlogx"]
    assert bihari_transform(res.bound, rho) == pytest.approx(res.G_of_c + res.integral_K, abs=1e-8)


def test_out_of_domain_for_bounded_transform():
    # rho(r) = r^2 makes G bounded above by 1 from c = 1
    square = RhoFunction(lambda x: np.asarray(x, dtype=float) ** 2, "square")
    res = bihari_bound(1.0, PiecewiseConstantRate([0.0, 1.0], [2.0]), square, 0.0, 1.0)
    assert res.status == "out-of-domain"
    assert res.bound is None
    assert res.integral_K == pytest.approx(2.0)


def test_bihari_input_validation():
    with pytest.raises(BoundInputError):
        bihari_bound(0.0, PiecewiseConstantRate([0, 1], [1.0]), "identity", 0.0, 1.0)
    with pytest.raises(BoundInputError):
        bihari_bound(1.0, lambda s: -1.0, "identity", 0.0, 1.0)
    with pytest.raises(BoundInputError):
        PiecewiseConstantRate([0.0, 1.0], [-0.5])


def test_piecewise_rate_exact_integral():
    rate = PiecewiseConstantRate([0.0, 0.5, 1.0], [2.0, 1.0])
    assert rate.integral(0.0, 1.0) == pytest.approx(1.5)
    assert rate.integral(0.25, 0.75) == pytest.approx(0.5 + 0.25)
    assert rate(0.25) == 2.0 and rate(0.75) == 1.0


def test_apriori_explicit_constants_at_zero_budget():
    res = apriori_bound(0.0, 1.0, 0.0)
    assert res.c1 == pytest.approx(5.0)
    assert res.sup_Y_bound == pytest.approx(250.0)  # 2 c1 + 48 c1
    assert res.ZU_bound == pytest.approx(1.0 / 12.0 + 4.0)
    res_if = apriori_bound(0.0, 0.0, 1.0)
    assert res_if.sup_Y_bound == pytest.approx(2 * 5.0 + 240.0**2)  # 57610
    assert res_if.ZU_bound == pytest.approx(1.0 / 12.0 + 192.0 * 5.0)


def test_apriori_zero_data_and_monotonicity():
    res = apriori_bound(0.7, 0.0, 0.0)
    assert res.sup_Y_bound == 0.0 and res.ZU_bound == 0.0
    grid = [0.0, 0.3, 1.0]
    for name in ("sup_Y_bound", "ZU_bound"):
        vals_ck = [getattr(apriori_bound(ck, 1.0, 1.0), name) for ck in grid]
        vals_xi = [getattr(apriori_bound(0.5, x, 1.0), name) for x in grid]
        vals_if = [getattr(apriori_bound(0.5, 1.0, x), name) for x in grid]
        for seq in (vals_ck, vals_xi, vals_if):
            assert seq == sorted(seq)


def test_apriori_min_c1_dominates_factors():
    res = apriori_bound(0.8, 1.0, 1.0)
    envelope = math.exp(res.min_C1 * (1.0 + 0.8) ** 2)
    total = apriori_bound(0.8, 1.0, 0.0).sup_Y_bound  # largest single factor is >= this
    assert envelope >= total * (1 - 1e-12)


def test_apriori_rejects_negative_inputs():
    with pytest.raises(BoundInputError):
        apriori_bound(-0.1, 1.0, 1.0)
    with pytest.raises(BoundInputError):
        apriori_bound(0.1, -1.0, 1.0)


def test_stability_identity_rho_closed_form():
    for a, b, delta in [(0.5, 0.49, 1e-3), (1.2, 0.1, 0.05), (0.0, 0.0, 1.0)]:
        e4b = math.exp(4.0 * b)
        h = e4b * delta * math.exp(2.0 * e4b * a)
        expected = 2.0 * e4b * delta + (2.0 * e4b * a + 1.0) * 2.0 * h
        got = stability_bound(a, b, delta, "identity")
        assert abs(got - expected) / expected <= 1e-8


def test_stability_zero_gap_and_monotonicity():
    assert stability_bound(0.5, 0.3, 0.0, "identity") == 0.0
    vals = [stability_bound(0.5, 0.3, d, "xlogx") for d in (1e-4, 1e-3, 1e-2, 1e-1)]
    assert vals == sorted(vals)
    with pytest.raises(BoundInputError):
        stability_bound(-0.1, 0.0, 1.0, "identity")


def test_weighted_bound_examples():
    assert weighted_y_bound(0.0, 0.0, 0.0, 1.0) == 0.0
    assert weighted_y_bound(1.0, 1.0, 1.0, 0.0) == pytest.approx(3.0)
    base = weighted_y_bound(1.0, 1.0, 1.0, 0.0)
    doubled = weighted_y_bound(1.0, 1.0, 2.0, 0.0)
    assert doubled - base == pytest.approx(2.0)  # only the second summand moves, linearly
    with pytest.raises(BoundInputError):
        weighted_y_bound(-1.0, 0.0, 0.0, 0.0)

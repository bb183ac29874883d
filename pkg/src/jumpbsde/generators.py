"""Drivers f(context, t, y, z, u) with declared growth/monotonicity coefficients.

A driver evaluates vectorized: y, z are arrays with one entry per node or
path, u has one extra trailing axis with one entry per jump mark, and the
context supplies the model plus the state path information at time t.
Condition checks are sampling based and report witnesses instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .levy import LevyModel, levy_norm

# Numerical slack for all inequality checks (floating-point associativity).
CHECK_SLACK = 1e-12


@dataclass(frozen=True)
class StepContext:
    """State information visible to a driver at one time point.

    x holds the state value per node/path; w and counts (Brownian value and
    per-mark jump counts) are populated by the solvers and may be None in
    sampling contexts.
    """

    model: LevyModel
    x: np.ndarray
    w: np.ndarray | None = None
    counts: np.ndarray | None = None

    @property
    def size(self) -> int:
        return int(np.asarray(self.x).shape[0]) if np.ndim(self.x) else 1


@dataclass(frozen=True)
class RhoFunction:
    """Modulus for the monotonicity condition: nondecreasing, concave, zero at zero."""

    value: Callable
    description: str = ""

    def __call__(self, x):
        return self.value(x)


def _zero_coeff(ctx, t):
    return np.zeros_like(np.asarray(ctx.x, dtype=float))


def constant_coeff(c: float) -> Callable:
    def coeff(ctx, t):
        return np.full_like(np.asarray(ctx.x, dtype=float), float(c))

    return coeff


def rho_identity() -> RhoFunction:
    return RhoFunction(lambda x: np.asarray(x, dtype=float) + 0.0, "identity modulus")


@dataclass(frozen=True)
class GeneratorSpec:
    """A driver together with its declared condition coefficients and flags.

    eval(ctx, t, y, z, u) must be pure and vectorized over nodes/paths.
    F, K1, K2 bound the growth |f| <= F + K1|y| + K2(|z| + ||u||); alpha,
    beta, rho enter the one-sided monotonicity condition. The flags record
    what the author of the driver claims; checks verify them by sampling.
    """

    name: str
    eval: Callable
    F: Callable = _zero_coeff
    K1: Callable = _zero_coeff
    K2: Callable = _zero_coeff
    beta: Callable = _zero_coeff
    alpha: Callable = lambda t: 0.0
    rho: RhoFunction = field(default_factory=rho_identity)
    satisfies_growth: bool = True
    satisfies_monotonicity: bool = True
    satisfies_rate: bool = True
    satisfies_jump_ordering: bool = True

    def growth_bound(self, ctx, t, y, z, u):
        """Declared bound F + K1|y| + K2(|z| + ||u||) at a point."""
        return (
            self.F(ctx, t)
            + self.K1(ctx, t) * np.abs(y)
            + self.K2(ctx, t) * (np.abs(z) + levy_norm(u, ctx.model))
        )


def clamp(z, n: int):
    """Coordinate cutoff to [-n, n]; identity inside."""
    return np.minimum(np.maximum(-float(n), z), float(n))


def project_ball(u, n: int, model: LevyModel):
    """Radial projection of u onto the ball of jump-norm radius n."""
    u = np.asarray(u, dtype=float)
    norm = levy_norm(u, model)
    scale = np.where(norm > n, np.divide(float(n), norm, out=np.ones_like(norm), where=norm > 0), 1.0)
    return u * scale[..., None] if u.ndim else u * scale


def truncate_generator(g: GeneratorSpec, n: int) -> GeneratorSpec:
    """Level-n truncation: cut off z and u, then cap |f| at the capped growth bound.

    The returned driver keeps the sign of the cut-off evaluation, carries the
    same rho, alpha, beta, and the coefficients F, K1, K2 capped at n.
    """
    if n < 1:
        raise ValueError("truncation level must be at least 1")
    nf = float(n)

    def f_cap(ctx, t):
        return np.minimum(g.F(ctx, t), nf)

    def k1_cap(ctx, t):
        return np.minimum(g.K1(ctx, t), nf)

    def k2_cap(ctx, t):
        return np.minimum(g.K2(ctx, t), nf)

    def eval_n(ctx, t, y, z, u):
        cz = clamp(z, n)
        cu = project_ball(u, n, ctx.model)
        fhat = g.eval(ctx, t, y, cz, cu)
        cap = f_cap(ctx, t) + k1_cap(ctx, t) * np.abs(y) + k2_cap(ctx, t) * (
            np.abs(cz) + levy_norm(cu, ctx.model)
        )
        return np.where(np.abs(fhat) > cap, np.sign(fhat) * cap, fhat)

    return replace(
        g,
        name=f"{g.name}^({n})",
        eval=eval_n,
        F=f_cap,
        K1=k1_cap,
        K2=k2_cap,
    )


def shift_generator(g: GeneratorSpec, delta: float) -> GeneratorSpec:
    """Driver g + delta; the growth level F absorbs |delta|, everything else is unchanged."""
    d = float(delta)

    def eval_shifted(ctx, t, y, z, u):
        return g.eval(ctx, t, y, z, u) + d

    def f_shifted(ctx, t):
        return g.F(ctx, t) + abs(d)

    return replace(g, name=f"{g.name}{d:+g}", eval=eval_shifted, F=f_shifted)


# ---------------------------------------------------------------------------
# Sampling-based condition checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SamplerConfig:
    """Box sizes and counts for the condition samplers."""

    count: int = 300
    y_bound: float = 4.0
    z_bound: float = 4.0
    u_scale: float = 2.0
    x_bound: float = 3.0
    horizon: float = 1.0
    seed: int = 7


@dataclass
class Violation:
    point: dict
    lhs: float
    rhs: float

    def to_dict(self) -> dict:
        return {"point": self.point, "lhs": self.lhs, "rhs": self.rhs}


@dataclass
class CheckReport:
    check: str
    generator: str
    passed: bool
    n_points: int
    violations: list[Violation]
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "generator": self.generator,
            "passed": self.passed,
            "n_points": self.n_points,
            "violations": [v.to_dict() for v in self.violations[:10]],
            "note": self.note,
        }


def _sample_times(cfg: SamplerConfig, rng) -> np.ndarray:
    T = cfg.horizon
    drawn = rng.uniform(0.0, T, size=cfg.count) + 1e-9
    corners = np.array([T, 0.5 * T, 1e-6 * T])
    return np.concatenate([corners, np.minimum(drawn, T)])


def _sample_args(model: LevyModel, cfg: SamplerConfig, rng, m: int):
    """y, z boxes plus Gaussian jump vectors with deterministic corner rows."""
    j = model.n_marks
    y = rng.uniform(-cfg.y_bound, cfg.y_bound, size=m)
    z = rng.uniform(-cfg.z_bound, cfg.z_bound, size=m)
    u = rng.standard_normal(size=(m, j)) * cfg.u_scale
    corners_y = np.array([0.0, 1.0, -1.0, cfg.y_bound])
    y[: corners_y.size] = corners_y
    z[: corners_y.size] = np.array([0.0, 1.0, -1.0, -cfg.z_bound])
    if j:
        u[0] = 0.0
        for k in range(min(j, max(0, m - 1))):
            u[1 + k] = 0.0
            u[1 + k, k] = cfg.u_scale  # single-coordinate spike
    return y, z, u


def _sample_context(model: LevyModel, cfg: SamplerConfig, rng, m: int) -> StepContext:
    x = rng.uniform(-cfg.x_bound, cfg.x_bound, size=m)
    x[0] = 0.0
    return StepContext(model=model, x=x)


def check_growth(g: GeneratorSpec, model: LevyModel, cfg: SamplerConfig = SamplerConfig()) -> CheckReport:
    """Sample points and test |f| <= F + K1|y| + K2(|z| + ||u||) up to slack."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed)))
    violations = []
    n_points = 0
    for t in _sample_times(cfg, rng):
        m = max(8, model.n_marks + 2)
        ctx = _sample_context(model, cfg, rng, m)
        y, z, u = _sample_args(model, cfg, rng, m)
        val = np.abs(np.asarray(g.eval(ctx, float(t), y, z, u), dtype=float))
        bound = np.asarray(g.growth_bound(ctx, float(t), y, z, u), dtype=float)
        n_points += m
        bad = np.flatnonzero(val > bound + CHECK_SLACK)
        for k in bad[:3]:
            violations.append(
                Violation(
                    point={"t": float(t), "x": float(ctx.x[k]), "y": float(y[k]), "z": float(z[k]), "u": u[k].tolist()},
                    lhs=float(val[k]),
                    rhs=float(bound[k]),
                )
            )
    return CheckReport("growth", g.name, not violations, n_points, violations)


def check_monotonicity(g: GeneratorSpec, model: LevyModel, cfg: SamplerConfig = SamplerConfig()) -> CheckReport:
    """Sample argument pairs at a common (context, t) and test the one-sided condition."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed + 1)))
    violations = []
    n_points = 0
    for t in _sample_times(cfg, rng):
        m = max(8, model.n_marks + 2)
        ctx = _sample_context(model, cfg, rng, m)
        y, z, u = _sample_args(model, cfg, rng, m)
        y2, z2, u2 = _sample_args(model, cfg, rng, m)
        dy = y - y2
        lhs = dy * (np.asarray(g.eval(ctx, float(t), y, z, u)) - np.asarray(g.eval(ctx, float(t), y2, z2, u2)))
        rhs = float(g.alpha(float(t))) * np.asarray(g.rho(dy * dy)) + np.asarray(g.beta(ctx, float(t))) * np.abs(dy) * (
            np.abs(z - z2) + levy_norm(u - u2, model)
        )
        n_points += m
        bad = np.flatnonzero(lhs > rhs + CHECK_SLACK)
        for k in bad[:3]:
            violations.append(
                Violation(
                    point={"t": float(t), "y": float(y[k]), "y2": float(y2[k]), "z": float(z[k]), "z2": float(z2[k])},
                    lhs=float(lhs[k]),
                    rhs=float(rhs[k]),
                )
            )
    return CheckReport("monotonicity", g.name, not violations, n_points, violations)


def check_jump_ordering(g: GeneratorSpec, model: LevyModel, cfg: SamplerConfig = SamplerConfig()) -> CheckReport:
    """Ordered jump arguments u <= u': test f(..,u) - f(..,u') <= sum_j lambda_j (u'_j - u_j)."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed + 2)))
    lam = model.intensities
    violations = []
    n_points = 0
    for t in _sample_times(cfg, rng):
        m = max(8, model.n_marks + 2)
        ctx = _sample_context(model, cfg, rng, m)
        y, z, u = _sample_args(model, cfg, rng, m)
        bump = np.abs(rng.standard_normal(size=u.shape))
        if model.n_marks:
            bump[0] = 1.0  # strict increase in every coordinate
        u_hi = u + bump
        lhs = np.asarray(g.eval(ctx, float(t), y, z, u)) - np.asarray(g.eval(ctx, float(t), y, z, u_hi))
        rhs = (u_hi - u) @ lam
        n_points += m
        bad = np.flatnonzero(lhs > rhs + CHECK_SLACK)
        for k in bad[:3]:
            violations.append(
                Violation(
                    point={"t": float(t), "y": float(y[k]), "z": float(z[k]), "u": u[k].tolist(), "u_hi": u_hi[k].tolist()},
                    lhs=float(lhs[k]),
                    rhs=float(rhs[k]),
                )
            )
    return CheckReport("jump_ordering", g.name, not violations, n_points, violations)


def check_ordering(
    g_low: GeneratorSpec, g_high: GeneratorSpec, model: LevyModel, cfg: SamplerConfig = SamplerConfig()
) -> CheckReport:
    """Sample points and test g_low <= g_high up to slack (a comparison hypothesis)."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed + 3)))
    violations = []
    n_points = 0
    for t in _sample_times(cfg, rng):
        m = max(8, model.n_marks + 2)
        ctx = _sample_context(model, cfg, rng, m)
        y, z, u = _sample_args(model, cfg, rng, m)
        lo = np.asarray(g_low.eval(ctx, float(t), y, z, u), dtype=float)
        hi = np.asarray(g_high.eval(ctx, float(t), y, z, u), dtype=float)
        n_points += m
        bad = np.flatnonzero(lo > hi + CHECK_SLACK)
        for k in bad[:3]:
            violations.append(
                Violation(
                    point={"t": float(t), "y": float(y[k]), "z": float(z[k]), "u": u[k].tolist()},
                    lhs=float(lo[k]),
                    rhs=float(hi[k]),
                )
            )
    return CheckReport("ordering", f"{g_low.name} <= {g_high.name}", not violations, n_points, violations)


def rho_report(rho: RhoFunction, name: str = "rho") -> CheckReport:
    """Zero at zero, monotone and midpoint-concave on a sampled grid, small-x rate table.

    The small-x rate rho(x^2)/x is reported on x = 2^-k; behavior below the
    grid cannot be decided by sampling and is noted, not asserted.
    """
    xs = np.concatenate([[0.0], np.logspace(-8, 1, 40)])
    vals = np.asarray([float(rho(x)) for x in xs])
    violations = []
    if abs(vals[0]) > CHECK_SLACK:
        violations.append(Violation({"x": 0.0}, float(vals[0]), 0.0))
    diffs = np.diff(vals)
    for k in np.flatnonzero(diffs < -CHECK_SLACK)[:3]:
        violations.append(Violation({"x": float(xs[k + 1])}, float(vals[k + 1]), float(vals[k])))
    mid = np.asarray([float(rho(0.5 * (a + b))) for a, b in zip(xs[:-1], xs[1:])])
    concave_gap = mid - 0.5 * (vals[:-1] + vals[1:])
    for k in np.flatnonzero(concave_gap < -CHECK_SLACK)[:3]:
        violations.append(Violation({"midpoint_of": [float(xs[k]), float(xs[k + 1])]}, float(mid[k]), float(0.5 * (vals[k] + vals[k + 1]))))
    grid = 2.0 ** -np.arange(1, 26)
    rate = np.asarray([float(rho(x * x)) / x for x in grid])
    note = (
        "small-x rate rho(x^2)/x on x=2^-k, k=1..25: "
        f"first={rate[0]:.3e}, last={rate[-1]:.3e}; behavior below the grid is not decidable by sampling"
    )
    return CheckReport("rho_shape", name, not violations, xs.size, violations, note=note)


# ---------------------------------------------------------------------------
# Builtin catalog
# ---------------------------------------------------------------------------


def zero_generator() -> GeneratorSpec:
    def eval_zero(ctx, t, y, z, u):
        return np.zeros_like(np.asarray(y, dtype=float))

    return GeneratorSpec(name="zero", eval=eval_zero)


def linear_y(k: float = 1.0) -> GeneratorSpec:
    """f = k*y; monotone with identity modulus and slope coefficient max(k, 0)."""
    kf = float(k)

    def eval_lin(ctx, t, y, z, u):
        return kf * np.asarray(y, dtype=float)

    return GeneratorSpec(
        name=f"linear_y(k={kf:g})",
        eval=eval_lin,
        K1=constant_coeff(abs(kf)),
        alpha=lambda t: max(kf, 0.0),
    )


def linear_driver(a: float = 0.5, b: float = 0.5, c=0.5) -> GeneratorSpec:
    """f = a*y + b*z + sum_j c_j lambda_j u_j.

    The ordered-jump condition holds exactly when every c_j >= -1; the flag
    records that. c may be a scalar (broadcast over marks) or a per-mark tuple.
    """
    af, bf = float(a), float(b)
    c_arr = np.atleast_1d(np.asarray(c, dtype=float))
    ordering_ok = bool((c_arr >= -1.0).all())

    def c_for(model: LevyModel) -> np.ndarray:
        if c_arr.size == 1:
            return np.full(model.n_marks, c_arr[0])
        if c_arr.size != model.n_marks:
            raise ValueError(f"driver has {c_arr.size} jump coefficients, model has {model.n_marks} marks")
        return c_arr

    def eval_lin(ctx, t, y, z, u):
        cs = c_for(ctx.model)
        jump_term = np.asarray(u, dtype=float) @ (cs * ctx.model.intensities)
        return af * np.asarray(y, dtype=float) + bf * np.asarray(z, dtype=float) + jump_term

    def k2(ctx, t):
        cs = c_for(ctx.model)
        # Cauchy-Schwarz in the weighted norm: |sum c lam u| <= sqrt(sum c^2 lam) ||u||
        level = max(abs(bf), float(np.sqrt((cs * cs) @ ctx.model.intensities)) if cs.size else 0.0)
        return np.full_like(np.asarray(ctx.x, dtype=float), level)

    cname = ",".join(f"{v:g}" for v in c_arr)
    return GeneratorSpec(
        name=f"linear(a={af:g},b={bf:g},c=[{cname}])",
        eval=eval_lin,
        K1=constant_coeff(abs(af)),
        K2=k2,
        beta=k2,
        alpha=lambda t: max(af, 0.0),
        satisfies_jump_ordering=ordering_ok,
    )


def tanh_jump_integral() -> GeneratorSpec:
    """f(t, u) = tanh of the kappa-weighted jump integral, kappa(t,x) = t^(-1/4) min(|x|, 1).

    The time singularity at t = 0 is integrable; this version evaluates to 0
    at t = 0 (a null set for the time integral), which keeps the declared
    coefficient K2(t) = t^(-1/4) ||kappa(t, .)|| finite on the grid.
    """

    def kappa_weights(model: LevyModel, t: float) -> np.ndarray:
        return float(t) ** -0.25 * np.minimum(np.abs(model.jump_sizes), 1.0)

    def eval_tanh_jump(ctx, t, y, z, u):
        y = np.asarray(y, dtype=float)
        if float(t) <= 0.0 or not ctx.model.n_marks:
            return np.zeros_like(y)
        w = kappa_weights(ctx.model, t) * ctx.model.intensities
        return np.tanh(np.asarray(u, dtype=float) @ w)

    def k2(ctx, t):
        x0 = np.zeros_like(np.asarray(ctx.x, dtype=float))
        if float(t) <= 0.0 or not ctx.model.n_marks:
            return x0
        kap = kappa_weights(ctx.model, t)
        return x0 + float(np.sqrt((kap * kap) @ ctx.model.intensities))

    return GeneratorSpec(name="tanh_jump_integral", eval=eval_tanh_jump, K2=k2, beta=k2)


def jump_ordering_violator() -> GeneratorSpec:
    """f = -2 * sum_j lambda_j u_j: linear growth holds but the ordered-jump condition fails."""
    g = linear_driver(0.0, 0.0, -2.0)
    return replace(g, name="jump_ordering_violator", satisfies_jump_ordering=False)


def builtin_generators() -> dict[str, GeneratorSpec]:
    """Named catalog used by configs and the experiment suites."""
    return {
        "zero": zero_generator(),
        "linear_y": linear_y(1.0),
        "linear_driver": linear_driver(),
        "tanh_jump_integral": tanh_jump_integral(),
        "jump_ordering_violator": jump_ordering_violator(),
    }

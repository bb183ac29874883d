"""Least-squares Monte Carlo backward solver and solution distances.

The regression state is the current value of the driving process; the basis
is polynomial and its degree drops automatically when the design matrix is
rank deficient on the sampled paths (pure-jump models take few values).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .generators import GeneratorSpec, StepContext
from .levy import LevyModel, ModelError, PathBundle, TimeGrid, simulate_paths
from .tree import TreeSolution


class RegressionError(ModelError):
    """Design problems the solver cannot repair."""


@dataclass(frozen=True)
class RegressionBasis:
    family: str = "poly"
    degree: int = 3

    def __post_init__(self):
        if self.family != "poly":
            raise RegressionError(f"unknown basis family '{self.family}'")
        if self.degree < 0:
            raise RegressionError("basis degree must be nonnegative")

    @property
    def dimension(self) -> int:
        return self.degree + 1


@dataclass(frozen=True)
class McSolution:
    """Path-indexed solution arrays plus the degrees the regression used."""

    model: LevyModel
    grid: TimeGrid
    basis: RegressionBasis
    Y: np.ndarray  # (paths, steps+1)
    Z: np.ndarray  # (paths, steps)
    U: np.ndarray  # (paths, steps, marks)
    degrees_used: tuple

    @property
    def y0(self) -> float:
        return float(self.Y[:, 0].mean())


def _design(x: np.ndarray, degree: int) -> np.ndarray:
    """Standardized polynomial columns 1, x~, x~^2, ..; constant-only when x is degenerate."""
    x = np.asarray(x, dtype=float)
    s = x.std()
    if s == 0.0 or degree == 0:
        return np.ones((x.size, 1))
    xt = (x - x.mean()) / s
    return np.vander(xt, degree + 1, increasing=True)


def _fit(x: np.ndarray, targets: np.ndarray, degree: int) -> tuple[np.ndarray, int]:
    """Least squares with automatic degree reduction to full column rank.

    Returns fitted values for every target column and the degree kept.
    """
    deg = degree
    while True:
        phi = _design(x, deg)
        coef, _, rank, _ = np.linalg.lstsq(phi, targets, rcond=None)
        if rank == phi.shape[1]:
            return phi @ coef, deg if phi.shape[1] > 1 else 0
        if deg == 0:
            raise RegressionError("design matrix is rank deficient even for the constant basis")
        deg -= 1


def _backward_pass(bundle: PathBundle, g: GeneratorSpec, xi, basis: RegressionBasis, idx=None):
    """Explicit-in-y regression recursion on (a resample of) the simulated paths."""
    model, grid = bundle.model, bundle.grid
    n, j = grid.steps, model.n_marks
    dt = grid.dt
    times = grid.times

    x_path = bundle.states()
    w_path = bundle.brownian()
    c_path = bundle.jump_counts()
    dw = bundle.dw
    dnt = bundle.dn_tilde
    if idx is not None:
        x_path, w_path, c_path = x_path[idx], w_path[idx], c_path[idx]
        dw, dnt = dw[idx], dnt[idx]
    m = x_path.shape[0]

    p_jump = model.intensities * dt
    if j and np.any(p_jump >= 1.0):
        raise RegressionError("solve_mc needs lambda*dt < 1 for the jump-coefficient normalization")
    u_denom = p_jump * (1.0 - p_jump) if j else None

    y = np.empty((m, n + 1))
    z = np.zeros((m, n))
    u = np.zeros((m, n, j))
    degrees = [0] * n
    y[:, n] = xi(StepContext(model=model, x=x_path[:, n], w=w_path[:, n], counts=c_path[:, n]))

    for i in range(n - 1, -1, -1):
        targets = np.empty((m, 2 + j))
        targets[:, 0] = y[:, i + 1]
        targets[:, 1] = y[:, i + 1] * dw[:, i]
        for k in range(j):
            targets[:, 2 + k] = y[:, i + 1] * dnt[:, i, k]
        fitted, deg = _fit(x_path[:, i], targets, basis.degree)
        degrees[i] = deg
        ey = fitted[:, 0]
        z[:, i] = fitted[:, 1] / dt if model.sigma > 0 else 0.0
        if j:
            u[:, i, :] = fitted[:, 2:] / u_denom
        ctx = StepContext(model=model, x=x_path[:, i], w=w_path[:, i], counts=c_path[:, i])
        y[:, i] = ey + dt * np.asarray(g.eval(ctx, float(times[i]), ey, z[:, i], u[:, i, :]), dtype=float)

    return y, z, u, tuple(degrees)


def solve_mc(
    model: LevyModel,
    grid: TimeGrid,
    g: GeneratorSpec,
    xi,
    paths: int,
    basis: RegressionBasis = RegressionBasis(),
    seed: int = 0,
) -> McSolution:
    """Simulate paths and run the regression backward recursion."""
    if paths < 10 * basis.dimension:
        raise RegressionError(f"need at least {10 * basis.dimension} paths for a degree-{basis.degree} basis")
    bundle = simulate_paths(model, grid, paths, seed)
    y, z, u, degrees = _backward_pass(bundle, g, xi, basis)
    return McSolution(model=model, grid=grid, basis=basis, Y=y, Z=z, U=u, degrees_used=degrees)


@dataclass(frozen=True)
class BootstrapEstimate:
    y0: float
    se: float
    samples: np.ndarray


def bootstrap_y0(
    model: LevyModel,
    grid: TimeGrid,
    g: GeneratorSpec,
    xi,
    paths: int,
    basis: RegressionBasis = RegressionBasis(),
    seed: int = 0,
    n_boot: int = 24,
) -> BootstrapEstimate:
    """Bootstrap the initial value by resampling paths and re-running the recursion."""
    if paths < 10 * basis.dimension:
        raise RegressionError(f"need at least {10 * basis.dimension} paths for a degree-{basis.degree} basis")
    bundle = simulate_paths(model, grid, paths, seed)
    y, _, _, _ = _backward_pass(bundle, g, xi, basis)
    y0 = float(y[:, 0].mean())
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(987,))))
    samples = np.empty(n_boot)
    for bidx in range(n_boot):
        idx = rng.integers(0, paths, size=paths)
        yb, _, _, _ = _backward_pass(bundle, g, xi, basis, idx=idx)
        samples[bidx] = yb[:, 0].mean()
    se = float(samples.std(ddof=1))
    return BootstrapEstimate(y0=y0, se=se, samples=samples)


# ---------------------------------------------------------------------------
# Solution distances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class L2Distance:
    """Squared empirical distances E int |dY|^2 ds, E int |dZ|^2 ds, E int ||dU||^2 ds."""

    dY: float
    dZ: float
    dU: float

    def total(self) -> float:
        return self.dY + self.dZ + self.dU


def l2_distance(sol_a, sol_b, grid: TimeGrid | None = None) -> L2Distance:
    """Distance between two solutions on the same tree or the same path bundle.

    The Y integral runs over the N left endpoints, so a constant offset c
    contributes exactly c^2 * T.
    """
    if isinstance(sol_a, TreeSolution) and isinstance(sol_b, TreeSolution):
        ta, tb = sol_a.tree, sol_b.tree
        if ta.branching != tb.branching or ta.n_steps != tb.n_steps:
            raise ModelError("tree solutions live on different trees")
        dt = ta.grid.dt
        lam = ta.model.intensities
        dy = sum(ta.expectation((ya - yb) ** 2, i) for i, (ya, yb) in enumerate(zip(sol_a.Y[:-1], sol_b.Y[:-1]))) * dt
        dz = sum(ta.expectation((za - zb) ** 2, i) for i, (za, zb) in enumerate(zip(sol_a.Z, sol_b.Z))) * dt
        du = sum(
            ta.expectation(((ua - ub) ** 2) @ lam, i) for i, (ua, ub) in enumerate(zip(sol_a.U, sol_b.U))
        ) * dt
        return L2Distance(float(dy), float(dz), float(du))
    if isinstance(sol_a, McSolution) and isinstance(sol_b, McSolution):
        if sol_a.Y.shape != sol_b.Y.shape:
            raise ModelError("path solutions have mismatched shapes")
        dt = sol_a.grid.dt
        lam = sol_a.model.intensities
        dy = float(((sol_a.Y[:, :-1] - sol_b.Y[:, :-1]) ** 2).mean(axis=0).sum() * dt)
        dz = float(((sol_a.Z - sol_b.Z) ** 2).mean(axis=0).sum() * dt)
        du = float((((sol_a.U - sol_b.U) ** 2) @ lam).mean(axis=0).sum() * dt) if lam.size else 0.0
        return L2Distance(dy, dz, du)
    raise ModelError("l2_distance needs two tree solutions or two path solutions")

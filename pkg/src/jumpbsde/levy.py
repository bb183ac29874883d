"""Driving model: drift, Brownian part, and finitely many Poisson jump marks.

The model keeps a finite atomic jump measure (one intensity per mark size).
Marks of size at most 1 enter the state through compensated increments,
larger marks through raw counts.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

# Size threshold separating compensated (small) from uncompensated (large) jumps.
SMALL_JUMP_CUTOFF = 1.0


class ModelError(ValueError):
    """Invalid model, grid, or simulation request."""


@dataclass(frozen=True)
class LevyModel:
    """Drift, diffusion coefficient, and jump marks (size, intensity) pairs.

    The jump measure is the atomic measure sum_j lambda_j * delta_{x_j};
    its total mass is finite by construction.
    """

    drift: float = 0.0
    sigma: float = 0.0
    marks: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "marks", tuple((float(x), float(lam)) for x, lam in self.marks))
        if self.sigma < 0:
            raise ModelError("sigma must be nonnegative")
        sizes = [x for x, _ in self.marks]
        if any(x == 0.0 for x in sizes):
            raise ModelError("jump sizes must be nonzero")
        if len(set(sizes)) != len(sizes):
            raise ModelError("jump sizes must be pairwise distinct")
        if any(lam <= 0.0 for _, lam in self.marks):
            raise ModelError("jump intensities must be positive")

    @property
    def n_marks(self) -> int:
        return len(self.marks)

    @property
    def jump_sizes(self) -> np.ndarray:
        return np.array([x for x, _ in self.marks], dtype=float)

    @property
    def intensities(self) -> np.ndarray:
        return np.array([lam for _, lam in self.marks], dtype=float)

    @property
    def total_intensity(self) -> float:
        return float(self.intensities.sum()) if self.marks else 0.0

    @property
    def small_mask(self) -> np.ndarray:
        """Marks entering through compensated increments (|x| <= 1)."""
        return np.abs(self.jump_sizes) <= SMALL_JUMP_CUTOFF

    def mean_terminal_state(self, horizon: float) -> float:
        """Exact mean of the state at the horizon: a*T + T * sum over large marks of lambda*x."""
        large = ~self.small_mask
        contrib = float((self.jump_sizes[large] * self.intensities[large]).sum()) if self.marks else 0.0
        return (self.drift + contrib) * horizon


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, T] with N steps."""

    horizon: float
    steps: int

    def __post_init__(self):
        if self.horizon <= 0:
            raise ModelError("horizon must be positive")
        if self.steps < 1:
            raise ModelError("steps must be at least 1")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)

    def validate_for_tree(self, model: LevyModel) -> None:
        """Tree branching allows at most one jump per mark per step: lambda*dt < 1."""
        if model.n_marks and float(model.intensities.max()) * self.dt >= 1.0:
            raise ModelError(
                f"lambda*dt must be below 1 for tree use (max lambda={model.intensities.max()}, dt={self.dt})"
            )


def levy_norm(u, model: LevyModel):
    """Jump-measure weighted norm sqrt(sum_j lambda_j * u_j^2).

    `u` carries one entry per mark in its last axis; leading axes are preserved.
    """
    u = np.asarray(u, dtype=float)
    lam = model.intensities
    if u.shape[-1:] != lam.shape:
        raise ModelError(f"jump vector has {u.shape[-1] if u.ndim else 0} entries, model has {model.n_marks} marks")
    return np.sqrt((u * u) @ lam)


def truncate_model(model: LevyModel, n: int) -> LevyModel:
    """Drop marks of size below 1/n; the boundary size |x| = 1/n is kept."""
    if n < 1:
        raise ModelError("truncation level must be at least 1")
    kept = tuple((x, lam) for x, lam in model.marks if abs(x) >= 1.0 / n)
    return LevyModel(model.drift, model.sigma, kept)


def kept_marks_mask(model: LevyModel, n: int) -> np.ndarray:
    """Boolean mask of marks retained at truncation level n."""
    if n < 1:
        raise ModelError("truncation level must be at least 1")
    if not model.n_marks:
        return np.zeros(0, dtype=bool)
    return np.abs(model.jump_sizes) >= 1.0 / n


@dataclass(frozen=True)
class PathBundle:
    """Simulated increments on a grid: Brownian increments and per-mark jump counts.

    dw has shape (paths, steps); dn has shape (paths, steps, marks).
    """

    model: LevyModel
    grid: TimeGrid
    seed: int
    dw: np.ndarray
    dn: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.dw.shape[0]

    @property
    def dn_tilde(self) -> np.ndarray:
        """Compensated jump increments dN - lambda*dt."""
        return self.dn - self.model.intensities * self.grid.dt

    def brownian(self) -> np.ndarray:
        """Brownian path values at grid times, shape (paths, steps+1)."""
        w = np.zeros((self.n_paths, self.grid.steps + 1))
        np.cumsum(self.dw, axis=1, out=w[:, 1:])
        return w

    def jump_counts(self) -> np.ndarray:
        """Cumulative jump counts per mark at grid times, shape (paths, steps+1, marks)."""
        c = np.zeros((self.n_paths, self.grid.steps + 1, self.model.n_marks))
        np.cumsum(self.dn, axis=1, out=c[:, 1:, :])
        return c

    def states(self) -> np.ndarray:
        """State path values at grid times, shape (paths, steps+1).

        Small marks contribute through compensated increments, large marks
        through raw counts.
        """
        m, g = self.model, self.grid
        sizes, lam, small = m.jump_sizes, m.intensities, m.small_mask
        inc = m.drift * g.dt + m.sigma * self.dw
        if m.n_marks:
            comp = float((sizes[small] * lam[small]).sum()) * g.dt
            inc = inc + self.dn @ sizes - comp
        x = np.zeros((self.n_paths, g.steps + 1))
        np.cumsum(inc, axis=1, out=x[:, 1:])
        return x

    def to_csv(self, path) -> None:
        """Columns: path, step, dW, dN_1..dN_J."""
        j = self.model.n_marks
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["path", "step", "dW"] + [f"dN_{k + 1}" for k in range(j)])
            for p in range(self.n_paths):
                for i in range(self.grid.steps):
                    writer.writerow([p, i, repr(self.dw[p, i])] + [int(self.dn[p, i, k]) for k in range(j)])


def simulate_paths(model: LevyModel, grid: TimeGrid, count: int, seed: int) -> PathBundle:
    """Simulate i.i.d. Brownian and Poisson increments on the grid.

    Each path gets its own random stream spawned from the root seed
    (spawn key = path index, Brownian increments drawn before jump counts),
    so path i is bit-identical regardless of the total path count.
    """
    if count < 1:
        raise ModelError("path count must be at least 1")
    steps, j = grid.steps, model.n_marks
    lam_dt = model.intensities * grid.dt
    sqrt_dt = np.sqrt(grid.dt)
    dw = np.empty((count, steps))
    dn = np.zeros((count, steps, j))
    children = np.random.SeedSequence(seed).spawn(count)
    for i, child in enumerate(children):
        rng = np.random.Generator(np.random.PCG64(child))
        dw[i] = rng.standard_normal(steps) * sqrt_dt
        if j:
            dn[i] = rng.poisson(lam_dt, size=(steps, j))
    return PathBundle(model=model, grid=grid, seed=seed, dw=dw, dn=dn)

"""Exact finite scenario tree: conditional expectations, backward solver,
and the projection onto the sub-filtration generated by the coarse jumps.

Per step the branch alphabet is the product of a Brownian sign (when sigma
is positive) with one jump/no-jump bit per mark. Branch b at any node has
the same increment and probability, so level i holds exactly B^i nodes laid
out so that the children of node k are k*B + b. All conditional expectations
are probability-weighted sums over children, with no regression anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .generators import GeneratorSpec, StepContext
from .levy import LevyModel, ModelError, TimeGrid, kept_marks_mask

DEFAULT_NODE_CAP = 2_000_000
DEFAULT_FP_TOL = 1e-12
DEFAULT_FP_MAX_ITER = 200


class TreeSizeError(ModelError):
    """The requested tree exceeds the node cap."""


class FixedPointError(RuntimeError):
    """The implicit one-step equation did not converge; dt is too large for
    the driver's y-sensitivity."""


@dataclass(frozen=True)
class ScenarioTree:
    """Enumerated product tree with per-level state arrays.

    dw_branch, dn_branch and branch_prob describe one step's alphabet;
    states/wpaths/counts/node_prob hold per-node values for levels 0..N.
    """

    model: LevyModel
    grid: TimeGrid
    branching: int
    dw_branch: np.ndarray
    dn_branch: np.ndarray
    branch_prob: np.ndarray
    states: tuple
    wpaths: tuple
    counts: tuple
    node_prob: tuple

    @property
    def n_steps(self) -> int:
        return self.grid.steps

    def level_size(self, level: int) -> int:
        return self.branching**level

    def context(self, level: int) -> StepContext:
        return StepContext(
            model=self.model, x=self.states[level], w=self.wpaths[level], counts=self.counts[level]
        )

    def dn_tilde_branch(self) -> np.ndarray:
        """Compensated per-branch jump increments, shape (B, J)."""
        return self.dn_branch - self.model.intensities * self.grid.dt

    def infer_level(self, values) -> int:
        size = int(np.asarray(values).shape[0])
        if self.branching == 1:
            if size != 1:
                raise ModelError("values do not match any tree level")
            return 0
        level = int(round(np.log(size) / np.log(self.branching)))
        if self.branching**level != size or level > self.n_steps:
            raise ModelError(f"array of length {size} does not match any tree level")
        return level

    def expectation(self, values, level: int | None = None) -> float:
        """Unconditional expectation of per-node values at one level."""
        v = np.asarray(values, dtype=float)
        lvl = self.infer_level(v) if level is None else level
        return float(v @ self.node_prob[lvl])


def build_tree(model: LevyModel, grid: TimeGrid, node_cap: int = DEFAULT_NODE_CAP) -> ScenarioTree:
    """Enumerate the product tree; rejects lambda*dt >= 1 and oversize trees."""
    grid.validate_for_tree(model)
    j = model.n_marks
    has_w = model.sigma > 0.0
    branching = (2 if has_w else 1) * 2**j
    total = sum(branching**i for i in range(grid.steps + 1))
    if total > node_cap:
        raise TreeSizeError(
            f"tree needs {total} nodes (branching {branching}, {grid.steps} steps), cap is {node_cap}"
        )

    dt = grid.dt
    sizes, lam, small = model.jump_sizes, model.intensities, model.small_mask
    p_jump = lam * dt

    b_idx = np.arange(branching)
    # Bit layout: mark j occupies bit j; the Brownian sign, if present, is the top bit.
    dn_branch = ((b_idx[:, None] >> np.arange(j)[None, :]) & 1).astype(float) if j else np.zeros((branching, 0))
    if has_w:
        sign_bit = (b_idx >> j) & 1
        dw_branch = np.where(sign_bit == 0, np.sqrt(dt), -np.sqrt(dt))
        prob = np.full(branching, 0.5)
    else:
        dw_branch = np.zeros(branching)
        prob = np.ones(branching)
    for k in range(j):
        bit = dn_branch[:, k]
        prob = prob * np.where(bit == 1.0, p_jump[k], 1.0 - p_jump[k])

    comp = float((sizes[small] * lam[small]).sum()) * dt if j else 0.0
    inc_x = model.drift * dt + model.sigma * dw_branch + (dn_branch @ sizes if j else 0.0) - comp

    states = [np.zeros(1)]
    wpaths = [np.zeros(1)]
    counts = [np.zeros((1, j))]
    node_prob = [np.ones(1)]
    for _ in range(grid.steps):
        states.append(np.add.outer(states[-1], inc_x).ravel())
        wpaths.append(np.add.outer(wpaths[-1], dw_branch).ravel())
        counts.append(
            (counts[-1][:, None, :] + dn_branch[None, :, :]).reshape(-1, j)
            if j
            else np.zeros((states[-1].size, 0))
        )
        node_prob.append(np.multiply.outer(node_prob[-1], prob).ravel())

    return ScenarioTree(
        model=model,
        grid=grid,
        branching=branching,
        dw_branch=dw_branch,
        dn_branch=dn_branch,
        branch_prob=prob,
        states=tuple(states),
        wpaths=tuple(wpaths),
        counts=tuple(counts),
        node_prob=tuple(node_prob),
    )


def conditional_expectation(tree: ScenarioTree, values) -> np.ndarray:
    """Exact one-level conditional expectation: values at level i+1 -> level i."""
    v = np.asarray(values, dtype=float)
    if tree.branching == 1:
        return v.copy()
    level = tree.infer_level(v)
    if level == 0:
        raise ModelError("values sit at the root; there is no coarser level")
    return v.reshape(-1, tree.branching) @ tree.branch_prob


@dataclass(frozen=True)
class TreeSolution:
    """Backward solution on a tree: Y per level 0..N, Z and U per level 0..N-1."""

    tree: ScenarioTree
    Y: tuple
    Z: tuple
    U: tuple
    fp_iterations: tuple

    @property
    def y0(self) -> float:
        return float(self.Y[0][0])

    def expected_sup_y_squared(self) -> float:
        """E of the pathwise running maximum of |Y| squared."""
        run = np.abs(self.Y[0])
        for lvl in range(1, len(self.Y)):
            run = np.maximum(np.repeat(run, self.tree.branching), np.abs(self.Y[lvl]))
        return float((run * run) @ self.tree.node_prob[len(self.Y) - 1])

    def sup_expected_y_squared(self) -> float:
        """Maximum over grid times of E|Y|^2."""
        return max(self.tree.expectation(y * y, lvl) for lvl, y in enumerate(self.Y))

    def zu_integrals(self) -> tuple[float, float]:
        """Time-integrated second moments: (E int |Z|^2 ds, E int ||U||^2 ds)."""
        dt = self.tree.grid.dt
        lam = self.tree.model.intensities
        z_tot = sum(self.tree.expectation(z * z, i) for i, z in enumerate(self.Z)) * dt
        u_tot = sum(self.tree.expectation((u * u) @ lam, i) for i, u in enumerate(self.U)) * dt
        return float(z_tot), float(u_tot)


def _representation_weights(tree: ScenarioTree):
    """Per-branch weights extracting Z and U from next-level values.

    Z = E[Y_next dW] / dt and U_j = E[Y_next dN~_j] / (lambda_j dt (1 - lambda_j dt)),
    the exact second-moment normalizations of the one-step increments.
    """
    dt = tree.grid.dt
    p = tree.branch_prob
    w_z = p * tree.dw_branch / dt if tree.model.sigma > 0 else None
    j = tree.model.n_marks
    if j:
        p_jump = tree.model.intensities * dt
        denom = p_jump * (1.0 - p_jump)
        w_u = p[:, None] * tree.dn_tilde_branch() / denom[None, :]
    else:
        w_u = None
    return w_z, w_u


def solve_backward(
    tree: ScenarioTree,
    g: GeneratorSpec,
    xi,
    tol: float = DEFAULT_FP_TOL,
    max_iter: int = DEFAULT_FP_MAX_ITER,
) -> TreeSolution:
    """Implicit backward sweep: at each node solve Y = E[Y_next] + dt f(t, Y, Z, U).

    Z and U come from exact correlations with the step increments; the
    implicit y-equation is solved by fixed-point iteration to `tol`.
    The driver is evaluated at the left endpoint with the pre-jump state.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    n, b, dt = tree.n_steps, tree.branching, tree.grid.dt
    j = tree.model.n_marks
    times = tree.grid.times
    w_z, w_u = _representation_weights(tree)

    y_levels = [None] * (n + 1)
    z_levels = [None] * n
    u_levels = [None] * n
    iters = [0] * n
    y_levels[n] = np.asarray(xi(tree.context(n)), dtype=float)

    for i in range(n - 1, -1, -1):
        nxt = y_levels[i + 1].reshape(-1, b)
        ey = nxt @ tree.branch_prob
        z = nxt @ w_z if w_z is not None else np.zeros(ey.shape)
        u = nxt @ w_u if w_u is not None else np.zeros((ey.shape[0], j))
        ctx = tree.context(i)
        t = float(times[i])
        y = ey.copy()
        for it in range(1, max_iter + 1):
            y_new = ey + dt * np.asarray(g.eval(ctx, t, y, z, u), dtype=float)
            delta = float(np.max(np.abs(y_new - y))) if y.size else 0.0
            y = y_new
            if delta <= tol:
                iters[i] = it
                break
        else:
            raise FixedPointError(
                f"one-step equation did not converge at level {i} within {max_iter} iterations"
            )
        y_levels[i], z_levels[i], u_levels[i] = y, z, u

    return TreeSolution(tree=tree, Y=tuple(y_levels), Z=tuple(z_levels), U=tuple(u_levels), fp_iterations=tuple(iters))


# ---------------------------------------------------------------------------
# Projection onto the sub-filtration of coarse jumps
# ---------------------------------------------------------------------------


def _branch_partition(tree: ScenarioTree, removed: np.ndarray):
    """Group branches by their kept coordinates.

    Returns (branches_by_group, group_of_branch, weights) where the first
    column of branches_by_group is the representative with no removed-mark
    jumps, and weights are the removed-coordinate probabilities.
    """
    b = tree.branching
    j = tree.model.n_marks
    removed_idx = np.flatnonzero(removed)
    removed_bits_mask = int(sum(1 << int(k) for k in removed_idx))
    p_jump = tree.model.intensities * tree.grid.dt

    r = 1 << len(removed_idx)
    keys = [bi & ~removed_bits_mask for bi in range(b)]
    group_keys = sorted(set(keys))
    key_to_group = {k: gi for gi, k in enumerate(group_keys)}
    group_of_branch = np.array([key_to_group[k] for k in keys], dtype=np.intp)

    branches_by_group = np.empty((len(group_keys), r), dtype=np.intp)
    weights = np.empty(r)
    for ridx in range(r):
        extra = 0
        w = 1.0
        for pos, mark in enumerate(removed_idx):
            bit = (ridx >> pos) & 1
            extra |= bit << int(mark)
            w *= p_jump[mark] if bit else 1.0 - p_jump[mark]
        weights[ridx] = w
        for gi, key in enumerate(group_keys):
            branches_by_group[gi, ridx] = key | extra
    return branches_by_group, group_of_branch, weights


def project_coarse(tree: ScenarioTree, values, n: int, level: int | None = None) -> np.ndarray:
    """Exact conditional expectation given the Brownian signs and the jumps
    of marks with |x| >= 1/n, applied to per-node values at one level.

    Averages over the removed-mark coordinates of every step letter. The
    averaging is centered at the no-jump representative, so values that are
    already measurable pass through bitwise and the projection is idempotent.
    """
    v = np.asarray(values, dtype=float)
    lvl = tree.infer_level(v) if level is None else int(level)
    removed = ~kept_marks_mask(tree.model, n)
    if not removed.any() or lvl == 0:
        return v.copy()

    groups, group_of_branch, w = _branch_partition(tree, removed)
    b = tree.branching
    arr = v.reshape((b,) * lvl)
    for ax in range(lvl):
        moved = np.moveaxis(arr, ax, -1)
        vg = moved[..., groups]                      # (..., G, R)
        rep = vg[..., :1]
        mean = rep[..., 0] + (vg - rep) @ w          # exact on constant groups
        out = mean[..., group_of_branch]
        arr = np.moveaxis(out, -1, ax)
    return arr.reshape(-1)


def solve_truncated(
    tree: ScenarioTree,
    g: GeneratorSpec,
    xi,
    n: int,
    tol: float = DEFAULT_FP_TOL,
    max_iter: int = DEFAULT_FP_MAX_ITER,
) -> TreeSolution:
    """Backward solve for the level-n coarse problem on the full tree.

    Terminal values and every driver evaluation are projected onto the
    coarse sub-filtration, and U is zeroed on removed marks, so the returned
    solution is constant across removed-mark coordinates. With no removed
    marks this reproduces solve_backward bit for bit.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    nsteps, b, dt = tree.n_steps, tree.branching, tree.grid.dt
    j = tree.model.n_marks
    times = tree.grid.times
    w_z, w_u = _representation_weights(tree)
    removed = ~kept_marks_mask(tree.model, n)

    y_levels = [None] * (nsteps + 1)
    z_levels = [None] * nsteps
    u_levels = [None] * nsteps
    iters = [0] * nsteps
    y_levels[nsteps] = project_coarse(tree, np.asarray(xi(tree.context(nsteps)), dtype=float), n, level=nsteps)

    for i in range(nsteps - 1, -1, -1):
        nxt = y_levels[i + 1].reshape(-1, b)
        ey = nxt @ tree.branch_prob
        z = nxt @ w_z if w_z is not None else np.zeros(ey.shape)
        u = nxt @ w_u if w_u is not None else np.zeros((ey.shape[0], j))
        if j:
            u[:, removed] = 0.0
        ctx = tree.context(i)
        t = float(times[i])
        y = ey.copy()
        for it in range(1, max_iter + 1):
            f_val = np.asarray(g.eval(ctx, t, y, z, u), dtype=float)
            y_new = ey + dt * project_coarse(tree, f_val, n, level=i)
            delta = float(np.max(np.abs(y_new - y))) if y.size else 0.0
            y = y_new
            if delta <= tol:
                iters[i] = it
                break
        else:
            raise FixedPointError(
                f"one-step equation did not converge at level {i} within {max_iter} iterations"
            )
        y_levels[i], z_levels[i], u_levels[i] = y, z, u

    return TreeSolution(tree=tree, Y=tuple(y_levels), Z=tuple(z_levels), U=tuple(u_levels), fp_iterations=tuple(iters))

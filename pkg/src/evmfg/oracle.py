"""Independent cross-checks: discrete dynamic programming and Monte Carlo.

Neither path touches the PDE sweeps. The DP solves a small discrete-state,
discrete-action best response against a FROZEN price series by exact
backward induction (semi-Lagrangian: candidate next states are folded back
into [0, 1] and the value table is interpolated linearly). The Monte Carlo
simulator integrates the agent dynamics directly with Gaussian increments
and reflection, and bins the population on the solver grid.

Both use the right-endpoint coefficient convention of the value sweep
(stage cost and dynamics of the step [t_i, t_{i+1}] evaluated at t_{i+1}
for the DP, drift of the density step at t_i for the Monte Carlo), so the
first-order time-discretization bias matches the PDE solution it audits.

Prices are always inputs here: the oracle validates best responses against
a fixed population, never the coupled equilibrium itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ev import EvParams
from .grids import SpaceGrid1D, SpaceGrid2D, TimeGrid
from .phev import PhevParams, PhevPriceSeries, beta


def fold_reflect(x: np.ndarray) -> np.ndarray:
    """Reflect positions into [0, 1] (triangle-wave fold, any overshoot)."""
    z = np.abs(np.asarray(x, dtype=float)) % 2.0
    return 1.0 - np.abs(1.0 - z)


def _coarse_series(series: np.ndarray, fine: TimeGrid, coarse: TimeGrid) -> np.ndarray:
    return np.interp(coarse.nodes, fine.nodes, np.asarray(series, dtype=float))


def _state_lattice(n: int) -> np.ndarray:
    """Endpoint-inclusive lattice: reflected positions fold into [0, 1], so
    the interpolation hull must reach the walls or near-wall values clamp."""
    return np.linspace(0.0, 1.0, n)


def _cell_lattice(n: int) -> np.ndarray:
    """Cell-centered lattice for the 2D oracle, keeping beta off z1+z2=0."""
    return (np.arange(n) + 0.5) / n


def _action_lattice(g_max: float, n: int) -> np.ndarray:
    span = 3.0 * max(g_max, 1e-12)
    return np.linspace(-span, span, n)


@dataclass
class DiscreteMdp:
    """Battery lattice MDP for the 1D game against a frozen price series.

    Transitions: deterministic drift dt*(a - g) plus a two-point (binomial)
    noise +-sigma*g*sqrt(dt) with probability 1/2 each, which matches the
    Brownian increment's mean and variance; branch probabilities sum to 1
    by construction. Out-of-range positions fold back, so the boundary
    states reflect.
    """

    states: np.ndarray
    actions: np.ndarray
    tgrid: TimeGrid
    g: np.ndarray
    sigma: np.ndarray
    H: np.ndarray
    p: np.ndarray
    f_cost: Callable[[float, np.ndarray], np.ndarray]
    kappa: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self) -> None:
        self.states = np.asarray(self.states, dtype=float)
        self.actions = np.asarray(self.actions, dtype=float)
        for name in ("g", "sigma", "H", "p"):
            value = np.asarray(getattr(self, name), dtype=float)
            if value.shape != (self.tgrid.n_nodes,):
                raise ValueError(f"series {name} must have one value per coarse time node")
            setattr(self, name, value)
        if len(self.states) < 2:
            raise ValueError("need at least 2 states")


def ev_mdp(
    params: EvParams,
    tgrid: TimeGrid,
    p: np.ndarray,
    n_states: int = 20,
    n_steps: int = 13,
    n_actions: int = 241,
) -> DiscreteMdp:
    """Coarse MDP from fine-grid coefficients (series linearly resampled)."""
    coarse = TimeGrid(t1=tgrid.t1, n_steps=n_steps, t0=tgrid.t0)
    return DiscreteMdp(
        states=_state_lattice(n_states),
        actions=_action_lattice(float(np.abs(params.g).max()), n_actions),
        tgrid=coarse,
        g=_coarse_series(params.g, tgrid, coarse),
        sigma=_coarse_series(params.sigma, tgrid, coarse),
        H=_coarse_series(params.H, tgrid, coarse),
        p=_coarse_series(p, tgrid, coarse),
        f_cost=params.f_cost,
        kappa=params.kappa,
    )


@dataclass
class PhevMdp:
    """Minimal deterministic 2D lattice MDP for the hybrid game."""

    states1: np.ndarray
    states2: np.ndarray
    actions1: np.ndarray
    actions2: np.ndarray
    tgrid: TimeGrid
    g: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    r1: np.ndarray
    r2: float
    s_cost: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    xi: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def __post_init__(self) -> None:
        self.states1 = np.asarray(self.states1, dtype=float)
        self.states2 = np.asarray(self.states2, dtype=float)
        self.actions1 = np.asarray(self.actions1, dtype=float)
        self.actions2 = np.asarray(self.actions2, dtype=float)
        for name in ("g", "Q1", "Q2", "r1"):
            value = np.asarray(getattr(self, name), dtype=float)
            if value.shape != (self.tgrid.n_nodes,):
                raise ValueError(f"series {name} must have one value per coarse time node")
            setattr(self, name, value)


def phev_mdp(
    params: PhevParams,
    tgrid: TimeGrid,
    prices: PhevPriceSeries,
    n_states: int = 10,
    n_steps: int | None = None,
    n_actions: int = 21,
) -> PhevMdp:
    coarse = tgrid if n_steps is None else TimeGrid(t1=tgrid.t1, n_steps=n_steps, t0=tgrid.t0)
    actions = _action_lattice(float(np.abs(params.g).max()), n_actions)
    return PhevMdp(
        states1=_cell_lattice(n_states),
        states2=_cell_lattice(n_states),
        actions1=actions,
        actions2=actions.copy(),
        tgrid=coarse,
        g=_coarse_series(params.g, tgrid, coarse),
        Q1=_coarse_series(params.Q1, tgrid, coarse),
        Q2=_coarse_series(params.Q2, tgrid, coarse),
        r1=_coarse_series(prices.r1, tgrid, coarse),
        r2=params.r2,
        s_cost=params.s_cost,
        xi=params.xi,
    )


def dp_best_response(mdp: DiscreteMdp | PhevMdp):
    """Exact backward induction: (value table, policy table).

    V(T, .) is the terminal cost; V(i, s) = min over the action lattice of
    the stage cost plus the expected interpolated V(i+1, next). Ties break
    toward the smaller action magnitude (actions are scanned in increasing
    |a| order and the first minimum wins).
    """
    if isinstance(mdp, PhevMdp):
        return _dp_phev(mdp)
    if mdp.actions.size == 0:
        raise ValueError("empty action set")
    s = mdp.states
    order = np.lexsort((mdp.actions, np.abs(mdp.actions)))
    a = mdp.actions[order][:, None]
    dt = mdp.tgrid.dt
    nodes = mdp.tgrid.nodes
    value = np.empty((mdp.tgrid.n_nodes, len(s)))
    policy = np.empty((mdp.tgrid.n_steps, len(s)))
    value[-1] = mdp.kappa(s)
    for i in range(mdp.tgrid.n_steps - 1, -1, -1):
        j = i + 1
        g = mdp.g[j]
        eps = mdp.sigma[j] * g * math.sqrt(dt)
        nxt = s[None, :] + dt * (a - g)
        up = fold_reflect(nxt + eps)
        dn = fold_reflect(nxt - eps)
        expected = 0.5 * (
            np.interp(up.ravel(), s, value[j]).reshape(up.shape)
            + np.interp(dn.ravel(), s, value[j]).reshape(dn.shape)
        )
        stage = a * mdp.p[j] + 0.5 * mdp.H[j] * a ** 2 + mdp.f_cost(nodes[j], s)[None, :]
        total = dt * stage + expected
        best = np.argmin(total, axis=0)  # first minimum = smallest |a|
        value[i] = total[best, np.arange(len(s))]
        policy[i] = a[best, 0]
    return value, policy


def _bilinear(table: np.ndarray, s1: np.ndarray, s2: np.ndarray, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Bilinear interpolation with clamping outside the lattice hull."""
    i1 = np.clip(np.searchsorted(s1, x1) - 1, 0, len(s1) - 2)
    i2 = np.clip(np.searchsorted(s2, x2) - 1, 0, len(s2) - 2)
    w1 = np.clip((x1 - s1[i1]) / (s1[i1 + 1] - s1[i1]), 0.0, 1.0)
    w2 = np.clip((x2 - s2[i2]) / (s2[i2 + 1] - s2[i2]), 0.0, 1.0)
    return (
        (1.0 - w1) * (1.0 - w2) * table[i1, i2]
        + w1 * (1.0 - w2) * table[i1 + 1, i2]
        + (1.0 - w1) * w2 * table[i1, i2 + 1]
        + w1 * w2 * table[i1 + 1, i2 + 1]
    )


def _dp_phev(mdp: PhevMdp):
    if mdp.actions1.size == 0 or mdp.actions2.size == 0:
        raise ValueError("empty action set")
    a1_grid, a2_grid = np.meshgrid(mdp.actions1, mdp.actions2, indexing="ij")
    a1 = a1_grid.ravel()
    a2 = a2_grid.ravel()
    # Scan pairs by total magnitude so argmin's first hit is the laziest one.
    order = np.lexsort((a2, a1, np.abs(a2), np.abs(a1), np.abs(a1) + np.abs(a2)))
    a1 = a1[order][:, None, None]
    a2 = a2[order][:, None, None]
    z1, z2 = np.meshgrid(mdp.states1, mdp.states2, indexing="ij")
    b = beta(z1, z2)
    dt = mdp.tgrid.dt
    nodes = mdp.tgrid.nodes
    shape = z1.shape
    value = np.empty((mdp.tgrid.n_nodes,) + shape)
    pol1 = np.empty((mdp.tgrid.n_steps,) + shape)
    pol2 = np.empty((mdp.tgrid.n_steps,) + shape)
    value[-1] = mdp.xi(z1, z2)
    for i in range(mdp.tgrid.n_steps - 1, -1, -1):
        j = i + 1
        g = mdp.g[j]
        n1 = fold_reflect(z1[None] + dt * (a1 - b[None] * g))
        n2 = fold_reflect(z2[None] + dt * (a2 - (1.0 - b[None]) * g))
        expected = _bilinear(value[j], mdp.states1, mdp.states2, n1, n2)
        stage = (
            a1 * mdp.r1[j]
            + a2 * mdp.r2
            + 0.5 * mdp.Q1[j] * a1 ** 2
            + 0.5 * mdp.Q2[j] * a2 ** 2
            + mdp.s_cost(nodes[j], z1, z2)[None]
        )
        total = dt * stage + expected
        flat = total.reshape(total.shape[0], -1)
        best = np.argmin(flat, axis=0)
        cols = np.arange(flat.shape[1])
        value[i] = flat[best, cols].reshape(shape)
        pol1[i] = a1[best, 0, 0].reshape(shape)
        pol2[i] = a2[best, 0, 0].reshape(shape)
    return value, (pol1, pol2)


def sample_density(m0: np.ndarray, sgrid: SpaceGrid1D, n_agents: int) -> np.ndarray:
    """Stratified inverse-CDF draws from a piecewise-constant 1D density."""
    m0 = np.asarray(m0, dtype=float)
    masses = m0 * sgrid.dx
    total = masses.sum()
    if total <= 0.0:
        raise ValueError("initial density has no mass")
    cdf = np.concatenate(([0.0], np.cumsum(masses) / total))
    edges = np.linspace(0.0, 1.0, sgrid.n_cells + 1)
    u = (np.arange(n_agents) + 0.5) / n_agents
    return np.interp(u, cdf, edges)


def mc_population(
    control,
    m0: np.ndarray,
    params: EvParams,
    tgrid: TimeGrid,
    sgrid: SpaceGrid1D,
    n_agents: int = 100_000,
    seed: int = 0,
) -> np.ndarray:
    """Euler-Maruyama population simulation binned on the solver grid.

    ``control`` is either a control field (one row per time node on the
    grid's cell centers, interpolated linearly in space) or a callable
    ``(t, x) -> alpha``. One standard-normal draw per agent per step,
    consumed in fixed agent order from a single seeded generator, so the
    result depends only on (inputs, n_agents, seed), never on scheduling.
    Histogram slices have unit mass exactly (integer counts over n_agents).
    """
    if n_agents < 1:
        raise ValueError("need at least one agent")
    params.check_nodes(tgrid)
    rng = np.random.default_rng(seed)
    x = sample_density(m0, sgrid, n_agents)
    hist = np.empty((tgrid.n_nodes, sgrid.n_cells))
    hist[0] = _bin_population(x, sgrid, n_agents)
    sqrt_dt = math.sqrt(tgrid.dt)
    nodes = tgrid.nodes
    for i in range(tgrid.n_steps):
        if callable(control):
            a = np.asarray(control(nodes[i], x), dtype=float)
        else:
            a = np.interp(x, sgrid.nodes, control[i])
        x = x + tgrid.dt * (a - params.g[i])
        noise = params.sigma[i] * params.g[i]
        if noise != 0.0:
            x = x + noise * sqrt_dt * rng.standard_normal(n_agents)
        x = fold_reflect(x)
        hist[i + 1] = _bin_population(x, sgrid, n_agents)
    return hist


def _bin_population(x: np.ndarray, sgrid: SpaceGrid1D, n_agents: int) -> np.ndarray:
    counts, _ = np.histogram(x, bins=sgrid.n_cells, range=(0.0, 1.0))
    return counts / (n_agents * sgrid.dx)

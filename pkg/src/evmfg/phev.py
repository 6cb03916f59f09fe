"""The 2D plug-in-hybrid trading game.

State: the two battery levels (z1, z2) in [0, 1]^2. The car draws the
exogenous consumption g_t, split between the packs by the state-feedback
ratio beta = z1 / (z1 + z2): the fuller pack discharges proportionally
faster. Each pack is recharged at its own controlled rate (mu1 from the
grid at the endogenous price r1, mu2 from the range extender at the flat
fuel price r2). The dynamics are deterministic (sigma = 0):

    dz1 = (mu1 - beta g) dt
    dz2 = (mu2 - (1 - beta) g) dt

The agent minimizes

    integral_0^T (mu1 r1 + mu2 r2 + Q1 mu1^2/2 + Q2 mu2^2/2 + s_t(z)) dt
        + xi(z_T)

and the grid price reacts to the aggregate battery draw:

    r1 = [g int beta dm + d/dt int z1 m]+ + offset.

Same explicit sweep structure as the 1D model; both directional term blocks
of a (sub)step are evaluated on the entering slice, so the update treats z1
and z2 symmetrically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DivergenceError
from .ev import MASS_TOLERANCE, _check_density_slice
from .grids import SpaceGrid2D, TimeGrid
from .numerics import diff_central, diff_upwind, integrate, mean_rate, substep_count


def beta(z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
    """Discharge split beta = z1 / (z1 + z2); pack 1 covers the share beta."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    return z1 / (z1 + z2)


def beta_divergence(z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
    """The exact identity d(beta)/dz1 - d(beta)/dz2 = 1 / (z1 + z2).

    Both partials of z1/(z1+z2) have magnitude z2/(z1+z2)^2 resp.
    z1/(z1+z2)^2, so their difference telescopes to 1/(z1+z2). The drift
    field mu - beta g therefore has divergence contribution -g/(z1+z2)
    regardless of the pack levels, which the transport scheme must honor.
    """
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    return 1.0 / (z1 + z2)


@dataclass
class PhevParams:
    """Model coefficients; series carry one value per time node."""

    g: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    r2: float
    s_cost: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    xi: Callable[[np.ndarray, np.ndarray], np.ndarray]
    price_offset: float = 0.5

    def __post_init__(self) -> None:
        self.g = np.atleast_1d(np.asarray(self.g, dtype=float))
        self.Q1 = np.atleast_1d(np.asarray(self.Q1, dtype=float))
        self.Q2 = np.atleast_1d(np.asarray(self.Q2, dtype=float))
        n = len(self.g)
        for name in ("Q1", "Q2"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"series {name} has length {len(getattr(self, name))}, expected {n}")
        if np.any(self.Q1 <= 0.0) or np.any(self.Q2 <= 0.0):
            raise ValueError("Q1 and Q2 must be positive at every time node")
        self.r2 = float(self.r2)

    def check_nodes(self, tgrid: TimeGrid) -> None:
        if len(self.g) != tgrid.n_nodes:
            raise ValueError(f"series length {len(self.g)} does not match {tgrid.n_nodes} time nodes")


@dataclass
class PhevPriceSeries:
    """Grid price per time node plus the flat fuel price."""

    r1: np.ndarray
    r2: float

    def __post_init__(self) -> None:
        self.r1 = np.atleast_1d(np.asarray(self.r1, dtype=float))
        self.r2 = float(self.r2)


def phev_price(m: np.ndarray, params: PhevParams, sgrid: SpaceGrid2D, tgrid: TimeGrid) -> PhevPriceSeries:
    """Grid price r1 = [g int beta dm + d/dt int z1 m]+ + offset."""
    params.check_nodes(tgrid)
    z1, z2 = sgrid.meshes()
    b = beta(z1, z2)
    draw = (np.asarray(m, dtype=float) * b).reshape(m.shape[0], -1).sum(axis=1) * sgrid.cell_volume
    rates = mean_rate(m, sgrid, tgrid)
    r1 = np.maximum(params.g * draw + rates, 0.0) + params.price_offset
    return PhevPriceSeries(r1=r1, r2=params.r2)


def phev_optimal_controls(
    v: np.ndarray, prices: PhevPriceSeries, params: PhevParams, sgrid: SpaceGrid2D
) -> tuple[np.ndarray, np.ndarray]:
    """Recharge rates mu_k* = -(r_k + dv/dz_k) / Q_k, one field per pack."""
    mu1 = np.empty_like(v)
    mu2 = np.empty_like(v)
    for i in range(v.shape[0]):
        mu1[i] = -(prices.r1[i] + diff_central(v[i], sgrid, axis=0)) / params.Q1[i]
        mu2[i] = -(prices.r2 + diff_central(v[i], sgrid, axis=1)) / params.Q2[i]
    return mu1, mu2


def phev_hjb_backward_sweep(
    prices: PhevPriceSeries, params: PhevParams, tgrid: TimeGrid, sgrid: SpaceGrid2D
) -> np.ndarray:
    """Explicit backward value sweep, v(T, .) = xi.

    Per substep both directional blocks (the z1 terms with price r1, the z2
    terms with price r2) are formed from the entering slice and applied in
    one update, keeping the scheme invariant under swapping the packs.
    """
    params.check_nodes(tgrid)
    z1, z2 = sgrid.meshes()
    b = beta(z1, z2)
    v = np.empty((tgrid.n_nodes,) + sgrid.shape)
    v[-1] = params.xi(z1, z2)
    t_nodes = tgrid.nodes
    for i in range(tgrid.n_steps - 1, -1, -1):
        j = i + 1
        g = params.g[j]
        q1 = params.Q1[j]
        q2 = params.Q2[j]
        r1 = prices.r1[j]
        r2 = prices.r2
        s_slice = params.s_cost(t_nodes[j], z1, z2)
        w1 = diff_central(v[j], sgrid, axis=0)
        w2 = diff_central(v[j], sgrid, axis=1)
        speed1 = float(np.abs(b * g + (r1 + w1) / q1).max())
        speed2 = float(np.abs((1.0 - b) * g + (r2 + w2) / q2).max())
        rate = speed1 / sgrid.dz1 + speed2 / sgrid.dz2
        if not np.isfinite(rate):
            raise DivergenceError("non-finite coefficients in backward sweep", i)
        n_sub = substep_count(tgrid.dt, rate)
        dt_sub = tgrid.dt / n_sub
        cur = v[j]
        for _ in range(n_sub):
            w1 = diff_central(cur, sgrid, axis=0)
            w2 = diff_central(cur, sgrid, axis=1)
            rhs = (
                (r1 + w1) ** 2 / (2.0 * q1)
                + b * g * w1
                + (r2 + w2) ** 2 / (2.0 * q2)
                + (1.0 - b) * g * w2
                - s_slice
            )
            cur = cur - dt_sub * rhs
        if not np.all(np.isfinite(cur)):
            raise DivergenceError("value slice is not finite", i)
        v[i] = cur
    return v


def phev_fpk_forward_sweep(
    mu: tuple[np.ndarray, np.ndarray],
    m0: np.ndarray,
    params: PhevParams,
    tgrid: TimeGrid,
    sgrid: SpaceGrid2D,
) -> np.ndarray:
    """Conservative upwind transport under (mu1 - beta g, mu2 - (1-beta) g)."""
    params.check_nodes(tgrid)
    mu1, mu2 = mu
    mass = integrate(np.asarray(m0, dtype=float), sgrid)
    if abs(mass - 1.0) > MASS_TOLERANCE:
        raise ValueError(f"initial density mass {mass} deviates from 1 beyond {MASS_TOLERANCE}")
    z1, z2 = sgrid.meshes()
    b = beta(z1, z2)
    m = np.empty((tgrid.n_nodes,) + sgrid.shape)
    m[0] = _check_density_slice(np.asarray(m0, dtype=float).copy(), 0)
    for i in range(tgrid.n_steps):
        g = params.g[i]
        drift1 = mu1[i] - b * g
        drift2 = mu2[i] - (1.0 - b) * g
        rate = _outflow_rate(drift1, 0, sgrid) + _outflow_rate(drift2, 1, sgrid)
        if not np.isfinite(rate):
            raise DivergenceError("non-finite drift in forward sweep", i + 1)
        n_sub = substep_count(tgrid.dt, rate)
        dt_sub = tgrid.dt / n_sub
        cur = m[i]
        for _ in range(n_sub):
            upd = -diff_upwind(cur, drift1, sgrid, axis=0) - diff_upwind(cur, drift2, sgrid, axis=1)
            cur = cur + dt_sub * upd
        m[i + 1] = _check_density_slice(cur, i + 1)
    return m


def _outflow_rate(drift: np.ndarray, axis: int, sgrid: SpaceGrid2D) -> float:
    """Worst-case per-cell outflow rate of the upwind flux along one axis."""
    d = np.moveaxis(drift, axis, 0)
    faces = 0.5 * (d[:-1] + d[1:])
    out = float(np.maximum(faces, 0.0).max(initial=0.0) + np.maximum(-faces, 0.0).max(initial=0.0))
    return out / sgrid.spacing(axis)


def phev_cost(
    mu: tuple[np.ndarray, np.ndarray],
    m: np.ndarray,
    prices: PhevPriceSeries,
    params: PhevParams,
    tgrid: TimeGrid,
    sgrid: SpaceGrid2D,
) -> float:
    """Population-averaged cost of a control pair along a density flow."""
    mu1, mu2 = mu
    if mu1.shape != m.shape or mu2.shape != m.shape:
        raise ValueError("mu and m shapes are inconsistent")
    z1, z2 = sgrid.meshes()
    t_nodes = tgrid.nodes
    total = 0.0
    for i in range(tgrid.n_steps):
        stage = (
            mu1[i] * prices.r1[i]
            + mu2[i] * prices.r2
            + 0.5 * params.Q1[i] * mu1[i] ** 2
            + 0.5 * params.Q2[i] * mu2[i] ** 2
            + params.s_cost(t_nodes[i], z1, z2)
        )
        total += tgrid.dt * integrate(m[i] * stage, sgrid)
    total += integrate(m[-1] * params.xi(z1, z2), sgrid)
    return float(total)


@dataclass
class PhevProblem:
    """Scenario instance wiring the hybrid operators to the fixed-point loop."""

    params: PhevParams
    tgrid: TimeGrid
    sgrid: SpaceGrid2D
    m0: np.ndarray
    name: str = field(default="phev")

    def __post_init__(self) -> None:
        self.m0 = np.asarray(self.m0, dtype=float)
        if self.m0.shape != self.sgrid.shape:
            raise ValueError("m0 does not match the space grid")
        self.params.check_nodes(self.tgrid)
        mass = integrate(self.m0, self.sgrid)
        if abs(mass - 1.0) > MASS_TOLERANCE:
            raise ValueError(f"initial density mass {mass} deviates from 1")

    @property
    def cell_volume(self) -> float:
        return self.sgrid.cell_volume

    def initial_iterate(self) -> np.ndarray:
        return np.tile(self.m0, (self.tgrid.n_nodes, 1, 1))

    def price(self, m: np.ndarray) -> PhevPriceSeries:
        return phev_price(m, self.params, self.sgrid, self.tgrid)

    def hjb(self, p: PhevPriceSeries) -> np.ndarray:
        return phev_hjb_backward_sweep(p, self.params, self.tgrid, self.sgrid)

    def control(self, v: np.ndarray, p: PhevPriceSeries) -> tuple[np.ndarray, np.ndarray]:
        return phev_optimal_controls(v, p, self.params, self.sgrid)

    def fpk(self, mu: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
        return phev_fpk_forward_sweep(mu, self.m0, self.params, self.tgrid, self.sgrid)

    def cost(self, mu: tuple[np.ndarray, np.ndarray], m: np.ndarray, p: PhevPriceSeries) -> float:
        return phev_cost(mu, m, p, self.params, self.tgrid, self.sgrid)

    def price_deviation(self, a: PhevPriceSeries, b: PhevPriceSeries) -> float:
        return max(float(np.abs(a.r1 - b.r1).max()), abs(a.r2 - b.r2))

"""The 1D electric-vehicle trading game.

State: battery level x in [0, 1], drained at the exogenous consumption rate
g_t, topped up (or sold down) at the controlled trading rate alpha, reflected
at the walls. The representative agent minimizes

    E integral_0^T (alpha p_t + H_t alpha^2 / 2 + f_t(x)) dt + kappa(x_T)

against the price p_t set by aggregate demand. The equilibrium couples:

  HJB (backward):  dv/dt = (dv/dx + p)^2 / (2H) + g dv/dx - f
                           - sigma^2 g^2 / 2 * d2v/dx2
  control:         alpha* = -(dv/dx + p) / H
  FPK (forward):   dm/dt = -d/dx[(alpha* - g) m] + sigma^2 g^2 / 2 * d2m/dx2
  price:           p = ([g + d/dt int x m]+ + d)^exponent

Sweeps are explicit with per-step substepping so every update stays a convex
combination (positivity and mass conservation are structural, not enforced).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DivergenceError
from .grids import SpaceGrid1D, TimeGrid
from .numerics import diff2, diff_central, diff_upwind, integrate, mean_rate, substep_count

# Roundoff negativity is clamped; anything beyond this is a scheme failure.
NEGATIVITY_HARD_LIMIT = 1e-8
MASS_TOLERANCE = 1e-6


@dataclass
class EvParams:
    """Model coefficients; all series carry one value per time node."""

    g: np.ndarray
    sigma: np.ndarray
    H: np.ndarray
    d: np.ndarray
    f_cost: Callable[[float, np.ndarray], np.ndarray]
    kappa: Callable[[np.ndarray], np.ndarray]
    price_exponent: float = 2.0
    demand_coupled: bool = True

    def __post_init__(self) -> None:
        self.g = np.atleast_1d(np.asarray(self.g, dtype=float))
        self.sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        self.H = np.atleast_1d(np.asarray(self.H, dtype=float))
        self.d = np.atleast_1d(np.asarray(self.d, dtype=float))
        n = len(self.g)
        for name in ("sigma", "H", "d"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"series {name} has length {len(getattr(self, name))}, expected {n}")
        if np.any(self.H <= 0.0):
            raise ValueError("H must be positive at every time node")
        if np.any(self.sigma < 0.0):
            raise ValueError("sigma must be nonnegative")

    def check_nodes(self, tgrid: TimeGrid) -> None:
        if len(self.g) != tgrid.n_nodes:
            raise ValueError(f"series length {len(self.g)} does not match {tgrid.n_nodes} time nodes")


def _check_density_slice(m: np.ndarray, time_node: int) -> np.ndarray:
    """Clamp roundoff negativity to zero; blow up on real scheme failure."""
    if not np.all(np.isfinite(m)):
        raise DivergenceError("density slice is not finite", time_node)
    low = float(m.min())
    if low < -NEGATIVITY_HARD_LIMIT:
        raise DivergenceError(f"density negativity {low:.3e} beyond roundoff", time_node)
    if low < 0.0:
        m = np.maximum(m, 0.0)
    return m


def ev_price(m: np.ndarray, params: EvParams, sgrid: SpaceGrid1D, tgrid: TimeGrid) -> np.ndarray:
    """Price series p_i = ([g_i + d/dt int x m]+ + d_i)^exponent.

    With ``demand_coupled`` off the vehicle demand term is zeroed, which
    makes the price a pure function of d (used to test the decoupled fixed
    point).
    """
    params.check_nodes(tgrid)
    if params.demand_coupled:
        rates = mean_rate(m, sgrid, tgrid)
        inner = np.maximum(params.g + rates, 0.0)
    else:
        inner = np.zeros(tgrid.n_nodes)
    return (inner + params.d) ** params.price_exponent


def optimal_control(v: np.ndarray, p: np.ndarray, params: EvParams, sgrid: SpaceGrid1D) -> np.ndarray:
    """Pointwise Hamiltonian minimizer alpha* = -(dv/dx + p) / H."""
    if np.any(params.H <= 0.0):
        raise ValueError("H must be positive")
    alpha = np.empty_like(v)
    for i in range(v.shape[0]):
        alpha[i] = -(diff_central(v[i], sgrid) + p[i]) / params.H[i]
    return alpha


def hjb_backward_sweep(p: np.ndarray, params: EvParams, tgrid: TimeGrid, sgrid: SpaceGrid1D) -> np.ndarray:
    """Explicit backward sweep of the value function, v(T, .) = kappa.

    Each step evaluates the right endpoint's coefficients and subdivides
    into equal substeps satisfying the advection/diffusion stability bound.
    """
    params.check_nodes(tgrid)
    x = sgrid.nodes
    dx = sgrid.dx
    v = np.empty((tgrid.n_nodes, sgrid.n_cells))
    v[-1] = params.kappa(x)
    t_nodes = tgrid.nodes
    for i in range(tgrid.n_steps - 1, -1, -1):
        j = i + 1
        g = params.g[j]
        diff = params.sigma[j] ** 2 * g ** 2  # twice the heat coefficient
        h = params.H[j]
        price = p[j]
        f_slice = params.f_cost(t_nodes[j], x)
        grad = diff_central(v[j], sgrid)
        speed = abs(g) + float(np.abs(grad + price).max()) / h
        rate = speed / dx + diff / dx ** 2
        if diff > 0.0:
            rate += speed ** 2 / diff  # cell Peclet bound for central advection
        if not np.isfinite(rate):
            raise DivergenceError("non-finite coefficients in backward sweep", i)
        n_sub = substep_count(tgrid.dt, rate)
        dt_sub = tgrid.dt / n_sub
        cur = v[j]
        for _ in range(n_sub):
            wx = diff_central(cur, sgrid)
            rhs = (wx + price) ** 2 / (2.0 * h) + g * wx - f_slice
            if diff > 0.0:
                rhs = rhs - 0.5 * diff * diff2(cur, sgrid)
            cur = cur - dt_sub * rhs
        if not np.all(np.isfinite(cur)):
            raise DivergenceError("value slice is not finite", i)
        v[i] = cur
    return v


def fpk_forward_sweep(
    alpha: np.ndarray, m0: np.ndarray, params: EvParams, tgrid: TimeGrid, sgrid: SpaceGrid1D
) -> np.ndarray:
    """Explicit forward density transport under the drift alpha - g."""
    params.check_nodes(tgrid)
    mass = integrate(np.asarray(m0, dtype=float), sgrid)
    if abs(mass - 1.0) > MASS_TOLERANCE:
        raise ValueError(f"initial density mass {mass} deviates from 1 beyond {MASS_TOLERANCE}")
    dx = sgrid.dx
    m = np.empty((tgrid.n_nodes, sgrid.n_cells))
    m[0] = _check_density_slice(np.asarray(m0, dtype=float).copy(), 0)
    for i in range(tgrid.n_steps):
        g = params.g[i]
        diff = params.sigma[i] ** 2 * g ** 2
        drift = alpha[i] - g
        faces = 0.5 * (drift[:-1] + drift[1:])
        outflow = float(np.maximum(faces, 0.0).max(initial=0.0) + np.maximum(-faces, 0.0).max(initial=0.0))
        rate = outflow / dx + diff / dx ** 2
        if not np.isfinite(rate):
            raise DivergenceError("non-finite drift in forward sweep", i + 1)
        n_sub = substep_count(tgrid.dt, rate)
        dt_sub = tgrid.dt / n_sub
        cur = m[i]
        for _ in range(n_sub):
            upd = -diff_upwind(cur, drift, sgrid)
            if diff > 0.0:
                upd = upd + 0.5 * diff * diff2(cur, sgrid)
            cur = cur + dt_sub * upd
        m[i + 1] = _check_density_slice(cur, i + 1)
    return m


def ev_cost(
    alpha: np.ndarray,
    m: np.ndarray,
    p: np.ndarray,
    params: EvParams,
    tgrid: TimeGrid,
    sgrid: SpaceGrid1D,
) -> float:
    """Population-averaged cost of a control field along a density flow."""
    if alpha.shape != m.shape or len(p) != m.shape[0]:
        raise ValueError("alpha, m and p shapes are inconsistent")
    x = sgrid.nodes
    t_nodes = tgrid.nodes
    total = 0.0
    for i in range(tgrid.n_steps):
        stage = alpha[i] * p[i] + 0.5 * params.H[i] * alpha[i] ** 2 + params.f_cost(t_nodes[i], x)
        total += tgrid.dt * integrate(m[i] * stage, sgrid)
    total += integrate(m[-1] * params.kappa(x), sgrid)
    return float(total)


@dataclass
class EvProblem:
    """Scenario instance wiring the EV operators to the fixed-point loop."""

    params: EvParams
    tgrid: TimeGrid
    sgrid: SpaceGrid1D
    m0: np.ndarray
    name: str = field(default="ev")

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
        return np.tile(self.m0, (self.tgrid.n_nodes, 1))

    def price(self, m: np.ndarray) -> np.ndarray:
        return ev_price(m, self.params, self.sgrid, self.tgrid)

    def hjb(self, p: np.ndarray) -> np.ndarray:
        return hjb_backward_sweep(p, self.params, self.tgrid, self.sgrid)

    def control(self, v: np.ndarray, p: np.ndarray) -> np.ndarray:
        return optimal_control(v, p, self.params, self.sgrid)

    def fpk(self, alpha: np.ndarray) -> np.ndarray:
        return fpk_forward_sweep(alpha, self.m0, self.params, self.tgrid, self.sgrid)

    def cost(self, alpha: np.ndarray, m: np.ndarray, p: np.ndarray) -> float:
        return ev_cost(alpha, m, p, self.params, self.tgrid, self.sgrid)

    def price_deviation(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.abs(np.asarray(a) - np.asarray(b)).max())

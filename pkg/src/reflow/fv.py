"""Independent upwind finite-volume discretization for cross-validation.

First-order upwind scheme on a uniform grid of [0, 1]. The transport speed is
nonlocal (a function of the instantaneous total mass) and is frozen over each
time step, so the update is a plain linear advection step with an inflow
boundary flux. Used to corroborate the characteristic solution; it converges
at first order in the mesh width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .laws import SpeedLaw
from .signals import ControlSignal, DensityProfile

__all__ = ["FvState", "CflError", "fv_step", "fv_solve"]


class CflError(RuntimeError):
    """Raised when a step would violate the CFL stability constraint."""

    def __init__(self, dt: float, required_dt: float):
        super().__init__(f"time step {dt} exceeds CFL limit {required_dt}")
        self.required_dt = required_dt


@dataclass
class FvState:
    """Cell averages on a uniform grid, together with the current time."""

    t: float
    cells: np.ndarray  # shape (n,)

    @property
    def dx(self) -> float:
        return 1.0 / self.cells.size

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.cells)) * self.dx

    @classmethod
    def from_profile(cls, rho0: DensityProfile, n: int) -> "FvState":
        edges = np.linspace(0.0, 1.0, n + 1)
        cum = rho0.cumulative(edges)
        return cls(t=0.0, cells=np.diff(cum) * n)


def fv_step(state: FvState, law: SpeedLaw, influx: float, dt: float,
            cfl: float = 0.9) -> FvState:
    """Advance one upwind step with the speed frozen at the current mass.

    ``influx`` is the boundary flux (mass per unit time) entering at x = 0,
    averaged over the step.
    """
    lam = float(law(state.total_mass))
    dx = state.dx
    if lam * dt > cfl * dx * (1.0 + 1e-12):
        raise CflError(dt, cfl * dx / lam)
    rho = state.cells
    flux = np.empty(rho.size + 1)
    flux[0] = influx
    flux[1:] = lam * rho
    new = rho - (dt / dx) * np.diff(flux)
    return FvState(t=state.t + dt, cells=new)


def fv_solve(rho0: DensityProfile, law: SpeedLaw, u: ControlSignal, T: float,
             n_cells: int, cfl: float = 0.9):
    """March to time T; returns the final state and the outflux time series.

    The step size is chosen from the global speed bound so the CFL condition
    holds uniformly; the boundary flux uses the exact step average of u, which
    makes the discrete mass balance exact.
    """
    state = FvState.from_profile(rho0, n_cells)
    M = u.integrate(0.0, T) + rho0.total_mass
    _, lam_max, _ = law.bounds(M)
    dt = cfl / (n_cells * lam_max)
    n_steps = int(np.ceil(T / dt))
    dt = T / n_steps
    times = np.empty(n_steps + 1)
    outflux = np.empty(n_steps + 1)
    times[0] = 0.0
    outflux[0] = float(law(state.total_mass)) * state.cells[-1]
    for k in range(n_steps):
        uin = u.integrate(k * dt, (k + 1) * dt) / dt
        state = fv_step(state, law, uin, dt, cfl=1.0)
        times[k + 1] = state.t
        outflux[k + 1] = float(law(state.total_mass)) * state.cells[-1]
    return state, times, outflux

"""Full weak solution assembled from the characteristic curve.

A trajectory evaluates the density pointwise by tracing back along
characteristics, and derives the total mass, outflux, backlog and regularity
diagnostics. Integral quantities (cumulative outflux, mass balance) are
computed from the solution formula itself rather than by quadrature of a
sampled trace, so they are exact up to the curve tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .characteristics import CharacteristicCurve, solve_xi
from .laws import SpeedLaw
from .signals import ControlSignal, DensityProfile

__all__ = ["Trajectory", "simulate"]

# 5-point Gauss-Legendre on [0, 1]
_N5 = np.array([0.04691007703066800, 0.23076534494715845, 0.5,
                0.76923465505284155, 0.95308992296933200])
_W5 = np.array([0.11846344252809454, 0.23931433524968324, 0.28444444444444444,
                0.23931433524968324, 0.11846344252809454])


def simulate(
    rho0: DensityProfile,
    law: SpeedLaw,
    T: float,
    *,
    u: ControlSignal | None = None,
    boundary_density: ControlSignal | None = None,
    tol: float = 1e-10,
    knots_per_window: int = 256,
) -> "Trajectory":
    """Solve the transport problem and wrap the result in a Trajectory."""
    xi = solve_xi(
        u, rho0, law, T,
        tol=tol,
        boundary_density=boundary_density,
        knots_per_window=knots_per_window,
    )
    return Trajectory(law=law, rho0=rho0, xi=xi, horizon=float(T),
                      u=u, boundary_density=boundary_density)


@dataclass(frozen=True)
class Trajectory:
    law: SpeedLaw
    rho0: DensityProfile
    xi: CharacteristicCurve
    horizon: float
    u: ControlSignal | None = None
    boundary_density: ControlSignal | None = None
    M: float = field(init=False)

    def __post_init__(self):
        if (self.u is None) == (self.boundary_density is None):
            raise ValueError("trajectory needs exactly one influx description")
        if self.boundary_density is not None:
            b = self.boundary_density
            z = np.maximum.accumulate(self.xi(b.breakpoints))
            keep = np.diff(z) > 0
            zb = np.concatenate((z[:1], z[1:][keep]))
            vb = b.values[keep]
            if zb.size < 2:
                zb, vb = np.array([0.0, np.inf]), np.array([0.0])
            object.__setattr__(self, "_zb", zb)
            object.__setattr__(self, "_vb", vb)
            object.__setattr__(self, "_zcum",
                               np.concatenate(([0.0], np.cumsum(vb * np.diff(zb)))))
            influx_total = float(self._boundary_cum(self.xi(self.horizon)))
        else:
            influx_total = self.u.integrate(0.0, self.horizon)
        object.__setattr__(self, "M", influx_total + self.rho0.total_mass)

    # -- influx bookkeeping ----------------------------------------------

    def _boundary_cum(self, z):
        """Boundary material (mass) that entered while the curve was below z."""
        zb, vb = self._zb, self._vb
        zc = np.clip(z, 0.0, zb[-1])
        idx = np.clip(np.searchsorted(zb, zc, side="right") - 1, 0, vb.size - 1)
        return self._zcum[idx] + (zc - zb[idx]) * vb[idx]

    def influx(self, t):
        """The influx u(t); derived from the boundary density when prescribed."""
        if self.u is not None:
            return self.u(t)
        return self.boundary_density(t) * self.law(self.total_mass(t))

    def cumulative_influx(self, t):
        if self.u is not None:
            return self.u.cumulative(t)
        return self._boundary_cum(self.xi(t))

    @property
    def exit_time(self) -> float | None:
        """Time the t = 0 boundary characteristic reaches x = 1, if it does."""
        if self.xi.x_end < 1.0:
            return None
        return self.xi.inverse(1.0)

    # -- primary observables ----------------------------------------------

    def total_mass(self, t):
        """W(t), the mass currently inside [0, 1]."""
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        xi_t = np.asarray(self.xi(t), dtype=float)
        if self.u is not None:
            U = np.atleast_1d(np.asarray(self.u.cumulative(t), dtype=float))
            W = U + np.atleast_1d(self.rho0.cumulative(1.0 - xi_t))
            post = xi_t > 1.0
            if np.any(post):
                sigma = self.xi.inverse(xi_t[post] - 1.0)
                W[post] = U[post] - self.u.cumulative(sigma)
        else:
            W = (self._boundary_cum(xi_t) - self._boundary_cum(xi_t - 1.0)
                 + self.rho0.cumulative(1.0 - xi_t))
        return float(W[0]) if scalar else np.asarray(W)

    def rho_at(self, t: float, x: float) -> float:
        """Density at (t, x); the interface x = xi(t) takes the inflow branch."""
        return float(self.slice_values(t, np.array([x]))[0])

    def slice_values(self, t: float, x) -> np.ndarray:
        """Density profile at time t evaluated on an array of positions."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        xi_t = self.xi(t)
        out = np.empty_like(x)
        ahead = x - xi_t
        init = ahead > 0
        out[init] = self.rho0(ahead[init])
        if np.any(~init):
            sigma = self.xi.inverse(xi_t - x[~init])
            if self.u is not None:
                out[~init] = self.u(sigma) / self.law(self.total_mass(sigma))
            else:
                out[~init] = self.boundary_density(sigma)
        return out

    def outflux(self, t):
        """y(t) = speed(W(t)) * rho(t, 1)."""
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        xi_t = self.xi(t)
        rho1 = np.empty_like(t)
        pre = xi_t <= 1.0
        rho1[pre] = self.rho0(1.0 - xi_t[pre])
        if np.any(~pre):
            sigma = self.xi.inverse(xi_t[~pre] - 1.0)
            if self.u is not None:
                rho1[~pre] = self.u(sigma) / self.law(self.total_mass(sigma))
            else:
                rho1[~pre] = self.boundary_density(sigma)
        y = self.law(self.total_mass(t)) * rho1
        return float(y[0]) if scalar else y

    def cumulative_outflux(self, t):
        """Exact accumulated outflux: mass that has left through x = 1."""
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        xi_t = np.asarray(self.xi(t), dtype=float)
        from_init = self.rho0.total_mass - np.atleast_1d(self.rho0.cumulative(1.0 - xi_t))
        if self.u is not None:
            from_boundary = np.zeros_like(xi_t)
            post = xi_t > 1.0
            if np.any(post):
                sigma = self.xi.inverse(xi_t[post] - 1.0)
                from_boundary[post] = self.u.cumulative(sigma)
        else:
            from_boundary = np.atleast_1d(self._boundary_cum(xi_t - 1.0))
        out = from_init + from_boundary
        return float(out[0]) if scalar else np.asarray(out)

    def w_derivative(self, t):
        """W'(t) = u(t) - y(t); one-sided values at data breakpoints."""
        return self.influx(t) - self.outflux(t)

    def backlog(self, y_d: ControlSignal, t: float) -> float:
        """Accumulated demand minus accumulated outflux at time t."""
        if t > min(y_d.horizon, self.horizon) + 1e-12:
            raise ValueError(f"t={t} beyond demand or trajectory horizon")
        return float(y_d.cumulative(t) - self.cumulative_outflux(t))

    # -- regularity diagnostics -------------------------------------------

    def _slice_breaks(self, t: float) -> np.ndarray:
        """Discontinuity positions of the density profile at time t."""
        xi_t = self.xi(t)
        breaks = [np.array([xi_t]), xi_t + self.rho0.breakpoints]
        taus = (self.u or self.boundary_density).breakpoints
        reachable = taus <= t
        breaks.append(xi_t - np.asarray(self.xi(taus[reachable]), dtype=float))
        xs = np.concatenate(breaks)
        return np.unique(xs[(xs > 0.0) & (xs < 1.0)])

    def _x_panels(self, breaks, max_width: float) -> np.ndarray:
        edges = np.unique(np.concatenate(([0.0, 1.0], breaks)))
        pieces = [
            np.linspace(a, b, max(2, int(np.ceil((b - a) / max_width)) + 1))
            for a, b in zip(edges[:-1], edges[1:])
        ]
        return np.unique(np.concatenate(pieces))

    def l1_slice_distance(self, s: float, t: float, *, max_width: float = 1e-3) -> float:
        """Integral over [0, 1] of |rho(s, x) - rho(t, x)|."""
        edges = self._x_panels(
            np.concatenate((self._slice_breaks(s), self._slice_breaks(t))), max_width
        )
        h = np.diff(edges)
        nodes = (edges[:-1, None] + h[:, None] * _N5[None, :]).ravel()
        diff = np.abs(self.slice_values(s, nodes) - self.slice_values(t, nodes))
        return float(np.sum(h * (diff.reshape(-1, 5) @ _W5)))

    def slice_lp_norm(self, t: float, p: int, *, max_width: float = 1e-3) -> float:
        """L^p norm of the density profile at time t (p in {1, 2})."""
        if p not in (1, 2):
            raise ValueError(f"unsupported exponent p={p}")
        edges = self._x_panels(self._slice_breaks(t), max_width)
        h = np.diff(edges)
        nodes = (edges[:-1, None] + h[:, None] * _N5[None, :]).ravel()
        vals = self.slice_values(t, nodes) ** p
        return float(np.sum(h * (vals.reshape(-1, 5) @ _W5)) ** (1.0 / p))

    def l1_time_distance(self, x1: float, x2: float, *, max_width: float = 1e-3) -> float:
        """Hidden-regularity dual: integral over [0, T] of |rho(t,x1) - rho(t,x2)|."""
        edges = self.time_panels(max_width=max_width * self.horizon)
        h = np.diff(edges)
        nodes = (edges[:-1, None] + h[:, None] * _N5[None, :]).ravel()
        v1 = np.array([self.rho_at(tt, x1) for tt in nodes])
        v2 = np.array([self.rho_at(tt, x2) for tt in nodes])
        diff = np.abs(v1 - v2)
        return float(np.sum(h * (diff.reshape(-1, 5) @ _W5)))

    # -- time quadrature ----------------------------------------------------

    def outflux_breaks(self) -> np.ndarray:
        """Times in (0, T) where the outflux (or influx) can jump."""
        events = []
        xiT = self.xi.x_end
        levels = 1.0 - self.rho0.breakpoints[1:-1]
        levels = levels[(levels > 0.0) & (levels < xiT)]
        if levels.size:
            events.append(np.asarray(self.xi.inverse(levels), dtype=float))
        if xiT > 1.0:
            events.append(np.array([self.xi.inverse(1.0)]))
        sig = self.u or self.boundary_density
        taus = sig.breakpoints[1:-1]
        events.append(taus)
        z = np.asarray(self.xi(taus), dtype=float) + 1.0
        z = z[z < xiT]
        if z.size:
            events.append(np.asarray(self.xi.inverse(z), dtype=float))
        ev = np.concatenate(events) if events else np.empty(0)
        return np.unique(ev[(ev > 0.0) & (ev < self.horizon)])

    def time_panels(self, extra=(), *, max_width: float | None = None) -> np.ndarray:
        """Quadrature edges in [0, T] aligned with all known jump times."""
        if max_width is None:
            max_width = self.horizon / 512.0
        breaks = np.concatenate((self.outflux_breaks(), np.asarray(extra, dtype=float)))
        breaks = breaks[(breaks > 0.0) & (breaks < self.horizon)]
        edges = np.unique(np.concatenate(([0.0, self.horizon], breaks)))
        pieces = [
            np.linspace(a, b, max(2, int(np.ceil((b - a) / max_width)) + 1))
            for a, b in zip(edges[:-1], edges[1:])
        ]
        return np.unique(np.concatenate(pieces))

    def tracking_error_sq(self, y_d: ControlSignal) -> float:
        """Integral over [0, T] of (y - y_d)^2, panel-exact Gauss quadrature."""
        edges = self.time_panels(extra=y_d.breakpoints)
        h = np.diff(edges)
        nodes = (edges[:-1, None] + h[:, None] * _N5[None, :]).ravel()
        r = (self.outflux(nodes) - y_d(nodes)) ** 2
        return float(np.sum(h * (r.reshape(-1, 5) @ _W5)))

    def influx_l2_sq(self) -> float:
        """Integral over [0, T] of u^2 (exact in flux mode)."""
        if self.u is not None:
            return self.u.lp_norm(2) ** 2
        edges = self.time_panels()
        h = np.diff(edges)
        nodes = (edges[:-1, None] + h[:, None] * _N5[None, :]).ravel()
        vals = (self.boundary_density(nodes) * self.law(self.total_mass(nodes))) ** 2
        return float(np.sum(h * (vals.reshape(-1, 5) @ _W5)))

    # -- export -------------------------------------------------------------

    def timeseries(self, n: int = 4096, y_d: ControlSignal | None = None):
        """(t, W, u, y, beta) arrays on a uniform grid."""
        t = np.linspace(0.0, self.horizon, n)
        W = self.total_mass(t)
        uu = np.asarray(self.influx(t), dtype=float)
        y = self.outflux(t)
        if y_d is not None:
            beta = y_d.cumulative(t) - self.cumulative_outflux(t)
        else:
            beta = np.zeros_like(t)
        return t, W, uu, y, beta

    def write_timeseries(self, path, n: int = 4096, y_d: ControlSignal | None = None):
        t, W, uu, y, beta = self.timeseries(n=n, y_d=y_d)
        data = np.column_stack((t, W, uu, y, beta))
        np.savetxt(path, data, delimiter=",", header="columns: t,W,u,y,beta")

    def write_slice(self, path, t: float, n: int = 1024):
        x = np.linspace(0.0, 1.0, n)
        data = np.column_stack((x, self.slice_values(t, x)))
        np.savetxt(path, data, delimiter=",", header="columns: x,rho")

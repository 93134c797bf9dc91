"""Characteristic curve through (0, 0) as the fixed point of an integral map.

The curve xi satisfies xi'(t) = speed(W(t)) where W is the total mass, and is
built window by window: on each window the integral map is a 1/2-contraction
provided the window is short enough that little mass can leave through x = 1,
so plain fixed-point iteration converges geometrically. Integrals of the
speed are evaluated by composite 3-point Gauss quadrature on a knot grid that
tracks the kink locations of the integrand (data breakpoints composed with
the curve, and the instant the curve reaches x = 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .laws import SpeedLaw
from .signals import ControlSignal, DensityProfile

__all__ = ["CharacteristicCurve", "SolverError", "apply_F", "solve_xi"]

# nodes/weights of 3-point Gauss-Legendre on [0, 1]
_G3_NODES = np.array([0.5 - np.sqrt(15.0) / 10.0, 0.5, 0.5 + np.sqrt(15.0) / 10.0])
_G3_WEIGHTS = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


class SolverError(RuntimeError):
    """Fixed-point iteration failed to converge (violated contraction premise)."""


# ---------------------------------------------------------------------------
# cubic Hermite evaluation on knot arrays (vectorized, no scipy dependency)
# ---------------------------------------------------------------------------

def _hermite_value(ts, xs, ss, t):
    t = np.asarray(t, dtype=float)
    if ts.size == 1:
        return np.full(t.shape, xs[0])
    tc = np.clip(t, ts[0], ts[-1])
    idx = np.clip(np.searchsorted(ts, tc, side="right") - 1, 0, ts.size - 2)
    h = ts[idx + 1] - ts[idx]
    th = (tc - ts[idx]) / h
    t2 = th * th
    t3 = t2 * th
    return (
        (2 * t3 - 3 * t2 + 1) * xs[idx]
        + (t3 - 2 * t2 + th) * h * ss[idx]
        + (-2 * t3 + 3 * t2) * xs[idx + 1]
        + (t3 - t2) * h * ss[idx + 1]
    )


def _hermite_slope(ts, xs, ss, t):
    t = np.asarray(t, dtype=float)
    if ts.size == 1:
        return np.full(t.shape, ss[0])
    tc = np.clip(t, ts[0], ts[-1])
    idx = np.clip(np.searchsorted(ts, tc, side="right") - 1, 0, ts.size - 2)
    h = ts[idx + 1] - ts[idx]
    th = (tc - ts[idx]) / h
    t2 = th * th
    return (
        (6 * t2 - 6 * th) * (xs[idx] - xs[idx + 1]) / h
        + (3 * t2 - 4 * th + 1) * ss[idx]
        + (3 * t2 - 2 * th) * ss[idx + 1]
    )


def _invert_monotone(ts, xs, ss, x, *, tol=1e-13):
    """Times where the increasing Hermite curve equals ``x`` (vectorized)."""
    x = np.asarray(x, dtype=float)
    t = np.interp(x, xs, ts)
    for _ in range(60):
        f = _hermite_value(ts, xs, ss, t) - x
        d = _hermite_slope(ts, xs, ss, t)
        step = f / np.maximum(d, 1e-300)
        t = np.clip(t - step, ts[0], ts[-1])
        if np.max(np.abs(step)) <= tol:
            break
    # bisection fallback for any point Newton left unresolved
    bad = np.abs(_hermite_value(ts, xs, ss, t) - x) > 1e-11 * max(1.0, xs[-1])
    if np.any(bad):
        t = np.atleast_1d(t)
        for i in np.flatnonzero(np.atleast_1d(bad)):
            lo, hi = ts[0], ts[-1]
            xi_target = np.atleast_1d(x)[i] if x.ndim else float(x)
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if _hermite_value(ts, xs, ss, mid) < xi_target:
                    lo = mid
                else:
                    hi = mid
            t[i] = 0.5 * (lo + hi)
        t = t if x.ndim else float(t[0])
    return t


@dataclass(frozen=True)
class CharacteristicCurve:
    """Strictly increasing curve given by knot times, values and slopes.

    Between knots the curve is the cubic Hermite interpolant; slopes are the
    transport speed at the knot, so secants stay inside the speed envelope.
    """

    times: np.ndarray
    values: np.ndarray
    slopes: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.times, dtype=float)
        xs = np.asarray(self.values, dtype=float)
        ss = np.asarray(self.slopes, dtype=float)
        if not (ts.shape == xs.shape == ss.shape) or ts.size < 2:
            raise ValueError("knot arrays must share a shape of length >= 2")
        if np.any(np.diff(ts) <= 0) or np.any(np.diff(xs) <= 0):
            raise ValueError("knot times and values must be strictly increasing")
        if np.any(ss <= 0):
            raise ValueError("knot slopes must be positive")
        object.__setattr__(self, "times", ts)
        object.__setattr__(self, "values", xs)
        object.__setattr__(self, "slopes", ss)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def x_end(self) -> float:
        return float(self.values[-1])

    def __call__(self, t):
        out = _hermite_value(self.times, self.values, self.slopes, t)
        return float(out) if np.ndim(t) == 0 else out

    def slope(self, t):
        out = _hermite_slope(self.times, self.values, self.slopes, t)
        return float(out) if np.ndim(t) == 0 else out

    def inverse(self, x):
        """Unique t with curve(t) = x, for x in [curve(0), curve(T)]."""
        xa = np.asarray(x, dtype=float)
        if np.any(xa < self.values[0] - 1e-12) or np.any(xa > self.values[-1] + 1e-12):
            raise ValueError(f"position {x} outside curve range "
                             f"[{self.values[0]:g}, {self.values[-1]:g}]")
        out = _invert_monotone(self.times, self.values, self.slopes, xa)
        return float(out) if np.ndim(x) == 0 else np.asarray(out)

    def sample(self, n: int):
        """(t, xi, xi') on a uniform grid of n points, for export."""
        t = np.linspace(self.times[0], self.times[-1], n)
        return t, self(t), self.slope(t)

    def restricted(self, t_hi: float) -> "CharacteristicCurve":
        """Copy truncated to [times[0], t_hi] (t_hi must be beyond the first knot)."""
        k = int(np.searchsorted(self.times, t_hi, side="left"))
        ts = self.times[:k]
        if ts.size == 0 or ts[-1] < t_hi - 1e-15:
            ts = np.append(ts, t_hi)
            xs = np.append(self.values[: ts.size - 1], self(t_hi))
            ss = np.append(self.slopes[: ts.size - 1], self.slope(t_hi))
        else:
            xs, ss = self.values[:k], self.slopes[:k]
        return CharacteristicCurve(ts, xs, ss)


# ---------------------------------------------------------------------------
# mass models: total mass W(s) as a functional of the candidate curve
# ---------------------------------------------------------------------------

def _step_cumulative(breaks, values, x):
    """Cumulative integral of a step function given by (breaks, values)."""
    cum = np.concatenate(([0.0], np.cumsum(values * np.diff(breaks))))
    xc = np.clip(x, breaks[0], breaks[-1])
    idx = np.clip(np.searchsorted(breaks, xc, side="right") - 1, 0, values.size - 1)
    return cum[idx] + (xc - breaks[idx]) * values[idx]


class _FluxSource:
    """Prescribed influx u(t): the classical boundary condition."""

    def __init__(self, u: ControlSignal, rho0: DensityProfile):
        self.u = u
        self.rho0 = rho0
        self.mass_bound = u.lp_norm(1) + rho0.lp_norm(1)

    def mass(self, s, xi_s, prefix: CharacteristicCurve, xi_of=None):
        """W at times s where the candidate curve takes values xi_s.

        Post-exit (xi > 1) the entry time of the particle now at x = 1 is
        found by inverting the frozen prefix; window lengths below 1/sup-speed
        guarantee that entry time lies in the prefix.
        """
        s = np.asarray(s, dtype=float)
        xi_s = np.asarray(xi_s, dtype=float)
        U = self.u.cumulative(s)
        W = U + self.rho0.cumulative(1.0 - xi_s)
        post = xi_s > 1.0
        if np.any(post):
            sigma = _invert_monotone(
                prefix.times, prefix.values, prefix.slopes, xi_s[post] - 1.0
            )
            W[post] = U[post] - self.u.cumulative(sigma)
        return W

    # kink levels of the integrand in xi-space (see _window_knots)
    def xi_levels(self, prefix: CharacteristicCurve):
        levels = [1.0 - self.rho0.breakpoints[1:-1], np.array([1.0])]
        inside = self.u.breakpoints[self.u.breakpoints <= prefix.t_end]
        if inside.size:
            levels.append(1.0 + prefix(inside))
        return np.concatenate(levels)

    def time_knots(self, t_a, t_b):
        bp = self.u.breakpoints
        return bp[(bp > t_a) & (bp < t_b)]

    def slice_tail_mass(self, prefix: CharacteristicCurve, width: float) -> float:
        xa = prefix.x_end
        total = self.rho0.integrate(
            min(max(1.0 - xa - width, 0.0), 1.0), min(max(1.0 - xa, 0.0), 1.0)
        )
        z_lo = max(xa - 1.0, 0.0)
        z_hi = min(max(xa - 1.0 + width, 0.0), xa)
        if z_hi > z_lo:
            s_lo = _invert_monotone(prefix.times, prefix.values, prefix.slopes, z_lo)
            s_hi = _invert_monotone(prefix.times, prefix.values, prefix.slopes, z_hi)
            total += self.u.integrate(float(s_lo), float(s_hi))
        return total

    def extra_window_cap(self, d: float) -> float:
        return np.inf


class _BoundaryDensitySource:
    """Prescribed boundary density b(t); the influx u = b * speed is derived.

    Material entering at time tau carries density b(tau), so the cumulative
    influx up to s equals the integral of b over the curve measure, which is
    exactly the cumulative of the step function b composed with the inverse
    curve, expressed in position space.
    """

    def __init__(self, b: ControlSignal, rho0: DensityProfile, mass_bound: float):
        self.b = b
        self.rho0 = rho0
        self.mass_bound = mass_bound
        bv = b.values
        self._tv = float(np.max(bv) + np.sum(np.abs(np.diff(bv))))

    def _z_breaks(self, xi_of):
        """Breakpoints of b mapped to positions via the candidate curve."""
        z = xi_of(self.b.breakpoints)
        return np.maximum.accumulate(z)

    def mass(self, s, xi_s, prefix, xi_of=None):
        xi_s = np.asarray(xi_s, dtype=float)
        if xi_of is None:
            xi_of = prefix
        z = self._z_breaks(xi_of)
        ok = np.diff(z) > 0
        zb = np.concatenate((z[:1], z[1:][ok]))
        vb = self.b.values[ok] if zb.size > 1 else self.b.values[:1]
        if zb.size < 2:  # curve has not advanced: no boundary mass yet
            boundary_in = np.zeros_like(xi_s)
            boundary_out = np.zeros_like(xi_s)
        else:
            boundary_in = _step_cumulative(zb, vb, xi_s)
            boundary_out = _step_cumulative(zb, vb, xi_s - 1.0)
        W = boundary_in + self.rho0.cumulative(1.0 - xi_s)
        post = xi_s > 1.0
        return np.where(post, boundary_in - boundary_out, W)

    def xi_levels(self, prefix: CharacteristicCurve):
        levels = [1.0 - self.rho0.breakpoints[1:-1], np.array([1.0])]
        inside = self.b.breakpoints[self.b.breakpoints <= prefix.t_end]
        if inside.size:
            levels.append(1.0 + prefix(inside))
        return np.concatenate(levels)

    def time_knots(self, t_a, t_b):
        bp = self.b.breakpoints
        return bp[(bp > t_a) & (bp < t_b)]

    def slice_tail_mass(self, prefix: CharacteristicCurve, width: float) -> float:
        xa = prefix.x_end
        total = self.rho0.integrate(
            min(max(1.0 - xa - width, 0.0), 1.0), min(max(1.0 - xa, 0.0), 1.0)
        )
        z_lo = max(xa - 1.0, 0.0)
        z_hi = min(max(xa - 1.0 + width, 0.0), xa)
        if z_hi > z_lo:
            z = self._z_breaks(prefix)
            total += float(
                _step_cumulative(z, self.b.values, z_hi)
                - _step_cumulative(z, self.b.values, z_lo)
            )
        return total

    def extra_window_cap(self, d: float) -> float:
        # the derived influx depends on the candidate curve itself; keep the
        # extra Lipschitz term of the window map below 1/4
        if d <= 0 or self._tv <= 0:
            return np.inf
        return 0.25 / (d * self._tv)


# ---------------------------------------------------------------------------
# window machinery
# ---------------------------------------------------------------------------

def _merge_knots(base, extra, t_a, t_b):
    knots = np.concatenate((base, extra))
    knots = knots[(knots >= t_a) & (knots <= t_b)]
    knots = np.unique(np.concatenate((knots, [t_a, t_b])))
    keep = np.concatenate(([True], np.diff(knots) > 1e-13 * max(1.0, t_b)))
    return knots[keep]


def _window_knots(source, prefix, cand, t_a, t_b, n_uniform, max_events=512):
    """Knot grid: uniform refinement + time breakpoints + curve-crossing events."""
    base = np.linspace(t_a, t_b, n_uniform + 1)
    extra = [source.time_knots(t_a, t_b)]
    levels = source.xi_levels(prefix)
    x_a = cand[1][0]
    x_b = cand[1][-1]
    levels = levels[(levels > x_a) & (levels < x_b)]
    if 0 < levels.size <= max_events:
        ts, xs, ss = cand
        extra.append(np.atleast_1d(_invert_monotone(ts, xs, ss, levels)))
    return _merge_knots(base, np.concatenate(extra), t_a, t_b)


def _integrate_window(source, law, prefix, cand, knots):
    """One application of the window map on the given knot grid.

    Returns (values, slopes, W at knots) of the mapped curve.
    """
    ts, xs, ss = cand
    x_a = _hermite_value(ts, xs, ss, knots[0])
    h = np.diff(knots)
    nodes = (knots[:-1, None] + h[:, None] * _G3_NODES[None, :]).ravel()
    xi_nodes = _hermite_value(ts, xs, ss, nodes)

    def xi_of(t):
        t = np.asarray(t, dtype=float)
        below = t <= prefix.t_end
        out = np.empty_like(t)
        out[below] = prefix(t[below])
        out[~below] = _hermite_value(ts, xs, ss, np.minimum(t[~below], ts[-1]))
        return out

    W_nodes = source.mass(nodes, xi_nodes, prefix, xi_of=xi_of)
    g = law(W_nodes).reshape(-1, 3)
    increments = h * (g @ _G3_WEIGHTS)
    values = x_a + np.concatenate(([0.0], np.cumsum(increments)))
    W_knots = source.mass(knots, values, prefix, xi_of=xi_of)
    return values, law(W_knots), W_knots


def _solve_window(source, law, prefix, t_a, t_b, tol, n_uniform, max_iter):
    """Fixed-point iteration of the window map starting from the linear guess."""
    x_a = prefix.x_end
    s_a = prefix.slopes[-1]
    cand = (
        np.array([t_a, t_b]),
        np.array([x_a, x_a + s_a * (t_b - t_a)]),
        np.array([s_a, s_a]),
    )
    resid = np.inf
    for _ in range(max_iter):
        knots = _window_knots(source, prefix, cand, t_a, t_b, n_uniform)
        old = _hermite_value(cand[0], cand[1], cand[2], knots)
        values, slopes, _ = _integrate_window(source, law, prefix, cand, knots)
        resid = float(np.max(np.abs(values - old)))
        cand = (knots, values, slopes)
        if resid <= 0.5 * tol:
            return cand
    raise SolverError(
        f"window [{t_a:g}, {t_b:g}] did not converge: residual {resid:.3e} "
        f"after {max_iter} iterations (tol {tol:g})"
    )


def _choose_window(source, law, prefix, M, T):
    """Largest admissible window length at the current front time."""
    lam_tilde, lam_bar, d = law.bounds(M)
    t_a = prefix.t_end
    delta = min(0.9 / lam_bar, T - t_a, source.extra_window_cap(d))
    if d == 0:
        return delta, True
    threshold = 0.5 * lam_tilde / d
    for _ in range(200):
        if source.slice_tail_mass(prefix, lam_bar * delta) < 0.99 * threshold:
            return delta, False
        delta *= 0.5
    raise SolverError("could not find an admissible window length")


def solve_xi(
    u: ControlSignal | None,
    rho0: DensityProfile,
    law: SpeedLaw,
    T: float,
    tol: float = 1e-10,
    *,
    boundary_density: ControlSignal | None = None,
    knots_per_window: int = 256,
    max_iter: int = 80,
) -> CharacteristicCurve:
    """Characteristic curve through (0, 0) on [0, T].

    Exactly one of ``u`` (prescribed influx) and ``boundary_density``
    (prescribed density at x = 0, influx derived) must be given. The curve is
    built by window-by-window fixed-point continuation; each window satisfies
    the tail-mass contraction criterion evaluated on the current state.
    """
    if (u is None) == (boundary_density is None):
        raise ValueError("provide exactly one of u and boundary_density")
    if T <= 0:
        raise ValueError(f"horizon must be positive, got T={T}")
    if tol <= 0:
        raise ValueError("tol must be positive")

    if u is not None:
        if u.horizon < T - 1e-12:
            raise ValueError(f"control horizon {u.horizon} shorter than T={T}")
        source = _FluxSource(u, rho0)
    else:
        b = boundary_density
        if b.horizon < T - 1e-12:
            raise ValueError(f"boundary-density horizon {b.horizon} shorter than T={T}")
        source = _BoundaryDensitySource(b, rho0, _boundary_mass_bound(b, rho0, law, T))

    M = source.mass_bound
    W0 = rho0.total_mass
    ts = np.array([0.0])
    xs = np.array([0.0])
    ss = np.array([float(law(W0))])

    eps = 1e-12 * max(1.0, T)
    while ts[-1] < T - eps:
        prefix = _Prefix(ts, xs, ss)
        delta, constant_law = _choose_window(source, law, prefix, M, T)
        t_b = min(ts[-1] + delta, T)
        if constant_law:
            # speed constant on [0, M]: the curve is exactly linear
            t_b = T
            ts = np.append(ts, t_b)
            xs = np.append(xs, xs[-1] + ss[-1] * (t_b - ts[-2]))
            ss = np.append(ss, ss[-1])
            break
        knots, values, slopes = _solve_window(
            source, law, prefix, ts[-1], t_b, tol, knots_per_window, max_iter
        )
        if knots.size < 2 or knots[-1] <= ts[-1]:
            break  # remainder below knot resolution; closed by the snap below
        ts = np.concatenate((ts, knots[1:]))
        xs = np.concatenate((xs, values[1:]))
        ss = np.concatenate((ss, slopes[1:]))
        # keep the joint consistent with the converged window
        ss[ts.size - knots.size] = slopes[0]
    if ts[-1] < T:
        # extend the last knot across the sub-tolerance remainder
        xs[-1] += ss[-1] * (T - ts[-1])
        ts[-1] = T
    return CharacteristicCurve(ts, xs, ss)


class _Prefix(CharacteristicCurve):
    """Already-computed part of the curve (skips revalidation for speed)."""

    def __init__(self, ts, xs, ss):  # noqa: D107 - thin wrapper
        object.__setattr__(self, "times", ts)
        object.__setattr__(self, "values", xs)
        object.__setattr__(self, "slopes", ss)


def _boundary_mass_bound(b, rho0, law, T) -> float:
    """A priori bound on total input mass when the influx is derived from b."""
    base = rho0.lp_norm(1)
    M = base
    for _ in range(200):
        lam_bar = law.bounds(M)[1]
        M_new = base + lam_bar * b.lp_norm(1)
        if abs(M_new - M) <= 1e-12 * (1.0 + M):
            return M_new
        M = M_new
    return M


def apply_F(
    xi: CharacteristicCurve,
    u: ControlSignal,
    rho0: DensityProfile,
    law: SpeedLaw,
    window: tuple[float, float],
    *,
    knots_per_window: int = 256,
) -> CharacteristicCurve:
    """One application of the integral map to ``xi`` on ``window``.

    ``xi`` must be defined on [0, window end]. Returns the mapped curve on the
    window; its value at the window start equals xi there.
    """
    t_a, t_b = float(window[0]), float(window[1])
    if not (0.0 <= t_a < t_b):
        raise ValueError(f"invalid window [{t_a}, {t_b}]")
    if t_b > u.horizon + 1e-12:
        raise ValueError(f"window end {t_b} exceeds control horizon {u.horizon}")
    if t_b > xi.t_end + 1e-12:
        raise ValueError(f"window end {t_b} exceeds curve domain {xi.t_end}")
    source = _FluxSource(u, rho0)
    cand = (xi.times, xi.values, xi.slopes)
    knots = _window_knots(source, xi, cand, t_a, t_b, knots_per_window)
    values, slopes, _ = _integrate_window(source, law, xi, cand, knots)
    return CharacteristicCurve(knots, values, slopes)

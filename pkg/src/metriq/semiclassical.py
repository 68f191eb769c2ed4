"""Orbit areas and Bohr-Sommerfeld levels.

In a chart whose level sets are closed curves around an interior minimum the
area is taken as ``1/2 oint r^2 dphi`` over rays cast from the minimum.  In
the polar action-angle chart the level set is a graph ``c1 = f(c2)`` over the
angle period and the area is ``int f dc2``.  Both use the trapezoid rule in
the periodic variable, doubled until converged.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize

from .config import GlobalConfig
from .errors import (DiscretizationWarning, EnergyBelowMinimum, NonSimpleContour,
                     RootNotBracketed)
from .phase import POLAR, ClassicalObservable, get_chart, transport

_RAYS0, _RAYS_MAX = 64, 16384
_BISECT = 64
_SCAN = 48


@dataclass(frozen=True)
class OrbitArea:
    energy: float
    area: float
    n_turning: int
    chart_id: str
    n_rays: int = 0


def _minimum(H: ClassicalObservable) -> tuple[np.ndarray, float]:
    f = lambda x: float(H.values(x[0], x[1]))
    best = None
    for x0 in ((0.0, 0.0), (0.5, 0.5), (-0.5, 0.3), (0.3, -0.7)):
        r = minimize(f, np.array(x0), method="BFGS", options={"gtol": 1e-12})
        if best is None or r.fun < best.fun:
            best = r
    x = best.x
    # polish with Nelder-Mead so non-smooth evaluators still land on the floor
    r = minimize(f, x, method="Nelder-Mead", options={"xatol": 1e-13, "fatol": 1e-15})
    if r.fun < best.fun:
        x = r.x
    return np.asarray(x, float), f(x)


def _bisect(f, lo, hi):
    """Vectorised bisection for ``f(lo) < 0 < f(hi)``."""
    for _ in range(_BISECT):
        mid = 0.5 * (lo + hi)
        neg = f(mid) < 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    return 0.5 * (lo + hi)


def _ray_radii(H, x0, E, phi, scale):
    c, s = np.cos(phi), np.sin(phi)
    f = lambda r: H.values(x0[0] + r * c, x0[1] + r * s) - E
    hi = np.full(phi.shape, scale)
    for _ in range(80):
        out = f(hi) > 0
        if out.all():
            break
        hi = np.where(out, hi, 2.0 * hi)
    else:
        raise NonSimpleContour(f"level set H = {E:g} is not closed along every ray")
    # crossing count: exactly one sign change on every ray
    t = np.linspace(0.0, 1.0, _SCAN + 1)[1:]
    vals = f(hi[None, :] * t[:, None]) > 0
    changes = np.count_nonzero(vals[1:] != vals[:-1], axis=0)
    if np.any(changes > 1):
        raise NonSimpleContour(f"level set H = {E:g} crosses a ray more than once "
                               "(several wells or a non-star-shaped orbit)")
    k = np.argmax(vals, axis=0)
    lo = np.where(k > 0, hi * t[k - 1], 0.0)
    return _bisect(f, lo, hi * t[k])


def _far_scan(H, x0, E, r_exit, phi, reach=4.0, n=256):
    """Reject a second component of ``{H <= E}`` beyond the orbit along the rays."""
    c, s = np.cos(phi), np.sin(phi)
    t = np.linspace(1.0, reach, n)[1:]
    R = r_exit[None, :] * t[:, None]
    inside = H.values(x0[0] + R * c, x0[1] + R * s) < E
    if np.any(inside):
        k = np.argwhere(inside)[0]
        raise NonSimpleContour(f"level set H = {E:g} has another component near radius "
                               f"{R[k[0], k[1]]:.3g} from the minimum (several wells)")


def _turning_points(q: np.ndarray) -> int:
    d = np.sign(np.diff(np.append(q, q[0])))
    d = d[d != 0]
    return int(np.count_nonzero(d != np.roll(d, 1)))


def _star_area(H, E, x0, chart_id, rtol):
    scale = 1.0
    n, prev = _RAYS0, None
    while True:
        phi = 2.0 * math.pi * np.arange(n) / n
        r = _ray_radii(H, x0, E, phi, scale)
        if prev is None:
            _far_scan(H, x0, E, r * (1.0 + 1e-9), phi)
        area = 0.5 * float(np.mean(r * r)) * 2.0 * math.pi
        if prev is not None and abs(area - prev) <= rtol * area:
            break
        if 2 * n > _RAYS_MAX:
            warnings.warn(f"orbit area not converged to {rtol:g} with {n} rays",
                          DiscretizationWarning, stacklevel=3)
            break
        prev, n = area, 2 * n
        scale = float(np.median(r))
    c1, c2 = x0[0] + r * np.cos(phi), x0[1] + r * np.sin(phi)
    p, q = get_chart(chart_id).to_cartesian(c1, c2)
    return OrbitArea(E, area, _turning_points(np.asarray(q)), chart_id, n)


def _polar_floor(H, n=256) -> float:
    ang = np.linspace(-math.pi, math.pi, n, endpoint=False)
    return float(H.values(np.full(n, 1e-12), ang).max())


def _polar_area(H, E, rtol):
    e0 = _polar_floor(H)
    if E <= e0:
        raise EnergyBelowMinimum(f"E = {E:g} does not exceed the value {e0:g} at the origin")
    n, prev = _RAYS0, None
    while True:
        ang = -math.pi + 2.0 * math.pi * (np.arange(n) + 0.5) / n
        f = lambda a: H.values(a, ang) - E
        hi = np.ones(n)
        for _ in range(80):
            out = f(hi) > 0
            if out.all():
                break
            hi = np.where(out, hi, 2.0 * hi)
        else:
            raise NonSimpleContour(f"level set H = {E:g} is not a graph over the angle")
        t = np.linspace(0.0, 1.0, _SCAN + 1)[1:]
        vals = f(hi[None, :] * t[:, None]) > 0
        if np.any(np.count_nonzero(vals[1:] != vals[:-1], axis=0) > 1):
            raise NonSimpleContour(f"level set H = {E:g} meets an angle line more than once")
        k = np.argmax(vals, axis=0)
        pt = _bisect(f, hi * np.where(k > 0, t[k - 1], 1e-300), hi * t[k])
        area = float(np.mean(pt)) * 2.0 * math.pi
        if prev is not None and abs(area - prev) <= rtol * area:
            break
        if 2 * n > _RAYS_MAX:
            warnings.warn(f"orbit area not converged to {rtol:g} with {n} angles",
                          DiscretizationWarning, stacklevel=3)
            break
        prev, n = area, 2 * n
    p, q = get_chart(POLAR).to_cartesian(pt, ang)
    return OrbitArea(E, area, _turning_points(np.asarray(q)), POLAR, n)


def energy_floor(H: ClassicalObservable) -> float:
    if H.chart_id == POLAR:
        return _polar_floor(H)
    return _minimum(H)[1]


def orbit_area(H: ClassicalObservable, E: float, rtol: float = 1e-12, _floor=None) -> OrbitArea:
    """``oint c1 dc2`` around the closed level set ``H = E``, in ``H``'s chart."""
    if H.chart_id == POLAR:
        return _polar_area(H, E, rtol)
    x0, e0 = _floor or _minimum(H)
    if E <= e0:
        raise EnergyBelowMinimum(f"E = {E:g} is not above the minimum {e0:g}")
    return _star_area(H, E, x0, H.chart_id, rtol)


def bohr_sommerfeld_levels(H: ClassicalObservable, n_max: int, cfg: GlobalConfig | None = None,
                           e_max: float | None = None) -> list[float]:
    """Energies with ``area(E_n) = (n + 1/2) 2 pi hbar`` for ``n = 0..n_max``."""
    return [lv.energy for lv in bohr_sommerfeld(H, n_max, cfg, e_max)]


@dataclass(frozen=True)
class Level:
    n: int
    energy: float
    area_residual: float


def bohr_sommerfeld(H: ClassicalObservable, n_max: int, cfg: GlobalConfig | None = None,
                    e_max: float | None = None) -> list[Level]:
    cfg = cfg or GlobalConfig()
    two_pi_hbar = 2.0 * math.pi * cfg.hbar
    floor = None
    if H.chart_id == POLAR:
        e0 = _polar_floor(H)
        area = lambda E: orbit_area(H, E).area
    else:
        floor = _minimum(H)
        e0 = floor[1]
        area = lambda E: orbit_area(H, E, _floor=floor).area
    scale = max(1.0, abs(e0))
    levels = []
    lo = e0
    for n in range(n_max + 1):
        target = (n + 0.5) * two_pi_hbar
        g = lambda E: (area(E) - target if E > e0 else -target)
        step = max(cfg.hbar, 1e-3 * scale)
        hi = lo + step
        while g(hi) <= 0:
            lo, step = hi, 2.0 * step
            hi = lo + step
            if (e_max is not None and hi > e_max) or step > 1e12 * scale:
                raise RootNotBracketed(f"level {n} not bracketed below E = {hi:g}")
        E = brentq(g, lo, hi, xtol=1e-15 * scale, rtol=4 * np.finfo(float).eps, maxiter=200)
        res = g(E)
        if abs(res) > 1e-8 * two_pi_hbar:
            raise RootNotBracketed(f"level {n}: area residual {res:.2e} above tolerance")
        levels.append(Level(n, float(E), float(res)))
        lo = E
    return levels


def count_levels_below(H: ClassicalObservable, E: float, cfg: GlobalConfig | None = None) -> int:
    """Number of ``n >= 0`` with ``(n + 1/2) 2 pi hbar < area(E)``."""
    cfg = cfg or GlobalConfig()
    x = orbit_area(H, E).area / (2.0 * math.pi * cfg.hbar) - 0.5
    return max(0, math.floor(x) + 1) if x >= 0 else 0


def area_invariance_check(H: ClassicalObservable, chart_a, chart_b, E: float) -> float:
    """Relative difference of the orbit areas of ``H = E`` computed in two charts."""
    a = orbit_area(transport(H, H.chart_id, chart_a), E).area
    b = orbit_area(transport(H, H.chart_id, chart_b), E).area
    return abs(a - b) / a

"""One-form, symplectic form and metric induced by the coherent-state map.

All derivatives of states are central finite differences of the Fock
coefficients; nothing here uses the closed-form kernel, so these routines
check the state construction independently.

Metric convention: ``g`` is symmetric with ``dsigma^2 = g11 dc1^2 +
2 g12 dc1 dc2 + g22 dc2^2``, i.e. the off-diagonal entry is half the
``dc1 dc2`` coefficient.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .coherent import FiducialSpec, action_radius2, weyl_vectors, working_dim
from .config import GlobalConfig
from .errors import DiscretizationWarning, DomainError
from .fock import variances, weyl_apply
from .phase import CARTESIAN, Chart, PhaseSpacePoint, get_chart, to_cartesian

_EPS = np.finfo(float).eps
_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def default_step(x: float) -> float:
    return _EPS ** (1.0 / 3.0) * (1.0 + abs(x))


def _steps(p, q, step):
    hp = step if step else default_step(p)
    hq = step if step else default_step(q)
    if max(hp, hq) > 1e-2:
        warnings.warn(f"finite-difference step {max(hp, hq):g} is large; derivatives are "
                      "only first-order accurate", DiscretizationWarning, stacklevel=3)
    return hp, hq


def _stencil_states(p, q, hp, hq, fid, cfg, G=None, eta=None):
    """States at the centre and at ``(p +- hp, q)``, ``(p, q +- hq)``."""
    P = np.array([p, p + hp, p - hp, p, p])
    Q = np.array([q, q, q, q + hq, q - hq])
    if eta is None:
        z2 = float(action_radius2(abs(p) + hp, abs(q) + hq, fid.omega, cfg.hbar))
        n = working_dim(cfg.fock_dim, z2)
        return weyl_vectors(P, Q, fid, cfg, out_dim=n, G=G)
    V = weyl_apply(P, Q, eta, cfg.hbar, fid.omega)
    if G is not None:
        V = V * np.exp(-1j * np.asarray(G(P, Q), float) / cfg.hbar)[None, :]
    return V


def _derivs(p, q, fid, cfg, step, G=None, eta=None):
    hp, hq = _steps(p, q, step)
    V = _stencil_states(p, q, hp, hq, fid, cfg, G, eta)
    psi = V[:, 0]
    dp = (V[:, 1] - V[:, 2]) / (2 * hp)
    dq = (V[:, 3] - V[:, 4]) / (2 * hq)
    return psi, dp, dq


def _cart(pt) -> tuple[float, float]:
    if isinstance(pt, PhaseSpacePoint):
        pt = to_cartesian(pt)
        return pt.c1, pt.c2
    return float(pt[0]), float(pt[1])


def one_form(pt, fid: FiducialSpec | None = None, cfg: GlobalConfig | None = None,
             step: float | None = None, G: Callable | None = None) -> np.ndarray:
    """``(theta_p, theta_q)`` with ``theta = i hbar <psi|d psi>`` in Cartesian labels."""
    fid, cfg = fid or FiducialSpec(), cfg or GlobalConfig()
    p, q = _cart(pt)
    psi, dp, dq = _derivs(p, q, fid, cfg, step, G)
    return np.real(1j * cfg.hbar * np.array([np.vdot(psi, dp), np.vdot(psi, dq)]))


def symplectic_form(pt, fid: FiducialSpec | None = None, cfg: GlobalConfig | None = None,
                    step: float = 1e-3, G: Callable | None = None) -> float:
    """Coefficient of ``dp ^ dq`` in ``d theta``, by differencing ``one_form``."""
    p, q = _cart(pt)
    s = step * np.arange(-2, 3)
    tq = np.array([one_form((p + x, q), fid, cfg, None, G)[1] for x in s])
    tp = np.array([one_form((p, q + x), fid, cfg, None, G)[0] for x in s])
    return float((_D1 @ tq - _D1 @ tp) / step)


def symplectic_form_direct(pt, fid: FiducialSpec | None = None, cfg: GlobalConfig | None = None,
                           step: float | None = None) -> float:
    """``-2 hbar Im <d_p psi | d_q psi>``, the same two-form without nesting."""
    fid, cfg = fid or FiducialSpec(), cfg or GlobalConfig()
    psi, dp, dq = _derivs(*_cart(pt), fid, cfg, step)
    return float(-2.0 * cfg.hbar * np.vdot(dp, dq).imag)


def _metric_from(psi, dp, dq, hbar) -> np.ndarray:
    D = [dp, dq]
    g = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            c = np.vdot(D[i], D[j]) - np.vdot(D[i], psi) * np.vdot(psi, D[j])
            g[i, j] = 2.0 * hbar**2 * c.real
    return 0.5 * (g + g.T)


def metric(pt, fid: FiducialSpec | None = None, cfg: GlobalConfig | None = None,
           step: float | None = None) -> np.ndarray:
    """``2 hbar^2 [ ||d psi||^2 - |<psi|d psi>|^2 ]`` as a Cartesian 2x2 matrix."""
    fid, cfg = fid or FiducialSpec(), cfg or GlobalConfig()
    return _metric_from(*_derivs(*_cart(pt), fid, cfg, step), cfg.hbar)


def metric_for_vector(eta: np.ndarray, pt, cfg: GlobalConfig | None = None,
                      step: float | None = None) -> np.ndarray:
    """Metric of the family ``e^{-iqP} e^{ipQ} eta`` for an arbitrary fiducial.

    ``eta`` is given in the number basis and should be padded generously; the
    metric is the same at every point for any fiducial.
    """
    cfg = cfg or GlobalConfig()
    eta = np.asarray(eta, complex)
    return _metric_from(*_derivs(*_cart(pt), FiducialSpec(), cfg, step, eta=eta), cfg.hbar)


@dataclass(frozen=True)
class FiducialMoments:
    varQ: float
    varP: float
    cross: float

    @classmethod
    def of_vector(cls, eta, cfg: GlobalConfig, omega: float = 1.0) -> "FiducialMoments":
        return cls(*variances(eta, cfg, omega))


def fiducial_moments(fid: FiducialSpec | None = None, cfg: GlobalConfig | None = None) -> FiducialMoments:
    fid, cfg = fid or FiducialSpec(), cfg or GlobalConfig()
    eta = np.zeros(cfg.fock_dim, complex)
    eta[0] = 1.0
    return FiducialMoments.of_vector(eta, cfg, fid.omega)


def moment_metric(m: FiducialMoments) -> np.ndarray:
    """Metric predicted by the fiducial's second moments.

    ``dsigma^2 = 2 <dQ^2> dp^2 - 2 <{dQ, dP}> dp dq + 2 <dP^2> dq^2``; the
    factor 2 makes the Omega = 1 case equal to ``hbar (dp^2 + dq^2)``.
    """
    return np.array([[2.0 * m.varQ, -m.cross], [-m.cross, 2.0 * m.varP]])


def _chart_point(chart: Chart, pt) -> PhaseSpacePoint:
    if isinstance(pt, PhaseSpacePoint):
        if pt.chart_id == chart.id:
            return pt
        pt = to_cartesian(pt)
        if not chart.contains(pt.c1, pt.c2):
            raise DomainError(f"point outside the {chart.id!r} chart domain")
        c1, c2 = chart.from_cartesian(pt.c1, pt.c2)
        return PhaseSpacePoint(float(c1), float(c2), chart.id)
    return PhaseSpacePoint(float(pt[0]), float(pt[1]), chart.id)


def metric_in_chart(chart, pt, fid: FiducialSpec | None = None, cfg: GlobalConfig | None = None,
                    step: float | None = None) -> np.ndarray:
    """Pullback ``J^T g J`` of the Cartesian metric, ``J = d(p,q)/d(c1,c2)``."""
    chart = get_chart(chart)
    cp = _chart_point(chart, pt)
    g = metric(to_cartesian(cp), fid, cfg, step)
    J = chart.jacobian(cp.c1, cp.c2)
    return J.T @ g @ J


def symplectic_in_chart(chart, pt, fid: FiducialSpec | None = None,
                        cfg: GlobalConfig | None = None) -> float:
    """Coefficient of ``dc1 ^ dc2``: ``omega_pq * det J``."""
    chart = get_chart(chart)
    cp = _chart_point(chart, pt)
    w = symplectic_form(to_cartesian(cp), fid, cfg)
    return float(w * np.linalg.det(chart.jacobian(cp.c1, cp.c2)))


def gaussian_curvature(metric_fn: Callable, u: float, v: float, h: float = 0.05) -> float:
    """Brioschi formula from metric samples on a 5x5 stencil around ``(u, v)``.

    ``metric_fn(u, v)`` returns the symmetric 2x2 matrix ``[[E, F], [F, G]]``.
    """
    off = h * np.arange(-2, 3)
    S = np.array([[metric_fn(u + a, v + b) for b in off] for a in off])
    E, F, G = S[..., 0, 0], S[..., 0, 1], S[..., 1, 1]

    def du(A):
        return _D1 @ A[:, 2] / h

    def dv(A):
        return A[2, :] @ _D1 / h

    Ec, Fc, Gc = E[2, 2], F[2, 2], G[2, 2]
    Eu, Ev, Fu, Fv, Gu, Gv = du(E), dv(E), du(F), dv(F), du(G), dv(G)
    Evv = E[2, :] @ _D2 / h**2
    Guu = _D2 @ G[:, 2] / h**2
    Fuv = _D1 @ F @ _D1 / h**2
    M1 = np.array([[-0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev],
                   [Fv - 0.5 * Gu, Ec, Fc],
                   [0.5 * Gv, Fc, Gc]])
    M2 = np.array([[0.0, 0.5 * Ev, 0.5 * Gu],
                   [0.5 * Ev, Ec, Fc],
                   [0.5 * Gu, Fc, Gc]])
    return float((np.linalg.det(M1) - np.linalg.det(M2)) / (Ec * Gc - Fc * Fc) ** 2)


@dataclass(frozen=True)
class GeometryReport:
    point: PhaseSpacePoint
    theta: tuple
    omega_pq: float
    metric: np.ndarray
    chart_id: str

    def row(self) -> list:
        g = self.metric
        return [self.point.c1, self.point.c2, g[0, 0], g[0, 1], g[1, 1],
                self.theta[0], self.theta[1], self.omega_pq]


def geometry_report(pt, chart=CARTESIAN, fid: FiducialSpec | None = None,
                    cfg: GlobalConfig | None = None) -> GeometryReport:
    """theta, omega and metric at ``pt``, all expressed in ``chart`` coordinates."""
    chart = get_chart(chart)
    cp = _chart_point(chart, pt)
    cart = to_cartesian(cp)
    J = chart.jacobian(cp.c1, cp.c2)
    theta = J.T @ one_form(cart, fid, cfg)
    w = symplectic_form(cart, fid, cfg) * float(np.linalg.det(J))
    g = J.T @ metric(cart, fid, cfg) @ J
    if np.linalg.eigvalsh(g).min() <= 0:
        raise DomainError(f"metric is degenerate at {cp.as_tuple()} in chart {chart.id!r}")
    return GeometryReport(cp, (float(theta[0]), float(theta[1])), w, g, chart.id)


def flatness(fid: FiducialSpec | None = None, cfg: GlobalConfig | None = None,
             centre=(0.3, -0.2), h: float = 0.25) -> float:
    """Gaussian curvature of the Cartesian metric field at ``centre``."""
    return gaussian_curvature(lambda a, b: metric((a, b), fid, cfg), centre[0], centre[1], h)

"""Canonical coherent states, their overlap kernel and phase-space quadrature.

States are built as ``e^{-iG/hbar} e^{-iqP/hbar} e^{ipQ/hbar} eta`` with the
exponentials taken from eigendecompositions of ``Q`` and ``P``.  The work is
done in a padded number basis sized to the displacement, so the returned
leading components agree with the infinite-dimensional ones.  The analytic
coefficient formula is deliberately not used here; the tests use it as an
oracle.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .config import GlobalConfig
from .errors import FiducialMismatch, InvalidParameter, TailTruncation
from .fock import FockOperator, FockVector, weyl_apply
from .phase import PhaseSpacePoint, to_cartesian

_CHUNK = 2048


@dataclass(frozen=True)
class FiducialSpec:
    omega: float = 1.0
    centered: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise InvalidParameter(f"omega must be positive, got {self.omega}")

    def require_centered(self):
        if not self.centered:
            raise InvalidParameter("only centered fiducials are supported by the builtin path")


@dataclass(frozen=True, eq=False)
class CoherentState:
    point: PhaseSpacePoint
    fiducial: FiducialSpec
    gauge_phase: float
    vec: FockVector
    hbar: float

    @property
    def coeffs(self) -> np.ndarray:
        return self.vec.coeffs


def action_radius2(p, q, omega: float, hbar: float):
    """``|z|^2`` for ``z = (Omega q + i p) / sqrt(2 Omega hbar)``."""
    p, q = np.asarray(p, float), np.asarray(q, float)
    return (omega * q * q + p * p / omega) / (2.0 * hbar)


def working_dim(n_out: int, z2max: float) -> int:
    z = math.sqrt(max(z2max, 0.0))
    return max(n_out + 8, math.ceil(z2max + 10.0 * z + 20.0))


def _gauge_values(G, p, q):
    if G is None:
        return np.zeros(np.broadcast(p, q).shape)
    if callable(G):
        return np.asarray(G(p, q), float) * np.ones(np.broadcast(p, q).shape)
    return np.full(np.broadcast(p, q).shape, float(G))


def weyl_vectors(p, q, fid: FiducialSpec, cfg: GlobalConfig, out_dim: int | None = None,
                 G=None) -> np.ndarray:
    """Columns ``|p_k, q_k>`` truncated to ``out_dim`` leading components.

    ``G`` may be a constant, an array matching ``p`` or a callable ``G(p, q)``.
    """
    fid.require_centered()
    p = np.atleast_1d(np.asarray(p, float)).ravel()
    q = np.atleast_1d(np.asarray(q, float)).ravel()
    out_dim = out_dim or cfg.fock_dim
    z2 = action_radius2(p, q, fid.omega, cfg.hbar)
    nw = working_dim(out_dim, float(z2.max(initial=0.0)))
    eta = np.zeros(nw, complex)
    eta[0] = 1.0
    out = np.empty((out_dim, p.size), complex)
    for s in range(0, p.size, _CHUNK):
        sl = slice(s, s + _CHUNK)
        out[:, sl] = weyl_apply(p[sl], q[sl], eta, cfg.hbar, fid.omega, out_dim)
    g = _gauge_values(G, p, q) if not isinstance(G, np.ndarray) else np.ravel(G)
    if np.any(g != 0):
        out *= np.exp(-1j * g / cfg.hbar)[None, :]
    return out


def coherent_state(pt: PhaseSpacePoint, fid: FiducialSpec | None = None, G=0.0,
                   cfg: GlobalConfig | None = None) -> CoherentState:
    """The coherent state at ``pt`` with gauge ``G`` (a number or ``G(p, q)``).

    Points in other charts are relabelled to Cartesian first; the vector
    depends only on the phase-space point.  Raises ``TailTruncation`` if more
    than ``1e-10`` of the norm lies outside the interior block.
    """
    fid = fid or FiducialSpec()
    cfg = cfg or GlobalConfig()
    pt = to_cartesian(pt)
    g = float(_gauge_values(G, pt.c1, pt.c2))
    z2 = float(action_radius2(pt.c1, pt.c2, fid.omega, cfg.hbar))
    nw = working_dim(cfg.fock_dim, z2)
    full = weyl_vectors([pt.c1], [pt.c2], fid, cfg, out_dim=nw, G=g)[:, 0]
    tail = float(np.sum(np.abs(full[cfg.interior:]) ** 2))
    if tail > 1e-10:
        raise TailTruncation(
            f"point ({pt.c1:g}, {pt.c2:g}) leaves {tail:.2e} of its norm outside the "
            f"{cfg.interior}-dim interior block; increase fock_dim")
    return CoherentState(pt, fid, g, FockVector(full[: cfg.fock_dim]), cfg.hbar)


def kernel(p2, q2, p1, q1, fid: FiducialSpec | None = None, hbar: float = 1.0):
    """Closed-form ``<p2, q2 | p1, q1>`` for zero gauge (vectorised)."""
    om = (fid or FiducialSpec()).omega
    p2, q2, p1, q1 = (np.asarray(x, float) for x in (p2, q2, p1, q1))
    dp, dq = p2 - p1, q2 - q1
    return np.exp(0.5j / hbar * (p2 + p1) * dq - (dp * dp / om + om * dq * dq) / (4.0 * hbar))


def overlap(a: CoherentState, b: CoherentState) -> complex:
    """``<a|b>``; equals ``e^{i G_a/hbar} e^{-i G_b/hbar}`` times the kernel."""
    if a.fiducial != b.fiducial or a.hbar != b.hbar or a.vec.dim != b.vec.dim:
        raise FiducialMismatch("states were built with different fiducials or settings")
    return complex(np.vdot(a.coeffs, b.coeffs))


def kernel_table(pairs: Iterable, fid: FiducialSpec | None = None, hbar: float = 1.0) -> list:
    """Rows ``(p2, q2, p1, q1, re, im)`` for ``pairs`` of ``((p2, q2), (p1, q1))``."""
    rows = []
    for (p2, q2), (p1, q1) in pairs:
        k = complex(kernel(p2, q2, p1, q1, fid, hbar))
        rows.append((p2, q2, p1, q1, k.real, k.imag))
    return rows


def write_kernel_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p2", "q2", "p1", "q1", "re", "im"])
        for r in rows:
            w.writerow([repr(float(x)) for x in r])


@dataclass(frozen=True, eq=False)
class PhaseSpaceQuadrature:
    """Nodes and weights for ``int f dp dq / (2 pi hbar)`` over a disk.

    ``rho`` holds each node's radius in the grid's own (possibly
    Omega-scaled) radial variable, used by the Gaussian self-calibration.
    """

    p: np.ndarray
    q: np.ndarray
    weights: np.ndarray
    rho: np.ndarray
    scheme: str
    radius: float
    hbar: float
    spec: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("p", "q", "weights", "rho"):
            a = np.array(getattr(self, name), float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def nodes(self) -> list:
        return list(zip(self.p.tolist(), self.q.tolist(), self.weights.tolist()))

    def __len__(self):
        return self.p.size

    def integrate(self, values) -> complex | float:
        return np.sum(self.weights * np.asarray(values))

    def calibration_defect(self) -> float:
        """``|sum w exp(-rho^2 / 2 hbar) - 1|``; zero for an exact rule."""
        return float(abs(self.integrate(np.exp(-self.rho**2 / (2.0 * self.hbar))) - 1.0))

    def to_json(self) -> dict:
        return dict(self.spec)


def default_quadrature(cfg: GlobalConfig, fid: FiducialSpec | None = None,
                       radius_sigmas: float = 10.0, n_radial: int = 120, n_angular: int = 120,
                       anisotropic: bool = True) -> PhaseSpaceQuadrature:
    """Gauss-Legendre in the radius times the trapezoid rule in the angle.

    With ``anisotropic`` the disk is stretched to the fiducial's ellipse,
    ``p = sqrt(Omega) r cos(phi)``, ``q = r sin(phi) / sqrt(Omega)``, so that
    ``r`` counts standard deviations of the coherent-state envelope in every
    direction.  Otherwise a round disk of radius
    ``radius_sigmas * sqrt(hbar * max(Omega, 1/Omega))`` is used.
    """
    fid = fid or FiducialSpec()
    if radius_sigmas < 6:
        raise InvalidParameter(f"radius_sigmas must be >= 6, got {radius_sigmas}")
    if n_radial < 2 or n_angular < 3:
        raise InvalidParameter("need at least 2 radial and 3 angular nodes")
    om, hbar = fid.omega, cfg.hbar
    if anisotropic:
        R, sp, sq = radius_sigmas * math.sqrt(hbar), math.sqrt(om), 1.0 / math.sqrt(om)
    else:
        R, sp, sq = radius_sigmas * math.sqrt(hbar * max(om, 1.0 / om)), 1.0, 1.0
    x, wx = np.polynomial.legendre.leggauss(n_radial)
    r = 0.5 * R * (x + 1.0)
    wr = 0.5 * R * wx * r
    phi = 2.0 * math.pi * np.arange(n_angular) / n_angular
    rr, pp = np.meshgrid(r, phi, indexing="ij")
    w = np.outer(wr, np.full(n_angular, 2.0 * math.pi / n_angular)) / (2.0 * math.pi * hbar)
    spec = {"scheme": "disk-gl", "radius_sigmas": radius_sigmas, "nodes_radial": n_radial,
            "nodes_angular": n_angular, "anisotropic": anisotropic, "omega": om, "hbar": hbar}
    return PhaseSpaceQuadrature(
        p=(sp * rr * np.cos(pp)).ravel(), q=(sq * rr * np.sin(pp)).ravel(),
        weights=w.ravel(), rho=rr.ravel(), scheme="disk-gl", radius=R, hbar=hbar, spec=spec)


def quadrature_from_json(data, cfg: GlobalConfig, fid: FiducialSpec | None = None) -> PhaseSpaceQuadrature:
    if isinstance(data, str):
        data = json.loads(data)
    if data.get("scheme", "disk-gl") != "disk-gl":
        raise InvalidParameter(f"unknown quadrature scheme {data.get('scheme')!r}")
    return default_quadrature(cfg, fid, radius_sigmas=data.get("radius_sigmas", 10.0),
                              n_radial=data.get("nodes_radial", 120),
                              n_angular=data.get("nodes_angular", 120),
                              anisotropic=data.get("anisotropic", True))


def frame_operator(quad: PhaseSpaceQuadrature, fid: FiducialSpec, cfg: GlobalConfig,
                   dim: int, values=None) -> np.ndarray:
    """``sum_k w_k f_k |p_k q_k><p_k q_k|`` on the leading ``dim`` components.

    Chunks are accumulated in node order, so the result does not depend on
    anything but the quadrature.
    """
    f = np.ones(len(quad)) if values is None else np.asarray(values, float)
    wf = quad.weights * f
    out = np.zeros((dim, dim), complex)
    for s in range(0, len(quad), _CHUNK):
        sl = slice(s, s + _CHUNK)
        V = weyl_vectors(quad.p[sl], quad.q[sl], fid, cfg, out_dim=dim)
        out += (V * wf[sl]) @ V.conj().T
    return out


def resolution_of_unity_defect(quad: PhaseSpaceQuadrature, fid: FiducialSpec | None = None,
                               cfg: GlobalConfig | None = None, block: int | None = None) -> float:
    """Largest entry of ``|sum w |pq><pq| - I|`` on the interior block."""
    fid = fid or FiducialSpec()
    cfg = cfg or GlobalConfig()
    block = block or cfg.interior
    if block > cfg.fock_dim:
        raise TailTruncation(f"block {block} exceeds fock_dim {cfg.fock_dim}")
    S = frame_operator(quad, fid, cfg, block)
    return float(np.abs(S - np.eye(block)).max())


def upper_symbol(H: FockOperator, pt: PhaseSpacePoint, fid: FiducialSpec | None = None,
                 cfg: GlobalConfig | None = None) -> float:
    """``<p,q|H|p,q>``."""
    cfg = cfg or GlobalConfig(fock_dim=H.dim)
    if H.dim != cfg.fock_dim:
        raise InvalidParameter(f"operator dim {H.dim} does not match fock_dim {cfg.fock_dim}")
    v = coherent_state(pt, fid, 0.0, cfg).coeffs
    val = np.vdot(v, H.entries @ v)
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise InvalidParameter(f"upper symbol has imaginary part {val.imag:.3g}; operator not hermitian")
    return float(val.real)


def upper_symbols(H: FockOperator, p, q, fid: FiducialSpec | None = None,
                  cfg: GlobalConfig | None = None) -> np.ndarray:
    """Vectorised upper symbol without the per-point tail check."""
    fid = fid or FiducialSpec()
    cfg = cfg or GlobalConfig(fock_dim=H.dim)
    V = weyl_vectors(p, q, fid, cfg, out_dim=H.dim)
    return np.real(np.einsum("ik,ij,jk->k", V.conj(), H.entries, V))


def _pq(x) -> tuple[float, float]:
    if isinstance(x, PhaseSpacePoint):
        x = to_cartesian(x)
        return x.c1, x.c2
    return float(x[0]), float(x[1])


def kernel_chain_defect(b, a, quad: PhaseSpaceQuadrature, fid: FiducialSpec | None = None,
                        cfg: GlobalConfig | None = None) -> float:
    """``|K(b;a) - sum_k w_k K(b;k) K(k;a)|`` with the closed-form kernel."""
    fid = fid or FiducialSpec()
    hbar = (cfg or GlobalConfig()).hbar
    (p2, q2), (p1, q1) = _pq(b), _pq(a)
    direct = kernel(p2, q2, p1, q1, fid, hbar)
    chain = quad.integrate(kernel(p2, q2, quad.p, quad.q, fid, hbar)
                           * kernel(quad.p, quad.q, p1, q1, fid, hbar))
    return float(abs(direct - chain))


def symbol_grid(fn: Callable, extent: float, n: int):
    """Evaluate ``fn(p, q)`` on an ``n x n`` grid over ``[-extent, extent]^2``."""
    g = np.linspace(-extent, extent, n)
    P, Q = np.meshgrid(g, g, indexing="ij")
    return P, Q, fn(P.ravel(), Q.ravel()).reshape(P.shape)

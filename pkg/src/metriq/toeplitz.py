"""Lower-symbol (Toeplitz / anti-Wick) quantization."""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .coherent import (FiducialSpec, PhaseSpaceQuadrature, default_quadrature, frame_operator,
                       upper_symbols)
from .config import GlobalConfig
from .errors import ChartMismatch, DiscretizationWarning, UnsupportedObservable
from .fock import FockOperator, Spectrum, polynomial_operator, spectrum
from .phase import CARTESIAN, ClassicalObservable


class Cond3(str, enum.Enum):
    SEMIBOUNDED_EVEN_LEADING = "semibounded_even_leading"
    INDEFINITE = "indefinite"
    UNKNOWN = "unknown"


_CAVEAT = ("essential self-adjointness is not verified; the leading-form test is a "
           "semiboundedness heuristic only")


@dataclass(frozen=True)
class AdmissibilityReport:
    cond1: bool | None
    cond2: bool | None
    cond3_heuristic: Cond3
    notes: str

    def to_json(self) -> dict:
        return {"cond1": self.cond1, "cond2": self.cond2,
                "cond3_heuristic": self.cond3_heuristic.value, "notes": self.notes}


def leading_form(h: ClassicalObservable):
    d = h.degree
    return d, [(c, i, j) for c, i, j in h.terms if i + j == d and c != 0.0]


def admissibility(h: ClassicalObservable, n_angles: int = 7200) -> AdmissibilityReport:
    """Screen ``h`` against the growth conditions and the semiboundedness heuristic.

    Polynomials always satisfy the two integrability conditions, since a
    Gaussian weight dominates any polynomial.  Evaluator observables get
    ``None`` / ``unknown`` because nothing can be said from samples.
    """
    if not h.is_polynomial:
        return AdmissibilityReport(None, None, Cond3.UNKNOWN,
                                   "evaluator observable: conditions not checked; " + _CAVEAT)
    d, lead = leading_form(h)
    if not lead:
        return AdmissibilityReport(True, True, Cond3.SEMIBOUNDED_EVEN_LEADING, "h = 0; " + _CAVEAT)
    phi = np.linspace(-math.pi, math.pi, n_angles, endpoint=False)
    c, s = np.cos(phi), np.sin(phi)
    vals = sum(k * c**i * s**j for k, i, j in lead)
    scale = max(abs(k) for k, _, _ in lead)
    semibounded = d % 2 == 0 and vals.min() >= -1e-12 * scale
    cond3 = Cond3.SEMIBOUNDED_EVEN_LEADING if semibounded else Cond3.INDEFINITE
    return AdmissibilityReport(True, True, cond3, f"leading degree {d}; " + _CAVEAT)


def radius_for_degree(d: int) -> float:
    return 10.0 + 2.0 * d


def quadrature_for(h: ClassicalObservable, cfg: GlobalConfig, fid: FiducialSpec,
                   n_radial: int = 120, n_angular: int = 120) -> PhaseSpaceQuadrature:
    d = h.degree if h.is_polynomial else 4
    return default_quadrature(cfg, fid, radius_for_degree(d), n_radial, n_angular)


def toeplitz_quantize(h: ClassicalObservable, quad: PhaseSpaceQuadrature | None = None,
                      fid: FiducialSpec | None = None, cfg: GlobalConfig | None = None) -> FockOperator:
    """``int h(p,q) |p,q><p,q| dp dq / 2 pi hbar`` on the truncated basis."""
    fid = fid or FiducialSpec()
    cfg = cfg or GlobalConfig()
    if h.chart_id != CARTESIAN:
        raise ChartMismatch(f"observable is written in {h.chart_id!r}; transport it to "
                            "'cartesian' before quantizing")
    quad = quad or quadrature_for(h, cfg, fid)
    if h.is_polynomial:
        need = radius_for_degree(h.degree)
        have = quad.spec.get("radius_sigmas", need)
        if have < need:
            warnings.warn(f"quadrature radius {have} sigmas is below {need} for degree {h.degree}",
                          DiscretizationWarning, stacklevel=2)
    A = frame_operator(quad, fid, cfg, cfg.fock_dim, h.values(quad.p, quad.q))
    return FockOperator(0.5 * (A + A.conj().T), h.label or "toeplitz")


def upper_of_toeplitz_gap(h: ClassicalObservable, quad: PhaseSpaceQuadrature | None = None,
                          fid: FiducialSpec | None = None, cfg: GlobalConfig | None = None,
                          extent: float = 2.0, n: int = 9):
    """Grid ``(p, q, <pq|Toeplitz(h)|pq> - h(p,q))`` on ``[-extent, extent]^2``."""
    fid = fid or FiducialSpec()
    cfg = cfg or GlobalConfig()
    T = toeplitz_quantize(h, quad, fid, cfg)
    g = np.linspace(-extent, extent, n)
    P, Q = (a.ravel() for a in np.meshgrid(g, g, indexing="ij"))
    gap = upper_symbols(T, P, Q, fid, cfg) - h.values(P, Q)
    return P, Q, gap


def min_interior_eigenvalue(A: FockOperator, block: int) -> float:
    return float(np.linalg.eigvalsh(A.block(block)).min())


def weyl_symbol(h: ClassicalObservable, fid: FiducialSpec | None = None,
                hbar: float = 1.0) -> ClassicalObservable:
    """Weyl symbol of ``Toeplitz(h)`` for polynomial Cartesian ``h``.

    Smoothing by the fiducial's Wigner function:
    ``exp(1/2 (s_p d_p^2 + s_q d_q^2)) h`` with ``s_p = hbar Omega / 2`` and
    ``s_q = hbar / 2 Omega``.  The series is finite on polynomials.
    """
    fid = fid or FiducialSpec()
    if h.chart_id != CARTESIAN:
        raise ChartMismatch(f"observable is written in {h.chart_id!r}, expected 'cartesian'")
    if not h.is_polynomial:
        raise UnsupportedObservable("the Weyl symbol is only formed for polynomials")
    sp, sq = 0.5 * hbar * fid.omega, 0.5 * hbar / fid.omega
    out: dict = {}
    for c, i, j in h.terms:
        # (s/2 d^2)^k / k! acting on x^i gives i!/(i-2k)! (s/2)^k / k! x^(i-2k)
        for a in range(i // 2 + 1):
            ca = math.factorial(i) / (math.factorial(i - 2 * a) * math.factorial(a)) * (sp / 2) ** a
            for b in range(j // 2 + 1):
                cb = math.factorial(j) / (math.factorial(j - 2 * b) * math.factorial(b)) * (sq / 2) ** b
                key = (i - 2 * a, j - 2 * b)
                out[key] = out.get(key, 0.0) + c * ca * cb
    terms = tuple((v, i, j) for (i, j), v in sorted(out.items()) if v != 0.0)
    return ClassicalObservable(terms, CARTESIAN, label=h.label)


def toeplitz_spectrum(h: ClassicalObservable, k: int, quad: PhaseSpaceQuadrature | None = None,
                      fid: FiducialSpec | None = None, cfg: GlobalConfig | None = None,
                      tol: float = 1e-6) -> Spectrum:
    """Low spectrum of ``Toeplitz(h)`` with a truncation-drift flag.

    The values come from the quadrature-built operator.  The reference at
    ``2N`` is the Weyl operator of the smoothed symbol, which equals
    ``Toeplitz(h)`` exactly and needs no quadrature that covers ``2N`` states.
    """
    fid, cfg = fid or FiducialSpec(), cfg or GlobalConfig()
    H = toeplitz_quantize(h, quad, fid, cfg)
    W2 = polynomial_operator(weyl_symbol(h, fid, cfg.hbar).terms,
                             cfg.replace(fock_dim=2 * cfg.fock_dim), fid.omega)
    return spectrum(H, k, doubled=W2, tol=tol)

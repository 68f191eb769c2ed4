"""Truncated Fock-space linear algebra.

The number basis ``|n>`` is generated from the fiducial ``eta`` (annihilated by
``Omega Q + i P``) so that, with ``a`` the lowering operator,

    Q = sqrt(hbar / 2 Omega) (a + a^dag),   P = i sqrt(hbar Omega / 2) (a^dag - a).

Matrices built from polynomials are assembled in a slightly larger space and
cropped, so their ``N x N`` entries equal those of the infinite operator.
Only the commutator itself (and products formed after truncation) feel the
edge of the basis.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy.special import comb

from .config import GlobalConfig
from .errors import InvalidParameter, NotHermitian


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FockOperator:
    entries: np.ndarray
    label: str = ""

    def __post_init__(self):
        a = _frozen(self.entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidParameter(f"operator must be square, got shape {a.shape}")
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def hermitian_defect(self) -> float:
        return float(np.abs(self.entries - self.entries.conj().T).max())

    def block(self, n: int) -> np.ndarray:
        return self.entries[:n, :n]

    def __add__(self, other):
        return FockOperator(self.entries + _as_matrix(other, self.dim), self.label)

    __radd__ = __add__

    def __sub__(self, other):
        return FockOperator(self.entries - _as_matrix(other, self.dim), self.label)

    def __mul__(self, scalar):
        return FockOperator(self.entries * scalar, self.label)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, FockOperator):
            return FockOperator(self.entries @ other.entries)
        if isinstance(other, FockVector):
            return FockVector(self.entries @ other.coeffs)
        return self.entries @ other

    def to_json(self) -> dict:
        flat = self.entries.reshape(-1)
        return {"dim": self.dim, "label": self.label,
                "entries": [[float(z.real), float(z.imag)] for z in flat]}

    @classmethod
    def from_json(cls, data: dict) -> "FockOperator":
        n = int(data["dim"])
        flat = np.array([complex(re, im) for re, im in data["entries"]])
        return cls(flat.reshape(n, n), data.get("label", ""))


def _as_matrix(x, n):
    if isinstance(x, FockOperator):
        return x.entries
    if np.isscalar(x):
        return x * np.eye(n)
    return np.asarray(x)


@dataclass(frozen=True, eq=False)
class FockVector:
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _frozen(np.ravel(self.coeffs)))

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def inner(self, other: "FockVector") -> complex:
        return complex(np.vdot(self.coeffs, other.coeffs))


def basis_vector(n: int, dim: int) -> FockVector:
    v = np.zeros(dim, complex)
    v[n] = 1.0
    return FockVector(v)


def lowering(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1)


def quadratures(dim: int, hbar: float, omega: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Raw ``(P, Q)`` matrices in a ``dim``-dimensional number basis."""
    if not omega > 0:
        raise InvalidParameter(f"omega must be positive, got {omega}")
    a = lowering(dim)
    Q = math.sqrt(hbar / (2.0 * omega)) * (a + a.T)
    P = 1j * math.sqrt(hbar * omega / 2.0) * (a.T - a)
    return P.astype(complex), Q.astype(complex)


def build_kinematics(cfg: GlobalConfig, omega: float = 1.0):
    """Hermitian ``P``, ``Q`` and the fiducial ``eta`` with ``(Omega Q + iP) eta = 0``."""
    if not omega > 0:
        raise InvalidParameter(f"omega must be positive, got {omega}")
    P, Q = quadratures(cfg.fock_dim, cfg.hbar, omega)
    return (FockOperator(P, "P"), FockOperator(Q, "Q"), basis_vector(0, cfg.fock_dim))


def commutator_defect(P: FockOperator, Q: FockOperator, hbar: float, block: int) -> float:
    """``max |[Q, P] - i hbar|`` on the leading ``block x block`` entries."""
    C = Q.entries @ P.entries - P.entries @ Q.entries
    D = C - 1j * hbar * np.eye(P.dim)
    return float(np.abs(D[:block, :block]).max())


def weyl_monomial(P: np.ndarray, Q: np.ndarray, i: int, j: int) -> np.ndarray:
    """Weyl-symmetrised ``p^i q^j`` via ``2^-j sum_k C(j,k) Q^k P^i Q^(j-k)``."""
    n = P.shape[0]
    Pi = np.linalg.matrix_power(P, i) if i else np.eye(n)
    if j == 0:
        return Pi
    Qk = [np.eye(n)]
    for _ in range(j):
        Qk.append(Qk[-1] @ Q)
    out = np.zeros((n, n), complex)
    for k in range(j + 1):
        out += comb(j, k, exact=True) * (Qk[k] @ Pi @ Qk[j - k])
    return out / 2.0**j


def polynomial_operator(terms: Iterable, cfg: GlobalConfig, omega: float = 1.0,
                        label: str = "") -> FockOperator:
    """Weyl-ordered operator for ``sum c P^i Q^j`` with exact ``N x N`` entries.

    ``terms`` is an iterable of ``(c, i, j)`` or a ``ClassicalObservable``.
    """
    terms = list(getattr(terms, "terms", terms))
    deg = max((i + j for _, i, j in terms), default=0)
    n = cfg.fock_dim
    P, Q = quadratures(n + deg + 1, cfg.hbar, omega)
    out = np.zeros_like(P)
    for c, i, j in terms:
        out += c * weyl_monomial(P, Q, int(i), int(j))
    out = out[:n, :n]
    return FockOperator(0.5 * (out + out.conj().T), label)


def _check_hermitian(H: FockOperator, cfg: GlobalConfig | None = None) -> np.ndarray:
    A = H.entries
    scale = max(1.0, float(np.abs(A).max(initial=0.0)))
    tol = (cfg.tol_linalg if cfg else 1e-10) * scale
    if H.hermitian_defect() > tol:
        raise NotHermitian(f"operator {H.label!r} deviates from hermitian by {H.hermitian_defect():.3g}")
    return 0.5 * (A + A.conj().T)


def unitary_from_hermitian(A: np.ndarray, t: float, hbar: float) -> np.ndarray:
    """``exp(-i A t / hbar)`` for a hermitian matrix, by eigendecomposition."""
    w, V = np.linalg.eigh(A)
    return (V * np.exp(-1j * w * t / hbar)) @ V.conj().T


def expm_unitary(H: FockOperator, t: float, cfg: GlobalConfig) -> FockOperator:
    A = _check_hermitian(H, cfg)
    return FockOperator(unitary_from_hermitian(A, t, cfg.hbar), f"exp(-i {H.label} t)")


@dataclass(frozen=True)
class Spectrum:
    """Lowest eigenvalues with an optional truncation-convergence estimate.

    ``drift`` is ``|E_k(2N) - E_k(N)|`` when a doubled-truncation operator was
    supplied.  ``flagged`` marks levels whose drift exceeds ``tol``; an
    operator unbounded below shows up this way.
    """

    values: np.ndarray
    drift: np.ndarray | None = None
    tol: float = 1e-8

    @property
    def flagged(self) -> np.ndarray:
        if self.drift is None:
            return np.zeros(len(self.values), bool)
        return self.drift > self.tol

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, k):
        return self.values[k]


def spectrum(H: FockOperator, k: int, *, doubled: FockOperator | None = None,
             tol: float = 1e-8) -> Spectrum:
    if not 1 <= k <= H.dim:
        raise InvalidParameter(f"k must lie in [1, {H.dim}], got {k}")
    vals = np.linalg.eigvalsh(_check_hermitian(H))[:k]
    drift = None
    if doubled is not None:
        vals2 = np.linalg.eigvalsh(_check_hermitian(doubled))[:k]
        drift = np.abs(vals2 - vals)
    return Spectrum(vals, drift, tol)


def observable_spectrum(terms, k: int, cfg: GlobalConfig, omega: float = 1.0,
                        builder: Callable | None = None, tol: float = 1e-8) -> Spectrum:
    """Spectrum of a polynomial operator at ``N`` and ``2N`` truncation."""
    builder = builder or polynomial_operator
    H = builder(terms, cfg, omega)
    H2 = builder(terms, cfg.replace(fock_dim=2 * cfg.fock_dim), omega)
    return spectrum(H, k, doubled=H2, tol=tol)


def variances(eta: np.ndarray, cfg: GlobalConfig, omega: float = 1.0) -> tuple[float, float, float]:
    """``(<dQ^2>, <dP^2>, <dP dQ + dQ dP>)`` of a state in the number basis."""
    eta = np.asarray(eta, complex)
    P, Q = quadratures(len(eta) + 2, cfg.hbar, omega)
    v = np.zeros(len(eta) + 2, complex)
    v[: len(eta)] = eta

    def ev(A):
        return np.vdot(v, A @ v)

    q, p = ev(Q).real, ev(P).real
    dQ = Q - q * np.eye(len(v))
    dP = P - p * np.eye(len(v))
    return (ev(dQ @ dQ).real, ev(dP @ dP).real, ev(dP @ dQ + dQ @ dP).real)


@functools.lru_cache(maxsize=32)
def _weyl_factors(dim: int, hbar: float, omega: float):
    P, Q = quadratures(dim, hbar, omega)
    lq, vq = np.linalg.eigh(Q)
    lp, vp = np.linalg.eigh(P)
    for a in (lq, vq, lp, vp):
        a.setflags(write=False)
    return lq, vq, lp, vp


def weyl_apply(p, q, vec: np.ndarray, hbar: float, omega: float, out_dim: int | None = None) -> np.ndarray:
    """``exp(-i q P/hbar) exp(i p Q/hbar) vec`` for arrays of labels.

    Returns an array of shape ``(out_dim, len(p))``; the work is done in the
    dimension of ``vec`` and the leading ``out_dim`` components are kept.
    """
    p = np.atleast_1d(np.asarray(p, float))
    q = np.atleast_1d(np.asarray(q, float))
    dim = len(vec)
    out_dim = out_dim or dim
    lq, vq, lp, vp = _weyl_factors(dim, float(hbar), float(omega))
    base = vq.conj().T @ vec
    X = vq @ (np.exp(1j * np.outer(lq, p) / hbar) * base[:, None])
    Y = np.exp(-1j * np.outer(lp, q) / hbar) * (vp.conj().T @ X)
    return vp[:out_dim] @ Y

"""SU(2) kinematics on the sphere: spin matrices and spin coherent states.

Coherent states are rotated highest-weight vectors,
``|theta, phi> = exp(-i phi S3 / hbar) exp(-i theta S2 / hbar) |s, s>``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidSpin, PoleProximity
from .fock import FockVector, unitary_from_hermitian


@dataclass(frozen=True)
class SpinSpec:
    s: float
    hbar: float = 1.0

    def __post_init__(self):
        two_s = 2 * Fraction(self.s).limit_denominator(2)
        if two_s != 2 * self.s or two_s.denominator != 1 or two_s < 0:
            raise InvalidSpin(f"2s must be a nonnegative integer, got s = {self.s}")
        if not self.hbar > 0:
            raise InvalidSpin(f"hbar must be positive, got {self.hbar}")

    @property
    def dim(self) -> int:
        return int(round(2 * self.s)) + 1


@dataclass(frozen=True, eq=False)
class SpinOperator:
    entries: np.ndarray
    axis: int

    def __post_init__(self):
        a = np.array(self.entries, complex)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)


def build_spin(spec: SpinSpec) -> tuple[SpinOperator, SpinOperator, SpinOperator]:
    """Standard matrices in the basis ``m = s, s-1, ..., -s``."""
    s, hb = spec.s, spec.hbar
    m = s - np.arange(spec.dim)
    # <m+1|S+|m> = hbar sqrt(s(s+1) - m(m+1))
    up = hb * np.sqrt(np.maximum(s * (s + 1) - m[1:] * (m[1:] + 1), 0.0))
    Sp = np.diag(up, 1).astype(complex)
    Sm = Sp.conj().T
    S1 = 0.5 * (Sp + Sm)
    S2 = -0.5j * (Sp - Sm)
    S3 = np.diag(hb * m).astype(complex)
    return SpinOperator(S1, 1), SpinOperator(S2, 2), SpinOperator(S3, 3)


def casimir_defect(spec: SpinSpec) -> float:
    S = build_spin(spec)
    C = sum(x.entries @ x.entries for x in S)
    return float(np.abs(C - spec.s * (spec.s + 1) * spec.hbar**2 * np.eye(spec.dim)).max())


def commutator_defect(spec: SpinSpec) -> float:
    S1, S2, S3 = (x.entries for x in build_spin(spec))
    hb = spec.hbar
    d = [S1 @ S2 - S2 @ S1 - 1j * hb * S3,
         S2 @ S3 - S3 @ S2 - 1j * hb * S1,
         S3 @ S1 - S1 @ S3 - 1j * hb * S2]
    return float(max(np.abs(x).max() for x in d))


def _rotations(spec: SpinSpec):
    S1, S2, S3 = build_spin(spec)
    w2, V2 = np.linalg.eigh(S2.entries)
    return w2, V2, np.real(np.diag(S3.entries))


def spin_coherent_vectors(theta, phi, spec: SpinSpec) -> np.ndarray:
    """Columns ``|theta_k, phi_k>``, vectorised over the labels."""
    theta = np.atleast_1d(np.asarray(theta, float))
    phi = np.atleast_1d(np.asarray(phi, float))
    w2, V2, m3 = _rotations(spec)
    hb = spec.hbar
    top = V2.conj().T[:, 0]
    X = V2 @ (np.exp(-1j * np.outer(w2, theta) / hb) * top[:, None])
    return np.exp(-1j * np.outer(m3, phi) / hb) * X


def spin_coherent(theta: float, phi: float, spec: SpinSpec) -> FockVector:
    return FockVector(spin_coherent_vectors([theta], [phi], spec)[:, 0])


def spin_frame(spec: SpinSpec, n_theta: int, n_phi: int, normalization: float | None = None,
               rotation: np.ndarray | None = None) -> np.ndarray:
    """``c * sum w |theta phi><theta phi|`` with Gauss-Legendre in ``cos theta``.

    ``c`` defaults to ``(2s+1) / 4 pi``.  ``rotation`` (a unitary) is applied
    to every state first.
    """
    x, wx = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(x)
    phi = -math.pi + 2.0 * math.pi * np.arange(n_phi) / n_phi
    T, F = np.meshgrid(theta, phi, indexing="ij")
    w = np.outer(wx, np.full(n_phi, 2.0 * math.pi / n_phi)).ravel()
    V = spin_coherent_vectors(T.ravel(), F.ravel(), spec)
    if rotation is not None:
        V = rotation @ V
    c = spec.dim / (4.0 * math.pi) if normalization is None else normalization
    return c * (V * w) @ V.conj().T


def spin_resolution_defect(spec: SpinSpec, n_theta: int, n_phi: int,
                           normalization: float | None = None,
                           rotation: np.ndarray | None = None) -> float:
    S = spin_frame(spec, n_theta, n_phi, normalization, rotation)
    return float(np.abs(S - np.eye(spec.dim)).max())


def rotation_operator(spec: SpinSpec, axis: int, angle: float) -> np.ndarray:
    S = build_spin(spec)[axis - 1].entries
    return unitary_from_hermitian(S, angle, spec.hbar)


def spin_induced_metric(theta: float, phi: float, spec: SpinSpec, step: float = 1e-5,
                        pole_margin: float = 0.1) -> np.ndarray:
    """``2 hbar^2 [||d psi||^2 - |<psi|d psi>|^2]`` in ``(theta, phi)``."""
    if not pole_margin <= theta <= math.pi - pole_margin:
        raise PoleProximity(f"theta = {theta:g} is within {pole_margin} of a pole")
    h = step
    T = np.array([theta, theta + h, theta - h, theta, theta])
    F = np.array([phi, phi, phi, phi + h, phi - h])
    V = spin_coherent_vectors(T, F, spec)
    psi = V[:, 0]
    D = [(V[:, 1] - V[:, 2]) / (2 * h), (V[:, 3] - V[:, 4]) / (2 * h)]
    g = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            c = np.vdot(D[i], D[j]) - np.vdot(D[i], psi) * np.vdot(psi, D[j])
            g[i, j] = 2.0 * spec.hbar**2 * c.real
    return 0.5 * (g + g.T)


def spin_expectations(theta: float, phi: float, spec: SpinSpec) -> np.ndarray:
    v = spin_coherent(theta, phi, spec).coeffs
    return np.array([np.vdot(v, S.entries @ v).real for S in build_spin(spec)])

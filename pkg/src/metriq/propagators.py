"""Propagators: exact operator exponential, Weyl lattice path integral and the
Wiener-regularised phase-space path integral.

The Wiener estimator follows the pinned-Brownian-motion form of the
regularised integral.  Two refinements keep it honest at desk-scale ``nu``:

* endpoint projection.  At finite ``nu`` the regularised kernel still carries
  excited-level contributions that decay only like ``exp(-nu T / hbar)``.
  Sandwiching it between reproducing kernels, ``K -> KernelP * K * KernelP``,
  removes them exactly, because the limit kernel already lives on the
  coherent subspace.  The endpoints are then drawn from Gaussians around
  ``a`` and ``b`` and reweighted.
* sub-grid Levy area.  The midpoint (Stratonovich) sum on a grid of step
  ``dt`` misses the stochastic area swept between grid points.  Conditioned
  on the grid values that area has a known characteristic function, and the
  estimator is multiplied by it.
"""
from __future__ import annotations

import cmath
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal, solve_banded

from .coherent import (FiducialSpec, PhaseSpaceQuadrature, coherent_state, kernel,
                       weyl_vectors)
from .config import GlobalConfig
from .errors import (InvalidParameter, NumericalOverflow, UnsupportedChart,
                     UnsupportedObservable, VarianceBlowup)
from .fock import FockOperator, unitary_from_hermitian
from .phase import (CARTESIAN, POLAR, ROTATED_45, ClassicalObservable, PhaseSpacePoint,
                    get_chart, to_cartesian, transport)
from .toeplitz import toeplitz_quantize

NU_MAX_HBAR = 16.0
T_MAX = 1.0
_ISOMETRIES = (CARTESIAN, ROTATED_45)


@dataclass(frozen=True)
class PropagatorEstimate:
    value: complex
    stderr: float
    method: str
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"re": self.value.real, "im": self.value.imag, "stderr": self.stderr,
                "method": self.method, "params": self.params}


def fresnel_toy(nu: float) -> complex:
    """``int exp(i y^2/2 - y^2/2nu) dy = sqrt(2 pi / (1/nu - i))``."""
    if not nu > 0:
        raise InvalidParameter(f"nu must be positive, got {nu}")
    return cmath.sqrt(2.0 * math.pi / (1.0 / nu - 1j))


FRESNEL_LIMIT = cmath.sqrt(2j * math.pi)


# -- exact -----------------------------------------------------------------

def _cart_pt(x) -> PhaseSpacePoint:
    if isinstance(x, PhaseSpacePoint):
        return to_cartesian(x)
    return PhaseSpacePoint(float(x[0]), float(x[1]))


@dataclass(frozen=True, eq=False)
class Evolution:
    """``exp(-i H T / hbar)`` for the Toeplitz operator of ``h``."""

    U: FockOperator
    T: float
    fid: FiducialSpec
    cfg: GlobalConfig

    def amplitude(self, b, a) -> complex:
        va = coherent_state(_cart_pt(a), self.fid, 0.0, self.cfg).coeffs
        vb = coherent_state(_cart_pt(b), self.fid, 0.0, self.cfg).coeffs
        return complex(np.vdot(vb, self.U.entries @ va))

    def column(self, p, q, a) -> np.ndarray:
        """``<p_k, q_k| U |a>`` for many final points."""
        va = coherent_state(_cart_pt(a), self.fid, 0.0, self.cfg).coeffs
        V = weyl_vectors(p, q, self.fid, self.cfg, out_dim=self.cfg.fock_dim)
        return V.conj().T @ (self.U.entries @ va)


def evolution(h: ClassicalObservable, T: float, quad: PhaseSpaceQuadrature | None = None,
              fid: FiducialSpec | None = None, cfg: GlobalConfig | None = None) -> Evolution:
    fid, cfg = fid or FiducialSpec(), cfg or GlobalConfig()
    H = toeplitz_quantize(h, quad, fid, cfg)
    return Evolution(FockOperator(unitary_from_hermitian(H.entries, T, cfg.hbar)), T, fid, cfg)


def exact_propagator(h: ClassicalObservable, a, b, T: float,
                     quad: PhaseSpaceQuadrature | None = None, fid: FiducialSpec | None = None,
                     cfg: GlobalConfig | None = None) -> PropagatorEstimate:
    """``<b| exp(-i Toeplitz(h) T / hbar) |a>``."""
    cfg = cfg or GlobalConfig()
    ev = evolution(h, T, quad, fid, cfg)
    val = ev.amplitude(b, a)
    return PropagatorEstimate(val, 0.0, "exact", {"T": T, "fock_dim": cfg.fock_dim, "hbar": cfg.hbar})


# -- lattice -----------------------------------------------------------------

@dataclass(frozen=True)
class LatticeConfig:
    T: float
    N: int
    scheme: str = "weyl_midpoint"

    def __post_init__(self):
        if not self.T > 0:
            raise InvalidParameter(f"T must be positive, got {self.T}")
        if int(self.N) != self.N or self.N < 1:
            raise InvalidParameter(f"N must be a positive integer, got {self.N}")
        if self.scheme != "weyl_midpoint":
            raise InvalidParameter(f"unknown lattice scheme {self.scheme!r}")

    @property
    def eps(self) -> float:
        return self.T / (self.N + 1)


def _quadratic_coeffs(H: ClassicalObservable):
    """``(a, b, c, d, e, f)`` for ``a p^2 + b p q + c q^2 + d p + e q + f``."""
    if not H.is_polynomial or H.chart_id != CARTESIAN:
        raise UnsupportedObservable("lattice route needs a Cartesian polynomial")
    slots = {(2, 0): 0, (1, 1): 1, (0, 2): 2, (1, 0): 3, (0, 1): 4, (0, 0): 5}
    k = [0.0] * 6
    for (i, j), c in H.poly.items():
        if c == 0.0:
            continue
        if (i, j) not in slots:
            raise UnsupportedObservable(
                f"term p^{i} q^{j} is outside the Gaussian-solvable class (degree <= 2)")
        k[slots[(i, j)]] += c
    if not k[0] > 0:
        raise UnsupportedObservable("the p^2 coefficient must be positive")
    return k


@dataclass(frozen=True)
class LatticeKernel:
    """``<q''| U |q'> = exp(log_pref + (i/hbar)(x^T M x / 2 + v.x + c0))``, ``x = (q', q'')``."""

    log_pref: complex
    M: np.ndarray
    v: np.ndarray
    c0: float
    hbar: float

    def __call__(self, q2, q1):
        q1, q2 = np.asarray(q1, float), np.asarray(q2, float)
        M, v = self.M, self.v
        quad = 0.5 * (M[0, 0] * q1 * q1 + 2 * M[0, 1] * q1 * q2 + M[1, 1] * q2 * q2)
        return np.exp(self.log_pref + 1j / self.hbar * (quad + v[0] * q1 + v[1] * q2 + self.c0))

    def coherent_element(self, b, a, fid: FiducialSpec | None = None) -> complex:
        """``<b| U |a>`` by integrating against coherent-state wavefunctions.

        ``<x|p,q> = (Omega/pi hbar)^(1/4) exp(-Omega (x-q)^2 / 2 hbar + i p (x-q) / hbar)``;
        the double integral is Gaussian and done in closed form.
        """
        om = (fid or FiducialSpec()).omega
        hb = self.hbar
        (pa, qa), (pb, qb) = _pq(a), _pq(b)
        C = (om / hb) * np.eye(2) - (1j / hb) * self.M
        w = np.array([om * qa / hb + 1j * pa / hb, om * qb / hb - 1j * pb / hb]) + (1j / hb) * self.v
        c = (-om * (qa * qa + qb * qb) / (2 * hb) - 1j * pa * qa / hb + 1j * pb * qb / hb
             + 1j * self.c0 / hb)
        lam = np.linalg.eigvals(C)
        if np.any(lam.real <= 0):
            raise NumericalOverflow("basis change integral does not converge")
        log_det_sqrt = 0.5 * np.sum(np.log(lam))
        val = (math.log(math.sqrt(om / (math.pi * hb))) + self.log_pref + math.log(2 * math.pi)
               - log_det_sqrt + 0.5 * w @ np.linalg.solve(C, w) + c)
        return complex(np.exp(val))


def _pq(x):
    x = _cart_pt(x)
    return x.c1, x.c2


def _tridiagonal_log_det(d, o):
    """``(log|det|, number of negative eigenvalues)`` of a symmetric tridiagonal.

    The LDL^T pivots carry the determinant to full relative accuracy and, by
    Sylvester's law of inertia, the signs of the eigenvalues.  A tiny pivot
    means a caustic or a breakdown; eigenvalues then decide which.
    """
    piv = np.empty(len(d))
    piv[0] = d[0]
    for k in range(1, len(d)):
        piv[k] = d[k] - o[k - 1] ** 2 / piv[k - 1]
    scale = np.abs(d).max() + 2 * (np.abs(o).max() if len(o) else 0.0)
    if np.all(np.abs(piv) > 1e-10 * scale):
        return float(np.sum(np.log(np.abs(piv)))), int(np.sum(piv < 0))
    lam = eigvalsh_tridiagonal(d, o) if len(d) > 1 else d.copy()
    if np.any(np.abs(lam) < 1e-12 * np.abs(lam).max()):
        raise NumericalOverflow("lattice Hessian is singular (caustic)")
    return float(np.sum(np.log(np.abs(lam)))), int(np.sum(lam < 0))


def lattice_kernel(H: ClassicalObservable, lat: LatticeConfig, cfg: GlobalConfig | None = None) -> LatticeKernel:
    """Do all momentum and interior position integrals of the Weyl lattice.

    Each step contributes ``p (q_{l+1} - q_l) - eps H(p, (q_l + q_{l+1})/2)``.
    The momentum integrals are Fresnel integrals; what is left is a complex
    Gaussian in the positions with a tridiagonal Hessian, integrated exactly
    over the ``N`` interior sites.  Everything is accumulated in logarithms.
    """
    cfg = cfg or GlobalConfig()
    hb = cfg.hbar
    a, b, c, d, e, f = _quadratic_coeffs(H)
    N, eps = lat.N, lat.eps
    k1, k0 = 1.0 - eps * b / 2.0, -(1.0 + eps * b / 2.0)
    n = N + 2
    diag = np.zeros(n)
    off = np.full(N + 1, k0 * k1 / (2 * eps * a) - eps * c / 2.0)
    g = np.zeros(n)
    diag[:-1] += k0 * k0 / (2 * eps * a) - eps * c / 2.0
    diag[1:] += k1 * k1 / (2 * eps * a) - eps * c / 2.0
    g[:-1] += -d * k0 / (2 * a) - eps * e / 2.0
    g[1:] += -d * k1 / (2 * a) - eps * e / 2.0
    const = (N + 1) * (eps * d * d / (4 * a) - eps * f)

    log_pref = -0.5 * (N + 1) * (math.log(4 * math.pi * hb * eps * a) + 0.5j * math.pi)
    dI, oI = diag[1:-1], off[1:-1]
    log_abs_det, n_neg = _tridiagonal_log_det(dI, oI)
    log_pref += 0.5 * N * math.log(2 * math.pi * hb)
    log_pref += -0.5 * log_abs_det + 0.25j * math.pi * (N - 2 * n_neg)

    # A_II^{-1} applied to [A_I,q', A_I,q'', J_I]
    rhs = np.zeros((N, 3))
    rhs[0, 0] = off[0]
    rhs[-1, 1] = off[-1]
    rhs[:, 2] = g[1:-1]
    ab = np.zeros((3, N))
    ab[0, 1:] = oI
    ab[1] = dI
    ab[2, :-1] = oI
    X = solve_banded((1, 1), ab, rhs)
    B = np.zeros((N, 2))
    B[0, 0], B[-1, 1] = off[0], off[-1]
    M = np.array([[diag[0], 0.0], [0.0, diag[-1]]]) - B.T @ X[:, :2]
    v = np.array([g[0], g[-1]]) - B.T @ X[:, 2]
    c0 = const - 0.5 * g[1:-1] @ X[:, 2]
    M = 0.5 * (M + M.T)
    return LatticeKernel(complex(log_pref), M, v, float(c0), hb)


def lattice_weyl_propagator(H: ClassicalObservable, q1: float, q2: float, lat: LatticeConfig,
                            cfg: GlobalConfig | None = None) -> PropagatorEstimate:
    """``<q2| exp(-i H_Weyl T / hbar) |q1>`` from the midpoint lattice."""
    K = lattice_kernel(H, lat, cfg)
    return PropagatorEstimate(complex(K(q2, q1)), 0.0, "lattice", {"T": lat.T, "N": lat.N,
                                                                    "scheme": lat.scheme})


def free_kernel(q2, q1, T: float, hbar: float = 1.0):
    """``<q2| exp(-i P^2 T / 2 hbar) |q1>``."""
    return np.exp(1j * (np.asarray(q2) - q1) ** 2 / (2 * hbar * T)) / np.sqrt(2j * math.pi * hbar * T)


def mehler_kernel(q2, q1, T: float, hbar: float = 1.0):
    """Position kernel of ``exp(-i (P^2 + Q^2) T / 2 hbar)`` for ``0 < T < pi``."""
    s, c = math.sin(T), math.cos(T)
    q1, q2 = np.asarray(q1, float), np.asarray(q2, float)
    return np.exp(1j * ((q1 * q1 + q2 * q2) * c - 2 * q1 * q2) / (2 * hbar * s)) / np.sqrt(2j * math.pi * hbar * s)


# -- Wiener ------------------------------------------------------------------

@dataclass(frozen=True)
class WienerConfig:
    nu: float
    n_steps: int = 64
    n_samples: int = 200_000
    seed: int = 0
    antithetic: bool = True
    n_batches: int = 20
    project: bool = True
    threads: int | None = None

    def __post_init__(self):
        if not self.nu > 0:
            raise InvalidParameter(f"nu must be positive, got {self.nu}")
        if self.n_steps < 16:
            raise InvalidParameter("n_steps must be >= 16")
        if self.n_samples < 100:
            raise InvalidParameter("n_samples must be >= 100")
        if self.n_batches < 20:
            raise InvalidParameter("at least 20 batches are needed for the error bar")
        if self.n_samples % self.n_batches:
            raise InvalidParameter("n_samples must be a multiple of n_batches")
        if self.antithetic and (self.n_samples // self.n_batches) % 2:
            raise InvalidParameter("antithetic sampling needs an even batch size")
        if not 0 <= self.seed < 2**64:
            raise InvalidParameter("seed must be a 64-bit unsigned integer")

    def replace(self, **kw) -> "WienerConfig":
        return WienerConfig(**{**asdict(self), **kw})


@dataclass(frozen=True)
class BrownianBridgePath:
    times: np.ndarray
    p_path: np.ndarray
    q_path: np.ndarray


def batch_rng(seed: int, batch: int) -> np.random.Generator:
    """Counter-style stream for batch ``batch``: independent of scheduling."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, batch])))


def _normals(rng, n, shape, antithetic):
    if antithetic:
        z = rng.standard_normal((n // 2,) + shape)
        return np.concatenate([z, -z])
    return rng.standard_normal((n,) + shape)


def bridge_noise(n: int, n_steps: int, T: float, nu: float, rng, antithetic: bool) -> np.ndarray:
    """Zero-pinned 2-d bridges, shape ``(n, n_steps + 1, 2)``, diffusion ``nu``."""
    dt = T / n_steps
    inc = math.sqrt(nu * dt) * _normals(rng, n, (n_steps, 2), antithetic)
    W = np.concatenate([np.zeros((n, 1, 2)), np.cumsum(inc, axis=1)], axis=1)
    t = np.linspace(0.0, 1.0, n_steps + 1)[None, :, None]
    return W - t * W[:, -1:, :]


def sample_bridges(a, b, T: float, wcfg: WienerConfig, batch: int = 0) -> BrownianBridgePath:
    """All paths of one batch, pinned at ``a`` (t=0) and ``b`` (t=T)."""
    n = wcfg.n_samples // wcfg.n_batches
    a, b = np.asarray(a, float), np.asarray(b, float)
    B = bridge_noise(n, wcfg.n_steps, T, wcfg.nu, batch_rng(wcfg.seed, batch), wcfg.antithetic)
    t = np.linspace(0.0, T, wcfg.n_steps + 1)
    path = a + (b - a) * (t / T)[None, :, None] + B
    return BrownianBridgePath(t, path[..., 0], path[..., 1])


def sample_bridge(a, b, T: float, wcfg: WienerConfig, index: int = 0) -> BrownianBridgePath:
    """Path number ``index``; the same path as in :func:`sample_bridges`."""
    n = wcfg.n_samples // wcfg.n_batches
    batch, k = divmod(index, n)
    allp = sample_bridges(a, b, T, wcfg, batch)
    return BrownianBridgePath(allp.times, allp.p_path[k], allp.q_path[k])


def _pinned_density(d2, nu, T):
    return np.exp(-d2 / (2 * nu * T)) / (2 * math.pi * nu * T)


def _levy_log_factor(d2, nu, dt, hbar, n_steps):
    """Sum over steps of log E[exp(i A / hbar)], A the sub-step Levy area.

    Per step, with ``x = nu dt / 2 hbar``:
    ``log(x / sinh x) - |Delta|^2 (x coth x - 1) / (2 nu dt)``; ``d2`` is the
    sum of ``|Delta|^2`` over the steps of a path.
    """
    x = nu * dt / (2 * hbar)
    return n_steps * math.log(x / math.sinh(x)) - d2 * (x / math.tanh(x) - 1.0) / (2 * nu * dt)


def _grad_terms(G: ClassicalObservable):
    dp = [(c * i, i - 1, j) for c, i, j in G.terms if i > 0]
    dq = [(c * j, i, j - 1) for c, i, j in G.terms if j > 0]
    return ClassicalObservable(tuple(dp)), ClassicalObservable(tuple(dq))


def _batch_sum(args):
    (h, chart, start, end, T, wcfg, hbar, batch, gauge_obs) = args
    n = wcfg.n_samples // wcfg.n_batches
    rng = batch_rng(wcfg.seed, batch)
    M = wcfg.n_steps
    dt = T / M
    start, end = np.asarray(start, float), np.asarray(end, float)
    if wcfg.project:
        s = math.sqrt(2 * hbar)
        x = end + s * _normals(rng, n, (2,), wcfg.antithetic)
        y = start + s * _normals(rng, n, (2,), wcfg.antithetic)
        # kernels between phase-space points, written via Cartesian images
        bp, bq = chart.to_cartesian(end[0], end[1])
        ap, aq = chart.to_cartesian(start[0], start[1])
        xp, xq = chart.to_cartesian(x[:, 0], x[:, 1])
        yp, yq = chart.to_cartesian(y[:, 0], y[:, 1])
        kb = kernel(bp, bq, xp, xq, None, hbar)
        ka = kernel(yp, yq, ap, aq, None, hbar)
        g = lambda d: np.exp(-np.sum(d * d, -1) / (4 * hbar)) / (4 * math.pi * hbar)
        log_w = np.log(kb * ka / (2 * math.pi * hbar) ** 2) - np.log(g(x - end) * g(y - start))
        p0, p1 = y, x
    else:
        log_w = np.zeros(n, complex)
        p0, p1 = np.broadcast_to(start, (n, 2)), np.broadcast_to(end, (n, 2))
    B = bridge_noise(n, M, T, wcfg.nu, rng, wcfg.antithetic)
    t = np.linspace(0.0, 1.0, M + 1)[None, :, None]
    path = p0[:, None, :] + (p1 - p0)[:, None, :] * t + B
    c1, c2 = path[..., 0], path[..., 1]
    S = np.sum(0.5 * (c1[:, 1:] + c1[:, :-1]) * np.diff(c2, axis=1), axis=1)
    S += chart.gauge(p1[:, 0], p1[:, 1]) - chart.gauge(p0[:, 0], p0[:, 1])
    if gauge_obs is not None:
        gp, gq = gauge_obs
        cp, cq = chart.to_cartesian(c1, c2)
        Gp, Gq = gp.values(cp, cq), gq.values(cp, cq)
        S += np.sum(0.5 * (Gp[:, 1:] + Gp[:, :-1]) * np.diff(cp, axis=1)
                    + 0.5 * (Gq[:, 1:] + Gq[:, :-1]) * np.diff(cq, axis=1), axis=1)
    hv = h.values(c1, c2)
    Ih = dt * (np.sum(hv, axis=1) - 0.5 * (hv[:, 0] + hv[:, -1]))
    d2 = np.sum(np.diff(path, axis=1) ** 2, axis=(1, 2))
    ends2 = np.sum((p1 - p0) ** 2, axis=1)
    log_v = (log_w + 1j / hbar * (S - Ih) + np.log(_pinned_density(ends2, wcfg.nu, T))
             + _levy_log_factor(d2, wcfg.nu, dt, hbar, M))
    vals = np.exp(log_v)
    return vals.sum(), n


def wiener_propagator(h: ClassicalObservable, a, b, T: float, wcfg: WienerConfig,
                      fid: FiducialSpec | None = None, cfg: GlobalConfig | None = None,
                      chart=CARTESIAN, G: ClassicalObservable | None = None) -> PropagatorEstimate:
    """Monte Carlo estimate of the Wiener-regularised propagator at finite ``nu``.

    ``a``, ``b`` are phase-space points (or pairs in ``chart`` coordinates) and
    ``h`` must be written in ``chart``.  ``G`` is an optional Cartesian gauge
    whose differential is added to the action along each path.
    """
    fid, cfg = fid or FiducialSpec(), cfg or GlobalConfig()
    hbar = cfg.hbar
    chart = get_chart(chart)
    if chart.id not in _ISOMETRIES:
        raise UnsupportedChart(f"Wiener sampling in chart {chart.id!r} is not supported; "
                               "only flat isometric charts keep the Brownian law unchanged")
    if fid.omega != 1.0:
        raise InvalidParameter("the Wiener estimator assumes the Omega = 1 fiducial")
    if h.chart_id != chart.id:
        raise InvalidParameter(f"h is written in {h.chart_id!r}, expected {chart.id!r}")
    if not h.is_polynomial:
        raise UnsupportedObservable("Wiener route needs a polynomial h")
    if wcfg.nu * hbar > NU_MAX_HBAR or T > T_MAX or not T > 0:
        raise VarianceBlowup(f"nu hbar = {wcfg.nu * hbar:g}, T = {T:g} is outside the budget "
                             f"nu hbar <= {NU_MAX_HBAR:g}, 0 < T <= {T_MAX:g}")

    def chart_coords(x):
        if isinstance(x, PhaseSpacePoint):
            if x.chart_id == chart.id:
                return (x.c1, x.c2)
            y = to_cartesian(x)
            c = chart.from_cartesian(y.c1, y.c2)
            return (float(c[0]), float(c[1]))
        return (float(x[0]), float(x[1]))

    start, end = chart_coords(a), chart_coords(b)
    gauge_obs = _grad_terms(G) if G is not None else None
    jobs = [(h, chart, start, end, T, wcfg, hbar, k, gauge_obs) for k in range(wcfg.n_batches)]
    threads = wcfg.threads or min(wcfg.n_batches, os.cpu_count() or 1)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            sums = list(ex.map(_batch_sum, jobs))
    else:
        sums = [_batch_sum(j) for j in jobs]
    pref = 2 * math.pi * hbar * math.exp(wcfg.nu * T / (2 * hbar))
    means = np.array([s / n for s, n in sums]) * pref
    value = complex(means.mean())
    stderr = float(np.sqrt(np.sum(np.abs(means - value) ** 2) / (len(means) - 1) / len(means)))
    params = {"nu": wcfg.nu, "n_steps": wcfg.n_steps, "n_samples": wcfg.n_samples,
              "seed": wcfg.seed, "antithetic": wcfg.antithetic, "n_batches": wcfg.n_batches,
              "project": wcfg.project, "T": T, "hbar": hbar, "chart": chart.id}
    if not math.isfinite(stderr) or stderr > abs(value):
        raise VarianceBlowup(f"stderr {stderr:.3g} exceeds |value| {abs(value):.3g}")
    return PropagatorEstimate(value, stderr, "wiener_mc", params)


def richardson(e1: PropagatorEstimate, e2: PropagatorEstimate) -> PropagatorEstimate:
    """Two-point extrapolation in ``1/nu``: ``(nu2 K2 - nu1 K1) / (nu2 - nu1)``."""
    n1, n2 = e1.params["nu"], e2.params["nu"]
    if n1 == n2:
        raise InvalidParameter("Richardson extrapolation needs two different nu")
    val = (n2 * e2.value - n1 * e1.value) / (n2 - n1)
    err = math.hypot(n2 * e2.stderr, n1 * e1.stderr) / abs(n2 - n1)
    params = {**e2.params, "nu": [n1, n2], "extrapolated": True,
              "raw": [[e1.value.real, e1.value.imag], [e2.value.real, e2.value.imag]]}
    return PropagatorEstimate(complex(val), err, "wiener_mc", params)


def free_wiener_raw(a, b, T: float, nu: float, hbar: float = 1.0) -> complex:
    """Exact finite-``nu`` value of the unprojected estimator for ``h = 0``.

    ``K(b;a) exp(-(|b-a|^2 / 2 hbar) u / (1-u)) / (1-u)`` with ``u = exp(-nu T / hbar)``.
    """
    (pa, qa), (pb, qb) = _pq(a), _pq(b)
    u = math.exp(-nu * T / hbar)
    d2 = (pb - pa) ** 2 + (qb - qa) ** 2
    return complex(kernel(pb, qb, pa, qa, None, hbar)) * math.exp(-d2 / (2 * hbar) * u / (1 - u)) / (1 - u)


def chart_covariance_check(h: ClassicalObservable, chart, a, b, T: float, wcfg: WienerConfig,
                           fid: FiducialSpec | None = None, cfg: GlobalConfig | None = None):
    """``|K_chart - K_cartesian| / combined stderr`` for Cartesian ``h``.

    The chart run uses mapped endpoints, the transported observable and the
    action ``c1 dc2 + dG_chart``.  Returns ``(ratio, K_cartesian, K_chart)``.
    """
    chart = get_chart(chart)
    if chart.id == POLAR or chart.id not in _ISOMETRIES:
        raise UnsupportedChart(f"chart {chart.id!r} is not an isometry of the Wiener metric")
    if h.chart_id != CARTESIAN:
        raise InvalidParameter("pass h in Cartesian form; it is transported here")
    a, b = _cart_pt(a), _cart_pt(b)
    k0 = wiener_propagator(h, a, b, T, wcfg, fid, cfg)
    hb = transport(h, CARTESIAN, chart)
    k1 = wiener_propagator(hb, a, b, T, wcfg, fid, cfg, chart=chart)
    err = math.hypot(k0.stderr, k1.stderr)
    ratio = abs(k1.value - k0.value) / err if err > 0 else 0.0
    return ratio, k0, k1

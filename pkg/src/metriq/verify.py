"""Invariant suites: each row is a measured defect next to its tolerance."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .coherent import (FiducialSpec, coherent_state, default_quadrature, kernel,
                       kernel_chain_defect, overlap, resolution_of_unity_defect, upper_symbol)
from .config import GlobalConfig
from .errors import MetriqError
from .fock import (build_kinematics, commutator_defect, expm_unitary, observable_spectrum,
                   polynomial_operator)
from .geometry import (fiducial_moments, flatness, metric, metric_in_chart, moment_metric)
from .phase import POLAR, ClassicalObservable, PhaseSpacePoint, harmonic, transport
from .propagators import (FRESNEL_LIMIT, LatticeConfig, WienerConfig, exact_propagator,
                          fresnel_toy, free_kernel, lattice_weyl_propagator, mehler_kernel,
                          richardson, wiener_propagator)
from .semiclassical import area_invariance_check, bohr_sommerfeld_levels
from .spin import (SpinSpec, casimir_defect, spin_induced_metric, spin_resolution_defect)
from .toeplitz import toeplitz_quantize, upper_of_toeplitz_gap

SUITES = ("core", "symbols", "semiclassical", "dynamics", "spin")
QUARTIC = ClassicalObservable(((0.5, 2, 0), (0.5, 0, 2), (1.0, 0, 4)), label="quartic")


@dataclass
class Row:
    name: str
    measured: float
    tolerance: float
    passed: bool
    note: str = ""

    def to_json(self) -> dict:
        return {"name": self.name, "measured": self.measured, "tolerance": self.tolerance,
                "passed": self.passed, "note": self.note}


@dataclass
class Report:
    suite: str
    rows: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def check(self, name, fn, tol, note=""):
        """Run ``fn`` for a defect; exceptions become failed rows."""
        try:
            val = float(fn())
            ok = bool(val <= tol)
        except MetriqError as exc:
            val, ok, note = float("nan"), False, f"{type(exc).__name__}: {exc}"
        self.rows.append(Row(name, val, tol, ok, note))

    def to_json(self) -> dict:
        return {"suite": self.suite, "passed": self.passed, "seconds": self.seconds,
                "rows": [r.to_json() for r in self.rows]}

    def table(self) -> str:
        lines = [f"{'check':44s} {'measured':>12s} {'tol':>9s}  result"]
        for r in self.rows:
            lines.append(f"{r.name:44s} {r.measured:12.3e} {r.tolerance:9.1e}  "
                         f"{'PASS' if r.passed else 'FAIL'} {r.note}")
        return "\n".join(lines)


def _core(rep: Report, cfg: GlobalConfig, seed: int):
    rng = np.random.default_rng(seed)
    P, Q, eta = build_kinematics(cfg)
    rep.check("commutator interior block", lambda: commutator_defect(P, Q, cfg.hbar, cfg.interior), 1e-10)
    for om in (0.5, 1.0, 4.0):
        def fid_defect(om=om):
            P, Q, eta = build_kinematics(cfg, om)
            return np.linalg.norm((om * Q.entries + 1j * P.entries) @ eta.coeffs)
        rep.check(f"fiducial condition omega={om:g}", fid_defect, 1e-12)
    H = polynomial_operator(harmonic(-0.5 * cfg.hbar), cfg)
    n = cfg.interior
    rep.check("shifted oscillator period", lambda: np.abs(
        expm_unitary(H, 2 * math.pi, cfg).block(n) - np.eye(n)).max(), 1e-6)

    def kernel_err():
        r = 3 * math.sqrt(cfg.hbar)
        err = 0.0
        pts = rng.uniform(-1, 1, (200, 4)) * r / math.sqrt(2)
        for p2, q2, p1, q1 in pts:
            a = coherent_state(PhaseSpacePoint(p1, q1), cfg=cfg)
            b = coherent_state(PhaseSpacePoint(p2, q2), cfg=cfg)
            err = max(err, abs(overlap(b, a) - kernel(p2, q2, p1, q1, None, cfg.hbar)))
        return err
    rep.check("overlap vs closed-form kernel", kernel_err, 1e-9)
    quad = default_quadrature(cfg)
    rep.check("quadrature self-calibration", quad.calibration_defect, 1e-10)
    rep.check("resolution of unity (16-dim block)",
              lambda: resolution_of_unity_defect(quad, FiducialSpec(), cfg, 16), 1e-8,
              "needs fock_dim >= 16" if cfg.fock_dim < 16 else "")
    rep.check("kernel chain rule", lambda: kernel_chain_defect((1, 0), (0, 0), quad, None, cfg), 1e-8)


def _symbols(rep: Report, cfg: GlobalConfig, seed: int):
    n = cfg.interior
    hb = cfg.hbar
    T = toeplitz_quantize(harmonic(), cfg=cfg)
    ref = polynomial_operator(harmonic(0.5 * hb), cfg)
    rep.check("Toeplitz(h.o.) = (P^2+Q^2+hbar)/2", lambda: np.abs(T.block(n) - ref.block(n)).max(), 1e-8)
    H = polynomial_operator(harmonic(-0.5 * hb), cfg)
    pts = [(1.0, 1.0), (0.5, -1.5), (-2.0, 0.3)]
    rep.check("upper symbol of (P^2+Q^2-hbar)/2", lambda: max(
        abs(upper_symbol(H, PhaseSpacePoint(p, q), None, cfg) - 0.5 * (p * p + q * q)) for p, q in pts), 1e-7)
    rep.check("upper(Toeplitz(h)) - h = hbar",
              lambda: np.abs(upper_of_toeplitz_gap(harmonic(), None, None, cfg)[2] - hb).max(), 1e-7)
    polar_h = ClassicalObservable(((1.0, 1, 0),), chart_id=POLAR)
    Tp = toeplitz_quantize(transport(polar_h, POLAR, "cartesian"), cfg=cfg)
    rep.check("chart fixity (polar p~ vs cartesian)", lambda: np.abs(Tp.entries - T.entries).max(), 1e-9)
    b = min(16, n)
    rep.check("Toeplitz(q) = Q (16-dim block)", lambda: np.abs(
        toeplitz_quantize(ClassicalObservable(((1.0, 0, 1),)), cfg=cfg).block(b)
        - build_kinematics(cfg)[1].block(b)).max(), 1e-10)


def _semiclassical(rep: Report, cfg: GlobalConfig, seed: int):
    hb = cfg.hbar
    exact = (np.arange(11) + 0.5) * hb
    rep.check("harmonic BS levels (cartesian)",
              lambda: np.abs(np.array(bohr_sommerfeld_levels(harmonic(), 10, cfg)) - exact).max(), 1e-8)
    polar_h = ClassicalObservable(((1.0, 1, 0),), chart_id=POLAR)
    rep.check("harmonic BS levels (polar)",
              lambda: np.abs(np.array(bohr_sommerfeld_levels(polar_h, 10, cfg)) - exact).max(), 1e-8)

    def quartic_err():
        bs = np.array(bohr_sommerfeld_levels(QUARTIC, 5, cfg))
        qm = observable_spectrum(QUARTIC, 6, cfg).values
        return np.max(np.abs(bs[2:] - qm[2:]) / qm[2:])
    rep.check("quartic BS vs Fock spectrum (n=2..5)", quartic_err, 0.02)
    rep.check("area invariance cartesian/polar", lambda: area_invariance_check(
        harmonic(), "cartesian", POLAR, 1.0), 1e-5)
    rep.check("area invariance quartic cartesian/rotated", lambda: area_invariance_check(
        QUARTIC, "cartesian", "rotated_45", 2.0), 1e-5)


def _dynamics(rep: Report, cfg: GlobalConfig, seed: int):
    hb = cfg.hbar
    rep.check("Fresnel toy error at nu=1000", lambda: abs(fresnel_toy(1000.0) - FRESNEL_LIMIT), 2e-3)
    free = ClassicalObservable(((0.5, 2, 0),))
    rep.check("lattice free particle", lambda: max(
        abs(lattice_weyl_propagator(free, 0.3, -0.4, LatticeConfig(1.0, N), cfg).value
            - free_kernel(-0.4, 0.3, 1.0, hb)) for N in (1, 10, 100)), 1e-10)

    def order():
        errs = [abs(lattice_weyl_propagator(harmonic(), 0.0, 0.0, LatticeConfig(math.pi / 2, N), cfg).value
                    - mehler_kernel(0.0, 0.0, math.pi / 2, hb)) for N in (100, 200, 400)]
        rates = [math.log2(errs[0] / errs[1]), math.log2(errs[1] / errs[2])]
        return max(abs(r - 1.0) for r in rates)
    rep.check("lattice h.o. first-order rate |order - 1|", order, 0.05)
    w = WienerConfig(4.0, seed=seed)

    def h0():
        e = wiener_propagator(ClassicalObservable(()), (0, 0), (0.5, 0), 0.5, w, None, cfg)
        return abs(e.value - kernel(0.5, 0, 0, 0, None, hb)) / e.stderr
    rep.check("Wiener h=0 (deviation / stderr)", h0, 3.0)

    def ho():
        e4 = wiener_propagator(harmonic(), (0, 0), (0, 0), 0.5, w, None, cfg)
        e8 = wiener_propagator(harmonic(), (0, 0), (0, 0), 0.5, w.replace(nu=8.0), None, cfg)
        r = richardson(e4, e8)
        ex = exact_propagator(harmonic(), (0, 0), (0, 0), 0.5, None, None, cfg).value
        return abs(r.value - ex) / r.stderr
    rep.check("Wiener h.o. Richardson (deviation / stderr)", ho, 3.0)


def _spin(rep: Report, cfg: GlobalConfig, seed: int, spins=(0.5, 1.0, 2.0)):
    for s in spins:
        sp = SpinSpec(s, cfg.hbar)
        rep.check(f"Casimir s={s:g}", lambda sp=sp: casimir_defect(sp), 1e-12)
        n = int(4 * s + 16)
        rep.check(f"spin resolution s={s:g}", lambda sp=sp, n=n: spin_resolution_defect(sp, n, n), 1e-10)

        def roundness(sp=sp):
            worst = 0.0
            for th in (0.4, 1.0, 1.5, 2.5):
                g = spin_induced_metric(th, 0.7, sp)
                worst = max(worst, abs(g[1, 1] / g[0, 0] - math.sin(th) ** 2))
            return worst
        rep.check(f"spin metric roundness s={s:g}", roundness, 1e-5)


def _geometry_rows(rep: Report, cfg: GlobalConfig):
    hb = cfg.hbar
    rep.check("metric = hbar I (omega=1)", lambda: max(
        np.abs(metric((p, q), None, cfg) - hb * np.eye(2)).max()
        for p in (-2, 0, 2) for q in (-1, 1)), 1e-6)
    f2 = FiducialSpec(2.0)
    rep.check("metric = moment formula (omega=2)", lambda: np.abs(
        metric((0.5, 0.2), f2, cfg) - moment_metric(fiducial_moments(f2, cfg))).max(), 1e-7)
    rep.check("polar chart metric", lambda: np.abs(
        metric_in_chart(POLAR, PhaseSpacePoint(2.0, 0.3, POLAR), None, cfg)
        - np.diag([hb / 4.0, 4.0 * hb])).max(), 1e-7)
    rep.check("flatness (Gaussian curvature)", lambda: abs(flatness(None, cfg)), 1e-3)


def verify_suite(name: str, cfg: GlobalConfig | None = None, seed: int = 0,
                 spins=None) -> Report:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
    cfg = cfg or GlobalConfig()
    rep = Report(name)
    t0 = time.perf_counter()
    if name == "core":
        _core(rep, cfg, seed)
    elif name == "symbols":
        _symbols(rep, cfg, seed)
        _geometry_rows(rep, cfg)
    elif name == "semiclassical":
        _semiclassical(rep, cfg, seed)
    elif name == "dynamics":
        _dynamics(rep, cfg, seed)
    else:
        _spin(rep, cfg, seed, spins or (0.5, 1.0, 2.0))
    rep.seconds = time.perf_counter() - t0
    return rep

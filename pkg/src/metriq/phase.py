"""Phase-space points, canonical charts and classical observables.

Everything routes through the Cartesian chart ``(p, q)``.  Other charts are
explicit maps to and from it, so an observable is always tied to the chart its
formula is written in and is never silently reinterpreted in another one.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ChartMismatch, DomainError, InvalidParameter, NumericalOverflow

CARTESIAN = "cartesian"
POLAR = "polar_action_angle"
ROTATED_45 = "rotated_45"

# A polynomial in two variables: {(i, j): c} for sum c * x**i * y**j.
Poly = dict


@dataclass(frozen=True)
class PhaseSpacePoint:
    c1: float
    c2: float
    chart_id: str = CARTESIAN

    def __post_init__(self):
        object.__setattr__(self, "c1", float(self.c1))
        object.__setattr__(self, "c2", float(self.c2))
        if not (math.isfinite(self.c1) and math.isfinite(self.c2)):
            raise DomainError(f"non-finite coordinates ({self.c1}, {self.c2})")
        if self.chart_id == POLAR and self.c1 <= 0:
            raise DomainError("polar action coordinate must be positive")

    def as_tuple(self) -> tuple[float, float]:
        return (self.c1, self.c2)


@dataclass(frozen=True)
class Chart:
    """A canonical coordinate system given by explicit maps to Cartesian.

    ``gauge`` is the scalar ``G`` with ``c1 dc2 + dG = p dq``; it is what the
    action picks up when a path is written in this chart, and it vanishes for
    the Cartesian chart.  ``from_cartesian_poly`` / ``to_cartesian_poly`` hold
    polynomial forms of the coordinate maps where those exist (``None`` per
    component otherwise) and let :func:`transport` stay polynomial.
    """

    id: str
    to_cartesian: Callable
    from_cartesian: Callable
    domain: Callable = field(default=lambda p, q: np.ones(np.broadcast(p, q).shape, bool))
    gauge: Callable = field(default=lambda c1, c2: np.zeros(np.broadcast(c1, c2).shape))
    to_cartesian_poly: tuple | None = None
    from_cartesian_poly: tuple | None = None
    jac: Callable | None = None

    def contains(self, p, q) -> np.ndarray:
        return np.asarray(self.domain(p, q), bool)

    def jacobian(self, c1: float, c2: float, step: float | None = None) -> np.ndarray:
        """d(p, q)/d(c1, c2); analytic when the chart provides it."""
        if self.jac is not None and step is None:
            return np.asarray(self.jac(float(c1), float(c2)), float)
        out = np.empty((2, 2))
        for k, x in enumerate((c1, c2)):
            h = step or 1e-3 * (1.0 + abs(x))
            shifts = np.array([-2, -1, 1, 2]) * h
            c = np.array([1, -8, 8, -1]) / (12 * h)
            if k == 0:
                p, q = self.to_cartesian(c1 + shifts, np.full(4, c2))
            else:
                p, q = self.to_cartesian(np.full(4, c1), c2 + shifts)
            out[0, k] = c @ p
            out[1, k] = c @ q
        return out


def _polar_to(c1, c2):
    c1 = np.asarray(c1, float)
    if np.any(c1 <= 0):
        raise DomainError("polar chart excludes the origin (action must be > 0)")
    r = np.sqrt(2.0 * c1)
    return r * np.cos(c2), r * np.sin(c2)


def _polar_from(p, q):
    p, q = np.asarray(p, float), np.asarray(q, float)
    if np.any((p == 0) & (q == 0)):
        raise DomainError("polar chart is undefined at p = q = 0")
    return 0.5 * (p * p + q * q), np.arctan2(q, p)


_S = 1.0 / math.sqrt(2.0)


def _polar_jac(c1, c2):
    if c1 <= 0:
        raise DomainError("polar chart excludes the origin (action must be > 0)")
    r = math.sqrt(2.0 * c1)
    c, s = math.cos(c2), math.sin(c2)
    return [[c / r, -r * s], [s / r, r * c]]


def _rot_from(p, q):
    p, q = np.asarray(p, float), np.asarray(q, float)
    return _S * (p + q), _S * (q - p)


def _rot_to(c1, c2):
    c1, c2 = np.asarray(c1, float), np.asarray(c2, float)
    return _S * (c1 - c2), _S * (c1 + c2)


def _identity(a, b):
    return np.asarray(a, float), np.asarray(b, float)


_LINEAR_P = {(1, 0): 1.0}
_LINEAR_Q = {(0, 1): 1.0}

_BUILTIN = (
    Chart(
        id=CARTESIAN,
        to_cartesian=_identity,
        from_cartesian=_identity,
        to_cartesian_poly=(_LINEAR_P, _LINEAR_Q),
        from_cartesian_poly=(_LINEAR_P, _LINEAR_Q),
        jac=lambda c1, c2: np.eye(2),
    ),
    Chart(
        id=POLAR,
        to_cartesian=_polar_to,
        from_cartesian=_polar_from,
        domain=lambda p, q: ~((np.asarray(p) == 0) & (np.asarray(q) == 0)),
        # p dq - pt dqt = d(pq/2), with pq = pt * sin(2 qt)
        gauge=lambda c1, c2: 0.5 * np.asarray(c1) * np.sin(2.0 * np.asarray(c2)),
        to_cartesian_poly=(None, None),
        from_cartesian_poly=({(2, 0): 0.5, (0, 2): 0.5}, None),
        jac=_polar_jac,
    ),
    Chart(
        id=ROTATED_45,
        to_cartesian=_rot_to,
        from_cartesian=_rot_from,
        # p dq - pb dqb = d(pq/2 + (p^2 - q^2)/4)
        gauge=lambda c1, c2: 0.25 * (np.asarray(c1) ** 2 - np.asarray(c2) ** 2)
        - 0.5 * np.asarray(c1) * np.asarray(c2),
        to_cartesian_poly=({(1, 0): _S, (0, 1): -_S}, {(1, 0): _S, (0, 1): _S}),
        from_cartesian_poly=({(1, 0): _S, (0, 1): _S}, {(1, 0): -_S, (0, 1): _S}),
        jac=lambda c1, c2: np.array([[_S, -_S], [_S, _S]]),
    ),
)
_REGISTRY = {c.id: c for c in _BUILTIN}


def builtin_charts() -> list[Chart]:
    return list(_BUILTIN)


def get_chart(chart: str | Chart) -> Chart:
    if isinstance(chart, Chart):
        return chart
    try:
        return _REGISTRY[chart]
    except KeyError:
        raise ChartMismatch(f"unknown chart id {chart!r}") from None


def to_cartesian(pt: PhaseSpacePoint) -> PhaseSpacePoint:
    if pt.chart_id == CARTESIAN:
        return pt
    p, q = get_chart(pt.chart_id).to_cartesian(pt.c1, pt.c2)
    return PhaseSpacePoint(float(p), float(q), CARTESIAN)


def from_cartesian(pt: PhaseSpacePoint, chart: str | Chart) -> PhaseSpacePoint:
    chart = get_chart(chart)
    if pt.chart_id != CARTESIAN:
        pt = to_cartesian(pt)
    c1, c2 = chart.from_cartesian(pt.c1, pt.c2)
    return PhaseSpacePoint(float(c1), float(c2), chart.id)


# -- polynomial helpers -------------------------------------------------------

def _poly_mul(a: Poly, b: Poly) -> Poly:
    out: Poly = {}
    for (i1, j1), c1 in a.items():
        for (i2, j2), c2 in b.items():
            key = (i1 + i2, j1 + j2)
            out[key] = out.get(key, 0.0) + c1 * c2
    return out


def _poly_pow(a: Poly, n: int) -> Poly:
    out: Poly = {(0, 0): 1.0}
    for _ in range(n):
        out = _poly_mul(out, a)
    return out


def _poly_compose(terms: Poly, x: Poly | None, y: Poly | None) -> Poly:
    out: Poly = {}
    for (i, j), c in terms.items():
        part = {(0, 0): c}
        if i:
            part = _poly_mul(part, _poly_pow(x, i))
        if j:
            part = _poly_mul(part, _poly_pow(y, j))
        for k, v in part.items():
            out[k] = out.get(k, 0.0) + v
    return {k: v for k, v in out.items() if v != 0.0}


@dataclass(frozen=True)
class ClassicalObservable:
    """A real function on phase space written in a definite chart.

    Polynomial observables carry ``terms`` as ``(coefficient, i, j)`` triples
    meaning ``sum c * c1**i * c2**j``.  Non-polynomial ones carry a vectorised
    ``evaluator(c1, c2)`` instead.
    """

    terms: tuple = ()
    chart_id: str = CARTESIAN
    evaluator: Callable | None = None
    label: str = ""

    def __post_init__(self):
        clean = []
        for t in self.terms:
            c, i, j = t
            if int(i) != i or int(j) != j or i < 0 or j < 0:
                raise InvalidParameter(f"bad exponents in term {t!r}")
            if not math.isfinite(c):
                raise InvalidParameter(f"non-finite coefficient in term {t!r}")
            clean.append((float(c), int(i), int(j)))
        object.__setattr__(self, "terms", tuple(clean))

    @classmethod
    def from_poly(cls, poly: Mapping, chart_id: str = CARTESIAN, label: str = ""):
        terms = tuple((c, i, j) for (i, j), c in sorted(poly.items()) if c != 0.0)
        return cls(terms=terms, chart_id=chart_id, label=label)

    @property
    def is_polynomial(self) -> bool:
        return self.evaluator is None

    @property
    def poly(self) -> Poly:
        out: Poly = {}
        for c, i, j in self.terms:
            out[(i, j)] = out.get((i, j), 0.0) + c
        return out

    @property
    def degree(self) -> int:
        if not self.is_polynomial:
            raise InvalidParameter("degree is undefined for evaluator observables")
        return max((i + j for c, i, j in self.terms if c != 0.0), default=0)

    def values(self, c1, c2) -> np.ndarray:
        """Vectorised evaluation in this observable's own chart."""
        c1, c2 = np.asarray(c1, float), np.asarray(c2, float)
        if self.evaluator is not None:
            out = np.asarray(self.evaluator(c1, c2), float)
            return np.broadcast_to(out, np.broadcast(c1, c2).shape).copy()
        out = np.zeros(np.broadcast(c1, c2).shape)
        for c, i, j in self.terms:
            out = out + c * c1**i * c2**j
        return out

    def to_json(self) -> dict:
        if not self.is_polynomial:
            raise InvalidParameter("evaluator observables have no JSON form")
        return {"chart": self.chart_id, "terms": [list(t) for t in self.terms]}


def observable_from_json(data: str | Mapping) -> ClassicalObservable:
    """Parse ``{"chart": "cartesian", "terms": [[c, i, j], ...]}``."""
    if isinstance(data, str):
        data = json.loads(data)
    chart_id = data.get("chart", CARTESIAN)
    get_chart(chart_id)
    terms = data.get("terms")
    if not isinstance(terms, Sequence) or any(len(t) != 3 for t in terms):
        raise InvalidParameter("'terms' must be a list of [coefficient, i, j]")
    return ClassicalObservable(terms=tuple(tuple(t) for t in terms), chart_id=chart_id,
                               label=data.get("label", ""))


def evaluate(obs: ClassicalObservable, pt: PhaseSpacePoint) -> float:
    if pt.chart_id != obs.chart_id:
        raise ChartMismatch(f"point in {pt.chart_id!r}, observable in {obs.chart_id!r}")
    val = float(obs.values(pt.c1, pt.c2))
    if not math.isfinite(val):
        raise NumericalOverflow(f"observable is not finite at {pt.as_tuple()}")
    return val


def transport(obs: ClassicalObservable, source: str | Chart, target: str | Chart) -> ClassicalObservable:
    """Rewrite ``obs`` (written in ``source``) in the coordinates of ``target``.

    The new observable takes the same value at every phase-space point.  The
    result stays polynomial when the coordinate substitution is polynomial.
    """
    source, target = get_chart(source), get_chart(target)
    if obs.chart_id != source.id:
        raise ChartMismatch(f"observable is written in {obs.chart_id!r}, not {source.id!r}")
    if source.id == target.id:
        return obs

    if obs.is_polynomial:
        poly = obs.poly
        uses1 = any(i > 0 for i, _ in poly)
        uses2 = any(j > 0 for _, j in poly)
        subs = _substitution(source, target)
        if subs is not None and (subs[0] is not None or not uses1) and (subs[1] is not None or not uses2):
            return ClassicalObservable.from_poly(
                _poly_compose(poly, subs[0], subs[1]), target.id, obs.label)

    def evaluator(d1, d2, _obs=obs, _s=source, _t=target):
        p, q = _t.to_cartesian(d1, d2)
        if not np.all(_s.contains(p, q)):
            raise DomainError(f"point outside the {_s.id!r} chart domain")
        c1, c2 = _s.from_cartesian(p, q)
        return _obs.values(c1, c2)

    return ClassicalObservable(chart_id=target.id, evaluator=evaluator, label=obs.label)


def _substitution(source: Chart, target: Chart):
    """Polynomials giving source coordinates as functions of target ones."""
    if source.from_cartesian_poly is None or target.to_cartesian_poly is None:
        return None
    tp, tq = target.to_cartesian_poly
    out = []
    for comp in source.from_cartesian_poly:
        if comp is None:
            out.append(None)
            continue
        uses_p = any(i > 0 for i, _ in comp)
        uses_q = any(j > 0 for _, j in comp)
        if (uses_p and tp is None) or (uses_q and tq is None):
            out.append(None)
        else:
            out.append(_poly_compose(comp, tp, tq))
    return tuple(out)


def harmonic(shift: float = 0.0) -> ClassicalObservable:
    """``(p^2 + q^2)/2 + shift`` in the Cartesian chart."""
    terms = [(0.5, 2, 0), (0.5, 0, 2)]
    if shift:
        terms.append((shift, 0, 0))
    return ClassicalObservable(terms=tuple(terms), label="harmonic")

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metriq.errors import ChartMismatch, DomainError, InvalidParameter
from metriq.phase import (CARTESIAN, POLAR, ROTATED_45, ClassicalObservable, PhaseSpacePoint,
                          builtin_charts, evaluate, from_cartesian, get_chart, harmonic,
                          observable_from_json, to_cartesian, transport)

coord = st.floats(-5, 5, allow_nan=False)
nonzero_pair = st.tuples(coord, coord).filter(lambda x: math.hypot(*x) > 1e-3)


def test_builtin_ids():
    assert {c.id for c in builtin_charts()} == {CARTESIAN, POLAR, ROTATED_45}


def test_unknown_chart():
    with pytest.raises(ChartMismatch):
        get_chart("spherical")


@settings(max_examples=60, deadline=None)
@given(nonzero_pair, st.sampled_from([CARTESIAN, POLAR, ROTATED_45]))
def test_round_trip(pq, chart):
    pt = PhaseSpacePoint(*pq)
    back = to_cartesian(from_cartesian(pt, chart))
    assert back.c1 == pytest.approx(pq[0], abs=1e-12)
    assert back.c2 == pytest.approx(pq[1], abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(nonzero_pair, st.sampled_from([CARTESIAN, POLAR, ROTATED_45]))
def test_charts_are_canonical(pq, chart_id):
    # det d(p,q)/d(c1,c2) = 1 keeps dp ^ dq invariant
    ch = get_chart(chart_id)
    c = from_cartesian(PhaseSpacePoint(*pq), ch)
    assert np.linalg.det(ch.jacobian(c.c1, c.c2)) == pytest.approx(1.0, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(nonzero_pair, st.sampled_from([POLAR, ROTATED_45]))
def test_gauge_closes_one_forms(pq, chart_id):
    # p dq - c1 dc2 = dG along a short segment, checked by midpoint integration
    ch = get_chart(chart_id)
    c0 = np.array(from_cartesian(PhaseSpacePoint(*pq), ch).as_tuple())
    d = np.array([0.3, -0.2]) * 1e-3 * (1 + abs(c0[0]))
    t = (np.arange(200) + 0.5) / 200
    c = c0[:, None] + d[:, None] * t
    if chart_id == POLAR and np.any(c[0] <= 0):
        return
    J = np.array([ch.jacobian(a, b) for a, b in c.T])
    p, _ = ch.to_cartesian(c[0], c[1])
    dq = J[:, 1, :] @ d
    lhs = np.sum(p * dq - c[0] * d[1]) / 200
    rhs = ch.gauge(*(c0 + d)) - ch.gauge(*c0)
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_polar_domain():
    with pytest.raises(DomainError):
        PhaseSpacePoint(0.0, 1.0, POLAR)
    with pytest.raises(DomainError):
        from_cartesian(PhaseSpacePoint(0.0, 0.0), POLAR)


def test_point_rejects_nan():
    with pytest.raises(DomainError):
        PhaseSpacePoint(float("nan"), 0.0)


def test_observable_json_round_trip():
    src = {"chart": "cartesian", "terms": [[0.5, 2, 0], [0.5, 0, 2], [1.0, 0, 4]]}
    h = observable_from_json(json.dumps(src))
    assert h.degree == 4
    assert observable_from_json(h.to_json()) == h
    assert float(h.values(1.0, 1.0)) == pytest.approx(2.0)


def test_observable_json_errors():
    with pytest.raises(InvalidParameter):
        observable_from_json({"terms": [[1.0, 2]]})
    with pytest.raises(ChartMismatch):
        observable_from_json({"chart": "nowhere", "terms": []})


def test_evaluate_checks_chart():
    with pytest.raises(ChartMismatch):
        evaluate(harmonic(), PhaseSpacePoint(1.0, 0.0, POLAR))


@settings(max_examples=50, deadline=None)
@given(nonzero_pair, st.sampled_from([POLAR, ROTATED_45]))
def test_transport_preserves_values(pq, target):
    h = ClassicalObservable(((0.5, 2, 0), (0.5, 0, 2), (1.0, 0, 4), (0.3, 1, 1)))
    ht = transport(h, CARTESIAN, target)
    c = from_cartesian(PhaseSpacePoint(*pq), target)
    assert float(ht.values(c.c1, c.c2)) == pytest.approx(float(h.values(*pq)), rel=1e-10, abs=1e-10)


def test_transport_stays_polynomial():
    assert transport(harmonic(), CARTESIAN, ROTATED_45).is_polynomial
    polar_h = ClassicalObservable(((1.0, 1, 0),), chart_id=POLAR)
    back = transport(polar_h, POLAR, CARTESIAN)
    assert back.is_polynomial
    assert dict(back.poly) == pytest.approx({(2, 0): 0.5, (0, 2): 0.5})


def test_transport_wrong_source():
    with pytest.raises(ChartMismatch):
        transport(harmonic(), POLAR, CARTESIAN)

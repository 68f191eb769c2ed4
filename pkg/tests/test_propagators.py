import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from metriq.coherent import kernel
from metriq.config import GlobalConfig
from metriq.errors import (InvalidParameter, NumericalOverflow, UnsupportedChart,
                           UnsupportedObservable, VarianceBlowup)
from metriq.phase import POLAR, ROTATED_45, ClassicalObservable, PhaseSpacePoint, harmonic
from metriq.propagators import (FRESNEL_LIMIT, _tridiagonal_log_det, LatticeConfig, PropagatorEstimate,
                                WienerConfig, chart_covariance_check, evolution, exact_propagator,
                                free_kernel, free_wiener_raw, fresnel_toy, lattice_kernel,
                                lattice_weyl_propagator, mehler_kernel, richardson,
                                sample_bridge, sample_bridges, wiener_propagator)
from metriq.toeplitz import weyl_symbol

from oracles import coherent_coeffs, grid_packet_propagation, lattice_recursion, wiener_gaussian_reference

FREE = ClassicalObservable(((0.5, 2, 0),))
ZERO = ClassicalObservable(((0.0, 0, 0),))
SMALL = dict(n_samples=20_000, n_steps=32)


def test_fresnel_toy_converges():
    errs = [abs(fresnel_toy(nu) - FRESNEL_LIMIT) for nu in (10, 100, 1000, 10_000)]
    assert all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))
    assert errs[-1] < 1e-3
    with pytest.raises(InvalidParameter):
        fresnel_toy(0.0)


@pytest.mark.parametrize("N", [1, 7, 100, 1000, 5000])
def test_free_lattice_is_exact(N):
    T = 0.8
    q1, q2 = np.meshgrid(np.linspace(-2, 2, 5), np.linspace(-2, 2, 5))
    K = lattice_kernel(FREE, LatticeConfig(T, N))
    ref = free_kernel(q2, q1, T)
    assert np.abs(K(q2, q1) - ref).max() <= 1e-10


@pytest.mark.parametrize("N", [1, 3, 50])
def test_oscillator_lattice_matches_step_composition(N):
    T = 1.1
    K = lattice_kernel(harmonic(), LatticeConfig(T, N))
    ref = lattice_recursion(T, N)
    q = np.linspace(-1.5, 1.5, 4)
    q1, q2 = np.meshgrid(q, q)
    assert np.abs(K(q2, q1) - ref(q2, q1)).max() < 1e-12


def test_mehler_kernel_evolves_a_packet():
    T, q0, p0 = 1.0, 0.7, -0.4
    psi0 = lambda x: np.pi ** -0.25 * np.exp(-0.5 * (x - q0) ** 2 + 1j * p0 * x)
    x, dx, psi_T = grid_packet_propagation(lambda x: 0.5 * x * x, psi0, T)
    y = np.linspace(-10, 10, 4001)
    xs = np.linspace(-2, 2, 9)
    ours = np.trapezoid(mehler_kernel(xs[:, None], y[None, :], T) * psi0(y)[None, :], y, axis=1)
    ref = np.interp(xs, x, psi_T.real) + 1j * np.interp(xs, x, psi_T.imag)
    assert np.abs(ours - ref).max() < 2e-4


def test_lattice_converges_to_mehler_at_first_order():
    T = 1.0
    q1, q2 = 0.3, -0.6
    Ns = (99, 199, 399)
    errs = [abs(lattice_weyl_propagator(harmonic(), q1, q2, LatticeConfig(T, N)).value
                - mehler_kernel(q2, q1, T)) for N in Ns]
    eps = [T / (N + 1) for N in Ns]
    rates = [math.log(errs[i] / errs[i + 1]) / math.log(eps[i] / eps[i + 1]) for i in range(2)]
    assert all(abs(r - 1) < 0.01 for r in rates)


def test_lattice_coherent_element_tracks_exact():
    # the lattice is a Weyl route, so it takes the Weyl symbol of Toeplitz(h)
    h = harmonic()
    a, b, T = (0.3, -0.2), (0.1, 0.5), 0.7
    exact = exact_propagator(h, a, b, T).value
    hw = weyl_symbol(h)
    e = [abs(lattice_kernel(hw, LatticeConfig(T, N)).coherent_element(b, a) - exact) for N in (400, 800)]
    assert e[0] < 5e-4
    assert e[1] < 0.6 * e[0]


@pytest.mark.parametrize("hbar", [0.5, 1.0])
def test_exact_propagator_against_fock_sum(hbar):
    # Toeplitz(p^2/2 + q^2/2) = hbar (N + 1)
    cfg = GlobalConfig(hbar=hbar)
    a, b, T = (0.4, -0.3), (-0.2, 0.6), 0.9
    ca = coherent_coeffs(*a, 80, 1.0, hbar)
    cb = coherent_coeffs(*b, 80, 1.0, hbar)
    ref = np.sum(np.conj(cb) * np.exp(-1j * (np.arange(80) + 1) * T) * ca)
    assert abs(exact_propagator(harmonic(), a, b, T, cfg=cfg).value - ref) < 1e-10


def test_exact_propagator_at_zero_time_is_kernel(cfg):
    a, b = (0.4, -0.3), (-0.2, 0.6)
    assert abs(exact_propagator(ZERO, a, b, 1.0, cfg=cfg).value - kernel(*b, *a)) < 1e-12


def test_lattice_rejects_non_quadratic():
    with pytest.raises(UnsupportedObservable):
        lattice_kernel(ClassicalObservable(((0.5, 2, 0), (1.0, 0, 4))), LatticeConfig(1.0, 10))
    with pytest.raises(UnsupportedObservable):
        lattice_kernel(ClassicalObservable(((0.5, 0, 2),)), LatticeConfig(1.0, 10))
    with pytest.raises(InvalidParameter):
        LatticeConfig(1.0, 0)
    with pytest.raises(InvalidParameter):
        LatticeConfig(-1.0, 5)


@pytest.mark.parametrize("b", [(0.0, 0.0), (0.5, -0.3)])
def test_wiener_matches_gaussian_reference(b):
    a, T, nu = (0.2, 0.1), 0.5, 4.0
    w = WienerConfig(nu, **SMALL)
    est = wiener_propagator(harmonic(), a, b, T, w)
    ref = wiener_gaussian_reference((0.5, 0, 0.5, 0, 0, 0), a, b, T, nu, w.n_steps)
    assert abs(est.value - ref) <= 4 * est.stderr


def test_unprojected_free_estimator():
    a, b, T, nu = (0.0, 0.0), (0.3, 0.2), 0.5, 4.0
    w = WienerConfig(nu, project=False, **SMALL)
    est = wiener_propagator(ZERO, a, b, T, w)
    ref = free_wiener_raw(a, b, T, nu)
    assert abs(est.value - ref) <= 4 * est.stderr
    # the discretised estimator is exact for h = 0 with the Levy correction
    disc = wiener_gaussian_reference((0, 0, 0, 0, 0, 0), a, b, T, nu, w.n_steps, project=False)
    assert abs(disc - ref) < 1e-10


def test_projected_free_estimator_is_the_kernel():
    a, b = (0.0, 0.0), (0.3, 0.2)
    ref = wiener_gaussian_reference((0, 0, 0, 0, 0, 0), a, b, 0.5, 4.0, 32)
    assert abs(ref - kernel(*b, *a)) < 1e-10


def test_budget_and_chart_errors():
    w = WienerConfig(4.0, **SMALL)
    with pytest.raises(VarianceBlowup):
        wiener_propagator(harmonic(), (0, 0), (0, 0), 1.0, w.replace(nu=1e6))
    with pytest.raises(VarianceBlowup):
        wiener_propagator(harmonic(), (0, 0), (0, 0), 2.0, w)
    polar_h = ClassicalObservable(((1.0, 1, 0),), chart_id=POLAR)
    with pytest.raises(UnsupportedChart):
        wiener_propagator(polar_h, (1.0, 0.0), (1.0, 0.2), 0.5, w, chart=POLAR)
    with pytest.raises(UnsupportedChart):
        chart_covariance_check(harmonic(), POLAR, (0, 0), (0, 0), 0.5, w)


@pytest.mark.parametrize("kw", [dict(nu=0.0), dict(nu=1.0, n_steps=4), dict(nu=1.0, n_batches=5),
                                dict(nu=1.0, n_samples=1001), dict(nu=1.0, seed=-1)])
def test_wiener_config_validation(kw):
    with pytest.raises(InvalidParameter):
        WienerConfig(**kw)


def test_seed_determinism_and_thread_independence():
    w = WienerConfig(4.0, **SMALL)
    a, b = (0.2, 0.1), (0.5, -0.3)
    e1 = wiener_propagator(harmonic(), a, b, 0.5, w.replace(threads=1))
    e2 = wiener_propagator(harmonic(), a, b, 0.5, w.replace(threads=4))
    e3 = wiener_propagator(harmonic(), a, b, 0.5, w.replace(seed=1))
    assert e1.value == e2.value and e1.stderr == e2.stderr
    assert e1.value != e3.value


def test_bridges_are_pinned_with_the_right_spread():
    w = WienerConfig(2.0, n_samples=40_000, n_steps=16)
    a, b, T = (0.5, -1.0), (1.5, 0.0), 0.8
    paths = sample_bridges(a, b, T, w)
    assert np.allclose(paths.p_path[:, 0], a[0]) and np.allclose(paths.q_path[:, -1], b[1])
    mid = paths.p_path[:, 8]
    assert mid.mean() == pytest.approx(1.0, abs=0.02)
    assert mid.var() == pytest.approx(w.nu * T / 4, rel=0.05)
    one = sample_bridge(a, b, T, w, index=3)
    assert np.array_equal(one.q_path, paths.q_path[3])


def test_rotated_chart_agrees():
    w = WienerConfig(4.0, **SMALL)
    ratio, k0, k1 = chart_covariance_check(harmonic(), ROTATED_45, (0.2, 0.1), (0.5, -0.3), 0.5, w)
    assert ratio <= 3.0


def test_points_in_other_charts_are_accepted():
    w = WienerConfig(4.0, **SMALL)
    pt = PhaseSpacePoint(0.5, -0.3)
    e1 = wiener_propagator(harmonic(), (0.2, 0.1), pt, 0.5, w)
    e2 = wiener_propagator(harmonic(), (0.2, 0.1), (0.5, -0.3), 0.5, w)
    assert e1.value == e2.value


def test_quadratic_gauge_is_a_boundary_phase():
    # for quadratic G the midpoint sum of dG telescopes exactly
    w = WienerConfig(4.0, **SMALL)
    G = ClassicalObservable(((0.3, 1, 1), (0.2, 0, 2)))
    a, b, T = (0.2, 0.1), (0.5, -0.3), 0.5
    w0 = w.replace(project=False)
    e0 = wiener_propagator(harmonic(), a, b, T, w0)
    eG = wiener_propagator(harmonic(), a, b, T, w0, G=G)
    phase = np.exp(1j * (G.values(*b) - G.values(*a)))
    assert abs(eG.value - phase * e0.value) < 1e-10 * abs(e0.value)


def test_richardson_arithmetic():
    e1 = PropagatorEstimate(1.0 + 1j, 0.1, "wiener_mc", {"nu": 4.0})
    e2 = PropagatorEstimate(2.0 + 0j, 0.2, "wiener_mc", {"nu": 8.0})
    r = richardson(e1, e2)
    assert r.value == pytest.approx(3.0 - 1j)
    assert r.stderr == pytest.approx(math.hypot(1.6, 0.4) / 4)
    assert r.params["extrapolated"]
    with pytest.raises(InvalidParameter):
        richardson(e1, e1)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_tridiagonal_log_det_and_inertia(n, seed):
    rng = np.random.default_rng(seed)
    d, o = rng.normal(size=n), rng.normal(size=n - 1)
    A = np.diag(d) + np.diag(o, 1) + np.diag(o, -1)
    sign, logdet = np.linalg.slogdet(A)
    got, neg = _tridiagonal_log_det(d, o)
    assert got == pytest.approx(logdet, abs=1e-8)
    assert neg == int(np.sum(np.linalg.eigvalsh(A) < 0))


def test_singular_hessian_is_a_caustic():
    with pytest.raises(NumericalOverflow):
        _tridiagonal_log_det(np.array([1.0, 1.0]), np.array([1.0]))


def test_fresnel_toy_against_quadrature():
    re = quad(lambda y: math.cos(y * y / 2) * math.exp(-y * y / 2), -np.inf, np.inf)[0]
    im = quad(lambda y: math.sin(y * y / 2) * math.exp(-y * y / 2), -np.inf, np.inf)[0]
    assert abs(fresnel_toy(1.0) - complex(re, im)) < 1e-10
    assert abs(fresnel_toy(1.0)) == pytest.approx(math.sqrt(2 * math.pi / math.sqrt(2)), rel=1e-12)
    assert FRESNEL_LIMIT == pytest.approx(math.sqrt(math.pi) * (1 + 1j))


def test_exact_propagator_identities(cfg):
    a, b = (0.3, 0.1), (-0.2, 0.4)
    assert abs(exact_propagator(harmonic(), a, b, 0.0, cfg=cfg).value - kernel(*b, *a)) < 1e-12
    assert abs(exact_propagator(ZERO, a, b, 2.0, cfg=cfg).value - kernel(*b, *a)) < 1e-12
    # half a period of hbar (N + 1) sends the vacuum to minus itself
    v1 = exact_propagator(harmonic(), (0, 0), (0, 0), math.pi, cfg=cfg).value
    v2 = exact_propagator(harmonic(), (0, 0), (0, 0), math.pi, cfg=cfg.replace(fock_dim=128)).value
    assert abs(v1 + 1) < 1e-12
    assert abs(v1 - v2) < 1e-8


def test_free_lattice_at_the_origin():
    v = lattice_weyl_propagator(FREE, 0.0, 0.0, LatticeConfig(1.0, 200)).value
    assert abs(v - (2j * math.pi) ** -0.5) < 1e-3
    assert abs(v) == pytest.approx((2 * math.pi) ** -0.5, abs=1e-3)


def test_oscillator_lattice_error_at_the_origin():
    T = math.pi / 2
    v = lattice_weyl_propagator(harmonic(), 0.0, 0.0, LatticeConfig(T, 400)).value
    ref = mehler_kernel(0.0, 0.0, T)
    assert abs(v - ref) / abs(ref) < 1e-3


def test_free_kernel_short_time_scaling():
    v1 = lattice_weyl_propagator(FREE, 0.0, 0.3, LatticeConfig(0.2, 50)).value
    v2 = lattice_weyl_propagator(FREE, 0.0, 0.3, LatticeConfig(0.1, 50)).value
    assert abs(v2) / abs(v1) == pytest.approx(math.sqrt(2), rel=0.05)


def test_basis_bridge_round_trip():
    # as T -> 0 the free kernel tends to the identity, leaving the overlap
    K = lattice_kernel(FREE, LatticeConfig(1e-7, 1))
    assert abs(K.coherent_element((0.3, -0.2), (0.1, 0.5)) - kernel(0.3, -0.2, 0.1, 0.5)) < 1e-6


@pytest.mark.parametrize("T", [0.3, 0.5])
def test_free_bridge_matches_exact(T):
    # a single lattice step is exact for the free particle
    K = lattice_kernel(weyl_symbol(FREE), LatticeConfig(T, 1))
    a, b = (0.1, 0.5), (0.3, -0.2)
    assert abs(K.coherent_element(b, a) - exact_propagator(FREE, a, b, T).value) < 1e-10


def test_unitarity_in_the_coherent_representation(cfg, quad):
    col = evolution(harmonic(), 0.7, None, None, cfg).column(quad.p, quad.q, (0.4, -0.3))
    assert abs(np.sum(quad.weights * np.abs(col) ** 2) - 1) < 1e-3


def test_time_composition(cfg, quad):
    a, c, T1, T2 = (0.4, -0.3), (-0.5, 0.2), 0.3, 0.4
    first = evolution(harmonic(), T1, None, None, cfg).column(quad.p, quad.q, a)
    second = np.conj(evolution(harmonic(), -T2, None, None, cfg).column(quad.p, quad.q, c))
    direct = exact_propagator(harmonic(), a, c, T1 + T2, cfg=cfg).value
    assert abs(np.sum(quad.weights * second * first) - direct) < 1e-6


def test_antithetic_pairs_average_to_the_line():
    w = WienerConfig(2.0, n_samples=2000, n_steps=16)
    a, b, T = (0.5, -1.0), (1.5, 0.0), 0.8
    paths = sample_bridges(a, b, T, w)
    half = paths.p_path.shape[0] // 2
    line = a[0] + (b[0] - a[0]) * paths.times / T
    assert np.allclose(0.5 * (paths.p_path[:half] + paths.p_path[half:]), line, atol=1e-14)


def test_wiener_drifts_toward_exact_with_nu():
    ex = exact_propagator(harmonic(), (0, 0), (0, 0), 0.5).value
    w = WienerConfig(2.0)
    est = [wiener_propagator(harmonic(), (0, 0), (0, 0), 0.5, w.replace(nu=nu)) for nu in (2.0, 4.0, 8.0)]
    d = [abs(e.value - ex) for e in est]
    assert d[0] > d[1] > d[2]
    r = richardson(est[1], est[2])
    assert abs(r.value - ex) <= 3 * r.stderr


def test_step_doubling_is_below_noise():
    w = WienerConfig(4.0)
    e64 = wiener_propagator(harmonic(), (0, 0), (0, 0), 0.5, w)
    e128 = wiener_propagator(harmonic(), (0, 0), (0, 0), 0.5, w.replace(n_steps=128))
    assert abs(e128.value - e64.value) < 2 * e64.stderr


def test_antithetic_flag_does_not_change_the_mean():
    w = WienerConfig(4.0)
    e1 = wiener_propagator(harmonic(), (0, 0), (0, 0), 0.5, w)
    e2 = wiener_propagator(harmonic(), (0, 0), (0, 0), 0.5, w.replace(antithetic=False))
    assert abs(e1.value - e2.value) <= 3 * math.hypot(e1.stderr, e2.stderr)


@pytest.mark.parametrize("h", [harmonic(), ClassicalObservable(((1.0, 0, 2),))], ids=["oscillator", "q2"])
def test_rotated_chart_covariance(h):
    ratio, _, _ = chart_covariance_check(h, ROTATED_45, (0, 0), (1, 0), 0.5, WienerConfig(4.0))
    assert ratio < 3


def test_identity_chart_reruns_the_same_stream():
    ratio, k0, k1 = chart_covariance_check(harmonic(), "cartesian", (0, 0), (1, 0), 0.5, WienerConfig(4.0, **SMALL))
    assert ratio == 0.0 and k0.value == k1.value


def test_three_way_agreement():
    a, b, T = (0.2, 0.1), (0.5, -0.3), 0.5
    ex = exact_propagator(harmonic(), a, b, T).value
    lat = lattice_kernel(weyl_symbol(harmonic()), LatticeConfig(T, 800)).coherent_element(b, a)
    w = WienerConfig(4.0)
    mc = richardson(wiener_propagator(harmonic(), a, b, T, w),
                    wiener_propagator(harmonic(), a, b, T, w.replace(nu=8.0)))
    assert abs(lat - ex) < 5e-4
    assert abs(mc.value - ex) <= 3 * mc.stderr
    assert abs(mc.value - lat) <= 3 * mc.stderr + 5e-4

"""Independent reference computations used only by the tests."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln


def coherent_coeffs(p, q, n, omega=1.0, hbar=1.0):
    """Analytic ``<k|p,q>`` for ``k < n``: ``e^{-ipq/2hbar} e^{-|z|^2/2} z^k / sqrt(k!)``."""
    z = (omega * q + 1j * p) / math.sqrt(2 * omega * hbar)
    k = np.arange(n)
    with np.errstate(divide="ignore"):
        logmag = k * np.log(abs(z)) if z != 0 else np.where(k == 0, 0.0, -np.inf)
    mag = np.exp(logmag - 0.5 * gammaln(k + 1) - 0.5 * abs(z) ** 2)
    return np.exp(-1j * p * q / (2 * hbar)) * mag * np.exp(1j * k * np.angle(z))


def closed_kernel(p2, q2, p1, q1, omega=1.0, hbar=1.0):
    return np.exp(0.5j / hbar * (p2 + p1) * (q2 - q1)
                  - ((p2 - p1) ** 2 / omega + omega * (q2 - q1) ** 2) / (4 * hbar))


def grid_hamiltonian(V, L=8.0, n=2000, hbar=1.0):
    """Second-order finite-difference ``-hbar^2/2 d^2 + V`` on ``[-L, L]``, Dirichlet."""
    x = np.linspace(-L, L, n + 2)[1:-1]
    h = x[1] - x[0]
    main = hbar**2 / h**2 + V(x)
    off = np.full(n - 1, -hbar**2 / (2 * h**2))
    return x, h, main, off


def grid_ground_energy(V, L=8.0, n=2000, hbar=1.0, k=1):
    from scipy.linalg import eigvalsh_tridiagonal
    x, h, main, off = grid_hamiltonian(V, L, n, hbar)
    # Richardson in h^2 removes the leading discretization error
    e1 = eigvalsh_tridiagonal(main, off, select="i", select_range=(0, k - 1))
    x2, h2, main2, off2 = grid_hamiltonian(V, L, 2 * n + 1, hbar)
    e2 = eigvalsh_tridiagonal(main2, off2, select="i", select_range=(0, k - 1))
    return (4 * e2 - e1) / 3


def grid_packet_propagation(V, psi0, T, L=12.0, n=1200, hbar=1.0):
    """Evolve a wavefunction under ``P^2/2 + V`` by dense ``expm`` on a grid.

    Uses a fourth-order finite-difference Laplacian.  Returns ``(x, dx, psi_T)``.
    """
    x = np.linspace(-L, L, n)
    dx = x[1] - x[0]
    c = np.array([-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12]) / dx**2
    H = np.zeros((n, n))
    for k, ck in zip(range(-2, 3), c):
        H += np.diag(np.full(n - abs(k), -0.5 * hbar**2 * ck), k)
    H += np.diag(V(x))
    w, U = np.linalg.eigh(H)
    psi = U @ (np.exp(-1j * w * T / hbar) * (U.T @ psi0(x)))
    return x, dx, psi


def wiener_gaussian_reference(coeffs, a, b, T, nu, n_steps, hbar=1.0, project=True, levy=True):
    """Exact expectation of the discretised Wiener estimator for quadratic ``h``.

    ``coeffs = (A, B, C, D, E, F)`` for ``h = A p^2 + B pq + C q^2 + D p + E q + F``.
    The estimator's weight is Gaussian in all path variables, so its mean is
    a single complex Gaussian integral over ``2 (n_steps + 1)`` variables.
    """
    A_, B_, C_, D_, E_, F_ = coeffs
    M = n_steps
    dt = T / M
    n = 2 * (M + 1)
    Q = np.zeros((n, n), complex)   # exponent = z^T Q z + beta^T z + gamma
    beta = np.zeros(n, complex)
    gamma = 0j
    P = lambda l: 2 * l
    Qi = lambda l: 2 * l + 1

    def add(i, j, c):
        Q[i, j] += 0.5 * c
        Q[j, i] += 0.5 * c

    x = nu * dt / (2 * hbar)
    kin = (x / math.tanh(x) if levy else 1.0) / (2 * nu * dt)
    for l in range(M):
        for comp in (P, Qi):
            i, j = comp(l), comp(l + 1)
            add(i, i, -kin)
            add(j, j, -kin)
            add(i, j, 2 * kin)
        s = 0.5j / hbar
        add(P(l + 1), Qi(l + 1), s)
        add(P(l + 1), Qi(l), -s)
        add(P(l), Qi(l + 1), s)
        add(P(l), Qi(l), -s)
    for l in range(M + 1):
        w = dt * (0.5 if l in (0, M) else 1.0)
        s = -1j / hbar * w
        add(P(l), P(l), s * A_)
        add(P(l), Qi(l), s * B_)
        add(Qi(l), Qi(l), s * C_)
        beta[P(l)] += s * D_
        beta[Qi(l)] += s * E_
        gamma += s * F_
    gamma += M * (math.log(x / math.sinh(x)) if levy else 0.0) - M * math.log(2 * math.pi * nu * dt)
    gamma += math.log(2 * math.pi * hbar) + nu * T / (2 * hbar)

    def kern_terms(l_from, pt, end):
        # end: K(pt; x_l) if end else K(x_l; pt), in units of exponent
        nonlocal gamma
        pp, qq = pt
        i, j = P(l_from), Qi(l_from)
        s = 0.5j / hbar
        if end:   # (i/2h)(pb + p)(qb - q) - |b - x|^2 / 4h
            gamma_add = s * pp * qq
            beta[i] += s * qq
            beta[j] += -s * pp
            add(i, j, -s)
        else:     # (i/2h)(p + pa)(q - qa)
            gamma_add = -s * pp * qq
            beta[i] += -s * qq
            beta[j] += s * pp
            add(i, j, s)
        r = 1.0 / (4 * hbar)
        add(i, i, -r)
        add(j, j, -r)
        beta[i] += 2 * r * pp
        beta[j] += 2 * r * qq
        gamma += gamma_add - r * (pp * pp + qq * qq) - math.log(2 * math.pi * hbar)

    if project:
        kern_terms(M, b, True)
        kern_terms(0, a, False)
        A = -2 * Q
        lam = np.linalg.eigvals(A)
        logdet = np.sum(np.log(lam))
        sol = np.linalg.solve(A, beta)
        val = 0.5 * n * math.log(2 * math.pi) - 0.5 * logdet + 0.5 * beta @ sol + gamma
        return complex(np.exp(val))
    # pinned endpoints: integrate interior variables only
    fixed = np.array([P(0), Qi(0), P(M), Qi(M)])
    free = np.setdiff1d(np.arange(n), fixed)
    zf = np.array([a[0], a[1], b[0], b[1]], float)
    A = -2 * Q[np.ix_(free, free)]
    bb = beta[free] + 2 * Q[np.ix_(free, fixed)] @ zf
    g = gamma + zf @ Q[np.ix_(fixed, fixed)] @ zf + beta[fixed] @ zf
    lam = np.linalg.eigvals(A)
    val = 0.5 * len(free) * math.log(2 * math.pi) - 0.5 * np.sum(np.log(lam)) + 0.5 * bb @ np.linalg.solve(A, bb) + g
    return complex(np.exp(val))


def lattice_recursion(T, N, hbar=1.0):
    """Discrete Weyl-lattice kernel of ``p^2/2 + q^2/2`` by composing steps.

    One step after its momentum integral is
    ``(2 pi i hbar eps)^{-1/2} exp(i/hbar [(x-y)^2/2eps - eps (x+y)^2/8])``.
    Kernels stay of the form ``A exp(i/hbar (al x^2 + be x z + ga z^2))`` and the
    intermediate Fresnel integral is done in closed form.  Returns a function
    of ``(q2, q1)``.
    """
    eps = T / (N + 1)
    u = 1.0 / (2 * eps) - eps / 8.0       # x^2 and y^2 coefficient of one step
    v = -1.0 / eps - eps / 4.0            # x y coefficient
    logA = -0.5 * np.log(2j * math.pi * hbar * eps)
    al, be, ga = u, v, u
    for _ in range(N):
        s = u + al                        # y^2 coefficient to integrate out
        # int exp(i/hbar (s y^2 + c y)) dy = sqrt(pi hbar/|s|) e^{i pi/4 sgn s} exp(-i c^2 / (4 s hbar))
        logA += -0.5 * np.log(2j * math.pi * hbar * eps)
        logA += 0.5 * math.log(math.pi * hbar / abs(s)) + 0.25j * math.pi * math.copysign(1.0, s)
        # c = v x + be z
        al, be, ga = u - v * v / (4 * s), -v * be / (2 * s), ga - be * be / (4 * s)
    return lambda q2, q1: np.exp(logA + 1j / hbar * (al * q2 * q2 + be * q2 * q1 + ga * q1 * q1))

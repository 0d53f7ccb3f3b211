"""Independent reference computations used by the tests.

Each oracle is written from the physical or algebraic definition with plain
numpy (no package internals), so agreement is a real cross-check.
"""
from fractions import Fraction

import numpy as np

from kakinuma.core import State
from conftest import smooth_fields

F = Fraction


def cofactor_det(A):
    """Laplace expansion along the first row; exact on Fractions."""
    n = len(A)
    if n == 1:
        return A[0][0]
    total = F(0)
    for j in range(n):
        if A[0][j]:
            minor = [row[:j] + row[j + 1:] for row in A[1:]]
            total += (-1) ** j * A[0][j] * cofactor_det(minor)
    return total


def cofactor_bordered(A):
    n = len(A)
    B = [[F(0)] + [F(1)] * n] + [[F(-1)] + list(map(F, row)) for row in A]
    return cofactor_det(B)


def symbol_ratio(exps, x):
    """1 / (x^2 l . L(x)^-1 l) from the flat-layer operator symbol, h = 1."""
    c = np.array([[1 / (a + b + 1) for b in exps] for a in exps])
    m = np.array([[a * b / (a + b - 1) if a + b > 1 else 0.0 for b in exps] for a in exps])
    l = np.ones(len(exps))
    return 1 / (x * x * (l @ np.linalg.solve(c * x * x + m, l)))


def shallow_water_rhs(L, zeta, p1x, p2x, rho1, rho2, h1, h2, g):
    """Rigid-lid two-layer shallow water in potential form, flat bottom.

    Returns (zeta_t, phi1_t', phi2_t', F) with F = rho2 phi2_t - rho1 phi1_t.
    Mass in each layer gives zeta_t = (H1 u1)' = -(H2 u2)', so H1 u1 + H2 u2 = C(t);
    differentiating that in time with the Bernoulli jump closes the system.
    """
    M = len(zeta)
    k = 2 * np.pi * np.fft.rfftfreq(M, L / M)

    def dx(f):
        fh = np.fft.rfft(f) * 1j * k
        fh[-1] = 0
        return np.fft.irfft(fh, M)

    H1, H2 = h1 - zeta, h2 + zeta
    zt = dx(H1 * p1x)
    F = (rho1 - rho2) * g * zeta + 0.5 * rho1 * p1x ** 2 - 0.5 * rho2 * p2x ** 2
    D = H1 + rho1 * H2 / rho2
    R = zt * (p1x - p2x) - H2 * dx(F) / rho2
    C = -np.mean(R / D) / np.mean(1 / D)
    a_x = (R + C) / D
    b_x = (dx(F) + rho1 * a_x) / rho2
    return zt, a_x, b_x, F


def compatible_sw_state(model, rng):
    g = model.grid
    p = model.params
    zeta = smooth_fields(g, 1, rng, modes=3, amp=0.1)[0]
    p1x = smooth_fields(g, 1, rng, modes=3, amp=0.3)[0]
    H1, H2 = p.h1 - zeta, p.h2 + zeta
    C = np.mean(H1 * p1x / H2) / np.mean(1 / H2)
    p2x = (C - H1 * p1x) / H2
    phi1 = g.antiderivative(p1x)
    phi2 = g.antiderivative(g.project(p2x - p2x.mean()), rtol=1.0)
    return State(zeta, phi1[None], phi2[None])


def pressure_jump(L, zeta, b, phi1, phi2, dphi1, dphi2, P):
    """-d/dz (P2 - P1) at z = zeta, with P_k = -rho_k (Phi_t + |grad Phi|^2/2 + g z).

    The layer potentials are Phi1 = sum (z - h1)^(2i) phi_{1,i} and
    Phi2 = sum (z + h2 - b)^(p_i) phi_{2,i}; everything is evaluated pointwise.
    """
    M = len(zeta)
    k = 2 * np.pi * np.fft.rfftfreq(M, L / M)

    def dx(f):
        fh = np.fft.rfft(f) * 1j * k
        fh[..., -1] = 0
        return np.fft.irfft(fh, M)

    def traces(exps, s, sx, phi, dphi):
        z = sum(e * s ** (e - 1) * f for e, f in zip(exps, phi) if e)
        zz = sum(e * (e - 1) * s ** (e - 2) * f for e, f in zip(exps, phi) if e > 1)
        x = sum(s ** e * dx(f) + (e * s ** (e - 1) * sx * f if e else 0) for e, f in zip(exps, phi))
        xz = sum(e * s ** (e - 1) * dx(f) + (e * (e - 1) * s ** (e - 2) * sx * f if e > 1 else 0)
                 for e, f in zip(exps, phi) if e)
        tz = sum(e * s ** (e - 1) * f for e, f in zip(exps, dphi) if e)
        return tz + x * xz + z * zz + P.grav

    up = traces(P.upper_exponents, zeta - P.h1, 0.0, phi1, dphi1)
    lo = traces(P.p_list, zeta + P.h2 - b, -dx(b), phi2, dphi2)
    return P.rho2 * lo - P.rho1 * up


def random_frozen_states(rng, n):
    H1 = rng.uniform(0.2, 2.0, n)
    H2 = rng.uniform(0.2, 4.0, n)
    u1 = rng.normal(0, 1, n)
    u2 = rng.normal(0, 1, n)
    a = rng.uniform(0.01, 3.0, n)
    xi = rng.uniform(0.1, 10.0, n)
    return xi, H1, H2, u1, u2, a


def depth_quadrature_energy(model, st, nodes=12):
    """Kinetic + potential energy by Gauss-Legendre integration of |grad Phi|^2 over each layer."""
    g = model.grid
    P = model.params
    M = g.points
    k = 2 * np.pi * np.fft.rfftfreq(M, g.length / M)

    def dx(f):
        fh = np.fft.rfft(f) * 1j * k
        fh[..., -1] = 0
        return np.fft.irfft(fh, M)

    t, w = np.polynomial.legendre.leggauss(nodes)
    b = model.bottom
    zeta = st.zeta

    def layer(lo, hi, exps, phi, base, base_x):
        total = np.zeros(M)
        for tq, wq in zip(t, w):
            z = lo + (hi - lo) * (tq + 1) / 2
            s = z - base
            Px = sum(s ** e * dx(f) - (e * s ** (e - 1) * base_x * f if e else 0) for e, f in zip(exps, phi))
            Pz = sum(e * s ** (e - 1) * f for e, f in zip(exps, phi) if e)
            total += wq * (hi - lo) / 2 * (Px ** 2 + Pz ** 2)
        return total

    up = layer(zeta, P.h1, P.upper_exponents, st.phi1, P.h1, 0.0)
    lo = layer(b - P.h2, zeta, P.p_list, st.phi2, b - P.h2, dx(b))
    dens = 0.5 * P.rho1 * up + 0.5 * P.rho2 * lo + 0.5 * (P.rho2 - P.rho1) * P.grav * zeta ** 2
    return g.length * dens.mean()

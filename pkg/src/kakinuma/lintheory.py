"""Linear dispersion theory of the expansion model.

Determinants and the alpha constants are computed in exact rational
arithmetic; the expansion mass matrices are Hilbert-like and lose every
digit in floating point once N grows.  Phase speeds are evaluated from the
exact polynomial representations

    det(s A0 + A1) / s  and  det of the bordered matrix of (s A0 + A1),

both polynomials in s = (h |xi|)^2, so xi = 0 needs no special casing.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .core import DegenerateFit, ModelParams, coef


@dataclass(frozen=True)
class ExpansionMatrices:
    A0: tuple
    A1: tuple
    layer: str

    @property
    def size(self) -> int:
        return len(self.A0)


@dataclass(frozen=True)
class DispersionSample:
    xi: np.ndarray
    cK2: np.ndarray
    cIW2: np.ndarray
    cSW2: float


def _layer_exponents(params: ModelParams, layer: str) -> tuple:
    if layer == "upper":
        return params.upper_exponents
    if layer == "lower":
        return params.p_list
    raise ValueError(f"layer must be 'upper' or 'lower', got {layer!r}")


@lru_cache(maxsize=None)
def matrices_for_exponents(exps: tuple, layer: str = "lower") -> ExpansionMatrices:
    # the upper layer is the lower-layer formula with exponents 2i
    A0 = tuple(tuple(coef(1, a + b + 1) for b in exps) for a in exps)
    A1 = tuple(tuple(coef(a * b, a + b - 1) for b in exps) for a in exps)
    return ExpansionMatrices(A0, A1, layer)


def build_matrices(params: ModelParams, layer: str) -> ExpansionMatrices:
    return matrices_for_exponents(_layer_exponents(params, layer), layer)


def det_exact(A) -> Fraction:
    """Determinant by fraction-exact Gaussian elimination."""
    a = [[Fraction(v) for v in row] for row in A]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        for r in range(c + 1, n):
            m = a[r][c] / a[c][c]
            if m:
                a[r] = [x - m * y for x, y in zip(a[r], a[c])]
    return det


def bordered(A) -> list:
    n = len(A)
    top = [Fraction(0)] + [Fraction(1)] * n
    return [top] + [[Fraction(-1)] + [Fraction(v) for v in A[i]] for i in range(n)]


def bordered_det(A) -> Fraction:
    return det_exact(bordered(A))


def alpha_constant(mats: ExpansionMatrices) -> Fraction:
    return det_exact(mats.A0) / bordered_det(mats.A0)


def layer_alphas(params: ModelParams) -> tuple[Fraction, Fraction]:
    return (alpha_constant(build_matrices(params, "upper")),
            alpha_constant(build_matrices(params, "lower")))


def _solve_exact(A, b) -> list:
    n = len(A)
    a = [[Fraction(v) for v in row] + [Fraction(r)] for row, r in zip(A, b)]
    for c in range(n):
        piv = next(r for r in range(c, n) if a[r][c] != 0)
        a[c], a[piv] = a[piv], a[c]
        for r in range(n):
            if r != c and a[r][c]:
                m = a[r][c] / a[c][c]
                a[r] = [x - m * y for x, y in zip(a[r], a[c])]
    return [a[i][n] / a[i][i] for i in range(n)]


def _pencil(mats: ExpansionMatrices, s) -> list:
    n = mats.size
    return [[s * mats.A0[i][j] + mats.A1[i][j] for j in range(n)] for i in range(n)]


@lru_cache(maxsize=None)
def dispersion_polynomials(exps: tuple) -> tuple[tuple, tuple]:
    """Exact coefficients (ascending in s) of det(sA0+A1)/s and det of its bordered form.

    Both have degree len(exps)-1; they are recovered by exact interpolation
    at the integer nodes s = 1, ..., deg+1.
    """
    mats = matrices_for_exponents(exps)
    deg = mats.size - 1
    nodes = [Fraction(k + 1) for k in range(deg + 1)]
    V = [[s ** m for m in range(deg + 1)] for s in nodes]
    pvals = [det_exact(_pencil(mats, s)) / s for s in nodes]
    bvals = [bordered_det(_pencil(mats, s)) for s in nodes]
    return tuple(_solve_exact(V, pvals)), tuple(_solve_exact(V, bvals))


def _polyval(c: tuple, s):
    return np.polynomial.polynomial.polyval(s, [float(v) for v in c])


def pade_ratio(exps: tuple, x) -> np.ndarray:
    """det A(x)/(x^2 det Ã(x)): the expansion's stand-in for tanh(x)/x."""
    P, B = dispersion_polynomials(tuple(exps))
    s = np.asarray(x, dtype=float) ** 2
    return _polyval(P, s) / _polyval(B, s)


def phase_speed_shallow(params: ModelParams) -> float:
    p = params
    return (p.rho2 - p.rho1) * p.grav * p.h1 * p.h2 / (p.rho1 * p.h2 + p.rho2 * p.h1)


def phase_speed_kakinuma(xi, params: ModelParams) -> np.ndarray:
    """Squared linear phase speed c_K^2 of the expansion model (flat bottom)."""
    p = params
    xi = np.abs(np.asarray(xi, dtype=float))
    r1 = pade_ratio(p.upper_exponents, p.h1 * xi)
    r2 = pade_ratio(p.p_list, p.h2 * xi)
    return (p.rho2 - p.rho1) * p.grav * p.h1 * p.h2 / (p.rho1 * p.h2 / r1 + p.rho2 * p.h1 / r2)


def phase_speed_full(xi, params: ModelParams) -> np.ndarray:
    """Squared linear phase speed of the full two-layer potential flow."""
    p = params
    xi = np.abs(np.asarray(xi, dtype=float))

    def t(x):  # tanh(x)/x with its limit at 0
        x = np.asarray(x, dtype=float)
        out = np.ones_like(x)
        nz = x > 0
        out[nz] = np.tanh(x[nz]) / x[nz]
        return out

    t1, t2 = t(p.h1 * xi), t(p.h2 * xi)
    return (p.rho2 - p.rho1) * p.grav * p.h1 * p.h2 / (p.rho1 * p.h2 / t1 + p.rho2 * p.h1 / t2)


def deep_water_limit(params: ModelParams) -> float:
    p = params
    m1, m2 = build_matrices(p, "upper"), build_matrices(p, "lower")
    d1, d2 = det_exact(m1.A0), det_exact(m2.A0)
    b1, b2 = bordered_det(m1.A0), bordered_det(m2.A0)
    num = (p.rho2 - p.rho1) * p.grav * p.h1 * p.h2 * float(d1 * d2)
    return num / (p.rho1 * p.h2 * float(b1 * d2) + p.rho2 * p.h1 * float(b2 * d1))


def dispersion_table(xi, params: ModelParams) -> DispersionSample:
    xi = np.asarray(xi, dtype=float)
    return DispersionSample(xi, phase_speed_kakinuma(xi, params),
                            phase_speed_full(xi, params), phase_speed_shallow(params))


def convergence_order_scan(params: ModelParams, xi_range, floor: float = 1e-14) -> float:
    """Least-squares slope of log|c_IW^2 - c_K^2|/c_SW^2 against log((h1+h2)|xi|)."""
    xi = np.asarray(xi_range, dtype=float)
    c0 = phase_speed_shallow(params)
    err = np.abs(phase_speed_full(xi, params) - phase_speed_kakinuma(xi, params)) / c0
    keep = err > floor
    if keep.sum() < 2:
        raise DegenerateFit("model error underflows across the scan; move it to larger h|xi|")
    x = np.log((params.h1 + params.h2) * xi[keep])
    slope, _ = np.polyfit(x, np.log(err[keep]), 1)
    return float(slope)

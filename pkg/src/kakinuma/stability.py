"""Stability coefficient, stability margin and frozen-coefficient dispersion roots."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ModelParams, State
from .evolution import TimeDerivatives, compute_time_derivatives
from .lintheory import layer_alphas
from .operators import Geometry, interface_velocities


@dataclass
class StabilityContext:
    a: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    u: np.ndarray
    v: np.ndarray
    theta1: np.ndarray
    theta2: np.ndarray
    alpha1: object
    alpha2: object
    margin: np.ndarray


def compute_a(geom: Geometry, state: State, derivs: TimeDerivatives, vel=None) -> np.ndarray:
    """Vertical jump of the approximate pressure gradient across the interface.

    Time derivatives of the potentials are replaced by the G fields, so the
    coefficient follows from instantaneous data.
    """
    p = geom.params
    g = geom.grid
    u1, u2, w1, w2 = interface_velocities(geom, state) if vel is None else vel
    pad = g.to_pad
    lo, up = geom.lower, geom.upper

    acc2 = np.zeros(g.padded_points)
    dphi2 = g.derivative(state.phi2)
    sec2 = np.zeros(g.padded_points)
    u2p = pad(u2)
    for j, e in enumerate(lo.exps):
        if e:
            acc2 += e * lo.pw[e - 1] * (pad(derivs.g2[j]) + u2p * pad(dphi2[j]))
        if e > 1:
            sec2 += e * (e - 1) * lo.pw[e - 2] * pad(state.phi2[j])
    slip = pad(w2) - u2p * lo.bxp
    lower = acc2 + slip * sec2

    acc1 = np.zeros(g.padded_points)
    sec1 = np.zeros(g.padded_points)
    dphi1 = g.derivative(state.phi1)
    u1p = pad(u1)
    for j, e in enumerate(up.exps):
        if e:
            acc1 += e * up.pw[e - 1] * (pad(derivs.g1[j]) + u1p * pad(dphi1[j]))
            sec1 += e * (e - 1) * up.pw[e - 2] * pad(state.phi1[j])
    upper = acc1 - pad(w1) * sec1
    return (p.rho2 - p.rho1) * p.grav + g.from_pad(p.rho2 * lower + p.rho1 * upper)


def stability_margin(geom: Geometry, state: State, a, vel=None):
    """Pointwise margin a - rho1 rho2 v^2 / (rho1 H2 alpha2 + rho2 H1 alpha1) and its minimum."""
    p = geom.params
    u1, u2, _, _ = interface_velocities(geom, state) if vel is None else vel
    a1, a2 = geom.alphas
    v = u2 - u1
    margin = a - p.rho1 * p.rho2 * v ** 2 / (p.rho1 * geom.H2 * a2 + p.rho2 * geom.H1 * a1)
    return margin, float(margin.min())


def stability_context(geom: Geometry, state: State, derivs: TimeDerivatives | None = None,
                      epsilon: float = 0.0) -> StabilityContext:
    derivs = compute_time_derivatives(geom.model, state, epsilon, geom) if derivs is None else derivs
    vel = interface_velocities(geom, state)
    u1, u2, _, _ = vel
    a = compute_a(geom, state, derivs, vel)
    margin, _ = stability_margin(geom, state, a, vel)
    th1, th2 = geom.theta
    al1, al2 = layer_alphas(geom.params)
    return StabilityContext(a, u1, u2, th2 * u1 + th1 * u2, u2 - u1, th1, th2, al1, al2, margin)


def _weights(H1, H2, params: ModelParams):
    a1, a2 = (float(a) for a in layer_alphas(params))
    return params.rho1 / (H1 * a1), params.rho2 / (H2 * a2), a1, a2


def frozen_discriminant(xi, H1, H2, u1, u2, a, params: ModelParams):
    """Quarter discriminant of the frozen dispersion quadratic in omega."""
    r1, r2, _, _ = _weights(H1, H2, params)
    xi = np.asarray(xi, dtype=float)
    B = r1 * u1 * xi + r2 * u2 * xi
    C = r1 * (u1 * xi) ** 2 + r2 * (u2 * xi) ** 2 - a * xi ** 2
    return B * B - (r1 + r2) * C


def frozen_margin(H1, H2, u1, u2, a, params: ModelParams) -> float:
    _, _, a1, a2 = _weights(H1, H2, params)
    return a - params.rho1 * params.rho2 * (u2 - u1) ** 2 / (params.rho1 * H2 * a2 + params.rho2 * H1 * a1)


def frozen_roots(xi, H1, H2, u1, u2, a, params: ModelParams, rtol: float = 64 * np.finfo(float).eps):
    """Both roots omega of r1 (omega - u1 xi)^2 + r2 (omega - u2 xi)^2 - a xi^2 = 0.

    A discriminant within rounding of zero (relative to the size of its two
    terms) is treated as zero, giving a double real root.
    """
    r1, r2, _, _ = _weights(H1, H2, params)
    xi = np.asarray(xi, dtype=float)
    A = r1 + r2
    B = r1 * u1 * xi + r2 * u2 * xi
    C = r1 * (u1 * xi) ** 2 + r2 * (u2 * xi) ** 2 - a * xi ** 2
    disc = B * B - A * C
    scale = B * B + np.abs(A * C)
    disc = np.where(np.abs(disc) <= rtol * scale, 0.0, disc)
    sq = np.sqrt(disc.astype(complex))
    return (B - sq) / A, (B + sq) / A

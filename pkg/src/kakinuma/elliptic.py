"""Compatibility system and its symmetric positive reduction.

Unknowns of the reduced system are stacked as one array of shape
``(N + N* + 1, M)``: the upper tail (phi_{1,1..N}), the lower tail
(phi_{2,1..N*}) and the combined upper potential trace psi = l1 . phi1.
The bottom-level potentials are recovered afterwards from

    phi_{1,0} = psi - sum_{j>=1} H1^(2j) phi_{1,j},
    phi_{2,0} = (rho1/rho2) psi - sum_{j>=1} H2^(pj) phi_{2,j} + f4/rho2.

The operator is applied by composing the compatibility rows with this
substitution, which makes it exactly symmetric in the discrete pairing.
Constants in psi (and, on dealiased grids, Nyquist modes) form its kernel;
the preconditioner annihilates both, so CG never leaves the range.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .core import CanonicalState, Model, NoConvergence, State
from .operators import Geometry, _geom


@dataclass
class EllipticRHS:
    f1p: np.ndarray   # (N, M)
    f2p: np.ndarray   # (N*, M)
    f3: np.ndarray    # flux whose derivative enters the combined row
    f4: np.ndarray


@dataclass
class EllipticSolution:
    phi1: np.ndarray
    phi2: np.ndarray
    iterations: int
    residual: float
    history: list | None = None


def _sizes(geom: Geometry):
    return geom.upper.n - 1, geom.lower.n - 1


def expand(geom: Geometry, v, f4=None):
    """Map reduced unknowns (tails, psi) to the full stacks (phi1, phi2)."""
    p = geom.params
    N, Ns = _sizes(geom)
    M = geom.grid.points
    psi = v[-1]
    phi1 = np.zeros((N + 1, M))
    phi2 = np.zeros((Ns + 1, M))
    phi1[1:] = v[:N]
    phi2[1:] = v[N:N + Ns]
    phi1[0] = psi - (geom.upper.lvec_dot(phi1) - phi1[0])
    phi2[0] = (p.rho1 / p.rho2) * psi - (geom.lower.lvec_dot(phi2) - phi2[0])
    if f4 is not None:
        phi2[0] += f4 / p.rho2
    return phi1, phi2


def apply_P_operator(geom: Geometry, v) -> np.ndarray:
    p = geom.params
    N, Ns = _sizes(geom)
    phi1, phi2 = expand(geom, v)
    r1 = geom.upper.compat(phi1)
    r2 = geom.lower.compat(phi2)
    out = np.empty_like(np.asarray(v, dtype=float))
    out[:N] = p.rho1 * r1[1:]
    out[N:N + Ns] = p.rho2 * r2[1:]
    out[-1] = p.rho1 * (r1[0] + r2[0])
    return out


def flat_symbol(model: Model) -> np.ndarray:
    """Fourier symbol of the reduced operator at zeta = 0, b = 0, shape (M/2+1, n, n)."""
    p = model.params
    g = model.grid
    k = g.k.copy()
    kd = k.copy()
    kd[-1] = 0.0          # first derivatives vanish on the Nyquist mode

    def layer_symbol(exps, h):
        e = np.array(exps)
        s = e[:, None] + e[None, :]
        grad = h ** (s + 1) / (s + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            mass = np.where(e[:, None] * e[None, :] != 0, e[:, None] * e[None, :] / (s - 1.0), 0.0)
        mass = mass * np.where(mass != 0, h ** np.maximum(s - 1, 0), 0.0)
        return kd[:, None, None] ** 2 * grad[None] + mass[None], h ** e.astype(float)

    L1, l1 = layer_symbol(p.upper_exponents, p.h1)
    L2, l2 = layer_symbol(p.p_list, p.h2)
    N, Ns = p.n_upper, p.n_lower
    n = N + Ns + 1
    S1 = np.zeros((N + 1, n))
    S2 = np.zeros((Ns + 1, n))
    S1[0, -1] = 1.0
    S2[0, -1] = p.rho1 / p.rho2
    for j in range(1, N + 1):
        S1[j, j - 1] = 1.0
        S1[0, j - 1] = -l1[j]
    for j in range(1, Ns + 1):
        S2[j, N + j - 1] = 1.0
        S2[0, N + j - 1] = -l2[j]
    E1 = np.eye(N + 1)
    E1[1:, 0] = -l1[1:]
    E2 = np.eye(Ns + 1)
    E2[1:, 0] = -l2[1:]
    C1 = E1 @ L1 @ S1
    C2 = E2 @ L2 @ S2
    P = np.empty((len(k), n, n))
    P[:, :N] = p.rho1 * C1[:, 1:]
    P[:, N:N + Ns] = p.rho2 * C2[:, 1:]
    P[:, -1] = p.rho1 * (C1[:, 0] + C2[:, 0])
    return P


class FlatPreconditioner:
    """Exact inverse of the reduced operator at flat geometry, applied mode by mode."""

    def __init__(self, model: Model):
        self.grid = model.grid
        P = flat_symbol(model)
        inv = np.zeros_like(P)
        n = P.shape[-1]
        for idx in range(P.shape[0]):
            A = P[idx]
            if abs(A[-1, -1]) > 1e-14 * max(1.0, np.abs(A).max()):
                inv[idx] = np.linalg.inv(A)
            elif n > 1:
                # psi decouples on the kernel modes; invert the tails only
                inv[idx, :-1, :-1] = np.linalg.inv(A[:-1, :-1])
        if self.grid.dealias:
            inv[-1] = 0.0
        self.inv = inv

    def __call__(self, r) -> np.ndarray:
        rh = sfft.rfft(r, axis=-1)
        zh = np.einsum("kij,jk->ik", self.inv, rh)
        return sfft.irfft(zh, n=self.grid.points, axis=-1)


_PRECOND_CACHE: dict = {}


def preconditioner(model: Model) -> FlatPreconditioner:
    key = (model.params.rho1, model.params.rho2, model.params.h1, model.params.h2,
           model.params.upper_exponents, model.params.p_list, model.grid)
    pc = _PRECOND_CACHE.get(key)
    if pc is None:
        pc = _PRECOND_CACHE[key] = FlatPreconditioner(model)
    return pc


def pcg(apply_A, b, precond, tol: float, max_iter: int, x0=None, callback=None):
    """Preconditioned conjugate gradients on a symmetric positive semidefinite operator.

    Stops when sqrt(r.z) <= tol * sqrt(b.Pb) (relative preconditioned residual).
    ``callback(x)`` is called after every iteration.
    Returns (x, iterations, relative residual, history).
    """
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - apply_A(x) if x0 is not None else b.copy()
    z = precond(r)
    rz = float(np.sum(r * z))
    bnorm = np.sqrt(max(float(np.sum(b * precond(b))), 0.0))
    history = []
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0, history
    rel = np.sqrt(max(rz, 0.0)) / bnorm
    history.append(rel)
    d = z.copy()
    it = 0
    while rel > tol:
        if it >= max_iter:
            raise NoConvergence(it, rel)
        Ad = apply_A(d)
        dAd = float(np.sum(d * Ad))
        if dAd <= 0.0:
            raise NoConvergence(it, rel)
        a = rz / dAd
        x += a * d
        r -= a * Ad
        z = precond(r)
        rz_new = float(np.sum(r * z))
        d = z + (rz_new / rz) * d
        rz = rz_new
        it += 1
        if callback is not None:
            callback(x)
        rel = np.sqrt(max(rz, 0.0)) / bnorm
        history.append(rel)
    return x, it, rel, history


def reduced_rhs(geom: Geometry, rhs: EllipticRHS) -> np.ndarray:
    p = geom.params
    g = geom.grid
    N, Ns = _sizes(geom)
    out = np.zeros((N + Ns + 1, g.points))
    # the f4 part sits in phi_{2,0}; move its image to the right-hand side
    part = geom.lower.compat(_slot0(np.asarray(rhs.f4) / p.rho2, geom.lower.n, g.points))
    if N:
        out[:N] = p.rho1 * np.asarray(rhs.f1p).reshape(N, g.points)
    if Ns:
        out[N:N + Ns] = p.rho2 * (np.asarray(rhs.f2p).reshape(Ns, g.points) - part[1:])
    out[-1] = p.rho1 * (g.derivative(rhs.f3) - part[0])
    return g.project(out)


def _slot0(f, n, M):
    out = np.zeros((n, M))
    out[0] = f
    return out


def gauge_fix(params, phi1, phi2):
    """Shift by (C rho2, C rho1) so that mean(rho1 phi_{1,0} + rho2 phi_{2,0}) = 0."""
    c = np.mean(params.rho1 * phi1[0] + params.rho2 * phi2[0])
    C = -c / (2 * params.rho1 * params.rho2)
    phi1 = phi1.copy()
    phi2 = phi2.copy()
    phi1[0] += C * params.rho2
    phi2[0] += C * params.rho1
    return phi1, phi2


def solve_compatibility(model_or_geom, rhs: EllipticRHS, zeta=None, tol: float | None = None,
                        max_iter: int | None = None, keep_history: bool = False) -> EllipticSolution:
    geom = _geom(model_or_geom, zeta)
    model = geom.model
    tol = model.cg_tol if tol is None else tol
    max_iter = model.cg_max_iter if max_iter is None else max_iter
    b = reduced_rhs(geom, rhs)
    x, it, rel, hist = pcg(lambda v: apply_P_operator(geom, v), b, preconditioner(model), tol, max_iter)
    phi1, phi2 = expand(geom, x, rhs.f4)
    phi1, phi2 = gauge_fix(model.params, phi1, phi2)
    return EllipticSolution(phi1, phi2, it, rel, hist if keep_history else None)


def forward_rhs(geom: Geometry, phi1, phi2) -> EllipticRHS:
    """Right-hand side generated by a given pair of stacks (manufactured solutions)."""
    p = geom.params
    g = geom.grid
    r1 = geom.upper.compat(phi1)
    r2 = geom.lower.compat(phi2)
    f3 = g.antiderivative(g.project(r1[0] + r2[0]), rtol=1e-9)
    f4 = -p.rho1 * geom.upper.lvec_dot(phi1) + p.rho2 * geom.lower.lvec_dot(phi2)
    return EllipticRHS(r1[1:], r2[1:], f3, f4)


def prepare_initial_data(model: Model, canon: CanonicalState, geom: Geometry | None = None,
                         return_solution: bool = False):
    """Stacks (phi1, phi2) compatible with zeta whose canonical combination is canon.phi."""
    geom = Geometry(model, canon.zeta) if geom is None else geom
    p = model.params
    M = model.grid.points
    rhs = EllipticRHS(np.zeros((p.n_upper, M)), np.zeros((p.n_lower, M)), np.zeros(M),
                      np.asarray(canon.phi, dtype=float))
    sol = solve_compatibility(geom, rhs)
    state = State(np.asarray(canon.zeta, dtype=float), sol.phi1, sol.phi2)
    return (state, sol) if return_solution else state

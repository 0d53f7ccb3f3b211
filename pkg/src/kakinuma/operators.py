"""Discrete layer operators, compatibility operators and pointwise block inverses.

A :class:`Geometry` is built once per interface position and caches the
dealiased powers of the layer thicknesses.  Every variable coefficient is
applied on the padded grid, so a row of ``L_k`` costs one truncation per
output field rather than one per term.

Notation (1-D, periodic):
    H1 = h1 - zeta,  H2 = h2 + zeta - b,
    l1 = (1, H1^2, ..., H1^2N),  l2 = (H2^p0, ..., H2^pN*).
The upper layer uses the same formulas as the lower one with exponents
2i and b = 0, so the two layers share one implementation.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .core import Model, SingularBlock, State, check_noncavitation, coef
from .lintheory import layer_alphas


class LayerOperator:
    """Variable-coefficient operator L_k(H, b) of one layer.

    Row i of ``L phi`` is
        -d/dx( sum_j  c_ij H^(pi+pj+1) phi_j' - s_ij H^(pi+pj) b' phi_j )
        - sum_j  s_ji H^(pi+pj) b' phi_j'
        + sum_j  m_ij H^(pi+pj-1) (1 + b'^2) phi_j
    with c_ij = 1/(pi+pj+1), s_ij = pj/(pi+pj), m_ij = pi pj/(pi+pj-1) and 0/0 = 0.
    """

    def __init__(self, grid, H, bx, exps):
        self.grid = grid
        self.exps = tuple(exps)
        self.n = len(self.exps)
        self.H = H
        top = 2 * max(self.exps) + 1
        # padded powers H^0..H^top
        Hp = grid.to_pad(H)
        pw = [np.ones_like(Hp)]
        for k in range(1, top + 1):
            pw.append(grid.to_pad(H ** k))
        self.pw = pw
        self.flat_b = not np.any(bx)
        bxp = grid.to_pad(bx)
        self.bx = bx
        self.bxp = bxp
        n, e = self.n, self.exps
        shape = (n, n, Hp.shape[-1])
        G = np.zeros(shape)
        S = np.zeros(shape)   # coefficient of phi_j inside the flux of row i
        T = np.zeros(shape)   # coefficient of phi_j' outside the flux of row i
        Mc = np.zeros(shape)
        one_b2 = 1.0 + bxp * bxp
        for i in range(n):
            for j in range(n):
                G[i, j] = float(coef(1, e[i] + e[j] + 1)) * pw[e[i] + e[j] + 1]
                if not self.flat_b:
                    S[i, j] = float(coef(e[j], e[i] + e[j])) * pw[e[i] + e[j]] * bxp
                    T[i, j] = float(coef(e[i], e[i] + e[j])) * pw[e[i] + e[j]] * bxp
                m = coef(e[i] * e[j], e[i] + e[j] - 1)
                if m:
                    Mc[i, j] = float(m) * pw[e[i] + e[j] - 1] * one_b2
        self.G, self.S, self.T, self.Mc = G, S, T, Mc

    def flux(self, phi, dphi=None):
        """Padded fluxes sum_j (c H^. phi_j' - s H^. b' phi_j), one per row."""
        g = self.grid
        dphi = g.derivative(phi) if dphi is None else dphi
        a = g.to_pad(dphi)
        out = np.einsum("ijx,jx->ix", self.G, a)
        if not self.flat_b:
            out -= np.einsum("ijx,jx->ix", self.S, g.to_pad(phi))
        return out

    def apply(self, phi) -> np.ndarray:
        g = self.grid
        phi = np.asarray(phi, dtype=float)
        dphi = g.derivative(phi)
        a = g.to_pad(dphi)
        c = g.to_pad(phi)
        flux = np.einsum("ijx,jx->ix", self.G, a)
        rest = np.einsum("ijx,jx->ix", self.Mc, c)
        if not self.flat_b:
            flux -= np.einsum("ijx,jx->ix", self.S, c)
            rest -= np.einsum("ijx,jx->ix", self.T, a)
        return -g.derivative(g.from_pad(flux)) + g.from_pad(rest)

    def apply_column(self, f, j: int = 0) -> np.ndarray:
        """L applied to the stack that is ``f`` in slot j and zero elsewhere."""
        phi = np.zeros((self.n, self.grid.points))
        phi[j] = f
        return self.apply(phi)

    def compat(self, phi) -> np.ndarray:
        """Rows of the compatibility operator: row 0 is (L phi)_0, row i is (L phi)_i - H^pi (L phi)_0."""
        return self.compat_from(self.apply(phi))

    def compat_from(self, Lphi) -> np.ndarray:
        g = self.grid
        out = np.array(Lphi, dtype=float, copy=True)
        if self.n > 1:
            r0 = g.to_pad(Lphi[0])
            for i in range(1, self.n):
                out[i] = Lphi[i] - g.from_pad(self.pw[self.exps[i]] * r0)
        return out

    def lvec_dot(self, phi) -> np.ndarray:
        """l . phi = phi_0 + sum_{j>=1} H^pj phi_j (dealiased)."""
        g = self.grid
        out = np.array(phi[0], dtype=float, copy=True)
        for j in range(1, self.n):
            out += g.from_pad(self.pw[self.exps[j]] * g.to_pad(phi[j]))
        return out

    def lvec_times(self, f) -> np.ndarray:
        """The stack (H^pj f)_j (dealiased); slot 0 is f itself."""
        g = self.grid
        out = np.empty((self.n, g.points))
        out[0] = f
        fp = g.to_pad(f) if self.n > 1 else None
        for j in range(1, self.n):
            out[j] = g.from_pad(self.pw[self.exps[j]] * fp)
        return out

    def dlvec_dot(self, phi) -> np.ndarray:
        """(d l / dH) . phi = sum_j pj H^(pj-1) phi_j (dealiased)."""
        g = self.grid
        acc = np.zeros(g.padded_points)
        for j in range(1, self.n):
            e = self.exps[j]
            acc += e * self.pw[e - 1] * g.to_pad(phi[j])
        return g.from_pad(acc)

    def lvec(self) -> np.ndarray:
        return np.array([self.H ** e for e in self.exps])

    def dlvec(self) -> np.ndarray:
        return np.array([e * self.H ** (e - 1) if e else np.zeros_like(self.H) for e in self.exps])

    def matrix_A(self) -> np.ndarray:
        """Pointwise matrices (H^(pi+pj+1)/(pi+pj+1)), shape (M, n, n)."""
        e = np.array(self.exps)
        pw = e[:, None] + e[None, :] + 1
        return self.H[:, None, None] ** pw[None] / pw[None]


@dataclass
class LayerVectors:
    l1: np.ndarray
    l2: np.ndarray
    dl1: np.ndarray
    dl2: np.ndarray


@dataclass
class BlockInverse:
    q0: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    Q: np.ndarray | None = None


class Geometry:
    """Interface-dependent coefficients shared by all operators at fixed zeta."""

    def __init__(self, model: Model, zeta):
        self.model = model
        self.grid = model.grid
        self.params = model.params
        self.zeta = np.asarray(zeta, dtype=float)
        self.H1, self.H2 = check_noncavitation(model, self.zeta)
        self.b = model.bottom
        self.bx = self.grid.derivative(self.b) if np.any(self.b) else np.zeros(self.grid.points)
        self.upper = LayerOperator(self.grid, self.H1, np.zeros(self.grid.points),
                                   self.params.upper_exponents)
        self.lower = LayerOperator(self.grid, self.H2, self.bx, self.params.p_list)

    @cached_property
    def alphas(self) -> tuple[float, float]:
        a1, a2 = layer_alphas(self.params)
        return float(a1), float(a2)

    @cached_property
    def theta(self) -> tuple[np.ndarray, np.ndarray]:
        p = self.params
        a1, a2 = self.alphas
        den = p.rho1 * self.H2 * a2 + p.rho2 * self.H1 * a1
        return p.rho2 * self.H1 * a1 / den, p.rho1 * self.H2 * a2 / den


def geometry(model: Model, zeta) -> Geometry:
    return Geometry(model, zeta)


def _geom(model_or_geom, zeta=None) -> Geometry:
    if isinstance(model_or_geom, Geometry):
        return model_or_geom
    return Geometry(model_or_geom, zeta)


def apply_L1(geom: Geometry, phi1) -> np.ndarray:
    return geom.upper.apply(phi1)


def apply_L2(geom: Geometry, phi2) -> np.ndarray:
    return geom.lower.apply(phi2)


def layer_vectors(geom: Geometry) -> LayerVectors:
    return LayerVectors(geom.upper.lvec(), geom.lower.lvec(), geom.upper.dlvec(), geom.lower.dlvec())


def apply_compat(geom: Geometry, phi1, phi2) -> list:
    """Compatibility residuals: rows i>=1 of each layer, then the combined row 0."""
    r1 = geom.upper.compat(phi1)
    r2 = geom.lower.compat(phi2)
    return list(r1[1:]) + list(r2[1:]) + [r1[0] + r2[0]]


def compat_residual(geom: Geometry, phi1, phi2) -> float:
    """Sup norm of the compatibility residuals relative to the size of L phi."""
    res = np.array(apply_compat(geom, phi1, phi2))
    scale = max(np.abs(geom.upper.apply(phi1)).max(), np.abs(geom.lower.apply(phi2)).max())
    return float(np.abs(res).max() / scale) if scale > 0 else float(np.abs(res).max())


def interface_velocities(geom: Geometry, state: State):
    g = geom.grid
    up, lo = geom.upper, geom.lower
    u1 = g.from_pad(np.sum(np.array([up.pw[e] for e in up.exps]) * g.to_pad(g.derivative(state.phi1)), axis=0))
    w1 = -up.dlvec_dot(state.phi1)
    w2 = lo.dlvec_dot(state.phi2)
    acc = np.sum(np.array([lo.pw[e] for e in lo.exps]) * g.to_pad(g.derivative(state.phi2)), axis=0)
    if not lo.flat_b:
        acc = acc - g.to_pad(w2) * lo.bxp
    u2 = g.from_pad(acc)
    return u1, u2, w1, w2


def commutator_f(geom: Geometry, state: State):
    """Coefficients f_{k,i}, i >= 1, of the zeta-derivative of the compatibility rows.

    d/ds L_{k,i}(zeta + s delta) phi |_{s=0} = f_{k,i} delta pointwise.
    """
    g = geom.grid
    out = []
    for layer, phi, sign in ((geom.upper, state.phi1, -1.0), (geom.lower, state.phi2, 1.0)):
        e = layer.exps
        d2 = g.to_pad(g.derivative(phi, 2))
        c = g.to_pad(phi)
        a = g.to_pad(g.derivative(phi))
        flat = layer.flat_b
        if not flat:
            bxp = layer.bxp
            div_pb = g.to_pad(g.derivative(g.from_pad(c * bxp)))   # (phi_j b')'
            one_b2 = 1.0 + bxp * bxp
        rows = []
        for i in range(1, layer.n):
            acc = np.zeros(g.padded_points)
            for j in range(layer.n):
                acc += float(coef(e[i], e[j] + 1)) * layer.pw[e[i] + e[j]] * d2[j]
                if not flat and e[j]:
                    acc -= e[i] * layer.pw[e[i] + e[j] - 1] * div_pb[j]
                if not flat:
                    acc -= e[i] * layer.pw[e[i] + e[j] - 1] * bxp * a[j]
                m = e[i] * e[j]
                if m:
                    b2 = one_b2 if not flat else 1.0
                    acc += m * layer.pw[e[i] + e[j] - 2] * b2 * c[j]
            rows.append(sign * g.from_pad(acc))
        out.append(np.array(rows).reshape(len(rows), g.points))
    return out[0], out[1]


def block_inverse(geom: Geometry) -> BlockInverse:
    """Pointwise first column of the inverse of the bordered block matrix

        [[0,        -rho1 l1^T,   rho2 l2^T ],
         [-rho1 l1,  rho1 A1(H1), 0         ],
         [ rho2 l2,  0,           rho2 A2(H2)]].
    """
    p = geom.params
    up, lo = geom.upper, geom.lower
    M = geom.grid.points
    n1, n2 = up.n, lo.n
    n = 1 + n1 + n2
    K = np.zeros((M, n, n))
    l1, l2 = up.lvec().T, lo.lvec().T
    K[:, 0, 1:1 + n1] = -p.rho1 * l1
    K[:, 1:1 + n1, 0] = -p.rho1 * l1
    K[:, 0, 1 + n1:] = p.rho2 * l2
    K[:, 1 + n1:, 0] = p.rho2 * l2
    K[:, 1:1 + n1, 1:1 + n1] = p.rho1 * up.matrix_A()
    K[:, 1 + n1:, 1 + n1:] = p.rho2 * lo.matrix_A()
    rhs = np.zeros((M, n, 1))
    rhs[:, 0, 0] = 1.0
    try:
        sol = np.linalg.solve(K, rhs)[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SingularBlock("pointwise block solve failed") from exc
    if not np.all(np.isfinite(sol)):
        raise SingularBlock("pointwise block solve produced non-finite values")
    return BlockInverse(sol[:, 0], sol[:, 1:1 + n1].T.copy(), sol[:, 1 + n1:].T.copy())


def layer_inverse_blocks(mats_A0: np.ndarray):
    """Blocks of the inverse of the bordered matrix [[0, 1^T], [-1, A]].

    Returns (q, qvec, Q) with inverse [[q, qvec^T], [-qvec, Q]].
    """
    A = np.asarray(mats_A0, dtype=float)
    n = A.shape[0]
    B = np.zeros((n + 1, n + 1))
    B[0, 1:] = 1.0
    B[1:, 0] = -1.0
    B[1:, 1:] = A
    inv = np.linalg.inv(B)
    return inv[0, 0], inv[0, 1:], inv[1:, 1:]


def compute_G0(geom: Geometry, state: State, blk: BlockInverse | None = None,
               L1phi=None, L2phi=None) -> np.ndarray:
    p = geom.params
    g = geom.grid
    blk = block_inverse(geom) if blk is None else blk
    L1phi = geom.upper.apply(state.phi1) if L1phi is None else L1phi
    L2phi = geom.lower.apply(state.phi2) if L2phi is None else L2phi
    acc = p.rho1 * np.sum(g.to_pad(blk.q1) * g.to_pad(L1phi), axis=0)
    acc += p.rho2 * np.sum(g.to_pad(blk.q2) * g.to_pad(L2phi), axis=0)
    return g.from_pad(acc)

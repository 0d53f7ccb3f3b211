"""Conservation laws, Hamiltonian and variational derivatives."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import CanonicalState, FlatBottomRequired, Model, State
from .elliptic import prepare_initial_data
from .evolution import TimeDerivatives, canonical_rhs_from_state, compute_F, compute_time_derivatives
from .operators import Geometry, compat_residual
from .stability import compute_a, stability_margin


@dataclass
class DiagnosticsReport:
    t: float
    mass: float
    energy: float
    momentum: float
    hamiltonian: float
    margin_min: float
    compat_residual: float
    local_energy_residual: float = float("nan")
    local_momentum_residual: float = float("nan")
    min_H1: float = float("nan")
    min_H2: float = float("nan")

    def as_dict(self) -> dict:
        return asdict(self)


def _geo(model_or_geom, zeta) -> Geometry:
    return model_or_geom if isinstance(model_or_geom, Geometry) else Geometry(model_or_geom, zeta)


def canonical_phi(geom: Geometry, state: State) -> np.ndarray:
    p = geom.params
    return p.rho2 * geom.lower.lvec_dot(state.phi2) - p.rho1 * geom.upper.lvec_dot(state.phi1)


def _quadratic_density(layer, phi, dphi=None) -> np.ndarray:
    """Padded density sum_ij (phi_i' (G phi')_j - 2 s phi_i b' phi_j' + m phi_i phi_j) of one layer."""
    g = layer.grid
    dphi = g.derivative(phi) if dphi is None else dphi
    a = g.to_pad(dphi)
    c = g.to_pad(phi)
    dens = np.einsum("ix,ijx,jx->x", a, layer.G, a) + np.einsum("ix,ijx,jx->x", c, layer.Mc, c)
    if not layer.flat_b:
        dens -= 2.0 * np.einsum("ix,ijx,jx->x", c, layer.T, a)
    return dens


def energy_density(geom: Geometry, state: State) -> np.ndarray:
    p = geom.params
    g = geom.grid
    dens = 0.5 * p.rho1 * _quadratic_density(geom.upper, state.phi1)
    dens += 0.5 * p.rho2 * _quadratic_density(geom.lower, state.phi2)
    return g.from_pad(dens) + 0.5 * (p.rho2 - p.rho1) * p.grav * g.mul(state.zeta, state.zeta)


def energy(geom: Geometry, state: State) -> float:
    return float(geom.grid.integrate(energy_density(geom, state)))


def energy_flux(geom: Geometry, state: State, dphi1, dphi2) -> np.ndarray:
    p = geom.params
    g = geom.grid
    f1 = geom.upper.flux(state.phi1)
    f2 = geom.lower.flux(state.phi2)
    acc = p.rho1 * np.sum(f1 * g.to_pad(dphi1), axis=0) + p.rho2 * np.sum(f2 * g.to_pad(dphi2), axis=0)
    return -g.from_pad(acc)


def mass_fluxes(geom: Geometry, state: State):
    """The two fluxes q_k with dzeta/dt = -q_k' (upper and lower layer forms)."""
    g = geom.grid
    f1 = geom.upper.flux(state.phi1)[0]
    f2 = geom.lower.flux(state.phi2)[0]
    return -g.from_pad(f1), g.from_pad(f2)


def momentum_and_flux(geom: Geometry, state: State, dphi1, dphi2, dzeta=None, lower_rho=None):
    """Momentum density zeta phi' and its flux (flat bottom only).

    ``lower_rho`` overrides the density in front of the lower-layer sum of
    the flux; it exists only to compare against alternative readings of it.
    """
    p = geom.params
    g = geom.grid
    if not geom.lower.flat_b:
        raise FlatBottomRequired("momentum is conserved only over a flat bottom")
    phi = canonical_phi(geom, state)
    m = g.mul(state.zeta, g.derivative(phi))
    if dzeta is None:
        dzeta = -geom.upper.apply(state.phi1)[0]
    dphi = (p.rho2 * geom.lower.lvec_dot(dphi2) - p.rho1 * geom.upper.lvec_dot(dphi1)
            + g.mul(dzeta, p.rho2 * geom.lower.dlvec_dot(state.phi2)
                    + p.rho1 * geom.upper.dlvec_dot(state.phi1)))
    e = energy_density(geom, state)
    r2 = p.rho2 if lower_rho is None else lower_rho
    a1 = g.to_pad(g.derivative(state.phi1))
    a2 = g.to_pad(g.derivative(state.phi2))
    kin = p.rho1 * np.einsum("ix,ijx,jx->x", a1, geom.upper.G, a1)
    kin += r2 * np.einsum("ix,ijx,jx->x", a2, geom.lower.G, a2)
    Fm = -(g.mul(state.zeta, dphi) + e) + g.from_pad(kin)
    return m, Fm


def momentum(geom: Geometry, state: State) -> float:
    if not geom.lower.flat_b:
        return float("nan")
    g = geom.grid
    return float(g.integrate(g.mul(state.zeta, g.derivative(canonical_phi(geom, state)))))


def hamiltonian_value(model: Model, canon: CanonicalState) -> float:
    geom = Geometry(model, canon.zeta)
    return energy(geom, prepare_initial_data(model, canon, geom))


def variational_derivatives(model: Model, canon: CanonicalState):
    """(delta_zeta H, delta_phi H) from the closed-form expressions."""
    geom = Geometry(model, canon.zeta)
    state = prepare_initial_data(model, canon, geom)
    dzeta, dphi = canonical_rhs_from_state(geom, state)
    return -dphi, dzeta


def energy_variational_derivatives(geom: Geometry, state: State):
    """(delta_zeta E, delta_phi1 E, delta_phi2 E) of the energy at fixed potentials."""
    p = geom.params
    return (-compute_F(geom, state), p.rho1 * geom.upper.apply(state.phi1),
            p.rho2 * geom.lower.apply(state.phi2))


def _fd_scan(fun, steps):
    return [(fun(h) - fun(-h)) / (2 * h) for h in steps]


def variational_derivative_check(model: Model, canon: CanonicalState, dzeta_dir, dphi_dir,
                                 steps=(1e-3, 1e-4, 1e-5, 1e-6)) -> dict:
    """Relative errors between centered differences of the Hamiltonian and the closed forms.

    Returns the minimum over ``steps`` for each direction, together with the
    analogous check of the energy in the variables (zeta, phi1, phi2).
    """
    g = model.grid
    dz_H, dp_H = variational_derivatives(model, canon)

    def rel(fds, exact):
        scale = max(abs(exact), 1e-300)
        return min(abs(fd - exact) / scale for fd in fds)

    H = lambda z, p_: hamiltonian_value(model, CanonicalState(z, p_))
    out = {}
    out["phi"] = rel(_fd_scan(lambda h: H(canon.zeta, canon.phi + h * dphi_dir), steps),
                     g.inner(dp_H, dphi_dir))
    out["zeta"] = rel(_fd_scan(lambda h: H(canon.zeta + h * dzeta_dir, canon.phi), steps),
                      g.inner(dz_H, dzeta_dir))

    geom = Geometry(model, canon.zeta)
    state = prepare_initial_data(model, canon, geom)
    dE_z, dE_1, dE_2 = energy_variational_derivatives(geom, state)
    E = lambda st: energy(Geometry(model, st.zeta), st)
    d1 = np.broadcast_to(dphi_dir, state.phi1.shape)
    d2 = np.broadcast_to(dphi_dir, state.phi2.shape)
    out["E_zeta"] = rel(_fd_scan(lambda h: E(State(state.zeta + h * dzeta_dir, state.phi1, state.phi2)), steps),
                        g.inner(dE_z, dzeta_dir))
    out["E_phi1"] = rel(_fd_scan(lambda h: E(State(state.zeta, state.phi1 + h * d1, state.phi2)), steps),
                        g.inner(dE_1, d1))
    out["E_phi2"] = rel(_fd_scan(lambda h: E(State(state.zeta, state.phi1, state.phi2 + h * d2)), steps),
                        g.inner(dE_2, d2))
    return out


def diagnostics_report(model: Model, y, t: float, epsilon: float = 0.0,
                       derivs: TimeDerivatives | None = None) -> DiagnosticsReport:
    g = model.grid
    geom = Geometry(model, y.zeta)
    if isinstance(y, CanonicalState):
        state = prepare_initial_data(model, y, geom)
        ham = None
    else:
        state = y
        ham = hamiltonian_value(model, CanonicalState(y.zeta, canonical_phi(geom, y)))
    derivs = compute_time_derivatives(model, state, epsilon, geom) if derivs is None else derivs
    a = compute_a(geom, state, derivs)
    _, mmin = stability_margin(geom, state, a)
    en = energy(geom, state)
    return DiagnosticsReport(
        t=float(t), mass=float(g.integrate(state.zeta)), energy=en, momentum=momentum(geom, state),
        hamiltonian=en if ham is None else ham, margin_min=mmin,
        compat_residual=compat_residual(geom, state.phi1, state.phi2),
        min_H1=float(geom.H1.min()), min_H2=float(geom.H2.min()),
    )


def local_law_residuals(model: Model, states: list, dt: float, derivs: TimeDerivatives | None = None):
    """Residuals of the local energy and momentum laws at the middle of three snapshots.

    ``states`` holds the snapshots at t - dt, t, t + dt (State objects).  The
    time derivative of each density is a centered difference; the flux is
    evaluated at t.  Residuals are sup norms relative to the flux divergence.
    """
    g = model.grid
    s_m, s0, s_p = states
    geoms = [Geometry(model, s.zeta) for s in states]
    derivs = compute_time_derivatives(model, s0, 0.0, geoms[1]) if derivs is None else derivs
    e_m, e_p = energy_density(geoms[0], s_m), energy_density(geoms[2], s_p)
    fe = energy_flux(geoms[1], s0, derivs.g1, derivs.g2)
    div = g.derivative(fe)
    res_e = (e_p - e_m) / (2 * dt) + div
    out = {"energy": float(np.abs(res_e).max() / np.abs(div).max())}
    if geoms[1].lower.flat_b:
        m_m, _ = momentum_and_flux(geoms[0], s_m, derivs.g1, derivs.g2)
        m_p, _ = momentum_and_flux(geoms[2], s_p, derivs.g1, derivs.g2)
        _, Fm = momentum_and_flux(geoms[1], s0, derivs.g1, derivs.g2, dzeta=derivs.g0)
        divm = g.derivative(Fm)
        res_m = (m_p - m_m) / (2 * dt) + divm
        out["momentum"] = float(np.abs(res_m).max() / np.abs(divm).max())
    else:
        out["momentum"] = float("nan")
    return out

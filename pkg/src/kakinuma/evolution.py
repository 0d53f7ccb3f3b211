"""Time derivatives and time stepping.

Two formulations are available.

direct
    evolves (zeta, phi1, phi2).  The interface moves with G0 (plus
    eps * zeta''), and the potentials with the solution G of the
    compatibility system whose right-hand side carries the zeta-derivative
    of the compatibility rows.
canonical
    evolves (zeta, phi) with phi = rho2 l2 . phi2 - rho1 l1 . phi1 and
    re-solves the compatibility system at every stage, so it never leaves
    the constraint manifold.  This is the default.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import CanonicalState, Model, State, StabilityViolated
from .elliptic import EllipticRHS, prepare_initial_data, solve_compatibility
from .operators import Geometry, block_inverse, commutator_f, compute_G0, interface_velocities


@dataclass
class TimeDerivatives:
    g0: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    F: np.ndarray | None = None
    iterations: int = 0


@dataclass
class SimConfig:
    dt: float
    t_end: float
    epsilon: float = 0.0
    scheme: str = "canonical"
    reproject_every: int = 10
    output_every: int = 1
    margin_min: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.scheme not in ("direct", "canonical"):
            raise ValueError("scheme must be 'direct' or 'canonical'")
        if self.scheme == "canonical" and self.epsilon > 0:
            raise ValueError("the canonical scheme has no regularized form; use scheme='direct'")


def compute_F(geom: Geometry, state: State, vel=None) -> np.ndarray:
    """Bernoulli-type forcing of the canonical potential."""
    p = geom.params
    g = geom.grid
    u1, u2, w1, w2 = interface_velocities(geom, state) if vel is None else vel
    sq = lambda f: g.to_pad(f) ** 2
    acc = p.rho1 * 0.5 * (sq(u1) + sq(w1)) - p.rho2 * 0.5 * (sq(u2) + sq(w2))
    return (p.rho1 - p.rho2) * p.grav * state.zeta + g.from_pad(acc)


def _eps_terms(geom: Geometry, state: State, f1, f2, v):
    """Commutators with the Laplacian, by composition.

    For i >= 1:  ft_{k,i} = (L_{k,i} phi)'' - L_{k,i}(phi'') - f_{k,i} zeta''.
    Combined row: the commutator of L_{1,0} + L_{2,0} plus (v zeta'')', which is
    a perfect derivative and is returned as a flux.
    """
    g = geom.grid
    lap = g.laplacian
    dzz = lap(state.zeta)
    c1 = geom.upper.compat(state.phi1)
    c2 = geom.lower.compat(state.phi2)
    d1 = geom.upper.compat(lap(state.phi1))
    d2 = geom.lower.compat(lap(state.phi2))
    ft1 = lap(c1[1:]) - d1[1:] - g.mul(f1, dzz) if len(f1) else np.zeros((0, g.points))
    ft2 = lap(c2[1:]) - d2[1:] - g.mul(f2, dzz) if len(f2) else np.zeros((0, g.points))
    div3 = lap(c1[0] + c2[0]) - (d1[0] + d2[0]) + g.derivative(g.mul(v, dzz))
    flux3 = g.antiderivative(g.project(div3), rtol=1e-9)
    return ft1, ft2, flux3


def compute_time_derivatives(model: Model, state: State, epsilon: float = 0.0,
                             geom: Geometry | None = None) -> TimeDerivatives:
    geom = Geometry(model, state.zeta) if geom is None else geom
    g = model.grid
    vel = interface_velocities(geom, state)
    u1, u2, _, _ = vel
    v = u2 - u1
    G0 = compute_G0(geom, state, block_inverse(geom))
    F = compute_F(geom, state, vel)
    f1, f2 = commutator_f(geom, state)
    rhs1 = -g.mul(f1, G0) if len(f1) else f1
    rhs2 = -g.mul(f2, G0) if len(f2) else f2
    flux = g.mul(v, G0)
    if epsilon:
        ft1, ft2, flux3 = _eps_terms(geom, state, f1, f2, v)
        rhs1 = rhs1 + epsilon * ft1
        rhs2 = rhs2 + epsilon * ft2
        flux = flux + epsilon * flux3
    sol = solve_compatibility(geom, EllipticRHS(rhs1, rhs2, flux, F))
    return TimeDerivatives(G0, sol.phi1, sol.phi2, F, sol.iterations)


def rhs_direct(model: Model, state: State, epsilon: float = 0.0) -> State:
    d = compute_time_derivatives(model, state, epsilon)
    if epsilon:
        lap = model.grid.laplacian
        return State(d.g0 + epsilon * lap(state.zeta), d.g1 + epsilon * lap(state.phi1),
                     d.g2 + epsilon * lap(state.phi2))
    return State(d.g0, d.g1, d.g2)


def canonical_rhs_from_state(geom: Geometry, state: State, F=None):
    p = geom.params
    g = geom.grid
    r10 = geom.upper.apply(state.phi1)[0]
    F = compute_F(geom, state) if F is None else F
    lift = p.rho1 * geom.upper.dlvec_dot(state.phi1) + p.rho2 * geom.lower.dlvec_dot(state.phi2)
    return -r10, F - g.mul(r10, lift)


def rhs_canonical(model: Model, canon: CanonicalState):
    geom = Geometry(model, canon.zeta)
    state = prepare_initial_data(model, canon, geom)
    return canonical_rhs_from_state(geom, state)


def rk4(f: Callable, y: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def step_rk4(model: Model, y, dt: float, epsilon: float = 0.0):
    """One classical RK4 step of the direct (State) or canonical (CanonicalState) system."""
    if isinstance(y, CanonicalState):
        def f(arr):
            dz, dp = rhs_canonical(model, CanonicalState.unpack(arr))
            return np.stack([dz, dp])
        return CanonicalState.unpack(rk4(f, y.pack(), dt))
    n1 = model.params.n_upper

    def f(arr):
        return rhs_direct(model, State.unpack(arr, n1), epsilon).pack()
    return State.unpack(rk4(f, y.pack(), dt), n1)


def to_state(model: Model, y) -> State:
    return prepare_initial_data(model, y) if isinstance(y, CanonicalState) else y


def to_canonical(model: Model, y) -> CanonicalState:
    if isinstance(y, CanonicalState):
        return y
    from .diagnostics import canonical_phi
    return CanonicalState(y.zeta, canonical_phi(Geometry(model, y.zeta), y))


@dataclass
class SimulationResult:
    reports: list
    final: object
    aborted: bool = False
    error: Exception | None = None
    times: list = field(default_factory=list)


def simulate(model: Model, initial, config: SimConfig,
             on_output: Callable | None = None, compat_check: float | None = 1e-6) -> SimulationResult:
    """Step to t_end, recording a diagnostics report every ``output_every`` steps.

    The stability margin is checked at every recorded sample, including
    t = 0 before any step is taken; a violation raises StabilityViolated.
    """
    from .diagnostics import diagnostics_report

    if config.scheme == "canonical":
        y = to_canonical(model, initial)
    else:
        y = to_state(model, initial)
        if compat_check is not None:
            from .operators import compat_residual
            res = compat_residual(Geometry(model, y.zeta), y.phi1, y.phi2)
            if res > compat_check:
                raise ValueError(f"initial state violates the compatibility conditions ({res:.2e})")

    nsteps = int(round(config.t_end / config.dt))
    reports = []
    last_good = None

    def record(n, y):
        nonlocal last_good
        t = n * config.dt
        rep = diagnostics_report(model, y, t, epsilon=config.epsilon)
        reports.append(rep)
        if on_output is not None:
            on_output(t, y, rep)
        if rep.margin_min < config.margin_min:
            raise StabilityViolated(t, rep.margin_min, last_good)
        last_good = t

    record(0, y)
    for n in range(1, nsteps + 1):
        y = step_rk4(model, y, config.dt, config.epsilon)
        if (config.scheme == "direct" and config.reproject_every
                and n % config.reproject_every == 0):
            y = prepare_initial_data(model, to_canonical(model, y))
        if n % config.output_every == 0 or n == nsteps:
            record(n, y)
    return SimulationResult(reports, y, times=[r.t for r in reports])

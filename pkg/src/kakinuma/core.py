"""Periodic grid, Fourier calculus, model parameters and configuration.

Fields are plain ``numpy`` arrays whose last axis runs over the M grid
points.  A stack of potentials for one layer is an array of shape
``(n_terms, M)``.  Products of fields are formed with the 3/2 rule: both
factors are zero-padded to 3M/2 points, multiplied, and truncated back.
The Nyquist mode is dropped along the way, which makes every product a
Galerkin projection and keeps the discrete operators exactly symmetric.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy.fft as sfft


# ---------------------------------------------------------------- errors

class KakinumaError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(KakinumaError):
    pass


class NonZeroMean(KakinumaError):
    pass


class DegenerateFit(KakinumaError):
    pass


class SingularBlock(KakinumaError):
    pass


class NonCavitation(KakinumaError):
    pass


class FlatBottomRequired(KakinumaError):
    pass


class NoConvergence(KakinumaError):
    def __init__(self, iterations: int, residual: float):
        super().__init__(f"CG did not converge: {iterations} iterations, "
                         f"relative residual {residual:.3e}")
        self.iterations = iterations
        self.residual = residual


class StabilityViolated(KakinumaError):
    def __init__(self, t: float, margin: float, last_good_time: float | None = None):
        super().__init__(f"stability margin {margin:.3e} below threshold at t={t:.6g}")
        self.t = t
        self.margin = margin
        self.last_good_time = last_good_time


def _workers() -> int:
    # KAKINUMA_THREADS caps the FFT worker pool
    try:
        return max(1, int(os.environ.get("KAKINUMA_THREADS", "1")))
    except ValueError:
        return 1


# ------------------------------------------------------------------ grid

@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid of ``points`` nodes on ``[0, length)``.

    ``dealias=True`` forms products with the 3/2 rule; ``False`` gives
    plain collocation products.
    """
    length: float
    points: int
    dealias: bool = True

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("grid length must be positive")
        if self.points < 8 or self.points % 2:
            raise ValueError("grid needs an even number of points, at least 8")

    @property
    def spacing(self) -> float:
        return self.length / self.points

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.points) * self.spacing

    @property
    def padded_points(self) -> int:
        return 3 * self.points // 2 if self.dealias else self.points

    @property
    def k(self) -> np.ndarray:
        """Non-negative wavenumbers of the real FFT, 2*pi*k/L, k = 0..M/2."""
        return 2 * np.pi * np.arange(self.points // 2 + 1) / self.length

    def _kpow(self, order: int) -> np.ndarray:
        mult = (1j * self.k) ** order
        if order % 2:
            mult[-1] = 0.0
        return mult

    # spectral calculus (all act along the last axis)
    def derivative(self, f, order: int = 1) -> np.ndarray:
        if order < 1:
            raise ValueError("order must be a positive integer")
        fh = sfft.rfft(f, axis=-1, workers=_workers())
        return sfft.irfft(fh * self._kpow(order), n=self.points, axis=-1, workers=_workers())

    def antiderivative(self, f, rtol: float = 1e-12) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        mean = f.mean(axis=-1)
        scale = np.sqrt(np.mean(f ** 2, axis=-1))
        if np.any(np.abs(mean) > rtol * np.maximum(scale, np.finfo(float).tiny)):
            raise NonZeroMean(f"field mean {np.max(np.abs(mean)):.3e} is not negligible")
        fh = sfft.rfft(f, axis=-1, workers=_workers())
        ik = 1j * self.k
        ik[0] = 1.0
        gh = fh / ik
        gh[..., 0] = 0.0
        gh[..., -1] = 0.0
        return sfft.irfft(gh, n=self.points, axis=-1, workers=_workers())

    def integrate(self, f) -> np.ndarray | float:
        return self.length * np.mean(f, axis=-1)

    def inner(self, f, g) -> float:
        """Discrete L2 pairing, summed over any leading (component) axes."""
        return float(self.spacing * np.sum(np.asarray(f) * np.asarray(g)))

    def laplacian(self, f) -> np.ndarray:
        return self.derivative(f, 2)

    # dealiased products
    def to_pad(self, f) -> np.ndarray:
        """Trigonometric interpolant of ``f`` sampled on the padded grid."""
        if not self.dealias:
            return np.asarray(f, dtype=float)
        M, Mp = self.points, self.padded_points
        fh = sfft.rfft(f, axis=-1, workers=_workers())
        fh[..., -1] = 0.0
        out = np.zeros(fh.shape[:-1] + (Mp // 2 + 1,), dtype=complex)
        out[..., : M // 2 + 1] = fh
        return sfft.irfft(out, n=Mp, axis=-1, workers=_workers()) * (Mp / M)

    def from_pad(self, fp) -> np.ndarray:
        """Truncate padded-grid samples back to the M resolved modes."""
        if not self.dealias:
            return np.asarray(fp, dtype=float)
        M, Mp = self.points, self.padded_points
        fh = sfft.rfft(fp, axis=-1, workers=_workers())[..., : M // 2 + 1].copy()
        fh[..., -1] = 0.0
        return sfft.irfft(fh, n=M, axis=-1, workers=_workers()) * (M / Mp)

    def mul(self, f, g) -> np.ndarray:
        return self.from_pad(self.to_pad(f) * self.to_pad(g))

    def project(self, f) -> np.ndarray:
        """Remove the Nyquist mode (identity for collocation grids)."""
        if not self.dealias:
            return np.asarray(f, dtype=float)
        fh = sfft.rfft(f, axis=-1, workers=_workers())
        fh[..., -1] = 0.0
        return sfft.irfft(fh, n=self.points, axis=-1, workers=_workers())


def spectral_derivative(grid: Grid1D, f, order: int = 1) -> np.ndarray:
    return grid.derivative(f, order)


def spectral_antiderivative(grid: Grid1D, f, rtol: float = 1e-12) -> np.ndarray:
    return grid.antiderivative(f, rtol)


def integrate(grid: Grid1D, f):
    return grid.integrate(f)


def multiply_dealiased(grid: Grid1D, f, g) -> np.ndarray:
    return grid.mul(f, g)


# ------------------------------------------------------------- parameters

def coef(num, den) -> Fraction:
    """num/den with the convention 0/0 = 0."""
    if den == 0:
        if num == 0:
            return Fraction(0)
        raise ZeroDivisionError(f"{num}/0")
    return Fraction(num, den)


@dataclass(frozen=True)
class ModelParams:
    rho1: float
    rho2: float
    h1: float
    h2: float
    grav: float
    n_upper: int
    p_list: tuple = (0,)
    bottom: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "p_list", tuple(int(p) for p in self.p_list))
        if not self.rho1 > 0:
            raise ValueError("rho1 must be positive")
        if not self.rho2 > self.rho1:
            raise ValueError("stable stratification needs rho2 > rho1")
        if not (self.h1 > 0 and self.h2 > 0 and self.grav > 0):
            raise ValueError("h1, h2 and grav must be positive")
        if int(self.n_upper) != self.n_upper or self.n_upper < 0:
            raise ValueError("n_upper must be a non-negative integer")
        p = self.p_list
        if not p or p[0] != 0 or any(b <= a for a, b in zip(p, p[1:])):
            raise ValueError("p_list must start at 0 and be strictly increasing")
        if self.bottom is not None:
            b = np.asarray(self.bottom, dtype=float)
            b.setflags(write=False)
            object.__setattr__(self, "bottom", b)
            if np.abs(b.mean()) > 1e-12 * max(1.0, np.abs(b).max()):
                raise ValueError("bottom must have zero mean (absorb the mean into h2)")
            if np.abs(b).max() >= self.h2:
                raise ValueError("bottom amplitude must stay below h2")

    @property
    def n_lower(self) -> int:
        return len(self.p_list) - 1

    @property
    def upper_exponents(self) -> tuple:
        return tuple(2 * i for i in range(self.n_upper + 1))

    @property
    def flat(self) -> bool:
        return self.bottom is None or not np.any(self.bottom)


@dataclass(frozen=True)
class Model:
    """Parameters bound to a grid, plus solver settings."""
    params: ModelParams
    grid: Grid1D
    cg_tol: float = 1e-10
    cg_max_iter: int = 500
    h_min: float = 0.0

    def __post_init__(self):
        b = self.params.bottom
        if b is not None and b.shape != (self.grid.points,):
            raise ValueError("bottom must be sampled on the grid")

    @property
    def bottom(self) -> np.ndarray:
        b = self.params.bottom
        return np.zeros(self.grid.points) if b is None else b


@dataclass(frozen=True)
class State:
    """Interface displacement and the two stacks of layer potentials."""
    zeta: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray

    def __post_init__(self):
        for name in ("zeta", "phi1", "phi2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.phi1.ndim != 2 or self.phi2.ndim != 2:
            raise ValueError("phi1 and phi2 must be 2-D stacks (terms, points)")

    @classmethod
    def rest(cls, model: Model) -> "State":
        M = model.grid.points
        p = model.params
        return cls(np.zeros(M), np.zeros((p.n_upper + 1, M)), np.zeros((p.n_lower + 1, M)))

    def pack(self) -> np.ndarray:
        return np.concatenate([self.zeta[None], self.phi1, self.phi2])

    @classmethod
    def unpack(cls, arr: np.ndarray, n1: int) -> "State":
        return cls(arr[0], arr[1:n1 + 2], arr[n1 + 2:])


@dataclass(frozen=True)
class CanonicalState:
    zeta: np.ndarray
    phi: np.ndarray

    def pack(self) -> np.ndarray:
        return np.stack([self.zeta, self.phi])

    @classmethod
    def unpack(cls, arr: np.ndarray) -> "CanonicalState":
        return cls(arr[0], arr[1])


def check_noncavitation(model: Model, zeta) -> tuple[np.ndarray, np.ndarray]:
    p = model.params
    H1 = p.h1 - zeta
    H2 = p.h2 + zeta - model.bottom
    floor = max(model.h_min, 0.0)
    if not (np.all(np.isfinite(H1)) and np.all(np.isfinite(H2))):
        raise NonCavitation("non-finite layer thickness")
    if H1.min() <= floor or H2.min() <= floor:
        raise NonCavitation(f"layer thickness min(H1)={H1.min():.4g}, "
                            f"min(H2)={H2.min():.4g} at or below {floor:.4g}")
    return H1, H2


# ---------------------------------------------------------------- config

_DEFAULTS = {
    "g": 9.81,
    "N": 0,
    "p_list": None,
    "bottom": {"type": "flat"},
    "dt": 0.01,
    "t_end": 1.0,
    "epsilon": 0.0,
    "cg_tol": 1e-10,
    "cg_max_iter": 500,
    "h_min": 1e-3,
    "margin_min": 0.0,
    "output_every": 1,
}
_REQUIRED = ("rho1", "rho2", "h1", "h2", "L", "M")
_KEYS = set(_REQUIRED) | set(_DEFAULTS)
_BOTTOM_KEYS = {"type", "amplitude", "mode"}


@dataclass(frozen=True)
class Config:
    rho1: float
    rho2: float
    h1: float
    h2: float
    g: float
    N: int
    p_list: tuple
    L: float
    M: int
    bottom: dict
    dt: float
    t_end: float
    epsilon: float
    cg_tol: float
    cg_max_iter: int
    h_min: float
    margin_min: float
    output_every: int

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["p_list"] = list(self.p_list)
        return d

    def grid(self) -> Grid1D:
        return Grid1D(self.L, self.M)

    def bottom_field(self, grid: Grid1D) -> np.ndarray | None:
        kind = self.bottom.get("type", "flat")
        if kind == "flat":
            return None
        amp = float(self.bottom.get("amplitude", 0.0))
        mode = int(self.bottom.get("mode", 1))
        return amp * np.cos(2 * np.pi * mode * grid.x / grid.length)

    def params(self, grid: Grid1D | None = None) -> ModelParams:
        grid = grid or self.grid()
        return ModelParams(self.rho1, self.rho2, self.h1, self.h2, self.g, self.N,
                           self.p_list, self.bottom_field(grid))

    def model(self) -> Model:
        grid = self.grid()
        return Model(self.params(grid), grid, self.cg_tol, self.cg_max_iter, self.h_min)


def config_from_dict(raw: dict) -> Config:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - _KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    missing = [k for k in _REQUIRED if k not in raw]
    if missing:
        raise ConfigError(f"missing config key(s): {', '.join(missing)}")
    d = dict(_DEFAULTS)
    d.update(raw)

    def num(key, kind=float):
        v = d[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"config key '{key}' must be a number, got {v!r}")
        if kind is int:
            if int(v) != v:
                raise ConfigError(f"config key '{key}' must be an integer, got {v!r}")
            return int(v)
        return float(v)

    N = num("N", int)
    p_list = d["p_list"]
    if p_list is None:
        p_list = [2 * i for i in range(N + 1)]
    if not isinstance(p_list, list) or not all(isinstance(p, int) and not isinstance(p, bool) for p in p_list):
        raise ConfigError("config key 'p_list' must be a list of integers")
    bottom = d["bottom"]
    if not isinstance(bottom, dict):
        raise ConfigError("config key 'bottom' must be an object")
    bad = sorted(set(bottom) - _BOTTOM_KEYS)
    if bad:
        raise ConfigError(f"unknown config key(s) in 'bottom': {', '.join(bad)}")
    if bottom.get("type", "flat") not in ("flat", "cosine"):
        raise ConfigError("config key 'bottom.type' must be 'flat' or 'cosine'")
    cfg = Config(
        rho1=num("rho1"), rho2=num("rho2"), h1=num("h1"), h2=num("h2"), g=num("g"),
        N=N, p_list=tuple(p_list), L=num("L"), M=num("M", int), bottom=dict(bottom),
        dt=num("dt"), t_end=num("t_end"), epsilon=num("epsilon"), cg_tol=num("cg_tol"),
        cg_max_iter=num("cg_max_iter", int), h_min=num("h_min"),
        margin_min=num("margin_min"), output_every=num("output_every", int),
    )
    # surface invariant violations as config errors
    try:
        cfg.model()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.dt <= 0 or cfg.output_every < 1 or cfg.epsilon < 0:
        raise ConfigError("need dt > 0, output_every >= 1 and epsilon >= 0")
    return cfg


def load_config(path) -> Config:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(raw)

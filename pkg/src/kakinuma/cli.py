"""Command-line entry point: ``kakinuma <command> --config <path>``.

Exit codes: 0 success, 1 configuration error, 2 solver failure,
3 stability abort, 4 invariant failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
import uuid
from pathlib import Path

import numpy as np

from . import __version__
from .core import (CanonicalState, ConfigError, KakinumaError, NoConvergence, NonCavitation,
                   SingularBlock, StabilityViolated, State, config_from_dict)
from .diagnostics import (canonical_phi, diagnostics_report, energy, hamiltonian_value,
                          local_law_residuals)
from .elliptic import prepare_initial_data
from .evolution import SimConfig, compute_time_derivatives, simulate
from .lintheory import convergence_order_scan, dispersion_table
from .operators import Geometry
from .stability import compute_a, stability_margin

EXIT_CONFIG, EXIT_SOLVER, EXIT_STABILITY, EXIT_INVARIANT = 1, 2, 3, 4
FMT = "%.17g"

DEFAULT_CONFIG = {
    "rho1": 1.0, "rho2": 2.0, "h1": 1.0, "h2": 3.0, "g": 1.0, "N": 1, "p_list": [0, 2],
    "L": 20.0, "M": 64, "bottom": {"type": "flat"}, "dt": 0.05, "t_end": 0.5,
}


def _write_csv(path: Path, header: list, columns) -> None:
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, fmt=FMT, delimiter=",", header=",".join(header), comments="")


def _read_csv(path) -> dict:
    arr = np.genfromtxt(path, delimiter=",", names=True)
    return {name: np.atleast_1d(arr[name]) for name in arr.dtype.names}


def _state_columns(model, state: State):
    names = ["x", "zeta"] + [f"phi1_{i}" for i in range(len(state.phi1))] \
        + [f"phi2_{i}" for i in range(len(state.phi2))]
    cols = [model.grid.x, state.zeta, *state.phi1, *state.phi2]
    return names, cols


def write_state(path: Path, model, state: State) -> None:
    names, cols = _state_columns(model, state)
    _write_csv(path, names, cols)


def read_state(path, model) -> State:
    d = _read_csv(path)
    p = model.params
    if len(d["zeta"]) != model.grid.points:
        raise ConfigError(f"{path}: {len(d['zeta'])} rows, grid has {model.grid.points} points")
    phi1 = np.array([d[f"phi1_{i}"] for i in range(p.n_upper + 1)])
    phi2 = np.array([d[f"phi2_{i}"] for i in range(p.n_lower + 1)])
    return State(d["zeta"], phi1, phi2)


def read_canonical(path, model) -> CanonicalState:
    d = _read_csv(path)
    if len(d["zeta"]) != model.grid.points:
        raise ConfigError(f"{path}: {len(d['zeta'])} rows, grid has {model.grid.points} points")
    return CanonicalState(d["zeta"], d["phi"])


def _apply_overrides(raw: dict, sets: list) -> dict:
    raw = dict(raw)
    for item in sets or []:
        key, _, val = item.partition("=")
        if not _:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        try:
            raw[key] = json.loads(val)
        except json.JSONDecodeError:
            raw[key] = val
    return raw


def _load(args):
    if args.config is None:
        raw = dict(DEFAULT_CONFIG)
    else:
        text = Path(args.config).read_text()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: malformed JSON at line {exc.lineno}, "
                              f"column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(_apply_overrides(raw, args.set))


def _manifest(out: Path, args, cfg, started: float) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    manifest = {
        "config_path": str(args.config) if args.config else None,
        "command": args.command,
        "run_id": uuid.uuid4().hex[:12],
        "output_dir": str(out),
        "wall_clock_s": round(time.time() - started, 3),
        "version": __version__,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def cmd_dispersion(args, cfg) -> int:
    started = time.time()
    params = cfg.params()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    xi_max = args.xi_max if args.xi_max is not None else np.pi * cfg.M / cfg.L
    xi_min = args.xi_min if args.xi_min is not None else 2 * np.pi / cfg.L
    xi = np.geomspace(xi_min, xi_max, args.n_xi)
    tab = dispersion_table(xi, params)
    rel = np.abs(tab.cK2 - tab.cIW2) / tab.cIW2
    _write_csv(out / "dispersion.csv", ["xi", "cK2", "cIW2", "cSW2", "rel_error"],
               [tab.xi, tab.cK2, tab.cIW2, np.full_like(xi, tab.cSW2), rel])
    hmax = max(params.h1, params.h2)
    scan = np.geomspace(1e-2, 1e-1, 25) / hmax
    try:
        slope = convergence_order_scan(params, scan)
    except KakinumaError:
        slope = float("nan")
    _write_csv(out / "order_scan.csv", ["N", "n_lower", "slope", "expected"],
               [[params.n_upper], [params.n_lower], [slope], [4 * params.n_upper + 2]])
    _manifest(out, args, cfg, started)
    print(f"wrote {out/'dispersion.csv'} and {out/'order_scan.csv'} (slope {slope:.4f})")
    return 0


def cmd_prepare(args, cfg) -> int:
    model = cfg.model()
    canon = read_canonical(args.input, model)
    state = prepare_initial_data(model, canon)
    write_state(Path(args.output), model, state)
    print(f"wrote {args.output}")
    return 0


def _initial_from_args(args, model):
    if args.input:
        header = Path(args.input).read_text().splitlines()[0].split(",")
        if "phi" in header:
            return read_canonical(args.input, model)
        return read_state(args.input, model)
    # default: a right-going small linear wave in the first Fourier mode
    from .lintheory import phase_speed_kakinuma
    p = model.params
    x = model.grid.x
    k = 2 * np.pi / model.grid.length
    omega = np.sqrt(phase_speed_kakinuma(k, p)) * k
    amp = args.amplitude * p.h1
    return CanonicalState(amp * np.cos(k * x), (p.rho2 - p.rho1) * p.grav * amp / omega * np.sin(k * x))


SERIES_COLUMNS = ["t", "mass", "energy", "momentum", "hamiltonian", "stability_margin",
                  "compat_residual", "min_H1", "min_H2"]


def cmd_simulate(args, cfg) -> int:
    started = time.time()
    model = cfg.model()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sim = SimConfig(cfg.dt, cfg.t_end, cfg.epsilon, args.scheme, args.reproject_every,
                    cfg.output_every, cfg.margin_min)
    initial = _initial_from_args(args, model)
    rows = []

    def on_output(t, y, rep):
        rows.append([rep.t, rep.mass, rep.energy, rep.momentum, rep.hamiltonian, rep.margin_min,
                     rep.compat_residual, rep.min_H1, rep.min_H2])
        st = y if isinstance(y, State) else prepare_initial_data(model, y)
        write_state(out / f"state_{t:.6f}.csv", model, st)

    code = 0
    try:
        simulate(model, initial, sim, on_output=on_output)
    except StabilityViolated as exc:
        last = exc.last_good_time
        print(f"stability abort at t={exc.t:.6g} (margin {exc.margin:.3e}); "
              f"last good time {'none' if last is None else f'{last:.6g}'}", file=sys.stderr)
        code = EXIT_STABILITY
    finally:
        if rows:
            _write_csv(out / "series.csv", SERIES_COLUMNS, np.array(rows).T)
        _manifest(out, args, cfg, started)
    if code == 0:
        print(f"wrote {len(rows)} samples to {out/'series.csv'}")
    return code


def cmd_diagnose(args, cfg) -> int:
    model = cfg.model()
    if args.series:
        files = sorted(Path(args.series).glob("state_*.csv"),
                       key=lambda p: float(p.stem.split("_", 1)[1]))
        targets = [(float(f.stem.split("_", 1)[1]), f) for f in files]
    else:
        if not args.state:
            raise ConfigError("diagnose needs --state or --series")
        targets = [(0.0, Path(args.state))]
    if args.stability:
        t, path = targets[0]
        state = read_state(path, model)
        geom = Geometry(model, state.zeta)
        d = compute_time_derivatives(model, state, cfg.epsilon, geom)
        a = compute_a(geom, state, d)
        margin, _ = stability_margin(geom, state, a)
        dest = Path(args.output) if args.output else None
        header = ["x", "a", "margin"]
        if dest:
            _write_csv(dest, header, [model.grid.x, a, margin])
        else:
            print(",".join(header))
            for row in zip(model.grid.x, a, margin):
                print(",".join(FMT % v for v in row))
        return 0
    fields = ["t", "mass", "energy", "momentum", "hamiltonian", "margin_min", "compat_residual",
              "local_energy_residual", "local_momentum_residual"]
    print(",".join(fields))
    states = [read_state(path, model) for _, path in targets]
    times = [t for t, _ in targets]
    for i, (t, st) in enumerate(zip(times, states)):
        rep = diagnostics_report(model, st, t, epsilon=cfg.epsilon)
        if 0 < i < len(states) - 1 and cfg.epsilon == 0:
            h_m, h_p = t - times[i - 1], times[i + 1] - t
            if np.isclose(h_m, h_p, rtol=1e-6):
                res = local_law_residuals(model, states[i - 1:i + 2], h_p)
                rep.local_energy_residual = res["energy"]
                rep.local_momentum_residual = res["momentum"]
        d = rep.as_dict()
        print(",".join(FMT % d[f] for f in fields))
    return 0


def selftest_checks(cfg) -> list:
    """Fast invariant checks; each item is (name, passed, detail)."""
    from fractions import Fraction

    from .core import ModelParams
    from .elliptic import apply_P_operator, forward_rhs, gauge_fix, solve_compatibility
    from .lintheory import alpha_constant, matrices_for_exponents, phase_speed_kakinuma, phase_speed_shallow
    from .operators import block_inverse

    checks = []
    al = [alpha_constant(matrices_for_exponents(e)) for e in [(0,), (0, 2), (0, 1)]]
    checks.append(("alpha constants", al == [Fraction(1), Fraction(1, 6), Fraction(1, 4)], str(al)))

    p0 = ModelParams(cfg.rho1, cfg.rho2, cfg.h1, cfg.h2, cfg.g, 0, (0,))
    xi = np.geomspace(1e-3, 1e3, 50)
    err = np.abs(phase_speed_kakinuma(xi, p0) / phase_speed_shallow(p0) - 1).max()
    checks.append(("N=0 dispersionless", err < 1e-12, f"{err:.2e}"))

    model = cfg.model()
    g = model.grid
    x = g.x
    rng = np.random.default_rng(0)
    zeta = 0.1 * min(cfg.h1, cfg.h2) * np.cos(2 * np.pi * x / g.length + 0.4)
    geom = Geometry(model, zeta)
    blk = block_inverse(geom)
    a1, a2 = geom.alphas
    H1, H2 = geom.H1, geom.H2
    q0 = -H1 * H2 * a1 * a2 / (cfg.rho1 * H2 * a2 + cfg.rho2 * H1 * a1)
    err = np.abs(blk.q0 - q0).max() / np.abs(q0).max()
    checks.append(("block inverse q0", err < 1e-10, f"{err:.2e}"))

    def smooth(n):
        out = np.zeros((n, g.points))
        for m in range(1, 4):
            out += rng.normal(size=(n, 1)) * np.cos(2 * np.pi * m * x / g.length + rng.uniform(0, 6, (n, 1))) / m ** 2
        return out

    n = cfg.N + len(cfg.p_list)
    u, v = smooth(n), smooth(n)
    lhs, rhs_ = g.inner(apply_P_operator(geom, u), v), g.inner(u, apply_P_operator(geom, v))
    err = abs(lhs - rhs_) / max(abs(lhs), 1e-300)
    checks.append(("reduced operator symmetric", err < 1e-10, f"{err:.2e}"))

    phi1, phi2 = gauge_fix(model.params, smooth(cfg.N + 1), smooth(len(cfg.p_list)))
    sol = solve_compatibility(geom, forward_rhs(geom, phi1, phi2))
    err = max(np.abs(sol.phi1 - phi1).max(), np.abs(sol.phi2 - phi2).max())
    checks.append(("manufactured elliptic solve", err < 1e-8, f"{err:.2e} in {sol.iterations} its"))

    canon = CanonicalState(zeta, 0.05 * np.sin(2 * np.pi * x / g.length))
    st = prepare_initial_data(model, canon, geom)
    e, h = energy(geom, st), hamiltonian_value(model, canon)
    err = abs(e - h) / abs(h)
    checks.append(("energy equals Hamiltonian", err < 1e-10, f"{err:.2e}"))
    err = np.abs(canonical_phi(geom, st) - canon.phi).max()
    checks.append(("canonical round trip", err < 1e-8, f"{err:.2e}"))

    rest = State.rest(model)
    d = compute_time_derivatives(model, rest)
    a = compute_a(Geometry(model, rest.zeta), rest, d)
    ok = np.all(a == (cfg.rho2 - cfg.rho1) * cfg.g)
    checks.append(("rest-state stability coefficient", bool(ok), f"{a[0]!r}"))
    return checks


def cmd_selftest(args, cfg) -> int:
    checks = selftest_checks(cfg)
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
    return 0 if all(ok for _, ok, _ in checks) else EXIT_INVARIANT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kakinuma", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (value parsed as JSON)")
        return p

    p = common(sub.add_parser("dispersion", help="phase speeds and order scan"))
    p.add_argument("--out", default=".")
    p.add_argument("--xi-min", type=float)
    p.add_argument("--xi-max", type=float)
    p.add_argument("--n-xi", type=int, default=200)

    p = common(sub.add_parser("prepare", help="compatible state from canonical data"))
    p.add_argument("--input", required=True, help="CSV with columns x, zeta, phi")
    p.add_argument("--output", required=True)

    p = common(sub.add_parser("simulate", help="time integration"))
    p.add_argument("--out", default=".")
    p.add_argument("--input", help="canonical (x,zeta,phi) or state CSV; default: small linear wave")
    p.add_argument("--scheme", choices=["canonical", "direct"], default="canonical")
    p.add_argument("--reproject-every", type=int, default=10)
    p.add_argument("--amplitude", type=float, default=1e-2, help="default wave amplitude / h1")

    p = common(sub.add_parser("diagnose", help="diagnostics of a state or a snapshot series"))
    p.add_argument("--state")
    p.add_argument("--series", help="directory of state_<t>.csv snapshots")
    p.add_argument("--stability", action="store_true", help="emit x, a, margin")
    p.add_argument("--output")

    common(sub.add_parser("selftest", help="run the invariant checks"), config_required=False)
    return ap


COMMANDS = {"dispersion": cmd_dispersion, "prepare": cmd_prepare, "simulate": cmd_simulate,
            "diagnose": cmd_diagnose, "selftest": cmd_selftest}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NoConvergence, SingularBlock, NonCavitation) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except StabilityViolated as exc:
        print(f"stability abort: {exc}", file=sys.stderr)
        return EXIT_STABILITY
    except (OSError, KeyError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

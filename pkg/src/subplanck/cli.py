"""Command-line entry point.

Exit codes: 0 success, 1 runtime or file error, 2 invalid config or
arguments, 3 numerical blowup during time stepping.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.fft as sfft

from . import io
from .decoherence import decay_scan
from .dynamics import (
    ClassicalEnsemble,
    BlowupError,
    DEFAULT_DT,
    DrivenPendulumParams,
    evolve_classical,
    evolve_quantum,
    lyapunov,
    transverse_scale,
)
from .grid import WaveFunction
from .scenario import (
    ConfigError,
    build_state,
    bundled_path,
    bundled_scenarios,
    grid_from_config,
    load_config,
    run_scenario,
    state_summary,
    write_json,
    _tag,
)
from .wigner import wigner

EXIT_ERROR, EXIT_CONFIG, EXIT_BLOWUP = 1, 2, 3


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _pair(text: str) -> tuple[float, float]:
    vals = _float_list(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    return vals[0], vals[1]


def _add_params(p: argparse.ArgumentParser) -> None:
    d = DrivenPendulumParams()
    p.add_argument("--m", type=float, default=d.m)
    p.add_argument("--kappa", type=float, default=d.kappa)
    p.add_argument("--l", type=float, default=d.l, help="drive amplitude")
    p.add_argument("--a-h", type=float, default=d.a_h, help="harmonic coefficient")


def _params(args) -> DrivenPendulumParams:
    return DrivenPendulumParams(args.m, args.kappa, args.l, args.a_h)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", type=Path, default=Path("."), help="directory for outputs")
    common.add_argument("--seed", type=int, default=None, help="RNG seed (default 0 or the config's)")
    common.add_argument("--threads", type=int, default=None,
                        help="FFT worker threads (default: $SUBPLANCK_THREADS or 1)")
    common.add_argument("--dt", type=float, default=None, help=f"time step (default 2*pi/2048 = {DEFAULT_DT:.6g})")
    common.add_argument("--snapshots", type=_float_list, default=None, help="comma-separated snapshot times")

    ap = argparse.ArgumentParser(prog="subplanck", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("state", parents=[common], help="build a state and write a PSIGRID1 file")
    p.add_argument("kind", choices=["gaussian", "cat", "compass", "sparse"])
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--dx", type=float, default=0.05)
    p.add_argument("--hbar", type=float, default=0.16)
    p.add_argument("--xi", type=float, default=0.4)
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--p0", type=float, default=0.0)
    p.add_argument("--L", type=float, default=4.0)
    p.add_argument("--P", type=float, default=4.0)
    p.add_argument("--n-packets", type=int, default=16)
    p.add_argument("--x-range", type=_pair, default=(-8.0, 8.0))
    p.add_argument("--p-range", type=_pair, default=(-4.0, 4.0))
    p.add_argument("-o", "--output", default="state.psi")

    p = sub.add_parser("wigner", parents=[common], help="Wigner function of a state file (WIGGRID1)")
    p.add_argument("state_file", type=Path)
    p.add_argument("-o", "--output", default="wigner.wig")

    p = sub.add_parser("evolve", parents=[common], help="quantum evolution of a state file")
    p.add_argument("state_file", type=Path)
    p.add_argument("--t-final", type=float, default=None)
    p.add_argument("--wigner", action="store_true", help="also write a WIGGRID1 file per snapshot")
    _add_params(p)

    p = sub.add_parser("classical", parents=[common], help="classical ensemble and Lyapunov exponent")
    p.add_argument("--n-particles", type=int, default=2000)
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--p0", type=float, default=0.0)
    p.add_argument("--sigma-x", type=float, default=0.4 / math.sqrt(2))
    p.add_argument("--sigma-p", type=float, default=0.16 / (0.4 * math.sqrt(2)))
    p.add_argument("--n-seeds", type=int, default=32)
    p.add_argument("--t-total", type=float, default=300.0, help="Lyapunov integration time")
    _add_params(p)

    p = sub.add_parser("scan", parents=[common], help="overlap decay under displacement (CSV)")
    p.add_argument("state_file", type=Path)
    p.add_argument("--direction", type=_pair, default=(0.0, 1.0))
    p.add_argument("--max", type=float, required=True)
    p.add_argument("--steps", type=int, default=128)
    p.add_argument("-o", "--output", default="scan.csv")

    p = sub.add_parser("report", parents=[common], help="structure report for state files (JSON)")
    p.add_argument("state_files", type=Path, nargs="+")
    p.add_argument("--lyapunov", type=float, default=None)
    p.add_argument("--delta-p0", type=float, default=None)
    p.add_argument("-o", "--output", default="report.json")

    p = sub.add_parser("run", parents=[common], help="run a scenario config (or a bundled scenario name)")
    p.add_argument("config", help=f"path to JSON, or one of: {', '.join(bundled_scenarios())}")
    return ap


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("SUBPLANCK_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise ConfigError(f"SUBPLANCK_THREADS={env!r} is not an integer")


def _cmd_state(args) -> None:
    rng = np.random.default_rng(0 if args.seed is None else args.seed)
    grid = grid_from_config({"n": args.n, "dx": args.dx, "hbar": args.hbar})
    st = {"kind": args.kind, "xi": args.xi}
    if args.kind in ("gaussian", "cat"):
        st.update(x0=args.x0, p0=args.p0)
    elif args.kind == "compass":
        st.update(L=args.L, P=args.P)
    else:
        st.update(n_packets=args.n_packets, x_range=list(args.x_range), p_range=list(args.p_range))
    psi, _ = build_state(st, grid, rng)
    io.write_psi(args.out_dir / args.output, psi)


def _cmd_wigner(args) -> None:
    io.write_wigner(args.out_dir / args.output, wigner(io.read_state(args.state_file)))


def _cmd_evolve(args) -> None:
    psi = io.read_state(args.state_file)
    if not isinstance(psi, WaveFunction):
        raise ConfigError("evolve needs a PSIGRID1 state")
    times = sorted(args.snapshots or [])
    if not times and args.t_final is None:
        raise ConfigError("give --snapshots and/or --t-final")
    dt = DEFAULT_DT if args.dt is None else args.dt
    t_final = max(times + ([args.t_final] if args.t_final is not None else []))
    times = times or [t_final]
    states = evolve_quantum(psi, _params(args), dt, t_final, times)
    files = []
    for t, s in zip(times, states):
        fp = args.out_dir / f"psi_t{_tag(t)}.psi"
        io.write_psi(fp, s)
        entry = {"t": t, "psi": fp.name, "sha256": io.sha256(fp)}
        if args.wigner:
            wp = args.out_dir / f"wigner_t{_tag(t)}.wig"
            io.write_wigner(wp, wigner(s))
            entry.update(wigner=wp.name, wigner_sha256=io.sha256(wp))
        files.append(entry)
    write_json(args.out_dir / "manifest.json", {"dt": dt, "snapshots": files})


def _cmd_classical(args) -> None:
    params = _params(args)
    rng = np.random.default_rng(0 if args.seed is None else args.seed)
    dt = DEFAULT_DT if args.dt is None else args.dt
    times = sorted(args.snapshots or [5.0, 10.0, 20.0, 30.0])
    ens = ClassicalEnsemble.from_gaussian(args.n_particles, args.x0, args.p0, args.sigma_x, args.sigma_p,
                                          rng, track_tangent=True)
    delta = math.sqrt(args.sigma_x * args.sigma_p)
    rows = []
    for t in times:
        ens = evolve_classical(ens, params, dt, t)
        rows.append({"t": t, "transverse_scale": transverse_scale(ens, delta),
                     "std_x": ens.spreads()[0], "std_p": ens.spreads()[1]})
    seeds = np.column_stack([rng.normal(args.x0, args.sigma_x, args.n_seeds),
                             rng.normal(args.p0, args.sigma_p, args.n_seeds)])
    res = lyapunov(params, seeds, args.t_total)
    write_json(args.out_dir / "classical.json", {
        "params": params.__dict__.copy(), "dt": dt, "delta": delta, "snapshots": rows,
        "lyapunov": {"rate": res.rate, "stderr": res.stderr,
                     "chaotic_rate": None if not res.chaotic.any() else res.chaotic_rate,
                     "chaotic_fraction": float(res.chaotic.mean())},
    })


def _cmd_scan(args) -> None:
    curve = decay_scan(io.read_state(args.state_file), args.direction, args.max, args.steps)
    io.write_curve_csv(args.out_dir / args.output, curve)


def _cmd_report(args) -> None:
    out = {}
    for fp in args.state_files:
        out[str(fp)] = state_summary(io.read_state(fp), args.lyapunov, args.delta_p0)
    write_json(args.out_dir / args.output, out)


def _cmd_run(args) -> None:
    path = Path(args.config)
    if not path.exists() and args.config in bundled_scenarios():
        path = bundled_path(args.config)
    cfg = load_config(path)
    run_scenario(cfg, args.out_dir, args.seed, args.dt, args.snapshots, base=path.parent)


_COMMANDS = {"state": _cmd_state, "wigner": _cmd_wigner, "evolve": _cmd_evolve, "classical": _cmd_classical,
             "scan": _cmd_scan, "report": _cmd_report, "run": _cmd_run}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        with sfft.set_workers(_threads(args)):
            _COMMANDS[args.verb](args)
    except ConfigError as exc:
        print(f"subplanck: config error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowupError as exc:
        print(f"subplanck: numerical blowup: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except (OSError, ValueError) as exc:
        print(f"subplanck: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())

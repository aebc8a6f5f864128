"""JSON scenario configs: validation with line-located errors and the runner
that writes grids, curves, reports and a checksummed manifest."""
from __future__ import annotations

import json
import json.decoder
import json.scanner
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Union

import jsonschema
import numpy as np

from . import io
from .decoherence import decay_scan, orthogonality_shift, sparse_overlap_prediction
from .dynamics import (
    ClassicalEnsemble,
    DrivenPendulumParams,
    DEFAULT_DT,
    evolve_classical,
    evolve_quantum,
    lyapunov,
    timescales,
    transverse_scale,
)
from .grid import DensityMatrix, Displacement, GridSpec, WaveFunction, momentum_moments
from .states import (
    CompassSpec,
    GaussianPacket,
    SparseSpec,
    make_cat,
    make_compass,
    make_gaussian,
    make_sparse,
    random_sparse_spec,
)
from .wigner import coherence_scale, ray_limit, structure_report, tile_area, wigner, _unit

__all__ = ["SCHEMA", "ConfigError", "load_config", "bundled_scenarios", "bundled_path",
           "build_state", "state_summary", "run_scenario", "compare_report", "expected_report"]

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_PAIR = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}


def _obj(props: dict, required=(), **extra) -> dict:
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False, **extra}


def _kind(name: str, props: dict, required=()) -> dict:
    return _obj({"kind": {"const": name}, **props}, ["kind", *required])


SCHEMA = _obj({
    "name": {"type": "string", "minLength": 1, "pattern": r"^[A-Za-z0-9_.-]+$"},
    "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    "grid": _obj({"n": {"type": "integer", "minimum": 16}, "dx": _POS, "hbar": _POS, "x_min": _NUM},
                 ["n", "dx", "hbar"]),
    "state": {"oneOf": [
        _kind("gaussian", {"x0": _NUM, "p0": _NUM, "xi": _POS}, ["xi"]),
        _kind("cat", {"x0": _NUM, "p0": _NUM, "xi": _POS}, ["x0", "xi"]),
        _kind("compass", {"L": _POS, "P": _POS, "xi": _POS}, ["L", "P", "xi"]),
        _kind("sparse", {
            "xi": _POS,
            "packets": {"type": "array", "minItems": 1,
                        "items": {"type": "array", "items": _NUM, "minItems": 4, "maxItems": 4}},
            "n_packets": {"type": "integer", "minimum": 1},
            "x_range": _PAIR, "p_range": _PAIR,
            "random_phases": {"type": "boolean"},
        }, ["xi"]),
        _kind("from-file", {"path": {"type": "string", "minLength": 1}}, ["path"]),
    ]},
    "dynamics": _obj({
        "params": _obj({"m": _POS, "kappa": {"type": "number", "minimum": 0}, "l": _NUM, "a_h": _NUM}),
        "dt": _POS,
        "snapshots": {"type": "array", "items": _NUM, "minItems": 1},
        "t_final": _NUM,
        "wigner_snapshots": {"type": "boolean"},
        "lyapunov": _obj({"n_seeds": {"type": "integer", "minimum": 2}, "x_range": _PAIR,
                          "p_range": _PAIR, "t_total": _POS, "renorm_interval": _POS},
                         ["n_seeds", "x_range", "p_range", "t_total"]),
        "classical": _obj({"n_particles": {"type": "integer", "minimum": 1}}, ["n_particles"]),
    }, ["snapshots"]),
    "scan": _obj({"direction": _PAIR, "max": _POS, "steps": {"type": "integer", "minimum": 16},
                  "threshold": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}},
                 ["direction", "max"]),
    "report": _obj({
        "structure": {"type": "boolean"},
        "coherence": {"type": "boolean"},
        "wigner": {"type": "boolean"},
        "tile": _obj({"window": _PAIR}, ["window"]),
        "timescales": {"type": "boolean"},
    }),
}, ["name", "grid", "state"])


class ConfigError(ValueError):
    """Invalid scenario config; messages carry ``file:line`` locations."""


# ---------------------------------------------------------------------------
# position-tracking JSON load


def _positioned_loads(text: str) -> tuple[Any, dict[int, int]]:
    # the pure-Python scanner calls these hooks with the index just past the
    # opening bracket, which gives every container a source offset
    where: dict[int, int] = {}
    dec = json.JSONDecoder()

    def parse_object(s_and_end, *args):
        obj, end = json.decoder.JSONObject(s_and_end, *args)
        where[id(obj)] = s_and_end[1] - 1
        return obj, end

    def parse_array(s_and_end, scan_once):
        arr, end = json.decoder.JSONArray(s_and_end, scan_once)
        where[id(arr)] = s_and_end[1] - 1
        return arr, end

    dec.parse_object = parse_object
    dec.parse_array = parse_array
    dec.memo = {}
    dec.scan_once = json.scanner.py_make_scanner(dec)
    return dec.decode(text), where


def _line(text: str, offset: int) -> int:
    return text.count("\n", 0, offset) + 1


def _error_offset(text: str, doc: Any, where: dict[int, int], err: jsonschema.ValidationError) -> int:
    node, pos = doc, where.get(id(doc), 0)
    for part in err.absolute_path:
        parent = node
        node = node[part]
        if id(node) in where:
            pos = where[id(node)]
        elif isinstance(parent, dict):
            m = re.compile(r'"%s"\s*:' % re.escape(str(part))).search(text, pos)
            pos = m.start() if m else pos
        # list scalars keep the list's own position
    if err.validator == "additionalProperties" and isinstance(node, dict):
        extra = re.search(r"'([^']+)' (?:was|were) unexpected", err.message)
        if extra:
            m = re.compile(r'"%s"\s*:' % re.escape(extra.group(1))).search(text, pos)
            pos = m.start() if m else pos
    return pos


def _expand(err: jsonschema.ValidationError) -> list[jsonschema.ValidationError]:
    # a tagged union fails as a whole; report the branch whose "kind" matched
    if err.validator != "oneOf" or not err.context:
        return [err]
    branches: dict[int, list] = {}
    for sub in err.context:
        branches.setdefault(sub.schema_path[0], []).append(sub)
    matched = [errs for errs in branches.values()
               if not any(e.validator == "const" and list(e.relative_path) == ["kind"] for e in errs)]
    if len(matched) == 1:
        return [leaf for e in matched[0] for leaf in _expand(e)]
    return [err]


def load_config(path: Union[str, Path]) -> dict:
    """Parse and validate a scenario file, raising :class:`ConfigError`."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        doc, where = _positioned_loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    errors = [leaf for e in jsonschema.Draft202012Validator(SCHEMA).iter_errors(doc) for leaf in _expand(e)]
    errors.sort(key=lambda e: _error_offset(text, doc, where, e))
    if errors:
        lines = []
        for e in errors:
            loc = "/".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"{path}:{_line(text, _error_offset(text, doc, where, e))}: {loc}: {e.message}")
        raise ConfigError("\n".join(lines))
    _semantic_checks(doc, path)
    return doc


def _semantic_checks(cfg: dict, path: Path) -> None:
    n = cfg["grid"]["n"]
    if n & (n - 1):
        raise ConfigError(f"{path}: grid/n: {n} is not a power of two")
    st = cfg["state"]
    if st["kind"] == "sparse":
        explicit = "packets" in st
        generated = "n_packets" in st
        if explicit == generated:
            raise ConfigError(f"{path}: state: give exactly one of 'packets' or 'n_packets'")
        if generated and not ("x_range" in st and "p_range" in st):
            raise ConfigError(f"{path}: state: 'n_packets' needs 'x_range' and 'p_range'")
    if st["kind"] == "from-file":
        fp = (path.parent / st["path"]) if not Path(st["path"]).is_absolute() else Path(st["path"])
        if not fp.is_file():
            raise ConfigError(f"{path}: state/path: file {st['path']!r} does not exist")


def bundled_scenarios() -> list[str]:
    root = resources.files("subplanck") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("subplanck") / "scenarios" / f"{name}.json"))


# ---------------------------------------------------------------------------
# building and summarizing states


def grid_from_config(g: dict) -> GridSpec:
    if "x_min" in g:
        return GridSpec(g["n"], g["x_min"], g["dx"], g["hbar"])
    return GridSpec.centered(g["n"], g["dx"], g["hbar"])


def build_state(st: dict, grid: Optional[GridSpec], rng: np.random.Generator,
                base: Path = Path(".")) -> tuple[Union[WaveFunction, DensityMatrix], Optional[object]]:
    """State described by ``st``; also returns the packet spec it came from, if any."""
    kind = st["kind"]
    if kind == "from-file":
        fp = Path(st["path"])
        return io.read_state(fp if fp.is_absolute() else base / fp), None
    if kind == "gaussian":
        gp = GaussianPacket(st.get("x0", 0.0), st.get("p0", 0.0), st["xi"])
        return make_gaussian(gp, grid), gp
    if kind == "cat":
        return make_cat(st["x0"], st["xi"], grid, st.get("p0", 0.0)), None
    if kind == "compass":
        c = CompassSpec(st["L"], st["P"], st["xi"])
        return make_compass(c, grid), c
    if "packets" in st:
        spec = SparseSpec(tuple((complex(a, b), x, p) for a, b, x, p in st["packets"]), st["xi"])
    else:
        spec = random_sparse_spec(st["n_packets"], st["xi"], grid.hbar, tuple(st["x_range"]),
                                  tuple(st["p_range"]), rng, random_phases=st.get("random_phases", False))
    return make_sparse(spec, grid), spec


def _coherence_delta(state, direction, threshold: float = math.exp(-1)) -> Optional[float]:
    if isinstance(state, WaveFunction):
        return coherence_scale(state, direction, threshold).delta
    u = _unit(direction)
    reach = ray_limit(state.grid, u)
    return decay_scan(state, u, reach, 512).first_crossing(threshold)


def state_summary(state, lyapunov_rate: Optional[float] = None, delta_p0: Optional[float] = None,
                  coherence: bool = True) -> dict:
    """Structure report plus 1/e coherence scales and predicted orthogonality shifts."""
    rep = structure_report(state, lyapunov_rate, delta_p0).to_dict()
    out = {"structure": rep,
           "predicted_orthogonality": {"delta_x": rep["delta_x_min"], "delta_p": orthogonality_shift(state)}}
    if coherence:
        out["coherence"] = {"delta_x": _coherence_delta(state, (1.0, 0.0)),
                            "delta_p": _coherence_delta(state, (0.0, 1.0))}
    return out


def _tag(t: float) -> str:
    return f"{t:g}".replace("-", "m")


# ---------------------------------------------------------------------------
# runner


@dataclass
class _Emitter:
    out_dir: Path
    entries: list

    def add(self, kind: str, path: Path, **extra) -> None:
        self.entries.append({"kind": kind, "path": path.name, "sha256": io.sha256(path), **extra})


def write_json(path: Path, obj: Any) -> None:
    # float repr is the shortest round-tripping decimal
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def run_scenario(cfg: dict, out_dir: Union[str, Path], seed: Optional[int] = None,
                 dt: Optional[float] = None, snapshots: Optional[list[float]] = None,
                 base: Path = Path(".")) -> dict:
    """Execute a validated config; returns the manifest (also written to disk)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.get("seed", 0) if seed is None else seed
    rng = np.random.default_rng(seed)
    grid = grid_from_config(cfg["grid"])
    state, spec = build_state(cfg["state"], grid, rng, base)
    grid = state.grid
    rep_cfg = cfg.get("report", {})
    emit = _Emitter(out, [])
    report: dict[str, Any] = {"name": cfg["name"], "seed": seed}

    if isinstance(state, WaveFunction):
        fp = out / "state.psi"
        io.write_psi(fp, state)
    else:
        fp = out / "state.rho"
        io.write_rho(fp, state)
    emit.add("state", fp)

    want_coh = rep_cfg.get("coherence", True)
    if rep_cfg.get("structure", True):
        report["initial"] = state_summary(state, coherence=want_coh)

    if isinstance(spec, SparseSpec):
        report["sparse"] = {"n_packets": len(spec.packets), "is_sparse": spec.is_sparse(grid.hbar),
                            "centers": spec.centers.tolist()}

    if rep_cfg.get("wigner", False):
        w = wigner(state)
        fp = out / "wigner.wig"
        io.write_wigner(fp, w)
        emit.add("wigner", fp)
        report["wigner"] = {"total": w.total(), "purity": w.purity(), "negative_volume": w.negative_volume()}

    if "tile" in rep_cfg:
        src = state if isinstance(state, WaveFunction) else wigner(state)
        tm = tile_area(src, tuple(rep_cfg["tile"]["window"]))
        report["tile"] = {"period_x": tm.period_x, "period_p": tm.period_p, "area": tm.area,
                          "predicted_area": structure_report(state).tile_area}
        if isinstance(spec, CompassSpec):
            hb = grid.hbar
            report["tile"]["predicted_area"] = (2 * math.pi * hb) ** 2 / (spec.L * spec.P)

    if "scan" in cfg:
        sc = cfg["scan"]
        thr = sc.get("threshold", math.exp(-1))
        curve = decay_scan(state, sc["direction"], sc["max"], sc.get("steps", 128))
        fp = out / "scan.csv"
        io.write_curve_csv(fp, curve)
        emit.add("curve", fp)
        scan_rep = {"threshold": thr, "crossing": curve.first_crossing(thr)}
        k = curve.first_minimum()
        if k is not None:
            scan_rep["first_minimum"] = {"s": float(curve.s[k]), "overlap_abs": float(curve.magnitude[k])}
        crossing = scan_rep["crossing"]
        if crossing is not None:
            after = curve.magnitude[curve.s > crossing]
            scan_rep["max_after_crossing"] = float(after.max()) if after.size else None
        if isinstance(spec, SparseSpec):
            pred = np.array([sparse_overlap_prediction(spec, Displacement(dx, dp), grid.hbar)
                             for dx, dp in curve.deltas])
            scan_rep["prediction_max_abs_error"] = float(np.max(np.abs(pred - curve.magnitude)))
            if crossing is not None:
                tail = curve.s > 3.0 * crossing
                if np.any(tail):
                    scan_rep["tail_mean_abs"] = float(curve.magnitude[tail].mean())
                    scan_rep["inverse_sqrt_n"] = 1.0 / math.sqrt(len(spec.packets))
        report["scan"] = scan_rep

    if "dynamics" in cfg:
        if not isinstance(state, WaveFunction):
            raise ValueError("dynamics needs a pure initial state")
        report["dynamics"] = _run_dynamics(cfg["dynamics"], state, spec, rep_cfg, rng, emit, dt, snapshots)

    fp = out / "report.json"
    write_json(fp, report)
    emit.add("report", fp)
    manifest = {"name": cfg["name"], "seed": seed, "files": emit.entries}
    if "dynamics" in report:
        manifest["snapshot_times"] = [s["t"] for s in report["dynamics"]["snapshots"]]
    write_json(out / "manifest.json", manifest)
    return manifest


def _run_dynamics(dyn: dict, psi0: WaveFunction, spec, rep_cfg: dict, rng: np.random.Generator,
                  emit: _Emitter, dt: Optional[float], snapshots: Optional[list[float]]) -> dict:
    params = DrivenPendulumParams(**dyn.get("params", {}))
    dt = dyn.get("dt", DEFAULT_DT) if dt is None else dt
    times = sorted(dyn["snapshots"] if snapshots is None else snapshots)
    t_final = max(dyn.get("t_final", times[-1]), times[-1])
    states = evolve_quantum(psi0, params, dt, t_final, times)
    out: dict[str, Any] = {"params": params.__dict__.copy(), "dt": dt}

    rate = None
    if "lyapunov" in dyn:
        ly = dyn["lyapunov"]
        seeds = np.column_stack([rng.uniform(*ly["x_range"], ly["n_seeds"]),
                                 rng.uniform(*ly["p_range"], ly["n_seeds"])])
        res = lyapunov(params, seeds, ly["t_total"], ly.get("renorm_interval", 1.0))
        rate = res.chaotic_rate if res.chaotic.any() else None
        out["lyapunov"] = {"rate": res.rate, "stderr": res.stderr, "chaotic_rate": rate,
                           "chaotic_fraction": float(res.chaotic.mean())}

    _, vp0 = momentum_moments(psi0)
    dp0 = math.sqrt(vp0)
    snaps = []
    for t, psi in zip(times, states):
        fp = emit.out_dir / f"psi_t{_tag(t)}.psi"
        io.write_psi(fp, psi)
        emit.add("snapshot", fp, t=t)
        entry: dict[str, Any] = {"t": t, "file": fp.name}
        if dyn.get("wigner_snapshots", False):
            wp = emit.out_dir / f"wigner_t{_tag(t)}.wig"
            io.write_wigner(wp, wigner(psi))
            emit.add("wigner", wp, t=t)
            entry["wigner_file"] = wp.name
        entry.update(state_summary(psi, rate, dp0, coherence=rep_cfg.get("coherence", True)))
        snaps.append(entry)
    out["snapshots"] = snaps

    if rep_cfg.get("timescales", False) and rate is not None:
        A = snaps[-1]["structure"]["A"]
        ts = timescales(rate, dp0, params, A, psi0.grid.hbar)
        out["timescales"] = {"t_hbar": ts.t_hbar, "t_r": ts.t_r, "chi": ts.chi, "delta_p0": dp0, "A": A}

    if "classical" in dyn:
        out["classical"] = _classical_run(psi0, spec, params, dyn["classical"]["n_particles"], times, dt, rng)
    return out


def _classical_run(psi0: WaveFunction, spec, params, n_particles: int, times, dt, rng) -> list[dict]:
    from .grid import position_moments

    mx, vx = position_moments(psi0)
    mp, vp = momentum_moments(psi0)
    sx, sp = math.sqrt(vx), math.sqrt(vp)
    ens = ClassicalEnsemble.from_gaussian(n_particles, mx, mp, sx, sp, rng, track_tangent=True)
    delta = math.sqrt(sx * sp)
    rows = []
    for t in times:
        ens = evolve_classical(ens, params, dt, t)
        (ax, ap), (bx, bp) = ens.means(), ens.spreads()
        rows.append({"t": t, "mean_x": ax, "mean_p": ap, "std_x": bx, "std_p": bp,
                     "transverse_scale": transverse_scale(ens, delta)})
    return rows


def _lookup(report: Any, dotted: str) -> Any:
    node = report
    for part in dotted.split("."):
        node = node[int(part)] if isinstance(node, list) else node[part]
    return node


def compare_report(report: dict, expected: dict) -> list[str]:
    """Mismatches between a run report and an expected-report document.

    Each check names a dotted path into the report and carries its own
    ``rel_tol`` and/or ``abs_tol``; a value passes if either tolerance holds.
    """
    problems = []
    for dotted, chk in sorted(expected["checks"].items()):
        try:
            got = _lookup(report, dotted)
        except (KeyError, IndexError, TypeError):
            problems.append(f"{dotted}: missing from report")
            continue
        want = chk["value"]
        if got is None or want is None:
            if got != want:
                problems.append(f"{dotted}: got {got!r}, expected {want!r}")
            continue
        err = abs(got - want)
        ok = err <= chk.get("abs_tol", 0.0) or err <= chk.get("rel_tol", 0.0) * abs(want)
        if not ok:
            problems.append(f"{dotted}: got {got!r}, expected {want!r} "
                            f"(rel_tol={chk.get('rel_tol')}, abs_tol={chk.get('abs_tol')})")
    return problems


def expected_report(name: str) -> dict:
    return json.loads((resources.files("subplanck") / "scenarios" / "expected" / f"{name}.json").read_text())

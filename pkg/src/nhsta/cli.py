"""Command-line front end.

Commands: ``simulate``, ``sweep``, ``phase-diagram``, ``calibrate``, ``presets list``.
Exit codes: 0 success, 2 config error, 3 numeric failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .dynamics import PHOTON, IntegratorConfig, TimeConvention, evolve, tracking_fidelity
from .errors import IntegrationError, ParameterError, PoleError
from .model import DiagonalSign, ErrorParams, Protocol, SystemParams
from .protocols import PresetNotFound, calibrate, get_preset, preset_registry
from .robustness import AxisSpec, SweepSpec, phase_diagram, sweep_1d, sweep_2d

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

UNITS_NOTE = "all frequencies in units of omega_d"
SIM_HEADER = "t,re_a,im_a,re_m,im_m,p0r,p1r,log_scale,tracking_fidelity"


class ConfigError(Exception):
    pass


def fmt(x: float) -> str:
    """Locale-independent 17-significant-digit rendering."""
    return format(float(x), ".17g")


def _strict(d, allowed: set[str], where: str) -> dict:
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object, got {type(d).__name__}")
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {sorted(extra)}")
    return d


def _names(cls) -> set[str]:
    return {f.name for f in fields(cls)}


@dataclass(frozen=True)
class AxisConfig:
    axis: str
    range: tuple[float, float]
    points: int

    def to_spec(self) -> AxisSpec:
        return AxisSpec(self.axis, self.range[0], self.range[1], self.points)


@dataclass(frozen=True)
class PhaseGridConfig:
    g_max: float = 2.0
    g_points: int = 200
    km_max: float = 3.0
    km_points: int = 200
    ep_points: int = 301


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams | None = None
    protocol: Protocol | None = None
    preset: str | None = None
    errors: ErrorParams = ErrorParams()
    integrator: IntegratorConfig = IntegratorConfig()
    time_convention: str = "raw"
    sweep_x: AxisConfig = AxisConfig("alpha", (-0.5, 0.5), 201)
    sweep_y: AxisConfig | None = None
    phase_grid: PhaseGridConfig = PhaseGridConfig()
    output_path: str | None = None
    output_format: str = "csv"

    @classmethod
    def parse(cls, d: dict) -> RunConfig:
        """Strictly parse a config document; a preset supplies defaults that ``params`` patches."""
        _strict(d, {"units", "preset", "params", "protocol", "errors", "integrator", "time_convention",
                    "sweep", "phase_diagram", "output"}, "config")
        try:
            preset = d.get("preset")
            params, protocol, integ = None, None, dict(d.get("integrator") or {})
            _strict(integ, _names(IntegratorConfig), "integrator")
            if preset is not None:
                pr = get_preset(preset)
                params, protocol = pr.params, pr.protocol
                integ = {"t_start": pr.time_span[0], "t_end": pr.time_span[1], **integ}
            if "params" in d:
                raw = _strict(d["params"], _names(SystemParams), "params")
                params = params.replace(**raw) if params is not None else SystemParams(**raw)
            if d.get("protocol") is not None:
                protocol = Protocol(d["protocol"])
            errors = ErrorParams(**_strict(d.get("errors", {}), {"alpha", "eta"}, "errors"))
            conv = d.get("time_convention", "raw")
            if conv not in ("raw", "period", "both"):
                raise ConfigError(f"time_convention must be raw, period or both, got {conv!r}")

            sweep = _strict(d.get("sweep", {}), {"x", "y"}, "sweep")
            sx = cls._axis(sweep["x"], "sweep.x") if "x" in sweep else cls.sweep_x
            sy = cls._axis(sweep["y"], "sweep.y") if sweep.get("y") is not None else None
            grid = PhaseGridConfig(**_strict(d.get("phase_diagram", {}), _names(PhaseGridConfig),
                                             "phase_diagram"))
            out = _strict(d.get("output", {}), {"path", "format"}, "output")
            fmt_ = out.get("format", "csv")
            if fmt_ not in ("csv", "json"):
                raise ConfigError(f"output.format must be csv or json, got {fmt_!r}")
            return cls(params, protocol, preset, errors, IntegratorConfig(**integ), conv, sx, sy, grid,
                       out.get("path"), fmt_)
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc

    @staticmethod
    def _axis(d, where) -> AxisConfig:
        _strict(d, {"axis", "range", "points"}, where)
        rng = d["range"]
        if not (isinstance(rng, list) and len(rng) == 2):
            raise ConfigError(f"{where}.range must be [lo, hi]")
        ax = AxisConfig(d["axis"], (float(rng[0]), float(rng[1])), d["points"])
        ax.to_spec()
        return ax

    def emit(self) -> dict:
        d = {"units": UNITS_NOTE}
        if self.preset is not None:
            d["preset"] = self.preset
        if self.params is not None:
            d["params"] = self.params.to_dict()
        if self.protocol is not None:
            d["protocol"] = self.protocol.value
        d["errors"] = asdict(self.errors)
        d["integrator"] = asdict(self.integrator)
        d["time_convention"] = self.time_convention
        sweep = {"x": {"axis": self.sweep_x.axis, "range": list(self.sweep_x.range), "points": self.sweep_x.points}}
        if self.sweep_y is not None:
            sweep["y"] = {"axis": self.sweep_y.axis, "range": list(self.sweep_y.range),
                          "points": self.sweep_y.points}
        d["sweep"] = sweep
        d["phase_diagram"] = asdict(self.phase_grid)
        d["output"] = {"path": self.output_path, "format": self.output_format}
        return d

    def require_system(self) -> tuple[SystemParams, Protocol]:
        if self.params is None or self.protocol is None:
            raise ConfigError("need a preset or both params and protocol")
        return self.params, self.protocol


def load_config(args) -> RunConfig:
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON ({exc})") from exc
    if getattr(args, "preset", None):
        doc["preset"] = args.preset
    if getattr(args, "diagonal_sign", None):
        doc.setdefault("params", {})["diagonal_sign"] = args.diagonal_sign
    if getattr(args, "time_convention", None):
        doc["time_convention"] = args.time_convention
    out = dict(doc.get("output") or {})
    if args.out:
        out["path"] = args.out
    if args.format:
        out["format"] = args.format
    doc["output"] = out
    return RunConfig.parse(doc)


def _open_out(path: str | None):
    if path is None:
        return _Stdout()
    return open(path, "w", encoding="utf-8", newline="\n")


class _Stdout:
    def __enter__(self):
        return sys.stdout

    def __exit__(self, *exc):
        sys.stdout.flush()


def _suffixed(path: str, tag: str) -> str:
    p = Path(path)
    return str(p.with_name(f"{p.stem}.{tag}{p.suffix}"))


def _json_num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _write_trajectory(cfg: RunConfig, path, conv: TimeConvention):
    p, proto = cfg.require_system()
    traj = evolve(p, proto, cfg.errors, PHOTON, cfg.integrator.scaled(conv))
    fid = tracking_fidelity(p, proto, traj) if p.g_m > 0 else np.full(traj.times.size, math.nan)
    cols = [traj.times, traj.states[:, 0].real, traj.states[:, 0].imag, traj.states[:, 1].real,
            traj.states[:, 1].imag, traj.p0r, traj.p1r, traj.log_scale, fid]
    with _open_out(path) as fh:
        if cfg.output_format == "csv":
            fh.write(SIM_HEADER + "\n")
            for row in zip(*cols):
                fh.write(",".join(fmt(v) for v in row) + "\n")
        else:
            doc = {"time_convention": conv.value, "columns": SIM_HEADER.split(","),
                   "rows": [[_json_num(v) for v in row] for row in zip(*cols)]}
            fh.write(json.dumps(doc) + "\n")


def cmd_simulate(cfg: RunConfig, jobs) -> int:
    cfg.require_system()
    if cfg.time_convention == "both":
        if cfg.output_path is None:
            raise ConfigError("--time-convention both needs --out (one file per convention)")
        for conv in TimeConvention:
            _write_trajectory(cfg, _suffixed(cfg.output_path, conv.value), conv)
    else:
        _write_trajectory(cfg, cfg.output_path, TimeConvention(cfg.time_convention))
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, jobs) -> int:
    p, proto = cfg.require_system()
    if cfg.time_convention == "both":
        raise ConfigError("sweeps take a single time convention")
    spec = SweepSpec(cfg.sweep_x.to_spec(), p, proto, cfg.integrator.scaled(TimeConvention(cfg.time_convention)),
                     None if cfg.sweep_y is None else cfg.sweep_y.to_spec(), cfg.errors)
    grid = sweep_2d(spec, jobs) if spec.y is not None else sweep_1d(spec, jobs)
    with _open_out(cfg.output_path) as fh:
        if cfg.output_format == "csv":
            fh.write("x,probability\n" if spec.y is None else f"{spec.x.axis.value},{spec.y.axis.value},probability\n")
            for row in grid.rows():
                fh.write(",".join(fmt(v) for v in row) + "\n")
        else:
            doc = {"x_axis": spec.x.axis.value, "x": [float(v) for v in grid.x_values],
                   "y_axis": None if spec.y is None else spec.y.axis.value,
                   "y": [float(v) for v in grid.y_values],
                   "values": [_json_num(v) for v in grid.values.ravel()],
                   "failures": [[k, m] for k, m in grid.failures]}
            fh.write(json.dumps(doc) + "\n")
    if cfg.output_path is not None:
        with open(cfg.output_path + ".errors", "w", encoding="utf-8", newline="\n") as fh:
            for k, msg in grid.failures:
                fh.write(f"{k}\t{msg}\n")
    for k, msg in grid.failures:
        print(f"cell {k} failed: {msg}", file=sys.stderr)
    return EXIT_OK


def cmd_phase_diagram(cfg: RunConfig, jobs) -> int:
    if cfg.output_path is None:
        raise ConfigError("phase-diagram needs --out (a grid file and an EP-line file are written)")
    g = cfg.phase_grid
    pd = phase_diagram(g.g_max, g.g_points, g.km_max, g.km_points, g.ep_points)
    ep_path = _suffixed(cfg.output_path, "ep")
    with open(cfg.output_path, "w", encoding="utf-8", newline="\n") as fh:
        if cfg.output_format == "csv":
            fh.write("g_over_kc,km_over_kc,symmetry_code,stability_code\n")
            for i, gv in enumerate(pd.g_over_kc):
                for j, km in enumerate(pd.km_over_kc):
                    fh.write(f"{fmt(gv)},{fmt(km)},{pd.symmetry[i, j]},{pd.stability[i, j]}\n")
        else:
            fh.write(json.dumps({"g_over_kc": pd.g_over_kc.tolist(), "km_over_kc": pd.km_over_kc.tolist(),
                                 "symmetry_code": pd.symmetry.tolist(),
                                 "stability_code": pd.stability.tolist()}) + "\n")
    with open(ep_path, "w", encoding="utf-8", newline="\n") as fh:
        if cfg.output_format == "csv":
            fh.write("km_over_kc,g_over_kc\n")
            for km, gv in zip(pd.ep_km, pd.ep_g):
                fh.write(f"{fmt(km)},{fmt(gv)}\n")
        else:
            fh.write(json.dumps({"km_over_kc": pd.ep_km.tolist(), "g_over_kc": pd.ep_g.tolist()}) + "\n")
    return EXIT_OK


def cmd_calibrate(cfg: RunConfig, jobs) -> int:
    report = calibrate(cfg.integrator)
    with _open_out(cfg.output_path) as fh:
        fh.write(json.dumps(report, indent=2, allow_nan=False) + "\n")
    return EXIT_OK


def cmd_presets_list(cfg: RunConfig, jobs) -> int:
    presets = preset_registry()
    with _open_out(cfg.output_path) as fh:
        if cfg.output_format == "json":
            fh.write(json.dumps([pr.to_config() for pr in presets], indent=2) + "\n")
            return EXIT_OK
        fh.write("name,protocol,g_m,kappa_c,kappa_m,t_start,t_end,expected\n")
        for pr in presets:
            exp = "" if pr.expected is None else (
                (">=" if pr.expected.kind == "above" else "~") + fmt(pr.expected.value))
            fh.write(f"{pr.name},{pr.protocol.value},{fmt(pr.params.g_m)},{fmt(pr.params.kappa_c)},"
                     f"{fmt(pr.params.kappa_m)},{fmt(pr.time_span[0])},{fmt(pr.time_span[1])},{exp}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--jobs", type=int, help="sweep worker count (NHS_NUM_THREADS overrides)")

    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--preset")
    run.add_argument("--time-convention", choices=["raw", "period", "both"])
    run.add_argument("--diagonal-sign", choices=[s.value for s in DiagonalSign])

    ap = argparse.ArgumentParser(prog="nhsta", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common, run], help="write one trajectory").set_defaults(fn=cmd_simulate)
    sub.add_parser("sweep", parents=[common, run], help="1D/2D transfer-probability sweep").set_defaults(fn=cmd_sweep)
    sub.add_parser("phase-diagram", parents=[common], help="phase codes and EP line").set_defaults(
        fn=cmd_phase_diagram)
    sub.add_parser("calibrate", parents=[common], help="convention calibration report").set_defaults(
        fn=cmd_calibrate)
    presets = sub.add_parser("presets", help="preset registry")
    psub = presets.add_subparsers(dest="action", required=True)
    psub.add_parser("list", parents=[common]).set_defaults(fn=cmd_presets_list)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = load_config(args)
        return args.fn(cfg, args.jobs)
    except (ConfigError, ParameterError, PresetNotFound) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, PoleError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Named experiment presets, preset runs and the time/sign convention calibration."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    PHOTON,
    IntegratorConfig,
    TimeConvention,
    Trajectory,
    evolve,
    tracking_fidelity,
)
from .errors import ParameterError
from .model import NO_ERROR, DiagonalSign, Protocol, SystemParams

_FREQS = dict(omega_c=85.0, omega_m=35.0, epsilon_m=50.0, omega_d=1.0)


class PresetNotFound(KeyError):
    pass


@dataclass(frozen=True)
class Target:
    """Reported endpoint magnon population.

    ``kind == "approx"``: value within ``tolerance``; ``kind == "above"``: at
    least ``value``.
    """

    value: float
    kind: str = "approx"
    tolerance: float = 0.02
    source: str = ""

    def deviation(self, p1r: float) -> float:
        if self.kind == "above":
            return max(0.0, self.value - p1r)
        return abs(p1r - self.value)

    def met(self, p1r: float) -> bool:
        return self.deviation(p1r) <= (0.0 if self.kind == "above" else self.tolerance)

    def to_dict(self) -> dict:
        return {"value": self.value, "kind": self.kind, "tolerance": self.tolerance, "source": self.source}


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    params: SystemParams
    protocol: Protocol
    time_span: tuple[float, float] = (0.0, 2.0)
    expected: Target | None = None

    def integrator(self, base: IntegratorConfig = IntegratorConfig()) -> IntegratorConfig:
        return IntegratorConfig(self.time_span[0], self.time_span[1], base.sample_count,
                                base.rel_tol, base.abs_tol, base.max_step)

    def with_overrides(self, **changes) -> ExperimentPreset:
        """Copy with ``SystemParams`` fields patched; the registry entry is untouched."""
        unknown = set(changes) - set(SystemParams.__dataclass_fields__)
        if unknown:
            raise ParameterError(f"unknown override field(s): {sorted(unknown)}")
        return ExperimentPreset(self.name, self.params.replace(**changes), self.protocol,
                                self.time_span, self.expected)

    def to_config(self) -> dict:
        """Serialize into the run-config layout read by the command line."""
        return {
            "preset": self.name,
            "params": self.params.to_dict(),
            "protocol": self.protocol.value,
            "integrator": {"t_start": self.time_span[0], "t_end": self.time_span[1]},
            "expected": None if self.expected is None else self.expected.to_dict(),
        }

    @classmethod
    def from_config(cls, d: dict) -> ExperimentPreset:
        exp = d.get("expected")
        span = d.get("integrator", {})
        return cls(
            name=d["preset"],
            params=SystemParams(**d["params"]),
            protocol=Protocol(d["protocol"]),
            time_span=(float(span.get("t_start", 0.0)), float(span.get("t_end", 2.0))),
            expected=None if exp is None else Target(**exp),
        )


def _nhs(tag: str, g: float, expected: Target | None = None) -> ExperimentPreset:
    return ExperimentPreset(f"NHS-{tag}", SystemParams(g_m=g, **_FREQS), Protocol.NHS, expected=expected)


def _cd(tag: str, kc: float, km: float, expected: Target | None = None) -> ExperimentPreset:
    return ExperimentPreset(f"CD-{tag}", SystemParams(g_m=1.0, kappa_c=kc, kappa_m=km, **_FREQS),
                            Protocol.CD, expected=expected)


_REGISTRY: tuple[ExperimentPreset, ...] = (
    _nhs("a", 0.1, Target(0.976, source="NHS population trace, panel (a), endpoint")),
    _nhs("b", 0.3),
    _nhs("c", 0.6),
    _nhs("d", 1.0, Target(0.99, source="NHS population trace, panel (d), endpoint")),
    _cd("a", 1.0, 0.3, Target(0.984, source="CD population trace, panel (a), endpoint")),
    _cd("b", 1.0, 0.6),
    _cd("c", 1.0, 1.0),
    _cd("d", 2.0, 2.0, Target(0.999, kind="above", tolerance=0.0,
                              source="CD population trace, panel (d), endpoint lower bound")),
)


def preset_registry() -> list[ExperimentPreset]:
    return list(_REGISTRY)


def get_preset(name: str) -> ExperimentPreset:
    for p in _REGISTRY:
        if p.name == name:
            return p
    raise PresetNotFound(f"no preset named {name!r}; known: {', '.join(p.name for p in _REGISTRY)}")


@dataclass
class PresetSummary:
    name: str
    protocol: str
    diagonal_sign: str
    endpoints: dict[str, dict[str, float]] = field(default_factory=dict)
    min_tracking_fidelity: float = math.nan

    def to_dict(self) -> dict:
        return {"name": self.name, "protocol": self.protocol, "diagonal_sign": self.diagonal_sign,
                "endpoints": self.endpoints, "min_tracking_fidelity": self.min_tracking_fidelity}


def run_preset(name: str, cfg: IntegratorConfig = IntegratorConfig(),
               time_convention: TimeConvention = TimeConvention.RAW,
               diagonal_sign: DiagonalSign | None = None, **overrides) -> tuple[Trajectory, PresetSummary]:
    """Run a preset from a pure photon.

    The returned trajectory uses ``time_convention``; the summary carries the
    endpoint populations under both conventions and the minimum tracking
    fidelity of the returned trajectory.
    """
    preset = get_preset(name)
    if diagonal_sign is not None:
        overrides["diagonal_sign"] = DiagonalSign(diagonal_sign)
    if overrides:
        preset = preset.with_overrides(**overrides)
    base = preset.integrator(cfg)
    summary = PresetSummary(preset.name, preset.protocol.value, preset.params.diagonal_sign.value)
    traj = None
    for conv in TimeConvention:
        tr = evolve(preset.params, preset.protocol, NO_ERROR, PHOTON, base.scaled(conv))
        p0, p1 = tr.final_populations
        summary.endpoints[conv.value] = {"t_end": float(tr.times[-1]), "p0r": p0, "p1r": p1}
        if conv is TimeConvention(time_convention):
            traj = tr
    if preset.params.g_m > 0:
        traj.tracking_fidelity = tracking_fidelity(preset.params, preset.protocol, traj)
        finite = traj.tracking_fidelity[np.isfinite(traj.tracking_fidelity)]
        summary.min_tracking_fidelity = float(finite.min()) if finite.size else math.nan
    return traj, summary


def _endpoint(preset: ExperimentPreset, conv: TimeConvention, sign: DiagonalSign,
              cfg: IntegratorConfig) -> dict:
    p = preset.params.replace(diagonal_sign=sign)
    entry = {"preset": preset.name, "protocol": preset.protocol.value,
             "time_convention": conv.value, "diagonal_sign": sign.value}
    run_cfg = preset.integrator(IntegratorConfig(sample_count=2, rel_tol=cfg.rel_tol,
                                                 abs_tol=cfg.abs_tol, max_step=cfg.max_step))
    try:
        p1 = evolve(p, preset.protocol, NO_ERROR, PHOTON, run_cfg.scaled(conv)).final_populations[1]
    except (ArithmeticError, RuntimeError) as exc:
        entry.update(status="diverged", message=str(exc), p1r=None, target=None, deviation=None)
        return entry
    entry.update(status="ok", p1r=p1)
    if preset.expected is not None:
        entry.update(target=preset.expected.to_dict(), deviation=preset.expected.deviation(p1),
                     match=preset.expected.met(p1))
    else:
        entry.update(target=None, deviation=None)
    return entry


def _score(entries: list[dict]) -> dict:
    targeted = [e for e in entries if e["target"] is not None or
                (e["status"] != "ok" and get_preset(e["preset"]).expected is not None)]
    devs = [e["deviation"] if e["status"] == "ok" else math.inf for e in targeted]
    worst = max(devs) if devs else math.inf
    return {"max_deviation": worst if math.isfinite(worst) else None,
            "all_within_tolerance": bool(targeted) and all(e.get("match", False) for e in targeted)}


def calibrate(cfg: IntegratorConfig = IntegratorConfig()) -> dict:
    """Run every preset under each time and diagonal-sign convention.

    The report lists endpoint populations against the reported values with
    absolute deviations, the best single convention pair for all presets,
    and the best pair chosen separately per protocol. Never raises on a
    diverging run; such entries carry ``status == "diverged"``.
    """
    presets = preset_registry()
    pairs = list(itertools.product(TimeConvention, DiagonalSign))
    entries = [_endpoint(pr, conv, sign, cfg) for pr in presets for conv, sign in pairs]

    def pick(rows):
        return [e for e in entries if (e["time_convention"], e["diagonal_sign"]) == rows]

    pair_scores = []
    for conv, sign in pairs:
        s = _score(pick((conv.value, sign.value)))
        pair_scores.append({"time_convention": conv.value, "diagonal_sign": sign.value, **s})

    def best_of(scores):
        ranked = sorted(scores, key=lambda s: (s["max_deviation"] is None, s["max_deviation"] or 0.0))
        return ranked[0]

    best = best_of(pair_scores)

    by_protocol = {}
    for proto in (Protocol.NHS, Protocol.CD):
        scores = []
        for conv, sign in pairs:
            rows = [e for e in pick((conv.value, sign.value)) if e["protocol"] == proto.value]
            scores.append({"time_convention": conv.value, "diagonal_sign": sign.value, **_score(rows)})
        by_protocol[proto.value] = best_of(scores)

    nhs_a = [e for e in entries if e["preset"] == "NHS-a" and e["status"] == "ok"]
    nhs_a_ok = [e for e in nhs_a if abs(e["p1r"] - 0.976) <= 0.05]

    flags = []
    if not nhs_a_ok:
        flags.append("no convention match")
    if not best["all_within_tolerance"]:
        flags.append("no single convention pair matches every reported value")

    return {
        "units": "all frequencies in units of omega_d",
        "entries": entries,
        "pairs": pair_scores,
        "best_pair": best,
        "best_by_protocol": by_protocol,
        "per_protocol_match": all(v["all_within_tolerance"] for v in by_protocol.values()),
        "nhs_a_within_0.05": [{"time_convention": e["time_convention"], "diagonal_sign": e["diagonal_sign"],
                               "p1r": e["p1r"]} for e in nhs_a_ok],
        "flags": flags,
        "notes": [
            "time conventions: raw integrates t in [0, 2]; period integrates 2*pi*t",
            "diagonal signs: as-printed (+i kappa_c, -i kappa_m), loss-loss (-i, -i), loss-gain (-i, +i)",
            "supermode_frequencies centres the pair at omega_1 - i(kappa_c - kappa_m)/2, which is the "
            "trace of the loss-gain matrix; the as-printed matrix has trace/2 shifted by +i(kappa_c - kappa_m)/2",
            "CD-c sits on the exceptional point at t = 0 with zero detuning, so the counterdiabatic "
            "coupling has a pole at the start time under as-printed and loss-gain signs",
        ],
    }

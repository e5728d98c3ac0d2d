"""Parallel parameter sweeps of the transfer probability and the phase map."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .dynamics import IntegratorConfig, transition_probability
from .errors import ParameterError
from .model import ErrorParams, Protocol, SystemParams
from .spectra import classify_phase

THREADS_ENV = "NHS_NUM_THREADS"


class Axis(str, Enum):
    ALPHA = "alpha"
    ETA = "eta"
    G_OVER_KC = "g_over_kc"
    KM_OVER_KC = "km_over_kc"


@dataclass(frozen=True)
class AxisSpec:
    axis: Axis
    lo: float
    hi: float
    points: int

    def __post_init__(self):
        object.__setattr__(self, "axis", Axis(self.axis))
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ParameterError(f"{self.axis.value} range must be finite")
        if isinstance(self.points, bool) or int(self.points) != self.points:
            raise ParameterError(f"{self.axis.value} points must be an integer")
        object.__setattr__(self, "points", int(self.points))
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        # a degenerate [x, x] range evaluates the single point x
        if self.lo == self.hi:
            if self.points != 1:
                raise ParameterError(f"{self.axis.value}: a zero-width range takes exactly 1 point")
        elif not (self.lo < self.hi and self.points >= 2):
            raise ParameterError(f"{self.axis.value}: need lo < hi and points >= 2, "
                                 f"got [{self.lo}, {self.hi}] with {self.points}")

    @property
    def values(self) -> np.ndarray:
        if self.points == 1:
            return np.array([self.lo])
        return np.linspace(self.lo, self.hi, self.points)


@dataclass(frozen=True)
class SweepSpec:
    x: AxisSpec
    base: SystemParams
    protocol: Protocol
    integrator: IntegratorConfig = IntegratorConfig()
    y: AxisSpec | None = None
    errors: ErrorParams = ErrorParams()

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        if self.y is not None and self.y.axis == self.x.axis:
            raise ParameterError("the two sweep axes must differ")
        uses_kc = {Axis.G_OVER_KC, Axis.KM_OVER_KC} & {a.axis for a in (self.x, self.y) if a is not None}
        if uses_kc and not self.base.kappa_c > 0:
            raise ParameterError("ratio axes need kappa_c > 0 as the unit")


@dataclass
class SweepGrid:
    """Sweep result. 2D ``values[i, j]`` belongs to ``(x_values[i], y_values[j])``.

    Failed cells hold NaN and are listed in ``failures`` as ``(flat index, message)``.
    """

    x_values: np.ndarray
    y_values: np.ndarray
    values: np.ndarray
    failures: list[tuple[int, str]] = field(default_factory=list)

    def rows(self):
        """Yield ``(x, y, value)`` (or ``(x, value)`` for 1D) in row-major order."""
        if self.values.ndim == 1:
            for x, v in zip(self.x_values, self.values):
                yield float(x), float(v)
        else:
            for i, x in enumerate(self.x_values):
                for j, y in enumerate(self.y_values):
                    yield float(x), float(y), float(self.values[i, j])


def worker_count(jobs: int | None = None) -> int:
    """Pool width: ``NHS_NUM_THREADS`` if set, else ``jobs``, else the core count."""
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            jobs = int(env)
        except ValueError:
            raise ParameterError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    if jobs is None:
        jobs = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1
    if jobs < 1:
        raise ParameterError(f"worker count must be >= 1, got {jobs}")
    return jobs


def _apply(spec: SweepSpec, coords: dict[Axis, float]) -> tuple[SystemParams, ErrorParams]:
    p, err = spec.base, spec.errors
    for axis, v in coords.items():
        if axis is Axis.ALPHA:
            err = ErrorParams(v, err.eta)
        elif axis is Axis.ETA:
            err = ErrorParams(err.alpha, v)
        elif axis is Axis.G_OVER_KC:
            p = p.replace(g_m=v * spec.base.kappa_c)
        else:
            p = p.replace(kappa_m=v * spec.base.kappa_c)
    return p, err


def _cell(spec: SweepSpec, coords: dict[Axis, float]) -> tuple[float, str | None]:
    try:
        p, err = _apply(spec, coords)
        value = transition_probability(p, spec.protocol, err, spec.integrator)
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        return math.nan, f"{type(exc).__name__}: {exc}"
    if not 0.0 <= value <= 1.0:
        return math.nan, f"probability out of range: {value!r}"
    return value, None


def _run(spec: SweepSpec, cells: list[dict[Axis, float]], jobs: int | None):
    width = worker_count(jobs)
    if width == 1:
        results = [_cell(spec, c) for c in cells]
    else:
        # the integrator releases the GIL, so threads run in parallel
        with ThreadPoolExecutor(max_workers=width) as pool:
            results = list(pool.map(lambda c: _cell(spec, c), cells))
    values = np.array([v for v, _ in results])
    failures = [(k, msg) for k, (_, msg) in enumerate(results) if msg is not None]
    return values, failures


def sweep_1d(spec: SweepSpec, jobs: int | None = None) -> SweepGrid:
    xs = spec.x.values
    values, failures = _run(spec, [{spec.x.axis: float(x)} for x in xs], jobs)
    return SweepGrid(xs, np.empty(0), values, failures)


def sweep_2d(spec: SweepSpec, jobs: int | None = None) -> SweepGrid:
    if spec.y is None:
        raise ParameterError("2D sweep needs a y axis")
    xs, ys = spec.x.values, spec.y.values
    cells = [{spec.x.axis: float(x), spec.y.axis: float(y)} for x in xs for y in ys]
    values, failures = _run(spec, cells, jobs)
    return SweepGrid(xs, ys, values.reshape(xs.size, ys.size), failures)


def total_variation(values) -> float:
    """Sum of absolute differences between neighbouring grid values."""
    v = np.asarray(values, dtype=np.float64)
    return float(np.sum(np.abs(np.diff(v))))


@dataclass
class PhaseDiagram:
    """Phase codes on a ``(g/kappa_c, kappa_m/kappa_c)`` grid, indexed ``[i_g, j_km]``."""

    g_over_kc: np.ndarray
    km_over_kc: np.ndarray
    symmetry: np.ndarray
    stability: np.ndarray
    ep_km: np.ndarray
    ep_g: np.ndarray

    def region_counts(self) -> dict[int, int]:
        from .spectra import PhasePoint, Stability, Symmetry
        sym_of = {s.code: s for s in Symmetry}
        stab_of = {s.code: s for s in Stability}
        counts = {1: 0, 2: 0, 3: 0, 4: 0}
        for a, b in zip(self.symmetry.ravel(), self.stability.ravel()):
            region = PhasePoint(sym_of[int(a)], stab_of[int(b)]).region
            if region is not None:
                counts[region] += 1
        return counts


def ep_locus(km_over_kc) -> np.ndarray:
    """Exceptional-point line ``g/kappa_c = (1 + kappa_m/kappa_c) / 2``."""
    return 0.5 * (1.0 + np.asarray(km_over_kc, dtype=np.float64))


def phase_diagram(g_max: float = 2.0, g_points: int = 200, km_max: float = 3.0,
                  km_points: int = 200, ep_points: int = 301) -> PhaseDiagram:
    """Classify every cell of ``g/kappa_c in (0, g_max]`` by ``kappa_m/kappa_c in [0, km_max]``.

    The ``g`` axis excludes 0 (``g_max * k / g_points``, k = 1..g_points).
    Rates are expressed with ``kappa_c = 1``.
    """
    if not (g_max > 0 and km_max > 0 and g_points >= 1 and km_points >= 2 and ep_points >= 2):
        raise ParameterError("phase grid needs positive extents and enough points")
    gs = g_max * np.arange(1, g_points + 1) / g_points
    kms = np.linspace(0.0, km_max, km_points)
    sym = np.empty((gs.size, kms.size), dtype=np.int64)
    stab = np.empty_like(sym)
    for i, g in enumerate(gs):
        for j, km in enumerate(kms):
            pt = classify_phase(float(g), 1.0, float(km))
            sym[i, j] = pt.symmetry.code
            stab[i, j] = pt.stability.code
    ep_km = np.linspace(0.0, km_max, ep_points)
    return PhaseDiagram(gs, kms, sym, stab, ep_km, ep_locus(ep_km))

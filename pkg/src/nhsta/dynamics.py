"""Time evolution of the two-mode amplitudes and adiabatic-tracking diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels
from .errors import IntegrationError, ParameterError
from .model import NO_ERROR, ErrorParams, Protocol, SystemParams, build_hamiltonian
from .spectra import eigensystem

PHOTON = np.array([1.0 + 0j, 0j])

_STATUS_MESSAGES = {
    _kernels.STEP_UNDERFLOW: "step size underflow",
    _kernels.NONFINITE_STATE: "non-finite state",
    _kernels.NONFINITE_HAMILTONIAN: "non-finite Hamiltonian (pole of the control field)",
    _kernels.TOO_MANY_STEPS: "step budget exhausted",
}


class TimeConvention(str, Enum):
    """How a figure time axis maps onto integration time.

    ``raw``: axis value is ``omega_d t``. ``period``: axis value counts drive
    periods, so the integration time is ``2 pi`` times larger.
    """

    RAW = "raw"
    PERIOD = "period"

    @property
    def factor(self) -> float:
        return 1.0 if self is TimeConvention.RAW else 2.0 * math.pi


@dataclass(frozen=True)
class IntegratorConfig:
    t_start: float = 0.0
    t_end: float = 2.0
    sample_count: int = 1001
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 1e-2

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.max_step > 0):
            raise ParameterError("tolerances and max_step must be > 0")
        if not self.t_end > self.t_start:
            raise ParameterError(f"t_end must exceed t_start ({self.t_start} >= {self.t_end})")
        if isinstance(self.sample_count, bool) or int(self.sample_count) != self.sample_count or self.sample_count < 2:
            raise ParameterError(f"sample_count must be an integer >= 2, got {self.sample_count!r}")
        object.__setattr__(self, "sample_count", int(self.sample_count))

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.sample_count)

    def scaled(self, convention: TimeConvention) -> IntegratorConfig:
        f = TimeConvention(convention).factor
        return IntegratorConfig(self.t_start * f, self.t_end * f, self.sample_count,
                                self.rel_tol, self.abs_tol, self.max_step)


@dataclass
class Trajectory:
    """Sampled solution. ``states[k] * exp(log_scale[k])`` is the true amplitude."""

    times: np.ndarray
    states: np.ndarray
    log_scale: np.ndarray
    p0r: np.ndarray = field(init=False)
    p1r: np.ndarray = field(init=False)
    tracking_fidelity: np.ndarray | None = None

    def __post_init__(self):
        self.p0r, self.p1r = relative_populations(self.states.T)

    @property
    def final_populations(self) -> tuple[float, float]:
        return float(self.p0r[-1]), float(self.p1r[-1])


def relative_populations(s):
    """``(|a|^2, |m|^2) / (|a|^2 + |m|^2)``; works on ``(2,)`` or ``(2, n)`` input.

    Amplitudes are rescaled by their larger modulus first, so arbitrarily
    large or small states do not overflow.
    """
    a, m = np.asarray(s[0], dtype=np.complex128), np.asarray(s[1], dtype=np.complex128)
    big = np.maximum(np.abs(a), np.abs(m))
    if np.any(big == 0) or not np.all(np.isfinite(big)):
        raise ParameterError("relative populations need a finite nonzero state")
    # exact power-of-two rescale; safe for subnormal and huge magnitudes alike
    _, e = np.frexp(big)
    pa = np.ldexp(a.real, -e) ** 2 + np.ldexp(a.imag, -e) ** 2
    pm = np.ldexp(m.real, -e) ** 2 + np.ldexp(m.imag, -e) ** 2
    tot = pa + pm
    p0, p1 = pa / tot, pm / tot
    if p0.ndim == 0:
        return float(p0), float(p1)
    return p0, p1


def _raise_status(status: int, t_fail: float):
    if status != _kernels.OK:
        raise IntegrationError(_STATUS_MESSAGES.get(status, f"integrator status {status}"), t_fail)


def evolve(p: SystemParams, proto: Protocol, err: ErrorParams = NO_ERROR, psi0=PHOTON,
           cfg: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    """Integrate ``dpsi/dt = -i H(t) psi`` with adaptive Dormand-Prince 5(4).

    Raises :class:`IntegrationError` (carrying the failing time) on step-size
    underflow, a non-finite state, or a pole of the control field.
    """
    proto = Protocol(proto)
    psi0 = np.asarray(psi0, dtype=np.complex128)
    if psi0.shape != (2,) or not np.all(np.isfinite(psi0)) or not np.any(psi0 != 0):
        raise ParameterError(f"psi0 must be a finite nonzero 2-vector, got {psi0!r}")
    times = cfg.times
    out_a, out_m, out_log = _kernels.empty_outputs(times.size)
    status, t_fail = _kernels.dopri5(p.as_array(), proto.code, err.alpha, err.eta,
                                     complex(psi0[0]), complex(psi0[1]), times,
                                     cfg.rel_tol, cfg.abs_tol, cfg.max_step, out_a, out_m, out_log)
    _raise_status(status, t_fail)
    return Trajectory(times, np.stack([out_a, out_m], axis=1), out_log)


def evolve_rk4(p: SystemParams, proto: Protocol, err: ErrorParams = NO_ERROR, psi0=PHOTON,
               t_start: float = 0.0, t_end: float = 2.0, dt: float = 1e-5) -> np.ndarray:
    """Fixed-step classical RK4 reference solver; returns the final state.

    The returned state is normalized to unit length (the overall scale is
    irrelevant for relative populations).
    """
    proto = Protocol(proto)
    psi0 = np.asarray(psi0, dtype=np.complex128)
    a, m, _ = _kernels.rk4_fixed(p.as_array(), proto.code, err.alpha, err.eta,
                                 complex(psi0[0]), complex(psi0[1]), float(t_start), float(t_end), float(dt))
    out = np.array([a, m])
    if not np.all(np.isfinite(out)):
        raise IntegrationError("non-finite state in fixed-step solver", t_end)
    return out / np.linalg.norm(out)


def transition_probability(p: SystemParams, proto: Protocol, err: ErrorParams = NO_ERROR,
                           cfg: IntegratorConfig = IntegratorConfig()) -> float:
    """Final magnon relative population starting from a pure photon."""
    cfg = IntegratorConfig(cfg.t_start, cfg.t_end, 2, cfg.rel_tol, cfg.abs_tol, cfg.max_step)
    return evolve(p, proto, err, PHOTON, cfg).final_populations[1]


def reference_hamiltonian(p: SystemParams, proto: Protocol, t: float) -> np.ndarray:
    """Hamiltonian whose eigenstates a run of ``proto`` is meant to follow.

    Bare and counterdiabatic runs follow the bare Hamiltonian; shortcut runs
    follow the dissipationless adiabatic states.
    """
    if Protocol(proto) is Protocol.NHS:
        p = p.replace(kappa_c=0.0, kappa_m=0.0)
    return build_hamiltonian(p, Protocol.BARE, NO_ERROR, t)


def tracking_fidelity(p: SystemParams, proto: Protocol, traj: Trajectory) -> np.ndarray:
    """Weight of the state on the tracked instantaneous eigenstate, per sample.

    ``|| P_k psi ||^2 / ||psi||^2`` with ``P_k = |right_k><left_k|`` the
    biorthonormal spectral projector. The branch is the one with the larger
    weight at the first sample; afterwards it is followed by continuity of the
    right eigenvector, since the principal-root labels can swap when the
    discriminant crosses its branch cut. Defective samples are NaN.
    """
    states = traj.states
    systems = [eigensystem(reference_hamiltonian(p, proto, t)) for t in traj.times]

    def weight(es, psi, k):
        proj = es.projector(k) @ psi
        return float(np.vdot(proj, proj).real / np.vdot(psi, psi).real)

    out = np.full(len(systems), math.nan)
    prev = None
    for i, (es, psi) in enumerate(zip(systems, states)):
        if es.defective:
            continue
        if prev is None:
            k = 1 if weight(es, psi, 1) >= weight(es, psi, 2) else 2
        else:
            k = 1 if abs(np.vdot(prev, es.right1)) >= abs(np.vdot(prev, es.right2)) else 2
        prev = es.right1 if k == 1 else es.right2
        out[i] = weight(es, psi, k)
    return out

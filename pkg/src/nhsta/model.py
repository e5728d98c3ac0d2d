"""Parameters and Hamiltonians of the driven two-mode cavity-magnon system.

All frequencies and rates are in units of the drive frequency, and time is
dimensionless (``omega_d * t`` when ``omega_d = 1``). The single-excitation
amplitudes ``psi = (a, m)`` obey ``dpsi/dt = -i H(t) psi``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from enum import Enum

import numpy as np

from . import _kernels
from .errors import ParameterError, PoleError


class Protocol(str, Enum):
    BARE = "Bare"
    NHS = "NHS"
    CD = "CD"

    @property
    def code(self) -> int:
        return {"Bare": _kernels.BARE, "NHS": _kernels.NHS, "CD": _kernels.CD}[self.value]


class DiagonalSign(str, Enum):
    """Sign placement of the rates on the diagonal.

    ``as-printed``: cavity ``+i kappa_c``, magnon ``-i kappa_m``.
    ``loss-loss``: both ``-i``.
    ``loss-gain``: cavity ``-i kappa_c``, magnon ``+i kappa_m``.
    """

    AS_PRINTED = "as-printed"
    LOSS_LOSS = "loss-loss"
    LOSS_GAIN = "loss-gain"

    @property
    def signs(self) -> tuple[float, float]:
        return {
            "as-printed": (1.0, -1.0),
            "loss-loss": (-1.0, -1.0),
            "loss-gain": (-1.0, 1.0),
        }[self.value]


@dataclass(frozen=True)
class SystemParams:
    omega_c: float
    omega_m: float
    epsilon_m: float
    g_m: float
    kappa_c: float = 0.0
    kappa_m: float = 0.0
    omega_d: float = 1.0
    diagonal_sign: DiagonalSign = DiagonalSign.AS_PRINTED

    def __post_init__(self):
        object.__setattr__(self, "diagonal_sign", DiagonalSign(self.diagonal_sign))
        for name in ("omega_c", "omega_m", "epsilon_m", "g_m", "kappa_c", "kappa_m", "omega_d"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ParameterError(f"{name} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.g_m < 0:
            raise ParameterError(f"g_m must be >= 0, got {self.g_m}")
        if self.epsilon_m < 0:
            raise ParameterError(f"epsilon_m must be >= 0, got {self.epsilon_m}")
        if self.omega_d <= 0:
            raise ParameterError(f"omega_d must be > 0, got {self.omega_d}")

    def replace(self, **changes) -> SystemParams:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["diagonal_sign"] = self.diagonal_sign.value
        return d

    def as_array(self) -> np.ndarray:
        sc, sm = self.diagonal_sign.signs
        return np.array([self.omega_c, self.omega_m, self.epsilon_m, self.omega_d,
                         self.g_m, self.kappa_c, self.kappa_m, sc, sm], dtype=np.float64)


@dataclass(frozen=True)
class ErrorParams:
    """Coupling-strength error ``alpha`` and systematic error ``eta``."""

    alpha: float = 0.0
    eta: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "eta"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ParameterError(f"{name} must be a finite real, got {value!r}")
            object.__setattr__(self, name, float(value))


NO_ERROR = ErrorParams()


def magnon_frequency(p: SystemParams, t):
    return p.omega_m + p.epsilon_m * np.cos(p.omega_d * t)


def detuning(p: SystemParams, t):
    """Cavity-magnon detuning ``omega_c - omega_m(t)``."""
    return p.omega_c - magnon_frequency(p, t)


def detuning_rate(p: SystemParams, t):
    """Analytic time derivative of :func:`detuning`."""
    return p.epsilon_m * p.omega_d * np.sin(p.omega_d * t)


def build_hamiltonian(p: SystemParams, proto: Protocol, err: ErrorParams = NO_ERROR, t: float = 0.0) -> np.ndarray:
    """The 2x2 complex Hamiltonian of ``proto`` at time ``t``.

    * ``Bare``: rates ``kappa_c``, ``kappa_m`` on the diagonal, coupling
      ``(1 + alpha) g_m``, whole matrix times ``(1 + eta)``.
    * ``NHS``: both rates replaced by the shortcut dissipation schedule,
      coupling ``(1 + alpha) g_m``, whole matrix times ``(1 + eta)``.
    * ``CD``: off-diagonals ``(1 + alpha)(g_m +/- Q(t))``, whole matrix times
      ``(1 + eta)``.

    Raises :class:`PoleError` if any entry is not finite (e.g. ``t`` sits on a
    pole of ``Q``).
    """
    proto = Protocol(proto)
    h = _kernels.hamiltonian(float(t), p.as_array(), proto.code, err.alpha, err.eta)
    if not all(math.isfinite(z.real) and math.isfinite(z.imag) for z in h):
        raise PoleError(f"non-finite {proto.value} Hamiltonian at t={t!r}", t=t)
    return np.array([[h[0], h[1]], [h[2], h[3]]], dtype=np.complex128)


def hamiltonian_series(p: SystemParams, proto: Protocol, err: ErrorParams, times) -> np.ndarray:
    """:func:`build_hamiltonian` on an array of times, shape ``(n, 2, 2)``."""
    proto = Protocol(proto)
    times = np.ascontiguousarray(times, dtype=np.float64)
    out = np.empty((times.shape[0], 2, 2), dtype=np.complex128)
    _kernels.hamiltonian_batch(times, p.as_array(), proto.code, err.alpha, err.eta, out)
    if not np.all(np.isfinite(out)):
        bad = times[~np.all(np.isfinite(out), axis=(1, 2))][0]
        raise PoleError(f"non-finite {proto.value} Hamiltonian at t={bad!r}", t=float(bad))
    return out

"""Instantaneous spectra, adiabatic basis, control fields and phase classification."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ParameterError, PoleError
from .model import (
    NO_ERROR,
    Protocol,
    SystemParams,
    detuning,
    detuning_rate,
    hamiltonian_series,
    magnon_frequency,
)

DEFECTIVE_RTOL = 1e-8
POLE_RTOL = 1e-9
EP_ATOL = 1e-12


@dataclass(frozen=True)
class EigenSystem:
    """Right eigenvectors (unit norm) and biorthonormal left covectors.

    ``left_k @ right_k == 1`` and ``left_j @ right_k == 0`` for ``j != k``
    unless the matrix is ``defective``, in which case the left covectors are
    left unnormalized. ``lambda1`` takes the ``+`` branch of the principal root.
    """

    lambda1: complex
    lambda2: complex
    right1: np.ndarray
    right2: np.ndarray
    left1: np.ndarray
    left2: np.ndarray
    defective: bool

    @property
    def eigenvalues(self) -> tuple[complex, complex]:
        return self.lambda1, self.lambda2

    def projector(self, k: int) -> np.ndarray:
        """Spectral projector ``|right_k><left_k|``."""
        r, l = (self.right1, self.left1) if k == 1 else (self.right2, self.left2)
        return np.outer(r, l)


def _eigvec(h: np.ndarray, lam: complex) -> np.ndarray:
    # two candidate null vectors of (h - lam); keep the better conditioned one
    v1 = np.array([h[0, 1], lam - h[0, 0]])
    v2 = np.array([lam - h[1, 1], h[1, 0]])
    v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
    n = np.linalg.norm(v)
    if n == 0.0:
        # h is a multiple of identity for this eigenvalue
        return np.array([1.0 + 0j, 0j]) if abs(lam - h[0, 0]) <= abs(lam - h[1, 1]) else np.array([0j, 1.0 + 0j])
    return v / n


def eigensystem(h: np.ndarray) -> EigenSystem:
    """Eigensystem of a 2x2 complex matrix, left covectors from ``h^dagger``."""
    h = np.asarray(h, dtype=np.complex128)
    half_tr = 0.5 * (h[0, 0] + h[1, 1])
    root = cmath.sqrt((0.5 * (h[0, 0] - h[1, 1])) ** 2 + h[0, 1] * h[1, 0])
    lam1, lam2 = half_tr + root, half_tr - root
    scale = float(np.max(np.abs(h)))
    defective = abs(lam1 - lam2) < DEFECTIVE_RTOL * scale

    r1, r2 = _eigvec(h, lam1), _eigvec(h, lam2)
    hd = h.conj().T
    # eigenvectors of the adjoint for conj(lambda); their conjugates are left covectors of h
    l1 = _eigvec(hd, lam1.conjugate()).conj()
    l2 = _eigvec(hd, lam2.conjugate()).conj()
    if defective:
        r2 = r1.copy()
    else:
        l1 = l1 / (l1 @ r1)
        l2 = l2 / (l2 @ r2)
    return EigenSystem(lam1, lam2, r1, r2, l1, l2, defective)


class Symmetry(str, Enum):
    PT_SYMMETRIC = "PTSymmetric"
    BROKEN_PT = "BrokenPT"
    EXCEPTIONAL_POINT = "ExceptionalPoint"

    @property
    def code(self) -> int:
        return {"PTSymmetric": 1, "ExceptionalPoint": 0, "BrokenPT": -1}[self.value]


class Stability(str, Enum):
    UNSTABLE = "Unstable"
    ASYMPTOTICALLY_STABLE = "AsymptoticallyStable"
    MARGINAL = "Marginal"

    @property
    def code(self) -> int:
        return {"Unstable": 1, "Marginal": 0, "AsymptoticallyStable": -1}[self.value]


@dataclass(frozen=True)
class PhasePoint:
    symmetry: Symmetry
    stability: Stability

    @property
    def region(self) -> int | None:
        """Phase-diagram region 1-4, ``None`` on a border.

        1: broken/unstable, 2: symmetric/unstable, 3: broken/stable, 4: symmetric/stable.
        """
        table = {
            (Symmetry.BROKEN_PT, Stability.UNSTABLE): 1,
            (Symmetry.PT_SYMMETRIC, Stability.UNSTABLE): 2,
            (Symmetry.BROKEN_PT, Stability.ASYMPTOTICALLY_STABLE): 3,
            (Symmetry.PT_SYMMETRIC, Stability.ASYMPTOTICALLY_STABLE): 4,
        }
        return table.get((self.symmetry, self.stability))


def classify_phase(g_m: float, kappa_c: float, kappa_m: float) -> PhasePoint:
    if g_m < 0:
        raise ParameterError(f"g_m must be >= 0, got {g_m}")
    gap = g_m - 0.5 * (kappa_c + kappa_m)
    if abs(gap) <= EP_ATOL:
        sym = Symmetry.EXCEPTIONAL_POINT
    elif gap > 0:
        sym = Symmetry.PT_SYMMETRIC
    else:
        sym = Symmetry.BROKEN_PT
    if kappa_c > kappa_m:
        stab = Stability.UNSTABLE
    elif kappa_c < kappa_m:
        stab = Stability.ASYMPTOTICALLY_STABLE
    else:
        stab = Stability.MARGINAL
    return PhasePoint(sym, stab)


def supermode_frequencies(p: SystemParams, omega_1: float) -> tuple[complex, complex]:
    """Supermode eigenfrequencies of the gain/loss matrix at common frequency ``omega_1``."""
    shift = omega_1 - 0.5j * (p.kappa_c - p.kappa_m)
    root = cmath.sqrt(p.g_m ** 2 - 0.25 * (p.kappa_c + p.kappa_m) ** 2)
    return shift + root, shift - root


def mixing_angle(p: SystemParams, t):
    """``theta = atan2(2 g_m, Delta) / 2``, in (0, pi/2) and continuous through Delta = 0."""
    delta = detuning(p, t)
    if p.g_m == 0 and np.any(delta == 0):
        raise ParameterError("mixing angle undefined for g_m = 0 at zero detuning")
    return 0.5 * np.arctan2(2.0 * p.g_m, delta)


def nonadiabatic_coupling(p: SystemParams, t):
    """``g_m dDelta/dt / (Delta^2 + 4 g_m^2)``.

    This is the coupling the dissipation schedule cancels; it is the
    *negative* of ``d(theta)/dt`` for the atan2 mixing angle.
    """
    delta = detuning(p, t)
    return p.g_m * detuning_rate(p, t) / (delta ** 2 + 4.0 * p.g_m ** 2)


def mixing_angle_rate(p: SystemParams, t):
    """Exact time derivative of :func:`mixing_angle`."""
    return -nonadiabatic_coupling(p, t)


def nhs_kappa(p: SystemParams, t):
    """Shortcut dissipation schedule ``-dDelta/dt / (2 sqrt(Delta^2 + 4 g_m^2))``."""
    delta = detuning(p, t)
    return -detuning_rate(p, t) / (2.0 * np.sqrt(delta ** 2 + 4.0 * p.g_m ** 2))


def _complex_detuning(p: SystemParams, t: float) -> complex:
    # magnon diagonal minus cavity diagonal of the bare matrix
    sc, sm = p.diagonal_sign.signs
    return complex(magnon_frequency(p, t), sm * p.kappa_m) - complex(p.omega_c, sc * p.kappa_c)


def cd_coupling(p: SystemParams, t: float) -> complex:
    """Counterdiabatic coupling ``Q(t)``.

    ``Q = i g_m omega_d epsilon_m sin(omega_d t) / (D'^2 + 4 g_m^2)`` with ``D'``
    the complex detuning (magnon minus cavity diagonal). Under the as-printed
    sign convention ``D' = omega_m(t) - i kappa_m - omega_c - i kappa_c``.
    """
    dprime = _complex_detuning(p, t)
    den = dprime * dprime + 4.0 * p.g_m ** 2
    if abs(den) < POLE_RTOL * 4.0 * p.g_m ** 2 or den == 0:
        raise PoleError(f"counterdiabatic coupling at its pole (|D'^2 + 4g^2| = {abs(den):.3g}) at t={t!r}", t=t)
    return 1j * p.g_m * p.omega_d * p.epsilon_m * math.sin(p.omega_d * t) / den


def counterdiabatic_hamiltonian(p: SystemParams, t: float) -> np.ndarray:
    q = cd_coupling(p, t)
    return np.array([[0.0, q], [-q, 0.0]], dtype=np.complex128)


def hamiltonian_rate(p: SystemParams, t: float) -> np.ndarray:
    """``dH/dt`` of the bare Hamiltonian (only the magnon frequency moves)."""
    return np.array([[0.0, 0.0], [0.0, -detuning_rate(p, t)]], dtype=np.complex128)


def projector_counterdiabatic(h: np.ndarray, dh: np.ndarray) -> np.ndarray:
    """Counterdiabatic field from spectral projectors.

    ``i sum_{m != n} P_m dH P_n / (lambda_n - lambda_m)`` with biorthonormal
    projectors ``P_k = |right_k><left_k|``.
    """
    es = eigensystem(h)
    if es.defective:
        raise PoleError("projector form undefined at an exceptional point")
    p1, p2 = es.projector(1), es.projector(2)
    return 1j * (p1 @ dh @ p2 / (es.lambda2 - es.lambda1) + p2 @ dh @ p1 / (es.lambda1 - es.lambda2))


@dataclass(frozen=True)
class AdiabaticFrame:
    """Hamiltonian seen by the adiabatic amplitudes ``(c_plus, c_minus) = R(theta) psi``.

    ``frame_hamiltonian`` is ordered (plus, minus) and is the exact generator
    ``R H R^T + i R' R^T``. ``theta_dot`` is the exact derivative of ``theta``;
    ``coupling`` is ``-theta_dot``.
    """

    theta: float
    theta_dot: float
    lambda_plus: float
    lambda_minus: float
    frame_hamiltonian: np.ndarray

    @property
    def coupling(self) -> float:
        return -self.theta_dot


def adiabatic_frames(p: SystemParams, times, proto: Protocol = Protocol.BARE):
    """Vectorized :func:`adiabatic_frame`.

    Returns ``(theta, theta_dot, lambda_plus, lambda_minus, frames)`` with
    ``frames`` of shape ``(n, 2, 2)``.
    """
    if p.g_m <= 0:
        raise ParameterError("adiabatic frame requires g_m > 0")
    times = np.atleast_1d(np.asarray(times, dtype=np.float64))
    theta = mixing_angle(p, times)
    theta_dot = mixing_angle_rate(p, times)
    mean = 0.5 * (p.omega_c + magnon_frequency(p, times))
    split = np.sqrt(p.g_m ** 2 + 0.25 * detuning(p, times) ** 2)
    h = hamiltonian_series(p, proto, NO_ERROR, times)
    c, s = np.cos(theta), np.sin(theta)
    r = np.empty((times.size, 2, 2))
    r[:, 0, 0], r[:, 0, 1], r[:, 1, 0], r[:, 1, 1] = c, s, -s, c
    # i R' R^T = i theta_dot [[0, 1], [-1, 0]]
    gauge = np.zeros((times.size, 2, 2), dtype=np.complex128)
    gauge[:, 0, 1] = 1j * theta_dot
    gauge[:, 1, 0] = -1j * theta_dot
    frames = r @ h @ np.swapaxes(r, 1, 2) + gauge
    return theta, theta_dot, mean + split, mean - split, frames


def adiabatic_frame(p: SystemParams, t: float, proto: Protocol = Protocol.BARE) -> AdiabaticFrame:
    theta, theta_dot, lp, lm, frames = adiabatic_frames(p, [t], proto)
    return AdiabaticFrame(float(theta[0]), float(theta_dot[0]), float(lp[0]), float(lm[0]), frames[0])

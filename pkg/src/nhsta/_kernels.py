"""Compiled scalar kernels: Hamiltonian assembly and the two integrators.

Everything here works on plain floats/complex scalars so that numba can
compile it without object-mode fallbacks. Public wrappers live in
``model`` and ``dynamics``.

Parameter vector layout (``prm``)::

    0 omega_c  1 omega_m  2 epsilon_m  3 omega_d  4 g_m  5 kappa_c  6 kappa_m
    7 cavity diagonal sign  8 magnon diagonal sign
"""

import math

import numpy as np
from numba import njit

BARE = 0
NHS = 1
CD = 2

OK = 0
STEP_UNDERFLOW = 1
NONFINITE_STATE = 2
NONFINITE_HAMILTONIAN = 3
TOO_MANY_STEPS = 4

POLE_RTOL = 1e-9
RESCALE_HI = 1e150
RESCALE_LO = 1e-150
MAX_STEPS = 50_000_000

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# difference between the 5th and embedded 4th order weights
E1 = 71 / 57600
E3 = -71 / 16695
E4 = 71 / 1920
E5 = -17253 / 339200
E6 = 22 / 525
E7 = -1 / 40


@njit(cache=True, error_model="numpy")
def hamiltonian(t, prm, proto, alpha, eta):
    """Entries (h00, h01, h10, h11) of the protocol Hamiltonian at ``t``.

    Returns NaN entries at a pole of the counterdiabatic coupling.
    """
    wc = prm[0]
    wd = prm[3]
    g = prm[4]
    sc = prm[7]
    sm = prm[8]
    wm_t = prm[1] + prm[2] * math.cos(wd * t)
    delta_dot = prm[2] * wd * math.sin(wd * t)

    if proto == NHS:
        delta = wc - wm_t
        kap = -delta_dot / (2.0 * math.sqrt(delta * delta + 4.0 * g * g))
        kc = kap
        km = kap
    else:
        kc = prm[5]
        km = prm[6]

    h00 = complex(wc, sc * kc)
    h11 = complex(wm_t, sm * km)
    gp = (1.0 + alpha) * g
    h01 = complex(gp, 0.0)
    h10 = complex(gp, 0.0)

    if proto == CD:
        dprime = h11 - h00
        den = dprime * dprime + 4.0 * g * g
        if abs(den) < POLE_RTOL * 4.0 * g * g or den == 0:
            nan = complex(math.nan, math.nan)
            return nan, nan, nan, nan
        q = 1j * g * delta_dot / den
        h01 = (1.0 + alpha) * (g + q)
        h10 = (1.0 + alpha) * (g - q)

    s = 1.0 + eta
    return h00 * s, h01 * s, h10 * s, h11 * s


@njit(cache=True, error_model="numpy")
def hamiltonian_batch(times, prm, proto, alpha, eta, out):
    """Fill ``out[k]`` (shape (n, 2, 2)) with the Hamiltonian at ``times[k]``."""
    for k in range(times.shape[0]):
        h00, h01, h10, h11 = hamiltonian(times[k], prm, proto, alpha, eta)
        out[k, 0, 0] = h00
        out[k, 0, 1] = h01
        out[k, 1, 0] = h10
        out[k, 1, 1] = h11


@njit(cache=True, error_model="numpy")
def _rhs(t, a, m, prm, proto, alpha, eta):
    h00, h01, h10, h11 = hamiltonian(t, prm, proto, alpha, eta)
    return -1j * (h00 * a + h01 * m), -1j * (h10 * a + h11 * m)


@njit(cache=True, error_model="numpy")
def _finite(z):
    return math.isfinite(z.real) and math.isfinite(z.imag)


@njit(cache=True, error_model="numpy")
def _norm(a, m):
    return math.hypot(abs(a), abs(m))


@njit(cache=True, nogil=True, error_model="numpy")
def dopri5(prm, proto, alpha, eta, a0, m0, times, rtol, atol, hmax, out_a, out_m, out_log):
    """Adaptive Dormand-Prince 5(4) with FSAL and norm rescaling.

    Steps are clipped so that every entry of ``times`` is hit exactly.
    The absolute tolerance is taken relative to the running state norm, which
    makes the step sequence invariant under rescaling of the state.

    Returns ``(status, t_fail)``.
    """
    n = times.shape[0]
    t = times[0]
    a = a0
    m = m0
    logs = 0.0

    nrm = _norm(a, m)
    if not math.isfinite(nrm) or nrm == 0.0:
        return NONFINITE_STATE, t
    if nrm > RESCALE_HI or nrm < RESCALE_LO:
        a /= nrm
        m /= nrm
        logs += math.log(nrm)
    out_a[0] = a
    out_m[0] = m
    out_log[0] = logs

    k1a, k1m = _rhs(t, a, m, prm, proto, alpha, eta)
    if not (_finite(k1a) and _finite(k1m)):
        return NONFINITE_HAMILTONIAN, t

    # initial step from the local time scale |f|/|y|
    rate = _norm(k1a, k1m) / _norm(a, m)
    h = 0.01 * rtol ** 0.2 / max(rate, 1e-6)
    h = min(h, hmax, times[n - 1] - t)
    steps = 0

    for idx in range(1, n):
        t_target = times[idx]
        while t < t_target:
            steps += 1
            if steps > MAX_STEPS:
                return TOO_MANY_STEPS, t
            if h < 1e-14 * max(1.0, abs(t)):
                return STEP_UNDERFLOW, t
            landing = False
            hs = h
            if t + hs >= t_target or t_target - (t + hs) < 1e-12 * hs:
                hs = t_target - t
                landing = True

            k2a, k2m = _rhs(t + C2 * hs, a + hs * A21 * k1a, m + hs * A21 * k1m, prm, proto, alpha, eta)
            k3a, k3m = _rhs(t + C3 * hs,
                            a + hs * (A31 * k1a + A32 * k2a),
                            m + hs * (A31 * k1m + A32 * k2m), prm, proto, alpha, eta)
            k4a, k4m = _rhs(t + C4 * hs,
                            a + hs * (A41 * k1a + A42 * k2a + A43 * k3a),
                            m + hs * (A41 * k1m + A42 * k2m + A43 * k3m), prm, proto, alpha, eta)
            k5a, k5m = _rhs(t + C5 * hs,
                            a + hs * (A51 * k1a + A52 * k2a + A53 * k3a + A54 * k4a),
                            m + hs * (A51 * k1m + A52 * k2m + A53 * k3m + A54 * k4m),
                            prm, proto, alpha, eta)
            k6a, k6m = _rhs(t + hs,
                            a + hs * (A61 * k1a + A62 * k2a + A63 * k3a + A64 * k4a + A65 * k5a),
                            m + hs * (A61 * k1m + A62 * k2m + A63 * k3m + A64 * k4m + A65 * k5m),
                            prm, proto, alpha, eta)
            an = a + hs * (B1 * k1a + B3 * k3a + B4 * k4a + B5 * k5a + B6 * k6a)
            mn = m + hs * (B1 * k1m + B3 * k3m + B4 * k4m + B5 * k5m + B6 * k6m)
            t_new = t_target if landing else t + hs
            k7a, k7m = _rhs(t_new, an, mn, prm, proto, alpha, eta)

            if not (_finite(k7a) and _finite(k7m) and _finite(an) and _finite(mn)):
                # either a pole/overflow inside the step; retry smaller
                h = 0.25 * hs
                if h < 1e-14 * max(1.0, abs(t)):
                    if not (_finite(an) and _finite(mn)):
                        return NONFINITE_STATE, t
                    return NONFINITE_HAMILTONIAN, t
                continue

            ea = hs * (E1 * k1a + E3 * k3a + E4 * k4a + E5 * k5a + E6 * k6a + E7 * k7a)
            em = hs * (E1 * k1m + E3 * k3m + E4 * k4m + E5 * k5m + E6 * k6m + E7 * k7m)
            scale_abs = atol * _norm(a, m)
            sa = scale_abs + rtol * max(abs(a), abs(an))
            sm = scale_abs + rtol * max(abs(m), abs(mn))
            err = math.sqrt(0.5 * ((abs(ea) / sa) ** 2 + (abs(em) / sm) ** 2))

            if err <= 1.0:
                t = t_new
                a = an
                m = mn
                k1a = k7a
                k1m = k7m
                nrm = _norm(a, m)
                if nrm > RESCALE_HI or nrm < RESCALE_LO:
                    a /= nrm
                    m /= nrm
                    k1a /= nrm
                    k1m /= nrm
                    logs += math.log(nrm)
                fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                h_new = hs * fac
                # a clipped landing step must not shrink the proposal
                h = max(h_new, h) if landing else h_new
                h = min(h, hmax)
            else:
                h = hs * max(0.2, 0.9 * err ** -0.2)

        out_a[idx] = a
        out_m[idx] = m
        out_log[idx] = logs
    return OK, t


@njit(cache=True, nogil=True, error_model="numpy")
def rk4_fixed(prm, proto, alpha, eta, a0, m0, t0, t1, dt):
    """Classical fixed-step RK4 from ``t0`` to ``t1``; last step shortened.

    Returns the final unnormalized amplitudes ``(a, m, log_scale)``.
    """
    a = a0
    m = m0
    logs = 0.0
    nsteps = int(math.ceil((t1 - t0) / dt - 1e-9))
    for i in range(nsteps):
        t = t0 + i * dt
        h = min(dt, t1 - t)
        k1a, k1m = _rhs(t, a, m, prm, proto, alpha, eta)
        k2a, k2m = _rhs(t + 0.5 * h, a + 0.5 * h * k1a, m + 0.5 * h * k1m, prm, proto, alpha, eta)
        k3a, k3m = _rhs(t + 0.5 * h, a + 0.5 * h * k2a, m + 0.5 * h * k2m, prm, proto, alpha, eta)
        k4a, k4m = _rhs(t + h, a + h * k3a, m + h * k3m, prm, proto, alpha, eta)
        a = a + h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        m = m + h / 6.0 * (k1m + 2.0 * k2m + 2.0 * k3m + k4m)
        nrm = _norm(a, m)
        if nrm > 1e100 or nrm < 1e-100:
            a /= nrm
            m /= nrm
            logs += math.log(nrm)
    return a, m, logs


def empty_outputs(n):
    return (np.empty(n, dtype=np.complex128), np.empty(n, dtype=np.complex128),
            np.empty(n, dtype=np.float64))

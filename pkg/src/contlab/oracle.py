"""Independent brute-force verification: long time integration with
period-multiple detection, and closed-form linear references."""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .fourier import HarmonicVector, dft_over_periods, total_amplitude
from .plant import STEPS_PER_PERIOD

TWO_PI = 2.0 * math.pi


@dataclass
class SettleReport:
    """Outcome of settling a plant under tonal drive.

    ``period_multiple`` is l for a response repeating every l forcing
    periods; ``coeffs`` holds Fourier coefficients at base frequency
    omega / l with the drive aligned to harmonic l.
    """

    status: str                    # ok | diverged | aperiodic
    period_multiple: int = 0
    coeffs: HarmonicVector = None
    total_amp: float = 0.0
    a1: float = 0.0                # amplitude at the forcing frequency


def linear_frf(m, c, k, f, omega):
    """Amplitude and phase lag of the linear 1-DOF response to f sin(wt)."""
    if m <= 0.0 or k <= 0.0:
        raise ValueError("m and k must be positive")
    denom_re = k - m * omega * omega
    denom_im = c * omega
    amp = f / math.hypot(denom_re, denom_im)
    phase = -math.atan2(denom_im, denom_re)
    return amp, phase


def _period_multiple(qs, vs, omega, l_max, threshold=0.999):
    """Smallest l with Poincare samples repeating every l periods."""
    pts = np.stack([qs, vs / omega], axis=1)
    center = pts.mean(axis=0)
    d = pts - center
    scale = max(float(np.max(np.abs(pts))), 1e-30)
    var = float(np.mean(np.sum(d * d, axis=1)))
    if var < (1e-4 * scale) ** 2:
        return 1
    for l in range(1, l_max + 1):
        a = d[:-l] if l else d
        b = d[l:]
        num = float(np.sum(a * b))
        den = math.sqrt(float(np.sum(a * a)) * float(np.sum(b * b)))
        if den > 0.0 and num / den > threshold:
            # accept only if the samples truly overlay, not merely correlate
            gap = float(np.max(np.abs(pts[l:] - pts[:-l])))
            if gap < 1e-3 * scale:
                return l
    return 0


def settle_and_measure(params, f_amp, omega, ic, n_transient=300, n_measure=40,
                       h=7, l_max=8, steps_per_period=STEPS_PER_PERIOD,
                       blowup=1e9):
    """Integrate to steady state under f_amp sin(wt), then demodulate.

    Subharmonic responses are detected from Poincare samples taken once
    per forcing period; the record is then demodulated at omega / l over
    the final five response periods.
    """
    if n_transient < 1 or n_measure < 1:
        raise ValueError("need at least one transient and one measure period")
    p = params
    dt = TWO_PI / omega / steps_per_period
    zero = np.zeros(0)
    q, v, t, phi, _, status, _, _, _, _, _, _, _ = _kernels.open_loop_run(
        p.m, p.c, p.k, p.k2, p.k3, ic[0], ic[1], 0.0,
        dt, n_transient * steps_per_period,
        f_amp, 0.0, omega, 0.0, 0,
        0, 0.0, zero, blowup, 0, zero, zero, 1.0)
    if status != 0:
        return SettleReport(status="diverged")
    n_steps = n_measure * steps_per_period
    (q, v, t, phi, _, status, _, _, n_rec, rec_t, rec_q, rec_v, _) = \
        _kernels.open_loop_run(
            p.m, p.c, p.k, p.k2, p.k3, q, v, t,
            dt, n_steps, f_amp, phi, omega, 0.0, 0,
            0, 0.0, zero, blowup, 1, zero, zero, 1.0)
    if status != 0:
        return SettleReport(status="diverged")
    phi0 = phi - omega * (rec_t[-1] + dt - rec_t[0])  # drive phase at record start
    qs = rec_q[::steps_per_period]
    vs = rec_v[::steps_per_period]
    l = _period_multiple(qs, vs, omega, min(l_max, n_measure // 6))
    if l == 0:
        return SettleReport(status="aperiodic")
    h_eff = max(h, 3 * l)
    wv = dft_over_periods(rec_t, rec_q, omega / l, n_periods=5, h=h_eff,
                          phi0=phi0 / l)
    tot = total_amplitude(rec_q, l * steps_per_period)
    return SettleReport(status="ok", period_multiple=l, coeffs=wv,
                        total_amp=tot, a1=wv.amp(l))

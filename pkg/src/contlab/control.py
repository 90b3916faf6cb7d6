"""Feedback controllers and non-invasiveness bookkeeping shared by the
control-based testing methods."""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .fourier import HarmonicVector, basis_matrix


@dataclass(frozen=True)
class PidGains:
    kp: float = 0.0
    ki: float = 0.0
    kd: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(g) for g in (self.kp, self.ki, self.kd)):
            raise ValueError("PID gains must be finite")


@dataclass
class ReferenceSignal:
    """Controller reference: prescribed fundamental plus non-fundamental
    harmonics copied from the plant response."""

    omega: float
    a_star: float
    b_star: float
    nonfundamental: HarmonicVector

    def __post_init__(self):
        nf = self.nonfundamental
        if nf.coeffs[1] != 0.0 or nf.coeffs[1 + nf.h] != 0.0:
            raise ValueError("non-fundamental part must have zero fundamental entries")


@dataclass(frozen=True)
class InvasivenessReport:
    """Mismatch between prescribed and measured non-fundamental content."""

    residual_norm: float
    relative: float


def differential_control(x_star_vel, sensed_vel, kd):
    """Velocity-difference feedback drive."""
    return kd * (x_star_vel - sensed_vel)


@dataclass
class PidState:
    """Integrator/derivative memory of a practical PID."""

    bias: float = 0.0
    integ: float = 0.0
    e_prev: float = 0.0
    d_filt: float = 0.0
    windup: float = math.inf
    deriv_alpha: float = 1.0  # one-pole smoothing factor per step
    clamped: bool = False


def pid_step(state, error, dt, gains):
    """One discrete PID update; returns (output, next state).

    Integral by rectangle rule with clamping, derivative by first
    difference through a single-pole low-pass filter.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    integ = state.integ + error * dt
    clamped = state.clamped
    if gains.ki != 0.0 and math.isfinite(state.windup):
        lim = state.windup / abs(gains.ki)
        if abs(integ) > lim:
            integ = math.copysign(lim, integ)
            clamped = True
    d_filt = state.d_filt + state.deriv_alpha * ((error - state.e_prev) / dt - state.d_filt)
    out = state.bias + gains.kp * error + gains.ki * integ + gains.kd * d_filt
    nxt = replace(state, integ=integ, e_prev=error, d_filt=d_filt, clamped=clamped)
    return out, nxt


def synth_reference(ref, t):
    """Evaluate the reference signal at time(s) t."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    phi = ref.omega * t
    vals = (ref.a_star * np.sin(phi) + ref.b_star * np.cos(phi)
            + basis_matrix(ref.nonfundamental.h, phi) @ ref.nonfundamental.coeffs)
    return vals if vals.size > 1 else float(vals[0])


def invasiveness(ref, measured):
    """Norm of (reference - measured) over the non-fundamental entries."""
    r = ref.nonfundamental.coeffs
    m = measured.nonfundamental().coeffs
    residual = float(np.linalg.norm(r - m))
    rel = residual / ref.a_star if ref.a_star > 0.0 else math.inf
    return InvasivenessReport(residual_norm=residual, relative=rel)


def control_off_stability_probe(plant, omega, f_amp, phi0, a1_ref, state,
                                hold_periods=50, band=0.05,
                                steps_per_period=1000, h=7, mu_bar=2.0):
    """Open the loop and watch whether the orbit survives.

    Keeps the tonal open-loop forcing (amplitude ``f_amp``, phase
    ``phi0``) while the feedback is off, starting from ``state``.
    Returns True (open-loop stable) when the per-period fundamental
    amplitude stays within ``band`` of ``a1_ref`` for ``hold_periods``.
    """
    p = plant.params
    dt = 2.0 * math.pi / omega / steps_per_period
    q, v, t = state.q, state.v, state.t
    w = np.zeros(2 * h + 1)
    phi = phi0
    mu_coeff = 0.5 * mu_bar
    for period in range(hold_periods):
        nq, nv = plant.noise_draws(steps_per_period)
        (q, v, t, phi, _, status, _, _, _, _, _, _, _) = _kernels.open_loop_run(
            p.m, p.c, p.k, p.k2, p.k3, q, v, t,
            dt, steps_per_period, f_amp, phi,
            omega, 0.0, 0,
            h, mu_coeff, w,
            plant.blowup, 0, nq, nv, plant.vel_gain)
        if status != 0:
            return False
        if period >= 2:  # let the demodulator converge first
            a1 = math.hypot(w[1], w[1 + h])
            if abs(a1 - a1_ref) > band * abs(a1_ref):
                return False
    return True

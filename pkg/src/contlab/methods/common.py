"""Shared measurement helpers for the testing methods."""

import math
from dataclasses import dataclass

import numpy as np

from ..fourier import (HarmonicVector, amp_phase, dft_over_periods,
                       total_amplitude, wrap_phase_lag)

TWO_PI = 2.0 * math.pi


@dataclass
class PointMeasurement:
    """Demodulated content of a recorded steady hold."""

    disp: HarmonicVector
    vel: HarmonicVector
    drive: HarmonicVector
    a1: float
    phase_lag: float
    f_meas: float
    f_phase: float
    total_amp: float


def demod_hold(rec_t, rec_q, rec_v, rec_u, omega, phi0, h,
               steps_per_period, n_periods=5):
    """Demodulate the tail of a recorded hold against the drive phase.

    ``phi0`` is the kernel basis phase at the first recorded sample, so
    every harmonic quantity is referenced to the synthesized drive.
    """
    disp = dft_over_periods(rec_t, rec_q, omega, n_periods, h, phi0)
    vel = dft_over_periods(rec_t, rec_v, omega, n_periods, h, phi0)
    drive = dft_over_periods(rec_t, rec_u, omega, n_periods, h, phi0)
    a1, ph_q = amp_phase(disp, 1)
    f_meas, ph_u = amp_phase(drive, 1)
    return PointMeasurement(
        disp=disp, vel=vel, drive=drive, a1=a1,
        phase_lag=wrap_phase_lag(ph_q - ph_u),
        f_meas=f_meas, f_phase=ph_u,
        total_amp=total_amplitude(rec_q, steps_per_period))


def find_jumps(omegas, amps, frac=0.25):
    """Indices i where the amplitude changes by more than ``frac`` of the
    series maximum between consecutive points."""
    omegas = np.asarray(omegas)
    amps = np.asarray(amps)
    scale = float(np.max(np.abs(amps))) or 1.0
    out = []
    for i in range(len(amps) - 1):
        if abs(amps[i + 1] - amps[i]) > frac * scale:
            out.append(i)
    return out

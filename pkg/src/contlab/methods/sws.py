"""Swept-sine testing: continuous frequency ramp with per-period online
demodulation."""

import math

import numpy as np

from .. import _kernels
from ..branch import Branch, BranchPoint
from ..fourier import wrap_phase_lag
from ..plant import STEPS_PER_PERIOD
from .common import find_jumps

TWO_PI = 2.0 * math.pi


def swept_sine(plant, f_amp, omega_range, sweep_rate, direction="up",
               sweep_mode="log", h=9, mu_bar=2.0,
               steps_per_period=STEPS_PER_PERIOD, jump_frac=0.25):
    """Sweep the excitation frequency across ``omega_range`` and log one
    branch point per excitation cycle.

    ``sweep_rate`` is d(ln omega)/dt for the logarithmic mode and
    d(omega)/dt for the linear mode; the sign is taken from
    ``direction``.  Jumps show up as amplitude discontinuities and are
    indexed in ``branch.meta['jumps']``.
    """
    lo, hi = min(omega_range), max(omega_range)
    up = direction == "up"
    omega = lo if up else hi
    rate = abs(sweep_rate) * (1.0 if up else -1.0)
    mode = 2 if sweep_mode == "log" else 1
    p = plant.params
    nb = 2 * h + 1
    w = np.zeros(nb)
    q, v, t, phi = plant.state.q, plant.state.v, plant.state.t, 0.0
    branch = Branch(method="sws", meta={"direction": direction,
                                        "f_amp": f_amp,
                                        "sweep_rate": sweep_rate})
    mu_coeff = 0.5 * mu_bar
    while (omega < hi) if up else (omega > lo):
        dt = TWO_PI / omega / steps_per_period
        nq, nv = plant.noise_draws(steps_per_period)
        (q, v, t, phi, omega, status, max_q, max_v, _, _, _, _, _) = \
            _kernels.open_loop_run(
                p.m, p.c, p.k, p.k2, p.k3, q, v, t,
                dt, steps_per_period, f_amp, phi,
                omega, rate, mode,
                h, mu_coeff, w,
                plant.blowup, 0, nq, nv, plant.vel_gain)
        if status != 0:
            branch.meta["diverged"] = True
            break
        a1 = math.sqrt(w[1] * w[1] + w[1 + h] * w[1 + h])
        branch.points.append(BranchPoint(
            omega=omega, a1=a1, f_meas=f_amp,
            phase_lag=wrap_phase_lag(math.atan2(w[1 + h], w[1])),
            total_amp=max_q,
            measured=None, converged=True, wall_time_s=t))
    # wall_time_s accumulated the absolute test time; per-point cost is
    # the difference, but the cumulative value is what reproduces the
    # paper-style total test duration
    # skip the first cycles: both the plant and the demodulator are still
    # in their start-up transient there
    skip = min(5, len(branch.points))
    omegas = [pt.omega for pt in branch.points]
    amps = [pt.a1 for pt in branch.points]
    raw = [i + skip for i in find_jumps(omegas[skip:], amps[skip:], jump_frac)]
    # the post-jump transient rings for a few cycles; merge each cluster
    # of detections into a single event
    events = []
    for i in raw:
        if events and i - events[-1]["last"] <= 20:
            events[-1]["last"] = i
        else:
            events.append({"index": i, "last": i})
    branch.meta["jumps"] = [
        {"index": e["index"], "omega": omegas[e["index"]],
         "drop": amps[min(e["last"] + 1, len(amps) - 1)] - amps[e["index"]]}
        for e in events]
    return branch

"""Stepped-sine testing: hold, settle, demodulate, step."""

import math

import numpy as np

from .. import _kernels
from ..branch import Branch, BranchPoint
from ..plant import STEPS_PER_PERIOD
from .common import demod_hold

TWO_PI = 2.0 * math.pi


def _hold(plant, q, v, t, phi, omega, f_amp, n_periods, steps_per_period,
          record=False):
    p = plant.params
    dt = TWO_PI / omega / steps_per_period
    n = n_periods * steps_per_period
    nq, nv = plant.noise_draws(n)
    res = _kernels.open_loop_run(
        p.m, p.c, p.k, p.k2, p.k3, q, v, t, dt, n,
        f_amp, phi, omega, 0.0, 0, 0, 0.0, np.zeros(0),
        plant.blowup, 1 if record else 0, nq, nv, plant.vel_gain)
    return res


def stepped_sine(plant, f_amp, grid, t_steady=50, mode="frequency",
                 omega=None, h=9, steps_per_period=STEPS_PER_PERIOD,
                 measure_periods=5):
    """Stepped test over a frequency grid (NFR samples) or a drive
    amplitude grid at fixed frequency (open-loop S-curve).

    Each grid point is held ``t_steady`` periods and demodulated over the
    final ``measure_periods``; a diverged point is flagged and the test
    restarts from rest at the next point.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty grid")
    if mode not in ("frequency", "amplitude"):
        raise ValueError(f"unknown stepped mode {mode!r}")
    if mode == "amplitude" and omega is None:
        raise ValueError("amplitude mode needs a fixed omega")
    branch = Branch(method="sts", meta={"mode": mode, "f_amp": f_amp,
                                        "omega": omega})
    q, v, t, phi = plant.state.q, plant.state.v, plant.state.t, 0.0
    for value in grid:
        om = value if mode == "frequency" else omega
        fa = f_amp if mode == "frequency" else value
        res = _hold(plant, q, v, t, phi, om, fa,
                    t_steady, steps_per_period)
        q, v, t, phi = res[0], res[1], res[2], res[3]
        if res[5] != 0:
            branch.points.append(BranchPoint(
                omega=om, a1=math.nan, f_meas=fa, converged=False,
                wall_time_s=t))
            q, v, t, phi = 0.0, 0.0, t, 0.0
            continue
        res = _hold(plant, q, v, t, phi, om, fa,
                    measure_periods, steps_per_period, record=True)
        phi_rec = phi
        q, v, t, phi = res[0], res[1], res[2], res[3]
        meas = demod_hold(res[9], res[10], res[11], res[12], om, phi_rec,
                          h, steps_per_period, measure_periods)
        branch.points.append(BranchPoint(
            omega=om, a1=meas.a1, f_meas=fa, phase_lag=meas.phase_lag,
            total_amp=meas.total_amp, measured=meas.disp,
            forcing=meas.drive, converged=True, wall_time_s=t))
    return branch

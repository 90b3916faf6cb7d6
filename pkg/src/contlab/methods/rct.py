"""Response-controlled stepped-sine testing.

An automatic trial-and-error loop holds a tonal drive, estimates the
response/drive ratio and rescales the drive amplitude until the
fundamental displacement amplitude matches its target.  The drive stays
tonal throughout, so the procedure is non-invasive by construction.
"""

import math

import numpy as np

from .. import _kernels
from ..oracle import linear_frf
from ..plant import STEPS_PER_PERIOD
from ..postprocess import SurfaceGrid
from .common import demod_hold

TWO_PI = 2.0 * math.pi


def _hold_measure(plant, state, omega, f_amp, t_steady, measure_periods,
                  h, steps_per_period):
    p = plant.params
    dt = TWO_PI / omega / steps_per_period
    q, v, t, phi = state
    n = t_steady * steps_per_period
    nq, nv = plant.noise_draws(n)
    res = _kernels.open_loop_run(
        p.m, p.c, p.k, p.k2, p.k3, q, v, t, dt, n, f_amp, phi,
        omega, 0.0, 0, 0, 0.0, np.zeros(0), plant.blowup, 0, nq, nv,
        plant.vel_gain)
    if res[5] != 0:
        return None, (res[0], res[1], res[2], res[3])
    q, v, t, phi = res[0], res[1], res[2], res[3]
    n = measure_periods * steps_per_period
    nq, nv = plant.noise_draws(n)
    res = _kernels.open_loop_run(
        p.m, p.c, p.k, p.k2, p.k3, q, v, t, dt, n, f_amp, phi,
        omega, 0.0, 0, 0, 0.0, np.zeros(0), plant.blowup, 1, nq, nv,
        plant.vel_gain)
    if res[5] != 0:
        return None, (res[0], res[1], res[2], res[3])
    meas = demod_hold(res[9], res[10], res[11], res[12], omega, phi,
                      h, steps_per_period, measure_periods)
    return meas, (res[0], res[1], res[2], res[3])


def rct(plant, omega_grid, a_star_grid, tol=0.01, max_corrections=10,
        t_steady=50, measure_periods=5, flag_threshold=0.2, h=9,
        steps_per_period=STEPS_PER_PERIOD):
    """Amplitude-matching stepped test over a (frequency x target) grid.

    For each target amplitude the frequency axis is swept with the
    previous converged drive as the starting guess.  Cells whose final
    relative amplitude error exceeds ``flag_threshold`` are flagged; the
    collection of realized forces forms the harmonic force surface.
    """
    omega_grid = np.asarray(sorted(omega_grid), dtype=float)
    a_grid = np.asarray(sorted(a_star_grid), dtype=float)
    if omega_grid.size == 0 or a_grid.size == 0:
        raise ValueError("empty test grid")
    p = plant.params
    f_surface = np.full((omega_grid.size, a_grid.size), math.nan)
    a_surface = np.full_like(f_surface, math.nan)
    flags = np.zeros(f_surface.shape, dtype=bool)
    n_corr = np.zeros(f_surface.shape, dtype=int)
    sim_time = 0.0
    for j, a_star in enumerate(a_grid):
        state = (0.0, 0.0, 0.0, 0.0)
        f_prev = None
        for i, omega in enumerate(omega_grid):
            if f_prev is None:
                amp_lin, _ = linear_frf(p.m, p.c, p.k, 1.0, omega)
                f_drive = a_star / amp_lin
            else:
                f_drive = f_prev
            err = math.inf
            a_meas = math.nan
            for it in range(max_corrections):
                meas, state = _hold_measure(plant, state, omega, f_drive,
                                            t_steady, measure_periods, h,
                                            steps_per_period)
                n_corr[i, j] = it + 1
                if meas is None:
                    state = (0.0, 0.0, state[2], 0.0)
                    err = math.inf
                    break
                a_meas = meas.a1
                err = abs(a_meas - a_star) / a_star
                if err < tol:
                    break
                gain = a_meas / f_drive
                f_drive = a_star / gain
            f_surface[i, j] = f_drive
            a_surface[i, j] = a_meas
            flags[i, j] = not (err < flag_threshold)
            f_prev = f_drive if err < flag_threshold else None
            sim_time = state[2]
    return SurfaceGrid(omega_axis=omega_grid, a_star_axis=a_grid,
                       f_meas=f_surface, a_meas=a_surface, flags=flags,
                       meta={"method": "rct", "tol": tol,
                             "flag_threshold": flag_threshold,
                             "corrections": n_corr.tolist(),
                             "sim_time_s": sim_time})

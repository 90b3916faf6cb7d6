"""Simplified control-based continuation: amplitude-stepped S-curves at
fixed frequency with a non-invasive velocity-feedback controller.

Two schemes set the non-fundamental reference content: discrete Picard
reassignment of the measured harmonics, or continuous tracking by the
adaptive filter.
"""

import math

import numpy as np

from .. import _kernels
from ..branch import Branch, BranchPoint
from ..control import InvasivenessReport
from ..fourier import HarmonicVector, feedback_gain
from ..plant import STEPS_PER_PERIOD
from ..postprocess import SurfaceGrid
from .common import demod_hold

TWO_PI = 2.0 * math.pi


class _Loop:
    """Closed-loop hold runner keeping plant/filter state across calls."""

    def __init__(self, plant, omega, h, kd, mu, steps_per_period):
        self.plant = plant
        self.omega = omega
        self.h = h
        self.kd = kd
        self.mu = mu
        self.spp = steps_per_period
        self.dt = TWO_PI / omega / steps_per_period
        nb = 2 * h + 1
        self.w_v = np.zeros(nb)
        self.w_u = np.zeros(nb)
        self.q, self.v, self.t, self.phi = (plant.state.q, plant.state.v,
                                            plant.state.t, 0.0)

    def hold(self, a_star, b_star, ref_nf, mode, n_periods, record=False):
        p = self.plant.params
        n = n_periods * self.spp
        nq, nv = self.plant.noise_draws(n)
        res = _kernels.cbc_run(
            p.m, p.c, p.k, p.k2, p.k3,
            self.q, self.v, self.t, self.dt, n,
            self.omega, self.phi, self.h, self.mu,
            self.w_v, self.w_u, self.kd, a_star, b_star,
            ref_nf, mode, self.plant.blowup,
            1 if record else 0, nq, nv, self.plant.vel_gain)
        phi_rec = self.phi
        self.q, self.v, self.t, self.phi = res[0], res[1], res[2], res[3]
        status = res[4]
        if record:
            meas = demod_hold(res[8], res[9], res[10], res[11], self.omega,
                              phi_rec, self.h, self.spp)
            return status, meas
        return status, None


def _nonfundamental(coeffs, h):
    out = np.array(coeffs, dtype=float)
    out[1] = 0.0
    out[1 + h] = 0.0
    return out


def scbc(plant, omega, a_star_grid, variant="adaptive", tol=0.01,
         max_iters=20, t_steady=50, measure_periods=5, h=15, kd=1.0,
         mu=None, mu_bar=2.0, steps_per_period=STEPS_PER_PERIOD):
    """S-curve at fixed frequency: step the fundamental reference
    amplitude, settle the non-fundamental content, record each point.

    ``variant='picard'`` freezes the non-fundamental reference during
    each hold and reassigns it from the measured response until the
    update falls below ``tol`` (relative to the target amplitude);
    ``variant='adaptive'`` feeds the tracking filter output into the
    reference continuously and waits for it to become stationary.
    """
    if variant not in ("picard", "adaptive"):
        raise ValueError(f"unknown scbc variant {variant!r}")
    mu = feedback_gain(omega) if mu is None else mu
    loop = _Loop(plant, omega, h, kd, mu, steps_per_period)
    nb = 2 * h + 1
    branch = Branch(method=f"scbc-{variant}",
                    meta={"omega": omega, "tol": tol, "kd": kd})
    ref_nf = np.zeros(nb)
    for a_star in a_star_grid:
        converged = False
        iters = 0
        if variant == "picard":
            for it in range(max_iters):
                iters = it + 1
                status, meas = loop.hold(a_star, 0.0, ref_nf, 0,
                                         t_steady, record=True)
                if status != 0:
                    break
                new_nf = _nonfundamental(meas.vel.coeffs, h)
                change = float(np.linalg.norm(new_nf - ref_nf)) / a_star
                ref_nf = new_nf
                if change < tol:
                    converged = True
                    break
        else:
            status, _ = loop.hold(a_star, 0.0, ref_nf, 1, t_steady)
            prev = loop.w_v.copy()
            for it in range(max_iters):
                iters = it + 1
                status, _ = loop.hold(a_star, 0.0, ref_nf, 1, 1)
                if status != 0:
                    break
                change = float(np.linalg.norm(
                    _nonfundamental(loop.w_v - prev, h))) / a_star
                prev = loop.w_v.copy()
                if change < tol:
                    converged = True
                    break
            ref_nf = _nonfundamental(loop.w_v, h)
        mode = 0 if variant == "picard" else 1
        status, meas = loop.hold(a_star, 0.0, ref_nf, mode,
                                 measure_periods, record=True)
        if status != 0:
            branch.points.append(BranchPoint(
                omega=omega, a1=math.nan, f_meas=math.nan, a_star=a_star,
                converged=False, wall_time_s=loop.t))
            loop.q, loop.v, loop.phi = 0.0, 0.0, 0.0
            loop.w_v[:] = 0.0
            loop.w_u[:] = 0.0
            ref_nf = np.zeros(nb)
            continue
        inv_res = float(np.linalg.norm(
            ref_nf - _nonfundamental(meas.vel.coeffs, h)))
        branch.points.append(BranchPoint(
            omega=omega, a1=meas.a1, f_meas=meas.f_meas,
            phase_lag=meas.phase_lag, total_amp=meas.total_amp,
            a_star=a_star, measured=meas.disp, forcing=meas.drive,
            invasiveness=InvasivenessReport(inv_res, inv_res / a_star),
            converged=converged, wall_time_s=loop.t))
    return branch


def scbc_surface(plant, omega_grid, a_star_grid, **kwargs):
    """Collect S-curves over a frequency grid into a response surface."""
    omega_grid = np.asarray(sorted(omega_grid), dtype=float)
    a_grid = np.asarray(sorted(a_star_grid), dtype=float)
    f_s = np.full((omega_grid.size, a_grid.size), math.nan)
    a_s = np.full_like(f_s, math.nan)
    flags = np.zeros(f_s.shape, dtype=bool)
    branches = []
    sim_time = 0.0
    for i, om in enumerate(omega_grid):
        plant.reset()
        br = scbc(plant, om, a_grid, **kwargs)
        branches.append(br)
        for j, pt in enumerate(br.points):
            f_s[i, j] = pt.f_meas
            a_s[i, j] = pt.a1
            flags[i, j] = not pt.converged
        sim_time += br.points[-1].wall_time_s if br.points else 0.0
    grid = SurfaceGrid(omega_axis=omega_grid, a_star_axis=a_grid,
                       f_meas=f_s, a_meas=a_s, flags=flags,
                       meta={"method": "scbc", "sim_time_s": sim_time})
    return grid, branches

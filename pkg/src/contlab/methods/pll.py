"""Phase-locked-loop testing: a PID adapts the excitation frequency to
hold the phase of a chosen response harmonic at its target.

A schedule over the phase target at fixed forcing amplitude yields an
NFR; a schedule over the forcing amplitude at fixed target (typically
phase resonance) yields a backbone curve.
"""

import math

import numpy as np

from .. import _kernels
from ..branch import Branch, BranchPoint
from ..fourier import feedback_gain, wrap_phase_lag
from ..plant import STEPS_PER_PERIOD

TWO_PI = 2.0 * math.pi


class _PllLoop:
    def __init__(self, plant, f_amp, omega_init, gains, h, mu_bar,
                 steps_per_period, windup_factor=10.0,
                 omega_bounds=(0.05, 20.0), deriv_pole_factor=10.0):
        self.plant = plant
        self.f_amp = f_amp
        self.h = h
        self.mu_bar = mu_bar
        self.spp = steps_per_period
        self.kp, self.ki, self.kd = gains
        self.bias = omega_init
        self.windup = windup_factor * omega_init
        self.omega_lo = omega_bounds[0] * omega_init
        self.omega_hi = omega_bounds[1] * omega_init
        self.deriv_pole_factor = deriv_pole_factor
        self.w_x = np.zeros(2 * h + 1)
        self.q, self.v, self.t = (plant.state.q, plant.state.v,
                                  plant.state.t)
        self.phi = 0.0
        self.integ = 0.0
        self.e_prev = 0.0
        self.d_filt = 0.0
        self.omega = omega_init
        self.theta = 0.0
        self.clamped = False

    def run_periods(self, theta_star, lock_k, n_periods, record=False):
        """Advance the loop by n_periods of the current frequency."""
        p = self.plant.params
        dt = TWO_PI / self.omega / self.spp
        pole = self.deriv_pole_factor * self.omega
        d_alpha = dt * pole / (1.0 + dt * pole)
        n = n_periods * self.spp
        nq, nv = self.plant.noise_draws(n)
        mu = feedback_gain(self.omega)
        res = _kernels.pll_run(
            p.m, p.c, p.k, p.k2, p.k3,
            self.q, self.v, self.t, dt, n,
            self.phi, self.f_amp, theta_star, lock_k,
            self.kp, self.ki, self.kd,
            self.bias, self.integ, self.e_prev, self.d_filt, d_alpha,
            self.windup, self.omega_lo, self.omega_hi,
            self.h, mu, self.w_x,
            self.plant.blowup, 1 if record else 0, nq, nv)
        (self.q, self.v, self.t, self.phi, status, self.integ,
         self.e_prev, self.d_filt, self.omega, self.theta,
         max_q, clamped) = res[:12]
        self.clamped = self.clamped or bool(clamped)
        return status, max_q, res[13], res[14], res[15]


def pll(plant, f_amp=None, theta_star=None, lock_harmonic=1,
        gains=(0.05, 0.6, 0.0), omega_init=1.0, t_settle=50,
        settle_tol=1e-3, max_settle_factor=6, h=7, mu_bar=2.0,
        f_schedule=None, theta_schedule=None,
        steps_per_period=STEPS_PER_PERIOD):
    """Run a PLL schedule and emit one branch point per settled target.

    Exactly one of ``theta_schedule`` (fixed ``f_amp``) or
    ``f_schedule`` (fixed ``theta_star``) must be given.  A point is
    settled when the phase error stays within ``settle_tol`` over a full
    period after at least ``t_settle`` periods; a point that fails to
    settle within ``max_settle_factor * t_settle`` periods is flagged
    (loss of lock).
    """
    if gains[1] == 0.0:
        raise ValueError("the integral gain must be nonzero for lock")
    if (theta_schedule is None) == (f_schedule is None):
        raise ValueError("give exactly one of theta_schedule / f_schedule")
    if theta_schedule is not None and f_amp is None:
        raise ValueError("theta schedule needs a fixed f_amp")
    if f_schedule is not None and theta_star is None:
        raise ValueError("f schedule needs a fixed theta_star")
    points = ([(th, f_amp) for th in theta_schedule]
              if theta_schedule is not None
              else [(theta_star, f) for f in f_schedule])
    loop = _PllLoop(plant, points[0][1], omega_init, gains, h, mu_bar,
                    steps_per_period)
    branch = Branch(method="pll", meta={"lock_harmonic": lock_harmonic,
                                        "gains": list(gains),
                                        "settle_tol": settle_tol})
    for th_star, fa in points:
        loop.f_amp = fa
        status = 0
        settled = False
        waited = 0
        while waited < max_settle_factor * t_settle:
            n_run = t_settle if waited == 0 else max(t_settle // 4, 1)
            status, _, _, r_om, r_th = loop.run_periods(
                th_star, lock_harmonic, n_run, record=True)
            waited += n_run
            if status != 0:
                break
            tail = r_th[-steps_per_period:]
            err = np.abs(np.unwrap(tail) - th_star)
            om_tail = r_om[-steps_per_period:]
            flat = (np.max(om_tail) - np.min(om_tail)) / loop.omega
            if np.max(err) < settle_tol and flat < 1e-4:
                settled = True
                break
        if status != 0:
            branch.points.append(BranchPoint(
                omega=loop.omega, a1=math.nan, f_meas=fa,
                converged=False, wall_time_s=loop.t))
            break
        # measurement hold at the locked frequency
        status, max_q, r_t, r_om, r_th = loop.run_periods(
            th_star, lock_harmonic, 5, record=True)
        w = loop.w_x
        hh = loop.h
        a1 = math.sqrt(w[1] ** 2 + w[1 + hh] ** 2)
        a_k = math.sqrt(w[lock_harmonic] ** 2 + w[lock_harmonic + hh] ** 2)
        branch.points.append(BranchPoint(
            omega=float(np.mean(r_om[-steps_per_period:])), a1=a1,
            f_meas=fa,
            phase_lag=wrap_phase_lag(loop.theta if lock_harmonic == 1
                                     else math.atan2(w[1 + hh], w[1])),
            total_amp=max_q, converged=settled, wall_time_s=loop.t))
        branch.points[-1].measured = None
        branch.points[-1].a_star = None
        branch.meta.setdefault("lock", []).append(
            {"theta_star": th_star, "theta": loop.theta, "a_lock": a_k,
             "settled": settled})
    return branch

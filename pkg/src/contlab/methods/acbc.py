"""Arclength control-based continuation.

Derivative-free branch following: around each converged point an
ellipse is drawn in the (frequency, target amplitude) plane, and the
eccentric anomaly is swept in real time until the measured fundamental
drive amplitude crosses its target level.  The reference signal's
non-fundamental harmonics are tracked continuously by the adaptive
filter, keeping the control non-invasive.
"""

import math

import numpy as np

from .. import _kernels
from ..branch import Branch, BranchPoint
from ..control import InvasivenessReport
from ..fourier import feedback_gain
from ..plant import STEPS_PER_PERIOD
from .common import demod_hold

TWO_PI = 2.0 * math.pi

_LAWS = {"constant": 0, "integral": 1, "sign": 2}


def sweep_law(kind, rate, error):
    """Eccentric-anomaly rate for the chosen sweeping law."""
    if rate == 0.0:
        raise ValueError("sweep rate parameter must be nonzero")
    if kind == "constant":
        return rate
    if kind == "integral":
        return -rate * error
    if kind == "sign":
        return 0.0 if error == 0.0 else -rate * math.copysign(1.0, error)
    raise ValueError(f"unknown sweep law {kind!r}")


class NoIntersectionError(RuntimeError):
    """The ellipse sweep covered a full revolution without a sign change
    of the force error: step too large, or the branch loops."""


class _AcbcLoop:
    def __init__(self, plant, h, kd, mu, steps_per_period):
        self.plant = plant
        self.h = h
        self.kd = kd
        self.mu = mu
        self.spp = steps_per_period
        nb = 2 * h + 1
        self.w_v = np.zeros(nb)
        self.w_u = np.zeros(nb)
        self.q, self.v, self.t = (plant.state.q, plant.state.v,
                                  plant.state.t)
        self.phi = 0.0

    def hold(self, omega, a_star, n_periods, record=False):
        p = self.plant.params
        dt = TWO_PI / omega / self.spp
        n = n_periods * self.spp
        nq, nv = self.plant.noise_draws(n)
        res = _kernels.cbc_run(
            p.m, p.c, p.k, p.k2, p.k3, self.q, self.v, self.t, dt, n,
            omega, self.phi, self.h, self.mu, self.w_v, self.w_u,
            self.kd, a_star, 0.0, self.w_v,  # ref buffer unused in mode 1
            1, self.plant.blowup, 1 if record else 0, nq, nv,
            self.plant.vel_gain)
        phi_rec = self.phi
        self.q, self.v, self.t, self.phi = res[0], res[1], res[2], res[3]
        if res[4] != 0:
            raise RuntimeError(f"closed loop diverged at omega={omega:.4g}")
        if record:
            return demod_hold(res[8], res[9], res[10], res[11], omega,
                              phi_rec, self.h, self.spp)
        return None

    def f_hat(self):
        return math.sqrt(self.w_u[1] ** 2 + self.w_u[1 + self.h] ** 2)

    def sweep(self, center, alpha, d_omega, d_a, law, rate, f_star,
              stop_tol, max_periods):
        p = self.plant.params
        dt = TWO_PI / center[0] / self.spp
        n_max = max_periods * self.spp
        nq, nv = self.plant.noise_draws(n_max)
        res = _kernels.acbc_sweep(
            p.m, p.c, p.k, p.k2, p.k3, self.q, self.v, self.t, dt, n_max,
            self.phi, alpha, center[0], center[1], d_omega, d_a,
            _LAWS[law], rate, f_star, stop_tol, self.h, self.mu,
            self.w_v, self.w_u, self.kd, 0.0, self.plant.blowup,
            nq, nv, self.plant.vel_gain, 0, self.spp // 2)
        (self.q, self.v, self.t, self.phi, alpha, omega, a_star, status,
         n_used, f_err) = res[:10]
        if status == 1:
            raise RuntimeError(f"closed loop diverged at omega={omega:.4g}")
        if status == 2:
            raise NoIntersectionError(
                f"no force-level crossing on the ellipse at center "
                f"omega={center[0]:.4g}")
        return alpha, omega, a_star, status == 0, n_used


def acbc(plant, f_star, start, d_omega, d_a_star, law="integral", rate=1.0,
         rho=0.01, sigma=0.5, n_points=60, t_steady=8, h=15, kd=1.0,
         mu=None, omega_range=None, max_sweep_periods=400,
         max_rate_adaptations=5, measure_periods=5,
         steps_per_period=STEPS_PER_PERIOD):
    """Trace a constant-force branch with the ellipse-sweep procedure.

    ``start`` is (omega, a_star) in velocity-amplitude units; the start
    point is first conditioned until its realized force is within
    ``rho * f_star``.  Per point: predict on the ellipse at the previous
    anomaly, wait ``t_steady`` periods, sweep the anomaly by the chosen
    law until the force error falls under ``sigma * rho * f_star``, wait
    again, and accept if a fresh measurement satisfies the full
    tolerance; otherwise the sweep rate is halved and the correction
    retried.  Every accepted point's force is re-measured over
    ``measure_periods`` fresh periods.
    """
    if mu is None:
        mu = feedback_gain(start[0])
    loop = _AcbcLoop(plant, h, kd, mu, steps_per_period)
    branch = Branch(method="acbc", meta={
        "f_star": f_star, "rho": rho, "sigma": sigma, "law": law,
        "rate": rate, "d_omega": d_omega, "d_a_star": d_a_star,
        "flags": []})
    omega_n, a_n = start
    # condition the start point: rescale the target until the realized
    # force amplitude is inside the acceptance tolerance
    loop.hold(omega_n, a_n, t_steady)
    for _ in range(12):
        meas = loop.hold(omega_n, a_n, t_steady, record=True)
        if abs(meas.f_meas - f_star) <= rho * f_star:
            break
        a_n *= f_star / max(meas.f_meas, 1e-12 * f_star)
    else:
        raise RuntimeError("could not condition the ACBC start point")
    _append_point(branch, loop, meas, omega_n, a_n)

    alpha = 0.0 if rate > 0.0 else math.pi
    while len(branch.points) < n_points + 1:
        accepted = False
        rate_now = rate
        d_om_now, d_a_now = d_omega, d_a_star
        alpha_in = alpha
        for attempt in range(max_rate_adaptations + 1):
            if attempt > 0:
                # the sweep stopped off the branch (transient crossing or
                # a fold of the closed-loop response along the ellipse):
                # re-anchor on the last accepted point and retry slower,
                # shrinking the ellipse once slowing down alone failed
                loop.hold(omega_n, a_n, t_steady)
                rate_now *= 0.5
                if attempt >= 2:
                    d_om_now *= 0.5
                    d_a_now *= 0.5
                alpha = alpha_in
            omega_pred = omega_n + d_om_now * math.cos(alpha)
            a_pred = a_n + d_a_now * math.sin(alpha)
            loop.hold(omega_pred, a_pred, t_steady)
            alpha, omega_c, a_c, swept, _ = loop.sweep(
                (omega_n, a_n), alpha, d_om_now, d_a_now, law, rate_now,
                f_star, sigma * rho * f_star, max_sweep_periods)
            loop.hold(omega_c, a_c, t_steady)
            meas = loop.hold(omega_c, a_c, measure_periods, record=True)
            if abs(meas.f_meas - f_star) <= rho * f_star:
                accepted = True
                break
        if not accepted:
            branch.meta["flags"].append(
                {"omega": omega_c, "reason": "tolerance not met"})
            branch.meta["truncated"] = True
            break
        omega_n, a_n = omega_c, a_c
        _append_point(branch, loop, meas, omega_n, a_n)
        if omega_range is not None and not (
                min(omega_range) <= omega_n <= max(omega_range)):
            break
    return branch


def _append_point(branch, loop, meas, omega, a_star):
    h = loop.h
    nf_ref = loop.w_v.copy()
    nf_ref[1] = 0.0
    nf_ref[1 + h] = 0.0
    nf_meas = meas.vel.coeffs.copy()
    nf_meas[1] = 0.0
    nf_meas[1 + h] = 0.0
    resid = float(np.linalg.norm(nf_ref - nf_meas))
    branch.points.append(BranchPoint(
        omega=omega, a1=meas.a1, f_meas=meas.f_meas,
        phase_lag=meas.phase_lag, total_amp=meas.total_amp,
        a_star=a_star, measured=meas.disp, forcing=meas.drive,
        invasiveness=InvasivenessReport(resid, resid / max(a_star, 1e-12)),
        converged=True, wall_time_s=loop.t))

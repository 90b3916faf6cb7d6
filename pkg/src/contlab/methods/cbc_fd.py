"""Control-based continuation with finite-difference derivatives.

The zero problem lives in the Fourier coefficients of the controller
reference: adjust them (and the frequency) until the realized drive
matches a prescribed tonal profile.  Derivatives of the measured
residual are estimated by perturb-settle-remeasure finite differences
and fed to a Newton corrector on the pseudo-arclength hyperplane.
"""

import math

import numpy as np

from .. import _kernels
from ..branch import Branch, BranchPoint
from ..fourier import feedback_gain
from ..oracle import linear_frf
from ..plant import STEPS_PER_PERIOD
from .common import demod_hold

TWO_PI = 2.0 * math.pi


class _CbcPlant:
    """Closed-loop runner measuring the realized drive profile for a
    given full reference vector and frequency."""

    def __init__(self, plant, h, kd, mu_bar, t_steady, measure_periods,
                 steps_per_period):
        self.plant = plant
        self.h = h
        self.kd = kd
        self.mu_bar = mu_bar
        self.t_steady = t_steady
        self.measure_periods = measure_periods
        self.spp = steps_per_period
        nb = 2 * h + 1
        self.w_v = np.zeros(nb)
        self.w_u = np.zeros(nb)
        self.q, self.v, self.t = (plant.state.q, plant.state.v,
                                  plant.state.t)
        self.phi = 0.0
        self.sim_time = 0.0

    def realized_force(self, ref, omega, settle_periods=None):
        """Settle under the full reference and demodulate the drive."""
        p = self.plant.params
        dt = TWO_PI / omega / self.spp
        mu = feedback_gain(omega)
        n = (settle_periods or self.t_steady) * self.spp
        nq, nv = self.plant.noise_draws(n)
        res = _kernels.cbc_run(
            p.m, p.c, p.k, p.k2, p.k3, self.q, self.v, self.t, dt, n,
            omega, self.phi, self.h, mu, self.w_v, self.w_u,
            self.kd, 0.0, 0.0, ref, 2, self.plant.blowup, 0, nq, nv,
            self.plant.vel_gain)
        self.q, self.v, self.t, self.phi = res[0], res[1], res[2], res[3]
        if res[4] != 0:
            raise RuntimeError("closed loop diverged during CBC-FD settle")
        n = self.measure_periods * self.spp
        nq, nv = self.plant.noise_draws(n)
        res = _kernels.cbc_run(
            p.m, p.c, p.k, p.k2, p.k3, self.q, self.v, self.t, dt, n,
            omega, self.phi, self.h, mu, self.w_v, self.w_u,
            self.kd, 0.0, 0.0, ref, 2, self.plant.blowup, 1, nq, nv,
            self.plant.vel_gain)
        phi_rec = self.phi
        self.q, self.v, self.t, self.phi = res[0], res[1], res[2], res[3]
        meas = demod_hold(res[8], res[9], res[10], res[11], omega, phi_rec,
                          self.h, self.spp, self.measure_periods)
        return meas


def linear_reference_seed(params, kd, f_star, omega, h, vel_gain=1.0):
    """Reference coefficients realizing a tonal force on the linear
    plant: invert u = kd (x* - vel) with the closed-form velocity FRF."""
    amp, phase = linear_frf(params.m, params.c, params.k, 1.0, omega)
    # velocity response to unit force, as a complex gain on sin(wt)
    hv = vel_gain * omega * amp * np.exp(1j * (phase + 0.5 * math.pi))
    x_star = f_star * (1.0 + kd * hv) / kd
    ref = np.zeros(2 * h + 1)
    ref[1] = x_star.real
    ref[1 + h] = x_star.imag
    return ref


def fd_jacobian(runner, ref, omega, b_base, delta_rel=1e-3,
                delta_floor=1e-4, settle_periods=None, free_omega=True):
    """Finite-difference sensitivity of the measured force coefficients
    with respect to the reference coefficients (and frequency)."""
    nb = len(ref)
    cols = nb + (1 if free_omega else 0)
    jac = np.zeros((nb, cols))
    scale = max(float(np.max(np.abs(ref))), 1.0)
    for j in range(nb):
        delta = max(delta_rel * abs(ref[j]), delta_floor * scale)
        pert = ref.copy()
        pert[j] += delta
        meas = runner.realized_force(pert, omega, settle_periods)
        jac[:, j] = (meas.drive.coeffs - b_base) / delta
    if free_omega:
        delta = max(delta_rel * omega, 1e-6)
        meas = runner.realized_force(ref, omega + delta, settle_periods)
        jac[:, nb] = (meas.drive.coeffs - b_base) / delta
    return jac


def cbc_fd(plant, f_star, omega_range, step=0.1, min_step=1e-3,
           max_step=0.5, tol_b=None, newton_max_iter=6, h=3, kd=2.0,
           mu_bar=2.0, t_steady=30, fd_settle=None, measure_periods=5,
           fd_rel_step=1e-3, max_points=200,
           steps_per_period=STEPS_PER_PERIOD):
    """Trace an NFR by pseudo-arclength continuation of the measured
    zero problem (realized force = tonal profile of amplitude f_star).

    Newton non-convergence halves the step; underflow truncates the
    branch with a diagnostic, which this method is known to do near
    sharp resonance peaks.
    """
    tol_b = 0.01 * f_star if tol_b is None else tol_b
    runner = _CbcPlant(plant, h, kd, mu_bar, t_steady, measure_periods,
                       steps_per_period)
    nb = 2 * h + 1
    b_star = np.zeros(nb)
    b_star[1] = f_star
    omega = omega_range[0]
    ref = linear_reference_seed(plant.params, kd, f_star, omega, h,
                                plant.vel_gain)
    branch = Branch(method="cbc-fd", meta={"f_star": f_star, "tol_b": tol_b,
                                           "truncated": False})

    def correct(ref, omega, tangent=None, y_pred=None):
        """Newton on the measured residual; fixed omega when no tangent."""
        for it in range(newton_max_iter):
            meas = runner.realized_force(ref, omega)
            res = meas.drive.coeffs - b_star
            cons = 0.0
            if tangent is not None:
                y = np.append(ref, omega)
                cons = float(tangent @ (y - y_pred))
            if np.linalg.norm(res) <= tol_b and abs(cons) <= 1e-3 * max(omega, 1.0):
                return ref, omega, meas, True
            jac = fd_jacobian(runner, ref, omega, meas.drive.coeffs,
                              fd_rel_step, settle_periods=fd_settle,
                              free_omega=tangent is not None)
            if tangent is None:
                try:
                    dref = np.linalg.solve(jac, -res)
                except np.linalg.LinAlgError:
                    return ref, omega, meas, False
                ref = ref + dref
            else:
                aug = np.zeros((nb + 1, nb + 1))
                aug[:nb, :] = jac
                aug[nb, :] = tangent
                try:
                    dy = np.linalg.solve(aug, -np.append(res, cons))
                except np.linalg.LinAlgError:
                    return ref, omega, meas, False
                ref = ref + dy[:nb]
                omega = omega + dy[nb]
        meas = runner.realized_force(ref, omega)
        ok = np.linalg.norm(meas.drive.coeffs - b_star) <= tol_b
        return ref, omega, meas, ok

    ref, omega, meas, ok = correct(ref, omega)
    if not ok:
        raise RuntimeError("CBC-FD failed to converge at the start point")

    def to_point(meas, omega, a_star):
        return BranchPoint(
            omega=omega, a1=meas.a1, f_meas=meas.f_meas,
            phase_lag=meas.phase_lag, total_amp=meas.total_amp,
            a_star=a_star, measured=meas.disp, forcing=meas.drive,
            converged=True, wall_time_s=runner.t)

    branch.points.append(to_point(meas, omega, float(np.hypot(
        ref[1], ref[1 + h]))))
    y_prev = np.append(ref, omega)
    # first prediction: nudge omega toward the far end of the range
    direction = 1.0 if omega_range[1] >= omega_range[0] else -1.0
    tang = np.zeros(nb + 1)
    tang[nb] = direction
    ds = step
    lam_lo, lam_hi = min(omega_range), max(omega_range)
    while len(branch.points) < max_points:
        y_pred = y_prev + ds * tang
        ref_new, om_new, meas, ok = correct(
            y_pred[:nb].copy(), y_pred[nb], tangent=tang, y_pred=y_pred)
        if not ok:
            ds *= 0.5
            if ds < min_step:
                branch.meta["truncated"] = True
                branch.meta["truncation_reason"] = "step underflow"
                break
            continue
        y = np.append(ref_new, om_new)
        sec = y - y_prev
        nrm = np.linalg.norm(sec)
        if nrm > 0.0:
            new_tang = sec / nrm
            if new_tang @ tang >= 0.0:
                tang = new_tang
        y_prev = y
        ref, omega = ref_new, om_new
        branch.points.append(to_point(meas, omega, float(np.hypot(
            ref[1], ref[1 + h]))))
        ds = min(ds * 1.2, max_step)
        if omega > lam_hi or omega < lam_lo:
            break
    return branch

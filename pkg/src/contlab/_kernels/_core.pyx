# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled time-stepping kernels.

Expression-for-expression mirror of ``_pure.py``; see that module for
the shared conventions.  Compiled with -ffp-contract=off so both
backends produce identical trajectories.
"""

import numpy as np

from libc.math cimport sin, cos, atan2, sqrt, fabs, floor, exp, expm1, asin

BACKEND = "compiled"


cdef inline double _accel(double q, double v, double force, double m,
                          double c, double k, double k2, double k3) nogil:
    return (force - c * v - q * (k + q * (k2 + k3 * q))) / m


cdef inline (double, double) _rk4_hold(double q, double v, double force,
                                       double dt, double m, double c,
                                       double k, double k2, double k3) nogil:
    cdef double k1q, k1v, k2q, k2v, k3q, k3v, k4q, k4v, hq, hv
    k1q = v
    k1v = _accel(q, v, force, m, c, k, k2, k3)
    hq = q + 0.5 * dt * k1q
    hv = v + 0.5 * dt * k1v
    k2q = hv
    k2v = _accel(hq, hv, force, m, c, k, k2, k3)
    hq = q + 0.5 * dt * k2q
    hv = v + 0.5 * dt * k2v
    k3q = hv
    k3v = _accel(hq, hv, force, m, c, k, k2, k3)
    hq = q + dt * k3q
    hv = v + dt * k3v
    k4q = hv
    k4v = _accel(hq, hv, force, m, c, k, k2, k3)
    q = q + dt * (k1q + 2.0 * (k2q + k3q) + k4q) / 6.0
    v = v + dt * (k1v + 2.0 * (k2v + k3v) + k4v) / 6.0
    return q, v


cdef inline (double, double) _rk4_tonal(double q, double v, double dt,
                                        double m, double c, double k,
                                        double k2, double k3, double f0,
                                        double f1, double f2) nogil:
    cdef double k1q, k1v, k2q, k2v, k3q, k3v, k4q, k4v, hq, hv
    k1q = v
    k1v = _accel(q, v, f0, m, c, k, k2, k3)
    hq = q + 0.5 * dt * k1q
    hv = v + 0.5 * dt * k1v
    k2q = hv
    k2v = _accel(hq, hv, f1, m, c, k, k2, k3)
    hq = q + 0.5 * dt * k2q
    hv = v + 0.5 * dt * k2v
    k3q = hv
    k3v = _accel(hq, hv, f1, m, c, k, k2, k3)
    hq = q + dt * k3q
    hv = v + dt * k3v
    k4q = hv
    k4v = _accel(hq, hv, f2, m, c, k, k2, k3)
    q = q + dt * (k1q + 2.0 * (k2q + k3q) + k4q) / 6.0
    v = v + dt * (k1v + 2.0 * (k2v + k3v) + k4v) / 6.0
    return q, v


cdef inline void _fill_basis(double* basis, int h, double phi) nogil:
    cdef double s1 = sin(phi)
    cdef double c1 = cos(phi)
    cdef double sk, ck, sn_, cn_
    cdef int k
    basis[0] = 1.0
    basis[1] = s1
    basis[1 + h] = c1
    sk = s1
    ck = c1
    for k in range(2, h + 1):
        sn_ = sk * c1 + ck * s1
        cn_ = ck * c1 - sk * s1
        basis[k] = sn_
        basis[k + h] = cn_
        sk = sn_
        ck = cn_


cdef inline double _lms_update(double* w, double* basis, int n,
                               double sample, double mu_dt) nogil:
    cdef double synth = 0.0
    cdef double g
    cdef int j
    for j in range(n):
        synth += basis[j] * w[j]
    g = mu_dt * (sample - synth)
    for j in range(n):
        w[j] += g * basis[j]
    return synth


cdef inline (double, double) _sweep_phase(double tau, double f_amp,
                                          double omega0, double rate,
                                          int mode) nogil:
    if mode == 1:
        return omega0 * tau + 0.5 * rate * tau * tau, omega0 + rate * tau
    if mode == 2:
        if rate != 0.0:
            return omega0 * expm1(rate * tau) / rate, omega0 * exp(rate * tau)
        return omega0 * tau, omega0
    return omega0 * tau, omega0


def open_loop_run(
    double m, double c, double k, double k2, double k3,
    double q, double v, double t,
    double dt, long n_steps,
    double f_amp, double phi0,
    double omega0, double rate, int mode,
    int h, double mu_coeff, double[::1] w,
    double blowup,
    long record_stride,
    double[::1] noise_q, double[::1] noise_v,
    double vel_gain,
):
    cdef int nb = 2 * h + 1
    basis_arr = np.zeros(nb if nb > 0 else 1)
    cdef double[::1] basis = basis_arr
    cdef bint use_lms = h > 0
    cdef bint use_noise = noise_q.shape[0] > 0
    cdef long n_rec = (n_steps + record_stride - 1) // record_stride if record_stride > 0 else 0
    rec_t_arr = np.zeros(n_rec)
    rec_q_arr = np.zeros(n_rec)
    rec_v_arr = np.zeros(n_rec)
    rec_u_arr = np.zeros(n_rec)
    cdef double[::1] rec_t = rec_t_arr
    cdef double[::1] rec_q = rec_q_arr
    cdef double[::1] rec_v = rec_v_arr
    cdef double[::1] rec_u = rec_u_arr
    cdef int status = 0
    cdef double max_q = 0.0
    cdef double max_v = 0.0
    cdef double t0 = t
    cdef double phi = phi0
    cdef double omega = omega0
    cdef long irec = 0
    cdef long i = 0
    cdef double tau, dphi, drive, qs, vs, aq, av, dphi_m, dphi_e, f1, f2, tmp
    while i < n_steps:
        tau = i * dt
        dphi, omega = _sweep_phase(tau, f_amp, omega0, rate, mode)
        phi = phi0 + dphi
        drive = f_amp * sin(phi)
        if use_noise:
            qs = q + noise_q[i]
            vs = vel_gain * v + noise_v[i]
        else:
            qs = q
            vs = vel_gain * v
        if use_lms:
            _fill_basis(&basis[0], h, phi)
            _lms_update(&w[0], &basis[0], nb, qs, mu_coeff * omega * dt)
        if record_stride > 0 and i % record_stride == 0:
            rec_t[irec] = t0 + tau
            rec_q[irec] = qs
            rec_v[irec] = vs
            rec_u[irec] = drive
            irec += 1
        aq = fabs(qs)
        if aq > max_q:
            max_q = aq
        av = fabs(vs)
        if av > max_v:
            max_v = av
        dphi_m, tmp = _sweep_phase(tau + 0.5 * dt, f_amp, omega0, rate, mode)
        dphi_e, tmp = _sweep_phase(tau + dt, f_amp, omega0, rate, mode)
        f1 = f_amp * sin(phi0 + dphi_m)
        f2 = f_amp * sin(phi0 + dphi_e)
        q, v = _rk4_tonal(q, v, dt, m, c, k, k2, k3, drive, f1, f2)
        i += 1
        if fabs(q) > blowup or fabs(v) > blowup:
            status = 1
            break
    t = t0 + i * dt
    dphi, omega = _sweep_phase(i * dt, f_amp, omega0, rate, mode)
    phi = phi0 + dphi
    return (q, v, t, phi, omega, status, max_q, max_v, irec,
            rec_t_arr, rec_q_arr, rec_v_arr, rec_u_arr)


def cbc_run(
    double m, double c, double k, double k2, double k3,
    double q, double v, double t,
    double dt, long n_steps,
    double omega, double phi,
    int h, double mu,
    double[::1] w_v, double[::1] w_u,
    double kd, double a_star, double b_star,
    double[::1] ref_coeffs, int mode,
    double blowup,
    long record_stride,
    double[::1] noise_q, double[::1] noise_v,
    double vel_gain,
):
    cdef int nb = 2 * h + 1
    basis_arr = np.zeros(nb)
    cdef double[::1] basis = basis_arr
    cdef bint use_noise = noise_q.shape[0] > 0
    cdef long n_rec = (n_steps + record_stride - 1) // record_stride if record_stride > 0 else 0
    rec_t_arr = np.zeros(n_rec)
    rec_q_arr = np.zeros(n_rec)
    rec_v_arr = np.zeros(n_rec)
    rec_u_arr = np.zeros(n_rec)
    cdef double[::1] rec_t = rec_t_arr
    cdef double[::1] rec_q = rec_q_arr
    cdef double[::1] rec_v = rec_v_arr
    cdef double[::1] rec_u = rec_u_arr
    cdef int status = 0
    cdef double max_q = 0.0
    cdef double max_v = 0.0
    cdef double mu_dt = mu * dt
    cdef long irec = 0
    cdef long i = 0
    cdef double qs, vs, ref, drive, aq, av
    cdef double* src
    cdef int j
    while i < n_steps:
        if use_noise:
            qs = q + noise_q[i]
            vs = vel_gain * v + noise_v[i]
        else:
            qs = q
            vs = vel_gain * v
        _fill_basis(&basis[0], h, phi)
        _lms_update(&w_v[0], &basis[0], nb, vs, mu_dt)
        if mode == 2:
            ref = 0.0
            for j in range(nb):
                ref += basis[j] * ref_coeffs[j]
        else:
            ref = a_star * basis[1] + b_star * basis[1 + h]
            if mode == 1:
                src = &w_v[0]
            else:
                src = &ref_coeffs[0]
            ref += src[0]
            for j in range(2, h + 1):
                ref += basis[j] * src[j] + basis[j + h] * src[j + h]
        drive = kd * (ref - vs)
        _lms_update(&w_u[0], &basis[0], nb, drive, mu_dt)
        if record_stride > 0 and i % record_stride == 0:
            rec_t[irec] = t
            rec_q[irec] = qs
            rec_v[irec] = vs
            rec_u[irec] = drive
            irec += 1
        aq = fabs(qs)
        if aq > max_q:
            max_q = aq
        av = fabs(vs)
        if av > max_v:
            max_v = av
        q, v = _rk4_hold(q, v, drive, dt, m, c, k, k2, k3)
        phi += omega * dt
        t += dt
        i += 1
        if fabs(q) > blowup or fabs(v) > blowup:
            status = 1
            break
    return (q, v, t, phi, status, max_q, max_v, irec,
            rec_t_arr, rec_q_arr, rec_v_arr, rec_u_arr)


def acbc_sweep(
    double m, double c, double k, double k2, double k3,
    double q, double v, double t,
    double dt, long n_max,
    double phi, double alpha,
    double omega_c, double a_c, double d_omega, double d_a,
    int law, double rate,
    double f_star, double stop_tol,
    int h, double mu,
    double[::1] w_v, double[::1] w_u,
    double kd, double b_star,
    double blowup,
    double[::1] noise_q, double[::1] noise_v,
    double vel_gain,
    long record_stride,
    long stop_dwell,
):
    cdef int nb = 2 * h + 1
    basis_arr = np.zeros(nb)
    cdef double[::1] basis = basis_arr
    cdef bint use_noise = noise_q.shape[0] > 0
    cdef long n_rec = (n_max + record_stride - 1) // record_stride if record_stride > 0 else 0
    rec_alpha_arr = np.zeros(n_rec)
    rec_f_arr = np.zeros(n_rec)
    rec_omega_arr = np.zeros(n_rec)
    rec_astar_arr = np.zeros(n_rec)
    cdef double[::1] rec_alpha = rec_alpha_arr
    cdef double[::1] rec_f = rec_f_arr
    cdef double[::1] rec_omega = rec_omega_arr
    cdef double[::1] rec_astar = rec_astar_arr
    cdef int status = 3
    cdef double mu_dt = mu * dt
    cdef double alpha0 = alpha
    cdef int sign_changes = 0
    cdef int prev_sign = 0
    cdef long consec = 0
    cdef double omega = omega_c + d_omega * cos(alpha)
    cdef double a_star = a_c + d_a * sin(alpha)
    cdef double f_err = 0.0
    cdef long irec = 0
    cdef long i = 0
    cdef double f_hat, dalpha, qs, vs, ref, drive
    cdef int s, j
    while i < n_max:
        f_hat = sqrt(w_u[1] * w_u[1] + w_u[1 + h] * w_u[1 + h])
        f_err = f_hat - f_star
        if fabs(f_err) <= stop_tol:
            consec += 1
            if consec >= stop_dwell:
                status = 0
                break
        else:
            consec = 0
        s = 1 if f_err > 0.0 else (-1 if f_err < 0.0 else 0)
        if s != 0:
            if prev_sign != 0 and s != prev_sign:
                sign_changes += 1
            prev_sign = s
        if fabs(alpha - alpha0) > 6.911503837897545 and sign_changes == 0:
            status = 2
            break
        if law == 1:
            dalpha = -rate * f_err
        elif law == 2:
            dalpha = -rate if f_err > 0.0 else rate
        else:
            dalpha = rate
        alpha += dalpha * dt
        omega = omega_c + d_omega * cos(alpha)
        a_star = a_c + d_a * sin(alpha)
        if use_noise:
            qs = q + noise_q[i]
            vs = vel_gain * v + noise_v[i]
        else:
            qs = q
            vs = vel_gain * v
        _fill_basis(&basis[0], h, phi)
        _lms_update(&w_v[0], &basis[0], nb, vs, mu_dt)
        ref = a_star * basis[1] + b_star * basis[1 + h]
        ref += w_v[0]
        for j in range(2, h + 1):
            ref += basis[j] * w_v[j] + basis[j + h] * w_v[j + h]
        drive = kd * (ref - vs)
        _lms_update(&w_u[0], &basis[0], nb, drive, mu_dt)
        if record_stride > 0 and i % record_stride == 0:
            rec_alpha[irec] = alpha
            rec_f[irec] = f_hat
            rec_omega[irec] = omega
            rec_astar[irec] = a_star
            irec += 1
        q, v = _rk4_hold(q, v, drive, dt, m, c, k, k2, k3)
        phi += omega * dt
        t += dt
        i += 1
        if fabs(q) > blowup or fabs(v) > blowup:
            status = 1
            break
    return (q, v, t, phi, alpha, omega, a_star, status, i, f_err, irec,
            rec_alpha_arr, rec_f_arr, rec_omega_arr, rec_astar_arr)


def pll_run(
    double m, double c, double k, double k2, double k3,
    double q, double v, double t,
    double dt, long n_steps,
    double phi, double f_amp,
    double theta_star, int lock_k,
    double kp, double ki, double kd,
    double bias, double integ, double e_prev, double d_filt, double d_alpha,
    double windup, double omega_lo, double omega_hi,
    int h, double mu,
    double[::1] w_x,
    double blowup,
    long record_stride,
    double[::1] noise_q, double[::1] noise_v,
):
    cdef int nb = 2 * h + 1
    basis_arr = np.zeros(nb)
    cdef double[::1] basis = basis_arr
    cdef bint use_noise = noise_q.shape[0] > 0
    cdef long n_rec = (n_steps + record_stride - 1) // record_stride if record_stride > 0 else 0
    rec_t_arr = np.zeros(n_rec)
    rec_omega_arr = np.zeros(n_rec)
    rec_theta_arr = np.zeros(n_rec)
    cdef double[::1] rec_t = rec_t_arr
    cdef double[::1] rec_omega = rec_omega_arr
    cdef double[::1] rec_theta = rec_theta_arr
    cdef int status = 0
    cdef double max_q = 0.0
    cdef int clamped = 0
    cdef double mu_dt = mu * dt
    cdef double two_pi = 6.283185307179586
    cdef double omega = bias
    cdef double theta = 0.0
    cdef long irec = 0
    cdef long i = 0
    cdef double qs, e, lim, aq, f0, f1, f2
    while i < n_steps:
        if use_noise:
            qs = q + noise_q[i]
        else:
            qs = q
        _fill_basis(&basis[0], h, phi)
        _lms_update(&w_x[0], &basis[0], nb, qs, mu_dt)
        theta = atan2(w_x[lock_k + h], w_x[lock_k])
        e = theta - theta_star
        e = e - two_pi * floor(e / two_pi + 0.5)
        integ += e * dt
        if ki != 0.0:
            lim = windup / fabs(ki)
            if integ > lim:
                integ = lim
                clamped = 1
            elif integ < -lim:
                integ = -lim
                clamped = 1
        d_filt += d_alpha * ((e - e_prev) / dt - d_filt)
        e_prev = e
        omega = bias + kp * e + ki * integ + kd * d_filt
        if omega < omega_lo:
            omega = omega_lo
        elif omega > omega_hi:
            omega = omega_hi
        if record_stride > 0 and i % record_stride == 0:
            rec_t[irec] = t
            rec_omega[irec] = omega
            rec_theta[irec] = theta
            irec += 1
        aq = fabs(qs)
        if aq > max_q:
            max_q = aq
        f0 = f_amp * sin(phi)
        f1 = f_amp * sin(phi + 0.5 * omega * dt)
        f2 = f_amp * sin(phi + omega * dt)
        q, v = _rk4_tonal(q, v, dt, m, c, k, k2, k3, f0, f1, f2)
        phi += omega * dt
        t += dt
        i += 1
        if fabs(q) > blowup or fabs(v) > blowup:
            status = 1
            break
    return (q, v, t, phi, status, integ, e_prev, d_filt, omega, theta,
            max_q, clamped, irec, rec_t_arr, rec_omega_arr, rec_theta_arr)


def monodromy(
    double m, double c, double k, double k2, double k3,
    double[::1] coeffs, double omega,
    long n_steps, double c_extra,
):
    cdef int nb = coeffs.shape[0]
    cdef int h = (nb - 1) // 2
    basis_arr = np.zeros(nb)
    cdef double[::1] basis = basis_arr
    cdef double T = 6.283185307179586 / omega
    cdef double dt = T / n_steps
    cdef double ct = c + c_extra
    cdef double p11 = 1.0, p12 = 0.0, p21 = 0.0, p22 = 1.0
    cdef double am = -ct / m
    cdef long i
    cdef int col, j
    cdef double t0, a0, a1, a2, qo
    cdef double x, y, k1x, k1y, k2x, k2y, k3x, k3y, k4x, k4y, hx, hy

    for i in range(n_steps):
        t0 = i * dt
        # a21 at the three stage times
        _fill_basis(&basis[0], h, omega * t0)
        qo = 0.0
        for j in range(nb):
            qo += basis[j] * coeffs[j]
        a0 = -(k + qo * (2.0 * k2 + 3.0 * k3 * qo)) / m
        _fill_basis(&basis[0], h, omega * (t0 + 0.5 * dt))
        qo = 0.0
        for j in range(nb):
            qo += basis[j] * coeffs[j]
        a1 = -(k + qo * (2.0 * k2 + 3.0 * k3 * qo)) / m
        _fill_basis(&basis[0], h, omega * (t0 + dt))
        qo = 0.0
        for j in range(nb):
            qo += basis[j] * coeffs[j]
        a2 = -(k + qo * (2.0 * k2 + 3.0 * k3 * qo)) / m
        for col in range(2):
            if col == 0:
                x = p11
                y = p21
            else:
                x = p12
                y = p22
            k1x = y
            k1y = a0 * x + am * y
            hx = x + 0.5 * dt * k1x
            hy = y + 0.5 * dt * k1y
            k2x = hy
            k2y = a1 * hx + am * hy
            hx = x + 0.5 * dt * k2x
            hy = y + 0.5 * dt * k2y
            k3x = hy
            k3y = a1 * hx + am * hy
            hx = x + dt * k3x
            hy = y + dt * k3y
            k4x = hy
            k4y = a2 * hx + am * hy
            x = x + dt * (k1x + 2.0 * (k2x + k3x) + k4x) / 6.0
            y = y + dt * (k1y + 2.0 * (k2y + k3y) + k4y) / 6.0
            if col == 0:
                p11 = x
                p21 = y
            else:
                p12 = x
                p22 = y
    return p11, p12, p21, p22

"""Pure-Python twin of the compiled time-stepping kernels.

Every function here mirrors its Cython counterpart in ``_core.pyx``
expression for expression so that both backends produce identical
trajectories.  The compiled module is preferred at import time; this one
is the fallback and the executable reference for the equivalence tests.

Conventions shared by all kernels:

* plant state is (q, v, t) for m*q'' + c*v + k*q + k2*q^2 + k3*q^3 = F
* harmonic basis at phase ``phi`` is [1, sin(phi)..sin(h phi),
  cos(phi)..cos(h phi)], length 2h+1
* LMS update: w <- w + mu*dt*(sample - h.w) * h
* noise arrays (one entry per step) are added to the *sensed* channels
  only; pass zero-length arrays to disable
* status codes: 0 ok, 1 diverged, 2 no ellipse intersection, 3 step
  budget exhausted
"""

import math

import numpy as np

BACKEND = "pure"


def _accel(q, v, force, m, c, k, k2, k3):
    return (force - c * v - q * (k + q * (k2 + k3 * q))) / m


def _rk4_hold(q, v, force, dt, m, c, k, k2, k3):
    # one classical RK4 step with the drive held constant over the step
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


def _rk4_tonal(q, v, dt, m, c, k, k2, k3, f0, f1, f2):
    # RK4 step with drive evaluated at the stage times: f0 at t, f1 at
    # t+dt/2, f2 at t+dt (continuous forcing)
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


def _fill_basis(basis, h, phi):
    # basis[0]=1, basis[k]=sin(k phi), basis[h+k]=cos(k phi), by recurrence
    s1 = math.sin(phi)
    c1 = math.cos(phi)
    basis[0] = 1.0
    basis[1] = s1
    basis[1 + h] = c1
    sk = s1
    ck = c1
    for k in range(2, h + 1):
        sn = sk * c1 + ck * s1
        cn = ck * c1 - sk * s1
        basis[k] = sn
        basis[k + h] = cn
        sk = sn
        ck = cn


def _lms_update(w, basis, n, sample, mu_dt):
    synth = 0.0
    for j in range(n):
        synth += basis[j] * w[j]
    g = mu_dt * (sample - synth)
    for j in range(n):
        w[j] += g * basis[j]
    return synth


def _sweep_phase(tau, f_amp, omega0, rate, mode):
    # returns (phase increment from tau=0, instantaneous omega)
    if mode == 1:
        return omega0 * tau + 0.5 * rate * tau * tau, omega0 + rate * tau
    if mode == 2:
        if rate != 0.0:
            return omega0 * math.expm1(rate * tau) / rate, omega0 * math.exp(rate * tau)
        return omega0 * tau, omega0
    return omega0 * tau, omega0


def open_loop_run(
    m, c, k, k2, k3,
    q, v, t,
    dt, n_steps,
    f_amp, phi0,
    omega0, rate, mode,
    h, mu_coeff, w,
    blowup,
    record_stride,
    noise_q, noise_v,
    vel_gain,
):
    """Open-loop segment: tonal or swept sine drive, optional LMS on the
    sensed displacement at the instantaneous sweep phase.

    Returns (q, v, t, phi_end, omega_end, status, max_q, max_v, n_rec,
    rec_t, rec_q, rec_v, rec_u).
    """
    nb = 2 * h + 1
    basis = np.zeros(nb)
    use_lms = h > 0
    use_noise = len(noise_q) > 0
    n_rec = (n_steps + record_stride - 1) // record_stride if record_stride > 0 else 0
    rec_t = np.zeros(n_rec)
    rec_q = np.zeros(n_rec)
    rec_v = np.zeros(n_rec)
    rec_u = np.zeros(n_rec)
    status = 0
    max_q = 0.0
    max_v = 0.0
    t0 = t
    phi = phi0
    omega = omega0
    irec = 0
    i = 0
    while i < n_steps:
        tau = i * dt
        dphi, omega = _sweep_phase(tau, f_amp, omega0, rate, mode)
        phi = phi0 + dphi
        drive = f_amp * math.sin(phi)
        if use_noise:
            qs = q + noise_q[i]
            vs = vel_gain * v + noise_v[i]
        else:
            qs = q
            vs = vel_gain * v
        if use_lms:
            _fill_basis(basis, h, phi)
            _lms_update(w, basis, nb, qs, mu_coeff * omega * dt)
        if record_stride > 0 and i % record_stride == 0:
            rec_t[irec] = t0 + tau
            rec_q[irec] = qs
            rec_v[irec] = vs
            rec_u[irec] = drive
            irec += 1
        aq = abs(qs)
        if aq > max_q:
            max_q = aq
        av = abs(vs)
        if av > max_v:
            max_v = av
        dphi_m, _ = _sweep_phase(tau + 0.5 * dt, f_amp, omega0, rate, mode)
        dphi_e, _ = _sweep_phase(tau + dt, f_amp, omega0, rate, mode)
        f1 = f_amp * math.sin(phi0 + dphi_m)
        f2 = f_amp * math.sin(phi0 + dphi_e)
        q, v = _rk4_tonal(q, v, dt, m, c, k, k2, k3, drive, f1, f2)
        i += 1
        if abs(q) > blowup or abs(v) > blowup:
            status = 1
            break
    t = t0 + i * dt
    dphi, omega = _sweep_phase(i * dt, f_amp, omega0, rate, mode)
    phi = phi0 + dphi
    return (q, v, t, phi, omega, status, max_q, max_v, irec,
            rec_t, rec_q, rec_v, rec_u)


def cbc_run(
    m, c, k, k2, k3,
    q, v, t,
    dt, n_steps,
    omega, phi,
    h, mu,
    w_v, w_u,
    kd, a_star, b_star,
    ref_coeffs, mode,
    blowup,
    record_stride,
    noise_q, noise_v,
    vel_gain,
):
    """Closed-loop hold for the CBC family (velocity feedback, sampled
    drive held over each step).

    mode 0: reference = a*,b* fundamental + fixed non-fundamentals from
    ``ref_coeffs``; mode 1: non-fundamentals tracked live from the
    velocity LMS; mode 2: full reference vector = ``ref_coeffs``.

    Returns (q, v, t, phi, status, max_q, max_v, n_rec, rec_t, rec_q,
    rec_v, rec_u).
    """
    nb = 2 * h + 1
    basis = np.zeros(nb)
    use_noise = len(noise_q) > 0
    n_rec = (n_steps + record_stride - 1) // record_stride if record_stride > 0 else 0
    rec_t = np.zeros(n_rec)
    rec_q = np.zeros(n_rec)
    rec_v = np.zeros(n_rec)
    rec_u = np.zeros(n_rec)
    status = 0
    max_q = 0.0
    max_v = 0.0
    mu_dt = mu * dt
    irec = 0
    i = 0
    while i < n_steps:
        if use_noise:
            qs = q + noise_q[i]
            vs = vel_gain * v + noise_v[i]
        else:
            qs = q
            vs = vel_gain * v
        _fill_basis(basis, h, phi)
        _lms_update(w_v, basis, nb, vs, mu_dt)
        if mode == 2:
            ref = 0.0
            for j in range(nb):
                ref += basis[j] * ref_coeffs[j]
        else:
            ref = a_star * basis[1] + b_star * basis[1 + h]
            src = w_v if mode == 1 else ref_coeffs
            ref += src[0]
            for j in range(2, h + 1):
                ref += basis[j] * src[j] + basis[j + h] * src[j + h]
        drive = kd * (ref - vs)
        _lms_update(w_u, basis, nb, drive, mu_dt)
        if record_stride > 0 and i % record_stride == 0:
            rec_t[irec] = t
            rec_q[irec] = qs
            rec_v[irec] = vs
            rec_u[irec] = drive
            irec += 1
        aq = abs(qs)
        if aq > max_q:
            max_q = aq
        av = abs(vs)
        if av > max_v:
            max_v = av
        q, v = _rk4_hold(q, v, drive, dt, m, c, k, k2, k3)
        phi += omega * dt
        t += dt
        i += 1
        if abs(q) > blowup or abs(v) > blowup:
            status = 1
            break
    return (q, v, t, phi, status, max_q, max_v, irec,
            rec_t, rec_q, rec_v, rec_u)


def acbc_sweep(
    m, c, k, k2, k3,
    q, v, t,
    dt, n_max,
    phi, alpha,
    omega_c, a_c, d_omega, d_a,
    law, rate,
    f_star, stop_tol,
    h, mu,
    w_v, w_u,
    kd, b_star,
    blowup,
    noise_q, noise_v,
    vel_gain,
    record_stride,
    stop_dwell,
):
    """Correction phase of the ellipse-sweep continuation: advance the
    eccentric anomaly by the chosen law until the measured fundamental
    drive amplitude is within ``stop_tol`` of the target.

    Returns (q, v, t, phi, alpha, omega, a_star, status, n_used, f_err,
    n_rec, rec_alpha, rec_f, rec_omega, rec_astar).
    """
    nb = 2 * h + 1
    basis = np.zeros(nb)
    use_noise = len(noise_q) > 0
    n_rec = (n_max + record_stride - 1) // record_stride if record_stride > 0 else 0
    rec_alpha = np.zeros(n_rec)
    rec_f = np.zeros(n_rec)
    rec_omega = np.zeros(n_rec)
    rec_astar = np.zeros(n_rec)
    status = 3
    mu_dt = mu * dt
    alpha0 = alpha
    sign_changes = 0
    prev_sign = 0
    consec = 0
    omega = omega_c + d_omega * math.cos(alpha)
    a_star = a_c + d_a * math.sin(alpha)
    f_err = 0.0
    irec = 0
    i = 0
    while i < n_max:
        f_hat = math.sqrt(w_u[1] * w_u[1] + w_u[1 + h] * w_u[1 + h])
        f_err = f_hat - f_star
        if abs(f_err) <= stop_tol:
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
        if abs(alpha - alpha0) > 6.911503837897545 and sign_changes == 0:
            # full revolution (2 pi + 10%) with no sign change: the
            # ellipse does not cross the target level set
            status = 2
            break
        if law == 1:
            dalpha = -rate * f_err
        elif law == 2:
            dalpha = -rate if f_err > 0.0 else rate
        else:
            dalpha = rate
        alpha += dalpha * dt
        omega = omega_c + d_omega * math.cos(alpha)
        a_star = a_c + d_a * math.sin(alpha)
        if use_noise:
            qs = q + noise_q[i]
            vs = vel_gain * v + noise_v[i]
        else:
            qs = q
            vs = vel_gain * v
        _fill_basis(basis, h, phi)
        _lms_update(w_v, basis, nb, vs, mu_dt)
        ref = a_star * basis[1] + b_star * basis[1 + h]
        ref += w_v[0]
        for j in range(2, h + 1):
            ref += basis[j] * w_v[j] + basis[j + h] * w_v[j + h]
        drive = kd * (ref - vs)
        _lms_update(w_u, basis, nb, drive, mu_dt)
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
        if abs(q) > blowup or abs(v) > blowup:
            status = 1
            break
    return (q, v, t, phi, alpha, omega, a_star, status, i, f_err, irec,
            rec_alpha, rec_f, rec_omega, rec_astar)


def pll_run(
    m, c, k, k2, k3,
    q, v, t,
    dt, n_steps,
    phi, f_amp,
    theta_star, lock_k,
    kp, ki, kd,
    bias, integ, e_prev, d_filt, d_alpha,
    windup, omega_lo, omega_hi,
    h, mu,
    w_x,
    blowup,
    record_stride,
    noise_q, noise_v,
):
    """Phase-locked-loop segment: the PID adapts the excitation frequency
    to pull the phase of response harmonic ``lock_k`` to ``theta_star``.

    Returns (q, v, t, phi, status, integ, e_prev, d_filt, omega, theta,
    max_q, clamped, n_rec, rec_t, rec_omega, rec_theta).
    """
    nb = 2 * h + 1
    basis = np.zeros(nb)
    use_noise = len(noise_q) > 0
    n_rec = (n_steps + record_stride - 1) // record_stride if record_stride > 0 else 0
    rec_t = np.zeros(n_rec)
    rec_omega = np.zeros(n_rec)
    rec_theta = np.zeros(n_rec)
    status = 0
    max_q = 0.0
    clamped = 0
    mu_dt = mu * dt
    two_pi = 6.283185307179586
    omega = bias
    theta = 0.0
    irec = 0
    i = 0
    while i < n_steps:
        if use_noise:
            qs = q + noise_q[i]
        else:
            qs = q
        _fill_basis(basis, h, phi)
        _lms_update(w_x, basis, nb, qs, mu_dt)
        theta = math.atan2(w_x[lock_k + h], w_x[lock_k])
        e = theta - theta_star
        e = e - two_pi * math.floor(e / two_pi + 0.5)
        integ += e * dt
        if ki != 0.0:
            lim = windup / abs(ki)
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
        aq = abs(qs)
        if aq > max_q:
            max_q = aq
        f0 = f_amp * math.sin(phi)
        f1 = f_amp * math.sin(phi + 0.5 * omega * dt)
        f2 = f_amp * math.sin(phi + omega * dt)
        q, v = _rk4_tonal(q, v, dt, m, c, k, k2, k3, f0, f1, f2)
        phi += omega * dt
        t += dt
        i += 1
        if abs(q) > blowup or abs(v) > blowup:
            status = 1
            break
    return (q, v, t, phi, status, integ, e_prev, d_filt, omega, theta,
            max_q, clamped, irec, rec_t, rec_omega, rec_theta)


def monodromy(
    m, c, k, k2, k3,
    coeffs, omega,
    n_steps, c_extra,
):
    """Principal fundamental matrix of the variational equation over one
    period of the orbit synthesized from ``coeffs`` (length 2h+1).

    ``c_extra`` adds viscous damping, modelling velocity-difference
    feedback around the same orbit.  Returns (p11, p12, p21, p22).
    """
    nb = len(coeffs)
    h = (nb - 1) // 2
    basis = np.zeros(nb)
    T = 6.283185307179586 / omega
    dt = T / n_steps
    ct = c + c_extra
    p11 = 1.0
    p12 = 0.0
    p21 = 0.0
    p22 = 1.0

    def a21_at(tt):
        _fill_basis(basis, h, omega * tt)
        qo = 0.0
        for j in range(nb):
            qo += basis[j] * coeffs[j]
        return -(k + qo * (2.0 * k2 + 3.0 * k3 * qo)) / m

    for i in range(n_steps):
        t0 = i * dt
        a0 = a21_at(t0)
        a1 = a21_at(t0 + 0.5 * dt)
        a2 = a21_at(t0 + dt)
        am = -ct / m
        # advance both columns of Phi through one RK4 step
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

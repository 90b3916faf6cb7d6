"""Harmonic-balance reference engine.

Discretizes the oscillator ODE in a truncated Fourier basis with an
alternating frequency/time treatment of the polynomial stiffness,
corrects with Newton iterations, continues branches in frequency or
forcing amplitude, and classifies stability from Floquet multipliers
of the variational problem.

This module is the trusted ground truth for the virtual experiments,
so Jacobians are analytical throughout.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .branch import Branch, BranchPoint
from .fourier import HarmonicVector, basis_matrix, wrap_phase_lag
from .plant import STEPS_PER_PERIOD, DuffingParams

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


class NonConvergenceError(RuntimeError):
    """Newton correction ran out of iterations; carries the last iterate."""

    def __init__(self, msg, w=None, omega=None, residual=None):
        super().__init__(msg)
        self.w = w
        self.omega = omega
        self.residual = residual


@dataclass(frozen=True)
class HbmProblem:
    """Algebraic system for one oscillator under tonal forcing."""

    params: DuffingParams
    h: int = 15
    forcing_amp: float = 1.0
    forcing_harmonic: int = 1

    def __post_init__(self):
        if self.h < 1:
            raise ValueError("need at least one harmonic")
        if not 1 <= self.forcing_harmonic <= self.h:
            raise ValueError("forcing harmonic outside basis")

    @property
    def n(self):
        return 2 * self.h + 1


@dataclass
class ContinuationSettings:
    step: float = 0.05
    min_step: float = 1e-5
    max_step: float = 0.2
    newton_tol: float = 1e-10
    newton_max_iter: int = 20
    predictor: str = "tangent"          # or "secant"
    corrector: str = "pseudo-arclength"  # or "natural", "arclength-sphere"
    param: str = "omega"                 # or "forcing_amp"
    max_points: int = 2000
    stability_margin: float = 1e-6
    floquet_steps: int = STEPS_PER_PERIOD
    compute_stability: bool = True
    max_turn_cos: float = 0.4  # reject a step when the tangent rotates more

    def __post_init__(self):
        if not 0.0 < self.min_step <= self.step <= self.max_step:
            raise ValueError("require 0 < min_step <= step <= max_step")
        if self.newton_tol <= 0.0:
            raise ValueError("newton_tol must be positive")
        if self.predictor not in ("tangent", "secant"):
            raise ValueError(f"unknown predictor {self.predictor!r}")
        if self.corrector not in ("natural", "pseudo-arclength", "arclength-sphere"):
            raise ValueError(f"unknown corrector {self.corrector!r}")
        if self.param not in ("omega", "forcing_amp"):
            raise ValueError(f"unknown continuation parameter {self.param!r}")


class _Aft:
    """Cached alternating frequency/time operators for a harmonic count."""

    _cache = {}

    def __new__(cls, h):
        if h not in cls._cache:
            obj = super().__new__(cls)
            n_t = max(4 * h + 4, 64)
            phi = TWO_PI * np.arange(n_t) / n_t
            obj.h = h
            obj.n_t = n_t
            obj.E = basis_matrix(h, phi)
            P = np.empty((2 * h + 1, n_t))
            P[0, :] = 1.0 / n_t
            ks = np.arange(1, h + 1)
            P[1:h + 1, :] = 2.0 / n_t * np.sin(np.outer(ks, phi))
            P[h + 1:, :] = 2.0 / n_t * np.cos(np.outer(ks, phi))
            obj.P = P
            cls._cache[h] = obj
        return cls._cache[h]


def _apply_d1(w, h, omega):
    out = np.zeros_like(w)
    ks = np.arange(1, h + 1)
    out[1:h + 1] = -ks * omega * w[h + 1:]
    out[h + 1:] = ks * omega * w[1:h + 1]
    return out


def _apply_d2(w, h, omega):
    out = np.zeros_like(w)
    ks = np.arange(1, h + 1)
    out[1:h + 1] = -(ks * omega) ** 2 * w[1:h + 1]
    out[h + 1:] = -(ks * omega) ** 2 * w[h + 1:]
    return out


def _d1_matrix(h, omega):
    n = 2 * h + 1
    mat = np.zeros((n, n))
    for k in range(1, h + 1):
        mat[k, h + k] = -k * omega
        mat[h + k, k] = k * omega
    return mat


def _forcing_vector(problem):
    f = np.zeros(problem.n)
    f[problem.forcing_harmonic] = problem.forcing_amp
    return f


def hbm_residual(coeffs, omega, problem, forcing_amp=None):
    """Galerkin residual of the oscillator ODE at the given coefficients.

    The polynomial stiffness terms are evaluated on an oversampled time
    grid and projected back onto the basis.
    """
    w = np.asarray(coeffs, dtype=float)
    if w.shape != (problem.n,):
        raise ValueError(f"expected {problem.n} coefficients")
    p = problem.params
    aft = _Aft(problem.h)
    q = aft.E @ w
    g = p.k2 * q * q + p.k3 * q ** 3
    res = (p.m * _apply_d2(w, problem.h, omega)
           + p.c * _apply_d1(w, problem.h, omega)
           + p.k * w + aft.P @ g)
    f_amp = problem.forcing_amp if forcing_amp is None else forcing_amp
    res[problem.forcing_harmonic] -= f_amp
    return res


def hbm_jacobian(coeffs, omega, problem):
    """Analytical d(residual)/d(coeffs) via the AFT chain rule."""
    w = np.asarray(coeffs, dtype=float)
    p = problem.params
    h = problem.h
    aft = _Aft(h)
    q = aft.E @ w
    gprime = 2.0 * p.k2 * q + 3.0 * p.k3 * q * q
    jac = aft.P @ (gprime[:, None] * aft.E)
    jac += p.k * np.eye(problem.n)
    jac += p.c * _d1_matrix(h, omega)
    ks = np.arange(1, h + 1)
    d2 = np.zeros(problem.n)
    d2[1:h + 1] = -(ks * omega) ** 2
    d2[h + 1:] = -(ks * omega) ** 2
    jac += p.m * np.diag(d2)
    return jac


def hbm_domega(coeffs, omega, problem):
    """Analytical d(residual)/d(omega)."""
    w = np.asarray(coeffs, dtype=float)
    p = problem.params
    return (2.0 * p.m / omega * _apply_d2(w, problem.h, omega)
            + p.c / omega * _apply_d1(w, problem.h, omega))


def initial_guess(problem, omega):
    """Single-harmonic seed: solve the scalar cubic for the fundamental."""
    p = problem.params
    # fundamental balance with response a*sin: (k - m w^2) a + (3/4) k3 a^3 = f
    a = problem.forcing_amp / max(abs(p.k - p.m * omega ** 2), 1e-3 * p.k)
    for _ in range(60):
        fval = (p.k - p.m * omega ** 2) * a + 0.75 * p.k3 * a ** 3 - problem.forcing_amp
        fder = (p.k - p.m * omega ** 2) + 2.25 * p.k3 * a ** 2
        if abs(fder) < 1e-12:
            break
        step = fval / fder
        a -= step
        if abs(step) < 1e-14 * max(1.0, abs(a)):
            break
    w = np.zeros(problem.n)
    w[problem.forcing_harmonic] = a
    return w


def newton_correct(problem, coeffs, omega, settings=None, constraint=None):
    """Newton correction of an HBM point.

    ``constraint`` is None for a fixed-frequency (natural) solve, or a
    tuple ``("hyperplane", normal, y_pred)`` / ``("sphere", y_prev, ds)``
    for the arclength variants, in which case omega is free and the
    constraint closes the system.  Returns (coeffs, omega, n_iter).
    """
    settings = settings or ContinuationSettings()
    w = np.asarray(coeffs, dtype=float).copy()
    lam_name = settings.param

    def lam_get():
        return omega if lam_name == "omega" else f_amp

    f_amp = problem.forcing_amp
    for it in range(settings.newton_max_iter + 1):
        res = hbm_residual(w, omega, problem, forcing_amp=f_amp)
        if constraint is None:
            gval = 0.0
        elif constraint[0] == "hyperplane":
            _, normal, y_pred = constraint
            y = np.append(w, lam_get())
            gval = float(normal @ (y - y_pred))
        else:
            _, y_prev, ds = constraint
            y = np.append(w, lam_get())
            gval = float((y - y_prev) @ (y - y_prev) - ds * ds)
        if max(np.max(np.abs(res)), abs(gval)) < settings.newton_tol:
            return w, (omega if lam_name == "omega" else f_amp), it
        if it == settings.newton_max_iter:
            break
        jac_w = hbm_jacobian(w, omega, problem)
        if constraint is None:
            try:
                dw = np.linalg.solve(jac_w, -res)
            except np.linalg.LinAlgError:
                raise NonConvergenceError("singular Jacobian in natural solve",
                                          w=w, omega=omega, residual=res)
            w += dw
            continue
        if lam_name == "omega":
            dlam = hbm_domega(w, omega, problem)
        else:
            dlam = np.zeros(problem.n)
            dlam[problem.forcing_harmonic] = -1.0
        n = problem.n
        aug = np.zeros((n + 1, n + 1))
        aug[:n, :n] = jac_w
        aug[:n, n] = dlam
        if constraint[0] == "hyperplane":
            aug[n, :] = constraint[1]
        else:
            y = np.append(w, lam_get())
            aug[n, :] = 2.0 * (y - constraint[1])
        rhs = -np.append(res, gval)
        try:
            dy = np.linalg.solve(aug, rhs)
        except np.linalg.LinAlgError:
            raise NonConvergenceError("singular augmented Jacobian",
                                      w=w, omega=omega, residual=res)
        w += dy[:n]
        if lam_name == "omega":
            omega += dy[n]
        else:
            f_amp += dy[n]
    raise NonConvergenceError(
        f"no convergence in {settings.newton_max_iter} iterations",
        w=w, omega=omega, residual=res)


def floquet_multipliers(coeffs, omega, params, steps_per_period=STEPS_PER_PERIOD,
                        c_extra=0.0, margin=1e-6):
    """Floquet multipliers of the orbit and its stability flag.

    Integrates the variational equation alongside the synthesized orbit
    over one period; ``c_extra`` models extra viscous damping from a
    velocity-difference controller around the same orbit.
    """
    p = params
    p11, p12, p21, p22 = _kernels.monodromy(
        p.m, p.c, p.k, p.k2, p.k3,
        np.asarray(coeffs, dtype=float), omega, steps_per_period, c_extra)
    mults = np.linalg.eigvals(np.array([[p11, p12], [p21, p22]]))
    stable = bool(np.max(np.abs(mults)) <= 1.0 + margin)
    return mults, stable


def synth_orbit_state(coeffs, omega, t=0.0):
    """Displacement and velocity of an HBM orbit at time t."""
    wv = HarmonicVector((len(coeffs) - 1) // 2, coeffs)
    q = float(wv.synth(omega * t)[0])
    v = float(wv.derivative(omega).synth(omega * t)[0])
    return q, v


def _branch_point(problem, w, omega, settings):
    h = problem.h
    wv = HarmonicVector(h, w.copy())
    a1 = wv.amp(1)
    phase = wrap_phase_lag(math.atan2(wv.cos(1), wv.sin(1)))
    dense = wv.synth(TWO_PI * np.arange(2048) / 2048)
    if settings.compute_stability:
        mults, stable = floquet_multipliers(
            w, omega, problem.params, settings.floquet_steps,
            margin=settings.stability_margin)
        mults = tuple(mults)
    else:
        mults, stable = None, None
    return BranchPoint(
        omega=omega, a1=a1, f_meas=problem.forcing_amp,
        phase_lag=phase, total_amp=float(np.max(np.abs(dense))),
        measured=wv, converged=True, open_loop_stable=stable,
        coeffs=w.copy(), multipliers=mults)


def _tangent(problem, w, omega, settings):
    """Unit null vector of the bordered Jacobian in (w, lambda)."""
    jac_w = hbm_jacobian(w, omega, problem)
    if settings.param == "omega":
        dlam = hbm_domega(w, omega, problem)
    else:
        dlam = np.zeros(problem.n)
        dlam[problem.forcing_harmonic] = -1.0
    # solve J dw = -dlam; tangent = [dw, 1] normalized
    try:
        dw = np.linalg.solve(jac_w, -dlam)
        tang = np.append(dw, 1.0)
    except np.linalg.LinAlgError:
        # at a fold the w-block is singular; use SVD null space of [J | dlam]
        full = np.hstack([jac_w, dlam[:, None]])
        _, _, vt = np.linalg.svd(full)
        tang = vt[-1]
    return tang / np.linalg.norm(tang)


def continue_branch(problem, settings=None, start=None, lam_range=None):
    """Trace a branch of periodic solutions over the parameter range.

    ``start`` is an optional (coeffs, omega) seed; by default a
    single-harmonic guess at the start of ``lam_range`` is corrected
    first.  The step length is halved on correction failure and grown
    1.2x on easy convergence, clamped to the configured bounds; if it
    underflows the branch is truncated and flagged in ``meta``.
    """
    settings = settings or ContinuationSettings()
    if lam_range is None:
        raise ValueError("lam_range (start, end) is required")
    lam_lo, lam_hi = min(lam_range), max(lam_range)
    lam0 = lam_range[0]

    if settings.param == "omega":
        omega = lam0
        f_amp = problem.forcing_amp
        w = initial_guess(problem, omega) if start is None else np.array(start[0], dtype=float)
        if start is not None:
            omega = start[1]
    else:
        omega = start[1] if start is not None else None
        if omega is None:
            raise ValueError("forcing-amplitude continuation needs start=(coeffs, omega)")
        f_amp = lam0
        problem = HbmProblem(problem.params, problem.h, f_amp, problem.forcing_harmonic)
        w = np.array(start[0], dtype=float)

    w, lam, _ = newton_correct(problem, w, omega, settings, constraint=None)
    if settings.param == "omega":
        omega = lam
    else:
        f_amp = problem.forcing_amp

    branch = Branch(method="hbm", meta={"param": settings.param, "folds": [],
                                        "events": [], "truncated": False})
    branch.points.append(_branch_point(problem, w, omega, settings))

    def lam_of():
        return omega if settings.param == "omega" else problem.forcing_amp

    tang = _tangent(problem, w, omega, settings)
    if tang[-1] < 0.0:
        tang = -tang  # first tangent toward increasing parameter
    if lam_range[1] < lam_range[0]:
        tang = -tang

    ds = settings.step
    prev_y = np.append(w, lam_of())
    prev_tang = tang
    n_fail = 0
    while len(branch.points) < settings.max_points:
        y_pred = prev_y + ds * prev_tang
        if settings.corrector == "natural":
            constraint = None
            lam_pred = y_pred[-1]
        elif settings.corrector == "pseudo-arclength":
            constraint = ("hyperplane", prev_tang, y_pred)
            lam_pred = y_pred[-1]
        else:
            constraint = ("sphere", prev_y, ds)
            lam_pred = y_pred[-1]
        try:
            if settings.param == "omega":
                if settings.corrector == "natural":
                    w_new, lam_new, its = newton_correct(
                        problem, y_pred[:-1], lam_pred, settings, None)
                else:
                    w_new, lam_new, its = newton_correct(
                        problem, y_pred[:-1], lam_pred, settings, constraint)
                omega_new, prob_new = lam_new, problem
            else:
                prob_new = HbmProblem(problem.params, problem.h,
                                      lam_pred, problem.forcing_harmonic)
                w_new, lam_new, its = newton_correct(
                    prob_new, y_pred[:-1], omega, settings, constraint)
                if settings.corrector != "natural":
                    prob_new = HbmProblem(problem.params, problem.h,
                                          lam_new, problem.forcing_harmonic)
                omega_new = omega
        except NonConvergenceError:
            ds *= 0.5
            n_fail += 1
            if ds < settings.min_step:
                branch.meta["truncated"] = True
                branch.meta["truncation_reason"] = "step underflow"
                log.warning("continuation truncated: step underflow at "
                            "lambda=%.6g", lam_of())
                break
            continue
        if settings.param == "omega":
            lam_new_val = omega_new
        else:
            lam_new_val = prob_new.forcing_amp
        y_try = np.append(w_new, lam_new_val)
        tang_try = _tangent(prob_new, w_new, omega_new, settings)
        if tang_try @ prev_tang < 0.0:
            tang_try = -tang_try  # keep orientation along the branch
        # sharp turns flip branches or re-walk the curve backwards; force
        # a finer resolution of the fold instead
        if (tang_try @ prev_tang < settings.max_turn_cos
                and ds > 2.0 * settings.min_step):
            ds *= 0.5
            continue
        problem = prob_new
        omega = omega_new
        w = w_new
        branch.points.append(_branch_point(problem, w, omega, settings))
        y = y_try
        tang = tang_try
        if prev_tang[-1] * tang[-1] < 0.0:
            branch.meta["folds"].append(len(branch.points) - 1)
        if settings.predictor == "secant":
            sec = y - prev_y
            nrm = np.linalg.norm(sec)
            if nrm > 0.0:
                tang = sec / nrm
        prev_y = y
        prev_tang = tang
        if its <= 4:
            ds = min(ds * 1.2, settings.max_step)
        lam_now = lam_of()
        outward = tang[-1] * (1.0 if lam_now >= lam_hi else -1.0) > 0.0
        if (lam_now > lam_hi or lam_now < lam_lo) and outward:
            break
    _annotate_events(branch)
    return branch


def _annotate_events(branch):
    """Log symmetry-breaking candidates: a real multiplier crossing +1
    away from any fold (detected but not branched onto)."""
    pts = branch.points
    folds = set(branch.meta.get("folds", []))
    for i in range(1, len(pts)):
        if pts[i].multipliers is None or pts[i - 1].multipliers is None:
            continue
        m_now = max(m.real for m in pts[i].multipliers if abs(m.imag) < 1e-8) \
            if any(abs(m.imag) < 1e-8 for m in pts[i].multipliers) else None
        m_prev = max(m.real for m in pts[i - 1].multipliers if abs(m.imag) < 1e-8) \
            if any(abs(m.imag) < 1e-8 for m in pts[i - 1].multipliers) else None
        if m_now is None or m_prev is None:
            continue
        crossed = (m_prev - 1.0) * (m_now - 1.0) < 0.0
        near_fold = any(abs(i - f) <= 1 for f in folds)
        if crossed and not near_fold:
            branch.meta["events"].append(("branch-point", i, pts[i].omega))
            log.info("possible branch point near omega=%.6g (multiplier "
                     "crossing +1 without fold)", pts[i].omega)


def isola_seed_search(problem, omega, n_trials, seed, ic_scale=None,
                      n_transient=300, n_measure=40, l_max=8,
                      steps_per_period=STEPS_PER_PERIOD):
    """Hunt coexisting steady orbits from random initial conditions.

    Integrates each random initial condition to steady state, classifies
    the response by its period multiple and amplitude, and deduplicates.
    Returns a list of dicts usable as continuation seeds.
    """
    from .oracle import settle_and_measure
    if n_trials < 1:
        raise ValueError("need at least one trial")
    rng = np.random.default_rng(seed)
    p = problem.params
    if ic_scale is None:
        ic_scale = 2.0 * problem.forcing_amp / p.k + 1.0
    found = []
    for _ in range(n_trials):
        q0 = rng.uniform(-ic_scale, ic_scale)
        v0 = rng.uniform(-ic_scale, ic_scale) * omega
        rep = settle_and_measure(
            p, problem.forcing_amp, omega, (q0, v0),
            n_transient=n_transient, n_measure=n_measure,
            h=max(problem.h, 2 * l_max), l_max=l_max,
            steps_per_period=steps_per_period)
        if rep.status != "ok":
            continue
        a1 = rep.coeffs.amp(max(rep.period_multiple, 1))
        atot = rep.total_amp
        is_new = True
        for other in found:
            same_l = other["period_multiple"] == rep.period_multiple
            close = (abs(other["total_amp"] - atot)
                     <= 0.02 * max(other["total_amp"], atot, 1e-12))
            if same_l and close:
                is_new = False
                break
        if is_new:
            found.append({
                "period_multiple": rep.period_multiple,
                "omega_base": omega / rep.period_multiple,
                "coeffs": rep.coeffs,
                "a1": a1,
                "total_amp": atot,
                "ic": (q0, v0),
            })
    found.sort(key=lambda d: d["total_amp"])
    return found

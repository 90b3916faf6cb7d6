"""Simulated structures under test: Duffing-family oscillators.

The oscillators are exposed to the testing methods as black boxes
(drive in, sensed outputs out).  Exact analytical references for the
unforced response live here as well.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .elliptic import ellipk, sncndn

STEPS_PER_PERIOD = 1000  # default integrator resolution per excitation period


class DivergenceError(RuntimeError):
    """Plant state exceeded the blow-up bound; carries the last state."""

    def __init__(self, state):
        super().__init__(f"plant diverged at t={state.t:.6g} "
                         f"(q={state.q:.3g}, v={state.v:.3g})")
        self.state = state


@dataclass(frozen=True)
class DuffingParams:
    """Coefficients of m q'' + c q' + k q + k2 q^2 + k3 q^3 = f(t)."""

    m: float
    c: float
    k: float
    k2: float = 0.0
    k3: float = 0.0

    def __post_init__(self):
        vals = (self.m, self.c, self.k, self.k2, self.k3)
        if not all(math.isfinite(x) for x in vals):
            raise ValueError(f"non-finite plant parameter in {vals}")
        if self.m <= 0.0 or self.k <= 0.0:
            raise ValueError(f"require m > 0 and k > 0, got m={self.m}, k={self.k}")

    @property
    def omega0(self):
        return math.sqrt(self.k / self.m)

    def displacement_scale(self):
        """Displacement that maps to 1 in the dimensionless problem."""
        return math.sqrt(self.k / self.k3) if self.k3 > 0.0 else 1.0


@dataclass(frozen=True)
class DimensionlessDuffing:
    """q'' + 2 zeta0 q' + q + beta2 q^2 + q^3 = f, in scaled time/displacement."""

    zeta0: float
    beta2: float = 0.0

    def __post_init__(self):
        if self.zeta0 < 0.0:
            raise ValueError(f"zeta0 must be >= 0, got {self.zeta0}")

    def as_params(self):
        return DuffingParams(m=1.0, c=2.0 * self.zeta0, k=1.0,
                             k2=self.beta2, k3=1.0)


@dataclass(frozen=True)
class NoiseModel:
    """Additive Gaussian sensor noise, one independent draw per sample."""

    sensor_rms: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sensor_rms < 0.0:
            raise ValueError("sensor_rms must be >= 0")


@dataclass
class PlantState:
    q: float = 0.0
    v: float = 0.0
    t: float = 0.0


def duffing_rhs(state, forcing, params):
    """State derivative (dq/dt, dv/dt) of the forced oscillator."""
    p = params
    accel = (forcing - p.c * state.v
             - state.q * (p.k + state.q * (p.k2 + p.k3 * state.q))) / p.m
    return state.v, accel


def nondimensionalize(params):
    """Scale factors and dimensionless coefficients of a plant.

    Returns (DimensionlessDuffing, scales) where scales holds omega0
    (time scale), q_scale (displacement scale) and f_scale such that
    f_bar = f / f_scale.
    """
    if params.m <= 0.0 or params.k <= 0.0 or params.k3 <= 0.0:
        raise ValueError("nondimensionalization requires m, k, k3 > 0")
    zeta0 = params.c / (2.0 * math.sqrt(params.k * params.m))
    beta2 = params.k2 / math.sqrt(params.k * params.k3)
    scales = {
        "omega0": math.sqrt(params.k / params.m),
        "q_scale": math.sqrt(params.k / params.k3),
        "f_scale": math.sqrt(params.k ** 3 / params.k3),
    }
    return DimensionlessDuffing(zeta0=zeta0, beta2=beta2), scales


def exact_free_response(amplitude, omega0, alpha3):
    """Unforced, undamped cubic oscillator: exact elliptic solution.

    Returns (Omega, kappa, sampler) with q(t) = A sn(Omega t | kappa),
    so q(0) = 0 and q'(0) > 0.  The period is 4 K(kappa) / Omega.
    """
    omega_sq = omega0 * omega0 + 0.5 * alpha3 * amplitude * amplitude
    if omega_sq <= 0.0:
        raise ValueError("effective frequency not real: omega0^2 + alpha3 A^2/2 <= 0")
    big_omega = math.sqrt(omega_sq)
    kappa = -0.5 * alpha3 * amplitude * amplitude / omega_sq
    if kappa >= 1.0:
        raise ValueError(f"elliptic parameter {kappa} out of range")

    def sampler(t):
        if np.ndim(t) == 0:
            return amplitude * sncndn(big_omega * float(t), kappa)[0]
        return np.array([amplitude * sncndn(big_omega * float(ti), kappa)[0]
                         for ti in np.asarray(t).ravel()]).reshape(np.shape(t))

    return big_omega, kappa, sampler


def free_period(amplitude, omega0, alpha3):
    """Exact period 4 K(kappa) / Omega of the unforced oscillation."""
    big_omega, kappa, _ = exact_free_response(amplitude, omega0, alpha3)
    return 4.0 * ellipk(kappa) / big_omega


@dataclass
class Plant:
    """Black-box oscillator instance: feed a drive, read sensed outputs.

    The sensed displacement is the true displacement plus noise; the
    sensed velocity is ``vel_gain`` times the true velocity plus noise
    (an electronic analog may scale its velocity output).
    """

    params: DuffingParams
    noise: NoiseModel = field(default_factory=NoiseModel)
    vel_gain: float = 1.0
    blowup_factor: float = 1e6
    state: PlantState = field(default_factory=PlantState)

    def __post_init__(self):
        self._rng = np.random.default_rng(self.noise.seed)
        self.blowup = self.blowup_factor * self.params.displacement_scale()

    def reset(self, q=0.0, v=0.0, t=0.0):
        self.state = PlantState(q, v, t)
        self._rng = np.random.default_rng(self.noise.seed)

    def noise_draws(self, n):
        if self.noise.sensor_rms == 0.0:
            z = np.zeros(0)
            return z, z
        block = self._rng.standard_normal((2, n)) * self.noise.sensor_rms
        return block[0], block[1]

    def step(self, drive, dt):
        """Advance one integrator step with the drive held constant.

        Returns the sensed (displacement, velocity) pair after the step.
        """
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        from ._kernels import _pure
        p = self.params
        st = self.state
        q, v = _pure._rk4_hold(st.q, st.v, drive, dt, p.m, p.c, p.k, p.k2, p.k3)
        st.q, st.v, st.t = q, v, st.t + dt
        if abs(q) > self.blowup or abs(v) > self.blowup:
            raise DivergenceError(st)
        nq, nv = self.noise_draws(1)
        if len(nq):
            return q + nq[0], self.vel_gain * v + nv[0]
        return q, self.vel_gain * v

"""Harmonic analysis: truncated Fourier basis, adaptive LMS filters,
offline demodulation and amplitude operators.

Coefficient layout everywhere: [constant, sin(1..h), cos(1..h)],
length 2h+1.  A pure sine at harmonic k has phase 0; phases returned
in (-pi, pi].
"""

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass
class HarmonicVector:
    """Truncated Fourier coefficients of a periodic signal."""

    h: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.h < 1:
            raise ValueError("harmonic count must be >= 1")
        if self.coeffs.shape != (2 * self.h + 1,):
            raise ValueError(
                f"expected {2 * self.h + 1} coefficients, got {self.coeffs.shape}")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("non-finite Fourier coefficient")

    @classmethod
    def zeros(cls, h):
        return cls(h, np.zeros(2 * h + 1))

    @property
    def constant(self):
        return self.coeffs[0]

    def sin(self, k):
        self._check(k)
        return self.coeffs[k]

    def cos(self, k):
        self._check(k)
        return self.coeffs[k + self.h]

    def _check(self, k):
        if not 1 <= k <= self.h:
            raise IndexError(f"harmonic index {k} outside 1..{self.h}")

    def amp(self, k):
        return math.hypot(self.sin(k), self.cos(k))

    def synth(self, phi):
        """Evaluate the signal at phase(s) phi."""
        return basis_matrix(self.h, np.atleast_1d(phi)) @ self.coeffs

    def derivative(self, omega):
        """Coefficients of the time derivative at base frequency omega."""
        out = np.zeros_like(self.coeffs)
        ks = np.arange(1, self.h + 1)
        out[1:self.h + 1] = -ks * omega * self.coeffs[self.h + 1:]
        out[self.h + 1:] = ks * omega * self.coeffs[1:self.h + 1]
        return HarmonicVector(self.h, out)

    def nonfundamental(self):
        """Copy with the fundamental sine/cosine entries zeroed."""
        out = self.coeffs.copy()
        out[1] = 0.0
        out[1 + self.h] = 0.0
        return HarmonicVector(self.h, out)

    def rms(self):
        """RMS of the synthesized signal over one period (Parseval)."""
        w = self.coeffs
        return math.sqrt(w[0] ** 2 + 0.5 * float(np.sum(w[1:] ** 2)))


def basis_eval(h, omega, t):
    """Harmonic basis vector [1, sin(k w t).., cos(k w t)..] at time t."""
    if omega <= 0.0:
        raise ValueError("omega must be positive")
    phi = omega * t
    ks = np.arange(1, h + 1)
    return np.concatenate(([1.0], np.sin(ks * phi), np.cos(ks * phi)))


def basis_matrix(h, phi):
    """Basis rows at each phase in phi: shape (len(phi), 2h+1)."""
    phi = np.asarray(phi, dtype=float)
    ks = np.arange(1, h + 1)
    arg = np.outer(phi, ks)
    return np.hstack([np.ones((len(phi), 1)), np.sin(arg), np.cos(arg)])


@dataclass
class LmsFilterState:
    """State of a Widrow-Hoff LMS demodulator tracking one signal."""

    weights: HarmonicVector
    mu: float
    omega: float
    t: float = 0.0

    def __post_init__(self):
        if self.mu <= 0.0:
            raise ValueError("filter gain mu must be positive")


def lms_update(state, sample, dt):
    """One LMS step: w <- w + mu dt (x - h(t) w) h(t)^T, time advanced."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    basis = basis_eval(state.weights.h, state.omega, state.t)
    w = state.weights.coeffs
    err = sample - float(basis @ w)
    w_new = w + state.mu * dt * err * basis
    return LmsFilterState(HarmonicVector(state.weights.h, w_new),
                          state.mu, state.omega, state.t + dt)


def optimal_gain(omega, mu_bar=2.0):
    """Frequency-proportional LMS gain mu = omega * mu_bar."""
    if omega <= 0.0:
        raise ValueError("omega must be positive")
    return omega * mu_bar


def multi_harmonic_gain(omega, mu_bar=2.0):
    """Single-tone optimum is too aggressive for multi-harmonic signals;
    use half of it."""
    return 0.5 * optimal_gain(omega, mu_bar)


def feedback_gain(omega):
    """LMS gain for filters inside a feedback loop.

    When the filter output feeds the controller reference, gains near the
    single-tone optimum make the coupled filter/plant loop limit-cycle;
    0.4 omega (the multi-harmonic optimum derated once more) settles
    cleanly in the closed-loop configurations used here.
    """
    return 0.4 * omega


def dft_over_periods(t, x, omega, n_periods=5, h=7, phi0=0.0):
    """Least-squares projection of the tail of a record onto the basis.

    Uses the last ``n_periods`` periods of the record; the record must
    cover them to within half a sample.  ``phi0`` is the basis phase at
    t[0] so callers can keep the convention of their signal generator.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if len(t) < 4 or len(t) != len(x):
        raise ValueError("need matching t/x arrays with at least 4 samples")
    period = TWO_PI / omega
    span_needed = n_periods * period
    dt = t[1] - t[0]
    if t[-1] - t[0] + dt < span_needed - 0.5 * dt:
        raise ValueError(
            f"record spans {(t[-1] - t[0] + dt):.6g}, "
            f"need {span_needed:.6g} for {n_periods} periods")
    n_tail = int(round(span_needed / dt))
    tt = t[-n_tail:]
    xx = x[-n_tail:]
    phi = phi0 + omega * (tt - t[0])
    mat = basis_matrix(h, phi)
    sol, *_ = np.linalg.lstsq(mat, xx, rcond=None)
    return HarmonicVector(h, sol)


def amp_phase(wv, k):
    """Amplitude and phase of harmonic k; pure sin(k w t) has phase 0."""
    s = wv.sin(k)
    c = wv.cos(k)
    return math.hypot(s, c), math.atan2(c, s)


def wrap_phase_lag(theta):
    """Wrap a phase lag into (-3 pi / 2, pi / 2].

    Centered on the phase-resonance value -pi/2 so that the lag of a
    driven oscillator varies continuously from 0 to -pi through
    resonance without wrapping artifacts.
    """
    return -((-theta + 1.5 * math.pi) % TWO_PI) + 1.5 * math.pi


def phase_lag(response, forcing, k=1):
    """Phase of the response harmonic k relative to the forcing's."""
    _, pr = amp_phase(response, k)
    _, pf = amp_phase(forcing, k)
    return wrap_phase_lag(pr - pf)


def total_amplitude(x, samples_per_period):
    """Peak |x| over the final period of a densely sampled record.

    A parabolic fit through the discrete maximum refines the estimate.
    """
    x = np.asarray(x, dtype=float)
    n = int(round(samples_per_period))
    if len(x) < n:
        raise ValueError(f"record too short: {len(x)} samples, need {n}")
    tail = np.abs(x[-n:])
    i = int(np.argmax(tail))
    if 0 < i < len(tail) - 1:
        y0, y1, y2 = tail[i - 1], tail[i], tail[i + 1]
        denom = y0 - 2.0 * y1 + y2
        if denom < 0.0:
            delta = 0.5 * (y0 - y2) / denom
            return float(y1 - 0.25 * (y0 - y2) * delta)
    return float(tail[i])

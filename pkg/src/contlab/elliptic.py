"""Jacobi elliptic functions via AGM iteration.

Supports the negative-parameter range needed by hardening oscillators
through the standard transformation to a parameter in (0, 1).
"""

import math

_EPS = 1e-15
_MAX_ITER = 60


def ellipk(m):
    """Complete elliptic integral of the first kind K(m), m < 1."""
    if m >= 1.0:
        raise ValueError(f"parameter m must be < 1, got {m}")
    if m < 0.0:
        # K(m) = K(m/(m-1)) / sqrt(1-m)
        return ellipk(m / (m - 1.0)) / math.sqrt(1.0 - m)
    a, b = 1.0, math.sqrt(1.0 - m)
    for _ in range(_MAX_ITER):
        if abs(a - b) <= _EPS * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return math.pi / (2.0 * a)


def _sncndn_agm(u, m):
    # descending AGM recursion, 0 <= m < 1
    if m < 1e-14:
        s, cph = math.sin(u), math.cos(u)
        return s, cph, math.sqrt(1.0 - m * s * s)
    a = [1.0]
    b = math.sqrt(1.0 - m)
    cs = [math.sqrt(m)]
    n = 0
    while abs(cs[n]) > _EPS * a[n] and n < _MAX_ITER:
        an = 0.5 * (a[n] + b)
        bn = math.sqrt(a[n] * b)
        cs.append(0.5 * (a[n] - b))
        a.append(an)
        b = bn
        n += 1
    phi = (2.0 ** n) * a[n] * u
    phi_prev = phi
    for j in range(n, 0, -1):
        prev = 0.5 * (phi + math.asin(max(-1.0, min(1.0, cs[j] / a[j] * math.sin(phi)))))
        phi_prev = phi
        phi = prev
    sn = math.sin(phi)
    cn = math.cos(phi)
    dn = cn / math.cos(phi_prev - phi) if n > 0 else math.sqrt(1.0 - m * sn * sn)
    return sn, cn, dn


def sncndn(u, m):
    """Jacobi sn, cn, dn at argument u with parameter m < 1.

    Negative m is mapped onto (0, 1) with the reciprocal-parameter
    relations sn(u|m) = sd(ug|m1)/g, cn = cd, dn = nd, where
    m1 = -m/(1-m) and g = sqrt(1-m).
    """
    if m >= 1.0:
        raise ValueError(f"parameter m must be < 1, got {m}")
    if m >= 0.0:
        return _sncndn_agm(u, m)
    g = math.sqrt(1.0 - m)
    m1 = -m / (1.0 - m)
    s, c, d = _sncndn_agm(u * g, m1)
    return s / (g * d), c / d, 1.0 / d


def sn(u, m):
    return sncndn(u, m)[0]

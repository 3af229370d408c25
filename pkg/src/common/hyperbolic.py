"""Upper half-plane and disc geometry: gamma semi-metric, Cayley map, Moebius actions."""

import numpy as np


def gamma(g, h):
    """gamma(g, h) = |g - h|^2 / (Im g Im h) for g, h in the upper half-plane."""
    g = np.asarray(g, dtype=complex)
    h = np.asarray(h, dtype=complex)
    return np.abs(g - h) ** 2 / (g.imag * h.imag)


def cayley(z):
    """Map the upper half-plane onto the unit disc: (z - i)/(z + i)."""
    z = np.asarray(z, dtype=complex)
    return (z - 1j) / (z + 1j)


def inverse_cayley(w):
    """Inverse of ``cayley``: i(1 + w)/(1 - w)."""
    w = np.asarray(w, dtype=complex)
    return 1j * (1.0 + w) / (1.0 - w)


def disc_delta(z, w):
    """delta(z, w) = 2|z - w|^2 / ((1 - |z|^2)(1 - |w|^2)) on the unit disc."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    return 2.0 * np.abs(z - w) ** 2 / ((1.0 - np.abs(z) ** 2) * (1.0 - np.abs(w) ** 2))


def mobius(a, b, c, d, x):
    """(a x + b)/(c x + d), with x = inf mapped to a/c.

    Callers pass ``np.inf`` for the point at infinity. A vanishing
    denominator returns complex infinity.
    """
    x = np.asarray(x, dtype=complex)
    infinite = ~np.isfinite(x)
    safe = np.where(infinite, 0.0, x)
    num = a * safe + b
    den = c * safe + d
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den == 0, complex(np.inf, 0), num / np.where(den == 0, 1.0, den))
        at_inf = np.where(c == 0, complex(np.inf, 0), a / np.where(c == 0, 1.0, c))
    return np.where(infinite, at_inf, out)


def disc_scaling_bound(delta_zw: float, lam1: complex, lam2: complex, r_k: float) -> float:
    """Upper bound (|l1|^2 + C_K)delta + C_K with C_K(t) = 8t/(1 - r_K)^2, t = |l1 - l2|."""
    c_k = 8.0 * abs(lam1 - lam2) / (1.0 - r_k) ** 2
    return (abs(lam1) ** 2 + c_k) * delta_zw + c_k


def shift_bound_constant(g: complex, z: complex) -> float:
    """c_g(z) = 4|z|/Im g + 4|z|^2/(Im g)^2 for shifting gamma arguments by z."""
    return 4.0 * abs(z) / g.imag + 4.0 * abs(z) ** 2 / g.imag**2


def euclidean_bound(xi, zeta):
    """|xi| <= 4 gamma(xi, zeta) Im zeta + 2|zeta|; returns the right-hand side."""
    zeta = np.asarray(zeta, dtype=complex)
    return 4.0 * gamma(xi, zeta) * zeta.imag + 2.0 * np.abs(zeta)

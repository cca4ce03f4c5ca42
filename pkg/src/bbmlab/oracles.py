"""Closed-form reference values for validating the Monte Carlo pipeline.

Everything here is an exact antiderivative or elementary bound; nothing
calls the simulator or numerical quadrature, so these functions can sit on
the other side of a test from the sampled estimates.
"""

from __future__ import annotations

import math

import numpy as np

from .partition import SQRT2, m_of_t


def gaussian_tail_bound(x):
    """Mills-ratio upper bound P(N(0,1) > x) <= e^(-x^2/2) / (sqrt(2 pi) x).

    Valid (and required) for x > 0; accepts scalars or arrays.
    """
    xs = np.asarray(x, dtype=np.float64)
    if np.any(xs <= 0.0):
        raise ValueError("gaussian_tail_bound needs x > 0")
    out = np.exp(-0.5 * xs * xs) / (math.sqrt(2.0 * math.pi) * xs)
    return float(out) if np.isscalar(x) or xs.ndim == 0 else out


def bridge_barrier_bound(a: float, t: float) -> float:
    """Bound 2a/(t - 2a) on a standard bridge staying nonpositive on [a, t-a]."""
    if not (0.0 < 2.0 * a < t):
        raise ValueError(f"need 0 < 2a < t, got a={a!r}, t={t!r}")
    return 2.0 * a / (t - 2.0 * a)


def martingale_second_moment(beta, t: float, k_factorial: float,
                             allow_unbounded: bool = False) -> float:
    """E |M_beta(t)|^2 for the unit-mean additive martingale.

    With a = sigma^2 + tau^2 - 1 the diagonal contributes e^(a t) and each
    branchpoint pair contributes K * integral_0^t e^(a q) dq, giving

        e^(a t) + K (e^(a t) - 1) / a      (a != 0)
        1 + K t                            (a == 0).

    The value is finite for every finite t; it stays bounded in t only in
    the L2 region sigma^2 + tau^2 < 1, so evaluation outside that region is
    refused unless ``allow_unbounded`` is set.
    """
    b = complex(beta)
    sigma, tau = b.real, b.imag
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    if k_factorial < 0.0:
        raise ValueError("K must be nonnegative")
    a = sigma * sigma + tau * tau - 1.0
    if a >= 0.0 and not allow_unbounded:
        raise ValueError(
            "sigma^2 + tau^2 >= 1: second moment grows with t; pass "
            "allow_unbounded=True for a finite-horizon value")
    if abs(a) < 1e-12:
        return 1.0 + k_factorial * t
    eat = math.exp(a * t)
    return eat + k_factorial * (eat - 1.0) / a


def many_to_two_pair_moment(lam: complex, rho: float, tau: float, t: float,
                            k_factorial: float) -> float:
    """Expected branchpoint-pair sum for the lambda = sigma + i rho tau tilt.

    This is E sum_{k != l} e^(conj(lam) x_l + lam x_k) e^(-(1-rho^2) tau^2
    (t - q_kl)): the independent imaginary component is averaged out
    analytically, and its (1-rho^2) tau^2 factor combines with the real
    tilt's Re(lam^2) to make the answer rho-free,

        K e^((2+c) t) (e^(b t) - 1) / b,   c = sigma^2 - tau^2,
                                           b = sigma^2 + tau^2 - 1,

    with the b = 0 case K t e^((2+c) t).
    """
    lam = complex(lam)
    if abs(lam.imag - rho * tau) > 1e-9:
        raise ValueError(
            f"inconsistent tilt: Im(lam)={lam.imag!r} but rho*tau={rho * tau!r}")
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    sigma = lam.real
    c = (lam * lam).real - (1.0 - rho * rho) * tau * tau
    b = 2.0 * sigma * sigma - 1.0 - c
    scale = k_factorial * math.exp((2.0 + c) * t)
    if abs(b) < 1e-12:
        return scale * t
    return scale * (math.exp(b * t) - 1.0) / b


def envelope_curve(s, t: float, gamma: float):
    """Barrier U_{t,gamma}(s) = (s/t) m(t) + min(s, t-s)^gamma on [0, t]."""
    if t <= 0.0:
        raise ValueError("envelope needs t > 0")
    if not (0.0 < gamma < 0.5):
        raise ValueError(f"gamma must lie in (0, 1/2), got {gamma!r}")
    ss = np.asarray(s, dtype=np.float64)
    if np.any(ss < 0.0) or np.any(ss > t):
        raise ValueError("s must lie in [0, t]")
    out = (ss / t) * m_of_t(t) + np.minimum(ss, t - ss) ** gamma
    return float(out) if np.isscalar(s) or ss.ndim == 0 else out


def limit_max_cdf(y, cox_constant: float, z_weight: float):
    """P(max - m(t) <= y) in the limit, conditionally on Z: exp(-C Z e^(-sqrt2 y))."""
    if cox_constant <= 0.0 or z_weight <= 0.0:
        raise ValueError("cox_constant and z_weight must be positive")
    ys = np.asarray(y, dtype=np.float64)
    out = np.exp(-cox_constant * z_weight * np.exp(-SQRT2 * ys))
    return float(out) if np.isscalar(y) or ys.ndim == 0 else out

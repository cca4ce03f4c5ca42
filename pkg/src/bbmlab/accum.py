"""Stable accumulation helpers for large exponential sums.

Partition-type sums combine up to ~10^6 terms e^{w_k + i phi_k} whose
weights span hundreds of e-folds.  Everything here works on a log-scale
representation (peeled maximum exponent plus a complex mantissa) so the
intermediate arithmetic never overflows, and mantissa sums use chunked
exactly-rounded accumulation with a frozen term order, so results are
reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_CHUNK = 1024
_FSUM_DIRECT = 4096


def compensated_sum(values) -> float:
    """Sum floats in array order with exactly-rounded combining.

    Small arrays go straight through math.fsum; large ones are reduced in
    fixed 1024-term chunks whose partial sums are then fsum-combined, which
    keeps the cost near numpy speed without giving up determinism.
    """
    v = np.ascontiguousarray(values, dtype=np.float64)
    if v.size == 0:
        return 0.0
    if v.size <= _FSUM_DIRECT:
        return math.fsum(v)
    partials = np.add.reduceat(v, np.arange(0, v.size, _CHUNK))
    return math.fsum(partials)


@dataclass(frozen=True)
class ScaledComplex:
    """Value e^(log_scale) * mantissa with the scale kept symbolic."""

    log_scale: float
    mantissa: complex

    @property
    def value(self) -> complex:
        """Collapse to a plain complex; saturates to inf for extreme scales."""
        if self.log_scale == -math.inf:
            return complex(0.0, 0.0)
        return complex(float(np.exp(self.log_scale))) * self.mantissa

    @property
    def abs_log(self) -> float:
        """log |value| without leaving log scale (-inf for zero)."""
        mod = abs(self.mantissa)
        if mod == 0.0 or self.log_scale == -math.inf:
            return -math.inf
        return self.log_scale + math.log(mod)

    def shifted(self, delta: float) -> "ScaledComplex":
        """Multiply by e^delta, staying in log scale."""
        if self.log_scale == -math.inf:
            return self
        return ScaledComplex(self.log_scale + delta, self.mantissa)

    def rotated(self, angle: float) -> "ScaledComplex":
        """Multiply by the unit phase e^(i angle)."""
        return ScaledComplex(self.log_scale,
                             self.mantissa * complex(math.cos(angle),
                                                     math.sin(angle)))


def scaled_exp_sum(log_weights, phases=None) -> ScaledComplex:
    """sum_k e^(log_weights[k] + i phases[k]) in log-scale representation.

    The largest weight is peeled off before exponentiation, so the result
    is finite whenever the individual log-weights are; entries of -inf
    contribute zero.
    """
    lw = np.ascontiguousarray(log_weights, dtype=np.float64)
    if lw.size == 0:
        return ScaledComplex(-math.inf, complex(1.0, 0.0))
    peak = float(np.max(lw))
    if peak == -math.inf:
        return ScaledComplex(-math.inf, complex(1.0, 0.0))
    w = np.exp(lw - peak)
    if phases is None:
        return ScaledComplex(peak, complex(compensated_sum(w), 0.0))
    ph = np.ascontiguousarray(phases, dtype=np.float64)
    if ph.shape != lw.shape:
        raise ValueError("phases must align with log_weights")
    re = compensated_sum(w * np.cos(ph))
    im = compensated_sum(w * np.sin(ph))
    return ScaledComplex(peak, complex(re, im))

"""Partition functions and martingales of the complex-temperature field.

For inverse temperature beta = sigma + i tau the raw partition function of
a correlated field is sum_k exp(sigma x_k + i tau y_k) over the leaves.
Two centerings matter: dividing by e^(beta m(t)) (the natural scaling when
the imaginary energy is a deterministic rotation of the real one) and by
e^(sigma m(t)) only (the scaling under which partial correlation leaves a
rotation-invariant limit), where

    m(t) = sqrt(2) t - (3 / (2 sqrt(2))) log t

is the centering of the front.  All exponential sums run through the
log-scale accumulator, so no intermediate quantity overflows even when
sigma x_k is in the hundreds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .accum import ScaledComplex, compensated_sum, scaled_exp_sum

SQRT2 = math.sqrt(2.0)


def m_of_t(t: float) -> float:
    """Front centering sqrt(2) t - (3/(2 sqrt(2))) log t; needs t > 0."""
    if t <= 0.0:
        raise ValueError(f"m(t) needs t > 0, got {t!r}")
    return SQRT2 * t - 1.5 / SQRT2 * math.log(t)


@dataclass(frozen=True)
class ComplexTemperature:
    """Inverse temperature split into real and imaginary parts."""

    sigma: float
    tau: float

    @classmethod
    def of(cls, beta) -> "ComplexTemperature":
        if isinstance(beta, ComplexTemperature):
            return beta
        b = complex(beta)
        return cls(sigma=b.real, tau=b.imag)

    @property
    def beta(self) -> complex:
        return complex(self.sigma, self.tau)

    def lam(self, rho: float) -> complex:
        """Effective exponent lambda = sigma + i rho tau for correlation rho."""
        return complex(self.sigma, rho * self.tau)


def scaled_partition(field, beta) -> ScaledComplex:
    """Raw partition sum in log-scale form: sum_k e^(sigma x_k + i tau y_k)."""
    bt = ComplexTemperature.of(beta)
    return scaled_exp_sum(bt.sigma * field.x, bt.tau * field.y)


def partition_function(field, beta) -> complex:
    """Raw partition sum as a plain complex (see scaled_partition for safety)."""
    return scaled_partition(field, beta).value


class RescaledPartition(NamedTuple):
    full: complex        # e^(-beta m(t)) X(t)
    real_shift: complex  # e^(-sigma m(t)) X(t)


def rescaled_partition(field, beta) -> RescaledPartition:
    """Both centerings of the raw sum for the field's horizon."""
    bt = ComplexTemperature.of(beta)
    m = m_of_t(field.tree.t)
    scaled = scaled_partition(field, beta)
    real_shift = scaled.shifted(-bt.sigma * m)
    full = real_shift.rotated(-bt.tau * m)
    return RescaledPartition(full=full.value, real_shift=real_shift.value)


class TruncatedPartition(NamedTuple):
    kept: complex        # leaves with x_k - m(t) >= -threshold
    discarded: complex   # leaves with x_k - m(t) < -threshold


def truncated_partition(field, beta, threshold: float,
                        centered_phase: bool = False) -> TruncatedPartition:
    """Split e^(-sigma m(t)) X(t) at depth ``threshold`` below the front.

    Terms are e^(sigma (x_k - m) + i tau y_k); with ``centered_phase`` the
    phase is taken as tau (y_k - rho m) instead, the convention used when
    comparing against decorated limit functionals.  kept + discarded always
    reconstitutes the corresponding rescaling of the full sum.
    """
    if threshold < 0.0:
        raise ValueError(f"threshold must be >= 0, got {threshold!r}")
    bt = ComplexTemperature.of(beta)
    m = m_of_t(field.tree.t)
    shift = field.x - m
    phases = bt.tau * (field.y - field.rho * m) if centered_phase \
        else bt.tau * field.y
    keep = shift >= -threshold
    kept = scaled_exp_sum(bt.sigma * shift[keep], phases[keep]).value
    disc = scaled_exp_sum(bt.sigma * shift[~keep], phases[~keep]).value
    return TruncatedPartition(kept=kept, discarded=disc)


def additive_martingale(field, beta, rho: float | None = None) -> complex:
    """Unit-mean complex martingale e^(-t psi(beta, rho)) X(t).

    psi = 1 + (sigma^2 - tau^2)/2 + i sigma rho tau, which compensates both
    the expected population growth and the full complex moment of one
    leaf's energy pair, so E[M] = 1 at every horizon.
    """
    bt = ComplexTemperature.of(beta)
    r = field.rho if rho is None else rho
    t = field.tree.t
    log_norm = -t * (1.0 + 0.5 * (bt.sigma ** 2 - bt.tau ** 2))
    angle = -t * bt.sigma * r * bt.tau
    return scaled_partition(field, beta).shifted(log_norm).rotated(angle).value


def derivative_martingale(field) -> float:
    """Z(t) = sum_k (sqrt(2) t - x_k) e^(-sqrt(2)(sqrt(2) t - x_k))."""
    depth = SQRT2 * field.tree.t - field.x
    return compensated_sum(depth * np.exp(-SQRT2 * depth))


def log_partition(field, beta) -> float:
    """Finite-horizon free energy p_t = (1/t) log |X(t)|."""
    t = field.tree.t
    if t <= 0.0:
        raise ValueError("log_partition needs a horizon t > 0")
    return scaled_partition(field, beta).abs_log / t


@dataclass(frozen=True)
class PartitionStatistics:
    """One field's partition summary, as written to experiment CSVs."""

    t: float
    beta: complex
    rho: float
    seed: int
    n_leaves: int
    raw: complex
    rescaled_full: complex
    rescaled_real: complex
    martingale: complex
    derivative_martingale: float
    log_partition: float


def compute_statistics(field, beta) -> PartitionStatistics:
    bt = ComplexTemperature.of(beta)
    t = field.tree.t
    m = m_of_t(t)
    scaled = scaled_partition(field, beta)
    real_shift = scaled.shifted(-bt.sigma * m)
    log_norm = -t * (1.0 + 0.5 * (bt.sigma ** 2 - bt.tau ** 2))
    angle = -t * bt.sigma * field.rho * bt.tau
    return PartitionStatistics(
        t=t,
        beta=bt.beta,
        rho=field.rho,
        seed=field.seed,
        n_leaves=field.tree.n_leaves,
        raw=scaled.value,
        rescaled_full=real_shift.rotated(-bt.tau * m).value,
        rescaled_real=real_shift.value,
        martingale=scaled.shifted(log_norm).rotated(angle).value,
        derivative_martingale=derivative_martingale(field),
        log_partition=scaled.abs_log / t,
    )

"""Extremal process of the field and samplers for its limit objects.

The shifted point cloud {x_k(t) - m(t)} converges to a decorated Poisson
point process: Cox atoms with intensity proportional to Z e^(-sqrt(2) y)
dressed with relative clusters, and in the partially correlated regime
each atom additionally carries an independent uniform circle mark.  This
module produces finite-t extremal samples, evaluates the truncated limit
functionals, samples clusters by conditioning deep maxima, and draws from
the composite limit law given a cluster bank.

Cluster decorations for |rho| < 1 reuse the secondary field harvested from
the same conditioned runs that produced each cluster; that is an
approximation to the exact decoration law and is flagged as such where it
enters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .field import sample_correlated_pair
from .gwtree import sample_tree
from .offspring import OffspringDistribution
from .partition import ComplexTemperature, SQRT2, m_of_t
from .streams import TAG_CLUSTER, TAG_COX, make_rng, stream_key

DEFAULT_MAX_ATTEMPTS = 100000


class AcceptanceError(RuntimeError):
    """Rejection sampler exhausted its attempt budget."""


@dataclass(eq=False)
class ExtremalSample:
    """Leaf positions shifted by m(t), sorted decreasing, with unit marks."""

    t: float
    rho: float
    tau: float
    points: np.ndarray
    marks: np.ndarray


def extremal_sample(field, tau: float) -> ExtremalSample:
    """Shifted, ordered leaf cloud of a correlated field.

    Marks are e^(i (sqrt(1-rho^2) tau z_k - rho tau m(t))); at |rho| = 1
    the z component vanishes and every mark is the same deterministic
    rotation.
    """
    t = field.tree.t
    m = m_of_t(t)
    order = np.argsort(-field.x, kind="stable")
    points = field.x[order] - m
    rho = field.rho
    if abs(rho) == 1.0:
        marks = np.full(points.size, np.exp(-1j * rho * tau * m))
    else:
        angles = math.sqrt(1.0 - rho * rho) * tau * field.z[order] \
            - rho * tau * m
        marks = np.exp(1j * angles)
    return ExtremalSample(t=t, rho=rho, tau=tau, points=points, marks=marks)


def phi_functional(points, beta, threshold: float) -> complex:
    """Truncated energy functional sum_{p > -A} e^(beta p)."""
    if threshold <= 0.0:
        raise ValueError("threshold must be positive")
    b = ComplexTemperature.of(beta).beta
    p = np.asarray(points, dtype=np.float64)
    kept = p[p > -threshold]
    return complex(np.sum(np.exp(b * kept))) if kept.size else 0j


def phi_tilde_functional(sample: ExtremalSample, beta,
                         threshold: float) -> complex:
    """Marked functional sum_{p > -A} e^((sigma + i rho tau) p) mark_p.

    The sample's marks encode tau, so beta must carry the same tau the
    sample was built with.
    """
    if threshold <= 0.0:
        raise ValueError("threshold must be positive")
    if sample.points.shape != sample.marks.shape:
        raise ValueError("points and marks lengths differ")
    bt = ComplexTemperature.of(beta)
    if abs(bt.tau - sample.tau) > 1e-12:
        raise ValueError(
            f"sample marks were built at tau={sample.tau!r}, "
            f"functional asked for tau={bt.tau!r}")
    lam = bt.lam(sample.rho)
    keep = sample.points > -threshold
    if not np.any(keep):
        return 0j
    return complex(np.sum(np.exp(lam * sample.points[keep])
                          * sample.marks[keep]))


@dataclass(eq=False)
class Cluster:
    """Relative cluster: nonpositive atoms with max pinned at 0.

    ``z_rel`` carries the secondary-field offsets of the conditioned run
    (relative to the atom at 0), used to approximate circle decorations;
    it is absent for clusters loaded from a plain bank file.
    """

    atoms: np.ndarray
    t_cond: float
    max_value: float
    attempts: int
    z_rel: np.ndarray | None = None


def sample_cluster(t_cond: float, dist: OffspringDistribution, seed: int,
                   max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> Cluster:
    """Draw a cluster by conditioning a run on max >= sqrt(2) t_cond.

    Attempts use substreams indexed by attempt number, so the accepted
    cluster is a deterministic function of (t_cond, dist, seed) no matter
    how attempts might be scheduled.
    """
    if t_cond <= 0.0:
        raise ValueError("t_cond must be positive")
    threshold = SQRT2 * t_cond
    for attempt in range(max_attempts):
        sub = stream_key(seed, TAG_CLUSTER, attempt)
        tree = sample_tree(dist, t_cond, sub)
        fld = sample_correlated_pair(tree, 0.0, sub)
        top = float(np.max(fld.x))
        if top >= threshold:
            order = np.argsort(-fld.x, kind="stable")
            atoms = fld.x[order] - top
            z_rel = fld.z[order] - fld.z[order[0]]
            return Cluster(atoms=atoms, t_cond=float(t_cond), max_value=top,
                           attempts=attempt + 1, z_rel=z_rel)
    raise AcceptanceError(
        f"no cluster accepted in {max_attempts} attempts at t_cond={t_cond}")


@dataclass(eq=False)
class LimitModel:
    """Inputs of the limit law: Cox constant, Z weight, cluster bank."""

    cox_constant: float
    z_weight: float
    clusters: list

    def __post_init__(self):
        if self.cox_constant <= 0.0 or self.z_weight <= 0.0:
            raise ValueError("cox_constant and z_weight must be positive")
        if not self.clusters:
            raise ValueError("cluster bank is empty")


@dataclass(eq=False)
class LimitDraws:
    """Limit-partition draws plus the Cox atom count behind each draw."""

    values: np.ndarray
    atom_counts: np.ndarray


def sample_limit_partition(model: LimitModel, beta, rho: float,
                           threshold: float, n_draws: int,
                           seed: int) -> LimitDraws:
    """Draw the truncated limit partition function.

    Cox atoms: N ~ Poisson(C Z e^(sqrt2 A)/sqrt2), positions on [-A, inf)
    with density proportional to e^(-sqrt2 y) (inverse-transform from the
    exponential).  Each atom picks a bank cluster uniformly; at |rho| = 1
    the draw is sum e^(beta (eta + Delta)); otherwise each atom carries an
    independent uniform circle mark and the cluster contributes its
    harvested relative marks, an approximation when banks lack them.
    """
    if threshold <= 0.0:
        raise ValueError("threshold must be positive")
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    if not -1.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [-1, 1]")
    bt = ComplexTemperature.of(beta)
    full_phase = abs(rho) == 1.0
    lam = bt.beta if full_phase else bt.lam(rho)

    # per-cluster weights W = sum_l e^(lam Delta_l) (marks folded in when
    # decorating), computed once per call
    weights = np.empty(len(model.clusters), dtype=np.complex128)
    for i, cl in enumerate(model.clusters):
        terms = np.exp(lam * cl.atoms)
        if not full_phase and cl.z_rel is not None:
            terms = terms * np.exp(
                1j * math.sqrt(1.0 - rho * rho) * bt.tau * cl.z_rel)
        weights[i] = terms.sum()

    mean_atoms = (model.cox_constant * model.z_weight
                  * math.exp(SQRT2 * threshold) / SQRT2)
    rng = make_rng(seed, TAG_COX)
    values = np.empty(n_draws, dtype=np.complex128)
    counts = np.empty(n_draws, dtype=np.int64)
    for i in range(n_draws):
        n = int(rng.poisson(mean_atoms))
        counts[i] = n
        if n == 0:
            values[i] = 0j
            continue
        eta = -threshold + rng.standard_exponential(n, method="inv") / SQRT2
        pick = rng.integers(0, len(model.clusters), size=n)
        terms = np.exp(lam * eta) * weights[pick]
        if not full_phase:
            terms = terms * np.exp(2j * math.pi * rng.random(n))
        values[i] = terms.sum()
    return LimitDraws(values=values, atom_counts=counts)


@dataclass(frozen=True)
class CoxFit:
    """Least-squares fit of the limit max law to empirical maxima."""

    c_hat: float
    sse: float
    n_max: int
    n_z: int


def estimate_cox_constants(max_shifts, z_samples, grid_size: int = 50,
                           z_profile_size: int = 2000) -> CoxFit:
    """Fit C in P(max - m(t) <= y) = E exp(-C Z e^(-sqrt2 y)).

    The expectation over Z uses the empirical quantile profile of
    ``z_samples``; C minimizes the squared CDF discrepancy over a y-grid
    spanning the central 90 percent of the maxima.
    """
    mx = np.asarray(max_shifts, dtype=np.float64)
    zs = np.asarray(z_samples, dtype=np.float64)
    if mx.size < 500 or zs.size < 500:
        raise ValueError("need >= 500 samples of both maxima and Z")
    if np.all(zs <= 0.0):
        raise ValueError("Z samples carry no positive mass; C is not "
                         "identifiable")
    lo, hi = np.quantile(mx, [0.05, 0.95])
    if not hi > lo:
        raise ValueError("degenerate max sample (no spread)")
    grid = np.linspace(lo, hi, grid_size)
    emp = np.searchsorted(np.sort(mx), grid, side="right") / mx.size
    m = min(z_profile_size, zs.size)
    z_prof = np.quantile(zs, (np.arange(m) + 0.5) / m)
    z_prof = z_prof[z_prof > 0.0]
    decay = np.exp(-SQRT2 * grid)

    def sse(log_c: float) -> float:
        model = np.exp(-math.exp(log_c) * np.outer(z_prof, decay)).mean(axis=0)
        return float(((model - emp) ** 2).sum())

    res = minimize_scalar(sse, bounds=(-14.0, 14.0), method="bounded",
                          options={"xatol": 1e-8})
    return CoxFit(c_hat=float(math.exp(res.x)), sse=float(res.fun),
                  n_max=int(mx.size), n_z=int(z_prof.size))


def save_cluster_bank(path, clusters, dist: OffspringDistribution,
                      attempts: int | None = None) -> None:
    """Write clusters as line-oriented text: header, one cluster per line."""
    if not clusters:
        raise ValueError("refusing to write an empty bank")
    total_attempts = attempts if attempts is not None \
        else sum(c.attempts for c in clusters)
    law = ",".join(f"{k}:{p!r}" for k, p in dist.to_pairs())
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# cluster-bank v1\n")
        fh.write(f"# t_cond={clusters[0].t_cond!r}\n")
        fh.write(f"# offspring={law}\n")
        fh.write(f"# accepted={len(clusters)} attempts={total_attempts} "
                 f"acceptance_rate={len(clusters) / total_attempts!r}\n")
        for cl in clusters:
            fh.write(" ".join(repr(float(a)) for a in cl.atoms) + "\n")


def load_cluster_bank(path) -> tuple[list, dict]:
    """Read a bank file; returns (clusters, header metadata).

    Loaded clusters have no stored decorations (z_rel is None).
    """
    clusters = []
    meta: dict = {}
    t_cond = math.nan
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    if "=" in token:
                        key, val = token.split("=", 1)
                        meta[key] = val
                continue
            atoms = np.array([float(v) for v in line.split()])
            if atoms.size == 0 or atoms[0] != 0.0 or np.any(atoms > 0.0):
                raise ValueError(
                    f"malformed cluster line in {path!r}: atoms must be "
                    "nonpositive with the first pinned at 0")
            clusters.append(Cluster(atoms=atoms, t_cond=t_cond,
                                    max_value=math.nan, attempts=0,
                                    z_rel=None))
    if "t_cond" in meta:
        t_cond = float(meta["t_cond"])
        for cl in clusters:
            cl.t_cond = t_cond
    if not clusters:
        raise ValueError(f"bank file {path!r} holds no clusters")
    return clusters, meta

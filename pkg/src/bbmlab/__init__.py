"""Monte Carlo laboratory for branching Brownian energy models at
complex inverse temperature, with the matching closed-form predictions.

The simulation layer builds continuous-time offspring trees, lays
correlated Gaussian energies on their leaves, and reduces them to
partition sums, martingales, extremal point collections and limit-object
draws.  The analytic layer carries the conjectured free energy, moment
identities and tail constants those simulations are tested against.
"""

from .accum import ScaledComplex, compensated_sum, scaled_exp_sum
from .extremal import (AcceptanceError, Cluster, CoxFit, ExtremalSample,
                       LimitDraws, LimitModel, estimate_cox_constants,
                       extremal_sample, load_cluster_bank, phi_functional,
                       phi_tilde_functional, sample_cluster,
                       sample_limit_partition, save_cluster_bank)
from .field import (BbmField, CorrelatedField, EnvelopeSpec, PathDataMissing,
                    envelope_violations, max_position, sample_correlated_pair,
                    sample_field)
from .gwtree import (GwTree, ResourceLimitError, overlap, overlap_matrix,
                     sample_tree)
from .offspring import OffspringDistribution
from .oracles import (bridge_barrier_bound, envelope_curve,
                      gaussian_tail_bound, limit_max_cdf,
                      many_to_two_pair_moment, martingale_second_moment)
from .partition import (ComplexTemperature, PartitionStatistics,
                        RescaledPartition, TruncatedPartition,
                        additive_martingale, compute_statistics,
                        derivative_martingale, log_partition, m_of_t,
                        partition_function, rescaled_partition,
                        scaled_partition, truncated_partition)
from .phase import (GridCell, PhaseRegion, Region, classify, grid_scan,
                    limiting_free_energy, point_scan)
from .stats import (StableFit, TailSlopeFit, cf_regression, empirical_cf,
                    hill_estimator, isotropic_resample, isotropy_radii,
                    isotropy_statistic, ks_distance, max_tail_exponent)
from .streams import make_rng, replica_seed, stream_key

__version__ = "0.1.0"

__all__ = [
    "AcceptanceError", "BbmField", "Cluster", "ComplexTemperature",
    "CorrelatedField", "CoxFit", "EnvelopeSpec", "ExtremalSample",
    "GridCell", "GwTree", "LimitDraws", "LimitModel",
    "OffspringDistribution", "PartitionStatistics", "PathDataMissing",
    "PhaseRegion", "Region", "RescaledPartition", "ResourceLimitError",
    "ScaledComplex", "StableFit", "TailSlopeFit", "TruncatedPartition",
    "additive_martingale", "bridge_barrier_bound", "cf_regression",
    "classify", "compensated_sum", "compute_statistics",
    "derivative_martingale", "empirical_cf", "envelope_curve",
    "envelope_violations", "estimate_cox_constants", "extremal_sample",
    "gaussian_tail_bound", "grid_scan", "hill_estimator",
    "isotropic_resample", "isotropy_radii", "isotropy_statistic",
    "ks_distance", "limit_max_cdf", "limiting_free_energy",
    "load_cluster_bank", "log_partition", "m_of_t",
    "many_to_two_pair_moment", "martingale_second_moment", "max_position",
    "max_tail_exponent", "overlap", "overlap_matrix", "partition_function",
    "phi_functional", "phi_tilde_functional", "point_scan", "make_rng",
    "replica_seed", "rescaled_partition", "sample_cluster",
    "sample_correlated_pair", "sample_field", "sample_limit_partition",
    "sample_tree", "save_cluster_bank", "scaled_exp_sum",
    "scaled_partition", "stream_key", "truncated_partition",
]

"""Potential of sample overlap among studies, from study-level envelopes.

Studies report eligibility ranges (envelopes) of key characteristics such as
recruitment area or period. Binning those ranges and intersecting the bins
gives, for every combination of studies, an exact rational "potential of
overlap". A zero value proves that the combination cannot share an
observation, which lets us enumerate overlap-free combinations, pick the best
one and bound the deduplicated pooled sample size.
"""

__version__ = "0.1.0"

from .bound import BoundReport, lower_bound_proxy, naive_pooled_size, pairwise_bound
from .enumeration import (
    EnumerationConfig,
    ExclusionGraph,
    OverlapFreeFamily,
    Ranking,
    Selection,
    enumerate_potentials,
    exclusion_graph,
    maximal_cliques,
    overlap_free_b2,
    select_best,
)
from .estimators import EnvelopeEncoder, OverlapAnalyzer
from .exceptions import (
    ConfigError,
    CriterionUnavailableError,
    FormatError,
    OverlapixError,
    SchemaError,
    SoundnessViolation,
    TimeBudgetExceeded,
    ValidationError,
)
from .io import ingest
from .model import (
    Characteristic,
    EncodedSynthesis,
    PartitionFamily,
    ReportedRange,
    StudyEnvelope,
    build_global_domains,
    encode,
    partition_domains,
)
from .potential import CombinationReport, StudySubset, pairwise_matrix, potential

__all__ = [
    "__version__",
    "BoundReport",
    "Characteristic",
    "CombinationReport",
    "ConfigError",
    "CriterionUnavailableError",
    "EncodedSynthesis",
    "EnumerationConfig",
    "EnvelopeEncoder",
    "ExclusionGraph",
    "FormatError",
    "OverlapAnalyzer",
    "OverlapFreeFamily",
    "OverlapixError",
    "PartitionFamily",
    "Ranking",
    "ReportedRange",
    "SchemaError",
    "Selection",
    "SoundnessViolation",
    "StudyEnvelope",
    "StudySubset",
    "TimeBudgetExceeded",
    "ValidationError",
    "build_global_domains",
    "encode",
    "enumerate_potentials",
    "exclusion_graph",
    "ingest",
    "lower_bound_proxy",
    "maximal_cliques",
    "naive_pooled_size",
    "overlap_free_b2",
    "pairwise_bound",
    "pairwise_matrix",
    "partition_domains",
    "potential",
    "select_best",
]

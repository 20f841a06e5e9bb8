"""Sparse similarity graphs (two-hop spanners) from LSH bucketing and star sampling."""

__version__ = "0.1.0"

from .clustering import (
    Partition,
    SweepResult,
    connected_components,
    merge_to_k,
    single_linkage_sweep,
    vmeasure,
)
from .core import (
    BuildReport,
    Dataset,
    DatasetError,
    Edge,
    InvalidEdgeError,
    SimilarityGraph,
    degree_cap,
    graph_insert,
    read_graph,
    two_hop_neighborhood,
    write_graph,
)
from .data import MixtureSpec, ParseError, gen_gaussian_mixture, load_dense, load_labels, load_weighted_sets
from .evaluation import (
    EvalReport,
    GroundTruth,
    allpairs_oracle,
    ann_two_hop_recall,
    sparsity_report,
    threshold_two_hop_recall,
)
from .lsh import MinHash, MixedHash, SimHash, WeightedMinHash, bucket_key, get_family, sketch
from .similarity import ComparisonCounter, get_measure
from .sorting import Auto, SortingConfig, build_knn_spanner, make_blocks, select_mode, sort_by_sketch
from .threshold import ThresholdConfig, build_allpairs_lsh, build_threshold_spanner, split_oversized_bucket

__all__ = [name for name in dir() if not name.startswith("_")]

"""datascout: a client-server search engine for transfer-learning data.

The server indexes large source datasets as a hard-gated mixture of compact
experts; a client evaluates those experts on its private target data and
sends back only K accuracy scalars; the server answers with a budget-capped,
importance-weighted sample of source item URLs.
"""

__version__ = "0.1.0"

from .core import DatasetManifest, Item, SplitSpec, load_manifest, save_manifest, split
from .errors import DatascoutError
from .experts import ExpertModel, TrainConfig, deserialize_expert, serialize_expert
from .fastadapt import AccuracyReport, ProbeConfig, fast_adapt
from .gating import GatingConfig, Partition, build_partition
from .selection import Recommendation, WeightVector

__all__ = [
    "AccuracyReport",
    "DatascoutError",
    "DatasetManifest",
    "ExpertModel",
    "GatingConfig",
    "Item",
    "Partition",
    "ProbeConfig",
    "Recommendation",
    "SplitSpec",
    "TrainConfig",
    "WeightVector",
    "build_partition",
    "deserialize_expert",
    "fast_adapt",
    "load_manifest",
    "save_manifest",
    "serialize_expert",
    "split",
]

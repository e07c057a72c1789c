from .confusion import ConfusionReport, correlation_experiment, proxy_a_distance
from .downstream import DownstreamResult, downstream_compare, incremental_build_check
from .fixtures import Fixture, standard_fixture

__all__ = [
    "ConfusionReport",
    "DownstreamResult",
    "Fixture",
    "correlation_experiment",
    "downstream_compare",
    "incremental_build_check",
    "proxy_a_distance",
    "standard_fixture",
]

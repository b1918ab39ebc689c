"""Cache-aided multicasting with periodic base-station activity.

Two engines evaluate the successful transmission probability of a typical
file request: :mod:`tsmcast.analysis` (stochastic-geometry approximation)
and :mod:`tsmcast.simulator` (Monte Carlo). :mod:`tsmcast.asymptotics`
holds the limit regimes.
"""

from .analysis import (
    LoadPmf,
    QuadratureError,
    QuadratureSettings,
    expected_load,
    load_pmf,
    sinr_ccdf,
    success_prob,
    success_prob_file,
)
from .model import (
    CacheDesign,
    CombinationSet,
    ModelBundle,
    NetworkConfig,
    Popularity,
    SchemeConfig,
    ValidationError,
    enumerate_combinations,
    hit_probabilities,
    validate_inputs,
    zipf_popularity,
)
from .simulator import EstimateResult, SimulationSettings, estimate

__version__ = "0.1.0"

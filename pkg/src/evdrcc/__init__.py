"""EV owner station switching, moment ambiguity sets and chance-constrained dispatch."""

from .ambiguity import AmbiguityParams, MomentAmbiguitySet, Moments, empirical_moments, eta
from .behavior import PopulationConfig, simulate_scenarios
from .config import PipelineConfig, load_config
from .dopf import DRCCDispatcher, Dispatch, DopfParams
from .network import Network, load_network
from .posteval import Penalties, compare, redispatch, sample_realizations, violation_stats
from .promethee import PrometheeII, net_flows

__version__ = "0.1.0"

__all__ = [
    "AmbiguityParams", "DRCCDispatcher", "Dispatch", "DopfParams", "MomentAmbiguitySet",
    "Moments", "Network", "Penalties", "PipelineConfig", "PopulationConfig", "PrometheeII",
    "compare", "empirical_moments", "eta", "load_config", "load_network", "net_flows",
    "redispatch", "sample_realizations", "simulate_scenarios", "violation_stats",
]

"""Power-beacon energy minimisation for wireless-powered backscatter IoT networks."""

from .baselines import run_ee_max, run_throughput_max
from .channel import Geometry, sample_channels
from .dynamic import run_dynamic
from .model import Allocation, EhParams, NetworkInstance, SolveReport, check_feasibility, pb_energy
from .oracle import grid_search
from .static import run_static

__all__ = [
    "Allocation",
    "EhParams",
    "Geometry",
    "NetworkInstance",
    "SolveReport",
    "check_feasibility",
    "grid_search",
    "pb_energy",
    "run_dynamic",
    "run_ee_max",
    "run_static",
    "run_throughput_max",
    "sample_channels",
]
__version__ = "0.1.0"

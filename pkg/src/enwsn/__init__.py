"""Energy simulator for prediction-based wireless sensor networks."""

from .dbp import DbpParams, DbpPredictor, DbpResult, run_dbp
from .errors import EnwsnError, InfeasibleConfigError, InputError
from .harvest import HarvestModel, neutrality
from .hw import HwCatalog, HwConfig, McuMode, RadioIdle, Software, Wakeup, default_catalog, load_catalog
from .power import Network, floor_power, node_power, sweep
from .topology import Topology, build_tree, node_loads
from .trace import SensorTrace, SynthSpec, synth_trace

__version__ = "0.1.0"

__all__ = [
    "DbpParams", "DbpPredictor", "DbpResult", "run_dbp",
    "EnwsnError", "InfeasibleConfigError", "InputError",
    "HarvestModel", "neutrality",
    "HwCatalog", "HwConfig", "McuMode", "RadioIdle", "Software", "Wakeup", "default_catalog", "load_catalog",
    "Network", "floor_power", "node_power", "sweep",
    "Topology", "build_tree", "node_loads",
    "SensorTrace", "SynthSpec", "synth_trace",
]

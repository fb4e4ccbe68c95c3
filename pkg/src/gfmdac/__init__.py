"""Frequency-band safety filter for grid-forming inverters in networked microgrids."""
__version__ = "0.1.0"

from .dac import DacDecision, DacInputs, DacMode, dac_compute  # noqa: E402
from .engine import Metrics, Simulator, Trace, compute_metrics, parameter_sweep, run_scenario, size_sweep  # noqa: E402
from .models import DacConfig, InverterParams  # noqa: E402
from .scenario import load_scenario, parse_and_validate  # noqa: E402

__all__ = [
    "DacConfig", "DacDecision", "DacInputs", "DacMode", "InverterParams", "Metrics", "Simulator", "Trace",
    "compute_metrics", "dac_compute", "load_scenario", "parameter_sweep", "parse_and_validate", "run_scenario",
    "size_sweep",
]

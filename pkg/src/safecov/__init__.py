"""Safe multi-agent coverage control with adaptive fault and disturbance estimation."""
from .config import ConfigError, ScenarioConfig, load_config, parse_config
from .simulation import RunResult, SimulationAbort, run_scenario

__all__ = [
    "ConfigError",
    "RunResult",
    "ScenarioConfig",
    "SimulationAbort",
    "load_config",
    "parse_config",
    "run_scenario",
]
__version__ = "0.1.0"

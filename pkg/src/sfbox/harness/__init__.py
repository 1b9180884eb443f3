from .schema import load_scenario, Scenario
from .builtins import builtin, BUILTIN_NAMES
from .runner import run, evaluate

__all__ = ["load_scenario", "Scenario", "builtin", "BUILTIN_NAMES", "run", "evaluate"]

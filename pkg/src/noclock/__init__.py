"""Node-initiated, self-stabilizing Byzantine consensus: simulator and library."""

from .harness import RunResult, run, sweep
from .params import Params, derive
from .scenario import Scenario, ScenarioError

__all__ = ["RunResult", "run", "sweep", "Params", "derive", "Scenario",
           "ScenarioError"]

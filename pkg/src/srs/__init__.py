"""srs: a concurrent signal-rule-slot production engine.

Rules fire in parallel on Boolean combinations of event spikes; conflicts are
resolved per causal group by an intrinsic, structure-derived utility metric.
"""

from .condition import And, Cond, Or, RawClauses, SignalExpr, dnf, signal
from .core import (INF, EmitSpec, ResultFlag, Rule, SignalSpec, Slot, Spike,
                   Triggers, changed_sid)
from .errors import ConfigurationError, NotFulfilledError, ScenarioError
from .scheduler import Activation, Context, EngineConfig, Runner, TickReport
from .trace import TraceRecorder, export_dot, replay
from .agentkit import ModuleDef, build_demo_agent, register_module

__version__ = "0.1.0"

__all__ = [
    "Activation", "And", "Cond", "ConfigurationError", "Context", "EmitSpec",
    "EngineConfig", "INF", "ModuleDef", "NotFulfilledError", "Or",
    "RawClauses", "ResultFlag", "Rule", "Runner", "ScenarioError",
    "SignalExpr", "SignalSpec", "Slot", "Spike", "TickReport",
    "TraceRecorder", "Triggers", "build_demo_agent", "changed_sid", "dnf",
    "export_dot", "register_module", "replay", "signal", "__version__",
]

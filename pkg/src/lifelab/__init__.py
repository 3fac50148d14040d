"""Life-like cellular automata lab: fast toroidal engine, RL-style
environment, reward wrappers, evolvable policies, CMA-ES, and an
interactive-evolution service."""

from .cmaes import CmaEs
from .config import RunConfig
from .environment import EnvConfig, ToggleEnv
from .rules import RuleSet, format_rule_string, parse_rule_string, rule_space_size

__version__ = "0.1.0"

__all__ = [
    "CmaEs",
    "EnvConfig",
    "RuleSet",
    "RunConfig",
    "ToggleEnv",
    "format_rule_string",
    "parse_rule_string",
    "rule_space_size",
    "__version__",
]

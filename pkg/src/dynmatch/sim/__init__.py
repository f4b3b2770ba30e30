"""Event simulation of the dynamic matching market."""
from .assignment import max_weight_assignment
from .engine import *  # noqa: F401,F403
from .engine import __all__ as _engine_all
from .oracle import exact_ctmc_oracle

__all__ = ["max_weight_assignment", "exact_ctmc_oracle", *_engine_all]

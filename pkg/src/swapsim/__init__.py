"""swapsim: simulator and analysis toolkit for time-bin entanglement swapping.

Library layout:

- :mod:`swapsim.timebin`      state algebra and Bell decomposition
- :mod:`swapsim.optics`       beam-splitter statistics, analyzers, heralds
- :mod:`swapsim.channel`      loss budgets, delay drift, polarization wander
- :mod:`swapsim.stabilization` delay and polarization feedback loops
- :mod:`swapsim.detection`    clicks, dead time, TDC, coincidence counting
- :mod:`swapsim.engine`       event-driven Monte Carlo and rate budgets
- :mod:`swapsim.analysis`     fringe fits, visibility, entanglement verdicts
- :mod:`swapsim.cli`          the ``swapsim`` command line
"""

__version__ = "0.1.0"

from .engine import rate_budget, run_scenario, visibility_degradation
from .timebin import PairState, PhaseConfig, bell_decompose, build_pair_state

__all__ = [
    "__version__",
    "PairState",
    "PhaseConfig",
    "bell_decompose",
    "build_pair_state",
    "rate_budget",
    "run_scenario",
    "visibility_degradation",
]

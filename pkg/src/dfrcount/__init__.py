"""Counting processes stopped at independent random times, and d-DFR checks.

Modules
-------
distmodel  survival models and DFR/NWU/NWUE/IMRL grid checks
procgen    interarrival processes and arrival paths
stopcount  tail estimation for ``N(T)`` and the log-convexity check
ordassoc   stochastic order, association and the hypothesis battery
queuesim   FIFO GI/GI/1 simulation and the Little's law cross-check
cli        YAML configs, run directories and the ``dfrcount`` command
"""

__version__ = "0.1.0"

from .verdict import FAILS, HOLDS, INCONCLUSIVE, ClassVerdict  # noqa: E402

__all__ = ["__version__", "ClassVerdict", "HOLDS", "FAILS", "INCONCLUSIVE"]

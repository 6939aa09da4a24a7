"""Bandit-guided candidate-edge selection for Lin-Kernighan TSP search.

The package is organized as a small numpy library:

- :mod:`mabtsp.tsplib` parses TSPLIB instances and computes exact distances;
- :mod:`mabtsp.onetree` computes minimum 1-trees, vertex-penalty ascent and
  edge quality (alpha) values;
- :mod:`mabtsp.candidates` builds enlarged per-city candidate sets;
- :mod:`mabtsp.bandit` holds the per-city bandits, arm-selection policies,
  rewards and value updates;
- :mod:`mabtsp.lksearch` has the tour structure and the sequential k-opt
  local search;
- :mod:`mabtsp.driver` runs the trial loop end to end;
- :mod:`mabtsp.bench` is the benchmark harness and command line interface.
"""

from .tsplib import Instance, WeightKind, load_instance, parse_instance

__all__ = [
    "Instance",
    "WeightKind",
    "load_instance",
    "parse_instance",
    "SolverParams",
    "RunResult",
    "solve",
    "run_batch",
]

__version__ = "0.1.0"


def __getattr__(name):
    # driver imports lazily so the light parsing layer stays importable on
    # its own during partial installs
    if name in ("SolverParams", "RunResult", "solve", "run_batch"):
        from . import driver

        return getattr(driver, name)
    raise AttributeError(name)

"""Exception types shared across the simulator.

All numerical-failure exceptions derive from SimulationError so callers
(and the CLI, which maps them to a dedicated exit code) can catch one base.
Configuration problems are deliberately kept separate; see config.ConfigError.
"""


class SimulationError(RuntimeError):
    """Base class for numerical failures during a run."""


class DimensionError(SimulationError):
    """Requested Hilbert-space dimension exceeds the configured maximum."""


class ResonanceError(SimulationError):
    """A perturbative expression was evaluated too close to one of its poles."""


class LeakageRegionError(SimulationError):
    """Dressed-state labeling became ambiguous while following states in drive
    amplitude; the operating point sits in a leakage region (a computational
    level is strongly hybridized with a non-computational one)."""


class ToleranceError(SimulationError):
    """Step-doubling refinement failed to reach the requested tolerance within
    the maximum number of subdivisions."""


class CalibrationError(SimulationError):
    """Gate tune-up failed: no grid point produced a pi crossing within the
    leakage budget."""

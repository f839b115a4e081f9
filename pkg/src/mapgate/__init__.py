"""mapgate: pulse-level simulator and analysis toolkit for the
microwave-activated conditional-phase gate between two fixed-frequency,
exchange-coupled transmons."""

__version__ = "0.1.0"

from .backend import backend_name
from .model import (
    DeviceParams,
    MapConditionReport,
    OperatorMatrix,
    build_static_hamiltonian,
    default_device,
    drive_operator,
    map_condition_report,
    splitting_xi,
    zeta_perturbative,
    zeta_static,
)

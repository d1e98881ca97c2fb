"""
Datenmodelle für fsCLF-MPC
"""

from .constraint_set import ConstraintSet
from .system import ControlSystem, Disturbance
from .comparison import ComparisonFunction
from .lyapunov import FsCLF, MeasurementFunction, SandwichReport
from .trajectory import ControlSequence, Trajectory
from .ocp import Classic, Contractive, OcpSolution, OcpSpec, Shrinking
from .closed_loop import Algorithm, ClosedLoopConfig, ClosedLoopResult, SolveDiagnostics, WarmStartPolicy
from .scenario import ScenarioConfig

__all__ = [
    'ConstraintSet', 'ControlSystem', 'Disturbance', 'ComparisonFunction',
    'FsCLF', 'MeasurementFunction', 'SandwichReport', 'ControlSequence', 'Trajectory',
    'Classic', 'Contractive', 'OcpSolution', 'OcpSpec', 'Shrinking',
    'Algorithm', 'ClosedLoopConfig', 'ClosedLoopResult', 'SolveDiagnostics', 'WarmStartPolicy',
    'ScenarioConfig'
]

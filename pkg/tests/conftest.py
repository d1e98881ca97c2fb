"""
Gemeinsame Fixtures: Beispielsystem, fsCLF, Services
"""

import numpy as np
import pytest

from services.analysis_service import AnalysisService
from services.dynamics_service import DynamicsService
from services.mpc_service import MpcService
from services.ocp_service import OcpService
from services.solver.nlp import SolverConfig
from utils.example_system import EXAMPLE_INITIAL_STATE, create_example_fsclf, create_example_system


@pytest.fixture(scope='session')
def nominal_system():
    return create_example_system(perturbed=False)


@pytest.fixture(scope='session')
def perturbed_system():
    return create_example_system(perturbed=True)


@pytest.fixture(scope='session')
def example_fsclf():
    return create_example_fsclf()


@pytest.fixture(scope='session')
def xi():
    return np.array(EXAMPLE_INITIAL_STATE)


@pytest.fixture
def dynamics():
    return DynamicsService()


@pytest.fixture
def ocp_service(dynamics):
    return OcpService(dynamics)


@pytest.fixture
def mpc_service(ocp_service):
    return MpcService(ocp_service)


@pytest.fixture
def analysis_service(ocp_service):
    return AnalysisService(ocp_service)


@pytest.fixture(scope='session')
def tight_config():
    """Strengere Toleranzen für Genauigkeitstests"""
    return SolverConfig(feasibility_tol=1e-8, optimality_tol=1e-9)

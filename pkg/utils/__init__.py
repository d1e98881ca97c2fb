"""
Utility-Module
"""

from .logging_config import setup_logging
from .example_system import create_example_fsclf, create_example_scenario, create_example_system

__all__ = ['setup_logging', 'create_example_fsclf', 'create_example_scenario', 'create_example_system']

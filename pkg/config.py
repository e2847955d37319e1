"""
This file contains program configuration.

Users are free to edit this file.
"""
import logging
import os
import sys

from settings import countable_settings, program_settings, simulation_settings, tail_settings, tolerances

"""
Logging configuration
"""

dirname = 'log'
if not os.path.exists(dirname):
    os.makedirs(dirname)

program_settings.log_file = 'log/markov.log'

# Configure logging to a file
file_handler = logging.FileHandler(program_settings.log_file)

# Configure logging to stderr, stdout carries the JSON summary
stderr_handler = logging.StreamHandler(sys.stderr)
stderr_handler.setLevel(logging.WARNING)

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s:%(levelname)s:%(name)s: %(message)s',
    datefmt='%Y-%m-%d %H:%M:%S',
    handlers=(file_handler, stderr_handler)
)

"""
Global parameters
"""

tolerances.stochastic = 1e-12
tolerances.convergence = 1e-10

tail_settings.stabilization_steps = 10

simulation_settings.chunk_size = 10000

countable_settings.probe_budget = 1000
countable_settings.eps_grid = (0.1, 0.01, 0.001)

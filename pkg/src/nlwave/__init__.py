"""Spectral simulation and diagnostics for nonlocal convolution wave equations."""
from .spectral import Grid, make_grid, forward_transform, inverse_transform
from .symbols import KernelSpec, SymbolTable, build_symbol_table, check_admissibility
from .nonlinearity import NonlinearitySpec, f_eval, potential_eval
from .propagator import State, make_weights, linear_step, forced_step, picard_step, run
from .config import RunConfig, parse_config, load_config
from .presets import manufactured_case
from .runner import ExitCode, run_experiment

__version__ = "0.1.0"

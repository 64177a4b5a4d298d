"""Exact-rational simulation, solving and verification of instantaneous dynamic equilibria."""
from .engine import EngineConfig, SimulationReport, detect_periodicity, simulate, termination_certificate
from .instances import builtin, gen_example3, gen_fig2, gen_gadget_graph, gen_random
from .network import Instance, load_instance, save_instance
from .numerics import Rat, rat
from .verify import verify_feasible, verify_ide, verify_termination

__all__ = [
    "EngineConfig", "SimulationReport", "detect_periodicity", "simulate", "termination_certificate",
    "builtin", "gen_example3", "gen_fig2", "gen_gadget_graph", "gen_random",
    "Instance", "load_instance", "save_instance", "Rat", "rat",
    "verify_feasible", "verify_ide", "verify_termination",
]
__version__ = "0.1.0"

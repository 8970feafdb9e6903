"""N-1 branch contingency screening with fast-decoupled power flow and preconditioned CG."""

from .contingency import ScreeningOptions, prepare_base, screen_all, screen_scenario
from .fdpf import CgOptions, FdpfOptions, Mode, fdpf_solve, flat_start
from .graph import PowerGraph, build_graph
from .ingest import NetworkModel, load_network, validate_network
from .report import read_json, write_csv, write_json
from .results import ScenarioResult, ScreeningReport

__all__ = [
    "CgOptions",
    "FdpfOptions",
    "Mode",
    "NetworkModel",
    "PowerGraph",
    "ScenarioResult",
    "ScreeningOptions",
    "ScreeningReport",
    "build_graph",
    "fdpf_solve",
    "flat_start",
    "load_network",
    "prepare_base",
    "read_json",
    "screen_all",
    "screen_scenario",
    "validate_network",
    "write_csv",
    "write_json",
]

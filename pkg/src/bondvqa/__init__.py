"""CVaR-VQA portfolio construction on a dense statevector simulator."""

from .ansatz import AnsatzCircuit, AnsatzSpec, bind, build, make_spec
from .portfolio import (
    Bond,
    GeneratorConfig,
    PenalizedProblem,
    PortfolioInstance,
    build_instance,
    build_problem,
    choose_penalty_scales,
    objective_cost,
    penalized_cost,
    to_matrix_form,
)
from .postprocess import brute_force, local_search, polish_history, random_baseline, relative_gap
from .topology import CouplingGraph, color_edges, heavy_hex_graph, line_graph, trim_to_size
from .vqa import CvarConfig, OptimizerConfig, RunHistory, cvar, evaluate, nft_sweep, run

__version__ = "0.1.0"

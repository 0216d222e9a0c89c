"""Learning and exactly solving pairwise cost function networks."""

from .network import CostFunctionNetwork, TOP_DEFAULT
from .solver import (SolverConfig, SolveResult, EnumerationResult,
                     solve, enumerate_solutions, brute_force, hinge_argmin)
from .losses import (MaskPlan, LossReport, messages, conditional_distribution,
                     npll, masked_npll, sample_mask, hinge)
from .mlp import MlpConfig, ParamStore, forward, backward, adam_step
from .training import (TrainConfig, EvalReport, train, evaluate, sweep_k,
                       summarize_sweep, enumerate_learned, learned_rule_report)
from . import sudoku

__all__ = [
    "CostFunctionNetwork", "TOP_DEFAULT",
    "SolverConfig", "SolveResult", "EnumerationResult",
    "solve", "enumerate_solutions", "brute_force", "hinge_argmin",
    "MaskPlan", "LossReport", "messages", "conditional_distribution",
    "npll", "masked_npll", "sample_mask", "hinge",
    "MlpConfig", "ParamStore", "forward", "backward", "adam_step",
    "TrainConfig", "EvalReport", "train", "evaluate", "sweep_k",
    "summarize_sweep", "enumerate_learned", "learned_rule_report",
    "sudoku",
]

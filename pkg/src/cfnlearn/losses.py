"""Pseudo-loglikelihood losses on a pairwise network, with exact gradients.

`npll` is the classic negative pseudo-loglikelihood: for each variable, the
negative log of the softmax conditional of its observed value given all the
other observed values.  `masked_npll` mutes, per variable, a random subset of
incoming pairwise messages, which restores the gradient on constraints that
the observed context makes redundant.  `hinge` is the solver-based
structured-margin alternative.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .network import CostFunctionNetwork
from .solver import SolverConfig, hinge_argmin


@dataclass
class MaskPlan:
    """Per-variable sets of muted neighbor variables."""
    masks: list  # masks[i]: frozenset of variable indices, i not in masks[i]

    def __post_init__(self):
        self.masks = [frozenset(m) for m in self.masks]
        for i, m in enumerate(self.masks):
            if i in m:
                raise ValueError(f"variable {i} cannot mask itself")

    @classmethod
    def empty(cls, n):
        return cls([frozenset()] * n)


@dataclass
class LossReport:
    value: float
    grad_pairs: dict    # (i, j) -> array shaped like net.pairs[(i, j)]
    grad_unaries: dict  # i -> array shaped like net.unary[i]


def sample_mask(n, k, global_seed, epoch, sample_index, mode="count") -> MaskPlan:
    """Uniform without-replacement masks, deterministic in the seed material.

    Each variable gets its own RNG stream so plans are independent across
    variables, samples and epochs, yet bit-identical on regeneration.
    """
    if mode == "fraction":
        if not 0 <= k <= 100:
            raise ValueError("fraction k must be in [0, 100]")
        count = int(round(k / 100.0 * (n - 1)))
    elif mode == "count":
        count = int(k)
        if not 0 <= count <= n - 1:
            raise ValueError(f"k must be in [0, {n - 1}]")
    else:
        raise ValueError(f"unknown mask mode {mode!r}")
    masks = []
    for i in range(n):
        rng = np.random.default_rng(
            [int(global_seed), int(epoch), int(sample_index), i])
        others = np.array([j for j in range(n) if j != i])
        masks.append(frozenset(rng.choice(others, size=count, replace=False).tolist()))
    return MaskPlan(masks)


def messages(net: CostFunctionNetwork, y, i, excluded=frozenset()):
    """m_i(v) = unary_i(v) + sum over non-excluded neighbors j of C[i,j](v, y_j)."""
    y = np.asarray(y, dtype=int)
    m = np.array(net.unary[i], dtype=float) if i in net.unary \
        else np.zeros(net.domains[i])
    for (a, b), c in net.pairs.items():
        if a == i and b not in excluded:
            m = m + c[:, y[b]]
        elif b == i and a not in excluded:
            m = m + c[y[a], :]
    return np.minimum(m, net.top)


def conditional_distribution(net, y, i, excluded=frozenset()):
    """softmax(-m_i), stabilized by max subtraction; top messages give exact 0."""
    m = messages(net, y, i, excluded)
    p = np.exp(-(m - m.min()))
    return p / p.sum()


def _pll(net: CostFunctionNetwork, y, plan: MaskPlan, terms=None) -> LossReport:
    y = net.check_assignment(y)
    n = net.n
    if len(plan.masks) != n:
        raise ValueError("mask plan size does not match network")
    included = set(range(n)) if terms is None else set(terms)
    value = 0.0
    probs = []
    for i in range(n):
        m = messages(net, y, i, plan.masks[i])
        if i in included:
            value += float(m[y[i]] + logsumexp(-m))
        p = np.exp(-(m - m.min()))
        probs.append(p / p.sum())

    grad_pairs = {}
    for (i, j), c in net.pairs.items():
        g = np.zeros_like(c)
        if j not in plan.masks[i] and i in included:
            # variable i's term uses column y_j
            g[y[i], y[j]] += 1.0
            g[:, y[j]] -= probs[i]
        if i not in plan.masks[j] and j in included:
            # variable j's term uses row y_i
            g[y[i], y[j]] += 1.0
            g[y[i], :] -= probs[j]
        grad_pairs[(i, j)] = g
    grad_unaries = {}
    for i in net.unary:
        if i in included:
            g = -probs[i].copy()
            g[y[i]] += 1.0
        else:
            g = np.zeros(net.domains[i])
        grad_unaries[i] = g
    return LossReport(value=value, grad_pairs=grad_pairs, grad_unaries=grad_unaries)


def npll(net, y, terms=None) -> LossReport:
    """Negative pseudo-loglikelihood and its gradient on every cost tensor.

    `terms` optionally restricts which variables' conditional terms enter the
    sum (used to exclude hint variables during training).
    """
    return _pll(net, y, MaskPlan.empty(net.n), terms)


def masked_npll(net, y, plan: MaskPlan, terms=None) -> LossReport:
    """npll with per-variable muted neighbor messages (empty plan == npll)."""
    return _pll(net, y, plan, terms)


def hinge(net: CostFunctionNetwork, y, margin, cfg: SolverConfig | None = None,
          ) -> LossReport:
    """Structured hinge loss for the Hamming distance at the given margin.

    value = cost(y) - [cost(y_m) - margin * Hamming(y, y_m)] where y_m solves
    the loss-augmented problem.  Gradient: +1 on the observed tuple, -1 on
    the predicted one, in every tensor.
    """
    y = net.check_assignment(y)
    res = hinge_argmin(net, y, margin, cfg)
    if res.best is None or not res.proven_optimal:
        raise RuntimeError("loss-augmented solve failed or was node-limited")
    ym = np.asarray(res.best, dtype=int)
    hamming = int(np.sum(ym != y))
    value = net.evaluate(y) - (net.evaluate(ym) - margin * hamming)
    grad_pairs = {}
    for (i, j), c in net.pairs.items():
        g = np.zeros_like(c)
        g[y[i], y[j]] += 1.0
        g[ym[i], ym[j]] -= 1.0
        grad_pairs[(i, j)] = g
    grad_unaries = {}
    for i in net.unary:
        g = np.zeros(net.domains[i])
        g[y[i]] += 1.0
        g[ym[i]] -= 1.0
        grad_unaries[i] = g
    return LossReport(value=float(value), grad_pairs=grad_pairs,
                      grad_unaries=grad_unaries)

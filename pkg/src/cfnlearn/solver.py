"""Exact optimization and enumeration over pairwise cost function networks.

Depth-first branch and bound with an additive lower bound: accumulated cost
plus, for every unassigned variable, the minimum of its unary cost and the
messages already received from assigned neighbors, plus the minimum entry of
every matrix between two still-unassigned variables (so the bound stays valid
for signed costs).
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from .network import CostFunctionNetwork

BRUTE_FORCE_LIMIT = 10 ** 7


@dataclass
class SolverConfig:
    node_limit: int = 100_000_000  # 0 = unlimited
    enumeration_bound: float = 0.0
    max_solutions: int = 1_000_000
    variable_order: str = "static-degree"  # or "min-domain-then-index"
    # values within ordering_slack of a variable's cheapest value count as
    # "live" for the min-domain ordering (exact MRV on hard networks)
    ordering_slack: float = 1.0


@dataclass
class SolveResult:
    best: tuple | None
    best_cost: float
    nodes_expanded: int
    proven_optimal: bool


@dataclass
class EnumerationResult:
    solutions: list = field(default_factory=list)  # [(assignment tuple, cost)]
    truncated: bool = False
    nodes_expanded: int = 0


class _Search:
    """Shared machinery: message tables, incremental bound, DFS."""

    def __init__(self, net: CostFunctionNetwork, order, slack=1.0):
        self.net = net
        self.n = net.n
        self.top = net.top
        self.order = order  # None => dynamic min-domain-then-index
        self.slack = slack
        # neigh[i]: list of (j, M) with M[v_i, v_j], for pushing messages.
        self.neigh = [[] for _ in range(self.n)]
        self.pairmin = {}
        for (i, j), c in net.pairs.items():
            self.neigh[i].append((j, c))
            self.neigh[j].append((i, c.T))
            self.pairmin[(i, j)] = float(c.min())
        self.mt = [np.minimum(np.asarray(net.unary[i], dtype=float), self.top)
                   if i in net.unary else np.zeros(net.domains[i])
                   for i in range(self.n)]
        self.unassigned = [True] * self.n
        self.mins = [float(m.min()) for m in self.mt]
        self.summins = sum(self.mins)
        self.pair_uu = sum(self.pairmin.values())
        self.live = [self._live_count(i) for i in range(self.n)]
        self.y = [0] * self.n
        self.nodes = 0
        self.aborted = False

    def _live_count(self, i):
        """Values of i within slack of its cheapest value (and below top)."""
        cut = min(self.top, self.mins[i] + self.slack)
        return int(np.count_nonzero(self.mt[i] < cut))

    def pick(self):
        """Next variable under dynamic ordering: fewest live values, then index."""
        return min((j for j in range(self.n) if self.unassigned[j]),
                   key=lambda j: (self.live[j], j))

    def assign(self, i, v):
        """Push variable i's costs to unassigned neighbors; return undo trail."""
        self.unassigned[i] = False
        self.summins -= self.mins[i]
        trail = []
        for j, m in self.neigh[i]:
            if self.unassigned[j]:
                trail.append((j, self.mt[j], self.mins[j], self.live[j]))
                self.mt[j] = self.mt[j] + m[v]
                new_min = float(self.mt[j].min())
                self.summins += new_min - self.mins[j]
                self.mins[j] = new_min
                self.live[j] = self._live_count(j)
                key = (i, j) if i < j else (j, i)
                self.pair_uu -= self.pairmin[key]
        self.y[i] = v
        return trail

    def undo(self, i, trail):
        for j, old_mt, old_min, old_live in trail:
            self.summins += old_min - self.mins[j]
            self.mt[j] = old_mt
            self.mins[j] = old_min
            self.live[j] = old_live
            key = (i, j) if i < j else (j, i)
            self.pair_uu += self.pairmin[key]
        self.unassigned[i] = True
        self.summins += self.mins[i]


def _make_order(net, mode):
    """Static order for 'static-degree'; None selects dynamic selection."""
    if mode == "min-domain-then-index":
        return None
    if mode != "static-degree":
        raise ValueError(f"unknown variable order {mode!r}")
    degree = [0] * net.n
    for (i, j), c in net.pairs.items():
        if np.any(c != 0):
            degree[i] += 1
            degree[j] += 1
    return sorted(range(net.n), key=lambda i: (-degree[i], i))


def solve(net: CostFunctionNetwork, cfg: SolverConfig | None = None) -> SolveResult:
    """Minimum-cost assignment with optimality proof (unless node-limited)."""
    cfg = cfg or SolverConfig()
    s = _Search(net, _make_order(net, cfg.variable_order), cfg.ordering_slack)
    best = {"y": None, "cost": net.top}
    limit = cfg.node_limit if cfg.node_limit > 0 else None

    def dfs(depth, acc):
        if s.aborted:
            return
        if depth == s.n:
            if acc < best["cost"]:
                best["y"] = tuple(s.y)
                best["cost"] = acc
            return
        i = s.order[depth] if s.order is not None else s.pick()
        mt_i = s.mt[i]
        rest = s.summins - s.mins[i] + s.pair_uu
        for v in sorted(range(net.domains[i]), key=lambda v: (mt_i[v], v)):
            c = float(mt_i[v])
            if c >= s.top or acc + c + rest >= best["cost"]:
                continue
            s.nodes += 1
            if limit is not None and s.nodes > limit:
                s.aborted = True
                return
            trail = s.assign(i, v)
            lb = acc + c + s.summins + s.pair_uu
            if lb < best["cost"]:
                dfs(depth + 1, acc + c)
            s.undo(i, trail)
            if s.aborted:
                return

    dfs(0, 0.0)
    return SolveResult(best=best["y"], best_cost=float(min(best["cost"], net.top)),
                       nodes_expanded=s.nodes, proven_optimal=not s.aborted)


def enumerate_solutions(net: CostFunctionNetwork,
                        cfg: SolverConfig) -> EnumerationResult:
    """All assignments with cost <= cfg.enumeration_bound, lexicographic order.

    Exhaustive branch and bound without incumbent tightening; stops with the
    `truncated` flag once max_solutions have been found.
    """
    if cfg.enumeration_bound >= net.top:
        raise ValueError("enumeration bound must be below top")
    if cfg.max_solutions < 1:
        raise ValueError("max_solutions must be >= 1")
    bound = cfg.enumeration_bound
    # natural static order already yields lexicographic output; under the
    # dynamic ordering solutions are sorted afterwards instead (so with
    # truncation the kept subset is not necessarily the lexicographic head)
    order = None if cfg.variable_order == "min-domain-then-index" \
        else list(range(net.n))
    s = _Search(net, order, cfg.ordering_slack)
    res = EnumerationResult()
    limit = cfg.node_limit if cfg.node_limit > 0 else None

    def dfs(depth, acc):
        if s.aborted:
            return
        if depth == s.n:
            if acc <= bound:
                if len(res.solutions) >= cfg.max_solutions:
                    res.truncated = True
                    s.aborted = True
                    return
                res.solutions.append((tuple(s.y), acc))
            return
        i = s.order[depth] if s.order is not None else s.pick()
        mt_i = s.mt[i]
        rest = s.summins - s.mins[i] + s.pair_uu
        for v in range(net.domains[i]):
            c = float(mt_i[v])
            if c >= s.top or acc + c + rest > bound:
                continue
            s.nodes += 1
            if limit is not None and s.nodes > limit:
                s.aborted = True
                return
            trail = s.assign(i, v)
            if acc + c + s.summins + s.pair_uu <= bound:
                dfs(depth + 1, acc + c)
            s.undo(i, trail)
            if s.aborted:
                return

    dfs(0, 0.0)
    res.solutions.sort()
    res.nodes_expanded = s.nodes
    return res


def brute_force(net: CostFunctionNetwork) -> SolveResult:
    """Exhaustive-scan oracle; refuses search spaces above 10^7 assignments."""
    space = 1
    for d in net.domains:
        space *= d
        if space > BRUTE_FORCE_LIMIT:
            raise ValueError("search space too large for brute force")
    best_y, best_cost, nodes = None, net.top, 0
    for y in itertools.product(*(range(d) for d in net.domains)):
        nodes += 1
        c = net.evaluate(y)
        if c < best_cost:
            best_y, best_cost = y, c
    return SolveResult(best=best_y, best_cost=float(best_cost),
                       nodes_expanded=nodes, proven_optimal=True)


def hinge_argmin(net: CostFunctionNetwork, y, margin: float,
                 cfg: SolverConfig | None = None) -> SolveResult:
    """Loss-augmented minimization: cost(t) - margin * Hamming(y, t)."""
    if margin < 0:
        raise ValueError("margin must be non-negative")
    y = net.check_assignment(y)
    aug = net.copy()
    for i in range(net.n):
        vec = np.full(net.domains[i], -margin)
        vec[y[i]] = 0.0
        aug.add_unary(i, vec)
    return solve(aug, cfg)

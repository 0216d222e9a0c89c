"""Pairwise cost function networks over extended-real costs.

A network holds n discrete variables (domains 0..d_i-1), at most one unary
cost vector per variable and at most one pairwise cost matrix per variable
pair.  Infinite cost is represented by a large finite sentinel ``top`` with
saturating addition, so all arithmetic stays total and serializable.
"""

import json

import numpy as np

TOP_DEFAULT = 1e9


class CostFunctionNetwork:
    """A sum of unary and pairwise cost functions over discrete variables.

    Treated as immutable once built: the mutating helpers (`add_unary`,
    `add_pair`) are for construction; `condition` and `threshold_to_boolean`
    return new networks and never touch the receiver's arrays.
    """

    def __init__(self, domains, top=TOP_DEFAULT):
        self.domains = [int(d) for d in domains]
        if any(d < 1 for d in self.domains):
            raise ValueError("domain sizes must be >= 1")
        self.top = float(top)
        self.unary = {}     # i -> float array (d_i,)
        self.pairs = {}     # (i, j) with i < j -> float array (d_i, d_j)
        self.evidence = {}  # i -> value fixed by condition()

    @property
    def n(self):
        return len(self.domains)

    # -- construction -----------------------------------------------------

    def _sat_add(self, a, b):
        s = np.where((a >= self.top) | (b >= self.top), self.top, a + b)
        return np.minimum(s, self.top)

    def add_unary(self, i, costs):
        costs = np.asarray(costs, dtype=float)
        if costs.shape != (self.domains[i],):
            raise ValueError(f"unary for variable {i} has shape {costs.shape}")
        if np.isnan(costs).any():
            raise ValueError("NaN cost entry")
        if i in self.unary:
            self.unary[i] = self._sat_add(self.unary[i], costs)
        else:
            self.unary[i] = np.minimum(costs, self.top)
        return self

    def add_pair(self, i, j, costs):
        """Add a cost matrix for the pair (i, j), row index = value of i.

        Stored under the canonical key (min(i,j), max(i,j)); an existing
        matrix is merged by saturating addition.
        """
        costs = np.asarray(costs, dtype=float)
        if i == j:
            raise ValueError("pair must involve two distinct variables")
        if i > j:
            i, j = j, i
            costs = costs.T
        if costs.shape != (self.domains[i], self.domains[j]):
            raise ValueError(f"pair ({i},{j}) has shape {costs.shape}")
        if np.isnan(costs).any():
            raise ValueError("NaN cost entry")
        if (i, j) in self.pairs:
            self.pairs[(i, j)] = self._sat_add(self.pairs[(i, j)], costs)
        else:
            self.pairs[(i, j)] = np.minimum(costs, self.top)
        return self

    def get_pair(self, i, j):
        """Cost matrix oriented as (value of i, value of j); None if absent."""
        if i < j:
            m = self.pairs.get((i, j))
            return m
        m = self.pairs.get((j, i))
        return None if m is None else m.T

    def copy(self):
        out = CostFunctionNetwork(self.domains, self.top)
        out.unary = {i: c.copy() for i, c in self.unary.items()}
        out.pairs = {k: c.copy() for k, c in self.pairs.items()}
        out.evidence = dict(self.evidence)
        return out

    # -- semantics --------------------------------------------------------

    def check_assignment(self, y):
        y = np.asarray(y, dtype=int)
        if y.shape != (self.n,):
            raise ValueError(f"assignment length {y.shape} != {self.n} variables")
        for i, v in enumerate(y):
            if not 0 <= v < self.domains[i]:
                raise ValueError(f"value {v} outside domain of variable {i}")
        return y

    def evaluate(self, y):
        """Joint cost of a full assignment; `top` iff any selected entry is top."""
        y = self.check_assignment(y)
        total = 0.0
        for i, c in self.unary.items():
            e = c[y[i]]
            if e >= self.top:
                return self.top
            total += e
        for (i, j), c in self.pairs.items():
            e = c[y[i], y[j]]
            if e >= self.top:
                return self.top
            total += e
        return min(total, self.top)

    def condition(self, evidence):
        """Fix variables to the given values via {0, top} unary evidence.

        Optimal solutions of the result agree with the evidence; all other
        costs are unchanged.  Conflicting evidence on an already conditioned
        variable is an error.
        """
        out = self.copy()
        for i, v in evidence.items():
            i, v = int(i), int(v)
            if not 0 <= v < self.domains[i]:
                raise ValueError(f"evidence value {v} outside domain of variable {i}")
            if i in out.evidence and out.evidence[i] != v:
                raise ValueError(
                    f"contradictory evidence on variable {i}: "
                    f"{out.evidence[i]} vs {v}")
            vec = np.full(self.domains[i], self.top)
            vec[v] = 0.0
            out.add_unary(i, vec)
            out.evidence[i] = v
        return out

    def threshold_to_boolean(self, tau):
        """Harden costs: every entry >= tau becomes top, every entry < tau zero."""
        if not tau > 0:
            raise ValueError("tau must be positive")
        out = CostFunctionNetwork(self.domains, self.top)
        out.evidence = dict(self.evidence)
        for i, c in self.unary.items():
            out.unary[i] = np.where(c >= tau, self.top, 0.0)
        for k, c in self.pairs.items():
            out.pairs[k] = np.where(c >= tau, self.top, 0.0)
        return out

    def l1_norm(self):
        """Sum of |entry| over all pairwise matrices (unaries excluded)."""
        total = 0.0
        for c in self.pairs.values():
            if (c >= self.top).any():
                raise ValueError("l1_norm undefined on networks with top entries")
            total += np.abs(c).sum()
        return float(total)

    # -- serialization ----------------------------------------------------

    def to_dict(self):
        return {
            "variables": list(self.domains),
            "top": self.top,
            "unary": {str(i): c.tolist() for i, c in sorted(self.unary.items())},
            "pairs": {f"{i}_{j}": c.tolist()
                      for (i, j), c in sorted(self.pairs.items())},
        }

    @classmethod
    def from_dict(cls, d):
        net = cls(d["variables"], d.get("top", TOP_DEFAULT))
        for key, c in d.get("unary", {}).items():
            net.add_unary(int(key), c)
        for key, c in d.get("pairs", {}).items():
            i, j = key.split("_")
            net.add_pair(int(i), int(j), c)
        return net

    def save(self, path, solver_format=False):
        with open(path, "w") as f:
            if solver_format:
                json.dump(self.to_solver_dict(), f)
            else:
                json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def to_solver_dict(self):
        """Same data under the key layout of the external exact prover."""
        funcs = {}
        for i, c in sorted(self.unary.items()):
            funcs[f"u{i}"] = {"scope": [f"x{i}"], "costs": c.tolist()}
        for (i, j), c in sorted(self.pairs.items()):
            funcs[f"f{i}_{j}"] = {"scope": [f"x{i}", f"x{j}"],
                                  "costs": c.ravel().tolist()}
        return {
            "problem": {"name": "cfn", "mustbe": f"<{self.top}"},
            "variables": {f"x{i}": d for i, d in enumerate(self.domains)},
            "functions": funcs,
        }

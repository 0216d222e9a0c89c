"""Sudoku instances (4x4 and 9x9): rules network, data sets, generation,
pair features and learned-rule analysis.

Cells are indexed row-major, cell = r * size + c.  Variable values are
0..size-1 and map to digits 1..size; '0' in the text format means empty.
"""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .network import CostFunctionNetwork, TOP_DEFAULT
from .solver import SolverConfig, enumerate_solutions

SIZES = (4, 9)


def _check_size(size):
    if size not in SIZES:
        raise ValueError(f"size must be one of {SIZES}")
    return int(math.isqrt(size))


def cell_units(size):
    """(row, col, box) index of every cell."""
    b = _check_size(size)
    units = []
    for r in range(size):
        for c in range(size):
            units.append((r, c, (r // b) * b + c // b))
    return units


def unit_sharing_pairs(size):
    """Canonical (i, j) pairs of cells sharing a row, column or box."""
    units = cell_units(size)
    pairs = []
    n = size * size
    for i in range(n):
        for j in range(i + 1, n):
            if any(a == b for a, b in zip(units[i], units[j])):
                pairs.append((i, j))
    return pairs


def all_pairs(size):
    n = size * size
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def true_rules(size, top=TOP_DEFAULT) -> CostFunctionNetwork:
    """Hard difference constraints on every unit-sharing pair."""
    n = size * size
    net = CostFunctionNetwork([size] * n, top=top)
    forbid_equal = np.zeros((size, size))
    np.fill_diagonal(forbid_equal, top)
    for i, j in unit_sharing_pairs(size):
        net.add_pair(i, j, forbid_equal)
    return net


def pair_features(size):
    """(pairs, X): one-hot row/col/box of both cells, X[k] for pairs[k].

    The encoding depends only on the cell coordinates, so it is shared by
    every instance of a given size (6*size features: 54 for 9x9, 24 for 4x4).
    """
    units = cell_units(size)
    pairs = all_pairs(size)
    X = np.zeros((len(pairs), 6 * size))
    for k, (i, j) in enumerate(pairs):
        for slot, u in enumerate(units[i] + units[j]):
            X[k, slot * size + u] = 1.0
    return pairs, X


# -- samples and data sets -----------------------------------------------


@dataclass
class SudokuSample:
    size: int
    hints: dict                    # cell -> value (0-based)
    solutions: list = field(default_factory=list)  # full grids, tuples of values

    def __post_init__(self):
        if not self.solutions:
            raise ValueError("a sample needs at least one solution")
        for sol in self.solutions:
            for cell, v in self.hints.items():
                if sol[cell] != v:
                    raise ValueError("solution contradicts hints")

    @property
    def hint_count(self):
        return len(self.hints)

    def puzzle_string(self):
        n = self.size * self.size
        return "".join(str(self.hints[i] + 1) if i in self.hints else "0"
                       for i in range(n))

    def solution_strings(self):
        return ["".join(str(v + 1) for v in sol) for sol in self.solutions]


def _parse_grid(text, size, line_no, allow_empty):
    n = size * size
    if len(text) != n:
        raise ValueError(f"line {line_no}: grid has {len(text)} chars, expected {n}")
    vals = []
    for ch in text:
        if not ch.isdigit() or int(ch) > size:
            raise ValueError(f"line {line_no}: invalid digit {ch!r}")
        if ch == "0" and not allow_empty:
            raise ValueError(f"line {line_no}: solution contains an empty cell")
        vals.append(int(ch) - 1)
    return vals


def load_dataset(path, size):
    """CSV lines `puzzle,solution`; consecutive lines sharing a puzzle string
    are grouped into one multi-solution sample."""
    samples = []
    current_puzzle, current_solutions = None, []

    def flush():
        if current_puzzle is None:
            return
        hints = {i: v for i, v in enumerate(current_puzzle) if v >= 0}
        samples.append(SudokuSample(size, hints, list(current_solutions)))

    with open(path, newline="") as f:
        for line_no, row in enumerate(csv.reader(f), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ValueError(f"line {line_no}: expected `puzzle,solution`")
            puzzle = _parse_grid(row[0].strip(), size, line_no, allow_empty=True)
            solution = _parse_grid(row[1].strip(), size, line_no, allow_empty=False)
            for i, v in enumerate(puzzle):
                if v >= 0 and solution[i] != v:
                    raise ValueError(f"line {line_no}: solution contradicts hints")
            if puzzle == current_puzzle:
                current_solutions.append(tuple(solution))
            else:
                flush()
                current_puzzle, current_solutions = puzzle, [tuple(solution)]
        flush()
    return samples


def save_dataset(path, samples, max_solutions=None):
    """Inverse of load_dataset; optionally caps the solutions written per sample."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        for s in samples:
            sols = s.solution_strings()
            if max_solutions is not None:
                sols = sols[:max_solutions]
            p = s.puzzle_string()
            for sol in sols:
                w.writerow([p, sol])


# -- generation ----------------------------------------------------------


def _fill_grid(size, rng):
    """Complete random grid by backtracking over the rules."""
    n = size * size
    units = cell_units(size)
    grid = [-1] * n

    def ok(cell, v):
        for j in range(n):
            if grid[j] == v and j != cell and \
                    any(a == b for a, b in zip(units[cell], units[j])):
                return False
        return True

    def fill(cell):
        if cell == n:
            return True
        vals = list(range(size))
        rng.shuffle(vals)
        for v in vals:
            if ok(cell, v):
                grid[cell] = v
                if fill(cell + 1):
                    return True
                grid[cell] = -1
        return False

    if not fill(0):
        raise RuntimeError("grid fill failed")  # cannot happen for 4x4/9x9
    return tuple(grid)


def count_solutions(size, hints, limit=2, rules=None):
    rules = rules if rules is not None else true_rules(size)
    res = enumerate_solutions(
        rules.condition(hints),
        SolverConfig(enumeration_bound=0.0, max_solutions=limit,
                     variable_order="min-domain-then-index"))
    return len(res.solutions) + (1 if res.truncated else 0), res


def generate(size, hint_count, rng, require_unique=True,
             max_recorded_solutions=50) -> SudokuSample:
    """Random puzzle by cell removal from a full grid.

    With require_unique, a removal is rejected whenever it allows a second
    solution; removal stops at hint_count hints or at a local minimum above
    it (the actual count is whatever remains).  Without it, removal is
    unconditional and all solutions (up to max_recorded_solutions) are
    recorded.
    """
    _check_size(size)
    n = size * size
    if not 0 <= hint_count <= n:
        raise ValueError("infeasible hint count")
    if require_unique and size == 9 and hint_count < 17:
        raise ValueError("a unique 9x9 puzzle needs at least 17 hints")
    rules = true_rules(size)
    grid = _fill_grid(size, rng)
    hints = dict(enumerate(grid))
    order = list(range(n))
    rng.shuffle(order)
    for cell in order:
        if len(hints) <= hint_count:
            break
        removed = hints.pop(cell)
        if require_unique:
            count, _ = count_solutions(size, hints, limit=2, rules=rules)
            if count > 1:
                hints[cell] = removed
    if require_unique:
        return SudokuSample(size, hints, [grid])
    res = enumerate_solutions(
        rules.condition(hints),
        SolverConfig(enumeration_bound=0.0, max_solutions=max_recorded_solutions,
                     variable_order="min-domain-then-index"))
    return SudokuSample(size, hints, [sol for sol, _ in res.solutions])


# -- learned-rule analysis -----------------------------------------------


@dataclass
class RuleReport:
    size: int
    tau_on: float
    tau_off: float
    classes: dict          # (i, j) -> "difference-constraint" | "zero" | "other"
    min_diag: dict         # (i, j) -> float
    max_offdiag: dict      # (i, j) -> float

    def count(self, cls):
        return sum(1 for c in self.classes.values() if c == cls)

    def summary(self):
        return {
            "size": self.size,
            "tau_on": self.tau_on,
            "tau_off": self.tau_off,
            "pairs": len(self.classes),
            "difference_constraints": self.count("difference-constraint"),
            "zero": self.count("zero"),
            "other": self.count("other"),
        }

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["pair_i", "pair_j", "class", "min_diag", "max_offdiag"])
            for (i, j), cls in sorted(self.classes.items()):
                w.writerow([i, j, cls, self.min_diag[(i, j)],
                            self.max_offdiag[(i, j)]])

    def write_summary(self, path):
        with open(path, "w") as f:
            json.dump(self.summary(), f, indent=2)


def analyze_rules(size, pair_matrices, tau_on=1.0, tau_off=0.1) -> RuleReport:
    """Classify each learned d x d matrix as a difference constraint, zero,
    or other, from its diagonal and off-diagonal magnitudes."""
    expected = set(all_pairs(size))
    if set(pair_matrices) != expected:
        raise ValueError("need exactly one matrix per canonical pair")
    classes, min_diag, max_off = {}, {}, {}
    off_mask = ~np.eye(size, dtype=bool)
    for key, mat in pair_matrices.items():
        mat = np.asarray(mat, dtype=float)
        md = float(np.diag(mat).min())
        mo = float(np.abs(mat[off_mask]).max())
        min_diag[key], max_off[key] = md, mo
        if md > tau_on and mo < tau_off:
            classes[key] = "difference-constraint"
        elif float(np.abs(mat).max()) < tau_off:
            classes[key] = "zero"
        else:
            classes[key] = "other"
    return RuleReport(size, tau_on, tau_off, classes, min_diag, max_off)


def non_redundant_minimum(size):
    """Smallest rule set reachable by greedy removal that keeps the full
    (hint-free) solution set intact; a lower-bound oracle for learned rules."""
    rules = unit_sharing_pairs(size)
    reference = _solution_set(size, rules)
    kept = list(rules)
    for pair in list(kept):
        trial = [p for p in kept if p != pair]
        if _solution_set(size, trial) == reference:
            kept = trial
    return len(kept)


def _solution_set(size, rule_pairs, cap=100000):
    n = size * size
    net = CostFunctionNetwork([size] * n)
    forbid_equal = np.zeros((size, size))
    np.fill_diagonal(forbid_equal, net.top)
    for i, j in rule_pairs:
        net.add_pair(i, j, forbid_equal)
    res = enumerate_solutions(net, SolverConfig(
        enumeration_bound=0.0, max_solutions=cap,
        variable_order="min-domain-then-index"))
    if res.truncated:
        raise RuntimeError("solution set larger than cap")
    return frozenset(sol for sol, _ in res.solutions)

"""Exact Sudoku solving with the branch-and-bound solver.

Builds the hard rule network for 9x9, conditions it on a famous 17-hint
puzzle, finds the optimum, and proves the solution is unique by enumerating
everything at cost 0 with a cap of two.
"""

from cfnlearn import SolverConfig, sudoku
from cfnlearn.solver import solve, enumerate_solutions

PUZZLE = ("000000010400000000020000000000050407"
          "008000300001090000300400200050100000000806000")


def show(grid):
    for r in range(9):
        row = "".join(str(v + 1) for v in grid[9 * r: 9 * r + 9])
        print(" ".join(row))


hints = {i: int(ch) - 1 for i, ch in enumerate(PUZZLE) if ch != "0"}
print("puzzle with %d hints:" % len(hints))
show([hints.get(i, -1) for i in range(81)])
print()

net = sudoku.true_rules(9).condition(hints)
cfg = SolverConfig(variable_order="min-domain-then-index")
res = solve(net, cfg)
print("solved, cost %.0f, %d nodes expanded" % (res.best_cost, res.nodes_expanded))
show(res.best)
print()

cfg = SolverConfig(enumeration_bound=0.0, max_solutions=2,
                   variable_order="min-domain-then-index")
enum = enumerate_solutions(net, cfg)
print("solutions at cost 0: %d (so the puzzle is %s)"
      % (len(enum.solutions),
         "unique" if len(enum.solutions) == 1 else "not unique"))

"""End to end: learn the rules of 4x4 Sudoku from solved grids.

Generates a dataset, trains the cost model with the masked pseudo-likelihood
loss, checks test accuracy, and prints the recovered rule structure.  The
ground truth has 56 unit-sharing pairs (difference constraints) out of 120;
with enough masking and an off-diagonal-heavy L1 the model recovers all of
them, including the eight box pairs that are implied by the row and column
rules in almost every context.

Takes a few minutes on a laptop CPU.
"""

import numpy as np

from cfnlearn import sudoku
from cfnlearn.training import (TrainConfig, train, evaluate,
                               learned_rule_report, predict_pair_matrices)

rng = np.random.default_rng(0)
print("generating 200 training and 40 test puzzles ...")
train_set = [sudoku.generate(4, int(rng.integers(4, 9)), rng) for _ in range(200)]
test_set = [sudoku.generate(4, int(rng.integers(4, 7)), rng) for _ in range(40)]

cfg = TrainConfig(size=4, loss="masked-npll", k=7, lr=1e-3,
                  anneal_epoch=80, anneal_factor=0.8,
                  l1_lambda=8e-3, l1_lambda_diag=5e-4,
                  hidden_width=64, hidden_layers=4,
                  max_epochs=100, seed=0)
print("training (k=%d muted messages, %d epochs) ..." % (cfg.k, cfg.max_epochs))
store, log = train(cfg, train_set, [])
print("final training loss per sample: %.3f" % log[-1]["loss"])

acc = evaluate(store, test_set, cfg=cfg).accuracy
print("test accuracy on low-hint puzzles: %.0f%%" % (100 * acc))
print()

report = learned_rule_report(store, 4)
summary = report.summary()
truth = set(sudoku.unit_sharing_pairs(4))
spurious = [p for p, c in report.classes.items()
            if c == "difference-constraint" and p not in truth]
missed = [p for p in truth
          if report.classes[p] != "difference-constraint"]
print("recovered difference constraints: %d / %d"
      % (summary["difference_constraints"], len(truth)))
print("spurious: %d, missed: %d" % (len(spurious), len(missed)))
print("constrained pairs:   min diagonal cost %.2f"
      % min(report.min_diag[p] for p in truth))
print("unconstrained pairs: max diagonal cost %.2f"
      % max(report.min_diag[p] for p in report.classes if p not in truth))

# one learned matrix, next to what the rule says it should be
pair = min(truth)
pairs, mats, _, _ = predict_pair_matrices(store, 4)
learned = mats[pairs.index(pair)]
print()
print("learned cost matrix for pair %s (a same-row pair):" % (pair,))
print(np.array_str(learned, precision=2, suppress_small=True))

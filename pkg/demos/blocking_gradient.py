"""Why pseudo-likelihood misses redundant constraints, and how masking fixes it.

Four binary variables in a chain: Y0 != Y1, a middle pair we would like to
learn, and Y2 != Y3.  The outer constraints are already learned (soft cost 20).
Given the observation y = (0, 1, 1, 0), each middle variable's conditional is
already pinned by its outer neighbor, so the gradient on the middle pair is
numerically zero: the constraint is redundant in context and invisible to
plain pseudo-likelihood.

Muting the outer messages restores a uniform conditional on the middle
variables and a large gradient on the middle pair.
"""

import numpy as np

from cfnlearn import CostFunctionNetwork
from cfnlearn.losses import MaskPlan, npll, masked_npll

HIGH = 20.0

net = CostFunctionNetwork([2, 2, 2, 2])
neq = np.array([[HIGH, 0.0], [0.0, HIGH]])
net.add_pair(0, 1, neq)
net.add_pair(1, 2, np.zeros((2, 2)))  # the constraint we want to learn
net.add_pair(2, 3, neq)

y = (0, 1, 1, 0)

plain = npll(net, y)
print("plain npll gradient on the middle pair:")
print(plain.grad_pairs[(1, 2)])
print("largest magnitude: %.2e" % np.max(np.abs(plain.grad_pairs[(1, 2)])))
print()

# mute the outer carrier of each middle variable
plan = MaskPlan([frozenset(), frozenset({0}), frozenset({3}), frozenset()])
masked = masked_npll(net, y, plan)
print("masked npll gradient on the middle pair (outer messages muted):")
print(masked.grad_pairs[(1, 2)])
print("largest magnitude: %.2f" % np.max(np.abs(masked.grad_pairs[(1, 2)])))

"""Parameter sets of the synthetic scenarios.

Every number used to build a scenario population lives here so that the
scenario-level test expectations are pinned to one place.

Population A is the same base model in every scenario except ``u3_only``;
population B modifies it as follows:

identical
    B is A.
income_shift
    B's gamma component means are 1.10 times A's; nothing else changes.
all_shift
    Every margin improves in the first-order sense (income means x1.25,
    health component means +0.06, all ordinal thresholds -0.35) with the
    correlation matrix shared, so B dominates A four-variately.
mixed_signs
    Income means x1.10 but health component means -0.05: the marginal
    comparisons point in opposite directions.
u3_only
    A has a dispersed single-component income (mean 40,000, shape 2); B has
    a higher mean and a thinner upper tail (44,000, shape 5), so the income
    CDFs cross near 60,000 while B's integrated CDF is lower everywhere.
    The other margins improve mildly.  B is better for every concave
    poverty-averse utility but not for every increasing one.
"""
from __future__ import annotations

import numpy as np

BASE_CORRELATION = np.array([
    [1.00, 0.45, 0.30, 0.20],
    [0.45, 1.00, 0.25, 0.35],
    [0.30, 0.25, 1.00, 0.15],
    [0.20, 0.35, 0.15, 1.00],
])

BASE_INCOME = {"weights": (0.6, 0.4), "means": (25000.0, 60000.0), "shapes": (3.0, 5.0)}
BASE_HEALTH = {"weights": (0.3, 0.7), "precisions": (8.0, 20.0), "means": (0.45, 0.75)}
BASE_EDUCATION = (-1.0, -0.2, 0.5, 1.3)
BASE_HAPPINESS = (-1.6, -0.8, 0.1, 1.0)

INCOME_SHIFT_FACTOR = 1.10

ALL_SHIFT_INCOME_FACTOR = 1.25
ALL_SHIFT_HEALTH_DELTA = 0.06
ALL_SHIFT_THRESHOLD_DELTA = -0.35

MIXED_INCOME_FACTOR = 1.10
MIXED_HEALTH_DELTA = -0.05

U3_INCOME_A = {"weights": (1.0,), "means": (40000.0,), "shapes": (2.0,)}
U3_INCOME_B = {"weights": (1.0,), "means": (44000.0,), "shapes": (5.0,)}
U3_HEALTH_DELTA = 0.05
U3_THRESHOLD_DELTA = -0.30

DEFAULT_N = 5000
DEFAULT_SEED = 20240601

# skewed scheme: records are kept with probability SKEW_FLOOR + (1 - SKEW_FLOOR) * F(income)
# and carry the inverse probability as their weight
SKEW_FLOOR = 0.25

SCENARIO_NAMES = ("identical", "income_shift", "all_shift", "mixed_signs", "u3_only")

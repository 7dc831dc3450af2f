"""Single source of truth for acceptance envelopes and default budgets.

Every asserted window lives here so the test suite and the CLI runner
check the same numbers.  Growth-law windows are empirical envelopes for
desk-scale degrees; they are not claims about the sharp constants.
"""

import math

# --- worst-case growth (L2 eigenvalue route) ---
WORST_L2_SLOPE_WINDOW = (1.85, 2.05)
WORST_L2_N_RANGE = range(2, 25)
WORST_L2_MUS = (0.0, 0.5, 1.0)
WORST_L2_RATIO_SPREAD = 10.0  # max/min of value/n^2 across the n range

# --- sharpness via the lifted univariate candidate ---
SHARPNESS_SLOPE_WINDOW = (1.9, 2.1)
SHARPNESS_1D_NS = (4, 8, 16, 32, 64)
SHARPNESS_PS = (1.0, 2.0, 4.0)
SHARPNESS_2D_NS = (2, 4, 6, 8)
LIFTED_VS_WORST_TOL = 1e-6

# --- average case (Monte Carlo + trace formula) ---
AVERAGE_SLOPE_MAX = 1.6
AVERAGE_NS = range(2, 17)
AVERAGE_SAMPLES = 2000
AVERAGE_TRACE_WINDOW = (0.2, 5.0)  # Monte Carlo mean / trace-formula value

# --- trace identity ---
TRACE_IDENTITY_RTOL = 1e-8
TRACE_NS_MAX = 12

# --- Christoffel comparability ---
CHRISTOFFEL_NS = (4, 8, 16, 32)
CHRISTOFFEL_MUS = (0.0, 0.5, 2.0)
CHRISTOFFEL_P2_WINDOW = 50.0
CHRISTOFFEL_P1_WINDOW = 1e3
CHRISTOFFEL_P1_NS = (2, 4, 8)
CHRISTOFFEL_RADIAL_FRACTIONS = (0.0, 0.5, 0.9, 0.99)  # plus 1 - 1/n^2 per n

# --- kernel identities ---
REPRODUCING_RTOL = 1e-8    # relative to sup|P|
DERIVATIVE_REPR_RTOL = 1e-7  # relative to sup|dP|
KERNEL_IDENTITY_NS = (2, 4, 8)
KERNEL_IDENTITY_MUS = (0.0, 0.5, 1.0)
KERNEL_IDENTITY_SAMPLES = 20

# --- kernel derivative L1 growth ---
DERIV_L1_NS = (4, 8, 16, 32)
DERIV_L1_MUS = (0.5, 1.0)
DERIV_L1_SPREAD = 20.0  # max/min of ||d L_n||_1 / n^2 across the n set

# --- needle polynomials ---
NEEDLE_NS = (8, 16, 32)
NEEDLE_WINDOW = 1e3
NEEDLE_NONNEG_FLOOR = -1e-9
NEEDLE_GRID_POINTS = 10_000

# --- metric / covering ---
CHORD_IDENTITY_TOL = 1e-12
METRIC_PAIR_COUNT = 10_000
QUASI_TRIANGLE_NS = (1, 4, 16, 64)
COVERING_EPSILONS = (math.pi / 4, math.pi / 8, math.pi / 16)
OVERLAP_CEILING_D2 = 30

# --- hand-value regression ---
HAND_WORST_L2_N1 = 2.0
HAND_TRACE_N1 = 4.0
HAND_VALUE_TOL = 1e-10

# --- default budgets ---
GRID_RESOLUTION = {2: 10_000, 3: 100_000}
MEASURE_THETA_NODES = 32   # per panel of the metric-cap quadrature
MEASURE_PHI_NODES = 48
MC_DEFAULT_BUDGET = 100_000
NORM_RULE_EXTRA_DEGREE = 20   # oversampling for non-polynomial integrands
NEEDLE_RULE_MARGIN = 64
BOUNDED_RATIO_SPREAD = 50.0  # generic "bounded over n" operationalization

from fractions import Fraction

### DEFAULTS ###

# parabolic grid: time-periodic [0, T), space-periodic [0, L)^3, ht = hx^2
grid_nx = 16
box_length = 4.0
box_time = 4.0

# kernel
mass = 1.0

# grades
eps = Fraction(1, 128)
eps_minus = Fraction(1, 16384)
grade_bound = Fraction(2)

# lie algebra
lie_algebra = "su2"

# noise / model
rho = 0.5
seed = 0
base_points = [(0, 0, 0, 0), (1, 1, 0, 0), (2, 0, -1, 1)]
coupling = 1.0

# bphz
lambda_bar = 1.0
samples = 64
antithetic = True
moment_order = 3

# verification
lp_exponent = 2
scaling_lambdas = 6
cauchy_halvings = 3
slope_window = (-0.65, -0.40)
cauchy_ratio = 0.95
algebra_tolerance = 1e-9
route_tolerance = 1e-8
weight_exponent_factor = Fraction(5, 24)

# langevin
langevin_nx = 8
langevin_dt = 0.01
langevin_horizon = 1.0
langevin_blowup = 1e6

# performance
# 0 means all available cores
workers = 0

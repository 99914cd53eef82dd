"""Optimal designs for discriminating between regression models.

T-, KL- and D_s-optimal designs on an interval, best uniform approximation
(Remes exchange and nonlinear minimax), and Monte Carlo checks of the
resulting tests.
"""

from .approx import (
    BestApprox,
    best_approximation,
    extremal_set,
    grid_minimax,
    nonlinear_best_approx,
    remes_exchange,
)
from .core import Design, DesignSpace, ExactDesign, make_design, merge_support, mix, round_design
from .criteria import (
    CriterionValue,
    InfoMatrices,
    ds_value,
    gram_ratio,
    information_matrices,
    kl_distance_gaussian,
    kl_value,
    schur_noncentrality,
    t_value,
)
from .errors import DiscrimDesError, NumericalError, ValidationError
from .models import (
    BasisSet,
    ExpSumModel,
    FixedMean,
    GaussianObsModel,
    LinearModel,
    NestedPair,
    Precision,
    check_chebyshev_system,
    eval_gradient,
    eval_mean,
)
from .simulate import FTest, LRTest, SimConfig, SimReport, simulate_mse, simulate_power
from .solvers import (
    DesignPolytope,
    OptimalityReport,
    enumerate_t_optimal,
    modify_design,
    solve_ds,
    solve_kl_exchange,
    solve_t_chebyshev,
    solve_t_exchange,
    support_bound_check,
    verify_t_optimal,
)

__version__ = "0.1.0"

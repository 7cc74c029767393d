"""O(N) implicit real-space solvers for Cahn-Hilliard type gradient flows.

Modified-Helmholtz inverses are applied by Green's-function fast
convolution; fourth- and sixth-order implicit operators are factored into
such inverses and iterated with lagged nonlinear terms.
"""
from .adaptive import Estimator, RipeningMonitor, StepController, control_step, run_adaptive
from .drivers import FCHStepper, fch_be_step, vch_adaptive_run, vch_be_step
from .factorization import Mode, plan_quartic, plan_sextic
from .grid import Grid1D, Grid2D, centered_gradient_sq, max_norm, mean
from .helmholtz import apply_Linv_periodic, fast_convolve, make_plan
from .models import CHModel, SixthOrderModel, VCHModel
from .steppers import Method, NonConvergence, StepperConfig, TimeStepper

__version__ = "0.1.0"

__all__ = [
    "CHModel", "Estimator", "FCHStepper", "Grid1D", "Grid2D", "Method", "Mode",
    "NonConvergence", "RipeningMonitor", "SixthOrderModel", "StepController",
    "StepperConfig", "TimeStepper", "VCHModel", "apply_Linv_periodic",
    "centered_gradient_sq", "control_step", "fast_convolve", "fch_be_step",
    "make_plan", "max_norm", "mean", "plan_quartic", "plan_sextic", "run_adaptive",
    "vch_adaptive_run", "vch_be_step",
]

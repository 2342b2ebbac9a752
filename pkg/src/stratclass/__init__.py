"""Strategic classification: best responses, robust training and evaluation.

Agents with features x move to z at cost c(x, z) < 2 to get a positive
classification from a published score model h. This package computes such
responses (closed form, gradient ascent, Lagrangian dual), trains models
that anticipate them (REGD) and measures the outcome.
"""

from .costs import CostFn, cost, cost_grad_z
from .data import Dataset, gen_two_gaussians, gen_twin_moons, load_credit_csv, load_credit_split, split
from .errors import ConfigError, DataError, NumericalError, StratError
from .evaluation import EvalGrid, MetricValue, cross_eval, gaming_rate, strategic_accuracy
from .models import IcnnModel, LinearModel, MlpModel, ScoreModel, build_model, icnn_project
from .response import (ResponseConfig, ResponseStrategy, post_check, respond, respond_gradient,
                       respond_lagrangian, respond_linear_exact, solve_lagrangian)
from .training import TrainConfig, erm_train, regd_train

__version__ = "0.1.0"

"""Finite-horizon distributionally robust regret-optimal measurement-feedback
control synthesis."""

from .adversary import (AmbiguitySet, WorstCaseDistribution, cross_evaluate, expected_cost,
                        expected_regret, sample_disturbances, worst_case_distribution,
                        worst_case_gamma)
from .baselines import BaselineKind, hinf_controller, lqg_controller, ro_mf_controller
from .benchmark import (ControllerOperators, RegretOperator, controller_from_youla,
                        noncausal_benchmark, regret_operator, transfer_operator,
                        youla_from_controller)
from .lifting import Dims, LiftedSystem, StateSpace, lift_system
from .opfactor import (FactorizationSet, GammaOperators, build_factorizations, causal_split,
                       cholesky_forward, cholesky_reverse, gamma_operators)
from .synthesis import (SynthesisConfig, SynthesisResult, assemble_dr_lmi,
                        assemble_dr_lmi_compact, inner_value, minimize_over_gamma, synthesize)

__version__ = "0.1.0"

"""Bayesian multidimensional welfare and poverty dominance.

A Gaussian copula joins a gamma mixture for income, a beta mixture for a
bounded health score and two probit models for ordinal attributes.  The
posterior is simulated by MCMC and every dominance criterion is evaluated
draw by draw, giving posterior probabilities of dominance.
"""
__version__ = "0.1.0"

from .copula import CorrelationMatrix, JointModel, joint_cdf, mvn_cdf, sample_joint
from .dominance import (
    CRITERIA,
    DominanceReport,
    DominanceVerdict,
    EvaluationGrid,
    Outcome,
    PovertyLines,
    build_default_grid,
    evaluate_pair,
    posterior_dominance_probability,
    restrict,
)
from .errors import DomainError, IngestionError, NumericError, ParameterError, WelfareError
from .harness import generate, make_scenario
from .indices import af_counting, headcount, mwi
from .ingest import ingest
from .margins import BetaMixture, GammaMixture, OrdinalModel
from .sampler import ChainConfig, PosteriorDraws, PriorConfig, WeightedSample, run_chain, select_num_components

__all__ = [
    "BetaMixture", "CRITERIA", "ChainConfig", "CorrelationMatrix", "DomainError", "DominanceReport",
    "DominanceVerdict", "EvaluationGrid", "GammaMixture", "IngestionError", "JointModel",
    "NumericError", "OrdinalModel", "Outcome", "ParameterError", "PosteriorDraws", "PovertyLines",
    "PriorConfig", "WeightedSample", "WelfareError", "__version__", "af_counting",
    "build_default_grid", "evaluate_pair", "generate", "headcount", "ingest", "joint_cdf",
    "make_scenario", "mvn_cdf", "mwi", "posterior_dominance_probability", "restrict", "run_chain",
    "sample_joint", "select_num_components",
]

"""Posterior simulation for the copula model."""
from .chain import run_chain, run_correlation_chain
from .selection import select_num_components
from .types import (
    ChainConfig,
    PosteriorDraws,
    PriorConfig,
    WeightedSample,
    draw_columns,
    flatten_model,
    unflatten_model,
)
from .updates import (
    ChainState,
    bootstrap_pseudo_sample,
    conditional_moments,
    initial_state,
    load_pseudo_sample,
    truncated_normal,
    update_correlation,
    update_latents,
    update_margins,
)
from .vine import corr_to_partials, partials_to_corr

__all__ = [
    "ChainConfig", "ChainState", "PosteriorDraws", "PriorConfig", "WeightedSample",
    "bootstrap_pseudo_sample", "conditional_moments", "corr_to_partials", "draw_columns",
    "flatten_model", "initial_state", "load_pseudo_sample", "partials_to_corr", "run_chain",
    "run_correlation_chain", "select_num_components", "truncated_normal", "unflatten_model",
    "update_correlation", "update_latents", "update_margins",
]

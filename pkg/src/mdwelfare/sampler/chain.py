"""Chain driver with checkpointing, plus a correlation-only chain."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..copula import JointModel
from ..errors import NumericError, ParameterError
from .types import ChainConfig, PosteriorDraws, PriorConfig, WeightedSample
from .updates import (
    ChainState,
    _Adapt,
    _Moments,
    bootstrap_indices,
    correlation_step,
    initial_state,
    load_pseudo_sample,
    log_posterior,
    state_from_model,
    store_latents,
    update_correlation,
    update_latents,
    update_margins,
)

__all__ = ["run_chain", "run_correlation_chain", "CHECKPOINT_VERSION"]

CHECKPOINT_VERSION = 2
_ARRAYS = ("inc_w", "inc_mu", "inc_nu", "hl_w", "hl_s", "hl_m", "gamma", "source_latent")


def _save_checkpoint(path, state: ChainState, rng, iteration: int, kept: list, logp: list,
                     config: ChainConfig) -> None:
    snap = {
        "version": CHECKPOINT_VERSION,
        "iteration": iteration,
        "config": config.__dict__,
        "rng": rng.bit_generator.state,
        "state": {name: getattr(state, name).tolist() for name in _ARRAYS},
        "tau": [t.tolist() for t in state.tau],
        "clamps": state.clamps,
        "adapt": {k: v.to_dict() for k, v in state.adapt.items()},
        "moments": {k: v.to_dict() for k, v in state.moments.items()},
        "draws": [row.tolist() for row in kept],
        "log_posterior": list(logp),
    }
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps(snap))
    tmp.replace(path)


def _load_checkpoint(path, state: ChainState, rng, config: ChainConfig):
    snap = json.loads(Path(path).read_text())
    if snap.get("version") != CHECKPOINT_VERSION:
        raise ParameterError("unsupported checkpoint version")
    if snap["config"] != config.__dict__:
        raise ParameterError("checkpoint was written with a different chain configuration")
    rng.bit_generator.state = snap["rng"]
    for name in _ARRAYS:
        setattr(state, name, np.array(snap["state"][name], dtype=float))
    state.tau = [np.array(t, dtype=float) for t in snap["tau"]]
    state.clamps = snap["clamps"]
    state.adapt = {k: _Adapt(**v) for k, v in snap["adapt"].items()}
    state.moments = {k: _Moments(**v) for k, v in snap["moments"].items()}
    kept = [np.array(r, dtype=float) for r in snap["draws"]]
    return snap["iteration"], kept, list(snap["log_posterior"])


def run_chain(sample: WeightedSample, priors: PriorConfig, config: ChainConfig,
              k_g: int, k_b: int, *, initial: JointModel | None = None,
              checkpoint_path=None, checkpoint_every: int | None = None,
              resume: bool = False, stop_after: int | None = None,
              progress=None) -> PosteriorDraws:
    """Run the sampler and return the retained draws.

    Each iteration draws a weighted Bayesian-bootstrap pseudo-sample (unless
    ``config.bootstrap`` is False), then updates the margins, the ordinal
    latents and the correlation matrix.  With ``checkpoint_path`` the state is
    saved every ``checkpoint_every`` iterations; ``resume=True`` continues
    from the saved state and yields exactly the draws of an uninterrupted
    run.  ``stop_after`` ends the run early (after writing a checkpoint),
    which is mainly useful for testing resumption.
    """
    if k_g < 1 or k_b < 1:
        raise ParameterError("component counts must be at least 1")
    rng = np.random.default_rng(config.seed)
    if initial is None:
        state = initial_state(sample, k_g, k_b, priors, rng)
    else:
        if initial.income.n_components != k_g or initial.health.n_components != k_b:
            raise ParameterError("initial model does not match the component counts")
        state = state_from_model(initial, sample, priors, rng)
    start, kept, logp = 0, [], []
    if resume:
        if checkpoint_path is None or not Path(checkpoint_path).exists():
            raise ParameterError("no checkpoint to resume from")
        start, kept, logp = _load_checkpoint(checkpoint_path, state, rng, config)

    n = len(sample)
    all_idx = np.arange(n)
    for t in range(start, config.iterations):
        state.adapting = t < config.adapt_until
        try:
            idx = bootstrap_indices(sample.weights, rng) if config.bootstrap else all_idx
            load_pseudo_sample(state, sample, idx)
            update_margins(state, None, rng)
            update_latents(state, None, rng)
            update_correlation(state, rng)
            store_latents(state)
            if t >= config.burn_in and (t - config.burn_in) % config.thin == 0:
                kept.append(state.flat())
                logp.append(log_posterior(state))
        except (NumericError, np.linalg.LinAlgError, FloatingPointError) as exc:
            raise NumericError(f"sampler failed at iteration {t}: {exc}") from exc
        done = t + 1
        if progress is not None:
            progress(done)
        if checkpoint_path is not None and checkpoint_every and done % checkpoint_every == 0:
            _save_checkpoint(checkpoint_path, state, rng, done, kept, logp, config)
        if stop_after is not None and done >= stop_after:
            if checkpoint_path is not None:
                _save_checkpoint(checkpoint_path, state, rng, done, kept, logp, config)
            break

    acceptance = {name: ad.rate() for name, ad in sorted(state.adapt.items())}
    acceptance["latent_clamps"] = state.clamps
    params = np.array(kept) if kept else np.zeros((0, len(state.flat())))
    return PosteriorDraws(params, np.array(logp), acceptance, config, k_g, k_b, sample.n_categories)


def run_correlation_chain(latents, config: ChainConfig, eta: float = 1.0,
                          initial=None) -> tuple[np.ndarray, dict]:
    """Sample a correlation matrix given fully observed normal scores.

    Uses the same random-walk kernel as the full sampler.  Returns the
    retained matrices, shape ``(M, d, d)``, and the acceptance rates.
    """
    z = np.asarray(latents, dtype=float)
    n, d = z.shape
    s = z.T @ z
    rng = np.random.default_rng(config.seed)
    g = np.eye(d) if initial is None else np.array(initial, dtype=float)
    adapt: dict = {}
    out = []
    for t in range(config.iterations):
        g = correlation_step(g, s, n, adapt, t < config.adapt_until, eta, rng)
        if t >= config.burn_in and (t - config.burn_in) % config.thin == 0:
            out.append(g)
    return np.array(out), {k: v.rate() for k, v in adapt.items()}

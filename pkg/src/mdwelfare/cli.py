"""Command-line interface.

Commands: ``simulate``, ``select``, ``fit``, ``dominance``, ``indices`` and
``run`` (the whole pipeline driven by a TOML config).  Every command is
deterministic given its inputs and ``--seed``.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__, kernels, reports
from .config import RunConfig, load_config, load_grid, parse_criteria, parse_lines
from .dominance import ATTR_NAMES, PovertyLines, posterior_dominance_probability, restrict
from .errors import WelfareError
from .harness import generate, make_scenario, write_csv
from .indices import (
    af_counting,
    headcount,
    mwi,
    posterior_mean_difference,
    weighted_sample_mean,
)
from .ingest import ingest
from .sampler import ChainConfig, PosteriorDraws, run_chain, select_num_components
from .sampler.types import WeightedSample
from .scenarios import SCENARIO_NAMES

__all__ = ["main", "run_pipeline", "StageError", "derive_seed", "sample_digest"]

log = logging.getLogger("mdwelfare")

POPULATIONS = ("A", "B")


class StageError(WelfareError):
    """A pipeline stage failed; the message names the stage and the cause."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


def sample_digest(sample: WeightedSample) -> str:
    h = hashlib.sha256()
    for arr in (sample.income, sample.health, sample.education, sample.happiness, sample.weights):
        h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
    return h.hexdigest()


def derive_seed(root: int, digest: str, tag: str) -> int:
    """Seed for one stage of one population, from the root seed and the data content.

    Populations with identical data therefore get identical seeds.
    """
    raw = hashlib.sha256(f"{int(root)}:{tag}:{digest}".encode()).digest()
    return int.from_bytes(raw[:8], "little") >> 1


# -- stages -------------------------------------------------------------------

def _select(sample, cfg: RunConfig, seed: int):
    need = tuple(m for m, k in (("income", cfg.k_g), ("health", cfg.k_b)) if k == "auto")
    if not need:
        return cfg.k_g, cfg.k_b, None
    res = select_num_components(sample, max_k=cfg.max_k, holdout_fraction=cfg.holdout_fraction,
                                seed=seed, priors=cfg.priors, tie_tol=cfg.tie_tol, margins=need,
                                rule=cfg.selection_rule)
    k_g = res.k_g if cfg.k_g == "auto" else cfg.k_g
    k_b = res.k_b if cfg.k_b == "auto" else cfg.k_b
    return k_g, k_b, {"rule": cfg.selection_rule, "mae_income": list(res.mae_income),
                      "mae_health": list(res.mae_health), "se_income": list(res.se_income),
                      "se_health": list(res.se_health)}


def _fit(sample, cfg: RunConfig, root: int):
    digest = sample_digest(sample)
    sel_seed = derive_seed(root, digest, "select")
    chain_seed = derive_seed(root, digest, "chain")
    k_g, k_b, sel = _select(sample, cfg, sel_seed)
    chain = dataclasses.replace(cfg.chain, seed=chain_seed)
    draws = run_chain(sample, cfg.priors, chain, k_g, k_b)
    info = {"data_digest": digest, "selection_seed": sel_seed, "chain_seed": chain_seed,
            "k_g": k_g, "k_b": k_b, "selection": sel, "draws": len(draws),
            "acceptance": draws.acceptance}
    return draws, info


def _dominance(draws, cfg: RunConfig, grid, lines, seeds):
    full = posterior_dominance_probability(draws["A"], draws["B"], cfg.criteria, grid,
                                           seeds=seeds, workers=cfg.workers)
    full = full if isinstance(full, dict) else {full.criterion: full}
    restricted = {}
    if cfg.restricted:
        restricted = posterior_dominance_probability(draws["A"], draws["B"], cfg.criteria, grid,
                                                     restricted=True, lines=lines, seeds=seeds,
                                                     workers=cfg.workers)
        restricted = restricted if isinstance(restricted, dict) else {restricted.criterion: restricted}
    return full, restricted


def _indices(samples, draws, cfg: RunConfig, lines):
    a, b = samples["A"], samples["B"]
    out = {"source": "sample", "model_source": "posterior"}
    out["mean_difference"] = {attr: posterior_mean_difference(draws["A"], draws["B"], attr)
                              for attr in ATTR_NAMES}
    out["sample_means"] = {p: {attr: weighted_sample_mean(samples[p], attr) for attr in ATTR_NAMES}
                           for p in POPULATIONS}
    mwi_change = {}
    for attr in ATTR_NAMES[1:]:
        sub = ("income", attr)
        mwi_change[attr] = mwi(b, cfg.benchmarks, sub, warn=False).value - mwi(a, cfg.benchmarks, sub, warn=False).value
    mwi_change["all"] = mwi(b, cfg.benchmarks, warn=False).value - mwi(a, cfg.benchmarks, warn=False).value
    out["mwi_change"] = mwi_change
    rule = cfg.deprivation
    out["hc1_change"] = {attr: headcount(a, lines, attr, rule).value - headcount(b, lines, attr, rule).value
                         for attr in ATTR_NAMES}
    out["hc2_change"] = {attr: headcount(a, lines, ("income", attr), rule).value
                         - headcount(b, lines, ("income", attr), rule).value for attr in ATTR_NAMES[1:]}
    af = {p: [af_counting(samples[p], lines, j, rule) for j in range(1, 5)] for p in POPULATIONS}
    out["af"] = {p: [{"cutoff": r.cutoff, "MH": r.mh, "A": r.a, "MHA": r.mha} for r in af[p]]
                 for p in POPULATIONS}
    out["mh_change"] = {j: af["A"][j - 1].mh - af["B"][j - 1].mh for j in range(1, 5)}
    out["mha_change"] = {j: af["A"][j - 1].mha - af["B"][j - 1].mha for j in range(1, 5)}
    return out


def _emit(out_dir: Path, full, restricted, idx, draws, grid, grid_r, manifest):
    out_dir.mkdir(parents=True, exist_ok=True)
    dom = {
        "schema": reports.SCHEMAS["dominance_report.json"],
        "grid_digest": grid.digest(),
        "restricted_grid_digest": grid_r.digest() if grid_r is not None else None,
        "reports": [r.to_dict() for r in full.values()] + [r.to_dict() for r in restricted.values()],
    }
    reports.write_json(out_dir / "dominance_report.json", dom)
    jsonable = json.loads(json.dumps(idx, default=str))
    reports.write_json(out_dir / "indices.json", {"schema": reports.SCHEMAS["indices.json"], **jsonable})
    tables = {
        "table3.csv": reports.table3(full, idx["mean_difference"]),
        "table4.csv": reports.table4(full, idx["mwi_change"]),
        "table5.csv": reports.table5(restricted, idx["hc1_change"]),
        "table6.csv": reports.table6(restricted, idx["hc2_change"]),
        "table7.csv": reports.table7(restricted, idx["mh_change"], idx["mha_change"]),
        "density_curves.csv": reports.density_curves(draws["A"], draws["B"], grid),
    }
    for name, (header, rows) in tables.items():
        reports.write_csv_rows(out_dir / name, header, rows)
    for p in POPULATIONS:
        draws[p].to_csv(out_dir / f"draws_{p}.csv")
    reports.write_json(out_dir / "run_manifest.json", manifest)


def _versions() -> dict:
    return {"mdwelfare": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "kernels": kernels.BACKEND}


def run_pipeline(cfg: RunConfig) -> Path:
    """Ingest, select, fit, evaluate dominance and indices, and write every report."""
    stage = "config"
    try:
        cfg.check_inputs()
        grid = cfg.evaluation_grid()
        lines = cfg.poverty_lines()
        grid_r = restrict(grid, lines) if cfg.restricted else None

        stage = "ingest"
        samples, audits = {}, {}
        for p in POPULATIONS:
            samples[p], audit = ingest(cfg.inputs[p], allow_drops=cfg.allow_drops)
            audits[p] = audit.to_dict()
            log.info("ingested %s: %d records (%d dropped)", p, audit.n_out, audit.n_dropped_income)

        stage = "fit"
        with ThreadPoolExecutor(max_workers=2) as pool:
            futures = {p: pool.submit(_fit, samples[p], cfg, cfg.seed) for p in POPULATIONS}
            results = {p: f.result() for p, f in futures.items()}
        draws = {p: results[p][0] for p in POPULATIONS}
        fits = {p: results[p][1] for p in POPULATIONS}
        if len(draws["A"]) != len(draws["B"]):
            raise WelfareError("the two chains retained different numbers of draws")

        stage = "dominance"
        seeds = {"root": cfg.seed, "A": fits["A"]["chain_seed"], "B": fits["B"]["chain_seed"]}
        full, restricted = _dominance(draws, cfg, grid, lines, seeds)

        stage = "indices"
        idx = _indices(samples, draws, cfg, lines)

        stage = "report"
        manifest = {
            "schema": reports.SCHEMAS["run_manifest.json"],
            "schemas": reports.SCHEMAS,
            "versions": _versions(),
            "seed": cfg.seed,
            "config": cfg.to_dict(),
            "inputs": audits,
            "fits": fits,
            "grid_digest": grid.digest(),
            "restricted_grid_digest": grid_r.digest() if grid_r is not None else None,
            "lines": dataclasses.asdict(lines),
            "draws": len(draws["A"]),
        }
        out = Path(cfg.out)
        _emit(out, full, restricted, idx, draws, grid, grid_r, manifest)
        return out
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, exc) from exc


# -- command handlers ---------------------------------------------------------

def _config_from(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None):
        cfg.out = args.out
    if getattr(args, "criteria", None):
        cfg.criteria = parse_criteria(args.criteria)
    if getattr(args, "grid", None):
        cfg.grid = args.grid
    if getattr(args, "lines", None):
        cfg.lines = parse_lines(args.lines, load_grid(cfg.grid))
    return cfg


def _cmd_simulate(args) -> int:
    sc = make_scenario(args.scenario, n=args.n, weights=args.weights,
                       seed=args.seed if args.seed is not None else make_scenario(args.scenario).seed)
    a, b = generate(sc)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_csv(a, out / "A.csv")
    write_csv(b, out / "B.csv")
    reports.write_json(out / "scenario.json", {
        "name": sc.name, "n": sc.n, "weights": sc.weights, "seed": sc.seed,
        "components": list(sc.components),
    })
    print(out)
    return 0


def _cmd_select(args) -> int:
    cfg = _config_from(args)
    sample, _ = ingest(args.input, allow_drops=cfg.allow_drops)
    seed = derive_seed(cfg.seed, sample_digest(sample), "select")
    res = select_num_components(sample, max_k=args.max_k or cfg.max_k,
                                holdout_fraction=cfg.holdout_fraction, seed=seed,
                                priors=cfg.priors, tie_tol=cfg.tie_tol,
                                rule=cfg.selection_rule)
    result = {"k_g": res.k_g, "k_b": res.k_b, "rule": cfg.selection_rule,
              "mae_income": list(res.mae_income), "mae_health": list(res.mae_health),
              "se_income": list(res.se_income), "se_health": list(res.se_health), "seed": seed}
    text = json.dumps(result, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "selection.json").write_text(text + "\n")
    print(text)
    return 0


def _cmd_fit(args) -> int:
    cfg = _config_from(args)
    if args.k_g is not None:
        cfg.k_g = args.k_g
    if args.k_b is not None:
        cfg.k_b = args.k_b
    if args.iterations is not None or args.burn_in is not None:
        cfg.chain = dataclasses.replace(
            cfg.chain,
            iterations=args.iterations if args.iterations is not None else cfg.chain.iterations,
            burn_in=args.burn_in if args.burn_in is not None else cfg.chain.burn_in,
        )
    sample, audit = ingest(args.input, allow_drops=cfg.allow_drops)
    draws, info = _fit(sample, cfg, cfg.seed)
    out = Path(args.out or "draws.csv")
    if out.suffix != ".csv":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "draws.csv"
    draws.to_csv(out)
    reports.write_json(out.with_suffix(".json"), {"ingest": audit.to_dict(), **info,
                                                  "chain": dataclasses.asdict(cfg.chain)})
    print(out)
    return 0


def _cmd_dominance(args) -> int:
    cfg = _config_from(args)
    grid = cfg.evaluation_grid()
    lines = cfg.poverty_lines()
    da, db = PosteriorDraws.from_csv(args.draws_a), PosteriorDraws.from_csv(args.draws_b)
    res = posterior_dominance_probability(da, db, cfg.criteria, grid, restricted=args.restricted,
                                          lines=lines, seeds={"root": cfg.seed}, workers=cfg.workers)
    res = res if isinstance(res, dict) else {res.criterion: res}
    g = restrict(grid, lines) if args.restricted else grid
    doc = {"schema": reports.SCHEMAS["dominance_report.json"], "grid_digest": g.digest(),
           "reports": [r.to_dict() for r in res.values()]}
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    reports.write_json(out / "dominance_report.json", doc)
    for r in res.values():
        print(f"{r.criterion}: pA={r.p_a:.4f} pB={r.p_b:.4f} pNone={r.p_none:.4f} (M={r.m})")
    return 0


def _cmd_indices(args) -> int:
    cfg = _config_from(args)
    lines = cfg.poverty_lines()
    samples = {"A": ingest(args.input_a, allow_drops=cfg.allow_drops)[0],
               "B": ingest(args.input_b, allow_drops=cfg.allow_drops)[0]}
    if args.draws_a and args.draws_b:
        draws = {"A": PosteriorDraws.from_csv(args.draws_a), "B": PosteriorDraws.from_csv(args.draws_b)}
        idx = _indices(samples, draws, cfg, lines)
    else:
        idx = _sample_indices(samples, cfg, lines)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    doc = json.loads(json.dumps(idx, default=str))
    reports.write_json(out / "indices.json", {"schema": reports.SCHEMAS["indices.json"], **doc})
    print(json.dumps(doc, sort_keys=True, indent=2))
    return 0


def _sample_indices(samples, cfg, lines) -> dict:
    idx = {}
    a, b = samples["A"], samples["B"]
    idx["sample_means"] = {p: {attr: weighted_sample_mean(samples[p], attr) for attr in ATTR_NAMES}
                           for p in POPULATIONS}
    idx["mwi"] = {p: mwi(samples[p], cfg.benchmarks, warn=False).value for p in POPULATIONS}
    idx["hc1_change"] = {attr: headcount(a, lines, attr, cfg.deprivation).value
                         - headcount(b, lines, attr, cfg.deprivation).value for attr in ATTR_NAMES}
    af = {p: [af_counting(samples[p], lines, j, cfg.deprivation) for j in range(1, 5)] for p in POPULATIONS}
    idx["af"] = {p: [{"cutoff": r.cutoff, "MH": r.mh, "A": r.a, "MHA": r.mha} for r in af[p]]
                 for p in POPULATIONS}
    return idx


def _cmd_run(args) -> int:
    try:
        cfg = _config_from(args)
    except WelfareError as exc:
        raise StageError("config", exc) from exc
    if args.restricted is not None:
        cfg.restricted = args.restricted
    out = run_pipeline(cfg)
    print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--seed", type=int, help="root seed")
    common.add_argument("--out", help="output directory (or file for fit)")
    common.add_argument("-v", "--verbose", action="store_true")
    dom = argparse.ArgumentParser(add_help=False)
    dom.add_argument("--criteria", help="comma-separated criteria")
    dom.add_argument("--grid", help="'default' or a JSON grid file")
    dom.add_argument("--lines", help="poverty lines z1,z2,z3,z4 (z1 may be 'auto')")

    p = argparse.ArgumentParser(prog="mdwelfare", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="write scenario samples as CSV")
    s.add_argument("--scenario", required=True, choices=SCENARIO_NAMES)
    s.add_argument("--n", type=int, default=5000)
    s.add_argument("--weights", choices=("uniform", "skewed"), default="uniform")
    s.set_defaults(func=_cmd_simulate)

    s = sub.add_parser("select", parents=[common], help="choose mixture component counts")
    s.add_argument("--input", required=True)
    s.add_argument("--max-k", type=int)
    s.set_defaults(func=_cmd_select)

    s = sub.add_parser("fit", parents=[common], help="run the sampler for one population")
    s.add_argument("--input", required=True)
    s.add_argument("--k-g", type=int)
    s.add_argument("--k-b", type=int)
    s.add_argument("--iterations", type=int)
    s.add_argument("--burn-in", type=int)
    s.set_defaults(func=_cmd_fit)

    s = sub.add_parser("dominance", parents=[common, dom], help="posterior dominance probabilities")
    s.add_argument("--draws-a", required=True)
    s.add_argument("--draws-b", required=True)
    s.add_argument("--restricted", action="store_true", help="use the grid truncated at the poverty lines")
    s.set_defaults(func=_cmd_dominance)

    s = sub.add_parser("indices", parents=[common, dom], help="welfare and poverty indices")
    s.add_argument("--input-a", required=True)
    s.add_argument("--input-b", required=True)
    s.add_argument("--draws-a")
    s.add_argument("--draws-b")
    s.set_defaults(func=_cmd_indices)

    s = sub.add_parser("run", parents=[common, dom], help="full pipeline from a config file")
    s.add_argument("--restricted", action=argparse.BooleanOptionalAction, default=None,
                   help="also evaluate the restricted (poverty) criteria")
    s.set_defaults(func=_cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except WelfareError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

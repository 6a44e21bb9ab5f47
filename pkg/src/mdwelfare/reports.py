"""Report files written by the command-line pipeline.

All files are plain CSV or JSON with deterministic content: floats are
written with ``repr`` and JSON keys are sorted.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .dominance import ATTR_NAMES, EvaluationGrid
from .margins import mixture_cdf, mixture_pdf

__all__ = [
    "SCHEMAS",
    "write_json",
    "write_csv_rows",
    "table3",
    "table4",
    "table5",
    "table6",
    "table7",
    "density_curves",
]

SCHEMAS = {
    "dominance_report.json": "mdwelfare-dominance/1",
    "indices.json": "mdwelfare-indices/1",
    "table3.csv": "mdwelfare-table3/1",
    "table4.csv": "mdwelfare-table4/1",
    "table5.csv": "mdwelfare-table5/1",
    "table6.csv": "mdwelfare-table6/1",
    "table7.csv": "mdwelfare-table7/1",
    "density_curves.csv": "mdwelfare-density/1",
    "run_manifest.json": "mdwelfare-manifest/1",
    "draws_A.csv": "mdwelfare-draws/1",
    "draws_B.csv": "mdwelfare-draws/1",
}

LABELS = {"income": "Income", "health": "Health", "education": "Education", "happiness": "Happiness"}
PAIR_LABELS = {"health": "Income and health", "education": "Income and education",
               "happiness": "Income and happiness"}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")
    return path


def write_csv_rows(path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    path = Path(path)
    path.write_text(buf.getvalue())
    return path


def _triple(reports: dict, label: str):
    rep = reports.get(label)
    if rep is None:
        return None, None, None
    return rep.p_a, rep.p_b, rep.p_none


def table3(full: dict, mean_diff: dict) -> tuple[list, list]:
    """Marginal FSD/SSD probabilities and posterior mean changes."""
    header = ["Criterion"] + [LABELS[a] for a in ATTR_NAMES]
    f = [_triple(full, f"fsd_uni[{a}]") for a in ATTR_NAMES]
    s = [_triple(full, f"ssd_uni[{a}]") for a in ATTR_NAMES]
    rows = [
        ["A FSD B"] + [t[0] for t in f],
        ["B FSD A"] + [t[1] for t in f],
        ["no dominance"] + [t[2] for t in f],
        ["mean(B) - mean(A)"] + [mean_diff.get(a) for a in ATTR_NAMES],
        ["A SSD B"] + [t[0] for t in s],
        ["B SSD A"] + [t[1] for t in s],
        ["no dominance"] + [t[2] for t in s],
    ]
    return header, rows


def _pair_table(reports: dict, index_change: dict, change_label: str):
    header = ["Attributes", change_label, "Dominance outcome",
              "FSD dF(y1,yj)<=0", "dP1j(z1;yj)<=0", "dP1j(z1;yj)<=0 and dHj(yj)<=0"]
    rows = []
    for attr in ATTR_NAMES[1:]:
        pair = f"[income,{attr}]"
        cols = [_triple(reports, c + pair) for c in ("fsd_biv", "ssd_biv", "u3_biv")]
        for k, outcome in enumerate(("A dom B", "B dom A", "No dom")):
            rows.append([PAIR_LABELS[attr] if k == 0 else "", index_change.get(attr) if k == 0 else None,
                         outcome] + [c[k] for c in cols])
    return header, rows


def table4(full: dict, mwi_change: dict):
    """Bivariate welfare-index changes with FSD and poverty-gap probabilities."""
    return _pair_table(full, mwi_change, "MWI(B) - MWI(A)")


def table5(restricted: dict, hc1_change: dict):
    """Restricted marginal FSD/SSD probabilities and headcount changes."""
    header = ["Criterion"] + [LABELS[a] for a in ATTR_NAMES]
    f = [_triple(restricted, f"fsd_uni[{a}]") for a in ATTR_NAMES]
    s = [_triple(restricted, f"ssd_uni[{a}]") for a in ATTR_NAMES]
    rows = [
        ["A FSD B"] + [t[0] for t in f],
        ["B FSD A"] + [t[1] for t in f],
        ["no dominance"] + [t[2] for t in f],
        ["HC1(A) - HC1(B)"] + [hc1_change.get(a) for a in ATTR_NAMES],
        ["A SSD B"] + [t[0] for t in s],
        ["B SSD A"] + [t[1] for t in s],
        ["no dominance"] + [t[2] for t in s],
    ]
    return header, rows


def table6(restricted: dict, hc2_change: dict):
    """Restricted bivariate dominance probabilities and joint headcount changes."""
    return _pair_table(restricted, hc2_change, "HC2(A) - HC2(B)")


def table7(restricted: dict, mh_change: dict, mha_change: dict):
    """Restricted four-variate dominance probabilities and counting-measure changes."""
    rows = [[f"MH{j}(A) - MH{j}(B)", mh_change.get(j)] for j in range(1, 5)]
    rows += [[f"MHA{j}(A) - MHA{j}(B)", mha_change.get(j)] for j in range(1, 5)]
    trip = {u: _triple(restricted, u) for u in ("u1", "u2", "u3")}
    for k, name in enumerate(("A dom B", "B dom A", "No dom")):
        for u in ("u1", "u2", "u3"):
            rows.append([f"{name} ({u.upper()})", trip[u][k]])
    return ["Criterion", "A vs B"], rows


def density_curves(draws_a, draws_b, grid: EvaluationGrid):
    """Posterior-mean marginal pdf and cdf on the continuous grids and
    posterior-mean category masses, for both populations."""
    header = ["attribute", "curve", "x", "A", "B"]
    rows = []
    cont = {}
    for label, draws in (("A", draws_a), ("B", draws_b)):
        models = draws.draws
        for j, attr in enumerate(("income", "health")):
            x = (grid.income, grid.health)[j]
            pdf = np.mean([mixture_pdf(x, m.margins[j]) for m in models], axis=0)
            cdf = np.mean([mixture_cdf(x, m.margins[j]) for m in models], axis=0)
            cont[(label, attr)] = (pdf, cdf)
        for j, attr in ((2, "education"), (3, "happiness")):
            cont[(label, attr)] = np.mean([m.margins[j].category_probs() for m in models], axis=0)
    for j, attr in enumerate(("income", "health")):
        x = (grid.income, grid.health)[j]
        for c, curve in enumerate(("pdf", "cdf")):
            for i, xi in enumerate(x):
                rows.append([attr, curve, float(xi), cont[("A", attr)][c][i], cont[("B", attr)][c][i]])
    for attr in ("education", "happiness"):
        for s in range(len(cont[("A", attr)])):
            rows.append([attr, "mass", s + 1, cont[("A", attr)][s], cont[("B", attr)][s]])
    return header, rows

"""Posterior summaries of N draws."""

from __future__ import annotations

import csv
from typing import Iterable, Sequence

import numpy as np

SCHEMA_VERSION = 1


def summarize_draws(draws, reference_pops: Sequence[float] = ()) -> dict:
    """Mode, mean, SD and 2.5%/97.5% quantiles of pooled N draws.

    The mode is the most frequent integer (smallest on ties); quantiles use
    linear interpolation between order statistics.
    """
    x = np.asarray(draws, dtype=np.int64)
    if x.size == 0:
        raise ValueError("no draws to summarize")
    values, counts = np.unique(x, return_counts=True)
    mean = float(x.mean())
    out = {
        "schema_version": SCHEMA_VERSION,
        "draws": int(x.size),
        "mode": int(values[np.argmax(counts)]),
        "mean": mean,
        "sd": float(x.std(ddof=1)) if x.size > 1 else 0.0,
        "q2.5": float(np.quantile(x, 0.025)),
        "q97.5": float(np.quantile(x, 0.975)),
    }
    if reference_pops:
        out["prevalence_percent"] = {
            f"{ref:g}": 100.0 * mean / ref for ref in reference_pops
        }
    return out


def read_chain_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: chain file has no draws")
    try:
        return np.array([int(r["N"]) for r in rows], dtype=np.int64)
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: malformed chain file ({exc})") from None


def pool_chains(paths: Iterable) -> np.ndarray:
    return np.concatenate([read_chain_csv(p) for p in paths])

"""Command-line front end.

Exit codes: 0 success, 2 usage, 3 data validation, 4 numerical failure.
Every command that writes an output directory leaves one ``manifest.json``
there; ``rdsize replay`` re-runs it.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .data import RDSDataError, load_observed, write_rds_csv
from .elicitation import degree_trend, gamma_for, p_lower_bound, solve_beta_tail
from .likelihood import DomainError, ImproperPosteriorError, Priors
from .sampler import SamplerConfig, SamplerError, run_gibbs
from .simulator import SimConfig, simulate_rds, gen_er_graph, simulate_study
from .study import replicate_rngs
from .summary import pool_chains, summarize_draws

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4
MANIFEST_SCHEMA = 1

log = logging.getLogger("rdsize")


class UsageError(Exception):
    pass


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_manifest(out: Path, ns, seeds, inputs, outputs, started):
    _write_json(out / "manifest.json", {
        "schema_version": MANIFEST_SCHEMA,
        "command": ns.command,
        "argv": ns.argv,
        "args": _replayable(ns),
        "seeds": seeds,
        "inputs": [str(p) for p in inputs],
        "outputs": sorted(str(p) for p in outputs),
        "started": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "wall_clock_seconds": round(time.time() - started, 3),
        "version": __version__,
    })


def _replayable(ns: argparse.Namespace) -> dict:
    return {k: v for k, v in vars(ns).items() if k not in ("func", "verbose", "argv")}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_simulate(a) -> int:
    started = time.time()
    if (a.p is None) == (a.mean_degree is None):
        raise UsageError("give exactly one of --p and --mean-degree")
    p = a.p if a.p is not None else a.mean_degree / a.N
    try:
        cfg = SimConfig(N=a.N, p=p, n_target=a.n, n_seeds=a.seeds, coupons=a.coupons,
                        lam=a.lam, seed_policy=a.seed_policy)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = {"master_seed": a.seed, "spawned": a.replicates}
    written = []
    for k, rng in enumerate(replicate_rngs(a.seed, a.replicates)):
        if a.keep_partial:
            sim = simulate_rds(gen_er_graph(cfg.N, cfg.p, rng), cfg, rng)
        else:
            sim = simulate_study(cfg, rng)
        data = out / f"rep_{k:03d}.csv"
        truth = out / f"rep_{k:03d}_truth.json"
        write_rds_csv(sim.obs, data)
        _write_json(truth, sim.truth_dict())
        written += [data.name, truth.name]
        log.info("replicate %d: n=%d died_out=%s resamples=%d", k, sim.n, sim.died_out,
                 sim.resamples)
    _write_manifest(out, a, seeds, [], written, started)
    return 0


def _priors_from(a) -> Priors:
    if (a.beta is None) == (a.p_prior_mean is None):
        raise UsageError("give exactly one of --beta and --p-prior-mean")
    beta = a.beta if a.beta is not None else a.alpha * (1 - a.p_prior_mean) / a.p_prior_mean
    gamma = a.gamma if a.gamma is not None else gamma_for(a.alpha / (a.alpha + beta))
    try:
        return Priors(alpha=a.alpha, beta=beta, eta=a.eta, xi=a.xi, c=a.c, gamma=gamma)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_estimate(a) -> int:
    started = time.time()
    priors = _priors_from(a)
    priors.check_propriety()
    try:
        cfg = SamplerConfig(iterations=a.iters, burn_in=a.burnin, thin=a.thin, seed=a.seed,
                            chains=a.chains, edge_sweeps=a.sweeps,
                            variance_floor=a.variance_floor, tail_weight=a.tail_weight)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    obs = load_observed(a.data)
    chains = run_gibbs(obs, priors, cfg)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for k, ch in enumerate(chains):
        name = f"chain_{k}.csv"
        ch.to_csv(out / name)
        written.append(name)
    summary = summarize_draws(np.concatenate([c.N for c in chains]), a.reference_pop)
    summary["chains"] = [
        {"seed": c.seed, "mean": float(c.N.mean()), "acceptance": c.acceptance,
         "tally": c.tally}
        for c in chains
    ]
    summary["priors"] = vars(priors)
    summary["n"] = obs.n
    summary["N_min"] = obs.n_min
    _write_json(out / "summary.json", summary)
    written.append("summary.json")
    _write_manifest(out, a, cfg.chain_seeds(), [a.data], written,
                    started)
    print(json.dumps({k: summary[k] for k in ("mode", "mean", "sd", "q2.5", "q97.5")}))
    return 0


def cmd_summarize(a) -> int:
    try:
        summary = summarize_draws(pool_chains(a.chains), a.reference_pop)
    except ValueError as exc:
        raise RDSDataError(str(exc)) from None
    text = json.dumps(summary, indent=2, sort_keys=True)
    if a.out:
        Path(a.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def cmd_elicit(a) -> int:
    obs = load_observed(a.data)
    p_lo = p_lower_bound(obs, a.N_hat)
    print(f"n = {obs.n}, N_hat = {a.N_hat:g}, p_lo = {p_lo:.6g}")
    print(f"{'alpha':>8} {'beta':>14} {'prior mean p':>14} {'gamma':>10}")
    for alpha in a.alpha:
        beta = solve_beta_tail(alpha, p_lo, a.level)
        pbar = alpha / (alpha + beta)
        print(f"{alpha:8g} {beta:14.6g} {pbar:14.6g} {gamma_for(pbar):10.5g}")
    return 0


def cmd_diagnose(a) -> int:
    obs = load_observed(a.data)
    rows = [("all degrees", degree_trend(obs))]
    if a.exclude_above is not None:
        rows.append((f"degree <= {a.exclude_above:g}", degree_trend(obs, a.exclude_above)))
    print(f"{'subset':<20} {'n':>6} {'slope':>12} {'SE':>12} {'p-value':>9}")
    for label, fit in rows:
        print(f"{label:<20} {fit.n:6d} {fit.slope:12.4g} {fit.se:12.4g} {fit.p_value:9.3g}")
    return 0


def cmd_replay(a) -> int:
    doc = json.loads(Path(a.manifest).read_text())
    if doc.get("schema_version") != MANIFEST_SCHEMA or "argv" not in doc:
        raise RDSDataError(f"{a.manifest}: not a run manifest")
    ns = build_parser().parse_args(doc["argv"])
    ns.argv = doc["argv"]
    ns.out = a.out
    return ns.func(ns)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rdsize", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate Erdos-Renyi populations and RDS studies")
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--p", type=float)
    s.add_argument("--mean-degree", type=float)
    s.add_argument("--lambda", dest="lam", type=float, default=1.0)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seeds", type=int, default=10)
    s.add_argument("--coupons", type=int, default=3)
    s.add_argument("--replicates", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--seed-policy", choices=("uniform", "degree"), default="uniform")
    s.add_argument("--keep-partial", action="store_true",
                   help="keep studies that die out instead of redrawing")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="sample the posterior of N")
    e.add_argument("data")
    e.add_argument("--out", required=True)
    e.add_argument("--alpha", type=float, required=True)
    e.add_argument("--beta", type=float)
    e.add_argument("--p-prior-mean", type=float)
    e.add_argument("--eta", type=float, default=1.0)
    e.add_argument("--xi", type=float, default=1.0)
    e.add_argument("--c", type=float, default=1.0)
    e.add_argument("--gamma", type=float)
    e.add_argument("--iters", type=int, default=20000)
    e.add_argument("--burnin", type=int, default=5000)
    e.add_argument("--thin", type=int, default=1)
    e.add_argument("--chains", type=int, default=1)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--sweeps", type=int, help="edge moves per N move (default n)")
    e.add_argument("--variance-floor", type=float, default=1.5)
    e.add_argument("--tail-weight", type=float, default=0.1,
                   help="weight of the heavy-tailed N proposal component (0 disables)")
    e.add_argument("--reference-pop", type=float, action="append", default=[])
    e.set_defaults(func=cmd_estimate)

    m = sub.add_parser("summarize", help="summarize chain CSV files")
    m.add_argument("chains", nargs="+")
    m.add_argument("--reference-pop", type=float, action="append", default=[])
    m.add_argument("--out")
    m.set_defaults(func=cmd_summarize)

    el = sub.add_parser("elicit", help="lower bound on p and Beta priors for it")
    el.add_argument("data")
    el.add_argument("--N-hat", type=float, required=True)
    el.add_argument("--alpha", type=float, nargs="+", default=[3.1, 4, 5, 6, 7, 8])
    el.add_argument("--level", type=float, default=0.99)
    el.set_defaults(func=cmd_elicit)

    d = sub.add_parser("diagnose", help="trend of degree over recruitment order")
    d.add_argument("data")
    d.add_argument("--exclude-above", type=float)
    d.set_defaults(func=cmd_diagnose)

    r = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    r.add_argument("manifest")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    ns = parser.parse_args(argv)
    ns.argv = argv
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return ns.func(ns)
    except (UsageError, ImproperPosteriorError) as exc:
        parser.print_usage(sys.stderr)
        print(f"rdsize: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RDSDataError, FileNotFoundError) as exc:
        print(f"rdsize: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DomainError, SamplerError, FloatingPointError) as exc:
        print(f"rdsize: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

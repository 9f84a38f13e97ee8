"""Command-line front end.

Each run resolves its settings as built-in defaults, then a JSON config
file (``--config``), then explicit flags. With ``--out DIR`` the run writes
``config.json``, ``report.json`` and CSV tables into ``DIR``; without it a
JSON summary goes to stdout.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from importlib import metadata
from pathlib import Path

import numpy as np

from . import io as tio
from .analytic import batched_final_error, final_error, ordered_error
from .ensemble import Dimensions, TrainingConfig, mc_final_error, sample_ensemble, seed_stream, trace_rows, train_closed, train_gd
from .errors import ParseError, TaskOrderError
from .orders import (
    CORE_TO_PERIPHERY,
    PERIPHERY_TO_CORE,
    compare_rules,
    enumerate_orders,
    hamiltonian_optimum,
    spec_digest,
    typicality_order,
)
from .similarity import estimate_similarity, load_table, load_table_csv
from .taskspec import (
    DEFAULT_MAX_TRIES,
    GraphSpec,
    Ordering,
    TaskSetSpec,
    constant_correlation,
    graph_similarity,
    sample_correlation,
)

COMMON = {"seed": 0, "out": None, "threads": 1}

DEFAULTS = {
    "eval": {
        "graph": None, "size": 5, "a": 0.6, "matrix": None, "random": None, "lo": 0.0, "hi": 1.0,
        "c_out": None, "rho_o": 1.0, "order": None, "all_orders": False, "limit_p": 10,
    },
    "phase": {"step": 0.05, "lo": -1.0, "hi": 1.0},
    "rules": {
        "graph": None, "size": 5, "a": 0.6, "matrix": None, "random": None, "lo": -1.0, "hi": 1.0,
        "c_out": None, "rho_o": 1.0, "n_random": 30, "sweep": 0, "P": 7, "bin_width": 0.1,
        "max_tries": 10_000_000,
    },
    "simulate": {
        "graph": None, "size": 5, "a": 0.6, "matrix": None, "random": None, "lo": 0.0, "hi": 1.0,
        "c_out": None, "rho_o": 1.0, "orders": None, "trainer": "gd", "n_seeds": 10,
        "n_s": 30, "n_x": 3000, "n_y": 10, "eta": 1e-3, "iters": 100,
        "scatter": 0, "p_min": 2, "p_max": 6,
    },
    "estimate": {
        "table": None, "transfer_csv": None, "baseline_csv": None,
        "clamp_lo": -1.0, "clamp_hi": 1.0, "project": False,
    },
}


def _build_id() -> str:
    try:
        return f"artifact {metadata.version('artifact')}"
    except metadata.PackageNotFoundError:
        return "artifact (not installed)"


# ---------------------------------------------------------------- spec source

def _spec_from(cfg: dict, seed_offset: int = 0) -> tuple[TaskSetSpec, dict]:
    sources = [k for k in ("graph", "matrix", "random") if cfg.get(k)]
    if len(sources) != 1:
        raise TaskOrderError("give exactly one spec source: --graph, --matrix or --random")
    src = sources[0]
    if src == "graph":
        c_in = graph_similarity(GraphSpec(cfg["graph"], int(cfg["size"]), float(cfg["a"])))
        info = {"source": "graph", "kind": cfg["graph"], "size": int(cfg["size"]), "a": float(cfg["a"])}
    elif src == "matrix":
        c_in = tio.load_correlation(cfg["matrix"])
        info = {"source": "matrix", "path": str(cfg["matrix"])}
    else:
        P = int(cfg["random"])
        c_in = sample_correlation(P, cfg["lo"], cfg["hi"], seed=cfg["seed"] + seed_offset,
                                  max_tries=int(cfg.get("max_tries", DEFAULT_MAX_TRIES)))
        info = {"source": "random", "P": P, "lo": cfg["lo"], "hi": cfg["hi"]}
    if cfg.get("c_out"):
        c_out = tio.load_correlation(cfg["c_out"])
    else:
        c_out = constant_correlation(c_in.size, float(cfg["rho_o"]))
    spec = TaskSetSpec(c_in, c_out)
    info["P"] = spec.P
    info["spec_digest"] = spec_digest(spec)
    return spec, info


# ---------------------------------------------------------------- commands

def cmd_eval(cfg: dict, out: Path | None) -> dict:
    spec, info = _spec_from(cfg)
    payload = {"spec": info}
    if cfg["order"]:
        o = Ordering.parse(cfg["order"])
        payload["order"] = str(o)
        payload["error"] = ordered_error(spec, o)
    else:
        payload["order"] = str(Ordering.identity(spec.P))
        payload["error"] = final_error(spec)
    if cfg["all_orders"]:
        ranked = enumerate_orders(spec, int(cfg["limit_p"]))
        best, worst = ranked.best, ranked.worst
        payload.update(
            n_orders=len(ranked.orders),
            best_order=str(best[0]), best_error=best[1],
            worst_order=str(worst[0]), worst_error=worst[1],
            worst_to_best=worst[1] / best[1] if best[1] > 0 else math.inf,
        )
        if out:
            tio.write_csv(out / "orders.csv",
                          [{"rank": k, "order": str(o), "error": e} for k, (o, e) in enumerate(ranked.orders)])
    return payload


def phase_grid(step: float, lo: float = -1.0, hi: float = 1.0) -> np.ndarray:
    n = int(math.floor((hi - lo) / step + 1e-9))
    return np.round(lo + step * np.arange(n), 10)


def phase_table(step: float = 0.05, lo: float = -1.0, hi: float = 1.0) -> list[dict]:
    """Best of the six three-task orders on a grid of pairwise similarities.

    Output similarity is all ones. Cells whose input matrix is not PSD are
    marked ``valid = false`` and carry no order.
    """
    g = phase_grid(step, lo, hi)
    ab, bc, ca = (x.ravel() for x in np.meshgrid(g, g, g, indexing="ij"))
    n = ab.size
    c = np.empty((n, 3, 3))
    c[:, [0, 1, 2], [0, 1, 2]] = 1.0
    c[:, 0, 1] = c[:, 1, 0] = ab
    c[:, 1, 2] = c[:, 2, 1] = bc
    c[:, 0, 2] = c[:, 2, 0] = ca
    valid = np.linalg.eigvalsh(c)[:, 0] >= -1e-10
    perms = list(itertools.permutations(range(3)))
    errs = np.full((n, 6), np.nan)
    cv = c[valid]
    ones = np.ones((3, 3)) / math.sqrt(3.0)  # symmetric root of the all-ones matrix
    for k, p in enumerate(perms):
        idx = np.array(p)
        errs[valid, k] = batched_final_error(cv[:, idx[:, None], idx[None, :]], ones)
    rows = []
    for i in range(n):
        row = {"rho_ab": float(ab[i]), "rho_bc": float(bc[i]), "rho_ca": float(ca[i])}
        if valid[i]:
            e = errs[i]
            k = int(np.argmin(e))
            tol = 1e-12 * max(1.0, abs(e[k]))
            row.update(best_order=Ordering(perms[k]).letters(), best_error=float(e[k]),
                       n_best=int(np.sum(e <= e[k] + tol)), valid=True)
        else:
            row.update(best_order="", best_error=math.nan, n_best=0, valid=False)
        rows.append(row)
    return rows


def cmd_phase(cfg: dict, out: Path | None) -> dict:
    rows = phase_table(float(cfg["step"]), float(cfg["lo"]), float(cfg["hi"]))
    n_valid = sum(r["valid"] for r in rows)
    counts: dict[str, int] = {}
    for r in rows:
        if r["valid"]:
            counts[r["best_order"]] = counts.get(r["best_order"], 0) + 1
    if out:
        tio.write_csv(out / "phase.csv", rows,
                      ["rho_ab", "rho_bc", "rho_ca", "best_order", "best_error", "n_best", "valid"])
    return {"n_cells": len(rows), "n_valid": n_valid, "best_order_counts": dict(sorted(counts.items()))}


def _rule_row(spec: TaskSetSpec, n_random: int, seed: int) -> dict:
    rep = compare_rules(spec, n_random, seed)
    return {
        "m": rep.m,
        "periphery_to_core": rep.error(PERIPHERY_TO_CORE),
        "core_to_periphery": rep.error(CORE_TO_PERIPHERY),
        "max_path": rep.error("max_path"),
        "min_path": rep.error("min_path"),
        "random_mean": rep.random_mean,
        "random_sem": rep.random_sem,
        "spec_digest": rep.spec_digest,
    }


def bin_rule_rows(rows: list[dict], width: float = 0.1) -> list[dict]:
    """Win fractions per bin of mean input correlation ``m``.

    A rule wins when its error is strictly smaller. Bins are labelled by
    their lower edge.
    """
    bins: dict[int, list[dict]] = {}
    for r in rows:
        bins.setdefault(int(math.floor(r["m"] / width + 1e-9)), []).append(r)
    out = []
    for k in sorted(bins):
        grp = bins[k]
        n = len(grp)
        out.append({
            "m_lo": round(k * width, 10),
            "m_hi": round((k + 1) * width, 10),
            "n": n,
            "p2c_beats_c2p": sum(r["periphery_to_core"] < r["core_to_periphery"] for r in grp) / n,
            "p2c_beats_random": sum(r["periphery_to_core"] < r["random_mean"] for r in grp) / n,
            "max_beats_min": sum(r["max_path"] < r["min_path"] for r in grp) / n,
            "max_beats_random": sum(r["max_path"] < r["random_mean"] for r in grp) / n,
        })
    return out


def rule_sweep(n_specs: int, P: int = 7, lo: float = -1.0, hi: float = 1.0, n_random: int = 30,
               seed: int = 0, max_tries: int = 10_000_000, threads: int = 1) -> list[dict]:
    """Rule errors on ``n_specs`` sampled input matrices with all-ones output similarity."""
    seeds = seed_stream(seed, n_specs)

    def one(k):
        c_in = sample_correlation(P, lo, hi, seed=seeds[k], max_tries=max_tries)
        row = _rule_row(TaskSetSpec.uniform_output(c_in, 1.0), n_random, seeds[k])
        return {"spec": k, "seed": seeds[k], **row}

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, range(n_specs)))
    return [one(k) for k in range(n_specs)]


def cmd_rules(cfg: dict, out: Path | None) -> dict:
    if int(cfg["sweep"]) > 0:
        rows = rule_sweep(int(cfg["sweep"]), int(cfg["P"]), float(cfg["lo"]), float(cfg["hi"]),
                          int(cfg["n_random"]), int(cfg["seed"]), int(cfg["max_tries"]), int(cfg["threads"]))
        bins = bin_rule_rows(rows, float(cfg["bin_width"]))
        if out:
            tio.write_csv(out / "specs.csv", rows)
            tio.write_csv(out / "bins.csv", bins)
        return {"n_specs": len(rows), "bins": bins}

    spec, info = _spec_from(cfg)
    rep = compare_rules(spec, int(cfg["n_random"]), int(cfg["seed"]))
    if out:
        rows = [e.to_dict() for e in rep.entries]
        rows.append({"rule": "random", "order": "", "error": rep.random_mean})
        tio.write_csv(out / "rules.csv", rows, ["rule", "order", "error", "twin", "twin_error", "n_optimal"])
    return {"spec": info, **rep.to_dict()}


def _dims(cfg) -> Dimensions:
    return Dimensions(int(cfg["n_s"]), int(cfg["n_x"]), int(cfg["n_y"]))


def _train(cfg, sample, o):
    if cfg["trainer"] == "closed":
        return train_closed(sample, o)
    if cfg["trainer"] == "gd":
        return train_gd(sample, o, TrainingConfig(float(cfg["eta"]), int(cfg["iters"])))
    raise TaskOrderError(f"trainer must be 'gd' or 'closed', got {cfg['trainer']!r}")


def cmd_simulate(cfg: dict, out: Path | None) -> dict:
    dims = _dims(cfg)
    n_seeds = int(cfg["n_seeds"])
    threads = int(cfg["threads"])
    tcfg = TrainingConfig(float(cfg["eta"]), int(cfg["iters"]))

    if int(cfg["scatter"]) > 0:
        # random input and output similarity, P drawn uniformly from p_min..p_max
        n = int(cfg["scatter"])
        rng = np.random.default_rng(int(cfg["seed"]))
        spec_seeds = seed_stream(int(cfg["seed"]), n)
        rows = []
        for k in range(n):
            P = int(rng.integers(int(cfg["p_min"]), int(cfg["p_max"]) + 1))
            c_in = sample_correlation(P, cfg["lo"], cfg["hi"], seed=spec_seeds[k])
            c_out = sample_correlation(P, cfg["lo"], cfg["hi"], seed=spec_seeds[k] + 1)
            spec = TaskSetSpec(c_in, c_out)
            mc = mc_final_error(spec, dims, None, n_seeds, tcfg, cfg["trainer"], spec_seeds[k], threads)
            rows.append({"spec": k, "P": P, "analytic": final_error(spec), "mc_mean": mc.mean, "mc_sem": mc.sem})
        a = np.array([r["analytic"] for r in rows])
        b = np.array([r["mc_mean"] for r in rows])
        rel = np.abs(b - a) / np.maximum(a, 1e-12)
        if out:
            tio.write_csv(out / "scatter.csv", rows)
        return {"n_specs": n, "correlation": float(np.corrcoef(a, b)[0, 1]) if n > 1 else math.nan,
                "median_rel_dev": float(np.median(rel))}

    spec, info = _spec_from(cfg)
    orders = cfg["orders"] or [str(Ordering.identity(spec.P))]
    if isinstance(orders, str):
        orders = orders.split(",")
    seeds = seed_stream(int(cfg["seed"]), n_seeds)
    traces, summary = [], []
    for text in orders:
        o = Ordering.parse(text)

        def run(s, o=o):
            return s, _train(cfg, sample_ensemble(spec, dims, s), o)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                states = list(pool.map(run, seeds))
        else:
            states = [run(s) for s in seeds]
        finals = np.array([st.final_error for _, st in states])
        for s, st in states:
            traces.extend({"order": str(o), **r} for r in trace_rows(st, s))
        summary.append({
            "order": str(o),
            "analytic": ordered_error(spec, o),
            "mc_mean": float(finals.mean()),
            "mc_sem": float(finals.std(ddof=1) / math.sqrt(len(finals))) if len(finals) > 1 else math.nan,
        })
    if out:
        tio.write_csv(out / "traces.csv", traces, ["order", "seed", "stage", "task", "error"])
        tio.write_csv(out / "summary.csv", summary)
    return {"spec": info, "trainer": cfg["trainer"], "orders": summary}


def cmd_estimate(cfg: dict, out: Path | None) -> dict:
    if cfg["table"]:
        table = load_table(Path(cfg["table"]))
    elif cfg["transfer_csv"] and cfg["baseline_csv"]:
        table = load_table_csv(cfg["transfer_csv"], cfg["baseline_csv"])
    else:
        raise ParseError("give --table or both --transfer-csv and --baseline-csv")
    sim = estimate_similarity(table, float(cfg["clamp_lo"]), float(cfg["clamp_hi"]))
    payload = {
        "P": sim.P,
        "rho": sim.rho,
        "n_clamped": int(np.triu(sim.clamped, 1).sum()),
        "max_asymmetry": float(sim.asymmetry.max()),
        "psd": sim.is_psd(),
        "recommended": {
            PERIPHERY_TO_CORE: str(typicality_order(sim.rho, PERIPHERY_TO_CORE)),
            "max_path": str(hamiltonian_optimum(sim.rho, "max").ordering),
        },
    }
    if sim.is_psd() or cfg["project"]:
        c = sim.to_correlation(project=not sim.is_psd())
        spec = TaskSetSpec.uniform_output(c, 1.0)
        payload["analytic"] = {
            "approximate": not sim.is_psd(),
            PERIPHERY_TO_CORE: ordered_error(spec, typicality_order(sim.rho, PERIPHERY_TO_CORE)),
            "max_path": ordered_error(spec, hamiltonian_optimum(sim.rho, "max").ordering),
        }
    else:
        payload["analytic"] = None
    if out:
        tio.save_correlation(out / "similarity.csv", sim.rho)
        iu = np.triu_indices(sim.P, 1)
        tio.write_csv(out / "flags.csv", [
            {"task_i": int(i) + 1, "task_j": int(j) + 1, "rho": sim.rho[i, j],
             "clamped": bool(sim.clamped[i, j]), "asymmetry": sim.asymmetry[i, j]}
            for i, j in zip(*iu)
        ])
    return payload


COMMANDS = {"eval": cmd_eval, "phase": cmd_phase, "rules": cmd_rules, "simulate": cmd_simulate, "estimate": cmd_estimate}


# ---------------------------------------------------------------- parsing

def _add_common(p):
    p.add_argument("--config", help="JSON file with settings; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int)


def _add_spec_source(p):
    g = p.add_argument_group("task set")
    g.add_argument("--graph", choices=["chain", "ring", "tree", "leaves"])
    g.add_argument("--size", type=int, help="graph size (tree: node count, leaves: leaf count)")
    g.add_argument("--a", type=float, help="neighbour similarity of the graph")
    g.add_argument("--matrix", help="input similarity as CSV or JSON")
    g.add_argument("--random", type=int, metavar="P", help="sample a random P-task input similarity")
    g.add_argument("--lo", type=float)
    g.add_argument("--hi", type=float)
    g.add_argument("--c-out", dest="c_out", help="output similarity as CSV or JSON")
    g.add_argument("--rho-o", dest="rho_o", type=float, help="uniform output similarity")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taskorder", description=__doc__.splitlines()[0],
                                     argument_default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="analytic final error", argument_default=argparse.SUPPRESS)
    _add_common(p)
    _add_spec_source(p)
    p.add_argument("--order", help='training order such as "1>3>2" or "A>C>B"')
    p.add_argument("--all-orders", dest="all_orders", action="store_true", help="rank every ordering")
    p.add_argument("--limit-p", dest="limit_p", type=int)

    p = sub.add_parser("phase", help="best three-task order over a similarity grid",
                       argument_default=argparse.SUPPRESS)
    _add_common(p)
    p.add_argument("--step", type=float)
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)

    p = sub.add_parser("rules", help="compare ordering rules", argument_default=argparse.SUPPRESS)
    _add_common(p)
    _add_spec_source(p)
    p.add_argument("--n-random", dest="n_random", type=int)
    p.add_argument("--sweep", type=int, metavar="N", help="sample N random specs and bin by m")
    p.add_argument("--P", type=int, help="task count in sweep mode")
    p.add_argument("--bin-width", dest="bin_width", type=float)
    p.add_argument("--max-tries", dest="max_tries", type=int)

    p = sub.add_parser("simulate", help="train the linear student on sampled ensembles",
                       argument_default=argparse.SUPPRESS)
    _add_common(p)
    _add_spec_source(p)
    p.add_argument("--orders", nargs="+", help="one or more training orders")
    p.add_argument("--trainer", choices=["gd", "closed"])
    p.add_argument("--n-seeds", dest="n_seeds", type=int)
    p.add_argument("--n-s", dest="n_s", type=int)
    p.add_argument("--n-x", dest="n_x", type=int)
    p.add_argument("--n-y", dest="n_y", type=int)
    p.add_argument("--eta", type=float)
    p.add_argument("--iters", type=int)
    p.add_argument("--scatter", type=int, metavar="N", help="analytic vs Monte Carlo over N random specs")
    p.add_argument("--p-min", dest="p_min", type=int)
    p.add_argument("--p-max", dest="p_max", type=int)

    p = sub.add_parser("estimate", help="similarity from transfer errors", argument_default=argparse.SUPPRESS)
    _add_common(p)
    p.add_argument("--table", help='JSON {"transfer": [[...]], "baseline": [[...]]}')
    p.add_argument("--transfer-csv", dest="transfer_csv")
    p.add_argument("--baseline-csv", dest="baseline_csv")
    p.add_argument("--clamp-lo", dest="clamp_lo", type=float)
    p.add_argument("--clamp-hi", dest="clamp_hi", type=float)
    p.add_argument("--project", action="store_true", help="project a non-PSD estimate before evaluating errors")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    flags = vars(args).copy()
    command = flags.pop("command")
    cfg = {**COMMON, **DEFAULTS[command]}
    path = flags.pop("config", None)
    if path:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ParseError("config must be a JSON object")
        unknown = set(doc) - set(cfg)
        if unknown:
            raise ParseError(f"unknown config keys for {command}: {sorted(unknown)}")
        cfg.update(doc)
    cfg.update(flags)
    return cfg


def run(command: str, cfg: dict) -> dict:
    out = Path(cfg["out"]) if cfg.get("out") else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    payload = COMMANDS[command](cfg, out)
    report = {
        "command": command,
        "config": cfg,
        "build": _build_id(),
        "wall_clock_s": time.perf_counter() - start,
        "payload": payload,
    }
    if out:
        tio.dump_json(out / "config.json", {"command": command, **cfg})
        tio.dump_json(out / "report.json", report)
    return report


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        report = run(args.command, cfg)
    except TaskOrderError as exc:
        print(f"taskorder {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(report["payload"], indent=2, sort_keys=True, default=tio.json_default))
    return 0


if __name__ == "__main__":
    sys.exit(main())

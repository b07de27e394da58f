"""``vlgreedy`` command line: run one experiment from a JSON config.

Exit codes: 0 ok, 2 config error, 3 capacity error (partial results are
still written and summary.json carries ``"status": "capacity-error"``),
4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from . import democracy_lab as dl
from . import verification as vf
from .config import KINDS, ExperimentConfig, load_config, validate_config
from .dyadic_grid import DyadicCube
from .errors import CapacityError, ConfigError, VLGreedyError
from .exponent_field import build_exponent, constant_exponent, harmonic_mean_exponents, log_holder_constant
from .greedy_approx import MonotonicityWarning, lebesgue_profile, random_expansion
from .haar_system import basis_norm
from .variable_norm import cube_char_norms, empirical_maximal_ratio, norm_decay_exponent

EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY, EXIT_VERIFY = 0, 2, 3, 4


# --- output -----------------------------------------------------------------


def atomic_write(path: Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over the target."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    """RFC 4180 CSV (CRLF line ends, minimal quoting); floats use repr, so output is exact and stable."""
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2) + "\n"


@dataclass
class Run:
    cfg: ExperimentConfig
    out: Path
    threads: int
    started: float

    def write_csv(self, name: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
        h = self.cfg.hash
        atomic_write(self.out / name, csv_text(list(header) + ["config_hash"], [list(r) + [h] for r in rows]))

    def write_json(self, name: str, obj) -> None:
        atomic_write(self.out / name, json_text(obj))

    def summary(self, status: str, results: dict) -> None:
        body = {
            "tool": "vlgreedy",
            "version": __version__,
            "experiment": self.cfg.experiment,
            "status": status,
            "config": self.cfg.to_dict(),
            "config_hash": self.cfg.hash,
            "threads": self.threads,
            "started_at": datetime.fromtimestamp(self.started, timezone.utc).isoformat(),
            "wall_clock_seconds": time.time() - self.started,
            "results": results,
        }
        self.write_json(f"{self.cfg.experiment}_summary.json", body)
        self.write_json("summary.json", body)

    def map(self, fn: Callable, items: Sequence) -> list:
        """Order-preserving map; ``threads`` only changes speed, never results."""
        if self.threads > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                return list(pool.map(fn, items))
        return [fn(x) for x in items]


def _default_sizes(cfg: ExperimentConfig, top: int = 8) -> list[int]:
    return vf.powers_of_two(1, max(1, min(top, cfg.dimension * (cfg.depth - 1))))


# --- experiments ------------------------------------------------------------


def run_norm(run: Run) -> int:
    cfg, p = run.cfg, run.cfg.build_exponent()
    n, J = cfg.dimension, cfg.depth
    top = min(int(cfg.params.get("max_scale", min(J, 6))), J)
    rows, violations = [], 0
    for j in range(top + 1):
        norms, pq = cube_char_norms(p, j), harmonic_mean_exponents(p, j)
        for k in np.ndindex(*norms.shape):
            Q = DyadicCube(j, tuple(int(t) for t in k))
            lhs, rhs = Q.measure ** (1 / pq[k]), 2 * norms[k]
            violations += lhs > rhs * (1 + 1e-12)
            bn = basis_norm(Q, 1, p) if j < J else ""
            rows.append([str(Q), Q.measure, float(norms[k]), float(pq[k]), lhs, float(rhs), bn])
    run.write_csv(
        "norm.csv",
        ["cube", "measure", "char_norm", "harmonic_mean_exponent", "jensen_lhs", "jensen_rhs", "basis_norm"],
        rows,
    )
    results = {
        "p_minus": p.p_minus,
        "p_plus": p.p_plus,
        "log_holder_constant": log_holder_constant(p),
        "empirical_maximal_ratio": empirical_maximal_ratio(p, int(cfg.params.get("maximal_count", 64)), cfg.seed),
        "jensen_violations": int(violations),
        "cubes": len(rows),
    }
    if J >= 2:
        fit = norm_decay_exponent(p, DyadicCube(0, (0,) * n))
        results["norm_decay_delta"] = fit.slope
    run.summary("ok", results)
    return EXIT_OK


def run_greedy(run: Run) -> int:
    cfg, p = run.cfg, run.cfg.build_exponent()
    n, J = cfg.dimension, cfg.depth
    prm = cfg.params
    Ns = sorted(prm.get("Ns", [2**k for k in range(0, 7) if 2**k <= 2 ** (n * J)]))
    functions = int(prm.get("functions", 5))
    density, decay = float(prm.get("density", 1.0)), float(prm.get("decay", 0.5))

    def one(i):
        f = random_expansion(n, J, np.random.default_rng([cfg.seed, 3, i]), density, decay)
        return lebesgue_profile(
            f,
            p,
            Ns,
            exhaustive_limit=int(prm.get("exhaustive_limit", 10**6)),
            swap_budget=prm.get("oracle_budget"),
            refine=bool(prm.get("refine", False)),
        )

    with warnings.catch_warnings():
        # rises are counted from the rows below; the warning itself is not thread-safe to record
        warnings.simplefilter("ignore", MonotonicityWarning)
        profiles = run.map(one, list(range(functions)))
    rows, per = [], []
    for i, prof in enumerate(profiles):
        rows.extend(r + [i] for r in prof.csv_rows())
        ratios = [r.ratio for r in prof.rows if math.isfinite(r.ratio)]
        rises = sum(b.greedy_error > a.greedy_error + 1e-9 for a, b in zip(prof.rows, prof.rows[1:]))
        entry = {"function": i, "min_ratio": min(ratios, default=None), "max_ratio": max(ratios, default=None)}
        entry["monotonicity_violations"] = int(rises)
        entry["oracle_methods"] = {str(k): v for k, v in prof.methods.items()}
        try:
            fit = prof.slope()
            entry.update(slope=fit.slope, intercept=fit.intercept, r_squared=fit.r_squared)
        except VLGreedyError:
            entry["slope"] = None
        per.append(entry)
    run.write_csv("greedy.csv", ["N", "greedy_error", "oracle_error", "ratio", "function"], rows)
    slopes = [e["slope"] for e in per if e["slope"] is not None]
    results = {
        "functions": per,
        "max_slope": max(slopes, default=None),
        "slope_bound": 1 / p.p_minus - 1 / p.p_plus + 0.05,
        "min_ratio": min((e["min_ratio"] for e in per if e["min_ratio"] is not None), default=None),
        "oracle_note": "oracle_error is the best fixed-coefficient N-term subset error, an upper bound for the best N-term error",
    }
    run.summary("ok", results)
    return EXIT_OK


def run_democracy(run: Run) -> int:
    cfg, p = run.cfg, run.cfg.build_exponent()
    prm = cfg.params
    rec = dl.estimate_democracy(
        p,
        sorted(prm.get("Ns", _default_sizes(cfg))),
        prm.get("strategies", dl.STRATEGIES),
        cfg.seed,
        prm.get("epsilons", dl.DEFAULT_EPSILONS),
        int(prm.get("random_families", 16)),
        int(prm.get("type", 1)),
        run.threads,
    )
    run.write_csv(
        "democracy.csv", ["N", "strategy", "family", "value", "gamma1_lower_ok", "gamma2_upper_ok"], rec.csv_rows()
    )
    results = rec.summary()
    results["slope_r_target"] = 1 / p.p_minus
    results["slope_l_target"] = 1 / p.p_plus
    results["estimate_semantics"] = "h_r_est is a lower bound for h_r, h_l_est an upper bound for h_l"
    results["gamma1_note"] = "gamma1 bound uses the per-family measured ratio r_min in place of the maximal-operator constant"
    status = "capacity-error" if rec.failures else "ok"
    run.summary(status, results)
    return EXIT_CAPACITY if rec.failures else EXIT_OK


def run_verify(run: Run) -> int:
    cfg, p = run.cfg, run.cfg.build_exponent()
    n, J, seed = cfg.dimension, cfg.depth, cfg.seed
    prm = cfg.params
    batteries = prm.get(
        "batteries", ["constant", "lemmas", "linearization", "wavelets", "gamma", "sandwich", "scaling", "lebesgue"]
    )
    Ns = sorted(prm.get("Ns", _default_sizes(cfg, 6)))
    eps = prm.get("epsilons", dl.DEFAULT_EPSILONS)
    families = int(prm.get("families", 100))
    functions = int(prm.get("functions", 4))
    log = vf.CheckLog(prm.get("tolerances", {}))
    skipped = []
    for name in batteries:
        if name == "constant":
            if not p.is_constant:
                skipped.append("constant: exponent is not constant")
                continue
            vf.constant_exactness(
                log, p.p_plus, n, J, [1] + Ns, families, int(prm.get("greedy_instances", 20)), seed=seed
            )
        elif name == "lemmas":
            recipes = [dict(cfg.exponent)] + vf.default_recipes(n)
            vf.lemma_suite(log, recipes, n, J, int(prm.get("pairs", 200)), seed)
        elif name == "linearization":
            vf.linearization(log, p, families, Ns, seed)
        elif name == "wavelets":
            fields = {
                "config": p,
                "constant-1.5": constant_exponent(1.5, n, J),
                "constant-3": constant_exponent(3.0, n, J),
                "piecewise-2-4": build_exponent(vf.default_recipes(n)[0], n, J),
            }
            vf.wavelet_layer(log, n, J, functions * 5, seed, fields=fields)
        elif name == "gamma":
            vf.gamma_bounds(log, p, eps, Ns)
        elif name == "sandwich":
            if len(Ns) < 3:
                skipped.append("sandwich: needs at least 3 sizes")
                continue
            vf.sandwich(log, p, Ns, families, seed)
        elif name == "scaling":
            vf.scaling_law(log, p, Ns, seed, random_families=int(prm.get("random_families", 8)), threads=run.threads)
        elif name == "lebesgue":
            sizes = [2**k for k in range(0, 7) if 2**k <= 2 ** (n * J)]
            budget = (int(prm.get("exhaustive_limit", 10**4)), int(prm.get("oracle_budget", 4096)))
            vf.lebesgue(log, p, functions, sizes, seed, exhaustive_limit=budget[0], swap_budget=budget[1])
    run.write_json("verify.json", [c.to_dict() for c in log.checks])
    failures = log.failures()
    run.summary(
        "ok" if not failures else "verification-failure",
        {"checks": len(log.checks), "failures": failures, "skipped": skipped},
    )
    if failures:
        print("verification failed: " + ", ".join(failures), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def run_report(run: Run) -> int:
    out = run.out
    summaries = {}
    for path in sorted(out.glob("*_summary.json")):
        data = json.loads(path.read_text())
        summaries[data.get("experiment", path.stem)] = data
    verify = json.loads((out / "verify.json").read_text()) if (out / "verify.json").exists() else None
    tables = {}
    for path in sorted(out.glob("*.csv")):
        with path.open(newline="") as fh:
            tables[path.name] = max(sum(1 for _ in csv.reader(fh)) - 1, 0)
    report = {
        "output_dir": str(out),
        "experiments": {
            k: {"status": v.get("status"), "config_hash": v.get("config_hash"), "results": v.get("results")}
            for k, v in summaries.items()
        },
        "tables": tables,
        "verify": None
        if verify is None
        else {"checks": len(verify), "failed": [c["check"] for c in verify if not c["pass"]]},
    }
    lines = ["# vlgreedy report", "", f"Output directory: `{out}`", ""]
    for kind, info in report["experiments"].items():
        lines.append(f"## {kind}")
        lines.append("")
        lines.append(f"- status: {info['status']}")
        lines.append(f"- config hash: {info['config_hash']}")
        res = info["results"] or {}
        for key in ("slope_r", "slope_l", "slope_r_target", "slope_l_target", "max_slope", "slope_bound", "min_ratio",
                    "p_minus", "p_plus", "log_holder_constant", "empirical_maximal_ratio", "checks", "failures"):
            if key in res:
                lines.append(f"- {key}: {res[key]}")
        lines.append("")
    if tables:
        lines += ["## Tables", ""] + [f"- {name}: {rows} rows" for name, rows in tables.items()] + [""]
    if verify is not None:
        lines += ["## Checks", "", "| check | measured | bound | tolerance | pass |", "|---|---|---|---|---|"]
        lines += [
            f"| {c['check']} | {c['measured']} | {c['relation']} {c['bound']} | {c['tolerance']} | {c['pass']} |"
            for c in verify
        ]
        lines.append("")
    run.write_json("report.json", report)
    atomic_write(out / "report.md", "\n".join(lines))
    return EXIT_OK


RUNNERS = {"norm": run_norm, "greedy": run_greedy, "democracy": run_democracy, "verify": run_verify, "report": run_report}


# --- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vlgreedy", description="Greedy Haar approximation experiments in variable Lebesgue spaces.")
    parser.add_argument("--version", action="version", version=f"vlgreedy {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"run the {kind} experiment")
        sp.add_argument("--config", required=kind != "report", help="JSON experiment config")
        sp.add_argument("--out", help="output directory (default: config output_dir, else ./results)")
        sp.add_argument("--seed", type=int, help="overrides the config seed")
        sp.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError(f"--seed must be in [0, 2^64), got {args.seed}")
        if args.threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {args.threads}")
        if args.config is None:
            cfg = validate_config({"dimension": 1, "depth": 1, "exponent": {"kind": "constant", "value": 2}}, "report")
        else:
            cfg = load_config(args.config, args.command, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or cfg.output_dir or "results")
    run = Run(cfg, out, args.threads, time.time())
    try:
        return RUNNERS[cfg.experiment](run)
    except CapacityError as exc:
        run.summary("capacity-error", {"error": str(exc), "max_feasible": exc.max_feasible})
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except VLGreedyError as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Experiment runner: configs in, CSV rows and boxplot statistics out."""

from __future__ import annotations

import configparser
import csv
import io
import json
import logging
import math
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .baselines import fit_baseline_ls, fit_baseline_tr
from .model import GbmParams
from .payoff import KINDS, PayoffSpec
from .policy import (NumericalError, SplitPlan, WindowGrid, fit_policy, lower_bound_price,
                     point_price)
from .rng import SeedPlan
from .spline import parameter_grid

logger = logging.getLogger(__name__)

ALGORITHMS = ("ekt", "ls", "tr")
BASE_COLUMNS = ["experiment", "algorithm", "replicate", "price", "stderr", "n", "n_eval",
                "seed", "elapsed_ms"]


class ConfigError(ValueError):
    pass


class ReplicateError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    seed: int = 1
    # model
    x0: list = field(default_factory=lambda: [100.0])
    rate: float = 0.05
    vols: list = field(default_factory=lambda: [0.25])
    corr: list | None = None
    steps: int = 12
    horizon: float = 1.0
    # payoff
    kind: str = "put"
    strikes: list = field(default_factory=lambda: [90.0])
    # algorithms
    algorithms: list = field(default_factory=lambda: ["ekt"])
    n: int = 10000
    n_l: int | None = None
    n_t: int | None = None
    n_v: int | None = None
    degrees: list = field(default_factory=lambda: [0, 1, 2])
    knot_distances: list = field(default_factory=lambda: [50.0, 25.0, 12.5, 6.25])
    windows: list = field(default_factory=lambda: [0, 4, "T-t-1"])
    domain_bound: float = 400.0
    poly_degree: int = 3
    baseline_n: int | None = None
    # evaluation
    n_eval: int = 100000
    replicates: int = 10

    def __post_init__(self):
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError(f"algo.name: unknown algorithm {a!r}; expected one of {ALGORITHMS}")
        if not self.algorithms:
            raise ConfigError("algo.name: no algorithm given")
        if self.n_l is None and self.n_t is None and self.n_v is None:
            split = SplitPlan.thirds(self.n)
            self.n_l, self.n_t, self.n_v = split.n_l, split.n_t, split.n_v
        if None in (self.n_l, self.n_t, self.n_v):
            raise ConfigError("algo.n_l/n_t/n_v: give all three split sizes or none")
        if "ekt" in self.algorithms:
            if self.n_l + self.n_t + self.n_v != self.n:
                raise ConfigError(f"algo.n_l + n_t + n_v = {self.n_l + self.n_t + self.n_v} "
                                  f"does not equal n = {self.n}")
            if not (self.degrees and self.knot_distances and self.windows):
                raise ConfigError("algo: degrees, knot_distances and windows must be nonempty for ekt")
            if self.domain_bound <= 0:
                raise ConfigError("algo.domain_bound: must be positive")
        if self.baseline_n is None:
            self.baseline_n = self.n
        if self.kind not in KINDS:
            raise ConfigError(f"payoff.kind: unknown kind {self.kind!r}")
        if self.n_eval < 2:
            raise ConfigError("eval.n_eval: need at least 2 evaluation paths")
        if self.replicates < 1:
            raise ConfigError("eval.replicates: must be at least 1")
        try:
            self.model()
            self.payoff()
            self.split()
            self.window_grid()
            self.grid()
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    def model(self) -> GbmParams:
        return GbmParams(tuple(self.x0), self.rate, tuple(self.vols),
                         None if self.corr is None else tuple(map(tuple, self.corr)),
                         self.steps, self.horizon)

    def payoff(self) -> PayoffSpec:
        return PayoffSpec(self.kind, tuple(self.strikes), self.rate, self.horizon, self.steps)

    def split(self) -> SplitPlan:
        return SplitPlan(self.n_l, self.n_t, self.n_v)

    def grid(self):
        return parameter_grid(self.degrees, self.knot_distances)

    def window_grid(self) -> WindowGrid:
        return WindowGrid(self.windows)

    # ---- text format -------------------------------------------------
    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from None
        return cls.from_string(text, source=str(path))

    @classmethod
    def from_string(cls, text: str, source: str = "<config>") -> "ExperimentConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from None
        known = {name: kind for name, kind in _FIELDS}
        kwargs = {}
        for section in parser.sections():
            for key, raw in parser.items(section):
                full = f"{section}.{key}"
                if full not in known:
                    raise ConfigError(f"{source}: unknown key {full!r}")
                attr = _ATTR.get(full, key)
                try:
                    kwargs[attr] = _parse_value(known[full], raw)
                except ValueError as exc:
                    raise ConfigError(f"{source}: {full}: {exc}") from None
        return cls(**kwargs)

    def to_ini(self) -> str:
        def fmt(v):
            if isinstance(v, list):
                if v and isinstance(v[0], list):
                    return "; ".join(", ".join(repr(float(x)) for x in row) for row in v)
                return ", ".join(str(x) for x in v)
            return "" if v is None else str(v)

        out = io.StringIO()
        current = None
        values = asdict(self)
        for full, _ in _FIELDS:
            section, key = full.split(".")
            if section != current:
                out.write(("\n" if current else "") + f"[{section}]\n")
                current = section
            v = values[_ATTR.get(full, key)]
            if v is None:
                continue
            out.write(f"{key} = {fmt(v)}\n")
        return out.getvalue()


_FIELDS = [
    ("experiment.name", "str"), ("experiment.seed", "int"),
    ("model.x0", "floats"), ("model.rate", "float"), ("model.vols", "floats"),
    ("model.corr", "matrix"), ("model.steps", "int"), ("model.horizon", "float"),
    ("payoff.kind", "str"), ("payoff.strikes", "floats"),
    ("algo.name", "strs"), ("algo.n", "int"), ("algo.n_l", "int"), ("algo.n_t", "int"),
    ("algo.n_v", "int"), ("algo.degrees", "ints"), ("algo.knot_distances", "floats"),
    ("algo.windows", "windows"), ("algo.domain_bound", "float"), ("algo.poly_degree", "int"),
    ("algo.baseline_n", "int"),
    ("eval.n_eval", "int"), ("eval.replicates", "int"),
]
_ATTR = {"algo.name": "algorithms"}


def _parse_value(kind: str, raw: str):
    raw = raw.strip()
    items = [s.strip() for s in raw.split(",") if s.strip()]
    if kind == "str":
        return raw
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "strs":
        return [s.lower() for s in items]
    if kind == "ints":
        return [int(s) for s in items]
    if kind == "floats":
        return [_float_expr(s) for s in items]
    if kind == "windows":
        return [s.replace(" ", "") if "T" in s else int(s) for s in items]
    if kind == "matrix":
        return [[float(x) for x in row.split(",")] for row in raw.split(";") if row.strip()]
    raise AssertionError(kind)


def _float_expr(s: str) -> float:
    # allows knot distances written as 100/2**3
    if "/" in s:
        num, den = s.split("/", 1)
        den = den.strip()
        if "**" in den:
            base, exp = den.split("**")
            return float(num) / float(base) ** float(exp)
        return float(num) / float(den)
    return float(s)


# ---- running -----------------------------------------------------------

def fit_algorithm(cfg: ExperimentConfig, name: str, seeds: SeedPlan):
    model, f = cfg.model(), cfg.payoff()
    if name == "ekt":
        return fit_policy(model, f, cfg.split(), cfg.grid(), cfg.window_grid(),
                          cfg.domain_bound, seeds)
    fit = fit_baseline_ls if name == "ls" else fit_baseline_tr
    return fit(model, f, cfg.baseline_n, cfg.poly_degree, seeds)


def run_replicate(cfg: ExperimentConfig, replicate: int) -> list[dict]:
    """Fit every configured algorithm and price it on shared independent paths."""
    seeds = SeedPlan(cfg.seed).derive("replicate", replicate)
    model, f = cfg.model(), cfg.payoff()
    eval_paths = model.simulate_paths(cfg.n_eval, seeds, purpose="eval")
    rows = []
    for name in cfg.algorithms:
        start = time.perf_counter()
        try:
            policy = fit_algorithm(cfg, name, seeds)
            price, se = lower_bound_price(policy, f, eval_paths)
        except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
            raise ReplicateError(f"replicate {replicate}, algorithm {name}: {exc}") from exc
        if not (math.isfinite(price) and math.isfinite(se)):
            raise ReplicateError(f"replicate {replicate}, algorithm {name}: non-finite price")
        elapsed = int(round(1000 * (time.perf_counter() - start)))
        row = {"experiment": cfg.name, "algorithm": name, "replicate": replicate,
               "price": price, "stderr": se,
               "n": cfg.n if name == "ekt" else cfg.baseline_n, "n_eval": cfg.n_eval,
               "seed": cfg.seed, "elapsed_ms": elapsed,
               "point_price": point_price(policy, f, model.x0)}
        if name == "ekt":
            for t in range(cfg.steps):
                row[f"w_t{t}"] = policy.windows[t]
                row[f"M_t{t}"] = policy.params[t].degree
                row[f"alpha_t{t}"] = policy.params[t].alpha
        logger.info("replicate %d %s: price=%.6f se=%.6f (%d ms)", replicate, name, price, se, elapsed)
        rows.append(row)
    return rows


def csv_columns(cfg: ExperimentConfig) -> list[str]:
    cols = list(BASE_COLUMNS)
    if "ekt" in cfg.algorithms:
        for prefix in ("w", "M", "alpha"):
            cols += [f"{prefix}_t{t}" for t in range(cfg.steps)]
    return cols


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_csv(rows: list[dict], columns: list[str]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return out.getvalue()


def selection_histograms(rows: list[dict]) -> dict:
    hist = {"window": Counter(), "degree": Counter(), "alpha": Counter()}
    for row in rows:
        for key, v in row.items():
            for prefix, name in (("w_t", "window"), ("M_t", "degree"), ("alpha_t", "alpha")):
                if key.startswith(prefix):
                    hist[name][str(v)] += 1
    return {k: dict(sorted(c.items())) for k, c in hist.items()}


def run_experiment(cfg: ExperimentConfig, out_dir=None, workers: int = 1) -> dict:
    """Run all replicates; optionally write ``results.csv``, ``config.ini`` and ``metadata.json``.

    Returns a dict with ``rows``, ``csv`` (text) and ``metadata``.
    """
    logger.info("resolved config:\n%s", cfg.to_ini())
    reps = range(cfg.replicates)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run_replicate, [cfg] * len(reps), reps))
    else:
        chunks = [run_replicate(cfg, r) for r in reps]
    rows = sorted((r for chunk in chunks for r in chunk),
                  key=lambda r: (r["replicate"], ALGORITHMS.index(r["algorithm"])))
    text = format_csv(rows, csv_columns(cfg))
    meta = {"experiment": cfg.name, "config": asdict(cfg), "algorithms": {}}
    for name in cfg.algorithms:
        sub = [r for r in rows if r["algorithm"] == name]
        info = {"point_prices": [r["point_price"] for r in sub]}
        if name == "ekt":
            info["selection_histograms"] = selection_histograms(sub)
            logger.info("ekt selection histograms: %s", info["selection_histograms"])
        else:
            info["poly_degree"] = cfg.poly_degree
            info["n"] = cfg.baseline_n
        meta["algorithms"][name] = info
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.csv").write_text(text)
        (out / "config.ini").write_text(cfg.to_ini())
        (out / "metadata.json").write_text(json.dumps(meta, indent=2) + "\n")
    return {"rows": rows, "csv": text, "metadata": meta}


# ---- summaries ---------------------------------------------------------

SUMMARY_COLUMNS = ["experiment", "algorithm", "count", "min", "q1", "median", "q3", "max",
                   "mean", "se"]


def nearest_rank(sorted_values, p: float) -> float:
    """Type-1 (nearest-rank) quantile: the ``ceil(p * n)``-th smallest value."""
    n = len(sorted_values)
    k = max(1, math.ceil(p * n - 1e-12))
    return sorted_values[k - 1]


def summarize_rows(rows) -> list[dict]:
    groups: dict = {}
    for row in rows:
        groups.setdefault((row["experiment"], row["algorithm"]), []).append(float(row["price"]))
    if not groups:
        raise ValueError("no result rows to summarize")
    out = []
    for (exp, algo), prices in sorted(groups.items()):
        xs = sorted(prices)
        n = len(xs)
        se = float(np.std(xs, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        out.append({"experiment": exp, "algorithm": algo, "count": n, "min": xs[0],
                    "q1": nearest_rank(xs, 0.25), "median": nearest_rank(xs, 0.5),
                    "q3": nearest_rank(xs, 0.75), "max": xs[-1],
                    "mean": float(np.mean(xs)), "se": se})
    return out


def read_csv_rows(paths) -> list[dict]:
    rows = []
    for p in paths:
        with open(p, newline="") as fh:
            rows.extend(csv.DictReader(fh))
    return rows


def summarize(paths) -> str:
    return format_csv(summarize_rows(read_csv_rows(paths)), SUMMARY_COLUMNS)

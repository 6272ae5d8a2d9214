"""Monte-Carlo experiment driver: CSV records, summaries and static SVG charts."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import abb, bnb
from .detectors import EXHAUSTIVE_MAX_N, METHODS, detect
from .model import RealInstance, generate_instance

__all__ = [
    "CSV_HEADER",
    "EXPERIMENTS",
    "ConfigError",
    "ExperimentConfig",
    "TrialRecord",
    "PlotSpec",
    "ber",
    "signflip_ratio",
    "run_trial",
    "run_experiment",
    "summarize",
    "read_records",
    "parse_config_text",
    "load_config",
    "config_from_mapping",
    "default_plot_spec",
    "emit_svg_plot",
]

CSV_HEADER = ("trial", "method", "snr_db", "m_tilde", "n_tilde", "bit_errors", "bits",
              "wall_time_us", "objective", "status", "extra_json")
EXPERIMENTS = ("signflip", "ber", "runtime_size", "runtime_snr", "cutratio", "solve_one")
SUMMARY = "summary"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """One sweep: every (size, SNR, trial) cell runs every method on one instance.

    ``m_tilde`` and ``n_tilde`` are paired element-wise; a single value is
    broadcast against the other list.  Trial ``t`` uses seed ``base_seed + t``
    for every size and SNR.
    """

    experiment: str = "ber"
    m_tilde: list = field(default_factory=lambda: [18])
    n_tilde: list = field(default_factory=lambda: [4])
    snr_db_list: list = field(default_factory=lambda: [0.0, 5.0, 10.0, 15.0])
    trials: int = 500
    methods: list = field(default_factory=lambda: ["gML", "AR-L1", "AR-L2", "AR-L1-ABB", "quantZF"])
    base_seed: int = 0
    output_path: str | None = None
    workers: int = 1
    # branch-and-bound options
    node_limit: int = 1_000_000
    time_limit_ms: float | None = None
    integrality_tol: float = 1e-6
    violation_tol: float = 1e-7
    incumbent_shortcut: bool = True
    mode: str = "alg2"
    max_n: int = 64
    # ABB overrides; None keeps the instance-dependent default
    abb_lambda_init: float | None = None
    abb_lambda_max: float | None = None
    abb_growth_c: float | None = None
    abb_rho: float | None = None
    abb_tau: float | None = None
    abb_kappa: int | None = None
    abb_eps_stop: float | None = None
    abb_max_inner_iters: int | None = None
    abb_backtrack_factor: float | None = None

    def __post_init__(self):
        for name in ("m_tilde", "n_tilde", "snr_db_list", "methods"):
            v = getattr(self, name)
            if not isinstance(v, (list, tuple)):
                setattr(self, name, [v])
        self.m_tilde = [int(v) for v in self.m_tilde]
        self.n_tilde = [int(v) for v in self.n_tilde]
        self.snr_db_list = [float(v) for v in self.snr_db_list]
        self.methods = list(self.methods)

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}, got {self.experiment!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for name in ("m_tilde", "n_tilde", "snr_db_list", "methods"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must not be empty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; choose from {', '.join(METHODS)}")
        if self.mode not in ("alg1", "alg2"):
            raise ConfigError("mode must be alg1 or alg2")
        if len(self.m_tilde) > 1 and len(self.n_tilde) > 1 and len(self.m_tilde) != len(self.n_tilde):
            raise ConfigError("m_tilde and n_tilde lists must have equal length or one entry")
        for mt, nt in self.sizes():
            if mt < 1 or nt < 1:
                raise ConfigError("sizes must be positive")
            n = 2 * nt
            if "exhaustive" in self.methods and n > EXHAUSTIVE_MAX_N:
                raise ConfigError(f"exhaustive search needs N <= {EXHAUSTIVE_MAX_N}, got N = {n}")
            if any(m in self.methods for m in ("gML", "AR-L1", "AR-L2", "alg1-gML")) and n > self.max_n:
                raise ConfigError(f"global solver cap max_n = {self.max_n} is below N = {n}")
        self.abb_overrides()  # surfaces invalid ABB values early
        return self

    def sizes(self) -> list:
        ms, ns = self.m_tilde, self.n_tilde
        if len(ms) == 1:
            ms = ms * len(ns)
        if len(ns) == 1:
            ns = ns * len(ms)
        return list(zip(ms, ns))

    def solver_options(self) -> bnb.SolverOptions:
        return bnb.SolverOptions(node_limit=self.node_limit, time_limit_ms=self.time_limit_ms,
                                 integrality_tol=self.integrality_tol, violation_tol=self.violation_tol,
                                 incumbent_shortcut=self.incumbent_shortcut, mode=self.mode,
                                 max_n=self.max_n)

    def abb_overrides(self) -> dict:
        names = {"abb_kappa": "gll_memory_kappa"}
        out = {}
        for f in dataclasses.fields(self):
            if f.name.startswith("abb_") and getattr(self, f.name) is not None:
                out[names.get(f.name, f.name[4:])] = getattr(self, f.name)
        for k in ("tau", "backtrack_factor"):
            if k in out and not 0 < out[k] < 1:
                raise ConfigError(f"abb_{k} must lie in (0, 1)")
        return out


@dataclass
class TrialRecord:
    trial: int
    method: str
    snr_db: float
    m_tilde: int
    n_tilde: int
    bit_errors: int
    bits: int
    wall_time_us: int
    objective: float
    status: str = "ok"
    extra: dict = field(default_factory=dict)

    def row(self) -> list:
        return [self.trial, self.method, repr(float(self.snr_db)), self.m_tilde, self.n_tilde,
                self.bit_errors, self.bits, self.wall_time_us, repr(float(self.objective)),
                self.status, json.dumps(self.extra, sort_keys=True, separators=(",", ":"))]


def ber(x_hat, x_true) -> tuple[int, int]:
    """``(#coordinates that differ, N)``."""
    x_hat = np.asarray(x_hat)
    x_true = np.asarray(x_true)
    if x_hat.shape != x_true.shape:
        raise ValueError(f"length mismatch: {x_hat.shape} vs {x_true.shape}")
    return int(np.sum(x_hat != x_true)), int(x_true.size)


def signflip_ratio(instance: RealInstance, x) -> float:
    """Fraction of rows with ``b_i^T x < 0``."""
    return float(np.mean(instance.b @ np.asarray(x, dtype=float) < 0))


def _extras(stats: dict) -> dict:
    out = {}
    for k, v in stats.items():
        # timings stay out of extra_json so reruns are byte-identical there
        if "time" in k:
            continue
        if isinstance(v, (bool, np.bool_)):
            out[k] = bool(v)
        elif isinstance(v, (int, np.integer)):
            out[k] = int(v)
        elif isinstance(v, (float, np.floating)) and math.isfinite(v):
            out[k] = float(v)
    return out


def run_trial(config: ExperimentConfig, m_tilde: int, n_tilde: int, snr_db: float, trial: int) -> list:
    """Every configured method on the instance of one (size, SNR, trial) cell."""
    seed = config.base_seed + trial
    inst = generate_instance(m_tilde, n_tilde, snr_db, seed)
    opts = config.solver_options()
    overrides = config.abb_overrides()
    true_ratio = signflip_ratio(inst, inst.x_true)
    records = []
    for method in config.methods:
        params = abb.AbbParams.defaults(inst, **overrides) if method == "AR-L1-ABB" else None
        t0 = time.perf_counter()
        try:
            res = detect(method, inst, seed=seed, bnb_options=opts, abb_params=params)
        except Exception as exc:  # recorded, never fatal for the sweep
            wall = int(round((time.perf_counter() - t0) * 1e6))
            records.append(TrialRecord(trial, method, snr_db, m_tilde, n_tilde, 0, inst.n, wall,
                                       math.nan, f"error: {type(exc).__name__}: {exc}",
                                       {"signflip_true": true_ratio}))
            continue
        wall = int(round((time.perf_counter() - t0) * 1e6))
        errors, bits = ber(res.x_hat, inst.x_true)
        extra = _extras(res.stats)
        extra["signflip_ratio"] = signflip_ratio(inst, res.x_hat)
        extra["signflip_true"] = true_ratio
        status = "ok" if extra.get("proven_optimal", True) else "not_proven"
        records.append(TrialRecord(trial, method, snr_db, m_tilde, n_tilde, errors, bits, wall,
                                   float(res.objective), status, extra))
    return records


def _cells(config: ExperimentConfig):
    for mt, nt in config.sizes():
        for snr in config.snr_db_list:
            for t in range(config.trials):
                yield mt, nt, snr, t


def _run_cell(args):
    config, mt, nt, snr, t = args
    return run_trial(config, mt, nt, snr, t)


def summarize(records) -> list:
    """One summary record per (size, SNR, method) over the records with status ``ok``/``not_proven``."""
    groups: dict = {}
    for r in records:
        if r.trial == SUMMARY or r.status.startswith("error"):
            continue
        groups.setdefault((r.m_tilde, r.n_tilde, r.snr_db, r.method), []).append(r)
    out = []
    for (mt, nt, snr, method), rs in groups.items():
        rates = np.array([r.bit_errors / r.bits for r in rs])
        extra = {
            "trials": len(rs),
            "ber": float(np.mean(rates)),
            "ber_stderr": float(np.std(rates, ddof=1) / math.sqrt(len(rs))) if len(rs) > 1 else 0.0,
        }
        keys = sorted({k for r in rs for k, v in r.extra.items() if isinstance(v, (int, float))})
        for k in keys:
            vals = [float(r.extra[k]) for r in rs if k in r.extra]
            extra[f"mean_{k}"] = float(np.mean(vals))
        out.append(TrialRecord(SUMMARY, method, snr, mt, nt,
                               sum(r.bit_errors for r in rs), sum(r.bits for r in rs),
                               int(round(np.mean([r.wall_time_us for r in rs]))),
                               float(np.mean([r.objective for r in rs])), SUMMARY, extra))
    return out


def run_experiment(config: ExperimentConfig, *, progress=None) -> list:
    """Run the sweep, streaming rows to ``config.output_path`` when set.

    Trials are dispatched to ``config.workers`` processes; results are
    consumed in submission order, so the CSV does not depend on scheduling.
    Summary rows follow the raw rows.  Returns the raw records.
    """
    config.validate()
    records: list = []
    fh = writer = None
    if config.output_path:
        Path(config.output_path).parent.mkdir(parents=True, exist_ok=True)
        fh = open(config.output_path, "w", newline="")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
    try:
        tasks = ((config, mt, nt, snr, t) for mt, nt, snr, t in _cells(config))
        if config.workers > 1:
            pool = ProcessPoolExecutor(max_workers=config.workers)
            results = pool.map(_run_cell, tasks, chunksize=4)
        else:
            pool = None
            results = map(_run_cell, tasks)
        try:
            for batch in results:
                records.extend(batch)
                if writer is not None:
                    for r in batch:
                        writer.writerow(r.row())
                    fh.flush()
                if progress is not None:
                    progress(batch)
        finally:
            if pool is not None:
                pool.shutdown()
        if writer is not None:
            for r in summarize(records):
                writer.writerow(r.row())
    finally:
        if fh is not None:
            fh.close()
    return records


def read_records(csv_path) -> list:
    """Parse a CSV written by :func:`run_experiment` (raw and summary rows)."""
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in CSV_HEADER if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"CSV is missing column {missing[0]!r}")
        out = []
        for row in reader:
            trial = row["trial"] if row["trial"] == SUMMARY else int(row["trial"])
            out.append(TrialRecord(trial, row["method"], float(row["snr_db"]), int(row["m_tilde"]),
                                   int(row["n_tilde"]), int(row["bit_errors"]), int(row["bits"]),
                                   int(row["wall_time_us"]), float(row["objective"]), row["status"],
                                   json.loads(row["extra_json"])))
        return out


# -- flat key = value configuration --------------------------------------

def _field_types():
    types = {}
    for f in dataclasses.fields(ExperimentConfig):
        t = str(f.type)
        if f.name in ("m_tilde", "n_tilde"):
            types[f.name] = ("list", int)
        elif f.name == "snr_db_list":
            types[f.name] = ("list", float)
        elif f.name == "methods":
            types[f.name] = ("list", str)
        elif "bool" in t:
            types[f.name] = ("scalar", bool)
        elif "int" in t:
            types[f.name] = ("scalar", int)
        elif "float" in t:
            types[f.name] = ("scalar", float)
        else:
            types[f.name] = ("scalar", str)
    return types


def _convert(kind, typ, key, raw: str):
    def one(s):
        s = s.strip()
        if typ is bool:
            if s.lower() in ("1", "true", "yes", "on"):
                return True
            if s.lower() in ("0", "false", "no", "off"):
                return False
            raise ConfigError(f"{key}: expected a boolean, got {s!r}")
        try:
            return typ(s)
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {s!r} as {typ.__name__}") from None

    raw = raw.strip()
    if kind == "list":
        return [one(p) for p in raw.split(",") if p.strip()]
    if raw.lower() in ("none", "null", ""):
        return None
    return one(raw)


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment, lists are comma separated."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def config_from_mapping(raw: dict) -> ExperimentConfig:
    types = _field_types()
    kwargs = {}
    for key, value in raw.items():
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        kwargs[key] = _convert(*types[key], key, value) if isinstance(value, str) else value
    try:
        return ExperimentConfig(**kwargs).validate()
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    raw = parse_config_text(Path(path).read_text()) if path else {}
    raw.update(overrides or {})
    return config_from_mapping(raw)


# -- SVG charts ------------------------------------------------------------

@dataclass
class PlotSpec:
    """What to draw: ``y`` is ``ber``, a CSV column or a numeric ``extra_json`` key."""

    x: str = "snr_db"
    y: str = "ber"
    log_y: bool = True
    y_floor: float = 1e-6
    title: str = ""
    width: int = 640
    height: int = 420


def default_plot_spec(experiment: str) -> PlotSpec:
    return {
        "ber": PlotSpec(y="ber", log_y=True, title="BER vs SNR"),
        "signflip": PlotSpec(y="signflip_ratio", log_y=False, title="sign-flip ratio vs SNR"),
        "runtime_snr": PlotSpec(y="wall_time_us", log_y=True, title="runtime vs SNR"),
        "runtime_size": PlotSpec(x="n_tilde", y="wall_time_us", log_y=True, title="runtime vs users"),
        "cutratio": PlotSpec(x="n_tilde", y="cut_pool_ratio", log_y=True, title="cut pool ratio"),
    }.get(experiment, PlotSpec())


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
_NUMERIC = ("snr_db", "m_tilde", "n_tilde", "bit_errors", "bits", "wall_time_us", "objective")


def _series(csv_path, spec: PlotSpec) -> dict:
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        need = ["trial", "method", spec.x]
        if spec.y == "ber":
            need += ["bit_errors", "bits"]
        elif spec.y in _NUMERIC:
            need.append(spec.y)
        else:
            need.append("extra_json")
        for c in need:
            if c not in cols:
                raise ValueError(f"CSV is missing column {c!r}")
        acc: dict = {}
        for row in reader:
            if row["trial"] == SUMMARY or row.get("status", "ok").startswith("error"):
                continue
            if spec.y == "ber":
                y = int(row["bit_errors"]) / int(row["bits"])
            elif spec.y in _NUMERIC:
                y = float(row[spec.y])
            else:
                extra = json.loads(row["extra_json"])
                if spec.y not in extra:
                    continue
                y = float(extra[spec.y])
            acc.setdefault(row["method"], {}).setdefault(float(row[spec.x]), []).append(y)
        if spec.y not in ("ber",) + _NUMERIC and reader.line_num > 1 and not acc:
            raise ValueError(f"no extra_json entry {spec.y!r} in any row")
    return {m: sorted((x, float(np.mean(ys))) for x, ys in pts.items()) for m, pts in acc.items()}


def _ticks(lo, hi, count=5):
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def emit_svg_plot(csv_path, spec: PlotSpec | None = None, out_path=None) -> str:
    """Line chart of per-method means; returns the SVG text and writes ``out_path`` if given.

    On a log axis values below ``spec.y_floor`` (including zero BER) are drawn
    at the floor with a hollow marker.
    """
    spec = spec or PlotSpec()
    series = _series(csv_path, spec)
    w, h = spec.width, spec.height
    left, right, top, bottom = 70, 150, 40, 50
    pw, ph = w - left - right, h - top - bottom

    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    x_lo, x_hi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0

    def ty(y):
        return math.log10(max(y, spec.y_floor)) if spec.log_y else y

    if spec.log_y:
        t = [ty(y) for y in ys] or [math.log10(spec.y_floor), 0.0]
        y_lo, y_hi = math.floor(min(t)), math.ceil(max(t))
    else:
        y_lo, y_hi = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0

    def px(x):
        return left + (x - x_lo) / (x_hi - x_lo) * pw

    def py(v):
        return top + (1.0 - (v - y_lo) / (y_hi - y_lo)) * ph

    out = io.StringIO()
    out.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">\n')
    out.write(f'<rect width="{w}" height="{h}" fill="white"/>\n')
    if spec.title:
        out.write(f'<text x="{left + pw / 2:.1f}" y="22" text-anchor="middle" font-size="15">{_esc(spec.title)}</text>\n')
    # axes
    out.write(f'<g class="axes" stroke="black" fill="none">'
              f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}"/>'
              f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}"/></g>\n')
    out.write('<g class="ticks" font-size="11">\n')
    for xv in _ticks(x_lo, x_hi):
        out.write(f'<line x1="{px(xv):.1f}" y1="{top + ph}" x2="{px(xv):.1f}" y2="{top + ph + 5}" stroke="black"/>'
                  f'<text x="{px(xv):.1f}" y="{top + ph + 18}" text-anchor="middle">{xv:g}</text>\n')
    y_ticks = list(range(int(y_lo), int(y_hi) + 1)) if spec.log_y else _ticks(y_lo, y_hi)
    for yv in y_ticks:
        label = f"1e{yv}" if spec.log_y else f"{yv:.3g}"
        out.write(f'<line x1="{left - 5}" y1="{py(yv):.1f}" x2="{left}" y2="{py(yv):.1f}" stroke="black"/>'
                  f'<text x="{left - 8}" y="{py(yv) + 4:.1f}" text-anchor="end">{label}</text>\n')
    out.write("</g>\n")
    out.write(f'<text x="{left + pw / 2:.1f}" y="{h - 10}" text-anchor="middle" font-size="12">{_esc(spec.x)}</text>\n')
    out.write(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" font-size="12" '
              f'transform="rotate(-90 16 {top + ph / 2:.1f})">{_esc(spec.y)}</text>\n')

    for k, (method, pts) in enumerate(sorted(series.items())):
        color = _COLORS[k % len(_COLORS)]
        coords = " ".join(f"{px(x):.2f},{py(ty(y)):.2f}" for x, y in pts)
        out.write(f'<polyline class="series" data-method="{_esc(method)}" fill="none" stroke="{color}" '
                  f'stroke-width="1.8" points="{coords}"/>\n')
        for x, y in pts:
            cx, cy = px(x), py(ty(y))
            if spec.log_y and y < spec.y_floor:
                out.write(f'<circle class="floor-marker" cx="{cx:.2f}" cy="{cy:.2f}" r="4" fill="white" '
                          f'stroke="{color}"><title>{_esc(method)}: {y:g} below floor {spec.y_floor:g}</title></circle>\n')
            else:
                out.write(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="2.5" fill="{color}"/>\n')
        ly = top + 14 + 18 * k
        out.write(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 34}" y2="{ly}" stroke="{color}" stroke-width="2"/>'
                  f'<text x="{left + pw + 40}" y="{ly + 4}" font-size="12">{_esc(method)}</text>\n')
    if spec.log_y and any(y < spec.y_floor for y in ys):
        out.write(f'<text class="floor-note" x="{left + pw + 12}" y="{top + ph}" font-size="10">'
                  f'hollow: below {spec.y_floor:g}</text>\n')
    out.write("</svg>\n")
    svg = out.getvalue()
    if out_path is not None:
        Path(out_path).write_text(svg)
    return svg


def _esc(s) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")

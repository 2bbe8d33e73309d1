"""
Monte-Carlo experiments: convergence traces, sum rate versus SNR and
interference-subspace angles.

Configuration files are flat ``key = value`` text::

    # 3-user 2x2 channel, one stream per user
    K = 3
    M = 2            # or one value per user: 2, 2, 3
    N = 2
    d = 1
    algorithms = euclidean, stiefel, grassmann
    snr_db_list = 0, 10, 20, 30
    seeds = 100

Blank lines and ``#`` comments are ignored, lists are comma separated and
booleans accept true/false/yes/no/on/off/1/0. See :class:`ExperimentConfig`
for every key.

Every run for seed ``s`` draws its channel and starting precoders from the
``(master_seed, purpose, s)`` streams, so all algorithms (and all SNR
points) see identical instances. Results are written in (algorithm, seed)
order regardless of the number of worker processes.
"""

import csv
import dataclasses
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .manifolds import ManifoldKind
from .metrics import DegenerateStart, dof_slope, max_interference_angle, normalized_leakage, sum_rate
from .network import NetworkConfig, sample_channels, sample_initial_precoders
from .optimizer import StopRule, optimize

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "RunRecord",
    "parse_config_text",
    "load_config",
    "config_hash",
    "solve_instance",
    "run_convergence_experiment",
    "run_rate_experiment",
    "run_angle_experiment",
    "CONVERGENCE_COLUMNS",
    "AGGREGATE_COLUMNS",
    "RATE_COLUMNS",
    "RATE_SUMMARY_COLUMNS",
    "ANGLE_COLUMNS",
]

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CONVERGENCE_COLUMNS = ("algorithm", "seed", "iteration", "cost", "normalized_cost", "status")
AGGREGATE_COLUMNS = ("algorithm", "iteration", "mean_normalized_cost", "n_seeds")
RATE_COLUMNS = ("algorithm", "snr_db", "mean_rate", "std_rate", "n_seeds")
RATE_SUMMARY_COLUMNS = ("algorithm", "dof_slope", "status")
ANGLE_COLUMNS = ("algorithm", "seed", "iteration", "receiver", "max_angle_rad")


class ConfigError(ValueError):
    pass


def _default_snrs():
    return tuple(float(s) for s in range(0, 55, 5))


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Everything needed to reproduce a batch of runs.

    `M`, `N` and `d` are either one integer shared by all users or a tuple
    with one entry per user. `reference_snr_db` sets the transmit power for
    convergence and angle runs. `rate_mode` is ``"reoptimize"`` (precoders
    designed separately at every SNR point) or ``"fixed"`` (designed once at
    the reference SNR, then evaluated across the sweep). `output_dir` and
    `workers` do not affect results and are excluded from the config hash.
    """

    K: int = 3
    M: object = 2
    N: object = 2
    d: object = 1
    snr_db_list: tuple = field(default_factory=_default_snrs)
    reference_snr_db: float = 20.0
    seeds: int = 100
    master_seed: int = 1
    algorithms: tuple = ("euclidean", "stiefel", "grassmann")
    max_iterations: int = 1000
    cost_tolerance: float = 1e-10
    relative_tolerance: float = 1e-6
    beta_reset: bool = False
    rate_mode: str = "reoptimize"
    angle_seed: int = 0
    output_dir: str = "results"
    workers: int = 1

    def __post_init__(self):
        if self.seeds < 1:
            raise ConfigError("seeds must be at least 1")
        if not self.algorithms:
            raise ConfigError("algorithms must not be empty")
        try:
            algos = tuple(ManifoldKind.parse(a).value for a in self.algorithms)
            self.stop_rule()
            self.network()
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        object.__setattr__(self, "algorithms", algos)
        object.__setattr__(self, "snr_db_list", tuple(float(s) for s in self.snr_db_list))
        if self.rate_mode not in ("reoptimize", "fixed"):
            raise ConfigError(f"rate_mode must be 'reoptimize' or 'fixed', got {self.rate_mode!r}")
        if not 0 <= self.angle_seed < self.seeds:
            raise ConfigError("angle_seed must be in [0, seeds)")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    def _per_user(self, value):
        if isinstance(value, (tuple, list)):
            return tuple(int(v) for v in value)
        return (int(value),) * self.K

    def network(self, snr_db=None):
        snr = self.reference_snr_db if snr_db is None else snr_db
        base = NetworkConfig(
            self.K, self._per_user(self.M), self._per_user(self.N), self._per_user(self.d),
            (1.0,) * self.K,
        )
        return base.with_snr(snr)

    def stop_rule(self):
        return StopRule(self.max_iterations, self.cost_tolerance, self.relative_tolerance)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


_INT_KEYS = {"K", "seeds", "master_seed", "max_iterations", "angle_seed", "workers"}
_FLOAT_KEYS = {"reference_snr_db", "cost_tolerance", "relative_tolerance"}
_BOOL_KEYS = {"beta_reset"}
_STR_KEYS = {"rate_mode", "output_dir"}
_PER_USER_KEYS = {"M", "N", "d"}
_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _convert(key, raw):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _BOOL_KEYS:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if key in _STR_KEYS:
            return raw
        if key in _PER_USER_KEYS:
            parts = [p.strip() for p in raw.split(",") if p.strip()]
            return int(parts[0]) if len(parts) == 1 else tuple(int(p) for p in parts)
        if key == "snr_db_list":
            return tuple(float(p) for p in raw.split(",") if p.strip())
        if key == "algorithms":
            return tuple(p.strip() for p in raw.split(",") if p.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from None
    raise ConfigError(f"unknown config key {key!r}")


def parse_config_text(text):
    """Parse the flat ``key = value`` format into a dict of typed values."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, raw)
    return values


def load_config(path=None, **overrides):
    """Build an :class:`ExperimentConfig` from a file plus keyword overrides."""
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        values.update(parse_config_text(text))
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def config_hash(cfg):
    d = dataclasses.asdict(cfg)
    d.pop("output_dir")
    d.pop("workers")
    blob = json.dumps(d, sort_keys=True, default=list).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class RunRecord:
    """Outcome of one (algorithm, seed[, snr]) optimization."""

    algorithm: str
    seed: int
    snr_db: float
    status: str
    costs: list = field(default_factory=list)
    precoders: list = None
    rates: list = None
    angle_rows: list = None


def solve_instance(cfg, algorithm, seed, snr_db=None, callback=None):
    """
    Optimize one Monte-Carlo instance.

    Returns ``(channels, network_config, OptimizeResult)``.
    """
    net = cfg.network(snr_db)
    ch = sample_channels(net, cfg.master_seed, seed)
    init = sample_initial_precoders(net, cfg.master_seed, seed)
    result = optimize(
        algorithm, ch, net, init, cfg.stop_rule(), beta_reset=cfg.beta_reset, callback=callback
    )
    return ch, net, result


def _error_status(exc):
    return f"error: {type(exc).__name__}: {exc}"


def _convergence_task(args):
    cfg, algorithm, seed = args
    try:
        _, _, result = solve_instance(cfg, algorithm, seed)
    except Exception as exc:  # recorded in the CSV, never aborts the batch
        return RunRecord(algorithm, seed, cfg.reference_snr_db, _error_status(exc))
    return RunRecord(
        algorithm, seed, cfg.reference_snr_db, result.stop_reason,
        costs=[c for _, c in result.trace], precoders=result.state.precoders,
    )


def _rate_task(args):
    cfg, algorithm, seed = args
    try:
        if cfg.rate_mode == "fixed":
            ch, net, result = solve_instance(cfg, algorithm, seed)
            rates = [sum_rate(ch, result.state.precoders, net, snr) for snr in cfg.snr_db_list]
        else:
            rates = []
            for snr in cfg.snr_db_list:
                ch, net, result = solve_instance(cfg, algorithm, seed, snr_db=snr)
                rates.append(sum_rate(ch, result.state.precoders, net))
    except Exception as exc:
        return RunRecord(algorithm, seed, float("nan"), _error_status(exc))
    return RunRecord(algorithm, seed, float("nan"), "ok", rates=rates)


def _angle_task(args):
    cfg, algorithm, seed = args
    rows = []

    def record(state):
        for k in range(net.K):
            angle = max_interference_angle(ch, state.precoders, net, k)
            rows.append((algorithm, seed, state.iteration, k, angle))

    net = cfg.network()
    ch = sample_channels(net, cfg.master_seed, seed)
    init = sample_initial_precoders(net, cfg.master_seed, seed)
    try:
        result = optimize(
            algorithm, ch, net, init, cfg.stop_rule(), beta_reset=cfg.beta_reset, callback=record
        )
    except Exception as exc:
        return RunRecord(algorithm, seed, cfg.reference_snr_db, _error_status(exc), angle_rows=rows)
    return RunRecord(algorithm, seed, cfg.reference_snr_db, result.stop_reason, angle_rows=rows)


def _map(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map() yields in submission order, independent of completion order
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path, kind, cfg, columns, rows):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(
                f"# ia_manifolds {kind} schema=v{SCHEMA_VERSION} "
                f"config_hash={config_hash(cfg)} master_seed={cfg.master_seed}\n"
            )
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(x) for x in row])
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc
    return path


def _tasks(cfg, seeds=None):
    seeds = range(cfg.seeds) if seeds is None else seeds
    return [(cfg, algo, s) for algo in cfg.algorithms for s in seeds]


def run_convergence_experiment(cfg, output_dir=None):
    """
    Optimize every (algorithm, seed) at the reference SNR and write
    ``convergence.csv`` and ``convergence_aggregate.csv``.

    In the aggregate file a run that stopped early contributes its final
    normalized cost to every later iteration; errored runs are excluded.

    Returns
    -------
    list of RunRecord
    """
    out = Path(output_dir or cfg.output_dir)
    records = _map(_convergence_task, _tasks(cfg), cfg.workers)

    rows = []
    per_algo = {a: [] for a in cfg.algorithms}
    for rec in records:
        if not rec.costs:
            rows.append((rec.algorithm, rec.seed, None, None, None, rec.status))
            continue
        try:
            norm = normalized_leakage(rec.costs)
        except DegenerateStart:
            norm = [None] * len(rec.costs)
            status = "degenerate_start"
        else:
            status = rec.status
            per_algo[rec.algorithm].append(norm)
        for it, (c, nc) in enumerate(zip(rec.costs, norm)):
            rows.append((rec.algorithm, rec.seed, it, float(c), None if nc is None else float(nc), status))
    _write_csv(out / "convergence.csv", "convergence", cfg, CONVERGENCE_COLUMNS, rows)

    agg = []
    for algo in cfg.algorithms:
        traces = per_algo[algo]
        if not traces:
            continue
        length = max(len(t) for t in traces)
        padded = np.array([np.concatenate([t, np.full(length - len(t), t[-1])]) for t in traces])
        for it, m in enumerate(padded.mean(axis=0)):
            agg.append((algo, it, float(m), len(traces)))
    _write_csv(out / "convergence_aggregate.csv", "convergence_aggregate", cfg, AGGREGATE_COLUMNS, agg)
    return records


def run_rate_experiment(cfg, output_dir=None):
    """
    Sum rate versus SNR, written to ``rate.csv``, and the DoF slope per
    algorithm, written to ``rate_summary.csv``.

    Returns
    -------
    dict
        ``{algorithm: {"snr_db": [...], "mean_rate": [...], "dof_slope": float}}``
    """
    if not cfg.snr_db_list:
        raise ConfigError("rate experiment needs a non-empty snr_db_list")
    out = Path(output_dir or cfg.output_dir)
    records = _map(_rate_task, _tasks(cfg), cfg.workers)

    rows, summary, results = [], [], {}
    for algo in cfg.algorithms:
        good = [r.rates for r in records if r.algorithm == algo and r.rates is not None]
        failed = sum(1 for r in records if r.algorithm == algo and r.rates is None)
        if failed:
            log.warning("%s: %d seeds failed in the rate experiment", algo, failed)
        R = np.array(good, dtype=float).reshape(len(good), len(cfg.snr_db_list))
        n = R.shape[0]
        mean = R.mean(axis=0) if n else np.full(len(cfg.snr_db_list), np.nan)
        std = R.std(axis=0, ddof=1) if n > 1 else np.zeros(len(cfg.snr_db_list))
        for snr, m, s in zip(cfg.snr_db_list, mean, std):
            rows.append((algo, float(snr), float(m), float(s), n))
        if len(cfg.snr_db_list) < 2:
            slope, status = None, "undefined: fewer than 2 SNR points"
        elif n == 0:
            slope, status = None, "undefined: no successful seeds"
        else:
            slope, status = dof_slope(list(zip(cfg.snr_db_list, mean))), "ok"
        summary.append((algo, slope, status))
        results[algo] = {"snr_db": list(cfg.snr_db_list), "mean_rate": mean.tolist(), "dof_slope": slope}
    _write_csv(out / "rate.csv", "rate", cfg, RATE_COLUMNS, rows)
    _write_csv(out / "rate_summary.csv", "rate_summary", cfg, RATE_SUMMARY_COLUMNS, summary)
    return results


def run_angle_experiment(cfg, output_dir=None):
    """
    Per-iteration maximum interference angle at every receiver for the
    designated seed ``cfg.angle_seed``, written to ``angles.csv``.
    """
    if cfg.K < 3:
        raise ConfigError("angle experiment needs K >= 3 (two interferers per receiver)")
    out = Path(output_dir or cfg.output_dir)
    records = _map(_angle_task, _tasks(cfg, seeds=[cfg.angle_seed]), cfg.workers)
    rows = [row for rec in records for row in rec.angle_rows]
    for rec in records:
        if rec.status.startswith("error"):
            log.warning("%s seed %d: %s", rec.algorithm, rec.seed, rec.status)
    _write_csv(out / "angles.csv", "angles", cfg, ANGLE_COLUMNS, rows)
    return records

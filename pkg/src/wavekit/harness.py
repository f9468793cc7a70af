"""Config-driven capacity sweeps.

A sweep walks one variable (array width or link distance), synthesizes one
channel per (value, seed), evaluates every requested scheme on it, and emits
per-point records plus per-(value, scheme) mean/stderr aggregates.  Points run
in worker processes so a wall-clock budget can abort a stuck point without
taking down the sweep; outputs are ordered by (value, seed, scheme) no matter
which worker finishes first.
"""

from __future__ import annotations

import json
import os
import queue as queue_mod
import subprocess
import time
from dataclasses import dataclass, field, fields, replace
from multiprocessing import get_context

import numpy as np
import yaml

from . import __version__
from .allocation import DcOptions, IwfOptions, PsoOptions
from .channel import ChannelConfig, synthesize_channel
from .errors import ConfigError
from .geometry import SystemParams, build_facing_arrays
from .metrics import (
    ALL_SCHEMES,
    SCHEME_SPATIAL_DIVISION,
    SCHEME_SVD_BOUND,
    spatial_division_capacity,
    svd_capacity,
    wd_capacity_report,
    wd_pipeline,
)

CSV_COLUMNS = ("scheme", "n_x", "n_y", "distance_m", "seed", "beta",
               "num_streams", "capacity_bits", "duration_s")

_WD_SCHEMES = tuple(s for s in ALL_SCHEMES
                    if s not in (SCHEME_SVD_BOUND, SCHEME_SPATIAL_DIVISION))

_POLL_INTERVAL_S = 0.005


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class ResultRecord:
    """One scheme evaluated on one synthesized channel."""

    scheme: str
    n_x: int
    n_y: int
    distance_m: float
    seed: int
    beta: float
    num_streams: int
    capacity_bits: float
    duration_s: float


@dataclass(frozen=True)
class AggregateRecord:
    """Seed statistics for one (sweep value, scheme) cell."""

    scheme: str
    n_x: int
    n_y: int
    distance_m: float
    beta: float
    num_seeds: int
    capacity_mean_bits: float
    capacity_stderr_bits: float


@dataclass(frozen=True)
class PointFailure:
    sweep_value: object
    seed: int
    reason: str


@dataclass(frozen=True)
class SweepResult:
    records: tuple
    aggregates: tuple
    failures: tuple
    selections: tuple = ()


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    sweep: str
    sweep_values: tuple
    n_y: int
    schemes: tuple
    seeds: tuple
    system: SystemParams
    channel: ChannelConfig
    beta: float = 1.0
    n_x: int | None = None
    distance_m: float | None = None
    max_streams: int | None = None
    point_budget_s: float = 120.0
    dc_options: DcOptions = DcOptions()
    iwf_options: IwfOptions = IwfOptions()
    pso_options: PsoOptions = PsoOptions()
    csv_path: str | None = None
    raw: dict = field(default_factory=dict, compare=False)


# ----------------------------------------------------------------- config I/O

def _as_map(node, path):
    if node is None:
        return {}
    if not isinstance(node, dict):
        raise ConfigError(path, f"expected a mapping, got {type(node).__name__}")
    return node


def _number(block, key, path, *, required=False, default=None, minimum=None,
            maximum=None):
    if key not in block or block[key] is None:
        if required:
            raise ConfigError(f"{path}.{key}", "required")
        return default
    val = block[key]
    if isinstance(val, str):
        # YAML 1.1 only floats exponents with an explicit sign ("1e+9"); accept
        # the common unsigned spelling ("1e9") that parses as a string
        try:
            val = float(val)
        except ValueError:
            raise ConfigError(f"{path}.{key}", f"expected a number, got {val!r}")
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {val!r}")
    val = float(val)
    if not np.isfinite(val):
        raise ConfigError(f"{path}.{key}", "must be finite")
    if minimum is not None and val < minimum:
        raise ConfigError(f"{path}.{key}", f"must be >= {minimum}, got {val}")
    if maximum is not None and val > maximum:
        raise ConfigError(f"{path}.{key}", f"must be <= {maximum}, got {val}")
    return val


def _integer(block, key, path, *, required=False, default=None, minimum=None):
    if key not in block or block[key] is None:
        if required:
            raise ConfigError(f"{path}.{key}", "required")
        return default
    val = block[key]
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"{path}.{key}", f"expected an integer, got {val!r}")
    if minimum is not None and val < minimum:
        raise ConfigError(f"{path}.{key}", f"must be >= {minimum}, got {val}")
    return val


def _options_from(block, path, cls):
    defaults = cls()
    known = {f.name for f in fields(cls)}
    overrides = {}
    for key, val in _as_map(block, path).items():
        if key not in known:
            raise ConfigError(f"{path}.{key}", "unknown option")
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"{path}.{key}", f"expected a number, got {val!r}")
        current = getattr(defaults, key)
        overrides[key] = int(val) if isinstance(current, int) else float(val)
    return replace(defaults, **overrides)


def load_config(path: str) -> ExperimentConfig:
    """Parse and validate a sweep config, reporting errors by field path."""
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(path, "no such file")
    except yaml.YAMLError as err:
        raise ConfigError(path, f"invalid YAML: {err}")
    doc = _as_map(doc, "<root>")
    if not doc:
        raise ConfigError("<root>", "empty config")

    exp = _as_map(doc.get("experiment"), "experiment")
    sweep = exp.get("sweep")
    if sweep not in ("array_size", "distance"):
        raise ConfigError("experiment.sweep",
                          f"expected 'array_size' or 'distance', got {sweep!r}")

    values = exp.get("sweep_values")
    if not isinstance(values, list) or not values:
        raise ConfigError("experiment.sweep_values", "expected a nonempty list")
    parsed_values = []
    for i, v in enumerate(values):
        if sweep == "array_size":
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError(f"experiment.sweep_values[{i}]",
                                  f"expected a positive integer, got {v!r}")
            parsed_values.append(int(v))
        else:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0:
                raise ConfigError(f"experiment.sweep_values[{i}]",
                                  f"expected a positive distance in meters, got {v!r}")
            parsed_values.append(float(v))

    n_y = _integer(exp, "n_y", "experiment", required=True, minimum=1)
    if sweep == "array_size":
        distance_m = _number(exp, "distance_m", "experiment", required=True, minimum=0.0)
        if distance_m <= 0:
            raise ConfigError("experiment.distance_m", "must be positive")
        if exp.get("n_x") is not None:
            raise ConfigError("experiment.n_x", "not used in array_size sweeps")
        n_x = None
    else:
        n_x = _integer(exp, "n_x", "experiment", required=True, minimum=1)
        if exp.get("distance_m") is not None:
            raise ConfigError("experiment.distance_m", "not used in distance sweeps")
        distance_m = None

    schemes = exp.get("schemes")
    if not isinstance(schemes, list) or not schemes:
        raise ConfigError("experiment.schemes", "expected a nonempty list")
    for s in schemes:
        if s not in ALL_SCHEMES:
            raise ConfigError("experiment.schemes",
                              f"unknown scheme {s!r}; valid: {', '.join(ALL_SCHEMES)}")
    if len(set(schemes)) != len(schemes):
        raise ConfigError("experiment.schemes", "duplicate scheme")

    seeds = exp.get("seeds")
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("experiment.seeds", "expected a nonempty list")
    for s in seeds:
        if isinstance(s, bool) or not isinstance(s, int) or s < 0:
            raise ConfigError("experiment.seeds",
                              f"expected non-negative integers, got {s!r}")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("experiment.seeds", "duplicate seed")

    beta = _number(exp, "beta", "experiment", default=1.0, minimum=1.0, maximum=4.0)
    max_streams = _integer(exp, "max_streams", "experiment", minimum=1)
    point_budget_s = _number(exp, "point_budget_s", "experiment", default=120.0)
    if point_budget_s <= 0:
        raise ConfigError("experiment.point_budget_s", "must be positive")
    name = exp.get("name")
    if name is None:
        name = os.path.splitext(os.path.basename(path))[0]
    if not isinstance(name, str) or not name:
        raise ConfigError("experiment.name", f"expected a nonempty string, got {name!r}")

    sys_block = _as_map(doc.get("system"), "system")
    carrier_hz = _number(sys_block, "carrier_frequency_hz", "system", required=True)
    if carrier_hz <= 0:
        raise ConfigError("system.carrier_frequency_hz", "must be positive")
    tx_dbm = _number(sys_block, "tx_power_dbm", "system", required=True)
    noise_dbm = _number(sys_block, "noise_power_dbm", "system", required=True)
    bandwidth_hz = _number(sys_block, "bandwidth_hz", "system", minimum=0.0)
    rf_tx = _integer(sys_block, "num_rf_chains_tx", "system", minimum=1)
    rf_rx = _integer(sys_block, "num_rf_chains_rx", "system", minimum=1)
    system = SystemParams.from_frequency(
        carrier_frequency_hz=carrier_hz,
        total_tx_power_w=dbm_to_watts(tx_dbm),
        noise_power_w=dbm_to_watts(noise_dbm),
        num_rf_chains_tx=rf_tx,
        num_rf_chains_rx=rf_rx,
        bandwidth_hz=bandwidth_hz,
    )

    chan_block = _as_map(doc.get("channel"), "channel")
    chan_known = {f.name for f in fields(ChannelConfig)}
    for key in chan_block:
        if key not in chan_known:
            raise ConfigError(f"channel.{key}", "unknown option")
    try:
        channel = ChannelConfig(**chan_block)
    except (TypeError, ValueError) as err:
        raise ConfigError("channel", str(err))

    solver = _as_map(doc.get("solver"), "solver")
    for key in solver:
        if key not in ("dc", "iwf", "pso"):
            raise ConfigError(f"solver.{key}", "unknown solver block")
    dc_opts = _options_from(solver.get("dc"), "solver.dc", DcOptions)
    iwf_opts = _options_from(solver.get("iwf"), "solver.iwf", IwfOptions)
    pso_opts = _options_from(solver.get("pso"), "solver.pso", PsoOptions)

    out_block = _as_map(doc.get("output"), "output")
    csv_path = out_block.get("csv_path")
    if csv_path is not None and (not isinstance(csv_path, str) or not csv_path):
        raise ConfigError("output.csv_path", "expected a nonempty path string")

    return ExperimentConfig(
        name=name,
        sweep=sweep,
        sweep_values=tuple(parsed_values),
        n_y=n_y,
        schemes=tuple(schemes),
        seeds=tuple(int(s) for s in seeds),
        system=system,
        channel=channel,
        beta=beta,
        n_x=n_x,
        distance_m=distance_m,
        max_streams=max_streams,
        point_budget_s=point_budget_s,
        dc_options=dc_opts,
        iwf_options=iwf_opts,
        pso_options=pso_opts,
        csv_path=csv_path,
        raw=doc,
    )


def override_seeds(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    """Replace the seed list with a single seed, keeping the echo honest."""
    raw = dict(cfg.raw)
    raw["experiment"] = dict(raw.get("experiment", {}))
    raw["experiment"]["seeds"] = [int(seed)]
    return replace(cfg, seeds=(int(seed),), raw=raw)


# --------------------------------------------------------------- point workers

def _point_geometry(cfg: ExperimentConfig, value):
    if cfg.sweep == "array_size":
        return int(value), cfg.n_y, float(cfg.distance_m)
    return int(cfg.n_x), cfg.n_y, float(value)


def _evaluate_point(cfg: ExperimentConfig, value_idx: int, seed_idx: int):
    """All schemes on one synthesized channel; WD schemes share one pipeline."""
    value = cfg.sweep_values[value_idx]
    seed = cfg.seeds[seed_idx]
    n_x, n_y, distance_m = _point_geometry(cfg, value)
    tx, rx = build_facing_arrays(n_x, n_y, cfg.system.wavelength_m / 2.0, distance_m)
    h = synthesize_channel(tx, rx, cfg.system, cfg.channel, seed=seed)
    pipe = None
    records = []
    for scheme in cfg.schemes:
        started = time.perf_counter()
        if scheme in _WD_SCHEMES:
            if pipe is None:
                pipe = wd_pipeline(h, cfg.system, beta=cfg.beta,
                                   max_streams=cfg.max_streams)
            report = wd_capacity_report(
                h, cfg.system, solver_choice=scheme, pipeline=pipe,
                dc_options=cfg.dc_options, iwf_options=cfg.iwf_options,
                pso_options=cfg.pso_options)
        elif scheme == SCHEME_SVD_BOUND:
            report = svd_capacity(h, cfg.system)
        else:
            report = spatial_division_capacity(h, cfg.system)
        records.append(ResultRecord(
            scheme=scheme, n_x=n_x, n_y=n_y, distance_m=distance_m, seed=seed,
            beta=cfg.beta, num_streams=report.num_streams,
            capacity_bits=report.capacity_bits,
            duration_s=time.perf_counter() - started))
    selection = None
    if pipe is not None and seed_idx == 0:
        selection = {
            "sweep_value": value, "seed": seed,
            "pairs": [{"r": r, "c": c, "gain": float(pipe.gains[r, c])}
                      for r, c in pipe.assignment.pairs],
        }
    return records, selection


def _point_worker(cfg, value_idx, seed_idx, out_queue):
    try:
        records, selection = _evaluate_point(cfg, value_idx, seed_idx)
        out_queue.put(("ok", records, selection))
    except Exception as err:  # noqa: BLE001 - reported as a point failure
        out_queue.put(("error", f"{type(err).__name__}: {err}", None))


def _worker_count(num_points: int) -> int:
    raw = os.environ.get("WAVEKIT_THREADS", "")
    try:
        requested = int(raw)
    except ValueError:
        requested = 0
    if requested < 1:
        requested = os.cpu_count() or 1
    return max(1, min(requested, num_points))


def run_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Evaluate every (sweep value, seed, scheme) cell.

    Each (value, seed) point runs in its own process under the wall-clock
    budget; a point that exceeds it is terminated and recorded as a failure
    while the sweep continues.  Output order is deterministic regardless of
    worker scheduling.
    """
    points = [(vi, si) for vi in range(len(cfg.sweep_values))
              for si in range(len(cfg.seeds))]
    workers = _worker_count(len(points))
    ctx = get_context("fork") if os.name == "posix" else get_context("spawn")
    pending = list(reversed(points))
    active = {}
    outcome = {}

    def _finish(key, payload):
        proc, q, _deadline = active.pop(key)
        proc.join()
        q.close()
        outcome[key] = payload

    while pending or active:
        while pending and len(active) < workers:
            vi, si = pending.pop()
            q = ctx.Queue()
            proc = ctx.Process(target=_point_worker, args=(cfg, vi, si, q),
                               daemon=True)
            proc.start()
            active[(vi, si)] = (proc, q, time.monotonic() + cfg.point_budget_s)
        progressed = False
        for key in list(active):
            proc, q, deadline = active[key]
            try:
                payload = q.get_nowait()
            except queue_mod.Empty:
                payload = None
            if payload is not None:
                _finish(key, payload)
                progressed = True
            elif not proc.is_alive():
                try:
                    payload = q.get(timeout=0.25)
                except queue_mod.Empty:
                    payload = ("error",
                               f"worker exited without result (code {proc.exitcode})",
                               None)
                _finish(key, payload)
                progressed = True
            elif time.monotonic() > deadline:
                proc.terminate()
                _finish(key, ("timeout",
                              f"point budget {cfg.point_budget_s} s exceeded", None))
                progressed = True
        if not progressed and active:
            time.sleep(_POLL_INTERVAL_S)

    records, failures, selections = [], [], []
    for vi, si in points:
        status, payload, selection = outcome[(vi, si)]
        if status == "ok":
            records.extend(payload)
            if selection is not None:
                selections.append(selection)
        else:
            failures.append(PointFailure(sweep_value=cfg.sweep_values[vi],
                                         seed=cfg.seeds[si], reason=payload))

    aggregates = []
    for vi, value in enumerate(cfg.sweep_values):
        n_x, n_y, distance_m = _point_geometry(cfg, value)
        for scheme in cfg.schemes:
            vals = [r.capacity_bits for r in records
                    if r.scheme == scheme and r.n_x == n_x
                    and r.distance_m == distance_m]
            if not vals:
                continue
            arr = np.asarray(vals)
            stderr = 0.0 if arr.size == 1 else float(
                np.std(arr, ddof=1) / np.sqrt(arr.size))
            aggregates.append(AggregateRecord(
                scheme=scheme, n_x=n_x, n_y=n_y, distance_m=distance_m,
                beta=cfg.beta, num_seeds=int(arr.size),
                capacity_mean_bits=float(np.mean(arr)),
                capacity_stderr_bits=stderr))

    return SweepResult(records=tuple(records), aggregates=tuple(aggregates),
                       failures=tuple(failures), selections=tuple(selections))


# -------------------------------------------------------------------- emission

def _fmt_float(x: float) -> str:
    return repr(float(x))


def _data_row(rec: ResultRecord) -> list:
    return [rec.scheme, str(rec.n_x), str(rec.n_y), _fmt_float(rec.distance_m),
            str(rec.seed), _fmt_float(rec.beta), str(rec.num_streams),
            _fmt_float(rec.capacity_bits), _fmt_float(rec.duration_s)]


def _aggregate_rows(agg: AggregateRecord) -> list:
    # num_streams and duration_s stay empty on statistics rows
    rows = []
    for stat, value in (("mean", agg.capacity_mean_bits),
                        ("stderr", agg.capacity_stderr_bits)):
        rows.append([agg.scheme, str(agg.n_x), str(agg.n_y),
                     _fmt_float(agg.distance_m), stat, _fmt_float(agg.beta),
                     "", _fmt_float(value), ""])
    return rows


def _repo_version() -> str:
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5, cwd=here, check=False)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return f"wavekit-{__version__}"


def write_outputs(cfg: ExperimentConfig, result: SweepResult, csv_path: str,
                  json_path: str) -> None:
    """Write the CSV table (data rows, then mean/stderr rows) and JSON sidecar."""
    for path in (csv_path, json_path):
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
    lines = [",".join(CSV_COLUMNS)]
    for rec in result.records:
        lines.append(",".join(_data_row(rec)))
    for agg in result.aggregates:
        for row in _aggregate_rows(agg):
            lines.append(",".join(row))
    with open(csv_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")

    sidecar = {
        "version": _repo_version(),
        "config": cfg.raw,
        "csv_path": os.path.basename(csv_path),
        "num_records": len(result.records),
        "num_aggregates": len(result.aggregates),
        "failures": [{"sweep_value": f.sweep_value, "seed": f.seed,
                      "reason": f.reason} for f in result.failures],
        "selections": list(result.selections),
    }
    with open(json_path, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")

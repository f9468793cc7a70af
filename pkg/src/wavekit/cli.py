"""Command-line front end: run sweeps, validate configs, self-check solvers."""

import os

# Pin kernel thread pools before numpy loads so results are bit-identical
# across machines and thread settings; sweep parallelism uses processes.
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

import argparse
import itertools
import sys

import numpy as np

from .errors import ConfigError, WavekitError
from .harness import load_config, override_seeds, run_sweep, write_outputs


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavekit",
        description="Capacity sweeps for wavenumber-domain precoding experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a sweep config and write CSV/JSON")
    run_p.add_argument("--config", required=True, help="path to a sweep config")
    run_p.add_argument("--out", default=None,
                       help="output directory (default: config's output path or cwd)")
    run_p.add_argument("--seed-override", type=int, default=None,
                       help="run only this seed instead of the configured list")

    val_p = sub.add_parser("validate", help="schema-check a config and exit")
    val_p.add_argument("--config", required=True)

    sub.add_parser("oracle",
                   help="run the small-instance brute-force self-checks")
    return parser


def _output_paths(cfg, out_dir):
    if out_dir:
        csv_path = os.path.join(out_dir, f"{cfg.name}.csv")
    elif cfg.csv_path:
        csv_path = cfg.csv_path
    else:
        csv_path = f"{cfg.name}.csv"
    return csv_path, os.path.splitext(csv_path)[0] + ".json"


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed_override is not None:
        cfg = override_seeds(cfg, args.seed_override)
    result = run_sweep(cfg)
    csv_path, json_path = _output_paths(cfg, args.out)
    write_outputs(cfg, result, csv_path, json_path)
    print(f"{cfg.name}: {len(result.records)} records, "
          f"{len(result.aggregates)} aggregates, "
          f"{len(result.failures)} failures -> {csv_path}")
    for failure in result.failures:
        print(f"  failed point value={failure.sweep_value} seed={failure.seed}: "
              f"{failure.reason}", file=sys.stderr)
    return 2 if result.failures else 0


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(f"ok: {args.config} ({cfg.name}: {cfg.sweep} sweep, "
          f"{len(cfg.sweep_values)} values x {len(cfg.seeds)} seeds x "
          f"{len(cfg.schemes)} schemes)")
    return 0


def _brute_force_assignment(gains: np.ndarray) -> float:
    rows, cols = gains.shape
    best = 0.0
    if rows <= cols:
        for perm in itertools.permutations(range(cols), rows):
            best = max(best, sum(gains[i, perm[i]] for i in range(rows)))
    else:
        for perm in itertools.permutations(range(rows), cols):
            best = max(best, sum(gains[perm[j], j] for j in range(cols)))
    return float(best)


def _grid_best_two_stream(coupling, resolution: int = 400) -> float:
    t = np.linspace(0.0, coupling.budget_w, resolution + 1)
    x, y = np.meshgrid(t, t, indexing="ij")
    mask = x + y <= coupling.budget_w * (1 + 1e-12)
    a, b = coupling.direct_gains, coupling.cross_gains
    sinr0 = a[0] * x / (b[0, 1] * y + coupling.noise_power_w)
    sinr1 = a[1] * y / (b[1, 0] * x + coupling.noise_power_w)
    values = np.log2(1.0 + sinr0) + np.log2(1.0 + sinr1)
    return float(np.max(values[mask]))


def _cmd_oracle() -> int:
    from .allocation import CouplingMatrix, allocate_dc
    from .selection import select_hungarian

    rng = np.random.default_rng(20240816)
    assign_total, assign_pass = 60, 0
    for _ in range(assign_total):
        rows = int(rng.integers(1, 6))
        cols = int(rng.integers(1, 6))
        gains = rng.integers(0, 7, size=(rows, cols)).astype(float)
        got = select_hungarian(gains).objective_value
        if got == _brute_force_assignment(gains):
            assign_pass += 1
    print(f"assignment vs brute force: {assign_pass}/{assign_total} passed")

    alloc_total, alloc_pass = 20, 0
    for _ in range(alloc_total):
        direct = rng.uniform(0.5, 3.0, size=2)
        cross = np.zeros((2, 2))
        cross[0, 1], cross[1, 0] = rng.uniform(0.0, 1.0, size=2)
        coupling = CouplingMatrix(direct_gains=direct, cross_gains=cross,
                                  noise_power_w=0.1, budget_w=1.0)
        achieved = allocate_dc(coupling).achieved_capacity_bits
        target = _grid_best_two_stream(coupling)
        if achieved >= target - 1e-3 * max(1.0, abs(target)):
            alloc_pass += 1
    print(f"allocation vs grid search: {alloc_pass}/{alloc_total} passed")

    failures = (assign_total - assign_pass) + (alloc_total - alloc_pass)
    print(f"failures: {failures}")
    return 0 if failures == 0 else 2


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "validate":
            return _cmd_validate(args)
        return _cmd_oracle()
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except WavekitError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Grid sweeps over dotted config keys."""

from __future__ import annotations

import copy
import csv
import itertools
from pathlib import Path

from .config import TrainConfig, check_key, set_key
from .training import METRICS_COLUMNS, train


def _run_name(combo: dict[str, str]) -> str:
    if not combo:
        return "baseline"
    return "_".join(f"{k.split('.')[-1]}-{v}" for k, v in combo.items())


def sweep(cfg: TrainConfig, grid: dict[str, list], out_dir: str | Path) -> list[dict]:
    """Train once per point of the Cartesian product of ``grid``.

    Every key is validated before the first run.  Each run writes into its
    own subdirectory; ``summary.csv`` gets one row per run holding the grid
    values and that run's final metrics row.
    """
    cfg.validate()
    env_name = cfg.env.name
    for key in grid:
        if key == "env.name":
            continue
        check_key(key, env_name)
    # Reject unparseable values up front as well.
    for key, values in grid.items():
        for v in values:
            set_key(copy.deepcopy(cfg), key, str(v))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    keys = list(grid)
    summary = []
    for values in itertools.product(*(grid[k] for k in keys)):
        combo = {k: str(v) for k, v in zip(keys, values)}
        run_cfg = copy.deepcopy(cfg)
        for k, v in combo.items():
            set_key(run_cfg, k, v)
        run_cfg.validate()
        name = _run_name(combo)
        _, rows = train(run_cfg, out / name)
        final = rows[-1]
        summary.append({"run": name, **combo, **{c: getattr(final, c) for c in METRICS_COLUMNS}})

    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["run", *keys, *METRICS_COLUMNS], lineterminator="\n")
        writer.writeheader()
        writer.writerows(summary)
    return summary

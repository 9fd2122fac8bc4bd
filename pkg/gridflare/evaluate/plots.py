# coding:utf-8

import os
from typing import Dict
from typing import List
from typing import Sequence

import matplotlib
import pandas as pd

from gridflare.errors import SchemaError
from gridflare.tables import read_table

matplotlib.use("Agg")
matplotlib.rcParams.update({"font.family": "DejaVu Sans", "axes.unicode_minus": False, "svg.hashsalt": "gridflare"})  # noqa:E501

import matplotlib.pyplot as plt  # noqa:E402 pylint: disable=wrong-import-position

METRICS = ("eval_sr", "eval_sel")
LABELS = {"eval_sr": "Eval success rate", "eval_sel": "Eval SEL"}


def _seed_dirs(path: str) -> List[str]:
    return sorted(os.path.join(path, name) for name in os.listdir(path)
                  if name.startswith("seed_") and os.path.isfile(os.path.join(path, name, "curves.csv")))  # noqa:E501


def load_curves(path: str, metrics: Sequence[str] = METRICS) -> pd.DataFrame:
    """Curves of one run, averaged over its ``seed_*`` directories."""
    required = ("env_steps", *metrics)
    if os.path.isfile(os.path.join(path, "curves.csv")):
        return read_table(os.path.join(path, "curves.csv"), required)
    if not (seeds := _seed_dirs(path)):
        raise SchemaError(f"no curves.csv under {path}")
    frames = [read_table(os.path.join(seed, "curves.csv"), required) for seed in seeds]  # noqa:E501
    merged = pd.concat(frames, ignore_index=True)
    return merged.groupby("env_steps", as_index=False)[list(metrics)].mean()


def discover_runs(paths: Sequence[str], metrics: Sequence[str] = METRICS) -> Dict[str, pd.DataFrame]:  # noqa:E501
    """Map run names to curves; a suite directory expands to its runs."""
    runs: Dict[str, pd.DataFrame] = {}
    for path in paths:
        path = os.path.normpath(path)
        if not os.path.isdir(path):
            raise SchemaError(f"run directory {path} not found")
        if os.path.isfile(os.path.join(path, "curves.csv")) or _seed_dirs(path):  # noqa:E501
            runs[os.path.basename(path)] = load_curves(path, metrics)
            continue
        children = sorted(name for name in os.listdir(path) if os.path.isdir(os.path.join(path, name)) and _seed_dirs(os.path.join(path, name)))  # noqa:E501
        if not children:
            raise SchemaError(f"no curves.csv under {path}")
        for name in children:
            runs[name] = load_curves(os.path.join(path, name), metrics)
    return runs


def curve_figure(curves: Dict[str, pd.DataFrame], metric: str):
    """One chart of ``metric`` against env steps, a line per run."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0), constrained_layout=True)
    right = 0.0
    for name, frame in curves.items():
        if metric not in frame.columns:
            plt.close(fig)
            raise SchemaError(f"run {name} has no column {metric!r}")
        points = frame[["env_steps", metric]].dropna()
        ax.plot(points["env_steps"].to_numpy(), points[metric].to_numpy(), marker="o", markersize=3, label=name)  # noqa:E501
        right = max(right, float(frame["env_steps"].max()))
    ax.set_xlim(0, right if right > 0 else 1)
    if metric in LABELS:
        ax.set_ylim(0.0, 1.0)
    ax.set_xlabel("Environment steps")
    ax.set_ylabel(LABELS.get(metric, metric))
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    return fig


def emit_plots(run_dirs: Sequence[str], out_dir: str, metrics: Sequence[str] = METRICS,  # noqa:E501
               fmt: str = "png") -> List[str]:
    """Write ``<metric>.<fmt>`` per metric; same inputs, same bytes."""
    if fmt not in ("png", "svg"):
        raise SchemaError(f"unsupported image format {fmt!r}")
    curves = discover_runs(run_dirs, metrics)
    os.makedirs(out_dir, exist_ok=True)
    paths: List[str] = []
    for metric in metrics:
        fig = curve_figure(curves, metric)
        path = os.path.join(out_dir, f"{metric}.{fmt}")
        metadata = {"Software": None} if fmt == "png" else {"Date": None, "Creator": None}  # noqa:E501
        fig.savefig(path, format=fmt, dpi=100, metadata=metadata)
        plt.close(fig)
        paths.append(path)
    return paths

# coding:utf-8

from dataclasses import dataclass
from dataclasses import field
import os
from typing import Any
from typing import Dict
from typing import List
from typing import Optional
from typing import Tuple

from loguru import logger
import pandas as pd

from gridflare.config import write_json
from gridflare.errors import ConfigError
from gridflare.policy.config import PolicyConfig
from gridflare.rl.config import TrainConfig
from gridflare.rl.trainer import finetune
from gridflare.tables import markdown_table
from gridflare.tables import write_table

COMPARISON_COLUMNS = ("run", "seed", "final_eval_sr", "final_eval_sel", "mean_ep_len", "mean_collisions")  # noqa:E501
BASELINE = "flare"


@dataclass(frozen=True)
class RunSpec:
    """A named run: its baseline plus the one knob it turns."""
    name: str
    baseline: Optional[str] = None
    changes: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentSuite:
    name: str
    runs: Tuple[RunSpec, ...]
    seeds: Tuple[int, ...] = (0, 1, 2)

    def named(self, name: str) -> RunSpec:
        for run in self.runs:
            if run.name == name:
                return run
        raise ConfigError(f"suite {self.name} has no run {name!r}")

    def config(self, name: str, base: Optional[TrainConfig] = None) -> TrainConfig:  # noqa:E501
        """Resolved config of a run, its baselines' changes applied first."""
        run = self.named(name)
        parent = self.config(run.baseline, base) if run.baseline else (base or TrainConfig())  # noqa:E501
        return parent.replace(**run.changes) if run.changes else parent

    def check(self, base: Optional[TrainConfig] = None) -> None:
        """Every run differs from its baseline in exactly one config key."""
        for run in self.runs:
            if run.baseline is None:
                continue
            ours = self.config(run.name, base).to_dict()
            theirs = self.config(run.baseline, base).to_dict()
            changed = sorted(key for key in ours if ours[key] != theirs[key])
            if len(changed) != 1:
                raise ConfigError(f"{self.name}/{run.name} differs from {run.baseline} in {changed or 'nothing'}")  # noqa:E501


SUITES: Dict[str, ExperimentSuite] = {
    "ablations": ExperimentSuite("ablations", (
        RunSpec(BASELINE),
        RunSpec("lr_x10", BASELINE, {"lr": 2e-4}),
        RunSpec("shared_ac", BASELINE, {"shared_ac": True}),
        RunSpec("eb_02", BASELINE, {"entropy_weight": 0.2}),
        RunSpec("sac", BASELINE, {"algo": "sac"}),
    )),
    "adaptation": ExperimentSuite("adaptation", (
        RunSpec(BASELINE),
        RunSpec("step_pen", BASELINE, {"step_penalty": True}),
        RunSpec("coll_pen", BASELINE, {"collision_penalty": True}),
        RunSpec("flare_objectnav", BASELINE, {"task": "objectnav"}),
        # embodiment B cannot pick anything up, so it is measured on ObjectNav
        RunSpec("embodiment_b", "flare_objectnav", {"embodiment": "b"}),
        RunSpec("embodiment_b_scratch", "embodiment_b", {"init": "scratch"}),
    )),
    "novel": ExperimentSuite("novel", (
        RunSpec(BASELINE),
        RunSpec("objnavafford", BASELINE, {"task": "objnavafford"}),
        RunSpec("objnavrelattr", BASELINE, {"task": "objnavrelattr"}),
        RunSpec("roomnav", BASELINE, {"task": "roomnav"}),
        # RL from a random initialization on the same tasks
        RunSpec("objnavafford_scratch", "objnavafford", {"init": "scratch"}),
        RunSpec("objnavrelattr_scratch", "objnavrelattr", {"init": "scratch"}),  # noqa:E501
        RunSpec("roomnav_scratch", "roomnav", {"init": "scratch"}),
    )),
}


def get_suite(name: str) -> ExperimentSuite:
    if name not in SUITES:
        raise ConfigError(f"unknown suite {name!r}, expected one of {', '.join(SUITES)}")  # noqa:E501
    return SUITES[name]


def _row(run: str, seed: int, report=None) -> Dict[str, Any]:
    nan = float("nan")
    if report is None:
        return {"run": run, "seed": seed, "final_eval_sr": nan, "final_eval_sel": nan,  # noqa:E501
                "mean_ep_len": nan, "mean_collisions": nan}
    return {"run": run, "seed": seed, "final_eval_sr": report.success_rate, "final_eval_sel": report.sel,  # noqa:E501
            "mean_ep_len": report.mean_length, "mean_collisions": report.mean_collisions}  # noqa:E501


def summarize(frame: pd.DataFrame) -> pd.DataFrame:
    """Mean with min and max across seeds, one line per run, in run order."""
    order = list(dict.fromkeys(frame["run"]))
    grouped = frame.groupby("run", sort=False)
    summary = pd.DataFrame({"run": order})
    for column in ("final_eval_sr", "final_eval_sel", "mean_ep_len", "mean_collisions"):  # noqa:E501
        stats = grouped[column].agg(["mean", "min", "max"]).reindex(order)
        for stat in ("mean", "min", "max"):
            summary[f"{column}_{stat}"] = stats[stat].to_numpy()
    return summary


def run_suite(suite, checkpoint, out_dir: str, base: Optional[TrainConfig] = None,  # noqa:E501
              seeds: Optional[Tuple[int, ...]] = None,
              policy_config: Optional[PolicyConfig] = None) -> pd.DataFrame:
    """Run every named config of a suite for every seed, sequentially.

    Each run lands in ``<out_dir>/<run>/seed_<n>``. A failing run is logged
    and leaves a row of NaNs; the suite carries on.
    """
    suite = get_suite(suite) if isinstance(suite, str) else suite
    suite.check(base)
    seeds = tuple(seeds if seeds is not None else suite.seeds)
    os.makedirs(out_dir, exist_ok=True)
    rows: List[Dict[str, Any]] = []
    failures: List[Dict[str, Any]] = []
    for run in suite.runs:
        for seed in seeds:
            config = suite.config(run.name, base).replace(seed=seed)
            run_dir = os.path.join(out_dir, run.name, f"seed_{seed}")
            logger.info("suite {}: run {} seed {} ({})", suite.name, run.name, seed, ",".join(config.variant()))  # noqa:E501
            try:
                result = finetune(checkpoint, config=config, out_dir=run_dir, policy_config=policy_config)  # noqa:E501
            except Exception as error:  # pylint: disable=broad-except
                logger.opt(exception=error).error("suite {}: run {} seed {} failed: {}", suite.name, run.name, seed, error)  # noqa:E501
                failures.append({"run": run.name, "seed": seed, "error": f"{type(error).__name__}: {error}"})  # noqa:E501
                rows.append(_row(run.name, seed))
                continue
            rows.append(_row(run.name, seed, result.final_report))
            logger.info("suite {}: run {} seed {} final SR {:.3f}", suite.name, run.name, seed, result.final_report.success_rate)  # noqa:E501
    frame = pd.DataFrame(rows, columns=list(COMPARISON_COLUMNS))
    write_table(os.path.join(out_dir, "comparison.csv"), frame)
    with open(os.path.join(out_dir, "comparison.md"), "w", encoding="utf-8") as whdl:  # noqa:E501
        whdl.write(f"# {suite.name}\n\n")
        whdl.write(markdown_table(summarize(frame)))
    if failures:
        write_json(os.path.join(out_dir, "failures.json"), {"failures": failures})  # noqa:E501
    return frame

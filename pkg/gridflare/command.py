# coding:utf-8

from dataclasses import dataclass
from dataclasses import field
from datetime import datetime
from datetime import timezone
import functools
import os
import sys
from typing import Any
from typing import Callable
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence

from loguru import logger
from xkits_command import ArgParser
from xkits_command import Command
from xkits_command import CommandArgument
from xkits_command import CommandExecutor

from gridflare.attribute import __description__
from gridflare.attribute import __project__
from gridflare.attribute import __urlhome__
from gridflare.attribute import __version__
from gridflare.config import load_yaml
from gridflare.config import overlay
from gridflare.config import section
from gridflare.config import write_json
from gridflare.errors import ConfigError
from gridflare.evaluate.plots import emit_plots
from gridflare.evaluate.report import checkpoint_id
from gridflare.evaluate.report import evaluate
from gridflare.evaluate.suite import get_suite
from gridflare.evaluate.suite import run_suite
from gridflare.house.env import EnvConfig
from gridflare.house.tasks import TaskKind
from gridflare.house.tasks import parse_task
from gridflare.imitation.bc import train_bc
from gridflare.imitation.config import BCConfig
from gridflare.imitation.demos import DemoDataset
from gridflare.imitation.demos import generate_demos
from gridflare.policy.config import PRESETS
from gridflare.policy.config import preset
from gridflare.rl.config import TrainConfig
from gridflare.rl.trainer import finetune

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

TASK_NAMES = ", ".join(kind.value for kind in TaskKind)


@dataclass
class RunManifest:
    """What a command was asked to do, written before it starts."""
    command: str
    config: Dict[str, Any]
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    variant: List[str] = field(default_factory=list)
    version: str = __version__
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))  # noqa:E501

    def write(self, out_dir: str) -> str:
        path = os.path.join(out_dir, "manifest.json")
        write_json(path, {"command": self.command, "config": self.config, "inputs": self.inputs,  # noqa:E501
                          "outputs": self.outputs, "variant": self.variant,
                          "version": self.version, "timestamp": self.timestamp})  # noqa:E501
        return path


def _input_file(path: str, what: str) -> str:
    if not os.path.isfile(path):
        raise ConfigError(f"{what} {path} not found")
    return path


def _split(value: Optional[str]) -> Optional[List[str]]:
    if value is None:
        return None
    return [item.strip() for item in value.split(",") if item.strip()]


def _run_logged(name: str, out_dir: Optional[str], body: Callable[[], Any]) -> int:  # noqa:E501
    """Run one command body with a ``run.log`` sink and the exit-code map."""
    sink = None
    try:
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            sink = logger.add(os.path.join(out_dir, "run.log"), level="DEBUG", encoding="utf-8")  # noqa:E501
        body()
    except ConfigError as error:
        logger.error("{}: {}", name, error)
        return EXIT_CONFIG
    except Exception as error:  # pylint: disable=broad-except
        logger.opt(exception=error).error("{} failed: {}", name, error)
        return EXIT_RUNTIME
    finally:
        if sink is not None:
            logger.remove(sink)
    return EXIT_OK


def guarded(name: str):
    def decorator(run: Callable[[Command], int]) -> Callable[[Command], int]:
        @functools.wraps(run)
        def wrapper(cmds: Command) -> int:
            out_dir = getattr(cmds.args, "out", None)
            return _run_logged(name, out_dir, lambda: run(cmds))
        return wrapper
    return decorator


def _config_arg(_arg: ArgParser):
    _arg.add_argument("--config", type=str, default=None, metavar="YAML",
                      help="config file; its values sit between the defaults and the flags")  # noqa:E501


@CommandArgument("gen-demos", help="generate planner demonstrations on training houses")  # noqa:E501
def add_cmd_gen_demos(_arg: ArgParser):
    _arg.add_argument("--tasks", type=str, default="objectnav,pickup,fetch,roomvisit",  # noqa:E501
                      help="comma-separated base tasks")
    _arg.add_argument("--n", type=int, default=10, help="episodes per task")
    _arg.add_argument("--seed", type=int, default=0)
    _arg.add_argument("--workers", type=int, default=1, help="process pool width")  # noqa:E501
    _arg.add_argument("--out", type=str, required=True)


@CommandExecutor(add_cmd_gen_demos)
@guarded("gen-demos")
def run_cmd_gen_demos(cmds: Command) -> int:
    args = cmds.args
    tasks = [parse_task(task).value for task in _split(args.tasks) or []]
    if not tasks:
        raise ConfigError(f"no tasks given, valid tasks: {TASK_NAMES}")
    config = {"tasks": tasks, "episodes_per_task": args.n, "seed": args.seed, "workers": args.workers}  # noqa:E501
    RunManifest("gen-demos", config, outputs=[args.out]).write(args.out)
    dataset = generate_demos(tasks, args.n, args.seed, args.workers)
    dataset.save(args.out)
    logger.info("wrote {} demonstrations ({} steps) to {}", len(dataset), dataset.steps, args.out)  # noqa:E501
    return EXIT_OK


@CommandArgument("train-bc", help="behavior cloning on a demonstration dataset")  # noqa:E501
def add_cmd_train_bc(_arg: ArgParser):
    _arg.add_argument("--data", type=str, required=True, help="dataset directory")  # noqa:E501
    _arg.add_argument("--preset", type=str, default="desk", choices=sorted(PRESETS),  # noqa:E501
                      help="policy size: desk (128 wide) or paper (512 wide, 3+3 layers, 8 heads)")  # noqa:E501
    _arg.add_argument("--epochs", type=int, default=None)
    _arg.add_argument("--batch", type=int, default=None, dest="batch_size")
    _arg.add_argument("--lr", type=float, default=None)
    _arg.add_argument("--chunk", type=int, default=None)
    _arg.add_argument("--seed", type=int, default=None)
    _config_arg(_arg)
    _arg.add_argument("--out", type=str, required=True)


@CommandExecutor(add_cmd_train_bc)
@guarded("train-bc")
def run_cmd_train_bc(cmds: Command) -> int:
    args = cmds.args
    file = load_yaml(args.config)
    bc = BCConfig.from_dict(overlay(section(file, "bc"), {
        "epochs": args.epochs, "batch_size": args.batch_size, "lr": args.lr,
        "chunk": args.chunk, "seed": args.seed}))
    policy = preset(args.preset, **section(file, "policy"))
    dataset = DemoDataset.load(args.data)
    RunManifest("train-bc", {"bc": bc.to_dict(), "policy": policy.to_dict(), "data": args.data},  # noqa:E501
                outputs=[os.path.join(args.out, name) for name in ("ckpt_best.flrb", "ckpt_last.flrb", "bc_log.csv")]).write(args.out)  # noqa:E501
    result = train_bc(dataset, bc, policy, args.out)
    logger.info("behavior cloning done after {} steps, best eval SR {:.3f}", result.steps, result.best_sr)  # noqa:E501
    return EXIT_OK


@CommandArgument("finetune", help="sparse-reward RL fine-tuning of a checkpoint")  # noqa:E501
def add_cmd_finetune(_arg: ArgParser):
    _arg.add_argument("--ckpt", type=str, default=None, help="pretrained checkpoint")  # noqa:E501
    _arg.add_argument("--task", type=str, default=None, help=f"one of {TASK_NAMES}")  # noqa:E501
    _arg.add_argument("--steps", type=int, default=None, dest="total_steps", help="total env steps")  # noqa:E501
    _arg.add_argument("--lr", type=float, default=None, help="learning rate (fine-tuning default 2e-5)")  # noqa:E501
    _arg.add_argument("--entropy", type=float, default=None, dest="entropy_weight", help="entropy bonus weight (default 0)")  # noqa:E501
    _arg.add_argument("--shared-ac", action="store_true", default=None, help="one trunk for actor and critic")  # noqa:E501
    _arg.add_argument("--algo", type=str, default=None, choices=["ppo", "sac"])
    _arg.add_argument("--step-penalty", action="store_true", default=None, help="-0.01 per step")  # noqa:E501
    _arg.add_argument("--collision-penalty", action="store_true", default=None, help="-0.5 per collision")  # noqa:E501
    _arg.add_argument("--embodiment", type=str, default=None, choices=["a", "b"])  # noqa:E501
    _arg.add_argument("--scratch", action="store_true", default=None, help="RL from a random initialization")  # noqa:E501
    _arg.add_argument("--context", type=str, default=None, choices=["window", "full"])  # noqa:E501
    _arg.add_argument("--workers", type=int, default=None, help="environment pool width (default 32)")  # noqa:E501
    _arg.add_argument("--eval-episodes", type=int, default=None)
    _arg.add_argument("--eval-every", type=int, default=None)
    _arg.add_argument("--seed", type=int, default=None)
    _config_arg(_arg)
    _arg.add_argument("--out", type=str, required=True)


def train_config(args, file: Dict[str, Any]) -> TrainConfig:
    """Defaults, then the ``train`` section of the file, then the flags."""
    flags = {name: getattr(args, name, None) for name in (
        "task", "total_steps", "lr", "entropy_weight", "shared_ac", "algo", "step_penalty",  # noqa:E501
        "collision_penalty", "embodiment", "context", "workers", "eval_episodes", "eval_every", "seed")}  # noqa:E501
    if getattr(args, "scratch", None):
        flags["init"] = "scratch"
    return TrainConfig.from_dict(overlay(section(file, "train"), flags))


@CommandExecutor(add_cmd_finetune)
@guarded("finetune")
def run_cmd_finetune(cmds: Command) -> int:
    args = cmds.args
    config = train_config(args, load_yaml(args.config))
    inputs = {}
    if args.ckpt is not None:
        inputs[args.ckpt] = checkpoint_id(_input_file(args.ckpt, "checkpoint"))
    elif config.init == "finetune":
        raise ConfigError("finetune needs --ckpt unless --scratch is given")
    RunManifest("finetune", config.to_dict(), inputs=inputs, variant=config.variant(),  # noqa:E501
                outputs=[os.path.join(args.out, name) for name in ("config.json", "curves.csv", "ckpt_best.flrb", "ckpt_last.flrb")]).write(args.out)  # noqa:E501
    result = finetune(args.ckpt, config=config, out_dir=args.out)
    logger.info("fine-tuning done: {} updates, final eval SR {:.3f}, best {:.3f}",  # noqa:E501
                result.updates, result.final_report.success_rate, result.best_sr)  # noqa:E501
    return EXIT_OK


@CommandArgument("eval", help="greedy evaluation on unseen houses")
def add_cmd_eval(_arg: ArgParser):
    _arg.add_argument("--ckpt", type=str, required=True)
    _arg.add_argument("--task", type=str, required=True, help=f"one of {TASK_NAMES}")  # noqa:E501
    _arg.add_argument("--episodes", type=int, default=200)
    _arg.add_argument("--embodiment", type=str, default="a", choices=["a", "b"])  # noqa:E501
    _arg.add_argument("--sample", action="store_true", help="sample actions instead of argmax")  # noqa:E501
    _arg.add_argument("--seed", type=int, default=0)
    _arg.add_argument("--out", type=str, required=True)


@CommandExecutor(add_cmd_eval)
@guarded("eval")
def run_cmd_eval(cmds: Command) -> int:
    args = cmds.args
    task = parse_task(args.task).value
    if args.episodes < 1:
        raise ConfigError(f"episodes must be positive, got {args.episodes}")
    config = {"task": task, "episodes": args.episodes, "embodiment": args.embodiment,  # noqa:E501
              "greedy": not args.sample, "seed": args.seed}
    ident = checkpoint_id(_input_file(args.ckpt, "checkpoint"))
    RunManifest("eval", config, inputs={args.ckpt: ident},
                outputs=[os.path.join(args.out, name) for name in ("eval.json", "eval.csv")]).write(args.out)  # noqa:E501
    report = evaluate(args.ckpt, task, args.episodes, greedy=not args.sample,
                      config=EnvConfig(embodiment=args.embodiment), seed=args.seed)  # noqa:E501
    report.write(args.out)
    return EXIT_OK


@CommandArgument("suite", help="run an ablation, adaptation or novel-task suite")  # noqa:E501
def add_cmd_suite(_arg: ArgParser):
    _arg.add_argument("--name", type=str, required=True, choices=["ablations", "adaptation", "novel"])  # noqa:E501
    _arg.add_argument("--ckpt", type=str, required=True)
    _arg.add_argument("--seeds", type=str, default=None, help="comma-separated seeds (default 0,1,2)")  # noqa:E501
    _arg.add_argument("--steps", type=int, default=None, dest="total_steps")
    _arg.add_argument("--workers", type=int, default=None)
    _arg.add_argument("--eval-episodes", type=int, default=None)
    _arg.add_argument("--eval-every", type=int, default=None)
    _config_arg(_arg)
    _arg.add_argument("--out", type=str, required=True)


@CommandExecutor(add_cmd_suite)
@guarded("suite")
def run_cmd_suite(cmds: Command) -> int:
    args = cmds.args
    suite = get_suite(args.name)
    base = train_config(args, load_yaml(args.config))
    try:
        seeds = tuple(int(seed) for seed in _split(args.seeds)) if args.seeds else suite.seeds  # type: ignore[union-attr]  # noqa:E501
    except ValueError as error:
        raise ConfigError(f"seeds must be integers, got {args.seeds!r}") from error  # noqa:E501
    suite.check(base)
    runs = {run.name: suite.config(run.name, base).to_dict() for run in suite.runs}  # noqa:E501
    RunManifest("suite", {"suite": suite.name, "seeds": list(seeds), "runs": runs},  # noqa:E501
                inputs={args.ckpt: checkpoint_id(_input_file(args.ckpt, "checkpoint"))},  # noqa:E501
                outputs=[os.path.join(args.out, name) for name in ("comparison.csv", "comparison.md")],  # noqa:E501
                variant=[run.name for run in suite.runs]).write(args.out)
    run_suite(suite, args.ckpt, args.out, base, seeds)
    return EXIT_OK


@CommandArgument("plot", help="learning curves of finished runs")
def add_cmd_plot(_arg: ArgParser):
    _arg.add_argument("--runs", type=str, nargs="+", required=True, help="run, seed-group or suite directories")  # noqa:E501
    _arg.add_argument("--metrics", type=str, default="eval_sr,eval_sel")
    _arg.add_argument("--format", type=str, default="png", choices=["png", "svg"])  # noqa:E501
    _arg.add_argument("--out", type=str, required=True)


@CommandExecutor(add_cmd_plot)
@guarded("plot")
def run_cmd_plot(cmds: Command) -> int:
    args = cmds.args
    metrics = _split(args.metrics) or []
    if not metrics:
        raise ConfigError("no metrics given")
    RunManifest("plot", {"runs": list(args.runs), "metrics": metrics, "format": args.format},  # noqa:E501
                outputs=[os.path.join(args.out, f"{metric}.{args.format}") for metric in metrics]).write(args.out)  # noqa:E501
    for path in emit_plots(args.runs, args.out, metrics, args.format):
        logger.info("wrote {}", path)
    return EXIT_OK


@CommandArgument(__project__, description=__description__)
def add_cmd(_arg: ArgParser):
    _arg.add_argument("--verbose", action="store_true", help="debug output on stderr")  # noqa:E501


@CommandExecutor(add_cmd, add_cmd_gen_demos, add_cmd_train_bc, add_cmd_finetune,  # noqa:E501
                 add_cmd_eval, add_cmd_suite, add_cmd_plot)
def run_cmd(cmds: Command) -> int:
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if getattr(cmds.args, "verbose", False) else "INFO")  # noqa:E501
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    cmds = Command()
    cmds.version = __version__
    return cmds.run(root=add_cmd, argv=argv, epilog=f"For more, please visit {__urlhome__}.")  # noqa:E501

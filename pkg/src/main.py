"""
diplomat - multi-agent negotiation arena

Subcommands: train, evaluate, simulate, oracle, ablate, scale.
Exit codes: 0 success, 1 other failure, 2 configuration or usage error,
3 numeric fault, 4 oracle refused.
"""
import argparse
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

# Add project root to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import structlog
from dotenv import load_dotenv

from src.arena.domain import utility, welfare_optimal_deal
from src.arena.env import EnvConfig, NegotiationEnv, run_episode
from src.arena.scenario_io import load_scenario
from src.arena.transcript import write_transcript
from src.baselines.registry import AgentFactory, AgentSpec, parse_agent_specs
from src.errors import (
    ConfigError, DiplomatError, NumericFaultError, OracleRefusedError, ScenarioError, UnknownFlagError,
)
from src.evaluation import telemetry
from src.evaluation.harness import evaluate
from src.evaluation.pareto import pareto_front
from src.evaluation.reports import write_report
from src.evaluation.sweeps import ablate, scalability_sweep
from src.logging_setup import configure_logging
from src.policy.params import HcnParams
from src.settings import Settings, load_settings
from src.training.trainer import STATE_FILE, Trainer

logger = structlog.get_logger()

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_ORACLE = 4
BASELINE_NAMES = ("random", "conceder", "alternating", "hcn", "all")


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    common.add_argument("--workers", type=int, default=None, help="worker processes; 1 is the reproducible mode")
    common.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="diplomat", description="Multi-agent negotiation arena")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    train = sub.add_parser("train", parents=[common], help="curriculum self-play training")
    train.add_argument("--config", type=Path, help="run config (JSON or YAML)")
    train.add_argument("--out", type=Path, help="run directory (DIPLOMAT_OUT overrides)")
    train.add_argument("--resume", action="store_true", help="continue the run found in the run directory")
    train.add_argument("--metrics-file", type=Path, help="write Prometheus text metrics after each iteration")

    ev = sub.add_parser("evaluate", parents=[common], help="evaluate a checkpoint and baselines")
    ev.add_argument("--config", type=Path, help="run config (JSON or YAML)")
    ev.add_argument("--checkpoint", type=Path, help="trained policy checkpoint")
    ev.add_argument("--baseline", choices=BASELINE_NAMES, help="entrant to evaluate in self-play, or all of them")
    ev.add_argument("--agents", help="explicit mixed line-up, e.g. conceder:2.0,random")
    ev.add_argument("--out", type=Path, help="output directory (DIPLOMAT_OUT overrides)")
    ev.add_argument("--deterministic", action="store_true", help="greedy HCN decisions")

    sim = sub.add_parser("simulate", parents=[common], help="play one episode and print its transcript")
    sim.add_argument("--scenario", type=Path, required=True, help="scenario JSON file")
    sim.add_argument("--agents", required=True, help="line-up, e.g. conceder:2.0,conceder:2.0")
    sim.add_argument("--open-protocol", action="store_true", help="allow every message tag in every phase")

    oracle = sub.add_parser("oracle", parents=[common], help="enumerate a scenario's deal space")
    oracle.add_argument("--scenario", type=Path, required=True, help="scenario JSON file")
    oracle.add_argument("--max-members", type=int, default=20, help="Pareto members to print")

    abl = sub.add_parser("ablate", parents=[common], help="train and evaluate ablation variants")
    abl.add_argument("--config", type=Path, help="run config (JSON or YAML)")
    abl.add_argument("--flags", help="comma list of no-hierarchy, no-attention, no-shaping, no-pnp")
    abl.add_argument("--out", type=Path, help="sweep root directory")

    scale = sub.add_parser("scale", parents=[common], help="train and evaluate per agent count")
    scale.add_argument("--config", type=Path, help="run config (JSON or YAML)")
    scale.add_argument("--agent-counts", help="comma list of agent counts, e.g. 2,4,8")
    scale.add_argument("--out", type=Path, help="sweep root directory")
    return parser


def _settings(args: argparse.Namespace) -> Settings:
    settings = load_settings(getattr(args, 'config', None))
    if args.seed is not None:
        settings.seed = args.seed
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1", field="workers")
        settings.training.workers = args.workers
    if not args.verbose:
        configure_logging(settings.logging.level)
    return settings


def _out_dir(args: argparse.Namespace, default: Path) -> Path:
    env_out = os.getenv("DIPLOMAT_OUT")
    if env_out:
        return Path(env_out)
    return args.out if getattr(args, 'out', None) else default


# ---------- subcommands ----------

def cmd_train(args: argparse.Namespace) -> int:
    settings = _settings(args)
    run_dir = _out_dir(args, Path(settings.output_dir) / "train")
    trainer = Trainer.from_settings(settings, run_dir, metrics_file=args.metrics_file)
    if args.resume:
        trainer.resume()
    elif (run_dir / STATE_FILE).exists():
        raise ConfigError(f"{run_dir} already holds a run; pass --resume or choose another --out", field="out")
    result = trainer.run()
    print(f"policy: {result.policy_path}")
    print(f"iterations: {result.iterations}  steps: {result.total_steps}  stage: {result.final_stage}")
    return EXIT_OK


def _entrants(args: argparse.Namespace, settings: Settings) -> List[Sequence[AgentSpec]]:
    if args.agents:
        return [parse_agent_specs(args.agents)]
    name = args.baseline or settings.evaluation.baseline
    if name is None:
        return [parse_agent_specs(settings.evaluation.agents)]
    if name not in BASELINE_NAMES:
        raise ConfigError(f"Unknown baseline '{name}'", field="evaluation.baseline")
    conceders = [[AgentSpec("conceder", repr(float(b)))] for b in settings.baselines.betas]
    table = {
        'random': [[AgentSpec("random")]],
        'conceder': conceders,
        'alternating': [[AgentSpec("alternating")]],
        'hcn': [[AgentSpec("hcn")]],
    }
    if name == "all":
        return [entrant for key in ('random', 'conceder', 'alternating', 'hcn') for entrant in table[key]]
    return table[name]


def cmd_evaluate(args: argparse.Namespace) -> int:
    settings = _settings(args)
    stages = settings.curriculum.build().stages
    if not 1 <= settings.evaluation.stage <= len(stages):
        raise ConfigError(f"stage {settings.evaluation.stage} outside 1..{len(stages)}", field="evaluation.stage")
    stage = stages[settings.evaluation.stage - 1]
    seeds = (args.seed,) if args.seed is not None else settings.evaluation.seeds

    params = None
    if args.checkpoint is not None:
        params, _ = HcnParams.load(args.checkpoint)
    factory = AgentFactory(deterministic=args.deterministic, params=params)
    entrants = _entrants(args, settings)
    if params is None and any(s.kind == "hcn" and s.argument is None for e in entrants for s in e):
        raise ConfigError("hcn entrant needs --checkpoint", field="checkpoint")

    out_dir = _out_dir(args, Path(settings.output_dir) / "evaluation")
    for specs in entrants:
        label = ",".join(str(s) for s in specs)
        summary, records = evaluate(factory, specs, stage.scenario, settings.evaluation.episodes, seeds,
                                    env_config=EnvConfig(reward_weights=settings.rewards.weights,
                                                         shaping=settings.rewards.shaping,
                                                         beliefs=settings.rewards.beliefs),
                                    objective=settings.objective, label=label,
                                    workers=settings.training.workers)
        name = "evaluation" if len(entrants) == 1 else "evaluation_" + label.replace(":", "-").replace(",", "_")
        write_report(summary, records, out_dir, name=name)
        pareto = "n/a" if summary.pareto_rate is None else f"{summary.pareto_rate:.3f}"
        print(f"{label:<24} consensus={summary.consensus_rate:.3f} rounds={summary.mean_rounds:.2f} "
              f"welfare={summary.social_welfare:.3f} gini={summary.gini:.3f} pareto={pareto} J={summary.mean_J:.3f}")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    seed = args.seed if args.seed is not None else scenario.seed
    specs = parse_agent_specs(args.agents)
    agents = AgentFactory().lineup(specs, scenario.num_agents, seed)
    env = NegotiationEnv(EnvConfig(open_protocol=args.open_protocol))
    result = run_episode(env, scenario, agents, seed)
    write_transcript(result.state, sys.stdout, seed=seed)
    logger.info("Simulation finished", outcome=type(result.outcome).__name__, rounds=result.rounds,
                illegal_actions=result.illegal_actions)
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    print(f"{scenario.deal_count} deals")
    best = welfare_optimal_deal(scenario)
    utilities = [utility(p, best) for p in scenario.profiles]
    print(f"welfare-optimal deal: {list(best)} utilities: {[round(u, 6) for u in utilities]} "
          f"welfare: {sum(utilities):.6f}")
    front = pareto_front(scenario)
    print(f"pareto front: {len(front)} deals")
    for deal, row in list(zip(front.deals, front.utilities))[:max(0, args.max_members)]:
        print(f"  {list(deal)} {[round(float(u), 6) for u in row]}")
    if len(front) > args.max_members:
        print(f"  ... {len(front) - args.max_members} more")
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    settings = _settings(args)
    flags = args.flags.split(",") if args.flags else None
    run_root = _out_dir(args, Path(settings.output_dir) / "ablation")
    summaries = ablate(settings, flags, run_root, workers=settings.training.workers)
    for name, summary in summaries.items():
        delta = summary.extra.get('consensus_delta')
        suffix = "" if delta is None else f" delta={delta:+.3f}"
        print(f"{name:<14} consensus={summary.consensus_rate:.3f} welfare={summary.social_welfare:.3f} "
              f"rounds={summary.mean_rounds:.2f}{suffix}")
    return EXIT_OK


def cmd_scale(args: argparse.Namespace) -> int:
    settings = _settings(args)
    counts = None
    if args.agent_counts:
        try:
            counts = [int(n) for n in args.agent_counts.split(",") if n.strip()]
        except ValueError:
            raise ConfigError(f"agent counts must be integers, got '{args.agent_counts}'",
                              field="agent-counts") from None
    run_root = _out_dir(args, Path(settings.output_dir) / "scalability")
    summaries = scalability_sweep(settings, counts, run_root, workers=settings.training.workers)
    for n, summary in summaries.items():
        print(f"N={n:<3} consensus={summary.consensus_rate:.3f} welfare={summary.social_welfare:.3f} "
              f"rounds={summary.mean_rounds:.2f} gini={summary.gini:.3f}")
    return EXIT_OK


COMMANDS = {
    'train': cmd_train,
    'evaluate': cmd_evaluate,
    'simulate': cmd_simulate,
    'oracle': cmd_oracle,
    'ablate': cmd_ablate,
    'scale': cmd_scale,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse argv, run one subcommand and map failures onto exit codes"""
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    configure_logging("DEBUG" if args.verbose else None)

    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ScenarioError, UnknownFlagError) as e:
        logger.error("Configuration error", command=args.command, error=str(e),
                     field=getattr(e, "field", None), line=getattr(e, "line", None))
        print(f"diplomat: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFaultError as e:
        telemetry.NUMERIC_FAULTS.inc()
        logger.error("Numeric fault", command=args.command, op=e.op)
        print(f"diplomat: numeric fault: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except OracleRefusedError as e:
        logger.error("Oracle refused", cardinality=e.cardinality, limit=e.limit)
        print(f"diplomat: oracle refused: {e}", file=sys.stderr)
        return EXIT_ORACLE
    except (DiplomatError, OSError) as e:
        logger.error("Command failed", command=args.command, error=str(e))
        print(f"diplomat: {e}", file=sys.stderr)
        return EXIT_FAILURE


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()

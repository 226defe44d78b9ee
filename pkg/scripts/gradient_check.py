"""
Finite-difference gradient check of every numerics op and of the full HCN
forward pass, over several seeds.

Usage: python scripts/gradient_check.py [--seeds 5]
Exit status 1 when any error exceeds its tolerance.
"""
import argparse
import sys
import time
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import structlog
from dotenv import load_dotenv

from src.arena.domain import GeneratorConfig, random_scenario
from src.arena.env import NegotiationEnv
from src.baselines.random_agent import RandomAgent
from src.logging_setup import configure_logging
from src.numerics import tensor as T
from src.numerics.gradcheck import OP_TOLERANCE, check_gradients, op_battery
from src.policy.features import build_policy_input
from src.policy.hcn import forward
from src.policy.params import HcnParams, PolicyShape

logger = structlog.get_logger()

SMALL_SHAPE = PolicyShape(d=4, heads=2, d_m=4, max_agents=3, max_issues=2, max_values=3, history=3)


def hcn_errors(seed: int, shape: PolicyShape = SMALL_SHAPE, warmup_rounds: int = 3):
    """Relative gradient error per parameter of a scalar built from every HCN head"""
    scenario = random_scenario(GeneratorConfig(agents=(3, 3), issues=(2, 2), values=(3, 3)), seed)
    env = NegotiationEnv()
    observations = env.reset(scenario, seed)
    agents = [RandomAgent(np.random.default_rng([seed, i])) for i in range(scenario.num_agents)]
    for i, agent in enumerate(agents):
        agent.reset(scenario, i)
    for _ in range(warmup_rounds):
        if env.done:
            break
        observations = env.step([a.act(observations[i], env) for i, a in enumerate(agents)]).observations

    inputs = build_policy_input(observations[0], shape)
    params = HcnParams.initialize(shape, seed=seed)
    legal = np.where(inputs.move_mask, np.linspace(0.5, 1.5, inputs.move_mask.size), 0.0).reshape(1, -1)

    def objective():
        out = forward(inputs, params)
        parts = [
            T.sum(T.mul(out.move_log_probs, T.Tensor(legal))),
            T.sum(out.value_log_probs[0]),
            T.sum(T.mul(out.issue_log_probs, T.Tensor(inputs.issue_mask.astype(float).reshape(1, -1)))),
            T.sum(out.conc_mean), T.sum(out.conc_log_std), T.sum(out.value),
            T.sum(T.mul(out.stance, T.Tensor(np.array([[0.3, -0.2, 0.7]])))),
            T.sum(T.mul(out.coalition, T.Tensor(np.linspace(-1.0, 1.0, out.coalition.shape[1]).reshape(1, -1)))),
        ]
        total = parts[0]
        for part in parts[1:]:
            total = T.add(total, part)
        return total

    return check_gradients(objective, list(params))


def main() -> int:
    parser = argparse.ArgumentParser(description="Finite-difference gradient check")
    parser.add_argument("--seeds", type=int, default=5, help="number of seeds")
    args = parser.parse_args()

    load_dotenv()
    configure_logging()

    print("=" * 60)
    print("diplomat - gradient check")
    print("=" * 60)
    print()

    started = time.perf_counter()
    failures = 0
    for seed in range(args.seeds):
        for name, (error, tolerance) in sorted(op_battery(seed).items()):
            if error > tolerance:
                failures += 1
                print(f"  FAIL seed={seed} {name}: {error:.2e} > {tolerance:.0e}")
        errors = hcn_errors(seed)
        worst = max(errors, key=errors.get)
        status = "ok" if errors[worst] <= OP_TOLERANCE else "FAIL"
        if status == "FAIL":
            failures += sum(1 for e in errors.values() if e > OP_TOLERANCE)
        print(f"seed {seed}: ops checked, hcn worst {worst} {errors[worst]:.2e} [{status}]")

    elapsed = time.perf_counter() - started
    logger.info("Gradient check finished", seeds=args.seeds, failures=failures, seconds=round(elapsed, 1))
    print()
    print("=" * 60)
    print("All gradients match" if failures == 0 else f"{failures} gradient checks failed")
    print("=" * 60)
    return 0 if failures == 0 else 1


if __name__ == "__main__":
    sys.exit(main())

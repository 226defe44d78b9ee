"""
Exhaustive model check of the negotiation protocol on a small instance.

Every legal message sequence of a two-agent, single-issue scenario is
explored; the check fails when a sequence does not terminate, an illegal
message is accepted or a legal one refused, or two runs disagree on the
reachable-state count.

Usage: python scripts/model_check_protocol.py [--values 3] [--budgets 1,1,2,1,1]
"""
import argparse
import sys
import time
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

import structlog
from dotenv import load_dotenv

from src.arena.domain import Issue, PreferenceProfile, Scenario, make_grid
from src.arena.model_check import check_protocol
from src.logging_setup import configure_logging

logger = structlog.get_logger()


def small_scenario(num_values: int, budgets) -> Scenario:
    grid = make_grid(num_values)
    return Scenario(
        num_agents=2,
        issues=(Issue(id=0, num_values=num_values),),
        profiles=(
            PreferenceProfile(agent_id=0, weights=(1.0,), valuations=(grid,), reservation=0.0),
            PreferenceProfile(agent_id=1, weights=(1.0,), valuations=(tuple(reversed(grid)),), reservation=0.0),
        ),
        round_budgets=tuple(budgets),
    )


def main() -> int:
    parser = argparse.ArgumentParser(description="Protocol model check")
    parser.add_argument("--values", type=int, default=3, help="values on the single issue")
    parser.add_argument("--budgets", default="1,1,2,1,1", help="five per-phase round budgets")
    parser.add_argument("--buckets", type=int, default=3, help="reveal buckets")
    parser.add_argument("--open-protocol", action="store_true", help="every tag legal in every phase")
    args = parser.parse_args()

    load_dotenv()
    configure_logging()

    print("=" * 60)
    print("diplomat - protocol model check")
    print("=" * 60)
    print()

    try:
        budgets = [int(b) for b in args.budgets.split(",")]
        scenario = small_scenario(args.values, budgets)
    except ValueError as e:
        logger.error("Invalid model check instance", error=str(e))
        print(f"Invalid instance: {e}")
        return 2

    print(f"Instance: 2 agents, 1 issue x {args.values} values, budgets {budgets} (total {sum(budgets)})")
    print()

    started = time.perf_counter()
    first = check_protocol(scenario, num_buckets=args.buckets, open_protocol=args.open_protocol)
    second = check_protocol(scenario, num_buckets=args.buckets, open_protocol=args.open_protocol)
    elapsed = time.perf_counter() - started

    print(f"Reachable states:      {first.reachable_states}")
    print(f"Transitions:           {first.transitions}")
    print(f"Complete sequences:    {first.sequences}")
    print(f"  ending in agreement: {first.terminal_agreements}")
    print(f"  ending in failure:   {first.terminal_failures}")
    print(f"Non-terminating paths: {first.nonterminating_paths}")
    print(f"Illegal accepted:      {first.accepted_illegal}")
    print(f"Legal refused:         {first.rejected_legal}")
    print(f"Max depth:             {first.max_depth}")
    for violation in first.violations[:10]:
        print(f"  ! {violation}")

    stable = first.reachable_states == second.reachable_states and first.sequences == second.sequences
    passed = first.passed and stable
    logger.info("Model check script finished", passed=passed, stable=stable, seconds=round(elapsed, 2))

    print()
    print("=" * 60)
    if passed:
        print("Protocol model check passed")
    elif not stable:
        print("Reachable-state count differs between runs")
    else:
        print("Protocol model check FAILED")
    print("=" * 60)
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())

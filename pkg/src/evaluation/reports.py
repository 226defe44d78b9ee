"""
Per-episode CSV and summary JSON.

The CSV is deterministic for a seed set (no wall-clock column); the summary
carries mean_seconds, which is machine dependent.
"""
import csv
import json
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

import structlog

from .harness import EpisodeRecord, MetricsSummary, summarize

logger = structlog.get_logger()

EPISODES_FORMAT = "diplomat-episodes/1"
SUMMARY_FORMAT = "diplomat-summary/1"
BASE_COLUMNS = ["episode_id", "seed", "N", "M", "outcome", "rounds"]
TAIL_COLUMNS = ["J", "pareto", "illegal_actions"]


def episode_columns(max_agents: int) -> List[str]:
    return BASE_COLUMNS + [f"u_{i}" for i in range(max_agents)] + TAIL_COLUMNS


def _row(record: EpisodeRecord) -> Dict[str, Any]:
    row: Dict[str, Any] = {
        'episode_id': record.episode_id,
        'seed': record.seed,
        'N': record.num_agents,
        'M': record.num_issues,
        'outcome': record.outcome,
        'rounds': record.rounds,
        'J': repr(float(record.objective)),
        'pareto': '' if record.pareto is None else int(record.pareto),
        'illegal_actions': record.illegal_actions,
    }
    for i, u in enumerate(record.utilities):
        row[f"u_{i}"] = repr(float(u))
    return row


def write_episodes_csv(records: Sequence[EpisodeRecord], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fieldnames = episode_columns(max((r.num_agents for r in records), default=0))
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for record in records:
            row = _row(record)
            writer.writerow({k: row.get(k, "") for k in fieldnames})
    return path


def read_episodes_csv(path: Union[str, Path]) -> List[EpisodeRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            n = int(row['N'])
            records.append(EpisodeRecord(
                episode_id=int(row['episode_id']),
                seed=int(row['seed']),
                num_agents=n,
                num_issues=int(row['M']),
                outcome=row['outcome'],
                rounds=int(row['rounds']),
                utilities=tuple(float(row[f"u_{i}"]) for i in range(n)),
                objective=float(row['J']),
                pareto=None if row['pareto'] == '' else bool(int(row['pareto'])),
                illegal_actions=int(row.get('illegal_actions') or 0),
            ))
    return records


def write_summary(summary: MetricsSummary, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {'format': SUMMARY_FORMAT, 'episodes_format': EPISODES_FORMAT}
    document.update(summary.to_dict())
    with open(path, 'w') as f:
        json.dump(document, f, indent=2, sort_keys=True)
    return path


def read_summary(path: Union[str, Path]) -> MetricsSummary:
    with open(path, 'r') as f:
        data = json.load(f)
    if data.pop('format', None) != SUMMARY_FORMAT:
        raise ValueError(f"{path} is not a {SUMMARY_FORMAT} file")
    data.pop('episodes_format', None)
    return MetricsSummary.from_dict(data)


def write_report(summary: MetricsSummary, records: Sequence[EpisodeRecord], out_dir: Union[str, Path],
                 name: str = "evaluation") -> Tuple[Path, Path]:
    """<name>_episodes.csv and <name>_summary.json under out_dir"""
    out_dir = Path(out_dir)
    csv_path = write_episodes_csv(records, out_dir / f"{name}_episodes.csv")
    json_path = write_summary(summary, out_dir / f"{name}_summary.json")
    logger.info("Evaluation report written", csv=str(csv_path), summary=str(json_path))
    return csv_path, json_path


def summary_from_csv(path: Union[str, Path], label: str = "", seeds: Sequence[int] = ()) -> MetricsSummary:
    """Recompute the aggregate metrics from a per-episode CSV"""
    records = read_episodes_csv(path)
    num_agents = records[0].num_agents if records and len({r.num_agents for r in records}) == 1 else None
    return summarize(records, label=label, seeds=seeds, num_agents=num_agents)

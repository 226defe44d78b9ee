"""
Transcript files: one JSON line per message, last line carries the outcome.
"""
import json
from pathlib import Path
from typing import Any, Dict, Iterator, List, TextIO, Tuple, Union

from .protocol import (
    LogEntry, Message, Phase, ProtocolState, message_from_dict, message_to_dict, outcome, outcome_to_dict,
)

TRANSCRIPT_FORMAT = "diplomat-transcript/1"


def entry_to_dict(entry: LogEntry) -> Dict[str, Any]:
    return {
        'round': entry.round,
        'phase': entry.phase.label,
        'agent': entry.agent,
        'message': message_to_dict(entry.message),
    }


def transcript_lines(state: ProtocolState, seed: int = 0) -> Iterator[str]:
    """Header, one line per logged message, then the outcome line"""
    yield json.dumps({'format': TRANSCRIPT_FORMAT, 'num_agents': state.num_agents,
                      'budgets': list(state.budgets), 'seed': seed})
    for entry in state.message_log:
        yield json.dumps(entry_to_dict(entry))
    yield json.dumps(outcome_to_dict(outcome(state)))


def write_transcript(state: ProtocolState, stream: TextIO, seed: int = 0) -> None:
    for line in transcript_lines(state, seed):
        stream.write(line + "\n")


def save_transcript(state: ProtocolState, path: Union[str, Path], seed: int = 0) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        write_transcript(state, f, seed)


def read_transcript(path: Union[str, Path]) -> Tuple[Dict[str, Any], List[Tuple[int, Phase, int, Message]], Dict[str, Any]]:
    """Parse a transcript into (header, entries, outcome)"""
    with open(path, 'r') as f:
        lines = [json.loads(line) for line in f if line.strip()]
    header, body, final = lines[0], lines[1:-1], lines[-1]
    if header.get('format') != TRANSCRIPT_FORMAT:
        raise ValueError(f"Unsupported transcript format {header.get('format')!r}")
    labels = {phase.label: phase for phase in Phase}
    entries = [(item['round'], labels[item['phase']], item['agent'], message_from_dict(item['message']))
               for item in body]
    return header, entries, final

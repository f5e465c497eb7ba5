"""
Run trace: an ordered list of JSON-native events, persisted as JSON lines
"""
import json
import logging
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Union

logger = logging.getLogger(__name__)

Event = Dict[str, Any]
Listener = Callable[[int, Event], None]

EVENT_KINDS = (
    "run_started",
    "constraint_added",
    "dual_raised",
    "constraint_depleted",
    "transfer",
    "awake_removed",
    "timestep_advanced",
    "simple_update",
    "full_update",
    "request_started",
    "request_done",
    "critical",
    "buildtree",
    "spawn",
    "witness_node",
    "witness_edge",
    "piggyback_served",
    "run_finished",
)


class TraceRecorder:
    """
    Collects events in order; an optional listener sees each event as it is emitted

    Payload values must already be JSON types (timesteps as [q, tick] lists) so that a
    trace read back from disk is identical to the in-memory one.
    """

    def __init__(self, listener: Optional[Listener] = None):
        self.events: List[Event] = []
        self.listener = listener

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def emit(self, kind: str, **payload: Any) -> int:
        if kind not in EVENT_KINDS:
            raise ValueError(f"Unknown trace event {kind!r}")
        event = {"event": kind, **payload}
        index = len(self.events)
        self.events.append(event)
        if self.listener is not None:
            self.listener(index, event)
        return index

    def of_kind(self, kind: str) -> List[Event]:
        return [event for event in self.events if event["event"] == kind]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(event, ensure_ascii=False) + "\n" for event in self.events)

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_jsonl(), encoding="utf-8")
        logger.info(f"Wrote {len(self.events)} trace events to {path}")
        return path


def read_trace(path: Union[str, Path]) -> List[Event]:
    """Load a JSON-lines trace written by TraceRecorder.write"""
    events: List[Event] = []
    with open(path, encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                events.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}: line {number} is not valid JSON ({e})") from e
    return events

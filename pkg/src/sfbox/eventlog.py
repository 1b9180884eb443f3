"""Append-only simulation event log, serializable as line-delimited JSON.

All engines write here so a whole run can be replayed, diffed, and scored.
Records are plain dicts with at least {"t": sim_time, "kind": str}.
Timestamps may be exact Fractions internally; serialization renders them as
int when integral, else float, so identical runs produce identical bytes.
"""

import json
from fractions import Fraction


def plain_time(t):
    """Render a sim time as int if integral, else float."""
    if isinstance(t, Fraction):
        return int(t) if t.denominator == 1 else float(t)
    if isinstance(t, float) and t.is_integer():
        return int(t)
    return t


def _plain(value):
    if isinstance(value, Fraction):
        return plain_time(value)
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        seq = sorted(value) if isinstance(value, (set, frozenset)) else value
        return [_plain(v) for v in seq]
    return value


class EventLog:
    def __init__(self):
        self.records: list[dict] = []

    def append(self, t, kind: str, **fields):
        rec = {"t": t, "kind": kind}
        rec.update(fields)
        self.records.append(rec)
        return rec

    def since(self, index: int) -> list[dict]:
        return self.records[index:]

    def to_jsonl(self) -> str:
        return "\n".join(
            json.dumps(_plain(r), sort_keys=True, separators=(",", ":"))
            for r in self.records
        )

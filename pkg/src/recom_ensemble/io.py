"""File formats: plan CSV, ensemble JSON Lines, commented CSV outputs."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .graph import DualGraph, GraphDataError
from .partition import Assignment


def read_plan_csv(path: str | Path, g: DualGraph) -> Assignment:
    """Load a ``node_id,district`` CSV; lines starting with ``#`` are skipped."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.DictReader(rows)
    if reader.fieldnames is None or set(reader.fieldnames) < {"node_id", "district"}:
        raise GraphDataError(f"{path}: expected header 'node_id,district'")
    plan = {}
    for lineno, row in enumerate(reader, start=2):
        try:
            district = int(row["district"])
        except (TypeError, ValueError):
            raise GraphDataError(f"{path}:{lineno}: district must be an integer") from None
        if district < 1:
            raise GraphDataError(f"{path}:{lineno}: district must be positive")
        if row["node_id"] in plan:
            raise GraphDataError(f"{path}:{lineno}: node {row['node_id']!r} assigned twice")
        plan[row["node_id"]] = district
    return Assignment.from_mapping(g, plan)


def write_plan_csv(path: str | Path, a: Assignment, header: Sequence[str] = ()) -> None:
    rows = [[node_id, label] for node_id, label in zip(a.graph.node_ids(), a.labels)]
    write_csv(path, ["node_id", "district"], rows, header)


def write_csv(
    path: str | Path, columns: Sequence[str], rows: Iterable[Sequence], header: Sequence[str] = ()
) -> None:
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(x) for x in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


class EnsembleWriter:
    """Chain sink writing one ``{"step", "assignment"}`` JSON object per line."""

    def __init__(self, path: str | Path):
        self._fh = open(path, "w", encoding="utf-8")

    def __call__(self, step: int, a: Assignment) -> None:
        self._fh.write(json.dumps({"step": step, "assignment": list(a.labels)}, separators=(",", ":")))
        self._fh.write("\n")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_ensemble(path: str | Path, g: DualGraph) -> Iterator[tuple[int, Assignment]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                yield record["step"], Assignment(g, record["assignment"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise GraphDataError(f"{path}:{lineno}: bad ensemble record ({exc})") from None

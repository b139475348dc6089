"""Readers for submission dumps (JSON Lines) and exchange tick files (CSV).

Both readers return records sorted ascending by timestamp (ties keep file
order) and are pure functions of file content. In strict mode a malformed
line raises :class:`InputError` carrying its 1-based line number; in lenient
mode malformed lines are skipped and counted instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .errors import InputError

SUBMISSION_REQUIRED_KEYS = ("id", "created_utc", "subreddit", "title")


@dataclass(frozen=True)
class RawSubmission:
    """One social-media submission: title and body joined with a single space."""

    id: str
    created_utc: int
    source: str
    text: str


@dataclass(frozen=True)
class TickRecord:
    """One exchange trade tick."""

    timestamp_ms: int
    price: float
    amount: float


@dataclass
class ReadResult:
    """Records read from one file plus the count of lines skipped in lenient mode."""

    records: list = field(default_factory=list)
    skipped: int = 0

    def __iter__(self) -> Iterator:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)


def _parse_submission(line: str, lineno: int) -> RawSubmission:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise InputError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise InputError(f"line {lineno}: expected a JSON object")
    for key in SUBMISSION_REQUIRED_KEYS:
        if key not in obj:
            raise InputError(f"line {lineno}: missing required key '{key}'")
    sub_id, created, subreddit, title = (obj[k] for k in SUBMISSION_REQUIRED_KEYS)
    if not isinstance(sub_id, str):
        raise InputError(f"line {lineno}: 'id' must be a string")
    if isinstance(created, bool) or not isinstance(created, int) or created <= 0:
        raise InputError(f"line {lineno}: 'created_utc' must be a positive integer")
    if not isinstance(subreddit, str) or not subreddit:
        raise InputError(f"line {lineno}: 'subreddit' must be a non-empty string")
    if not isinstance(title, str):
        raise InputError(f"line {lineno}: 'title' must be a string")
    body = obj.get("selftext", "")
    if not isinstance(body, str):
        raise InputError(f"line {lineno}: 'selftext' must be a string")
    text = f"{title} {body}" if body else title
    return RawSubmission(id=sub_id, created_utc=created, source=subreddit, text=text)


def read_submissions(path: str | Path, lenient: bool = False) -> ReadResult:
    """Read a JSON Lines submission dump.

    Returns records sorted ascending by ``created_utc`` (stable, so ties keep
    file order). Every input line is either parsed into a record or, in
    lenient mode, counted as skipped; blank lines count as malformed.
    """
    path = Path(path)
    try:
        raw_lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read submissions file {path}: {exc}") from exc

    result = ReadResult()
    for lineno, line in enumerate(raw_lines, start=1):
        if not line.strip():
            if lenient:
                result.skipped += 1
                continue
            raise InputError(f"line {lineno}: blank line")
        try:
            result.records.append(_parse_submission(line, lineno))
        except InputError:
            if not lenient:
                raise
            result.skipped += 1
    result.records.sort(key=lambda r: r.created_utc)
    return result


def _parse_tick(line: str, lineno: int) -> TickRecord:
    parts = line.split(",")
    if len(parts) != 3:
        raise InputError(f"line {lineno}: expected 3 columns, got {len(parts)}")
    try:
        ts = int(parts[0])
        price = float(parts[1])
        amount = float(parts[2])
    except ValueError as exc:
        raise InputError(f"line {lineno}: {exc}") from exc
    if price <= 0:
        raise InputError(f"line {lineno}: non-positive price {price}")
    if amount < 0:
        raise InputError(f"line {lineno}: negative amount {amount}")
    return TickRecord(timestamp_ms=ts, price=price, amount=amount)


def read_ticks(path: str | Path, lenient: bool = False) -> ReadResult:
    """Read a headerless ``timestamp_ms,price,amount`` CSV of trade ticks.

    Returns records sorted ascending by ``timestamp_ms``. Rows with a
    non-positive price are rejected with their line number (skipped and
    counted in lenient mode).
    """
    path = Path(path)
    try:
        raw_lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read tick file {path}: {exc}") from exc

    result = ReadResult()
    for lineno, line in enumerate(raw_lines, start=1):
        if not line.strip():
            if lenient:
                result.skipped += 1
                continue
            raise InputError(f"line {lineno}: blank line")
        try:
            result.records.append(_parse_tick(line, lineno))
        except InputError:
            if not lenient:
                raise
            result.skipped += 1
    result.records.sort(key=lambda t: t.timestamp_ms)
    return result

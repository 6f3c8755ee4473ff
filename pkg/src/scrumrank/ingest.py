"""CSV ingestion and data cleaning for self-reported match results.

Results entered by hand carry recurring defects: try counts that exceed
what the score allows, placeholder venues, declared winners on 0-0
scorelines for unplayed fixtures, blank try cells, and scores typed the
wrong way round. Five repair rules run in a fixed order per row:

  R1  a side's score is too small for its tries: swap the try counts if
      that fixes both sides, otherwise cut the offending side's tries to
      the most the score allows (one try is worth at least five points);
  R2  venue "tbc" becomes Neutral;
  R3  a declared home Won/Loss with every score and try cell at zero is
      an awarded match: mark an outcome override giving the declared
      winner a narrow win with no try bonuses;
  R4  a blank try cell is filled with the most tries the score allows;
  R5  a declared result that contradicts the score, matches the try
      counts, and becomes consistent when the score is reversed means the
      score was entered backwards: reverse it.

Every mutation is recorded as one audit action per (row, rule) with
before/after snapshots per field, so the audit log can be replayed on the
raw rows to reproduce the cleaned output. Rows still inconsistent after
the rules are rejected with a reason, never silently dropped and never
fatal to the rest of the file.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, fields as dataclass_fields
from typing import Iterable, Sequence

from .domain import (
    MatchRecord,
    ResultOutcome,
    TRY_SCORE_VALUE,
    Venue,
)

EXPECTED_HEADER = (
    "date", "home_team", "away_team", "home_score", "away_score",
    "home_tries", "away_tries", "venue", "declared_result",
)
OVERRIDE_COLUMN = "outcome_override"
AUDIT_HEADER = ("row", "rule", "field", "before", "after", "description")

_DECLARED_TOKENS = ("Won", "Draw", "Loss")
_INT_FIELDS = ("home_score", "away_score", "home_tries", "away_tries")


class CsvParseError(ValueError):
    """Malformed input CSV; carries the offending row and column."""

    def __init__(self, message: str, row: int | None = None,
                 column: str | None = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)
        self.row = row
        self.column = column


@dataclass
class RawMatchRow:
    """One data row, numerics parsed, blanks kept as absent values."""

    date: str = ""
    home_team: str = ""
    away_team: str = ""
    home_score: int | None = None
    away_score: int | None = None
    home_tries: int | None = None
    away_tries: int | None = None
    venue: str = "Home"
    declared_result: str = ""
    outcome_override: str = ""


@dataclass(frozen=True)
class FieldChange:
    field: str
    before: str
    after: str


@dataclass(frozen=True)
class CleaningAction:
    row: int  # 1-based data row index
    rule: str
    description: str
    changes: tuple[FieldChange, ...]


@dataclass(frozen=True)
class RejectedRow:
    row: int
    reason: str


@dataclass(frozen=True)
class CleanResult:
    records: tuple[MatchRecord, ...]
    actions: tuple[CleaningAction, ...]
    rejected: tuple[RejectedRow, ...]
    rows: tuple[RawMatchRow, ...]  # cleaned rows behind `records`


def _parse_int_cell(text: str, row: int, column: str) -> int | None:
    text = text.strip()
    if text == "":
        return None
    try:
        value = int(text)
    except ValueError:
        raise CsvParseError(f"expected an integer, got {text!r}",
                            row=row, column=column) from None
    if value < 0:
        raise CsvParseError(f"negative value {value}", row=row, column=column)
    return value


def parse_csv(text: str) -> list[RawMatchRow]:
    """Parse results CSV text into raw rows.

    The header must match the expected schema exactly; a trailing
    outcome_override column (present in cleaned output) is accepted.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise CsvParseError("empty input: no header row") from None
    header = tuple(cell.strip() for cell in header)
    if header not in (EXPECTED_HEADER, EXPECTED_HEADER + (OVERRIDE_COLUMN,)):
        unknown = [name for name in header if name not in
                   EXPECTED_HEADER + (OVERRIDE_COLUMN,)]
        if unknown:
            raise CsvParseError(f"unknown columns {unknown}; expected "
                                f"{','.join(EXPECTED_HEADER)}")
        raise CsvParseError(
            f"bad header {','.join(header)!r}; expected "
            f"{','.join(EXPECTED_HEADER)} with optional trailing "
            f"{OVERRIDE_COLUMN}")
    has_override = len(header) == len(EXPECTED_HEADER) + 1
    rows: list[RawMatchRow] = []
    for index, cells in enumerate(reader, start=1):
        if len(cells) != len(header):
            raise CsvParseError(
                f"expected {len(header)} cells, found {len(cells)}",
                row=index)
        cells = [cell.strip() for cell in cells]
        row = RawMatchRow(
            date=cells[0],
            home_team=cells[1],
            away_team=cells[2],
            home_score=_parse_int_cell(cells[3], index, "home_score"),
            away_score=_parse_int_cell(cells[4], index, "away_score"),
            home_tries=_parse_int_cell(cells[5], index, "home_tries"),
            away_tries=_parse_int_cell(cells[6], index, "away_tries"),
            venue=cells[7],
            declared_result=cells[8],
            outcome_override=cells[9] if has_override else "",
        )
        if row.outcome_override not in ("", "home", "away"):
            raise CsvParseError(
                f"unrecognized override {row.outcome_override!r}",
                row=index, column=OVERRIDE_COLUMN)
        rows.append(row)
    return rows


def _cell_text(value) -> str:
    return "" if value is None else str(value)


def _snapshot(row: RawMatchRow, names: Sequence[str]) -> dict[str, str]:
    return {name: _cell_text(getattr(row, name)) for name in names}


def _changes(row: RawMatchRow, before: dict[str, str]) -> tuple[FieldChange,
                                                                ...]:
    out = []
    for name, old in before.items():
        new = _cell_text(getattr(row, name))
        if new != old:
            out.append(FieldChange(name, old, new))
    return tuple(out)


def _max_tries(score: int) -> int:
    return score // TRY_SCORE_VALUE


def _side_inconsistent(score: int | None, tries: int | None) -> bool:
    return (score is not None and tries is not None
            and score < TRY_SCORE_VALUE * tries)


def _declared_for(home_score: int, away_score: int) -> str:
    if home_score > away_score:
        return "Won"
    if home_score < away_score:
        return "Loss"
    return "Draw"


def _apply_r1(row: RawMatchRow, index: int) -> CleaningAction | None:
    home_bad = _side_inconsistent(row.home_score, row.home_tries)
    away_bad = _side_inconsistent(row.away_score, row.away_tries)
    if not (home_bad or away_bad):
        return None
    before = _snapshot(row, ("home_tries", "away_tries"))
    can_swap = None not in (row.home_score, row.away_score,
                            row.home_tries, row.away_tries)
    if can_swap:
        swapped_home, swapped_away = row.away_tries, row.home_tries
        if not (_side_inconsistent(row.home_score, swapped_home)
                or _side_inconsistent(row.away_score, swapped_away)):
            row.home_tries, row.away_tries = swapped_home, swapped_away
            return CleaningAction(
                index, "R1",
                "try counts exceed what the scores allow; swapping them "
                "fixes both sides", _changes(row, before))
    parts = []
    if home_bad:
        row.home_tries = _max_tries(row.home_score)
        parts.append("home")
    if away_bad:
        row.away_tries = _max_tries(row.away_score)
        parts.append("away")
    return CleaningAction(
        index, "R1",
        f"{' and '.join(parts)} try count exceeds what the score allows; "
        "reduced to the maximum the score supports", _changes(row, before))


def _apply_r2(row: RawMatchRow, index: int) -> CleaningAction | None:
    if row.venue != "tbc":
        return None
    before = _snapshot(row, ("venue",))
    row.venue = "Neutral"
    return CleaningAction(index, "R2", "venue to be confirmed; treated as "
                          "neutral", _changes(row, before))


def _apply_r3(row: RawMatchRow, index: int) -> CleaningAction | None:
    if row.outcome_override:
        return None
    if row.declared_result not in ("Won", "Loss"):
        return None
    if not (row.home_score == 0 and row.away_score == 0
            and row.home_tries == 0 and row.away_tries == 0):
        return None
    before = _snapshot(row, (OVERRIDE_COLUMN,))
    winner = "home" if row.declared_result == "Won" else "away"
    row.outcome_override = winner
    return CleaningAction(
        index, "R3",
        f"declared {row.declared_result!r} with an all-zero scoreline: "
        f"awarded as a narrow {winner} win, no try bonuses",
        _changes(row, before))


def _apply_r4(row: RawMatchRow, index: int) -> CleaningAction | None:
    before = _snapshot(row, ("home_tries", "away_tries"))
    filled = []
    if row.home_tries is None and row.home_score is not None:
        row.home_tries = _max_tries(row.home_score)
        filled.append("home")
    if row.away_tries is None and row.away_score is not None:
        row.away_tries = _max_tries(row.away_score)
        filled.append("away")
    if not filled:
        return None
    return CleaningAction(
        index, "R4",
        f"blank {' and '.join(filled)} try count filled with the maximum "
        "the score supports", _changes(row, before))


def _apply_r5(row: RawMatchRow, index: int) -> CleaningAction | None:
    if row.outcome_override or row.declared_result == "":
        return None
    if None in (row.home_score, row.away_score, row.home_tries,
                row.away_tries):
        return None
    if row.declared_result == _declared_for(row.home_score, row.away_score):
        return None
    if row.declared_result != _declared_for(row.home_tries, row.away_tries):
        return None
    reversed_home, reversed_away = row.away_score, row.home_score
    if row.declared_result != _declared_for(reversed_home, reversed_away):
        return None
    if (_side_inconsistent(reversed_home, row.home_tries)
            or _side_inconsistent(reversed_away, row.away_tries)):
        return None
    before = _snapshot(row, ("home_score", "away_score"))
    row.home_score, row.away_score = reversed_home, reversed_away
    return CleaningAction(
        index, "R5",
        "declared result contradicts the score but matches the try counts; "
        "score was entered backwards and has been reversed",
        _changes(row, before))


_RULES = (_apply_r1, _apply_r2, _apply_r3, _apply_r4, _apply_r5)

_VENUES = {"Home": Venue.HOME_GROUND, "Neutral": Venue.NEUTRAL}
_OVERRIDES = {"home": ResultOutcome.HOME_NARROW,
              "away": ResultOutcome.AWAY_NARROW}


def _validate_row(row: RawMatchRow) -> str | None:
    """Reason the cleaned row is still unusable, or None if it is fine."""
    if not row.home_team or not row.away_team:
        return "blank team name"
    if row.home_team == row.away_team:
        return "a team cannot play itself"
    if row.venue not in _VENUES:
        return f"unrecognized venue {row.venue!r}"
    if row.declared_result not in ("",) + _DECLARED_TOKENS:
        return (f"unrecognized declared result {row.declared_result!r}; "
                f"expected one of {', '.join(_DECLARED_TOKENS)} or blank")
    for name in _INT_FIELDS:
        if getattr(row, name) is None:
            return f"missing {name}"
    if not row.outcome_override:
        if (_side_inconsistent(row.home_score, row.home_tries)
                or _side_inconsistent(row.away_score, row.away_tries)):
            return "score too small for the try count"
        if row.declared_result and row.declared_result != _declared_for(
                row.home_score, row.away_score):
            return (f"declared result {row.declared_result!r} contradicts "
                    f"the {row.home_score}-{row.away_score} score")
    return None


def _to_record(row: RawMatchRow) -> MatchRecord:
    return MatchRecord(
        home_team=row.home_team,
        away_team=row.away_team,
        home_score=row.home_score,
        away_score=row.away_score,
        home_tries=row.home_tries,
        away_tries=row.away_tries,
        venue=_VENUES[row.venue],
        result_override=_OVERRIDES.get(row.outcome_override),
    )


def clean(rows: Iterable[RawMatchRow]) -> CleanResult:
    """Apply the repair rules in order to every row.

    Row indices in actions and rejections are 1-based positions in the
    input sequence. Exact duplicates of an earlier row are rejected.
    """
    kept_rows: list[RawMatchRow] = []
    records: list[MatchRecord] = []
    actions: list[CleaningAction] = []
    rejected: list[RejectedRow] = []
    seen: dict[tuple, int] = {}
    for index, original in enumerate(rows, start=1):
        key = tuple(getattr(original, f.name)
                    for f in dataclass_fields(RawMatchRow))
        if key in seen:
            rejected.append(RejectedRow(
                index, f"exact duplicate of row {seen[key]}"))
            continue
        seen[key] = index
        row = RawMatchRow(**{f.name: getattr(original, f.name)
                             for f in dataclass_fields(RawMatchRow)})
        for rule in _RULES:
            action = rule(row, index)
            if action is not None:
                actions.append(action)
        reason = _validate_row(row)
        if reason is not None:
            rejected.append(RejectedRow(index, reason))
            continue
        kept_rows.append(row)
        records.append(_to_record(row))
    return CleanResult(records=tuple(records), actions=tuple(actions),
                       rejected=tuple(rejected), rows=tuple(kept_rows))


def replay_actions(rows: Iterable[RawMatchRow],
                   actions: Iterable[CleaningAction]) -> list[RawMatchRow]:
    """Apply an audit log's after-values back onto raw rows."""
    out = [RawMatchRow(**{f.name: getattr(row, f.name)
                          for f in dataclass_fields(RawMatchRow)})
           for row in rows]
    for action in actions:
        row = out[action.row - 1]
        for change in action.changes:
            if change.field in _INT_FIELDS:
                value = None if change.after == "" else int(change.after)
            else:
                value = change.after
            setattr(row, change.field, value)
    return out


def write_cleaned_csv(rows: Iterable[RawMatchRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EXPECTED_HEADER + (OVERRIDE_COLUMN,))
    for row in rows:
        writer.writerow([
            row.date, row.home_team, row.away_team,
            _cell_text(row.home_score), _cell_text(row.away_score),
            _cell_text(row.home_tries), _cell_text(row.away_tries),
            row.venue, row.declared_result, row.outcome_override,
        ])
    return buf.getvalue()


def write_audit_csv(actions: Iterable[CleaningAction]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(AUDIT_HEADER)
    for action in actions:
        for change in action.changes:
            writer.writerow([action.row, action.rule, change.field,
                             change.before, change.after, action.description])
    return buf.getvalue()


def load_matches(path) -> CleanResult:
    """Parse and clean a results CSV file."""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        rows = parse_csv(handle.read())
    return clean(rows)

"""Reader and writer for the numeric subset of MATPOWER case files.

Only matrix assignments of the form ``mpc.<name> = [ ... ];`` are
interpreted; rows are separated by ``;`` or newlines and ``%`` starts a
comment.  Other statements (``function``, ``mpc.baseMVA = 100;``, cell
arrays) are skipped.  The ``bus``, ``branch`` and ``gen`` tables are
required.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

__all__ = [
    "CaseParseError",
    "Bus",
    "Branch",
    "GridCase",
    "parse_matpower",
    "load_case",
    "format_matpower",
]

_OPEN = re.compile(r"^\s*mpc\.(\w+)\s*=\s*\[(.*)$")
REQUIRED = ("bus", "branch", "gen")
MIN_COLUMNS = {"bus": 1, "branch": 4, "gen": 1}


class CaseParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Bus:
    id: int
    is_generator: bool

    @property
    def type(self) -> str:
        return "generator" if self.is_generator else "load"


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    x: float


@dataclass(frozen=True)
class GridCase:
    buses: tuple
    branches: tuple
    gens: tuple
    tables: dict
    name: str = "case"

    @property
    def bus_ids(self) -> tuple:
        return tuple(b.id for b in self.buses)

    @property
    def generator_buses(self) -> tuple:
        return tuple(b.id for b in self.buses if b.is_generator)

    @property
    def load_buses(self) -> tuple:
        return tuple(b.id for b in self.buses if not b.is_generator)


def _strip_comment(line: str) -> str:
    i = line.find("%")
    return line if i < 0 else line[:i]


def _parse_row(text: str, lineno: int) -> tuple:
    vals = []
    for tok in text.replace(",", " ").split():
        try:
            vals.append(float(tok))
        except ValueError:
            raise CaseParseError(f"non-numeric token {tok!r}", lineno) from None
    return tuple(vals)


def _read_tables(text: str) -> tuple[dict, dict]:
    tables: dict[str, list] = {}
    row_lines: dict[str, list] = {}
    current = None
    start = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw)
        if current is None:
            m = _OPEN.match(line)
            if not m:
                continue
            current, start = m.group(1), lineno
            if current in tables:
                raise CaseParseError(f"table mpc.{current} defined twice", lineno)
            tables[current], row_lines[current] = [], []
            line = m.group(2)
        end = line.find("]")
        body = line if end < 0 else line[:end]
        # Both ';' and a newline end a row inside a matrix literal.
        for piece in body.split(";"):
            if piece.strip():
                tables[current].append(_parse_row(piece, lineno))
                row_lines[current].append(lineno)
        if end >= 0:
            if line[end + 1:].strip() not in ("", ";"):
                raise CaseParseError("unexpected text after closing bracket", lineno)
            current = None
    if current is not None:
        raise CaseParseError(f"unterminated matrix block mpc.{current}", start)
    return tables, row_lines


def parse_matpower(text: str, name: str = "case") -> GridCase:
    tables, row_lines = _read_tables(text)
    for t in REQUIRED:
        if t not in tables:
            raise CaseParseError(f"missing required table mpc.{t}")
    for t, need in MIN_COLUMNS.items():
        for row, ln in zip(tables[t], row_lines[t]):
            if len(row) < need:
                raise CaseParseError(f"mpc.{t} row needs at least {need} columns", ln)

    ids = []
    seen = set()
    for row, ln in zip(tables["bus"], row_lines["bus"]):
        bid = row[0]
        if bid != int(bid):
            raise CaseParseError(f"bus id {bid} is not an integer", ln)
        bid = int(bid)
        if bid in seen:
            raise CaseParseError(f"duplicate bus id {bid}", ln)
        seen.add(bid)
        ids.append(bid)

    gen_buses = []
    for row, ln in zip(tables["gen"], row_lines["gen"]):
        gb = int(row[0])
        if gb not in seen:
            raise CaseParseError(f"generator references unknown bus {gb}", ln)
        gen_buses.append(gb)
    if not gen_buses:
        raise CaseParseError("generator table is empty")

    branches = []
    for row, ln in zip(tables["branch"], row_lines["branch"]):
        f, t = int(row[0]), int(row[1])
        for b in (f, t):
            if b not in seen:
                raise CaseParseError(f"branch references unknown bus {b}", ln)
        branches.append(Branch(f, t, float(row[3])))

    gset = set(gen_buses)
    buses = tuple(Bus(b, b in gset) for b in ids)
    frozen = {k: tuple(v) for k, v in tables.items()}
    return GridCase(buses=buses, branches=tuple(branches), gens=tuple(gen_buses),
                    tables=frozen, name=name)


def load_case(path) -> GridCase:
    path = Path(path)
    return parse_matpower(path.read_text(), name=path.stem)


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() and abs(v) < 1e15 else repr(float(v))


def format_matpower(case: GridCase) -> str:
    """Canonical emitter: every stored table, shortest round-trip numbers."""
    lines = [f"function mpc = {case.name}", "mpc.version = '2';", ""]
    for name, rows in case.tables.items():
        lines.append(f"mpc.{name} = [")
        lines.extend("\t" + "\t".join(_fmt(v) for v in row) + ";" for row in rows)
        lines.append("];")
        lines.append("")
    return "\n".join(lines)

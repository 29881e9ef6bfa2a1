"""In-memory tables, interchange-format parsers and writers, flattening, transpose."""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Optional, Sequence, Union

from .values import CellValue, infer_cell_type

HEADER_SEP = "∧"
GROUP_SEP = "∨"
FORMATS = ("csv", "markdown", "json")
AS_GIVEN = "as-given"
TRANSPOSED = "transposed-candidate"


class TableError(ValueError):
    pass


class MalformedInput(TableError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + where)


class AmbiguousHierarchy(TableError):
    pass


@dataclass(frozen=True)
class Cell:
    raw: str

    @cached_property
    def value(self) -> CellValue:
        return infer_cell_type(self.raw)


@dataclass(frozen=True)
class Table:
    column_headers: tuple
    rows: tuple
    source_id: Optional[str] = None
    orientation_hint: str = AS_GIVEN
    # leading columns that hold row-group labels (hierarchical row headers)
    row_group_columns: int = field(default=0)

    def __post_init__(self) -> None:
        headers = tuple(tuple(str(s) for s in path) for path in self.column_headers)
        if not headers:
            raise TableError("a table needs at least one column")
        if any(not path for path in headers):
            raise TableError("header paths must have at least one segment")
        rows = tuple(
            tuple(c if isinstance(c, Cell) else Cell(str(c)) for c in row) for row in self.rows
        )
        for i, row in enumerate(rows):
            if len(row) != len(headers):
                raise TableError(f"row {i} has {len(row)} cells, expected {len(headers)}")
        if self.orientation_hint not in (AS_GIVEN, TRANSPOSED):
            raise TableError(f"unknown orientation hint {self.orientation_hint!r}")
        object.__setattr__(self, "column_headers", headers)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_strings(cls, headers: Sequence[Union[str, Sequence[str]]],
                     rows: Iterable[Sequence[str]], **kw) -> "Table":
        paths = [(h,) if isinstance(h, str) else tuple(h) for h in headers]
        return cls(tuple(paths), tuple(tuple(Cell(c) for c in r) for r in rows), **kw)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_cols(self) -> int:
        return len(self.column_headers)

    @property
    def n_cells(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def is_flat(self) -> bool:
        return all(len(p) == 1 for p in self.column_headers) and self.row_group_columns <= 1

    @property
    def headers(self) -> list[str]:
        return [header_label(p) for p in self.column_headers]

    def raw_rows(self) -> list[list[str]]:
        return [[c.raw for c in row] for row in self.rows]

    def column(self, j: int) -> list[Cell]:
        return [row[j] for row in self.rows]


# -- header paths --------------------------------------------------------------


def _escape_segment(seg: str) -> str:
    return seg.replace("\\", "\\\\").replace(HEADER_SEP, "\\" + HEADER_SEP).replace(
        GROUP_SEP, "\\" + GROUP_SEP)


def _join(parts: Sequence[str], sep: str) -> str:
    return sep.join(_escape_segment(p) for p in parts)


def header_label(path: Sequence[str]) -> str:
    """Display label of a header path; single-segment paths are returned verbatim."""
    if len(path) == 1:
        return path[0]
    return _join(path, HEADER_SEP)


def split_header_path(label: str, sep: str = HEADER_SEP) -> list[str]:
    """Inverse of the escaped join used by flattening."""
    parts, buf, i = [], [], 0
    while i < len(label):
        ch = label[i]
        if ch == "\\" and i + 1 < len(label):
            buf.append(label[i + 1])
            i += 2
            continue
        if ch == sep:
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
        i += 1
    parts.append("".join(buf))
    return parts


# -- parsing ---------------------------------------------------------------------


def _decode(data: Union[bytes, str]) -> str:
    if isinstance(data, str):
        return data
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        line = data[: e.start].count(b"\n") + 1
        col = e.start - (data.rfind(b"\n", 0, e.start) + 1) + 1
        raise MalformedInput("invalid UTF-8", line, col) from None
    return text.lstrip("\ufeff")


def _check_headers(labels: Sequence[str], line: int) -> None:
    if not labels:
        raise MalformedInput("empty header", line)
    seen: set[str] = set()
    for j, h in enumerate(labels):
        if not h:
            raise MalformedInput("empty header cell", line, j + 1)
        if h in seen:
            raise MalformedInput(f"duplicate header {h!r}", line, j + 1)
        seen.add(h)


def parse_csv(text: str) -> Table:
    reader = csv.reader(io.StringIO(text))
    header: Optional[list[str]] = None
    header_line = 1
    rows: list[list[str]] = []
    try:
        for record in reader:
            # a quoted "" is an empty cell; a bare blank or whitespace line is skipped
            if not record or (len(record) == 1 and record[0] and not record[0].strip()):
                continue
            fields = [f.strip() for f in record]
            if header is None:
                header, header_line = fields, reader.line_num
                _check_headers(header, header_line)
                continue
            if len(fields) != len(header):
                raise MalformedInput(
                    f"row has {len(fields)} fields, header has {len(header)}", reader.line_num)
            rows.append(fields)
    except csv.Error as e:
        raise MalformedInput(f"CSV syntax error: {e}", reader.line_num) from None
    if header is None:
        raise MalformedInput("empty header", 1)
    return Table.from_strings(header, rows)


_DELIM_CELL = re.compile(r"^:?-+:?$")


def _split_pipe_row(line: str) -> list[str]:
    s = line.strip()
    if s.startswith("|"):
        s = s[1:]
    cells, buf, i, closed = [], [], 0, False
    while i < len(s):
        ch = s[i]
        if ch == "\\" and i + 1 < len(s) and s[i + 1] in "|\\":
            buf.append(s[i + 1])
            i += 2
            continue
        if ch == "|":
            cells.append("".join(buf).strip())
            buf = []
            closed = True
        else:
            buf.append(ch)
            closed = False
        i += 1
    if buf or not closed:
        tail = "".join(buf).strip()
        if tail or not closed:
            cells.append(tail)
    return cells


def parse_markdown(text: str) -> Table:
    lines = [(n, ln) for n, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if not lines:
        raise MalformedInput("empty header", 1)
    for n, ln in lines:
        if "|" not in ln:
            raise MalformedInput("not a pipe-table line", n)
    head_no, head = lines[0]
    header = _split_pipe_row(head)
    _check_headers(header, head_no)
    if len(lines) < 2:
        raise MalformedInput("missing delimiter row", head_no + 1)
    delim_no, delim = lines[1]
    delim_cells = _split_pipe_row(delim)
    if len(delim_cells) != len(header) or not all(_DELIM_CELL.match(c.replace(" ", "")) for c in delim_cells):
        raise MalformedInput("malformed delimiter row", delim_no)
    rows = []
    for n, ln in lines[2:]:
        cells = _split_pipe_row(ln)
        if len(cells) != len(header):
            raise MalformedInput(f"row has {len(cells)} cells, header has {len(header)}", n)
        rows.append(cells)
    return Table.from_strings(header, rows)


def parse_json(text: str) -> Table:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedInput(f"invalid JSON: {e.msg}", e.lineno, e.colno) from None
    if not isinstance(doc, dict) or "headers" not in doc or "rows" not in doc:
        raise MalformedInput("expected an object with 'headers' and 'rows'", 1)
    headers, rows = doc["headers"], doc["rows"]
    if not isinstance(headers, list) or not headers:
        raise MalformedInput("empty header", 1)
    paths = []
    for j, h in enumerate(headers):
        if isinstance(h, str):
            h = [h]
        if not isinstance(h, list) or not h or not all(isinstance(s, str) for s in h):
            raise MalformedInput(f"header {j} must be a non-empty list of strings", 1, j + 1)
        paths.append([s.strip() for s in h])
    labels = [header_label(p) for p in paths]
    if any(all(not s for s in p) for p in paths):
        raise MalformedInput("empty header cell", 1)
    if len(set(labels)) != len(labels):
        raise MalformedInput("duplicate header path", 1)
    if not isinstance(rows, list):
        raise MalformedInput("'rows' must be a list", 1)
    out = []
    for i, row in enumerate(rows):
        if not isinstance(row, list) or not all(isinstance(c, str) for c in row):
            raise MalformedInput(f"rows[{i}] must be a list of strings", i + 2)
        if len(row) != len(paths):
            raise MalformedInput(f"rows[{i}] has {len(row)} cells, header has {len(paths)}", i + 2)
        out.append([c.strip() for c in row])
    hint = doc.get("orientation_hint", AS_GIVEN)
    groups = doc.get("row_group_columns", 0)
    if hint not in (AS_GIVEN, TRANSPOSED) or not isinstance(groups, int) or not 0 <= groups <= len(paths):
        raise MalformedInput("invalid table metadata", 1)
    return Table.from_strings(paths, out, source_id=doc.get("source_id"),
                              orientation_hint=hint, row_group_columns=groups)


_PARSERS = {"csv": parse_csv, "markdown": parse_markdown, "json": parse_json}


def parse_table(data: Union[bytes, str], fmt: str) -> Table:
    """Parse bytes (UTF-8) or text in one of ``csv``, ``markdown``, ``json``."""
    if fmt == "markdown-pipe":
        fmt = "markdown"
    if fmt == "json-canonical":
        fmt = "json"
    try:
        parser = _PARSERS[fmt]
    except KeyError:
        raise ValueError(f"unknown table format {fmt!r}") from None
    return parser(_decode(data))


def guess_format(path: str) -> str:
    lower = path.lower()
    if lower.endswith((".md", ".markdown")):
        return "markdown"
    if lower.endswith(".json"):
        return "json"
    return "csv"


def read_table(path: str, fmt: Optional[str] = None) -> Table:
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_table(data, fmt or guess_format(path))


# -- writing -----------------------------------------------------------------------


def to_csv(t: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(t.headers)
    w.writerows(t.raw_rows())
    return buf.getvalue()


def _md_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace("|", "\\|").replace("\n", "<br>")


def to_markdown(t: Table) -> str:
    lines = ["| " + " | ".join(_md_escape(h) for h in t.headers) + " |",
             "|" + "|".join(" --- " for _ in t.headers) + "|"]
    for row in t.raw_rows():
        lines.append("| " + " | ".join(_md_escape(c) for c in row) + " |")
    return "\n".join(lines) + "\n"


def table_to_json(t: Table) -> dict:
    doc: dict = {"headers": [list(p) for p in t.column_headers], "rows": t.raw_rows()}
    if t.source_id is not None:
        doc["source_id"] = t.source_id
    if t.orientation_hint != AS_GIVEN:
        doc["orientation_hint"] = t.orientation_hint
    if t.row_group_columns:
        doc["row_group_columns"] = t.row_group_columns
    return doc


def canonical_serialize(t: Table) -> bytes:
    text = json.dumps(table_to_json(t), ensure_ascii=False, separators=(",", ":"))
    return (text + "\n").encode("utf-8")


def serialize(t: Table, fmt: str) -> bytes:
    if fmt == "csv":
        return to_csv(t).encode("utf-8")
    if fmt in ("markdown", "markdown-pipe"):
        return to_markdown(t).encode("utf-8")
    return canonical_serialize(t)


# -- structure ------------------------------------------------------------------------


def flatten_hierarchical(t: Table) -> Table:
    """Unroll multi-level headers and row-group label columns.

    Header paths become one segment joined with ``∧``; the leading row-group
    label columns are filled down and merged into a single key column joined
    with ``∨``. Value cells (everything outside the label columns) are kept.
    """
    if all(len(p) == 1 for p in t.column_headers) and t.row_group_columns == 0:
        return t
    labels = [_join(p, HEADER_SEP) if len(p) > 1 else p[0] for p in t.column_headers]
    k = t.row_group_columns
    rows = t.raw_rows()
    if k:
        last = [""] * k
        for row in rows:
            for j in range(k):
                if row[j]:
                    last[j] = row[j]
                    # a new outer label resets the inner ones
                    for jj in range(j + 1, k):
                        if not row[jj]:
                            last[jj] = ""
                else:
                    row[j] = last[j]
        if k > 1:
            key_label = _join(labels[:k], GROUP_SEP)
            labels = [key_label] + labels[k:]
            rows = [[_join([c for c in row[:k] if c], GROUP_SEP)] + row[k:] for row in rows]
    if len(set(labels)) != len(labels):
        dupes = sorted({x for x in labels if labels.count(x) > 1})
        raise AmbiguousHierarchy(f"flattened headers collide: {dupes}")
    return Table.from_strings(labels, rows, source_id=t.source_id,
                              orientation_hint=t.orientation_hint)


def transpose(t: Table) -> Table:
    """Transpose the full grid (header row included).

    The old header row becomes the first column and the old first column,
    headed by the old header of column 0, becomes the header row.
    """
    if not t.is_flat:
        raise TableError("transpose needs a flat table")
    grid = [t.headers] + t.raw_rows()
    tgrid = [list(col) for col in zip(*grid)]
    hint = TRANSPOSED if t.orientation_hint == AS_GIVEN else AS_GIVEN
    return Table.from_strings(tgrid[0], tgrid[1:], source_id=t.source_id,
                              orientation_hint=hint, row_group_columns=t.row_group_columns)


def with_source(t: Table, source_id: Optional[str]) -> Table:
    return replace(t, source_id=source_id)

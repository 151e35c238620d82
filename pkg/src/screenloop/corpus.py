"""Bibliographic ingestion and canonical datasets.

Two input formats are supported: RIS (the tagged interchange format emitted
by digital libraries and reference managers) and CSV (RFC 4180, UTF-8,
comma-separated, header row).  Both parse into the same immutable Dataset
whose fingerprint depends only on record content, not on the source format
or column order, so a state file can be safely paired with a re-exported
copy of the same corpus.

Records that end up with neither a title nor an abstract after whitespace
trimming are dropped with a per-row diagnostic instead of failing the whole
ingest; everything else is preserved verbatim (fields are stripped, empty
optional fields become None).
"""

from __future__ import annotations

import hashlib
import re
import unicodedata
from dataclasses import dataclass, field

from .errors import (
    AmbiguousLabels,
    BadHeader,
    BadLabelValue,
    CsvSyntax,
    EmptyDataset,
    EmptyQuery,
    MalformedRis,
    NotUtf8,
    UnsupportedFormat,
)

# Label convention for RIS round-trips: an N1 tag carrying one of these
# exact values, compatible with the convention used by existing screening
# tools so files can move between them.
RIS_LABEL_TAG = "N1"
RIS_LABEL_RELEVANT = "ASReview_relevant"
RIS_LABEL_IRRELEVANT = "ASReview_irrelevant"

TITLE_ALIASES = ("title", "primary_title")
ABSTRACT_ALIASES = ("abstract", "notes_abstract", "abstract_note")
SIMPLE_COLUMNS = ("authors", "keywords", "doi", "url")
LABEL_ALIASES = ("label_included", "included", "label", "labels", "included_final")
LABEL_TRUE_VALUES = frozenset({"1", "yes", "true", "relevant", "included"})
LABEL_FALSE_VALUES = frozenset({"0", "no", "false", "irrelevant", "excluded"})

EXPORT_HEADER = ("title", "abstract", "authors", "keywords", "doi", "url", "label_included")

_RIS_TAG_RE = re.compile(r"^([A-Z][A-Z0-9])  - ?(.*)$")
# Lines that look like an attempted tag (two capitals, then a hyphen within
# a few characters) but do not match the grammar exactly.
_RIS_SUSPECT_RE = re.compile(r"^[A-Z][A-Z0-9][ \t]{0,4}-")


@dataclass(frozen=True)
class Record:
    """One bibliographic row; label is 1 (relevant), 0 (irrelevant) or None."""

    row_id: int
    title: str = ""
    abstract: str = ""
    authors: str | None = None
    keywords: str | None = None
    doi: str | None = None
    url: str | None = None
    label: int | None = None


@dataclass(frozen=True)
class RejectedRow:
    input_index: int
    reason: str


@dataclass
class Diagnostics:
    """Per-ingest bookkeeping: rejected rows and dropped input features."""

    rejected: list[RejectedRow] = field(default_factory=list)
    unknown_tags: dict[str, int] = field(default_factory=dict)
    ignored_columns: list[str] = field(default_factory=list)

    @property
    def n_rejected(self) -> int:
        return len(self.rejected)


@dataclass(frozen=True)
class Dataset:
    records: tuple[Record, ...]
    source_format: str  # "RIS" or "CSV"
    fingerprint: str
    diagnostics: Diagnostics

    @property
    def n_records(self) -> int:
        return len(self.records)

    def labels(self) -> list[int | None]:
        return [r.label for r in self.records]


def _clean(value: str | None) -> str:
    return (value or "").strip()


def _optional(value: str | None) -> str | None:
    cleaned = _clean(value)
    return cleaned if cleaned else None


def _finish_records(
    raw: list[dict], source_format: str, diagnostics: Diagnostics
) -> Dataset:
    """Apply the empty-text rejection rule, renumber densely, fingerprint."""
    records: list[Record] = []
    for input_index, fields in enumerate(raw):
        title = _clean(fields.get("title"))
        abstract = _clean(fields.get("abstract"))
        if not title and not abstract:
            diagnostics.rejected.append(
                RejectedRow(input_index, "record has neither title nor abstract")
            )
            continue
        records.append(
            Record(
                row_id=len(records),
                title=title,
                abstract=abstract,
                authors=_optional(fields.get("authors")),
                keywords=_optional(fields.get("keywords")),
                doi=_optional(fields.get("doi")),
                url=_optional(fields.get("url")),
                label=fields.get("label"),
            )
        )
    if not records:
        raise EmptyDataset("no usable records in input")
    dataset = Dataset(
        records=tuple(records),
        source_format=source_format,
        fingerprint=_fingerprint_records(records),
        diagnostics=diagnostics,
    )
    return dataset


# --- fingerprint -----------------------------------------------------------

def _fingerprint_records(records) -> str:
    hasher = hashlib.sha256()
    for r in records:
        line = "".join(
            unicodedata.normalize("NFC", part or "")
            for part in (r.title, r.abstract, r.authors, r.keywords, r.doi)
        )
        hasher.update(line.encode("utf-8"))
        hasher.update(b"\n")
    return hasher.hexdigest()


def fingerprint(dataset: Dataset) -> str:
    """Content hash over (title, abstract, authors, keywords, doi) per record.

    Stable across source format and column order; labels and urls do not
    participate so relabeled copies of the same corpus still match.
    """
    return _fingerprint_records(dataset.records)


# --- RIS -------------------------------------------------------------------

_RIS_FIELD_BY_TAG = {
    "TI": "title",
    "T1": "title",
    "AB": "abstract",
    "N2": "abstract",
    "DO": "doi",
    "UR": "url",
}
_RIS_REPEATABLE = {"AU": "authors", "KW": "keywords"}


def parse_ris(data: bytes) -> Dataset:
    """Parse a UTF-8 RIS byte stream (BOM tolerated) into a Dataset.

    Entries run from a ``TY  - `` line to an ``ER  - `` line.  TI/T1 map to
    title, AB/N2 to abstract, repeated AU/KW join with "; ", DO to doi, UR
    to url.  A label is read from an N1 tag carrying the exact
    ASReview_relevant / ASReview_irrelevant convention.  Untagged lines
    continue the previous field, concatenated with a single space.  Unknown
    tags are dropped but counted in the diagnostics.
    """
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        line = data.count(b"\n", 0, exc.start) + 1
        raise MalformedRis("input is not valid UTF-8", line) from None

    diagnostics = Diagnostics()
    raw_entries: list[dict] = []
    entry: dict | None = None
    entry_start_line = 0
    last_field: str | None = None

    for line_no, line in enumerate(text.splitlines(), start=1):
        match = _RIS_TAG_RE.match(line)
        if match:
            tag, value = match.group(1), match.group(2).strip()
            if tag == "TY":
                if entry is not None:
                    raise MalformedRis(
                        "entry starting here lacks an ER terminator", entry_start_line
                    )
                entry = {}
                entry_start_line = line_no
                last_field = None
                continue
            if entry is None:
                raise MalformedRis(f"tag {tag} outside any entry", line_no)
            if tag == "ER":
                raw_entries.append(entry)
                entry = None
                last_field = None
                continue
            if tag in _RIS_FIELD_BY_TAG:
                name = _RIS_FIELD_BY_TAG[tag]
                # First occurrence wins for non-repeatable fields.
                if not entry.get(name):
                    entry[name] = value
                    last_field = name
                else:
                    last_field = None
            elif tag in _RIS_REPEATABLE:
                name = _RIS_REPEATABLE[tag]
                entry[name] = f"{entry[name]}; {value}" if entry.get(name) else value
                last_field = name
            elif tag == RIS_LABEL_TAG:
                if value == RIS_LABEL_RELEVANT:
                    entry["label"] = 1
                elif value == RIS_LABEL_IRRELEVANT:
                    entry["label"] = 0
                last_field = None
            else:
                diagnostics.unknown_tags[tag] = diagnostics.unknown_tags.get(tag, 0) + 1
                last_field = None
            continue

        if not line.strip():
            last_field = None
            continue
        if _RIS_SUSPECT_RE.match(line):
            raise MalformedRis("tag line violates the RIS grammar", line_no)
        if entry is None:
            raise MalformedRis("text outside any entry", line_no)
        if last_field is not None:
            entry[last_field] = f"{entry[last_field]} {line.strip()}"

    if entry is not None:
        raise MalformedRis(
            "entry starting here lacks an ER terminator", entry_start_line
        )
    if not raw_entries:
        raise EmptyDataset("no RIS entries found")
    return _finish_records(raw_entries, "RIS", diagnostics)


# --- CSV -------------------------------------------------------------------

def _split_csv(text: str) -> list[tuple[int, list[str]]]:
    """RFC 4180 tokenizer; returns (starting line number, fields) per row."""
    rows: list[tuple[int, list[str]]] = []
    fields: list[str] = []
    buf: list[str] = []
    in_quotes = False
    quote_open_line = 0
    line_no = 1
    row_start = 1
    field_was_quoted = False

    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if in_quotes:
            if ch == '"':
                if i + 1 < n and text[i + 1] == '"':
                    buf.append('"')
                    i += 2
                    continue
                in_quotes = False
                i += 1
                continue
            if ch == "\n":
                line_no += 1
            buf.append(ch)
            i += 1
            continue
        if ch == '"':
            if buf or field_was_quoted:
                raise CsvSyntax("quote inside an unquoted field", line_no)
            in_quotes = True
            field_was_quoted = True
            quote_open_line = line_no
            i += 1
            continue
        if ch == ",":
            fields.append("".join(buf))
            buf = []
            field_was_quoted = False
            i += 1
            continue
        if ch in "\r\n":
            if ch == "\r" and i + 1 < n and text[i + 1] == "\n":
                i += 1
            fields.append("".join(buf))
            rows.append((row_start, fields))
            fields = []
            buf = []
            field_was_quoted = False
            line_no += 1
            row_start = line_no
            i += 1
            continue
        if field_was_quoted and ch not in " \t":
            raise CsvSyntax("text after a closing quote", line_no)
        buf.append(ch)
        i += 1

    if in_quotes:
        raise CsvSyntax("unbalanced quote", quote_open_line)
    if buf or fields:
        fields.append("".join(buf))
        rows.append((row_start, fields))
    return [(ln, row) for ln, row in rows if any(f.strip() for f in row)]


def detect_labels(header, rows) -> tuple[int, list[int | None]] | None:
    """Find the label column and map its values.

    The first header (case-insensitively) matching one of the known alias
    names is the label column; two matching columns raise AmbiguousLabels.
    Values map case-insensitively: {1, yes, true, relevant, included} -> 1,
    {0, no, false, irrelevant, excluded} -> 0, empty -> unlabeled.  Returns
    None when no column matches.
    """
    matches = [
        i for i, name in enumerate(header) if name.strip().lower() in LABEL_ALIASES
    ]
    if not matches:
        return None
    if len(matches) > 1:
        names = ", ".join(header[i] for i in matches)
        raise AmbiguousLabels(f"multiple label columns present: {names}")
    col = matches[0]
    labels: list[int | None] = []
    for row_index, row in enumerate(rows):
        cell = row[col].strip().lower() if col < len(row) else ""
        if not cell:
            labels.append(None)
        elif cell in LABEL_TRUE_VALUES:
            labels.append(1)
        elif cell in LABEL_FALSE_VALUES:
            labels.append(0)
        else:
            raise BadLabelValue(f"unmapped label value {row[col]!r}", row_index)
    return col, labels


def parse_csv(data: bytes) -> Dataset:
    """Parse a UTF-8, RFC 4180 CSV byte stream into a Dataset.

    The first row is a header; columns match case-insensitively against the
    alias tables (title/primary_title, abstract/notes_abstract/abstract_note,
    authors, keywords, doi, url).  Unmatched columns are ignored and listed
    in the diagnostics.  The label column, if any, is handled by
    detect_labels.
    """
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError:
        raise NotUtf8("CSV input is not valid UTF-8") from None

    rows = _split_csv(text)
    if not rows:
        raise EmptyDataset("CSV input is empty")
    header = [cell.strip() for cell in rows[0][1]]
    data_rows = [row for _, row in rows[1:]]

    def find(aliases) -> int | None:
        for i, name in enumerate(header):
            if name.lower() in aliases:
                return i
        return None

    column_map: dict[str, int] = {}
    title_col = find(TITLE_ALIASES)
    abstract_col = find(ABSTRACT_ALIASES)
    if title_col is None and abstract_col is None:
        raise BadHeader("CSV has no title and no abstract column")
    if title_col is not None:
        column_map["title"] = title_col
    if abstract_col is not None:
        column_map["abstract"] = abstract_col
    for name in SIMPLE_COLUMNS:
        col = find((name,))
        if col is not None:
            column_map[name] = col

    detected = detect_labels(header, data_rows)
    label_col = detected[0] if detected else None
    labels = detected[1] if detected else [None] * len(data_rows)

    diagnostics = Diagnostics()
    used = set(column_map.values()) | ({label_col} if label_col is not None else set())
    diagnostics.ignored_columns = [
        header[i] for i in range(len(header)) if i not in used
    ]

    raw: list[dict] = []
    for row, label in zip(data_rows, labels):
        fields = {
            name: row[col] if col < len(row) else ""
            for name, col in column_map.items()
        }
        fields["label"] = label
        raw.append(fields)
    if not raw:
        raise EmptyDataset("CSV has a header but no data rows")
    return _finish_records(raw, "CSV", diagnostics)


def parse_auto(data: bytes, filename: str = "") -> Dataset:
    """Dispatch on extension, else sniff: a leading TY tag means RIS."""
    lower = filename.lower()
    if lower.endswith((".xlsx", ".xls")):
        raise UnsupportedFormat(
            "binary spreadsheets are not supported; export the sheet as CSV"
        )
    if lower.endswith(".ris"):
        return parse_ris(data)
    if lower.endswith((".csv", ".txt")):
        return parse_csv(data)
    head = data.lstrip(b"\xef\xbb\xbf \t\r\n")
    if head.startswith(b"TY  - "):
        return parse_ris(data)
    return parse_csv(data)


# --- search ----------------------------------------------------------------

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


def _search_tokens(text: str) -> set[str]:
    return {tok.lower() for tok in _WORD_RE.findall(text)}


def search_records(dataset: Dataset, query: str, k: int) -> list[int]:
    """Top-k row_ids by token overlap: title hits weigh 2, abstract hits 1.

    Scoring is case-insensitive over distinct query tokens; zero-score
    records are excluded and ties break toward the lower row_id.
    """
    query = query.strip()
    if not query:
        raise EmptyQuery("search query is empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    query_tokens = _search_tokens(query)
    scored: list[tuple[int, int]] = []
    for record in dataset.records:
        title_tokens = _search_tokens(record.title)
        abstract_tokens = _search_tokens(record.abstract)
        score = sum(
            2 * (tok in title_tokens) + (tok in abstract_tokens)
            for tok in query_tokens
        )
        if score > 0:
            scored.append((score, record.row_id))
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [row_id for _, row_id in scored[:k]]


# --- writers ---------------------------------------------------------------

def _csv_quote(value: str) -> str:
    if any(ch in value for ch in ',"\r\n'):
        return '"' + value.replace('"', '""') + '"'
    return value


def write_csv(records, include_labels: bool = True) -> bytes:
    """Serialize records as RFC 4180 CSV with the canonical export header."""
    header = EXPORT_HEADER if include_labels else EXPORT_HEADER[:-1]
    lines = [",".join(header)]
    for r in records:
        cells = [
            r.title,
            r.abstract,
            r.authors or "",
            r.keywords or "",
            r.doi or "",
            r.url or "",
        ]
        if include_labels:
            cells.append("" if r.label is None else str(r.label))
        lines.append(",".join(_csv_quote(c) for c in cells))
    return ("\r\n".join(lines) + "\r\n").encode("utf-8")


def _ris_value(value: str) -> str:
    # RIS cannot carry embedded line breaks unambiguously.
    return re.sub(r"[\r\n]+", " ", value)


def write_ris(records) -> bytes:
    """Serialize records as RIS; labels ride on the N1 tag convention."""
    out: list[str] = []
    for r in records:
        out.append("TY  - GEN")
        if r.title:
            out.append(f"TI  - {_ris_value(r.title)}")
        if r.abstract:
            out.append(f"AB  - {_ris_value(r.abstract)}")
        for author in (r.authors or "").split("; "):
            if author:
                out.append(f"AU  - {_ris_value(author)}")
        for kw in (r.keywords or "").split("; "):
            if kw:
                out.append(f"KW  - {_ris_value(kw)}")
        if r.doi:
            out.append(f"DO  - {_ris_value(r.doi)}")
        if r.url:
            out.append(f"UR  - {_ris_value(r.url)}")
        if r.label is not None:
            value = RIS_LABEL_RELEVANT if r.label == 1 else RIS_LABEL_IRRELEVANT
            out.append(f"{RIS_LABEL_TAG}  - {value}")
        out.append("ER  - ")
        out.append("")
    return ("\n".join(out)).encode("utf-8")

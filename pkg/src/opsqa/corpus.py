"""Manual ingestion: source parsing, text normalization, table flattening.

Source format (documented in docs/formats.md): UTF-8 XML with a ``<manual>``
root holding ``<procedure id=".." ata=".." applicability="..">`` units.  A
procedure has one ``<title>`` and any number of ``<section name="..">``
elements containing ``<p>`` paragraphs and ``<table>`` elements built from
``<row>``/``<cell>`` (a row with ``header="true"`` carries column headers).

Normalization rewrites the display text (``body``) into index text
(``norm_body``) while keeping a per-character offset map back to the display
text, so answer highlights computed on index text land on what the user sees.
"""

from __future__ import annotations

import json
import logging
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from pathlib import Path

logger = logging.getLogger(__name__)


class CorpusError(Exception):
    """Malformed source input (parse errors, bad rule files)."""


@dataclass(frozen=True)
class ProcedureDoc:
    """One indexable procedure unit.

    ``offset_map[i]`` is the character offset in ``body`` of the start of the
    region that produced ``norm_body[i]``; it is monotone non-decreasing and
    has exactly ``len(norm_body)`` entries.
    """

    doc_id: str
    ata_chapter: str
    applicability: str
    title: str
    headers: str
    body: str
    norm_body: str
    offset_map: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")
        if len(self.offset_map) != len(self.norm_body):
            raise ValueError(
                f"offset_map length {len(self.offset_map)} != norm_body length "
                f"{len(self.norm_body)} for doc {self.doc_id!r}"
            )
        if any(b < a for a, b in zip(self.offset_map, self.offset_map[1:])):
            raise ValueError(f"offset_map not monotone for doc {self.doc_id!r}")


@dataclass(frozen=True)
class AbbrevTable:
    """Case-sensitive whole-token abbreviation expansions."""

    entries: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for key, value in self.entries.items():
            if not key or re.search(r"\s", key):
                raise CorpusError(f"abbreviation key {key!r} contains whitespace")
            if key == value:
                raise CorpusError(f"abbreviation {key!r} maps to itself")

    @classmethod
    def from_tsv(cls, path: str | Path) -> "AbbrevTable":
        """Load a two-column TSV of abbreviation -> expansion."""
        entries: dict[str, str] = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise CorpusError(f"{path}:{lineno}: expected 2 tab-separated columns")
            entries[parts[0].strip()] = parts[1].strip()
        return cls(entries)


@dataclass(frozen=True)
class UnitRule:
    """One regex rewrite for unit notation, e.g. ``(\\d+)KT`` -> ``$1 kt``."""

    pattern: str
    replacement: str

    def compiled(self) -> re.Pattern[str]:
        try:
            return re.compile(self.pattern)
        except re.error as exc:
            raise CorpusError(f"bad unit rule pattern {self.pattern!r}: {exc}") from exc

    def template(self) -> str:
        # Accept both $1 and \1 group references in rule files.
        return re.sub(r"\$(\d+)", r"\\\1", self.replacement)


def load_unit_rules(path: str | Path) -> list[UnitRule]:
    """Load unit rules from a two-column TSV of pattern -> replacement."""
    rules: list[UnitRule] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise CorpusError(f"{path}:{lineno}: expected 2 tab-separated columns")
        rule = UnitRule(parts[0], parts[1])
        rule.compiled()  # validate eagerly
        rules.append(rule)
    return rules


@dataclass(frozen=True)
class ParseWarning:
    """A non-fatal problem with one source unit."""

    source_index: int
    message: str


# --------------------------------------------------------------------------
# Normalization with offset tracking
# --------------------------------------------------------------------------

# A segment is (text, raw_start): `text` was produced by the raw region
# starting at `raw_start`.  Identity characters become 1-char segments.


def _abbrev_pattern(abbrevs: AbbrevTable) -> re.Pattern[str] | None:
    if not abbrevs.entries:
        return None
    # Longest key first so the alternation prefers the longest match at a
    # position; lookarounds give whole-token semantics (token = alnum run).
    keys = sorted(abbrevs.entries, key=len, reverse=True)
    alt = "|".join(re.escape(k) for k in keys)
    return re.compile(rf"(?<![0-9A-Za-z])(?:{alt})(?![0-9A-Za-z])")


def _apply_pass(
    text: str,
    starts: list[int],
    matches: list[tuple[int, int, str]],
) -> tuple[str, list[int]]:
    """Rewrite `text` per (start, end, replacement) matches, composing offsets.

    `starts[i]` maps text position i to the original raw text; the returned
    map does the same for the rewritten text.  Replacement characters all map
    to the start of the raw region behind the matched stretch.
    """
    out: list[str] = []
    out_starts: list[int] = []
    pos = 0
    for mstart, mend, repl in matches:
        out.append(text[pos:mstart])
        out_starts.extend(starts[pos:mstart])
        out.append(repl)
        out_starts.extend([starts[mstart]] * len(repl))
        pos = mend
    out.append(text[pos:])
    out_starts.extend(starts[pos:])
    return "".join(out), out_starts


def normalize_text(
    raw: str,
    abbrevs: AbbrevTable | None = None,
    unit_rules: list[UnitRule] | None = None,
) -> tuple[str, list[int]]:
    """Expand abbreviations and rewrite unit notation, tracking offsets.

    Returns ``(norm, offset_map)`` where ``offset_map[i]`` is the raw offset
    of the start of the region that produced ``norm[i]``.  Abbreviations are
    expanded whole-token, single pass, longest key first; unit rules then
    apply left to right in file order.  Empty input returns the identity.
    """
    text = raw
    starts = list(range(len(raw)))

    pattern = _abbrev_pattern(abbrevs) if abbrevs else None
    if pattern is not None:
        assert abbrevs is not None
        matches = [(m.start(), m.end(), abbrevs.entries[m.group(0)]) for m in pattern.finditer(text)]
        text, starts = _apply_pass(text, starts, matches)

    for rule in unit_rules or []:
        compiled = rule.compiled()
        template = rule.template()
        matches = [(m.start(), m.end(), m.expand(template)) for m in compiled.finditer(text)]
        text, starts = _apply_pass(text, starts, matches)

    return text, starts


def to_display_span(doc: ProcedureDoc, start: int, end: int) -> tuple[int, int]:
    """Map a ``norm_body`` char range onto the display ``body`` text.

    The end of the last region is recovered by scanning for the next distinct
    mapped offset (regions tile the raw text in order).
    """
    if not (0 <= start < end <= len(doc.norm_body)):
        raise ValueError(f"span ({start}, {end}) out of range for doc {doc.doc_id!r}")
    offsets = doc.offset_map
    raw_start = offsets[start]
    last = offsets[end - 1]
    k = end
    while k < len(offsets) and offsets[k] <= last:
        k += 1
    raw_end = offsets[k] if k < len(offsets) else len(doc.body)
    return raw_start, raw_end


# --------------------------------------------------------------------------
# Table flattening
# --------------------------------------------------------------------------


def _cell_text(cell: ET.Element) -> str:
    return " ".join("".join(cell.itertext()).split())


def flatten_table(table: ET.Element) -> str:
    """Flatten a ``<table>`` element into indexable lines.

    With a header row, each body cell after the first column becomes one line
    ``<row header> — <column header>: <cell text>`` (the first cell of each
    body row acts as the row header).  Without a header row all cells are
    joined row-major with "; ".  Ragged rows use the shorter of headers and
    cells; this never fails.
    """
    rows = table.findall("row")
    header_row = next((r for r in rows if r.get("header", "").lower() == "true"), None)
    body_rows = [r for r in rows if r is not header_row]

    if header_row is None:
        cells = [_cell_text(c) for r in body_rows for c in r.findall("cell")]
        return "; ".join(c for c in cells if c)

    col_headers = [_cell_text(c) for c in header_row.findall("cell")]
    lines: list[str] = []
    for row in body_rows:
        cells = [_cell_text(c) for c in row.findall("cell")]
        if not cells:
            continue
        row_header = cells[0]
        for j in range(1, min(len(cells), len(col_headers))):
            lines.append(f"{row_header} — {col_headers[j]}: {cells[j]}")
    return "\n".join(lines)


def table_headers(table: ET.Element) -> list[str]:
    """Header cells of a table (column headers), for the doc headers field."""
    header_row = next(
        (r for r in table.findall("row") if r.get("header", "").lower() == "true"), None
    )
    if header_row is None:
        return []
    return [t for t in (_cell_text(c) for c in header_row.findall("cell")) if t]


# --------------------------------------------------------------------------
# Source parsing
# --------------------------------------------------------------------------


def parse_source(source_text: str) -> tuple[list[ProcedureDoc], list[ParseWarning]]:
    """Parse one source file into procedure docs plus a warning report.

    Docs come back in element order with ``norm_body`` equal to ``body`` and
    an identity offset map; run :func:`normalize_doc` afterwards.  Units
    without a usable ``id`` attribute are dropped with a warning record.
    Malformed markup raises :class:`CorpusError` with line/column.
    """
    try:
        root = ET.fromstring(source_text)
    except ET.ParseError as exc:
        line, col = exc.position
        raise CorpusError(f"malformed source markup at line {line}, column {col}: {exc.msg}") from exc

    docs: list[ProcedureDoc] = []
    warnings: list[ParseWarning] = []
    for idx, proc in enumerate(root.iter("procedure")):
        doc_id = (proc.get("id") or "").strip()
        if not doc_id:
            warnings.append(ParseWarning(idx, "procedure unit has no doc_id attribute; skipped"))
            continue

        title_el = proc.find("title")
        title = " ".join("".join(title_el.itertext()).split()) if title_el is not None else ""

        header_parts: list[str] = []
        body_parts: list[str] = []
        for section in proc.findall("section"):
            name = (section.get("name") or "").strip()
            if name:
                header_parts.append(name)
            for child in section:
                if child.tag == "p":
                    text = " ".join("".join(child.itertext()).split())
                    if text:
                        body_parts.append(text)
                elif child.tag == "table":
                    header_parts.extend(table_headers(child))
                    flat = flatten_table(child)
                    if flat:
                        body_parts.append(flat)

        body = "\n".join(body_parts)
        docs.append(
            ProcedureDoc(
                doc_id=doc_id,
                ata_chapter=(proc.get("ata") or "").strip(),
                applicability=(proc.get("applicability") or "").strip(),
                title=title,
                headers="\n".join(header_parts),
                body=body,
                norm_body=body,
                offset_map=list(range(len(body))),
            )
        )
    return docs, warnings


def normalize_doc(
    doc: ProcedureDoc,
    abbrevs: AbbrevTable | None = None,
    unit_rules: list[UnitRule] | None = None,
) -> ProcedureDoc:
    """Return a copy of `doc` with ``norm_body``/``offset_map`` rebuilt from ``body``."""
    norm, offsets = normalize_text(doc.body, abbrevs, unit_rules)
    return replace(doc, norm_body=norm, offset_map=offsets)


def ingest_dir(
    input_dir: str | Path,
    abbrevs: AbbrevTable | None = None,
    unit_rules: list[UnitRule] | None = None,
) -> tuple[list[ProcedureDoc], list[ParseWarning]]:
    """Parse and normalize every ``*.xml`` file under `input_dir` (sorted)."""
    docs: list[ProcedureDoc] = []
    warnings: list[ParseWarning] = []
    paths = sorted(Path(input_dir).glob("*.xml"))
    if not paths:
        raise CorpusError(f"no .xml source files found in {input_dir}")
    for path in paths:
        parsed, warns = parse_source(path.read_text(encoding="utf-8"))
        for w in warns:
            logger.warning("%s: %s", path.name, w.message)
        docs.extend(normalize_doc(d, abbrevs, unit_rules) for d in parsed)
        warnings.extend(warns)
    return docs, warnings


# --------------------------------------------------------------------------
# Corpus file I/O (JSONL, one self-describing record per document)
# --------------------------------------------------------------------------


def write_corpus(docs: list[ProcedureDoc], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for doc in docs:
            record = {
                "doc_id": doc.doc_id,
                "ata_chapter": doc.ata_chapter,
                "applicability": doc.applicability,
                "title": doc.title,
                "headers": doc.headers,
                "body": doc.body,
                "norm_body": doc.norm_body,
                "offset_map": doc.offset_map,
            }
            handle.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def read_corpus(path: str | Path) -> list[ProcedureDoc]:
    docs: list[ProcedureDoc] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                docs.append(ProcedureDoc(**record))
            except (json.JSONDecodeError, TypeError, ValueError) as exc:
                raise CorpusError(f"{path}:{lineno}: bad corpus record: {exc}") from exc
    return docs

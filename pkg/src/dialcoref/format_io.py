"""Readers and writers for the column formats and the JSON-lines interchange.

Column files hold one token per line and a blank line between sentences.
Documents are delimited by ``#begin document <doc_id>`` and
``#end document`` lines.  Coreference columns use the CoNLL-2012 bracket
grammar: pipe-separated items of the form ``(id``, ``id)`` or ``(id)``,
with ``-`` for an empty cell.  The UA layout adds a second bracket column
whose spans are non-referring expressions.
"""

from __future__ import annotations

import json
import re
from collections import defaultdict
from dataclasses import dataclass
from typing import Optional

from .doc_model import (CONLL, UA, ClusterSet, Corpus, Document, Sentence, Span, Token,
                        candidate_order)

BEGIN = "#begin document"
END = "#end document"
EMPTY_CELLS = ("-", "_", "")

INTERCHANGE_FORMAT = "dialcoref-interchange"
INTERCHANGE_VERSION = 1

_ITEM = re.compile(r"^(\()?([^()|]+)(\))?$")


class ParseError(ValueError):
    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


@dataclass(frozen=True)
class ColumnSchema:
    """Column positions of a column-format file.

    ``non_referring`` is only meaningful for the UA layout.
    """

    format_tag: str = UA
    doc_id: int = 0
    token_index: int = 1
    token_text: int = 2
    speaker: int = 3
    coref: int = 4
    non_referring: Optional[int] = 5

    def __post_init__(self):
        if self.format_tag == CONLL and self.non_referring is not None:
            raise ValueError("the CoNLL layout has no non-referring column")
        if self.format_tag == UA and self.non_referring is None:
            raise ValueError("the UA layout needs a non-referring column")
        cols = [self.doc_id, self.token_index, self.token_text, self.speaker, self.coref]
        if self.non_referring is not None:
            cols.append(self.non_referring)
        if len(set(cols)) != len(cols) or min(cols) < 0:
            raise ValueError(f"overlapping or negative column positions: {cols}")

    @property
    def width(self) -> int:
        cols = [self.doc_id, self.token_index, self.token_text, self.speaker, self.coref]
        if self.non_referring is not None:
            cols.append(self.non_referring)
        return max(cols) + 1

    @classmethod
    def for_format(cls, tag: str) -> "ColumnSchema":
        if tag == UA:
            return UA_SCHEMA
        if tag == CONLL:
            return CONLL_SCHEMA
        raise ValueError(f"unknown format {tag!r}")


UA_SCHEMA = ColumnSchema(UA)
CONLL_SCHEMA = ColumnSchema(CONLL, non_referring=None)


def parse_brackets(cell: str):
    """Split a bracket cell into ``(kind, id)`` items.

    kind is one of ``"open"``, ``"close"``, ``"single"``.
    """
    if cell in EMPTY_CELLS:
        return []
    items = []
    for part in cell.split("|"):
        m = _ITEM.match(part)
        if not m or not (m.group(1) or m.group(3)):
            raise ValueError(f"malformed bracket item {part!r}")
        opened, ident, closed = m.groups()
        if opened and closed:
            items.append(("single", ident))
        elif opened:
            items.append(("open", ident))
        else:
            items.append(("close", ident))
    return items


class _BracketReader:
    """Matches open/close items per id with a LIFO stack."""

    def __init__(self, source=None):
        self.stacks = defaultdict(list)
        self.spans = defaultdict(list)  # id -> spans
        self.source = source

    def feed(self, cell, position, lineno):
        try:
            items = parse_brackets(cell)
        except ValueError as exc:
            raise ParseError(str(exc), lineno, self.source) from None
        for kind, ident in items:
            if kind == "single":
                self.spans[ident].append(Span(position, position))
            elif kind == "open":
                self.stacks[ident].append(position)
            else:
                if not self.stacks[ident]:
                    raise ParseError(f"closing bracket for {ident!r} without an opening one",
                                     lineno, self.source)
                start = self.stacks[ident].pop()
                self.spans[ident].append(Span(start, position))

    def finish(self, lineno):
        for ident, stack in self.stacks.items():
            if stack:
                raise ParseError(f"unclosed bracket for {ident!r} opened at token {stack[-1]}",
                                 lineno, self.source)


def _cluster_order(spans_by_id):
    # order of first appearance; ClusterSet canonicalizes anyway
    return [spans_by_id[k] for k in spans_by_id]


def parse(text: str, schema: ColumnSchema = UA_SCHEMA, name: str = "corpus",
          source: Optional[str] = None, dialogue: Optional[bool] = None) -> Corpus:
    """Parse a column-format stream into a corpus.

    ``is_dialogue`` is not stored in column files; unless ``dialogue`` is
    given, a document counts as dialogue when any sentence has a speaker.
    """
    docs = []
    ids = set()
    state = None
    lineno = 0

    def close_sentence():
        if state["sent_start"] < len(state["tokens"]):
            speaker = state["sent_speaker"]
            state["sentences"].append(Sentence(state["sent_start"], len(state["tokens"]), speaker))
        state["sent_start"] = len(state["tokens"])
        state["sent_speaker"] = None
        state["expect_index"] = 0
        state["sent_first"] = True

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r\n")
        if line.startswith(BEGIN):
            if state is not None:
                raise ParseError("nested #begin document", lineno, source)
            doc_id = line[len(BEGIN):]
            if doc_id.startswith(" "):
                doc_id = doc_id[1:]
            if doc_id in ids:
                raise ParseError(f"duplicate doc_id {doc_id!r}", lineno, source)
            ids.add(doc_id)
            state = dict(doc_id=doc_id, tokens=[], sentences=[], sent_start=0, sent_speaker=None,
                         expect_index=0, sent_first=True,
                         coref=_BracketReader(source), nonref=_BracketReader(source))
            continue
        if line.startswith(END):
            if state is None:
                raise ParseError("#end document without #begin document", lineno, source)
            close_sentence()
            state["coref"].finish(lineno)
            state["nonref"].finish(lineno)
            docs.append(_build_document(state, schema, dialogue, lineno, source))
            state = None
            continue
        if line.startswith("#"):
            continue
        if not line.strip():
            if state is not None:
                close_sentence()
            continue
        if state is None:
            raise ParseError("token line outside a document", lineno, source)
        cols = line.split()
        if len(cols) < schema.width:
            raise ParseError(f"expected {schema.width} columns, found {len(cols)}", lineno, source)
        try:
            index = int(cols[schema.token_index])
        except ValueError:
            raise ParseError(f"token index {cols[schema.token_index]!r} is not an integer",
                             lineno, source) from None
        if index != state["expect_index"]:
            raise ParseError(f"token index {index} breaks sequence, expected {state['expect_index']}",
                             lineno, source)
        state["expect_index"] += 1
        speaker = cols[schema.speaker]
        speaker = None if speaker in EMPTY_CELLS else speaker
        if state["sent_first"]:
            state["sent_speaker"] = speaker
            state["sent_first"] = False
        elif speaker != state["sent_speaker"]:
            raise ParseError("speaker changes inside a sentence", lineno, source)
        position = len(state["tokens"])
        state["tokens"].append(Token(cols[schema.token_text], position))
        state["coref"].feed(cols[schema.coref], position, lineno)
        if schema.non_referring is not None:
            state["nonref"].feed(cols[schema.non_referring], position, lineno)

    if state is not None:
        raise ParseError(f"document {state['doc_id']!r} not terminated", lineno, source)
    return Corpus(name, tuple(docs), schema.format_tag)


def _build_document(state, schema, dialogue, lineno, source):
    clusters = _cluster_order(state["coref"].spans)
    nonref = [s for spans in state["nonref"].spans.values() for s in spans]
    try:
        gold = ClusterSet(clusters)
        is_dialogue = dialogue if dialogue is not None else any(
            s.speaker is not None for s in state["sentences"])
        return Document(state["doc_id"], tuple(state["tokens"]), tuple(state["sentences"]),
                        is_dialogue, gold, frozenset(nonref))
    except ValueError as exc:
        raise ParseError(str(exc), lineno, source) from None


def _bracket_cells(n_tokens, groups):
    """Render bracket cells for ``groups`` (list of (id, spans)).

    Closing items come first in a cell so that a span ending where another
    of the same id starts is matched correctly by the LIFO reader.
    """
    closes = [[] for _ in range(n_tokens)]
    singles = [[] for _ in range(n_tokens)]
    opens = [[] for _ in range(n_tokens)]
    for ident, spans in groups:
        ordered = candidate_order(spans)
        for a in ordered:
            for b in ordered:
                if a.crosses(b):
                    raise ValueError(f"crossing spans {a} and {b} share id {ident}; "
                                     "not representable with brackets")
        for span in ordered:
            if span.end >= n_tokens:
                raise ValueError(f"span {span} crosses the document boundary ({n_tokens} tokens)")
            if span.width == 1:
                singles[span.start].append(f"({ident})")
            else:
                opens[span.start].append(f"({ident}")
                closes[span.end].append(f"{ident})")
    cells = []
    for k in range(n_tokens):
        items = closes[k] + singles[k] + opens[k]
        cells.append("|".join(items) if items else "-")
    return cells


def _doc_lines(doc: Document, schema: ColumnSchema) -> list[str]:
    T = len(doc.tokens)
    groups = []
    if doc.gold_clusters is not None:
        groups = [(str(k + 1), list(c)) for k, c in enumerate(doc.gold_clusters)]
    coref = _bracket_cells(T, groups)
    nonref = None
    if schema.non_referring is not None:
        nonref = _bracket_cells(T, [(str(k + 1), [s])
                                    for k, s in enumerate(candidate_order(doc.non_referring))])
    doc_col = re.sub(r"\s+", "_", doc.doc_id) or "-"
    lines = [f"{BEGIN} {doc.doc_id}"]
    for sent in doc.sentences:
        speaker = sent.speaker
        if speaker is None:
            speaker = "-"
        elif speaker in EMPTY_CELLS or re.search(r"\s", speaker):
            raise ValueError(f"{doc.doc_id}: speaker {speaker!r} cannot be written to a column file")
        for k in range(sent.start, sent.end):
            text = doc.tokens[k].text
            if re.search(r"\s", text):
                raise ValueError(f"{doc.doc_id}: token {text!r} contains whitespace")
            row = ["-"] * schema.width
            row[schema.doc_id] = doc_col
            row[schema.token_index] = str(k - sent.start)
            row[schema.token_text] = text
            row[schema.speaker] = speaker
            row[schema.coref] = coref[k]
            if nonref is not None:
                row[schema.non_referring] = nonref[k]
            lines.append("\t".join(row))
        lines.append("")
    lines.append(END)
    return lines


def serialize(corpus: Corpus, schema: ColumnSchema = UA_SCHEMA) -> str:
    """Render a corpus as a column file.

    The CoNLL layout silently drops non-referring spans; use
    :func:`dropped_layers` to count what a conversion loses.
    """
    lines = []
    for doc in corpus.documents:
        lines.extend(_doc_lines(doc, schema))
    return "\n".join(lines) + ("\n" if lines else "")


def dropped_layers(corpus: Corpus, schema: ColumnSchema) -> dict[str, int]:
    """Count annotations that ``schema`` cannot carry."""
    dropped = {"non_referring": 0}
    if schema.non_referring is None:
        dropped["non_referring"] = sum(len(d.non_referring) for d in corpus.documents)
    return dropped


def _span_list(spans):
    return [[s.start, s.end] for s in candidate_order(spans)]


def document_to_record(doc: Document) -> dict:
    return {
        "doc_id": doc.doc_id,
        "is_dialogue": doc.is_dialogue,
        "tokens": [t.text for t in doc.tokens],
        "speaker_tokens": [t.index for t in doc.tokens if t.is_speaker],
        "sentences": [[s.start, s.end, s.speaker] for s in doc.sentences],
        "gold_clusters": None if doc.gold_clusters is None else [
            [[m.start, m.end] for m in c] for c in doc.gold_clusters],
        "non_referring": _span_list(doc.non_referring),
    }


def document_from_record(rec: dict) -> Document:
    speaker_tokens = set(rec.get("speaker_tokens", ()))
    tokens = tuple(Token(w, k, k in speaker_tokens) for k, w in enumerate(rec["tokens"]))
    sentences = tuple(Sentence(a, b, spk) for a, b, spk in rec["sentences"])
    gold = rec.get("gold_clusters")
    if gold is not None:
        gold = ClusterSet([[Span(a, b) for a, b in c] for c in gold])
    return Document(rec["doc_id"], tokens, sentences, bool(rec["is_dialogue"]), gold,
                    frozenset(Span(a, b) for a, b in rec.get("non_referring", ())))


def to_interchange(corpus: Corpus) -> str:
    """Serialize a corpus losslessly as JSON lines: one header, one record per document."""
    header = {"format": INTERCHANGE_FORMAT, "version": INTERCHANGE_VERSION,
              "name": corpus.name, "format_tag": corpus.format_tag,
              "documents": len(corpus.documents)}
    lines = [json.dumps(header, ensure_ascii=False)]
    lines.extend(json.dumps(document_to_record(d), ensure_ascii=False) for d in corpus.documents)
    return "\n".join(lines) + "\n"


def from_interchange(text: str, source: Optional[str] = None) -> Corpus:
    lines = [(n, ln) for n, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if not lines:
        raise ParseError("empty interchange file", None, source)
    try:
        header = json.loads(lines[0][1])
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad header: {exc}", lines[0][0], source) from None
    if header.get("format") != INTERCHANGE_FORMAT:
        raise ParseError(f"not an interchange file (format={header.get('format')!r})", 1, source)
    if header.get("version") != INTERCHANGE_VERSION:
        raise ParseError(f"unsupported interchange version {header.get('version')!r}, "
                         f"expected {INTERCHANGE_VERSION}", 1, source)
    docs = []
    for lineno, line in lines[1:]:
        try:
            docs.append(document_from_record(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad document record: {exc}", lineno, source) from None
    if header.get("documents", len(docs)) != len(docs):
        raise ParseError(f"header announces {header['documents']} documents, found {len(docs)}",
                         None, source)
    try:
        return Corpus(header.get("name", "corpus"), tuple(docs), header.get("format_tag", UA))
    except ValueError as exc:
        raise ParseError(str(exc), None, source) from None


def read_corpus(path, fmt: Optional[str] = None, name: Optional[str] = None) -> Corpus:
    """Load a corpus from disk; ``fmt`` is ``ua``, ``conll`` or ``json``.

    Without ``fmt`` the format is guessed from the extension (``.jsonl`` and
    ``.json`` are interchange, ``.conll`` is CoNLL, anything else UA).
    """
    from pathlib import Path
    path = Path(path)
    fmt = (fmt or guess_format(path)).lower()
    text = path.read_text(encoding="utf-8")
    if fmt == "json":
        corpus = from_interchange(text, source=str(path))
        if name:
            corpus = Corpus(name, corpus.documents, corpus.format_tag)
        return corpus
    schema = ColumnSchema.for_format(fmt.upper())
    return parse(text, schema, name=name or path.stem, source=str(path))


def write_corpus(corpus: Corpus, path, fmt: Optional[str] = None):
    from pathlib import Path
    path = Path(path)
    fmt = (fmt or guess_format(path)).lower()
    if fmt == "json":
        text = to_interchange(corpus)
    else:
        text = serialize(corpus, ColumnSchema.for_format(fmt.upper()))
    path.write_text(text, encoding="utf-8")


def guess_format(path) -> str:
    suffix = str(path).rsplit(".", 1)[-1].lower() if "." in str(path) else ""
    if suffix in ("json", "jsonl"):
        return "json"
    if suffix == "conll":
        return "conll"
    return "ua"

"""JSON-Lines corpus ingestion.

One object per line:

    {"utterance": "what is the area of washington",
     "meaning": "select area from state where state_name = \\"washington\\"",
     "formalism": "sql",                        # "lambda" | "sql"
     "entities": [{"span": [5, 6], "id": "washington", "type": "st"}],
     "gold_alignment": {"area": [3]}}           # synthetic corpora only

`entities` and `gold_alignment` are optional.  Spans are token index
ranges [start, end) over the lowercased, whitespace-split utterance.
Loading extracts each example's symbol set, computes entity links, and
assigns the anonymized-meaning template id.
"""

from __future__ import annotations

import json
from typing import List, Optional

from .corpus import (CorpusError, CorpusExample, EntitySpan, FORMALISMS,
                     MeaningRepresentation, SymbolSet, Utterance,
                     template_id_for, tokenize_meaning, tokenize_utterance)
from .symbols import entity_link, extract_symbols

__all__ = ["example_from_record", "load_corpus", "save_corpus", "corpus_to_records"]


def example_from_record(record: dict, example_id: int) -> CorpusExample:
    """Build a fully derived CorpusExample from one JSONL object."""
    if "utterance" not in record:
        raise CorpusError("missing field 'utterance'")
    if "meaning" not in record:
        raise CorpusError("missing field 'meaning'")
    formalism = record.get("formalism")
    if formalism not in FORMALISMS:
        raise CorpusError(f"unknown formalism {formalism!r}")

    tokens = tokenize_utterance(record["utterance"])
    spans = []
    for ent in record.get("entities") or ():
        try:
            start, end = ent["span"]
            spans.append(EntitySpan(int(start), int(end), ent["id"], ent["type"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusError(f"malformed entity annotation {ent!r}: {exc}")
    utterance = Utterance(tokens, tuple(spans))

    meaning = MeaningRepresentation(
        tokenize_meaning(record["meaning"], formalism), formalism)
    symbols = tuple(extract_symbols(meaning))
    example = CorpusExample(
        example_id=example_id,
        utterance=utterance,
        meaning=meaning,
        symbol_set=SymbolSet(symbols, padded_length=utterance.n),
        template_id=template_id_for(meaning, utterance.entity_spans),
        gold_alignment={sym: tuple(idx) for sym, idx in record["gold_alignment"].items()}
        if record.get("gold_alignment") else None,
    )
    return _with_links(example)


def _with_links(example: CorpusExample) -> CorpusExample:
    from dataclasses import replace
    return replace(example, symbol_set=entity_link(example))


def load_corpus(path, formalism: Optional[str] = None) -> List[CorpusExample]:
    """Load a JSONL corpus; `formalism` fills lines that omit the field."""
    if formalism is not None and formalism not in FORMALISMS:
        raise CorpusError(f"unknown formalism {formalism!r}")
    examples: List[CorpusExample] = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: invalid JSON ({exc})")
            if "formalism" not in record and formalism is not None:
                record = {**record, "formalism": formalism}
            try:
                examples.append(example_from_record(record, example_id=len(examples)))
            except (CorpusError, ValueError) as exc:
                raise CorpusError(f"line {lineno}: {exc}")
    return examples


def corpus_to_records(corpus) -> List[dict]:
    records = []
    for ex in corpus:
        record = {
            "utterance": ex.utterance.text(),
            "meaning": ex.meaning.text(),
            "formalism": ex.meaning.formalism,
        }
        if ex.utterance.entity_spans:
            record["entities"] = [
                {"span": [s.start, s.end], "id": s.entity_id, "type": s.entity_type}
                for s in ex.utterance.entity_spans
            ]
        if ex.gold_alignment:
            record["gold_alignment"] = {k: list(v) for k, v in ex.gold_alignment.items()}
        records.append(record)
    return records


def save_corpus(path, corpus) -> None:
    with open(path, "w") as f:
        for record in corpus_to_records(corpus):
            f.write(json.dumps(record, sort_keys=True) + "\n")

"""
Corpora, meaning representations, and symbol extraction
=======================================================

A corpus row pairs an utterance with its meaning representation in one
of two formalisms (lambda calculus or a SQL subset) plus the entity
spans linking utterance words to typed constants.  The symbol set of an
example is everything the parser must eventually produce besides
structure: predicates, columns, and entity markers.
"""

import json
import tempfile

from tagparse import (anonymize_entities, extract_symbols, load_corpus,
                      save_corpus)
from tagparse.data.loader import example_from_record

# Two worked rows, one per formalism.
rows = [
    {
        "utterance": "columbus to chicago one way on thursday",
        "meaning": "( lambda $0 e ( and ( oneway $0 ) ( from $0 columbus:ci )"
                   " ( to $0 chicago:ci ) ( day $0 thursday:da ) ) )",
        "formalism": "lambda",
        "entities": [
            {"span": [0, 1], "id": "columbus:ci", "type": "ci"},
            {"span": [2, 3], "id": "chicago:ci", "type": "ci"},
            {"span": [6, 7], "id": "thursday:da", "type": "da"},
        ],
    },
    {
        "utterance": "what is the area of washington",
        "meaning": 'select area from state where state_name = "washington"',
        "formalism": "sql",
        "entities": [{"span": [5, 6], "id": "washington", "type": "st"}],
    },
]

for i, row in enumerate(rows):
    example = example_from_record(row, i)
    print("utterance:", " ".join(example.utterance.tokens))
    print("meaning:  ", example.meaning.text())

    # The symbol set drives both tagging and evaluation.
    print("symbols:  ", sorted(extract_symbols(example.meaning)))

    # Anonymization swaps entity spans for typed numbered markers, so the
    # models never memorize entity identities; the entity map restores
    # them after decoding.
    anonymized = anonymize_entities(example)
    print("anonymized utterance:", " ".join(anonymized.utterance.tokens))
    print("anonymized meaning:  ", anonymized.meaning.text())
    print()

# Corpora round-trip through JSON Lines files.
with tempfile.NamedTemporaryFile("w", suffix=".jsonl") as f:
    for row in rows:
        f.write(json.dumps(row) + "\n")
    f.flush()
    corpus = load_corpus(f.name)
print("loaded", len(corpus), "examples;"
      " first symbol set:", list(corpus[0].symbol_set.symbols))

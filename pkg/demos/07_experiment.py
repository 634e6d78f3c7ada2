"""
Multi-seed experiments: tagged parser vs baseline
=================================================

One config drives the whole comparison: generate (or load) a corpus,
split it, train the tagger and both parsers per seed, decode the test
section, and aggregate exact match across seeds.  The same config and
seeds always reproduce the same artifacts byte for byte.
"""

import tempfile
from pathlib import Path

from tagparse import run_experiment

config = {
    "seeds": [0, 1],
    "data": {
        "grammar": {
            "formalism": "lambda",
            "predicates": [{"word": f"word{p}", "symbol": f"pred{p}"}
                           for p in range(3)],
            "entities": [{"word": f"city{e}", "id": f"city{e}:ci",
                          "type": "ci"} for e in range(4)],
            "templates": [
                {"utterance": f"frame{t} <P1> trips to <E1>",
                 "meaning": f"( lambda $0 e ( and ( shape{t} $0 ) "
                            "( <P1> $0 ) ( to $0 <E1> ) ) )",
                 "aligned": {f"shape{t}": f"frame{t}", "to": "<E1>"}}
                for t in range(2)],
        },
        "seed": 0,
    },
    "split": {"mode": "query", "ratios": [0.7, 0.3]},
    "em": {"total_updates": 150, "soft_updates": 75, "batch_size": 6,
           "learning_rate": 0.02},
    "tagger": {"embedding_size": 16, "hidden_size": 16},
    "parser": {"word_embedding_size": 16, "tag_embedding_size": 16,
               "hidden_size": 32, "epochs": 50, "batch_size": 6,
               "learning_rate": 0.02},
    "decode": {"max_length": 40, "beam_size": 2},
}

out_dir = Path(tempfile.mkdtemp()) / "run"
results = run_experiment(config, out_dir)

print("per-seed and mean exact match:")
print((out_dir / "report.tsv").read_text())
print("artifacts:")
for path in sorted(out_dir.rglob("*")):
    if path.is_file():
        print(" ", path.relative_to(out_dir))

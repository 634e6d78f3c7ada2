"""
Exact match and the error taxonomy
==================================

Predictions are scored by normalized token equality.  Wrong predictions
fall into exactly one of three classes by comparing symbol sets:
spurious (symbols outside gold), missing (strict subset), or correct
symbols composed into the wrong query.  Unparsable output counts as
spurious with a parse-failure flag, and the rates always account for
every example.
"""

from tagparse import classify_error, evaluate, exact_match
from tagparse.data.loader import example_from_record

gold = ("( lambda $0 e ( and ( flight $0 ) ( from $0 boston:ci ) "
        "( to $0 denver:ci ) ) )")

cases = {
    "same up to case":
        gold.upper(),
    "swapped conjuncts":
        "( lambda $0 e ( and ( from $0 boston:ci ) ( flight $0 ) "
        "( to $0 denver:ci ) ) )",
    "dropped a conjunct":
        "( lambda $0 e ( and ( flight $0 ) ( from $0 boston:ci ) ) )",
    "invented a predicate":
        gold.replace("flight", "fare"),
    "unbalanced output":
        "( lambda $0 e ( and ( flight",
}
for label, pred in cases.items():
    if exact_match(pred, gold):
        print(f"{label:22s} -> exact match")
    else:
        verdict = classify_error(pred, gold, "lambda")
        flag = " (parse failure)" if verdict.parse_failure else ""
        print(f"{label:22s} -> {verdict.label}{flag}")

# evaluate() aggregates over a whole prediction set, aligned by id.
corpus = [example_from_record({"utterance": f"utterance {i}",
                               "meaning": gold, "formalism": "lambda"}, i)
          for i in range(5)]
predictions = [{"id": i, "prediction": pred}
               for i, pred in enumerate([gold, gold.upper(), *cases.values()])
               if i < 5]
report = evaluate(predictions, corpus)
print("\naccuracy:", report.accuracy)
print("error rates:", {k: round(v, 2) for k, v in report.error_rates.items()})
print("rates + accuracy =",
      report.accuracy + sum(report.error_rates.values()))

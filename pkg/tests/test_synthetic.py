"""Synthetic corpus generation."""

import pytest

from tagparse.data import (SyntheticConfigError, default_grammar,
                           extract_symbols, gen_synthetic)


def cartesian_grammar(n_preds=5, n_ents=10, n_templates=4):
    return {
        "formalism": "lambda",
        "entities": [{"word": f"city{e}", "id": f"city{e}:ci", "type": "ci"}
                     for e in range(n_ents)],
        "predicates": [{"word": f"word{p}", "symbol": f"pred{p}"}
                       for p in range(n_preds)],
        "templates": [
            {"utterance": f"frame{t} <P1> trips to <E1>",
             "meaning": f"( lambda $0 e ( and ( shape{t} $0 ) ( <P1> $0 ) "
                        "( to $0 <E1> ) ) )",
             "aligned": {f"shape{t}": f"frame{t}", "to": "<E1>"}}
            for t in range(n_templates)
        ],
    }


def test_cartesian_count():
    corpus = gen_synthetic(cartesian_grammar(), seed=0)
    assert len(corpus) == 5 * 10 * 4
    texts = {(ex.utterance.text(), ex.meaning.text()) for ex in corpus}
    assert len(texts) == 200  # all distinct


def test_extracted_symbols_match_template():
    for ex in gen_synthetic(cartesian_grammar(2, 3, 2), seed=0):
        frame = ex.utterance.tokens[0]          # frame{t}
        t = frame.removeprefix("frame")
        symbols = extract_symbols(ex.meaning)
        assert symbols[0] == f"shape{t}"
        assert symbols[-1] == "to"
        assert set(symbols) == set(ex.gold_alignment.keys())


def test_gold_alignments_injective():
    for ex in gen_synthetic(seed=0):
        used = []
        for indices in ex.gold_alignment.values():
            used.extend(indices)
        assert len(used) == len(set(used))


def test_gold_alignment_words_in_bounds():
    for ex in gen_synthetic(default_grammar("sql"), seed=2):
        for sym, indices in ex.gold_alignment.items():
            assert sym in ex.symbol_set.symbols
            for i in indices:
                assert 0 <= i < ex.utterance.n


def test_deterministic_given_config_and_seed():
    a = gen_synthetic(cartesian_grammar(), seed=7)
    b = gen_synthetic(cartesian_grammar(), seed=7)
    assert [(ex.utterance.tokens, ex.meaning.tokens) for ex in a] == \
           [(ex.utterance.tokens, ex.meaning.tokens) for ex in b]
    c = gen_synthetic(cartesian_grammar(), seed=8)
    assert [ex.utterance.tokens for ex in a] != [ex.utterance.tokens for ex in c]


def test_empty_lexicon_rejected():
    grammar = cartesian_grammar()
    grammar["predicates"] = []
    with pytest.raises(SyntheticConfigError, match="predicate"):
        gen_synthetic(grammar, seed=0)
    grammar = cartesian_grammar()
    grammar["entities"] = []
    with pytest.raises(SyntheticConfigError, match="entity"):
        gen_synthetic(grammar, seed=0)
    with pytest.raises(SyntheticConfigError, match="template"):
        gen_synthetic({"formalism": "lambda", "templates": []}, seed=0)


def test_distinct_entities_within_example():
    corpus = gen_synthetic(seed=0)
    for ex in corpus:
        ids = [s.entity_id for s in ex.utterance.entity_spans]
        assert len(ids) == len(set(ids))


def test_default_grammars_produce_linked_corpora():
    lam = gen_synthetic(default_grammar("lambda"), seed=0)
    assert len(lam) == 400  # max_examples cap
    linked = sum(1 for ex in lam if ex.symbol_set.fixed_alignments)
    assert linked == len(lam)  # every template has an entity-evoked symbol
    sql = gen_synthetic(default_grammar("sql"), seed=0)
    assert all(ex.meaning.formalism == "sql" for ex in sql)
    assert any(ex.symbol_set.fixed_alignments for ex in sql)


def test_entity_links_agree_with_gold_on_synthetic_data():
    # Rule-derived fixed alignments must be a sub-map of the construction
    # gold alignments, otherwise EM supervision would fight the gold truth.
    for ex in gen_synthetic(seed=4)[:100]:
        for sym, indices in ex.symbol_set.fixed_alignments.items():
            assert ex.gold_alignment.get(sym) == indices

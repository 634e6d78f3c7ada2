"""
Synthetic corpora and compositional splits
==========================================

The synthetic generator crosses predicate and entity lexicons with
meaning templates, producing a corpus with construction-time gold
alignments.  Splits come in two flavors: question splits shuffle
examples, query splits keep every example of a meaning template on one
side, so the test set demands recombining familiar symbols in unseen
shapes.
"""

from tagparse import default_grammar, gen_synthetic, make_split

corpus = gen_synthetic(default_grammar("lambda"), seed=0)
print("generated", len(corpus), "examples")
example = corpus[0]
print("sample utterance:", " ".join(example.utterance.tokens))
print("sample meaning:  ", example.meaning.text())
print("gold alignment:  ", dict(example.gold_alignment))
print()

# A question split mixes templates across sections.
question = make_split(corpus, "question", [0.7, 0.3], seed=1)
# A query split keeps each template wholly inside one section.
query = make_split(corpus, "query", [0.7, 0.3], seed=1)

for split in (question, query):
    train_templates = {ex.template_id
                       for ex in split.select(corpus, "train")}
    test_templates = {ex.template_id for ex in split.select(corpus, "test")}
    print(f"{split.mode:>8} split: "
          f"train {len(split.ids('train'))} / test {len(split.ids('test'))}, "
          f"shared templates: {len(train_templates & test_templates)}")

"""
Training the tag-augmented parser
=================================

The parser is an attention-based encoder-decoder whose encoder input
concatenates a tag embedding to each word embedding; the tag embeddings
are the decoder's own output-symbol table, so the symbols a word evokes
and the symbols the decoder emits live in one space.  Training runs on
the tags the tagger predicts, never on gold tags.
"""

from tagparse import (DecodeConfig, EmConfig, ParserConfig, TaggerConfig,
                      anonymize_entities, gen_synthetic, parse, train_parser,
                      train_tagger)

originals = gen_synthetic(seed=0)[:24]
corpus = [anonymize_entities(ex) for ex in originals]

tagger = train_tagger(
    corpus,
    EmConfig(seed=0, total_updates=300, soft_updates=150, batch_size=6,
             learning_rate=0.02),
    tagger_config=TaggerConfig(embedding_size=16, hidden_size=16))

parser_params = train_parser(
    corpus, tagger,
    ParserConfig(word_embedding_size=16, tag_embedding_size=16,
                 hidden_size=32, epochs=80, batch_size=6,
                 learning_rate=0.02, seed=0))

# Decode a few training utterances with a small beam.  parse() tags the
# anonymized utterance, decodes, and restores the original entities, so
# predictions compare against the original (pre-anonymization) meaning.
decode_config = DecodeConfig(max_length=40, beam_size=3)
hits = 0
for original, example in zip(originals[:6], corpus[:6]):
    result = parse(tagger, parser_params, example, decode_config)
    want = original.meaning.text()
    got = result.text()
    hits += got == want
    print("utterance: ", " ".join(example.utterance.tokens))
    print("tags:      ", " ".join(result.tags))
    print("prediction:", got)
    print("gold:      ", want)
    print("match:     ", got == want, "\n")
print(f"{hits}/6 exact matches, beam score of last: {result.score:.3f}")

#!/usr/bin/env python3
"""Generates the corpus-BLEU golden file.

Scores come from the reference SacreBLEU implementation with its default
configuration (13a tokenization, case sensitive, exponential smoothing).
Run once; the output is committed at
crates/gdr-core/tests/golden/bleu_golden.json and the Rust test suite
compares against it to 1e-4.

Usage: python3 scripts/oracles/gen_bleu_golden.py > crates/gdr-core/tests/golden/bleu_golden.json
"""

import json
import random

import sacrebleu
from sacrebleu.metrics import BLEU

WORDS = [
    "the", "benefits", "office", "will", "process", "your", "claim", "within",
    "30", "days", "of", "receipt", "please", "bring", "a", "valid", "photo",
    "ID", "and", "proof", "of", "residence", "you", "can", "apply", "online",
    "at", "our", "website", "or", "visit", "any", "local", "branch", "fees",
    "may", "apply", "for", "expedited", "service", "(see", "section", "3.5)",
    "don't", "forget", "to", "sign", "form", "SS-5", "it's", "required",
]


def random_sentence(rng: random.Random, lo: int = 3, hi: int = 18) -> str:
    n = rng.randint(lo, hi)
    words = [rng.choice(WORDS) for _ in range(n)]
    sentence = " ".join(words)
    if rng.random() < 0.3:
        sentence += rng.choice([".", "!", "?"])
    return sentence


def perturb(rng: random.Random, sentence: str) -> str:
    words = sentence.split()
    out = []
    for w in words:
        r = rng.random()
        if r < 0.12:
            continue  # drop
        if r < 0.2:
            out.append(rng.choice(WORDS))  # substitute
        else:
            out.append(w)
        if rng.random() < 0.08:
            out.append(rng.choice(WORDS))  # insert
    return " ".join(out)


def main() -> None:
    rng = random.Random(20240801)
    refs = [random_sentence(rng) for _ in range(50)]
    preds = [perturb(rng, r) for r in refs]

    bleu = BLEU()  # defaults: 13a, case sensitive, exp smoothing, order 4
    main_score = bleu.corpus_score(preds, [refs]).score

    cases = {
        "sacrebleu_version": sacrebleu.__version__,
        "corpus": {"preds": preds, "refs": refs, "bleu": main_score},
        "singles": [],
    }
    single_pairs = [
        ("a", "b"),
        ("the cat sat on the mat", "the cat was sitting on the mat"),
        ("identical words here", "identical words here"),
        ("one two", "one two three four five six"),
        ("a longer sentence than the reference is", "short ref"),
        ("Hello, world! It's 3.5 percent &amp; rising.", "Hello, world! It is 3.5 percent & rising."),
    ]
    for pred, ref in single_pairs:
        score = BLEU().corpus_score([pred], [[ref]]).score
        cases["singles"].append({"pred": pred, "ref": ref, "bleu": score})

    print(json.dumps(cases, ensure_ascii=False, indent=1))


if __name__ == "__main__":
    main()

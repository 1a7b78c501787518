#!/usr/bin/env python3
"""Generates the token-F1 / exact-match golden file.

Scores come from the published SQuAD evaluation functions as packaged in
`transformers.data.metrics.squad_metrics` (a verbatim copy of the official
evaluate-v2.0.py implementation). Run once; the output is committed at
crates/gdr-core/tests/golden/squad_golden.jsonl and the Rust test suite
compares against it to 1e-9.

Usage: python3 scripts/oracles/gen_squad_golden.py > crates/gdr-core/tests/golden/squad_golden.jsonl
"""

import json
import random

from transformers.data.metrics.squad_metrics import compute_exact, compute_f1

CURATED = [
    ("The answer!", "answer"),
    ("a an the", ""),
    ("", ""),
    ("", "something"),
    ("something", ""),
    ("U.S. agency", "us agency"),
    ("a b c", "b c d"),
    ("b b", "b"),
    ("the quick fox", "quick brown fox"),
    ("A   spaced    out answer", "a spaced out answer"),
    ("an apple a day", "apple day"),
    ("can't stop won't stop", "cant stop wont stop"),
    ("the-answer", "theanswer"),
    ("a_b under_score", "ab underscore"),
    ("Total: $5,000.00 (approx.)", "total 5 00000 approx"),
    ("née naïve café", "nee naive cafe"),
    ("answer one", "answer"),
    ("THE ANSWER", "the answer"),
    ("42", "42"),
    ("1,234", "1 234"),
]

WORDS = [
    "the", "a", "an", "benefits", "claim", "office", "U.S.", "form", "apply",
    "online", "visit", "state", "license", "renewal", "fee", "$25", "1099",
    "social", "security", "disability", "spouse", "child", "qualify", "don't",
    "won't", "(see", "below)", "page.", "Note:", "first,", "second;", "50%",
]


def random_text(rng: random.Random) -> str:
    n = rng.randint(0, 12)
    return " ".join(rng.choice(WORDS) for _ in range(n))


def main() -> None:
    rng = random.Random(20240731)
    pairs = list(CURATED)
    while len(pairs) < 200:
        pred = random_text(rng)
        if rng.random() < 0.3:
            gold = pred  # exact and near-exact cases
            if rng.random() < 0.5 and gold:
                gold = gold.upper()
        else:
            gold = random_text(rng)
        pairs.append((pred, gold))

    for pred, gold in pairs:
        print(
            json.dumps(
                {
                    "pred": pred,
                    "gold": gold,
                    "f1": compute_f1(gold, pred),
                    "em": compute_exact(gold, pred),
                },
                ensure_ascii=False,
            )
        )


if __name__ == "__main__":
    main()

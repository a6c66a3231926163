# Copyright 2026 The Lensforge Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Frozen GPT-2 tokenizer encodings from the Hugging Face tokenizers library.

Usage: make_tokenizer_golden.py REPO_ROOT

Writes tests/golden/gpt2_tokenizer_cases.json: [{text, ids}], covering
hand-picked edge cases plus seeded random strings over a mixed alphabet.
"""

import json
import pathlib
import random
import sys

from tokenizers import AddedToken

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent))
from make_gpt2_golden import load_tokenizer  # noqa: E402

FIXED = [
    "",
    "The capital of France is",
    "Paris is the capital of",
    "Hello, world!",
    "  leading spaces",
    "trailing spaces   ",
    "tabs\tand\nnewlines\n\n",
    "mixed \t \n whitespace",
    "don't I'll we're they've she'd I'm it's",
    "DON'T SHOUT'S",
    "numbers 12345 and 3.14159 and 1,000,000",
    "x1y2z3",
    "café naïve résumé",
    "日本語のテキスト",
    "한국어 텍스트",
    "Ελληνικά και русский",
    "emoji 😀🎉 and flags 🇫🇷",
    "combining é marks",
    "zero​width",
    "<|endoftext|>",
    "before<|endoftext|>after",
    "a<|endoftext|><|endoftext|>b",
    "<|endoftext",
    "symbols !@#$%^&*()_+-=[]{}|;':\",./<>?",
    "    def f(x):\n        return x * 2\n",
    "https://example.com/path?q=1&r=2",
    "A" * 40,
    " non-breaking spaces",
    "line1\r\nline2",
    "'''quotes''' \"double\"",
    "Ⅻ roman ½ fractions ² superscripts",
    "١٢٣ arabic digits",
]

ALPHABET = (
    list("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789")
    + list(" \t\n'.,!?-_:;\"()")
    + ["é", "ß", "ø", "ñ", "ж", "λ", "日", "本", "語", "😀", "́", " ", "½", "٣", "<|endoftext|>"]
)


def main():
    root = pathlib.Path(sys.argv[1])
    tok = load_tokenizer(root / "tests" / "fixtures" / "gpt2_tokenizer")
    tok.add_special_tokens([AddedToken("<|endoftext|>", special=True, normalized=False)])
    rng = random.Random(20260101)
    texts = list(FIXED)
    for _ in range(400):
        n = rng.randint(1, 24)
        texts.append("".join(rng.choice(ALPHABET) for _ in range(n)))
    cases = [{"text": t, "ids": tok.encode(t, add_special_tokens=False).ids} for t in texts]
    out = root / "tests" / "golden" / "gpt2_tokenizer_cases.json"
    out.write_text(json.dumps(cases, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {len(cases)} cases to {out}")


if __name__ == "__main__":
    main()

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
"""Converts GPT-2 encoder.json + vocab.bpe into tokenizer.json + merges.txt.

The two inputs ship with the original GPT-2 release and with several
packages that redistribute it (for example the npm package gpt-3-encoder).

  python3 export_gpt2_tokenizer.py encoder.json vocab.bpe OUT_DIR
"""

import json
import pathlib
import shutil
import sys

SPECIAL = "<|endoftext|>"


def main() -> None:
    encoder_path, merges_path, out = sys.argv[1:4]
    out_dir = pathlib.Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    encoder = json.loads(pathlib.Path(encoder_path).read_text(encoding="utf-8"))
    special = {SPECIAL: encoder.pop(SPECIAL)}
    doc = {"vocab": encoder, "special_tokens": special, "pretokenizer": "gpt2"}
    (out_dir / "tokenizer.json").write_text(
        json.dumps(doc, ensure_ascii=False, separators=(",", ":")), encoding="utf-8")
    shutil.copyfile(merges_path, out_dir / "merges.txt")


if __name__ == "__main__":
    main()

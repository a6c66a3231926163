#!/usr/bin/env python3
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
"""Generates src/unicode_tables.inc: code point ranges for the letter,
number and whitespace classes used by the BPE pre-tokenizer."""

import sys
import unicodedata


def ranges(pred):
    out, start = [], None
    for cp in range(0x110000):
        hit = pred(cp)
        if hit and start is None:
            start = cp
        elif not hit and start is not None:
            out.append((start, cp - 1))
            start = None
    if start is not None:
        out.append((start, 0x10FFFF))
    return out


def emit(name, rs):
    lines = [f"inline constexpr CodepointRange {name}[] = {{"]
    for a, b in rs:
        lines.append(f"    {{0x{a:X}, 0x{b:X}}},")
    lines.append("};")
    return "\n".join(lines)


def main():
    letter = ranges(lambda c: unicodedata.category(chr(c)).startswith("L"))
    number = ranges(lambda c: unicodedata.category(chr(c)).startswith("N"))
    space = ranges(lambda c: chr(c).isspace())
    out = [
        "// Generated by tools/gen_unicode_tables.py from Unicode "
        + unicodedata.unidata_version + ". Do not edit.",
        emit("kLetterRanges", letter),
        emit("kNumberRanges", number),
        emit("kSpaceRanges", space),
        "",
    ]
    sys.stdout.write("\n\n".join(out))


if __name__ == "__main__":
    main()

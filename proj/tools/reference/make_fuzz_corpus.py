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
"""Malformed container and tokenizer files for the format-robustness tests.

Usage: make_fuzz_corpus.py REPO_ROOT

Writes tests/fixtures/fuzz/container/<case>.tensors,
tests/fixtures/fuzz/tokenizer/<case>/{tokenizer.json, merges.txt} and a
manifest.json listing every case with the error kind it must produce.
"""

import json
import pathlib
import shutil
import struct
import sys


def container(header, payload=b"", length=None):
    raw = header if isinstance(header, bytes) else json.dumps(header).encode()
    n = len(raw) if length is None else length
    return struct.pack("<Q", n) + raw + payload


def entry(dtype="F32", shape=(2,), offsets=(0, 8)):
    as_list = lambda v: list(v) if isinstance(v, (tuple, list)) else v
    return {"dtype": dtype, "shape": as_list(shape), "data_offsets": as_list(offsets)}


F32x2 = struct.pack("<2f", 1.0, 2.0)

CONTAINER_CASES = {
    "empty": (b"", "truncated"),
    "one_byte": (b"\x01", "truncated"),
    "seven_bytes": (b"\x00" * 7, "truncated"),
    "length_only": (struct.pack("<Q", 0), "malformed_header"),
    "length_exceeds_file": (container({"w": entry()}, F32x2, length=4096), "truncated"),
    "length_max_u64": (struct.pack("<Q", 2**64 - 1) + b"{}", "truncated"),
    "length_sign_bit": (struct.pack("<Q", 2**63) + b"{}", "truncated"),
    "header_cut_midway": (container({"w": entry()}, b"")[:20], "truncated"),
    "header_not_json": (container(b"not json at all"), "malformed_header"),
    "header_unclosed": (container(b'{"w": {"dtype": "F32"'), "malformed_header"),
    "header_array": (container([1, 2, 3]), "malformed_header"),
    "header_string": (container("tensor"), "malformed_header"),
    "header_number": (container(42), "malformed_header"),
    "header_invalid_utf8": (container(b'{"\xff\xfe": 1}'), "malformed_header"),
    "header_nul_bytes": (container(b'{"w"\x00: 1}'), "malformed_header"),
    "header_trailing_garbage": (container(b'{} {}'), "malformed_header"),
    "deep_nesting": (container(b"[" * 5000 + b"]" * 5000), "malformed_header"),
    "entry_not_object": (container({"w": [1, 2]}), "bad_entry"),
    "entry_missing_dtype": (container({"w": {"shape": [2], "data_offsets": [0, 8]}}, F32x2), "bad_entry"),
    "entry_missing_shape": (container({"w": {"dtype": "F32", "data_offsets": [0, 8]}}, F32x2), "bad_entry"),
    "entry_missing_offsets": (container({"w": {"dtype": "F32", "shape": [2]}}, F32x2), "bad_entry"),
    "dtype_not_string": (container({"w": entry(dtype=7)}, F32x2), "bad_entry"),
    "dtype_i64": (container({"w": entry(dtype="I64")}, F32x2), "unsupported_dtype"),
    "dtype_f64": (container({"w": entry(dtype="F64", shape=(1,))}, F32x2), "unsupported_dtype"),
    "dtype_lowercase": (container({"w": entry(dtype="f32")}, F32x2), "unsupported_dtype"),
    "shape_not_array": (container({"w": entry(shape=2)}, F32x2), "bad_entry"),
    "shape_negative": (container({"w": entry(shape=(-2,))}, F32x2), "bad_entry"),
    "shape_float": (container({"w": entry(shape=(2.5,))}, F32x2), "bad_entry"),
    "shape_string": (container({"w": entry(shape=("2",))}, F32x2), "bad_entry"),
    "shape_overflow": (container({"w": entry(shape=(2**40, 2**40))}, F32x2), "bad_entry"),
    "offsets_not_array": (container({"w": {"dtype": "F32", "shape": [2], "data_offsets": 8}}, F32x2), "bad_entry"),
    "offsets_three": (container({"w": entry(offsets=(0, 4, 8))}, F32x2), "bad_entry"),
    "offsets_negative": (container({"w": entry(offsets=(-8, 0))}, F32x2), "bad_entry"),
    "offsets_reversed": (container({"w": entry(offsets=(8, 0))}, F32x2), "bad_entry"),
    "offsets_float": (container({"w": entry(offsets=(0.0, 8.0))}, F32x2), "bad_entry"),
    "offsets_past_payload": (container({"w": entry(shape=(4,), offsets=(0, 16))}, F32x2), "offset_out_of_range"),
    "offsets_huge": (container({"w": entry(shape=(2,), offsets=(2**62, 2**62 + 8))}, F32x2), "offset_out_of_range"),
    "payload_truncated": (container({"w": entry(shape=(3,), offsets=(0, 12))}, F32x2), "offset_out_of_range"),
    "size_mismatch_f32": (container({"w": entry(shape=(3,), offsets=(0, 8))}, F32x2), "size_mismatch"),
    "size_mismatch_f16": (container({"w": entry(dtype="F16", shape=(2,), offsets=(0, 8))}, F32x2), "size_mismatch"),
    "size_mismatch_bf16": (container({"w": entry(dtype="BF16", shape=(3,), offsets=(0, 8))}, F32x2), "size_mismatch"),
    "overlapping": (container({"a": entry(), "b": entry(shape=(1,), offsets=(4, 8))}, F32x2), "overlapping_ranges"),
    "identical_ranges": (container({"a": entry(), "b": entry()}, F32x2), "overlapping_ranges"),
    "metadata_not_object": (container({"__metadata__": "x", "w": entry()}, F32x2), "bad_entry"),
    "metadata_value_number": (container({"__metadata__": {"k": 1}, "w": entry()}, F32x2), "bad_entry"),
}


def gpt2_byte_symbols():
    bs = list(range(ord("!"), ord("~") + 1)) + list(range(ord("¡"), ord("¬") + 1)) + list(range(ord("®"), ord("ÿ") + 1))
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return {b: chr(c) for b, c in zip(bs, cs)}


BYTES = gpt2_byte_symbols()
BYTE_VOCAB = {BYTES[b]: b for b in range(256)}


def tok(vocab=None, special=None, extra=None):
    doc = {"vocab": BYTE_VOCAB if vocab is None else vocab, "special_tokens": special or {}}
    doc.update(extra or {})
    return json.dumps(doc, ensure_ascii=False).encode()


def with_vocab(**extra):
    v = dict(BYTE_VOCAB)
    v.update(extra)
    return v


A, B = BYTES[ord("a")], BYTES[ord("b")]

TOKENIZER_CASES = {
    "empty_file": (b"", None, "malformed_json"),
    "not_json": (b"vocab = {}", None, "malformed_json"),
    "truncated_json": (tok()[:100], None, "malformed_json"),
    "invalid_utf8": (b'{"vocab": {"\xff": 0}}', None, "malformed_json"),
    "top_level_array": (b"[]", None, "bad_vocab"),
    "missing_vocab": (b'{"special_tokens": {}}', None, "bad_vocab"),
    "vocab_array": (b'{"vocab": ["a", "b"]}', None, "bad_vocab"),
    "vocab_empty": (b'{"vocab": {}}', None, "bad_vocab"),
    "id_string": (tok(with_vocab(x="256")), None, "bad_vocab"),
    "id_negative": (tok(with_vocab(x=-1)), None, "bad_vocab"),
    "id_float": (tok(with_vocab(x=256.5)), None, "bad_vocab"),
    "ids_gap": (tok(with_vocab(x=300)), None, "non_dense_ids"),
    "ids_duplicate": (tok(with_vocab(x=5)), None, "bad_vocab"),
    "missing_byte_symbols": (tok({"a": 0, "b": 1}), None, "bad_vocab"),
    "special_not_object": (tok(special=None, extra={"special_tokens": ["<s>"]}), None, "bad_vocab"),
    "special_id_string": (tok(special={"<s>": "256"}), None, "bad_vocab"),
    "special_id_collides": (tok(special={"<s>": 5}), None, "bad_vocab"),
    "special_id_gap": (tok(special={"<s>": 999}), None, "non_dense_ids"),
    "pretokenizer_unknown": (tok(extra={"pretokenizer": "sentencepiece"}), None, "bad_vocab"),
    "pretokenizer_number": (tok(extra={"pretokenizer": 1}), None, "bad_vocab"),
    "merge_one_part": (tok(with_vocab(**{A + B: 256})), b"ab\n", "bad_merge"),
    "merge_three_parts": (tok(with_vocab(**{A + B: 256})), b"a b c\n", "bad_merge"),
    "merge_unknown_symbol": (tok(), "一 b\n".encode(), "bad_merge"),
    "merge_result_missing": (tok(), f"{A} {B}\n".encode(), "bad_merge"),
    "merge_second_line_bad": (tok(with_vocab(**{A + B: 256})), f"{A} {B}\nbroken\n".encode(), "bad_merge"),
    "merge_nul_byte": (tok(with_vocab(**{A + B: 256})), f"{A}\x00{B}\n".encode(), "bad_merge"),
    "merge_invalid_utf8": (tok(), b"\xff \xfe\n", "bad_merge"),
    "merge_leading_space": (tok(with_vocab(**{A + B: 256})), f" {A} {B}\n".encode(), "bad_merge"),
}


def main():
    root = pathlib.Path(sys.argv[1]) / "tests" / "fixtures" / "fuzz"
    if root.exists():
        shutil.rmtree(root)
    (root / "container").mkdir(parents=True)
    (root / "tokenizer").mkdir(parents=True)
    manifest = []
    for name, (data, kind) in CONTAINER_CASES.items():
        (root / "container" / f"{name}.tensors").write_bytes(data)
        manifest.append({"format": "container", "case": name, "error": kind})
    for name, (tokenizer, merges, kind) in TOKENIZER_CASES.items():
        d = root / "tokenizer" / name
        d.mkdir()
        (d / "tokenizer.json").write_bytes(tokenizer)
        if merges is not None:
            (d / "merges.txt").write_bytes(merges)
        manifest.append({"format": "tokenizer", "case": name, "error": kind})
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    print(f"wrote {len(manifest)} cases to {root}")


if __name__ == "__main__":
    main()

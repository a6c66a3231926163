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
"""Converts a Hugging Face checkpoint directory into a lensforge model directory.

  python3 convert_hf_checkpoint.py HF_DIR OUT_DIR [--tokenizer-dir DIR | --byte-tokenizer]

HF_DIR holds config.json and model.safetensors. Supported model types:
gpt2 (family gpt2) and llama / qwen2 (family llama). Tensor names are kept;
llama-family q/k projection rows are permuted from the half-split rotary
layout into interleaved (2i, 2i+1) pairs, which is what the engine expects.
"""

import argparse
import json
import pathlib
import shutil

import numpy as np
from safetensors.numpy import load_file, save_file


def byte_symbols():
    """GPT-2's reversible byte -> printable character table."""
    direct = (list(range(ord("!"), ord("~") + 1)) + list(range(0xA1, 0xAD)) +
              list(range(0xAE, 0x100)))
    table, extra = {}, 0
    for b in range(256):
        if b in direct:
            table[b] = chr(b)
        else:
            table[b] = chr(256 + extra)
            extra += 1
    return table


def byte_tokenizer_json():
    symbols = byte_symbols()
    return {"vocab": {symbols[b]: b for b in range(256)}, "special_tokens": {},
            "pretokenizer": "gpt2"}


def engine_config(hf):
    kind = hf["model_type"]
    if kind == "gpt2":
        d = hf["n_embd"]
        return {
            "family": "gpt2", "n_layers": hf["n_layer"], "d_model": d,
            "n_heads": hf["n_head"], "n_kv_heads": hf["n_head"],
            "d_ff": hf.get("n_inner") or 4 * d, "vocab_size": hf["vocab_size"],
            "max_seq_len": hf["n_positions"], "rope_theta": 10000.0,
            "norm_eps": hf.get("layer_norm_epsilon", 1e-5),
            "tie_word_embeddings": hf.get("tie_word_embeddings", True),
        }
    if kind in ("llama", "qwen2"):
        d, heads = hf["hidden_size"], hf["num_attention_heads"]
        if hf.get("head_dim", d // heads) != d // heads:
            raise SystemExit("head_dim different from hidden_size / heads is unsupported")
        theta = hf.get("rope_theta")
        if theta is None:
            theta = (hf.get("rope_parameters") or {}).get("rope_theta", 10000.0)
        return {
            "family": "llama", "n_layers": hf["num_hidden_layers"], "d_model": d,
            "n_heads": heads, "n_kv_heads": hf.get("num_key_value_heads", heads),
            "d_ff": hf["intermediate_size"], "vocab_size": hf["vocab_size"],
            "max_seq_len": hf["max_position_embeddings"], "rope_theta": float(theta),
            "norm_eps": hf.get("rms_norm_eps", 1e-6),
            "tie_word_embeddings": hf.get("tie_word_embeddings", False),
        }
    raise SystemExit(f"unsupported model_type {kind!r}")


def interleave_rotary(rows, n_heads):
    """Reorders each head's rows (or bias entries) from [x0..x(d/2-1), y0..]
    to [x0, y0, x1, y1, ...]."""
    d_head = rows.shape[0] // n_heads
    order = []
    for h in range(n_heads):
        for i in range(d_head // 2):
            order += [h * d_head + i, h * d_head + i + d_head // 2]
    return rows[np.array(order)]


def convert(hf_dir, out_dir, tokenizer_dir=None, byte_tokenizer=False):
    hf_dir, out_dir = pathlib.Path(hf_dir), pathlib.Path(out_dir)
    hf = json.loads((hf_dir / "config.json").read_text())
    cfg = engine_config(hf)
    tensors = {k: v.astype(np.float32) for k, v in load_file(hf_dir / "model.safetensors").items()}
    if cfg["family"] == "llama":
        kv_heads = cfg["n_kv_heads"]
        for name in list(tensors):
            if ".self_attn.q_proj." in name:
                tensors[name] = interleave_rotary(tensors[name], cfg["n_heads"])
            elif ".self_attn.k_proj." in name:
                tensors[name] = interleave_rotary(tensors[name], kv_heads)
    if cfg["tie_word_embeddings"]:
        tensors.pop("lm_head.weight", None)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_file({k: np.ascontiguousarray(v) for k, v in tensors.items()},
              str(out_dir / "model.tensors"))
    (out_dir / "config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
    if byte_tokenizer:
        (out_dir / "tokenizer.json").write_text(
            json.dumps(byte_tokenizer_json(), ensure_ascii=False, sort_keys=True))
    elif tokenizer_dir:
        for name in ("tokenizer.json", "merges.txt"):
            src = pathlib.Path(tokenizer_dir) / name
            if src.exists():
                shutil.copyfile(src, out_dir / name)
    return cfg


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("hf_dir")
    parser.add_argument("out_dir")
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--tokenizer-dir")
    group.add_argument("--byte-tokenizer", action="store_true")
    args = parser.parse_args()
    convert(args.hf_dir, args.out_dir, args.tokenizer_dir, args.byte_tokenizer)


if __name__ == "__main__":
    main()

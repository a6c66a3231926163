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
"""Builds the tiny llama-family fixtures and their reference outputs.

Creates two randomly initialised Hugging Face models (a Llama with
grouped-query attention and an untied head, and a Qwen2 with q/k/v biases
and a tied head), converts them with convert_hf_checkpoint.py into
tests/fixtures/<name>/, and records the reference implementation's outputs
in tests/golden/<name>.json:

  prompts[i].ids            byte-level token ids
  prompts[i].last_logits    final-position logits
  prompts[i].block_output   per-layer block output at the last position
  prompts[i].lens_top1      per-layer [token_id, prob] of the logit lens
  full_logits               all-position logits of prompts[0]

  python3 tools/reference/make_family_b_fixtures.py REPO_ROOT
"""

import json
import pathlib
import sys
import tempfile

import torch
from transformers import LlamaConfig, LlamaForCausalLM, Qwen2Config, Qwen2ForCausalLM

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1]))
from convert_hf_checkpoint import convert  # noqa: E402

COMMON = dict(vocab_size=256, hidden_size=64, intermediate_size=128, num_hidden_layers=4,
              num_attention_heads=8, num_key_value_heads=2, max_position_embeddings=128,
              rms_norm_eps=1e-5, rope_theta=10000.0, initializer_range=0.15,
              attn_implementation="eager")

MODELS = {
    "tiny_llama": (LlamaForCausalLM, LlamaConfig(tie_word_embeddings=False, **COMMON), 1234),
    "tiny_qwen": (Qwen2ForCausalLM, Qwen2Config(tie_word_embeddings=True,
                                                use_sliding_window=False, **COMMON), 5678),
}


def reference(model, ids):
    blocks = []
    hooks = [layer.register_forward_hook(
        lambda _m, _i, out: blocks.append((out[0] if isinstance(out, tuple) else out).detach()))
        for layer in model.model.layers]
    with torch.no_grad():
        logits = model(torch.tensor([ids])).logits[0]
        lens = [torch.softmax(model.lm_head(model.model.norm(b[0, -1])), -1) for b in blocks]
    for h in hooks:
        h.remove()
    return logits, [b[0, -1] for b in blocks], lens


def main():
    root = pathlib.Path(sys.argv[1])
    prompts = [json.loads(line)["prompt"]
               for line in (root / "tests/fixtures/prompts20.jsonl").read_text().splitlines()]
    for name, (cls, config, seed) in MODELS.items():
        torch.manual_seed(seed)
        model = cls(config).eval()
        # Default init leaves norm gains at 1 and biases at 0; perturb them so
        # those code paths are exercised.
        with torch.no_grad():
            for pname, param in model.named_parameters():
                if pname.endswith("norm.weight") or "layernorm" in pname:
                    param.add_(0.1 * torch.randn_like(param))
                elif pname.endswith(".bias"):
                    param.copy_(0.05 * torch.randn_like(param))
        with tempfile.TemporaryDirectory() as tmp:
            model.save_pretrained(tmp, safe_serialization=True)
            convert(tmp, root / "tests/fixtures" / name, byte_tokenizer=True)
        golden = {"model": name, "prompts": []}
        for i, text in enumerate(prompts):
            ids = list(text.encode("utf-8"))
            logits, blocks, lens = reference(model, ids)
            golden["prompts"].append({
                "text": text, "ids": ids,
                "last_logits": logits[-1].tolist(),
                "block_output": [b.tolist() for b in blocks],
                "lens_top1": [[int(p.argmax()), float(p.max())] for p in lens],
            })
            if i == 0:
                golden["full_logits"] = logits.tolist()
        (root / "tests/golden" / f"{name}.json").write_text(json.dumps(golden) + "\n")


if __name__ == "__main__":
    main()

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
"""Reference logit-lens outputs for the GPT-2-architecture fixture model.

Loads the synthetic model directory written by lensforge-synth into the
Hugging Face GPT2LMHeadModel, tokenizes with the Hugging Face tokenizers
library, and records:

  tests/golden/gpt2s_reference.json
    manifest            checkpoint tensor name -> shape (148 tensors)
    prompts[i]          ids, per-layer last-position lens [top1 id, p1, p2],
                        final-position top-5 [id, p]
    paris_grid          per-layer, per-position lens [top1 id, p1] for the
                        first prompt
    min_margin          smallest p1 - p2 over every recorded lens top-1
  tests/golden/gpt2s_paris_hooks.tensors
    layer.<l>.<point> [t x 768] for point in input, post_attention,
    intermediate_residual, mlp_output, block_output

  python3 tools/reference/make_gpt2_golden.py MODEL_DIR REPO_ROOT

MODEL_DIR is the output of
  lensforge-synth --preset gpt2-small --seed 20260101 \
      --tokenizer tests/fixtures/gpt2_tokenizer --out MODEL_DIR
which is also what the fixture_gpt2s test step generates.
"""

import json
import pathlib
import sys
import tempfile

import torch
from safetensors.torch import load_file, save_file
from tokenizers import Tokenizer, decoders, models, pre_tokenizers
from transformers import GPT2Config, GPT2LMHeadModel


def load_model(model_dir):
    cfg = json.loads((model_dir / "config.json").read_text())
    config = GPT2Config(vocab_size=cfg["vocab_size"], n_positions=cfg["max_seq_len"],
                        n_embd=cfg["d_model"], n_layer=cfg["n_layers"], n_head=cfg["n_heads"],
                        n_inner=cfg["d_ff"], activation_function="gelu_new",
                        layer_norm_epsilon=cfg["norm_eps"], resid_pdrop=0.0, embd_pdrop=0.0,
                        attn_pdrop=0.0, tie_word_embeddings=True,
                        attn_implementation="eager")
    model = GPT2LMHeadModel(config).eval()
    state = load_file(str(model_dir / "model.tensors"))
    missing, unexpected = model.transformer.load_state_dict(state, strict=False)
    assert not unexpected, unexpected
    assert all(k.endswith("attn.bias") or k.endswith("masked_bias") for k in missing), missing
    model.tie_weights()
    assert model.lm_head.weight.data_ptr() == model.transformer.wte.weight.data_ptr()
    manifest = {k: list(v.shape) for k, v in model.transformer.state_dict().items()}
    return model, manifest


def load_tokenizer(model_dir):
    doc = json.loads((model_dir / "tokenizer.json").read_text(encoding="utf-8"))
    vocab = dict(doc["vocab"])
    vocab.update(doc.get("special_tokens", {}))
    with tempfile.TemporaryDirectory() as tmp:
        path = pathlib.Path(tmp) / "vocab.json"
        path.write_text(json.dumps(vocab, ensure_ascii=False), encoding="utf-8")
        tok = Tokenizer(models.BPE.from_file(str(path), str(model_dir / "merges.txt")))
    tok.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False)
    tok.decoder = decoders.ByteLevel()
    return tok


def capture(model, ids):
    """Runs the model, returning logits and per-layer intercept tensors."""
    points = [dict() for _ in model.transformer.h]
    hooks = []
    for l, block in enumerate(model.transformer.h):
        def pre(_m, args, l=l):
            points[l]["input"] = args[0][0].detach().clone()
        def attn(_m, _i, out, l=l):
            points[l]["post_attention"] = (out[0] if isinstance(out, tuple) else out)[0].detach().clone()
        def ln2(_m, args, l=l):
            points[l]["intermediate_residual"] = args[0][0].detach().clone()
        def mlp(_m, _i, out, l=l):
            points[l]["mlp_output"] = out[0].detach().clone()
        def post(_m, _i, out, l=l):
            points[l]["block_output"] = (out[0] if isinstance(out, tuple) else out)[0].detach().clone()
        hooks += [block.register_forward_pre_hook(pre), block.attn.register_forward_hook(attn),
                  block.ln_2.register_forward_pre_hook(ln2), block.mlp.register_forward_hook(mlp),
                  block.register_forward_hook(post)]
    with torch.no_grad():
        logits = model(torch.tensor([ids])).logits[0]
    for h in hooks:
        h.remove()
    return logits, points


def lens(model, hidden):
    with torch.no_grad():
        return torch.softmax(model.lm_head(model.transformer.ln_f(hidden)), -1)


def main():
    model_dir, root = pathlib.Path(sys.argv[1]), pathlib.Path(sys.argv[2])
    model, manifest = load_model(model_dir)
    tok = load_tokenizer(model_dir)
    prompts = [json.loads(line)
               for line in (root / "tests/fixtures/prompts20.jsonl").read_text().splitlines()]
    golden = {"manifest": manifest, "prompts": []}
    margins = []
    for i, p in enumerate(prompts):
        ids = tok.encode(p["prompt"]).ids
        logits, points = capture(model, ids)
        per_layer = []
        for pt in points:
            probs = lens(model, pt["block_output"][-1])
            top = torch.topk(probs, 2)
            per_layer.append([int(top.indices[0]), float(top.values[0]), float(top.values[1])])
            margins.append(float(top.values[0] - top.values[1]))
        final = torch.topk(torch.softmax(logits[-1], -1), 5)
        golden["prompts"].append({
            "id": p["id"], "text": p["prompt"], "ids": ids, "lens_last": per_layer,
            "final_top5": [[int(a), float(b)] for a, b in zip(final.indices, final.values)],
        })
        if i == 0:
            grid = []
            for pt in points:
                probs = lens(model, pt["block_output"])
                top = torch.topk(probs, 2, dim=-1)
                grid.append([[int(top.indices[t, 0]), float(top.values[t, 0])]
                             for t in range(len(ids))])
                margins += (top.values[:, 0] - top.values[:, 1]).tolist()
            golden["paris_grid"] = grid
            save_file({f"layer.{l}.{name}": t.contiguous() for l, pt in enumerate(points)
                       for name, t in pt.items()},
                      str(root / "tests/golden/gpt2s_paris_hooks.tensors"))
    golden["min_margin"] = min(margins)
    (root / "tests/golden/gpt2s_reference.json").write_text(json.dumps(golden) + "\n")
    print("tensors:", len(manifest), "min_margin:", golden["min_margin"])


if __name__ == "__main__":
    main()

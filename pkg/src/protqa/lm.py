"""Small causal byte LM: pre-norm transformer, rotary attention, grouped KV heads.

Structurally LLaMA-like so low-rank adaptation targets the attention query and
value projections and the grouped-query value-map asymmetry is representable.
A soft prompt, when given, occupies the leading positions of the sequence.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ConfigError, ContractError, DimensionError, LengthError
from .tokenizer import BOS, EOS, VOCAB_SIZE, detokenize, tokenize

log = logging.getLogger(__name__)

TEMPLATE_VERSION = "chat-template/1"
ANSWER_SEPARATOR = "\n### Answer:\n"

NEG_MASK = -1e9


@dataclass
class LMConfig:
    layers: int = 4
    d_model: int = 256
    heads: int = 8
    kv_heads: int = 2
    ff_width: int = 0  # 0 means 4 * d_model
    max_context: int = 1024
    vocab: int = VOCAB_SIZE

    def __post_init__(self):
        if self.d_model % self.heads != 0:
            raise ConfigError("d_model must be divisible by heads")
        if self.heads % self.kv_heads != 0:
            raise ConfigError("heads must be divisible by kv_heads")
        if self.ff_width == 0:
            self.ff_width = 4 * self.d_model

    @property
    def head_dim(self) -> int:
        return self.d_model // self.heads

    @property
    def kv_width(self) -> int:
        return self.kv_heads * self.head_dim


@dataclass
class LoRAConfig:
    rank: int = 8
    alpha: float = 16.0
    dropout: float = 0.1
    # targets are fixed: attention query and value projections

    def __post_init__(self):
        if self.rank < 1:
            raise ConfigError("LoRA rank must be >= 1")

    @property
    def scaling(self) -> float:
        return self.alpha / self.rank


def init_lm_weights(cfg: LMConfig, seed: int, dtype=np.float32) -> dict[str, Tensor]:
    """Frozen base weights (untracked)."""
    rng = np.random.default_rng(seed)

    def lin(fi, fo):
        return Tensor(rng.normal(0.0, np.sqrt(2.0 / (fi + fo)), size=(fi, fo)).astype(dtype))

    d, ff = cfg.d_model, cfg.ff_width
    w: dict[str, Tensor] = {"tok_embed": Tensor(rng.normal(0.0, 1.0 / np.sqrt(d), size=(cfg.vocab, d)).astype(dtype))}
    for i in range(cfg.layers):
        p = f"layers.{i}"
        w[f"{p}.attn_norm.gain"] = Tensor(np.ones(d, dtype=dtype))
        w[f"{p}.attn_norm.bias"] = Tensor(np.zeros(d, dtype=dtype))
        w[f"{p}.w_q"] = lin(d, d)
        w[f"{p}.w_k"] = lin(d, cfg.kv_width)
        w[f"{p}.w_v"] = lin(d, cfg.kv_width)
        w[f"{p}.w_o"] = lin(d, d)
        w[f"{p}.mlp_norm.gain"] = Tensor(np.ones(d, dtype=dtype))
        w[f"{p}.mlp_norm.bias"] = Tensor(np.zeros(d, dtype=dtype))
        w[f"{p}.w_in"] = lin(d, ff)
        w[f"{p}.w_out"] = lin(ff, d)
    w["final_norm.gain"] = Tensor(np.ones(d, dtype=dtype))
    w["final_norm.bias"] = Tensor(np.zeros(d, dtype=dtype))
    w["lm_head"] = lin(d, cfg.vocab)
    return w


def lora_inject(cfg: LMConfig, lora_cfg: LoRAConfig, seed: int, dtype=np.float32) -> dict[str, Tensor]:
    """Low-rank adapters on every layer's query/value projections.

    A is random-normal, B is zero, so injection leaves outputs bit-identical
    until training moves B. Only these tensors are tracked.
    """
    rng = np.random.default_rng(seed)
    r = lora_cfg.rank
    if r >= min(cfg.d_model, cfg.kv_width):
        log.warning("LoRA rank %d is not low-rank for these shapes", r)
    out: dict[str, Tensor] = {}
    for i in range(cfg.layers):
        for target, width in (("q", cfg.d_model), ("v", cfg.kv_width)):
            p = f"layers.{i}.{target}"
            out[f"{p}.a"] = Tensor(
                rng.normal(0.0, 1.0 / np.sqrt(cfg.d_model), size=(cfg.d_model, r)).astype(dtype),
                tracked=True,
            )
            out[f"{p}.b"] = Tensor(np.zeros((r, width), dtype=dtype), tracked=True)
    return out


def count_lora_params(cfg: LMConfig, lora_cfg: LoRAConfig) -> int:
    """Trainable adapter elements by the counting formula (no allocation)."""
    r = lora_cfg.rank
    per_layer = (cfg.d_model * r + r * cfg.d_model) + (cfg.d_model * r + r * cfg.kv_width)
    return cfg.layers * per_layer


def count_trainable(named_params: dict[str, Tensor]) -> dict[str, int]:
    """Per-group tracked-element counts keyed by name prefix, plus frozen total."""
    groups = {"adapter": 0, "lora": 0, "encoder": 0, "lm": 0, "frozen": 0}
    for name, t in named_params.items():
        prefix = name.split(".", 1)[0]
        if not t.tracked:
            groups["frozen"] += t.size
        elif prefix in groups:
            groups[prefix] += t.size
        else:
            groups.setdefault(prefix, 0)
            groups[prefix] += t.size
    return groups


# ---------------------------------------------------------------------------
# forward


def _rotary_tables(positions: np.ndarray, head_dim: int, dtype) -> tuple[Tensor, Tensor]:
    half = head_dim // 2
    inv_freq = 1.0 / (10000.0 ** (np.arange(half) / half))
    angles = positions[:, None] * inv_freq[None, :]
    cos = np.cos(angles)[None, :, :]  # (1, T, half) broadcast over heads
    sin = np.sin(angles)[None, :, :]
    return Tensor(cos.astype(dtype)), Tensor(sin.astype(dtype))


def _apply_rotary(x: Tensor, cos: Tensor, sin: Tensor) -> Tensor:
    half = x.shape[-1] // 2
    x1 = x[:, :, :half]
    x2 = x[:, :, half:]
    return ag.concat([x1 * cos - x2 * sin, x1 * sin + x2 * cos], axis=-1)


def _lora_path(x: Tensor, lora: dict[str, Tensor], prefix: str, scaling: float,
               dropout: float, rng: np.random.Generator | None) -> Tensor:
    h = ag.dropout(x, dropout, rng)
    return ag.matmul(ag.matmul(h, lora[f"{prefix}.a"]), lora[f"{prefix}.b"]) * scaling


def _split_heads(x: Tensor, n_heads: int, head_dim: int) -> Tensor:
    t = x.shape[0]
    return ag.transpose(ag.reshape(x, (t, n_heads, head_dim)), (1, 0, 2))  # (H, T, hd)


def lm_forward(
    token_ids,
    soft_prompt: Tensor | None,
    weights: dict[str, Tensor],
    cfg: LMConfig,
    lora: dict[str, Tensor] | None = None,
    lora_cfg: LoRAConfig | None = None,
    dropout_rng: np.random.Generator | None = None,
    cache: list[dict] | None = None,
    return_hidden: bool = False,
):
    """Logits for every position of [soft prompt ; tokens].

    With `cache`, only new tokens are fed and per-layer rotary keys/values are
    appended in place (inference only).
    """
    ids = np.asarray(list(token_ids), dtype=np.int64)
    d = cfg.d_model

    parts = []
    if soft_prompt is not None:
        if soft_prompt.shape[-1] != d:
            raise DimensionError(
                f"soft prompt width {soft_prompt.shape[-1]} != d_model {d}"
            )
        parts.append(soft_prompt)
    if ids.size:
        parts.append(ag.embedding_lookup(weights["tok_embed"], ids))
    if not parts:
        raise ContractError("lm_forward needs a soft prompt or at least one token")
    x = parts[0] if len(parts) == 1 else ag.concat(parts, axis=0)

    start = 0
    if cache is not None:
        if not cache:
            cache.extend({"k": None, "v": None} for _ in range(cfg.layers))
        elif cache[0]["k"] is not None:
            start = cache[0]["k"].shape[1]
    t_new = x.shape[0]
    total = start + t_new
    if total > cfg.max_context:
        raise LengthError(f"{total} positions exceed max context {cfg.max_context}")

    positions = np.arange(start, total, dtype=np.float64)
    cos, sin = _rotary_tables(positions, cfg.head_dim, x.dtype)
    group_ids = np.repeat(np.arange(cfg.kv_heads), cfg.heads // cfg.kv_heads)
    # causal: new row i (absolute start+i) sees absolute columns <= start+i
    col = np.arange(total)[None, :]
    row = np.arange(start, total)[:, None]
    mask = Tensor(np.where(col <= row, 0.0, NEG_MASK).astype(np.dtype(x.dtype)))
    scale = 1.0 / math.sqrt(cfg.head_dim)

    for i in range(cfg.layers):
        p = f"layers.{i}"
        h = ag.layer_norm(x, weights[f"{p}.attn_norm.gain"], weights[f"{p}.attn_norm.bias"])
        q = ag.matmul(h, weights[f"{p}.w_q"])
        k = ag.matmul(h, weights[f"{p}.w_k"])
        v = ag.matmul(h, weights[f"{p}.w_v"])
        if lora is not None:
            q = q + _lora_path(h, lora, f"{p}.q", lora_cfg.scaling, lora_cfg.dropout, dropout_rng)
            v = v + _lora_path(h, lora, f"{p}.v", lora_cfg.scaling, lora_cfg.dropout, dropout_rng)

        qh = _apply_rotary(_split_heads(q, cfg.heads, cfg.head_dim), cos, sin)  # (H, Tn, hd)
        kg = _apply_rotary(_split_heads(k, cfg.kv_heads, cfg.head_dim), cos, sin)
        vg = _split_heads(v, cfg.kv_heads, cfg.head_dim)  # (G, Tn, hd)

        if cache is not None:
            entry = cache[i]
            k_all = kg.data if entry["k"] is None else np.concatenate([entry["k"], kg.data], axis=1)
            v_all = vg.data if entry["v"] is None else np.concatenate([entry["v"], vg.data], axis=1)
            entry["k"], entry["v"] = k_all, v_all
            kg, vg = Tensor(k_all), Tensor(v_all)

        kh = ag.embedding_lookup(kg, group_ids)  # (H, T_total, hd)
        vh = ag.embedding_lookup(vg, group_ids)
        scores = ag.matmul(qh, ag.transpose(kh, (0, 2, 1))) * scale + mask
        attn = ag.softmax(scores)
        ctx = ag.matmul(attn, vh)  # (H, Tn, hd)
        ctx = ag.reshape(ag.transpose(ctx, (1, 0, 2)), (t_new, d))
        x = x + ag.matmul(ctx, weights[f"{p}.w_o"])

        h = ag.layer_norm(x, weights[f"{p}.mlp_norm.gain"], weights[f"{p}.mlp_norm.bias"])
        x = x + ag.matmul(ag.silu(ag.matmul(h, weights[f"{p}.w_in"])), weights[f"{p}.w_out"])

    hidden = ag.layer_norm(x, weights["final_norm.gain"], weights["final_norm.bias"])
    logits = ag.matmul(hidden, weights["lm_head"])
    if return_hidden:
        return logits, hidden
    return logits


def encode_question(
    question: str,
    weights: dict[str, Tensor],
    cfg: LMConfig,
    lora: dict[str, Tensor] | None = None,
    lora_cfg: LoRAConfig | None = None,
    dropout_rng: np.random.Generator | None = None,
) -> Tensor:
    """Post-final-norm hidden state at the last token of BOS + question."""
    if not question:
        raise ContractError("question must be non-empty")
    ids = [BOS] + tokenize(question)
    _, hidden = lm_forward(
        ids, None, weights, cfg, lora=lora, lora_cfg=lora_cfg,
        dropout_rng=dropout_rng, return_hidden=True,
    )
    return hidden[-1]


def prompt_token_ids(question: str) -> list[int]:
    """Tokens preceding the answer under the fixed chat template."""
    return [BOS] + tokenize(question) + tokenize(ANSWER_SEPARATOR)


def full_token_ids(question: str, answer: str) -> list[int]:
    return prompt_token_ids(question) + tokenize(answer) + [EOS]


def generate(
    soft_prompt: Tensor | None,
    question: str,
    weights: dict[str, Tensor],
    cfg: LMConfig,
    lora: dict[str, Tensor] | None = None,
    lora_cfg: LoRAConfig | None = None,
    max_new: int = 128,
    mode: str = "greedy",
    temperature: float = 1.0,
    seed: int = 0,
) -> str:
    """Autoregressive answer after [soft prompt ; BOS ; question ; separator]."""
    if mode not in ("greedy", "temperature"):
        raise ContractError(f"unknown decode mode {mode!r}")
    prefix = prompt_token_ids(question)
    n_prompt = soft_prompt.shape[0] if soft_prompt is not None else 0
    if n_prompt + len(prefix) >= cfg.max_context:
        raise LengthError("no context budget left for generation")
    if max_new == 0:
        return ""
    rng = np.random.default_rng(seed)
    out: list[int] = []
    with ag.no_grad():
        cache: list[dict] = []
        logits = lm_forward(prefix, soft_prompt, weights, cfg, lora=lora,
                            lora_cfg=lora_cfg, cache=cache)
        while True:
            row = logits.data[-1]
            if mode == "greedy":
                nxt = int(np.argmax(row))
            else:
                z = (row / max(temperature, 1e-6)).astype(np.float64)
                z -= z.max()
                p = np.exp(z)
                p /= p.sum()
                nxt = int(rng.choice(len(p), p=p))
            if nxt == EOS:
                break
            out.append(nxt)
            if len(out) >= max_new:
                break
            if n_prompt + len(prefix) + len(out) >= cfg.max_context:
                break
            logits = lm_forward([nxt], None, weights, cfg, lora=lora,
                                lora_cfg=lora_cfg, cache=cache)
    return detokenize(out)

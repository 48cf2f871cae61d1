"""Question-conditioned compression of protein embeddings into a fixed-length soft prompt.

Pipeline: project per-residue embeddings to the output width and add sinusoidal
positions; fuse the question vector into a set of learnable queries; one
multi-head cross-attention over the projected residues; concat heads through an
output map. The result always has `query_count` rows regardless of protein size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ConfigError, DimensionError


@dataclass
class AdapterConfig:
    input_width: int  # encoder ensemble width
    output_width: int  # soft prompt width (must equal LM d_model)
    question_width: int  # question vector width (LM d_model)
    query_count: int = 256
    heads: int = 8

    def __post_init__(self):
        if self.query_count < 1:
            raise ConfigError("query_count must be >= 1")
        if self.output_width % self.heads != 0:
            raise ConfigError(
                f"output_width {self.output_width} not divisible by heads {self.heads}"
            )

    @property
    def head_width(self) -> int:
        return self.output_width // self.heads


def _weight_shapes(cfg: AdapterConfig) -> dict[str, tuple[int, ...]]:
    """Single source of truth for adapter weight extents (init + counting)."""
    shapes: dict[str, tuple[int, ...]] = {
        "w_proj": (cfg.input_width, cfg.output_width),
        "b_proj": (cfg.output_width,),
        "w_qf": (cfg.question_width, cfg.output_width),
        "b_qf": (cfg.output_width,),
        "queries": (cfg.query_count, cfg.output_width),
    }
    for k in range(cfg.heads):
        shapes[f"head{k}.w_q"] = (cfg.output_width, cfg.head_width)
        shapes[f"head{k}.w_k"] = (cfg.output_width, cfg.head_width)
        shapes[f"head{k}.w_v"] = (cfg.output_width, cfg.head_width)
    shapes["w_out"] = (cfg.heads * cfg.head_width, cfg.output_width)
    shapes["b_out"] = (cfg.output_width,)
    return shapes


def init_adapter_weights(cfg: AdapterConfig, seed: int, dtype=np.float32) -> dict[str, Tensor]:
    """All adapter weights are trainable."""
    rng = np.random.default_rng(seed)
    out: dict[str, Tensor] = {}
    for name, shape in _weight_shapes(cfg).items():
        if name == "queries":
            data = rng.normal(0.0, 0.02, size=shape)
        elif len(shape) == 1:
            data = np.zeros(shape)
        else:
            std = np.sqrt(2.0 / (shape[0] + shape[1]))
            data = rng.normal(0.0, std, size=shape)
        out[name] = Tensor(data.astype(dtype), tracked=True)
    return out


def count_adapter_params(cfg: AdapterConfig) -> tuple[dict[str, int], int]:
    """Exact element counts per named weight, plus the total."""
    counts = {name: int(np.prod(shape)) for name, shape in _weight_shapes(cfg).items()}
    return counts, sum(counts.values())


def positional_encoding(length: int, dim: int, dtype=np.float32) -> Tensor:
    """Sinusoidal table, recomputed per call for the requested length."""
    if dim % 2 != 0:
        raise ConfigError(f"positional encoding width must be even, got {dim}")
    if length < 1:
        raise ConfigError("positional encoding length must be >= 1")
    pos = np.arange(length, dtype=np.float64)[:, None]
    i = np.arange(dim // 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * i / dim)
    pe = np.zeros((length, dim))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)
    return Tensor(pe.astype(dtype))


def project_protein(
    h_v: Tensor, weights: dict[str, Tensor], cfg: AdapterConfig, use_positional: bool = True
) -> Tensor:
    """Map (n, input_width) embeddings to (n, output_width) keys/values space."""
    if h_v.shape[-1] != cfg.input_width:
        raise DimensionError(
            f"protein embedding width {h_v.shape[-1]} != configured {cfg.input_width}"
        )
    x = ag.matmul(h_v, weights["w_proj"]) + weights["b_proj"]
    if use_positional:
        x = x + positional_encoding(h_v.shape[0], cfg.output_width, dtype=h_v.dtype)
    return x


def fuse_question(
    queries: Tensor,
    question_vector: Tensor,
    weights: dict[str, Tensor],
    cfg: AdapterConfig,
    use_positional: bool = True,
) -> Tensor:
    """Add the mapped question vector to every query, then query positions."""
    if question_vector.shape[-1] != cfg.question_width:
        raise DimensionError(
            f"question vector width {question_vector.shape[-1]} != configured {cfg.question_width}"
        )
    fused = queries + ag.reshape(
        ag.matmul(ag.reshape(question_vector, (1, cfg.question_width)), weights["w_qf"])
        + weights["b_qf"],
        (1, cfg.output_width),
    )
    if use_positional:
        fused = fused + positional_encoding(cfg.query_count, cfg.output_width, dtype=queries.dtype)
    return fused


def cross_attend(
    q_fused: Tensor,
    x_proj: Tensor,
    weights: dict[str, Tensor],
    cfg: AdapterConfig,
    return_attention: bool = False,
):
    """Multi-head cross-attention of queries over projected residues."""
    if q_fused.shape[-1] != cfg.output_width or x_proj.shape[-1] != cfg.output_width:
        raise DimensionError("cross_attend operand widths do not match output_width")
    scale = 1.0 / np.sqrt(cfg.head_width)
    heads = []
    attns = []
    for k in range(cfg.heads):
        qk = ag.matmul(q_fused, weights[f"head{k}.w_q"])
        kk = ag.matmul(x_proj, weights[f"head{k}.w_k"])
        vk = ag.matmul(x_proj, weights[f"head{k}.w_v"])
        attn = ag.softmax(ag.matmul(qk, ag.transpose(kk)) * scale)
        heads.append(ag.matmul(attn, vk))
        if return_attention:
            attns.append(attn.data)
    prompt = ag.matmul(ag.concat(heads, axis=1), weights["w_out"]) + weights["b_out"]
    if return_attention:
        return prompt, np.stack(attns)
    return prompt


def adapter_forward(
    h_v: Tensor,
    question_vector: Tensor,
    weights: dict[str, Tensor],
    cfg: AdapterConfig,
    use_positional: bool = True,
) -> Tensor:
    """Soft prompt of shape (query_count, output_width)."""
    x_proj = project_protein(h_v, weights, cfg, use_positional=use_positional)
    q_fused = fuse_question(weights["queries"], question_vector, weights, cfg,
                            use_positional=use_positional)
    return cross_attend(q_fused, x_proj, weights, cfg)

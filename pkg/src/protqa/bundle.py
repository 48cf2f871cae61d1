"""Assembly of the full pipeline: frozen encoder ensemble, trainable adapter,
frozen LM base with trainable low-rank adapters; checkpoint (de)serialization."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from . import autograd as ag
from .adapter import AdapterConfig, adapter_forward, init_adapter_weights
from .autograd import Tensor
from .checkpoint import load_entries, pack_text, save_entries, unpack_text
from .encoder import EncoderConfig, ensemble_encode, init_ensemble_weights
from .errors import CheckpointError, ConfigError
from .lm import (
    LMConfig,
    LoRAConfig,
    TEMPLATE_VERSION,
    encode_question,
    full_token_ids,
    generate,
    init_lm_weights,
    lm_forward,
    lora_inject,
    prompt_token_ids,
)
from .pdbio import BackboneStructure


@dataclass
class ModelBundle:
    encoder_cfg: EncoderConfig
    ensemble: list[dict[str, Tensor]]
    adapter_cfg: AdapterConfig
    adapter: dict[str, Tensor]
    lm_cfg: LMConfig
    lm: dict[str, Tensor]
    lora_cfg: LoRAConfig | None
    lora: dict[str, Tensor] | None
    template_version: str = TEMPLATE_VERSION

    def named_params(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for m, member in enumerate(self.ensemble):
            for k, t in member.items():
                out[f"encoder.{m}.{k}"] = t
        for k, t in self.adapter.items():
            out[f"adapter.{k}"] = t
        for k, t in self.lm.items():
            out[f"lm.{k}"] = t
        if self.lora is not None:
            for k, t in self.lora.items():
                out[f"lora.{k}"] = t
        return out

    def trainable(self) -> dict[str, Tensor]:
        return {k: t for k, t in self.named_params().items() if t.tracked}

    def config_dict(self) -> dict:
        return {
            "encoder": asdict(self.encoder_cfg),
            "adapter": asdict(self.adapter_cfg),
            "lm": asdict(self.lm_cfg),
            "lora": asdict(self.lora_cfg) if self.lora_cfg else None,
            "template_version": self.template_version,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.config_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def build_bundle(
    encoder_cfg: EncoderConfig,
    adapter_cfg: AdapterConfig,
    lm_cfg: LMConfig,
    lora_cfg: LoRAConfig | None,
    seed: int = 0,
) -> ModelBundle:
    if adapter_cfg.input_width != encoder_cfg.combined_dim:
        raise ConfigError(
            f"adapter input width {adapter_cfg.input_width} != encoder ensemble width "
            f"{encoder_cfg.combined_dim}"
        )
    if adapter_cfg.output_width != lm_cfg.d_model or adapter_cfg.question_width != lm_cfg.d_model:
        raise ConfigError("adapter output/question widths must equal the LM d_model")
    return ModelBundle(
        encoder_cfg=encoder_cfg,
        ensemble=init_ensemble_weights(encoder_cfg),
        adapter_cfg=adapter_cfg,
        adapter=init_adapter_weights(adapter_cfg, seed=seed + 1),
        lm_cfg=lm_cfg,
        lm=init_lm_weights(lm_cfg, seed=seed + 2),
        lora_cfg=lora_cfg,
        lora=lora_inject(lm_cfg, lora_cfg, seed=seed + 3) if lora_cfg else None,
    )


def encode_structure(bundle: ModelBundle, structure: BackboneStructure) -> np.ndarray:
    """Frozen ensemble embedding as a plain array (cacheable)."""
    with ag.no_grad():
        return ensemble_encode(structure, bundle.ensemble, bundle.encoder_cfg).data


def question_vector(bundle: ModelBundle, question: str,
                    dropout_rng: np.random.Generator | None = None) -> Tensor:
    return encode_question(
        question, bundle.lm, bundle.lm_cfg,
        lora=bundle.lora, lora_cfg=bundle.lora_cfg, dropout_rng=dropout_rng,
    )


def soft_prompt_for(bundle: ModelBundle, h_v: Tensor, question: str,
                    dropout_rng: np.random.Generator | None = None,
                    question_fusion: bool = True) -> Tensor:
    """Encoder output + question -> soft prompt; fusion can be ablated to zero."""
    if question_fusion:
        qv = question_vector(bundle, question, dropout_rng=dropout_rng)
    else:
        qv = Tensor(np.zeros(bundle.adapter_cfg.question_width, dtype=h_v.dtype))
    return adapter_forward(h_v, qv, bundle.adapter, bundle.adapter_cfg)


def qa_loss(bundle: ModelBundle, h_v: Tensor, question: str, answer: str,
            dropout_rng: np.random.Generator | None = None,
            question_fusion: bool = True) -> Tensor:
    """Answer-masked cross-entropy for one sample (teacher forcing)."""
    prompt = soft_prompt_for(bundle, h_v, question, dropout_rng=dropout_rng,
                             question_fusion=question_fusion)
    ids = full_token_ids(question, answer)
    n_q = prompt.shape[0]
    logits = lm_forward(ids[:-1], prompt, bundle.lm, bundle.lm_cfg,
                        lora=bundle.lora, lora_cfg=bundle.lora_cfg,
                        dropout_rng=dropout_rng)
    n_rows = n_q + len(ids) - 1
    targets = np.zeros(n_rows, dtype=np.int64)
    mask = np.ones(n_rows, dtype=bool)
    answer_start = len(prompt_token_ids(question))
    for t in range(len(ids) - 1):
        targets[n_q + t] = ids[t + 1]
        if t + 1 >= answer_start:
            mask[n_q + t] = False
    return ag.cross_entropy(logits, targets, ignore_mask=mask)


def answer_question(bundle: ModelBundle, h_v: Tensor, question: str,
                    max_new: int = 128, mode: str = "greedy",
                    temperature: float = 1.0, seed: int = 0,
                    question_fusion: bool = True) -> str:
    with ag.no_grad():
        prompt = soft_prompt_for(bundle, h_v, question, question_fusion=question_fusion)
        return generate(prompt, question, bundle.lm, bundle.lm_cfg,
                        lora=bundle.lora, lora_cfg=bundle.lora_cfg,
                        max_new=max_new, mode=mode, temperature=temperature, seed=seed)


# ---------------------------------------------------------------------------
# checkpoint io


def save_bundle(bundle: ModelBundle, path) -> None:
    entries: dict[str, np.ndarray] = {
        "meta.template_version": pack_text(bundle.template_version),
        "meta.config": pack_text(json.dumps(bundle.config_dict(), sort_keys=True)),
    }
    for name in sorted(bundle.named_params()):
        entries[name] = bundle.named_params()[name].data
    save_entries(path, entries)


def load_bundle(path) -> ModelBundle:
    entries = load_entries(path)
    if "meta.template_version" not in entries or "meta.config" not in entries:
        raise CheckpointError("checkpoint is missing bundle metadata")
    version = unpack_text(entries["meta.template_version"])
    if version != TEMPLATE_VERSION:
        raise CheckpointError(
            f"checkpoint template version {version!r} != supported {TEMPLATE_VERSION!r}"
        )
    cfg = json.loads(unpack_text(entries["meta.config"]))
    encoder_cfg = EncoderConfig(**cfg["encoder"])
    adapter_cfg = AdapterConfig(**cfg["adapter"])
    lm_cfg = LMConfig(**cfg["lm"])
    lora_cfg = LoRAConfig(**cfg["lora"]) if cfg.get("lora") else None
    bundle = build_bundle(encoder_cfg, adapter_cfg, lm_cfg, lora_cfg)
    params = bundle.named_params()
    for name, tensor in params.items():
        if name not in entries:
            raise CheckpointError(f"checkpoint is missing weight {name!r}")
        arr = entries[name]
        if tuple(arr.shape) != tensor.shape:
            raise CheckpointError(
                f"weight {name!r} has shape {arr.shape}, expected {tensor.shape}"
            )
        tensor.data = arr.astype(tensor.data.dtype, copy=True)
    return bundle

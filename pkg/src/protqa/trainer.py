"""Joint training: frozen encoder, full adapter, LoRA-only LM; Adam with
gradient accumulation; deterministic given (seed, data, single thread)."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .bundle import ModelBundle, encode_structure, qa_loss, save_bundle
from .corpus import DatasetSplit, QASample
from .errors import ContractError, LengthError
from .lm import full_token_ids
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr: float = 1e-4
    batch_size: int = 2
    grad_accum: int = 8
    epochs: int = 2
    seed: int = 0
    checkpoint_every: int = 0  # optimizer steps between periodic checkpoints; 0 = end only
    max_steps: int = 0  # 0 = no cap
    question_fusion: bool = True  # ablation hook: zero question vector when False
    shuffle_coords_seed: int | None = None  # ablation hook: per-sample coordinate shuffle

    def __post_init__(self):
        for name in ("lr", "batch_size", "grad_accum", "epochs"):
            if getattr(self, name) <= 0:
                raise ContractError(f"{name} must be positive")


@dataclass
class TrainResult:
    loss_curve: list[tuple[int, float]] = field(default_factory=list)
    valid_losses: list[tuple[int, float]] = field(default_factory=list)
    skipped: int = 0
    steps: int = 0
    checkpoint_path: str | None = None


def _shuffled_structure(sample: QASample, base_dir, seed: int):
    """Permute residue coordinates against sequence order (control arm)."""
    structure = sample.structure(base_dir)
    rng = np.random.default_rng([seed, abs(hash(sample.id)) % (2**31)])
    perm = rng.permutation(structure.n_residues)
    coords = structure.coords_array()[perm]
    for r, c in zip(structure.residues, coords):
        r.coords = c
    return structure


def _sample_embedding(bundle: ModelBundle, sample: QASample, base_dir,
                      cache: dict, cfg: TrainConfig) -> np.ndarray:
    if sample.id not in cache:
        if cfg.shuffle_coords_seed is not None:
            structure = _shuffled_structure(sample, base_dir, cfg.shuffle_coords_seed)
        else:
            structure = sample.structure(base_dir)
        cache[sample.id] = encode_structure(bundle, structure)
    return cache[sample.id]


def _token_length(bundle: ModelBundle, sample: QASample) -> int:
    return bundle.adapter_cfg.query_count + len(full_token_ids(sample.question, sample.answer))


def mean_loss(bundle: ModelBundle, samples: list[QASample], base_dir,
              cache: dict, cfg: TrainConfig) -> float:
    """Dropout-free mean loss (validation)."""
    total, used = 0.0, 0
    with ag.no_grad():
        for s in samples:
            try:
                h_v = Tensor(_sample_embedding(bundle, s, base_dir, cache, cfg))
                loss = qa_loss(bundle, h_v, s.question, s.answer,
                               question_fusion=cfg.question_fusion)
            except LengthError:
                continue
            total += float(loss.data)
            used += 1
    return total / used if used else float("nan")


def train(bundle: ModelBundle, data: DatasetSplit, cfg: TrainConfig,
          out_dir: str | Path | None = None) -> TrainResult:
    """Run the training loop; emits loss curve CSV, run manifest and checkpoints."""
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "run.json").write_text(
            json.dumps({"train": asdict(cfg), "model": bundle.config_dict()},
                       sort_keys=True, indent=2) + "\n"
        )

    trainable = bundle.trainable()
    names = sorted(trainable)
    params = [trainable[k] for k in names]
    if not params:
        raise ContractError("bundle has no trainable parameters")
    frozen_before = {k: t.data.tobytes() for k, t in bundle.named_params().items()
                     if not t.tracked}
    state = AdamState(lr=cfg.lr)
    cache: dict[str, np.ndarray] = {}
    result = TrainResult()
    base_dir = data.base_dir
    per_step = cfg.batch_size * cfg.grad_accum
    dropout = bundle.lora_cfg is not None and bundle.lora_cfg.dropout > 0

    # length-bucketed batches, batch order shuffled per epoch by seed
    lengths = [(_token_length(bundle, s), i) for i, s in enumerate(data.train)]
    by_length = [i for _, i in sorted(lengths)]
    batches = [by_length[i: i + cfg.batch_size] for i in range(0, len(by_length), cfg.batch_size)]

    micro = 0
    stop = False
    for epoch in range(cfg.epochs):
        order = np.random.default_rng([cfg.seed, epoch]).permutation(len(batches))
        accum_loss, accum_count, used_in_epoch = 0.0, 0, 0
        for bi in order:
            for si in batches[bi]:
                sample = data.train[si]
                micro += 1
                rng = np.random.default_rng([cfg.seed, 7919, micro]) if dropout else None
                try:
                    h_v = Tensor(_sample_embedding(bundle, sample, base_dir, cache, cfg))
                    loss = qa_loss(bundle, h_v, sample.question, sample.answer,
                                   dropout_rng=rng, question_fusion=cfg.question_fusion)
                except LengthError:
                    result.skipped += 1
                    continue
                scaled = loss * (1.0 / per_step)
                ag.backward(scaled)
                accum_loss += float(loss.data)
                accum_count += 1
                used_in_epoch += 1
                if accum_count >= per_step:
                    adam_step(params, [p.grad for p in params], state)
                    ag.zero_grads(params)
                    result.steps += 1
                    result.loss_curve.append((result.steps, accum_loss / accum_count))
                    accum_loss, accum_count = 0.0, 0
                    if out_dir and cfg.checkpoint_every and result.steps % cfg.checkpoint_every == 0:
                        save_bundle(bundle, out_dir / f"step{result.steps:06d}.ckpt")
                    if cfg.max_steps and result.steps >= cfg.max_steps:
                        stop = True
                        break
            if stop:
                break
        if accum_count and not stop:  # flush a trailing partial accumulation window
            adam_step(params, [p.grad for p in params], state)
            ag.zero_grads(params)
            result.steps += 1
            result.loss_curve.append((result.steps, accum_loss / accum_count))
        if used_in_epoch == 0 and data.train:
            raise LengthError("every training sample overflowed the context window")
        if data.valid:
            v = mean_loss(bundle, data.valid, base_dir, cache, cfg)
            result.valid_losses.append((result.steps, v))
            log.info("epoch %d: %d steps, valid loss %.4f", epoch, result.steps, v)
        if stop:
            break

    for k, t in bundle.named_params().items():
        if not t.tracked and t.data.tobytes() != frozen_before[k]:
            raise ContractError(f"frozen weight {k} changed during training")

    if out_dir is not None:
        ckpt = out_dir / "final.ckpt"
        save_bundle(bundle, ckpt)
        result.checkpoint_path = str(ckpt)
        rows = ["step,train_loss,valid_loss"]
        valid_at = dict(result.valid_losses)
        for step, tr in result.loss_curve:
            v = valid_at.get(step)
            rows.append(f"{step},{tr:.6f},{'' if v is None else f'{v:.6f}'}")
        (out_dir / "loss_curve.csv").write_text("\n".join(rows) + "\n")
    return result

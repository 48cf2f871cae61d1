"""Controlled desk-scale ablations: sequence-init vs zero-init node states,
real vs shuffled coordinates, live vs disabled early question fusion.

Each arm trains the same architecture with one factor removed, then scores
greedy generations on held-out questions with corpus BLEU-2. Results are
cached as JSON per (arm, seed) so the acceptance suite can verify without
retraining.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .adapter import AdapterConfig
from .autograd import Tensor
from .bundle import answer_question, build_bundle
from .corpus import DatasetSplit, QASample
from .encoder import INIT_SEQUENCE, INIT_ZEROS, EncoderConfig
from .errors import ConfigError, LengthError
from .lm import LMConfig, LoRAConfig
from .metrics import bleu2
from .synth import synth_corpus
from .trainer import TrainConfig, _sample_embedding, train

log = logging.getLogger(__name__)

ARMS = ("full", "zeros_init", "shuffled_coords", "no_fusion")


@dataclass
class AblationSpec:
    seed: int = 0
    n_samples: int = 2000
    residues_range: tuple[int, int] = (14, 24)
    # several distinct questions per protein block protein-level memorization
    identity_per_protein: int = 5
    contact_per_protein: int = 5
    segment_per_protein: int = 5
    count_per_protein: int = 1
    epochs: int = 10
    lr: float = 1.5e-3
    lora_dropout: float = 0.1
    batch_size: int = 2
    grad_accum: int = 1
    hidden_dim: int = 32
    encoder_layers: int = 1
    decoder_layers: int = 1
    ensemble_size: int = 2
    query_count: int = 24
    d_model: int = 128
    eval_limit: int = 64  # held-out samples scored per task subset
    max_new: int = 64
    dump_examples: int = 0  # per-task generation samples stored in the record

    def question_plan(self) -> dict[str, int]:
        return {
            "identity": self.identity_per_protein,
            "contact": self.contact_per_protein,
            "segment": self.segment_per_protein,
            "count": self.count_per_protein,
        }


def _bundle_for(spec: AblationSpec, arm: str):
    init_mode = INIT_ZEROS if arm == "zeros_init" else INIT_SEQUENCE
    enc = EncoderConfig(
        hidden_dim=spec.hidden_dim, encoder_layers=spec.encoder_layers,
        decoder_layers=spec.decoder_layers, neighbors=12,
        rbf_count=8, ensemble_size=spec.ensemble_size, init_mode=init_mode,
        seed=1000 + spec.seed,
    )
    ada = AdapterConfig(
        input_width=enc.combined_dim, output_width=spec.d_model,
        question_width=spec.d_model, query_count=spec.query_count, heads=8,
    )
    lm = LMConfig(layers=4, d_model=spec.d_model, heads=8, kv_heads=2, max_context=1024)
    return build_bundle(enc, ada, lm, LoRAConfig(dropout=spec.lora_dropout), seed=spec.seed)


def _train_cfg(spec: AblationSpec, arm: str) -> TrainConfig:
    return TrainConfig(
        lr=spec.lr, batch_size=spec.batch_size, grad_accum=spec.grad_accum,
        epochs=spec.epochs, seed=spec.seed,
        question_fusion=arm != "no_fusion",
        shuffle_coords_seed=spec.seed if arm == "shuffled_coords" else None,
    )


def _task_subsets(samples: list[QASample], limit: int) -> dict[str, list[QASample]]:
    subsets: dict[str, list[QASample]] = {"identity": [], "contact": [], "mixed": []}
    for s in samples:
        task = s.meta.get("task")
        if task in ("identity", "contact") and len(subsets[task]) < limit:
            subsets[task].append(s)
        if len(subsets["mixed"]) < limit:
            subsets["mixed"].append(s)
    return subsets


def evaluate_arm(bundle, samples: list[QASample], cfg: TrainConfig,
                 spec: AblationSpec, cache: dict) -> tuple[dict[str, float], dict]:
    scores = {}
    examples: dict[str, list] = {}
    for task, subset in _task_subsets(samples, spec.eval_limit).items():
        cands, refs = [], []
        for s in subset:
            try:
                h_v = Tensor(_sample_embedding(bundle, s, None, cache, cfg))
                cands.append(answer_question(bundle, h_v, s.question,
                                             max_new=spec.max_new,
                                             question_fusion=cfg.question_fusion))
            except LengthError:
                continue
            refs.append(s.answer)
        scores[task] = bleu2(cands, refs) if cands else 0.0
        if spec.dump_examples:
            examples[task] = [
                {"q": s.question, "ref": r, "out": c}
                for s, r, c in list(zip(subset, refs, cands))[: spec.dump_examples]
            ]
    return scores, examples


def run_arm(spec: AblationSpec, arm: str) -> dict:
    """Train one arm and score it on the held-out split."""
    if arm not in ARMS:
        raise ConfigError(f"unknown ablation arm {arm!r}")
    t0 = time.time()
    corpus = synth_corpus(seed=40000 + spec.seed, n_samples=spec.n_samples,
                          residues_range=spec.residues_range,
                          per_protein=spec.question_plan())
    bundle = _bundle_for(spec, arm)
    cfg = _train_cfg(spec, arm)
    data = DatasetSplit(train=corpus.train, valid=[], test=corpus.test)
    result = train(bundle, data, cfg, None)
    cache: dict = {}
    scores, examples = evaluate_arm(bundle, corpus.test, cfg, spec, cache)
    tail = [loss for _, loss in result.loss_curve[-50:]]
    out = {
        "arm": arm,
        "seed": spec.seed,
        "spec": asdict(spec),
        "steps": result.steps,
        "final_train_loss": sum(tail) / len(tail) if tail else None,
        "bleu2": scores,
        "wall_seconds": round(time.time() - t0, 1),
    }
    if examples:
        out["examples"] = examples
    log.info("arm %s seed %d: %s (%.0fs)", arm, spec.seed, scores, out["wall_seconds"])
    return out


def run_suite(seeds=(0, 1, 2), cache_dir: str | Path = "runs/ablation",
              spec_overrides: dict | None = None) -> dict:
    """All arms x seeds, cached; returns the three criterion gap tables."""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    results: dict[tuple[str, int], dict] = {}
    for seed in seeds:
        spec = AblationSpec(seed=seed, **(spec_overrides or {}))
        for arm in ARMS:
            path = cache_dir / f"{arm}_seed{seed}.json"
            if path.exists():
                row = json.loads(path.read_text())
                if row.get("spec") == asdict(spec):
                    results[(arm, seed)] = row
                    continue
            row = run_arm(spec, arm)
            path.write_text(json.dumps(row, indent=2, sort_keys=True) + "\n")
            results[(arm, seed)] = row
    return summarize(results, seeds)


def summarize(results: dict, seeds) -> dict:
    gaps = {
        "sequence_init_gap_identity": [], "coords_gap_contact": [], "fusion_gap_mixed": [],
    }
    for seed in seeds:
        full = results[("full", seed)]["bleu2"]
        gaps["sequence_init_gap_identity"].append(
            full["identity"] - results[("zeros_init", seed)]["bleu2"]["identity"])
        gaps["coords_gap_contact"].append(
            full["contact"] - results[("shuffled_coords", seed)]["bleu2"]["contact"])
        gaps["fusion_gap_mixed"].append(
            full["mixed"] - results[("no_fusion", seed)]["bleu2"]["mixed"])
    summary = {"per_seed_gaps": gaps, "results": {f"{a}_s{s}": r["bleu2"]
               for (a, s), r in results.items()}}
    summary["criteria"] = {
        "sequence_init": {"mean": _mean(gaps["sequence_init_gap_identity"]),
                          "all_positive": all(g > 0 for g in gaps["sequence_init_gap_identity"]),
                          "threshold": 10.0},
        "coordinates": {"mean": _mean(gaps["coords_gap_contact"]),
                        "all_positive": all(g > 0 for g in gaps["coords_gap_contact"]),
                        "threshold": 10.0},
        "early_fusion": {"mean": _mean(gaps["fusion_gap_mixed"]),
                         "all_positive": all(g > 0 for g in gaps["fusion_gap_mixed"]),
                         "threshold": 5.0},
    }
    return summary


def _mean(xs):
    return sum(xs) / len(xs) if xs else 0.0


def main(argv=None) -> int:
    import argparse

    parser = argparse.ArgumentParser(description="run the ablation suite")
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--cache-dir", default="runs/ablation")
    parser.add_argument("--arm", choices=ARMS)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--n-samples", type=int)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    overrides = {}
    if args.epochs:
        overrides["epochs"] = args.epochs
    if args.n_samples:
        overrides["n_samples"] = args.n_samples
    if args.arm:
        spec = AblationSpec(seed=args.seed, **overrides)
        row = run_arm(spec, args.arm)
        path = Path(args.cache_dir)
        path.mkdir(parents=True, exist_ok=True)
        out = path / f"{args.arm}_seed{args.seed}.json"
        out.write_text(json.dumps(row, indent=2, sort_keys=True) + "\n")
        print(json.dumps(row["bleu2"], indent=2))
        return 0
    summary = run_suite(seeds=tuple(args.seeds), cache_dir=args.cache_dir,
                        spec_overrides=overrides)
    print(json.dumps(summary["criteria"], indent=2))
    return 0


if __name__ == "__main__":
    import sys

    sys.exit(main())

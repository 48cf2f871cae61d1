"""Command-line entry points: synth, train, eval, embed, chat, serve."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .adapter import AdapterConfig
from .autograd import Tensor
from .bundle import answer_question, build_bundle, encode_structure, load_bundle
from .checkpoint import write_matrix
from .corpus import load_dataset, save_dataset
from .encoder import EncoderConfig, ensemble_encode, init_ensemble_weights
from .errors import ProtqaError
from .lm import LMConfig, LoRAConfig
from .metrics import corpus_report
from .pdbio import parse_pdb
from .synth import synth_corpus
from .trainer import TrainConfig, train


def _cmd_synth(args) -> int:
    split = synth_corpus(
        seed=args.seed,
        n_samples=args.n,
        residues_range=(args.min_residues, args.max_residues),
    )
    manifest = save_dataset(split, args.out)
    print(f"wrote {split.counts} to {manifest}")
    return 0


def _load_train_spec(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def bundle_from_spec(spec: dict):
    encoder_cfg = EncoderConfig(**spec.get("encoder", {}))
    lm_cfg = LMConfig(**spec.get("lm", {}))
    adapter_spec = dict(spec.get("adapter", {}))
    adapter_spec.setdefault("input_width", encoder_cfg.combined_dim)
    adapter_spec.setdefault("output_width", lm_cfg.d_model)
    adapter_spec.setdefault("question_width", lm_cfg.d_model)
    adapter_cfg = AdapterConfig(**adapter_spec)
    lora_spec = spec.get("lora", {})
    lora_cfg = LoRAConfig(**lora_spec) if lora_spec is not None else None
    return build_bundle(encoder_cfg, adapter_cfg, lm_cfg, lora_cfg, seed=spec.get("seed", 0))


def _cmd_train(args) -> int:
    spec = _load_train_spec(args.config)
    bundle = bundle_from_spec(spec)
    data = load_dataset(spec["dataset"])
    cfg = TrainConfig(**spec.get("train", {}))
    out_dir = Path(spec.get("out_dir", "runs/train"))
    result = train(bundle, data, cfg, out_dir)
    print(f"trained {result.steps} steps, skipped {result.skipped}, "
          f"checkpoint {result.checkpoint_path}")
    return 0


def _read_lines(path: str) -> list[str]:
    return Path(path).read_text(encoding="utf-8").splitlines()


def _cmd_eval(args) -> int:
    if args.candidates:
        if not args.references:
            print("--candidates requires --references", file=sys.stderr)
            return 1
        cands = _read_lines(args.candidates)
        refs = _read_lines(args.references)
        report = corpus_report(cands, refs)
    else:
        if not (args.checkpoint and args.dataset):
            print("eval needs --checkpoint and --dataset, or --candidates/--references",
                  file=sys.stderr)
            return 1
        bundle = load_bundle(args.checkpoint)
        data = load_dataset(args.dataset)
        samples = getattr(data, args.split)
        if args.limit:
            samples = samples[: args.limit]
        cands, refs, rows = [], [], []
        for s in samples:
            h_v = Tensor(encode_structure(bundle, s.structure(data.base_dir)))
            answer = answer_question(bundle, h_v, s.question, max_new=args.max_new)
            cands.append(answer)
            refs.append(s.answer)
            rows.append({"id": s.id, "question": s.question,
                         "reference": s.answer, "candidate": answer})
        report = corpus_report(cands, refs)
        for row, per in zip(rows, report["per_sample"]):
            per.update(row)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"BLEU-2 {report['corpus']['bleu2']:.2f} over {report['corpus']['count']} samples "
          f"-> {out}")
    return 0


def _cmd_embed(args) -> int:
    text = Path(args.pdb).read_text(encoding="utf-8")
    structure = parse_pdb(text)
    if args.checkpoint:
        bundle = load_bundle(args.checkpoint)
        matrix = encode_structure(bundle, structure)
    else:
        cfg = EncoderConfig(hidden_dim=args.hidden_dim, ensemble_size=args.ensemble,
                            seed=args.seed)
        members = init_ensemble_weights(cfg)
        matrix = ensemble_encode(structure, members, cfg).data
    write_matrix(args.out, matrix)
    print(f"wrote {matrix.shape[0]}x{matrix.shape[1]} embedding to {args.out}")
    return 0


def _cmd_chat(args) -> int:
    bundle = load_bundle(args.checkpoint)
    structure = parse_pdb(Path(args.pdb).read_text(encoding="utf-8"))
    h_v = Tensor(encode_structure(bundle, structure))
    print(f"loaded {structure.n_residues} residues; ask questions (empty line quits)")
    while True:
        try:
            question = input("? ").strip()
        except EOFError:
            break
        if not question:
            break
        print(answer_question(bundle, h_v, question, max_new=args.max_new))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    if not args.checkpoint:
        print("error: no checkpoint (use --checkpoint or PROTQA_CHECKPOINT)", file=sys.stderr)
        return 1
    bundle = load_bundle(args.checkpoint)
    app = create_app(bundle, fixtures_dir=args.fixtures)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="protqa",
                                     description="protein QA: train, evaluate and serve")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic QA corpus")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-residues", type=int, default=24)
    p.add_argument("--max-residues", type=int, default=48)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train from a JSON run config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="score generations or candidate/reference files")
    p.add_argument("--checkpoint")
    p.add_argument("--dataset")
    p.add_argument("--split", default="test", choices=("train", "valid", "test"))
    p.add_argument("--limit", type=int, default=0)
    p.add_argument("--max-new", type=int, default=64)
    p.add_argument("--candidates")
    p.add_argument("--references")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("embed", help="dump ensemble embeddings for a PDB file")
    p.add_argument("--pdb", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--hidden-dim", type=int, default=128)
    p.add_argument("--ensemble", type=int, default=9)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("chat", help="interactive REPL over a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--pdb", required=True)
    p.add_argument("--max-new", type=int, default=128)
    p.set_defaults(func=_cmd_chat)

    p = sub.add_parser("serve", help="run the HTTP inference service")
    p.add_argument("--checkpoint", default=os.environ.get("PROTQA_CHECKPOINT"),
                   help="weights to serve (env: PROTQA_CHECKPOINT)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=int(os.environ.get("PROTQA_PORT", "8000")),
                   help="listen port (env: PROTQA_PORT)")
    p.add_argument("--fixtures", default=os.environ.get("PROTQA_FIXTURES"))
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ProtqaError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""HTTP inference service: POST /api/chat, GET /api/health, GET /api/config.

One immutable bundle is shared by all handlers; request concurrency is
bounded with a short queue, overflow answers 503. The server keeps no chat
state: multi-turn clients embed history in the question text.
"""

from __future__ import annotations

import re
import threading
import time
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from . import __version__
from .autograd import Tensor
from .bundle import ModelBundle, answer_question, encode_structure, soft_prompt_for
from .errors import (
    EmptyStructureError,
    LengthError,
    NumericError,
    PdbParseError,
    ProtqaError,
)
from .lm import generate
from .pdbio import parse_pdb

MAX_PDB_BYTES = 2 * 1024 * 1024

_FIXTURE_NAME = re.compile(r"^[A-Za-z0-9_.-]+$")


class ChatRequest(BaseModel):
    pdb: str = ""  # inline PDB text, or a server-side fixture name
    question: str = ""
    max_new: int = Field(default=128, ge=0, le=4096)
    mode: str = "greedy"  # greedy | temperature
    temperature: float = Field(default=1.0, gt=0.0)
    seed: int = 0


class ChatResponse(BaseModel):
    answer: str
    timing: dict[str, float]
    model_version: str
    config_hash: str
    n_residues: int


def _resolve_pdb(req_pdb: str, fixtures_dir: Path | None) -> str:
    if len(req_pdb.encode("utf-8", errors="ignore")) > MAX_PDB_BYTES:
        raise HTTPException(status_code=413, detail="PDB payload exceeds 2 MB cap")
    if "\n" not in req_pdb and _FIXTURE_NAME.match(req_pdb or ""):
        if fixtures_dir is None:
            raise HTTPException(status_code=422, detail="no fixtures directory configured")
        path = fixtures_dir / req_pdb
        if not path.is_file():
            raise HTTPException(status_code=422, detail=f"unknown fixture {req_pdb!r}")
        return path.read_text()
    return req_pdb


def handle_chat(req: ChatRequest, bundle: ModelBundle,
                fixtures_dir: Path | None = None) -> ChatResponse:
    """parse -> ensemble encode -> question encode + adapter -> generate."""
    if not req.question.strip():
        raise HTTPException(status_code=400, detail="question must be non-empty")
    if req.mode not in ("greedy", "temperature"):
        raise HTTPException(status_code=400, detail=f"unknown mode {req.mode!r}")
    text = _resolve_pdb(req.pdb, fixtures_dir)

    t0 = time.perf_counter()
    try:
        structure = parse_pdb(text)
    except (PdbParseError, EmptyStructureError) as e:
        raise HTTPException(status_code=422, detail=str(e)) from e
    t1 = time.perf_counter()
    try:
        h_v = Tensor(encode_structure(bundle, structure))
        t2 = time.perf_counter()
        prompt = soft_prompt_for(bundle, h_v, req.question)
        t3 = time.perf_counter()
        answer = generate(
            prompt, req.question, bundle.lm, bundle.lm_cfg,
            lora=bundle.lora, lora_cfg=bundle.lora_cfg,
            max_new=req.max_new, mode=req.mode,
            temperature=req.temperature, seed=req.seed,
        )
        t4 = time.perf_counter()
    except LengthError as e:
        raise HTTPException(status_code=413, detail=str(e)) from e
    except NumericError as e:
        raise HTTPException(status_code=500, detail=str(e)) from e
    except ProtqaError as e:
        raise HTTPException(status_code=500, detail=str(e)) from e
    return ChatResponse(
        answer=answer,
        timing={
            "parse_ms": (t1 - t0) * 1000.0,
            "encode_ms": (t2 - t1) * 1000.0,
            "adapter_ms": (t3 - t2) * 1000.0,
            "generate_ms": (t4 - t3) * 1000.0,
        },
        model_version=f"protqa/{__version__}",
        config_hash=bundle.config_hash(),
        n_residues=structure.n_residues,
    )


def create_app(bundle: ModelBundle, fixtures_dir: str | Path | None = None,
               max_concurrent: int = 4, queue_timeout: float = 5.0) -> FastAPI:
    app = FastAPI(title="protqa", version=__version__)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    fixtures = Path(fixtures_dir) if fixtures_dir else None
    gate = threading.BoundedSemaphore(max_concurrent)
    version = f"protqa/{__version__}"
    cfg_hash = bundle.config_hash()

    @app.post("/api/chat", response_model=ChatResponse)
    def chat(req: ChatRequest) -> ChatResponse:
        if not gate.acquire(timeout=queue_timeout):
            raise HTTPException(status_code=503, detail="server is at capacity")
        try:
            return handle_chat(req, bundle, fixtures)
        finally:
            gate.release()

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok", "model_version": version, "config_hash": cfg_hash}

    @app.get("/api/config")
    def config() -> dict:
        return {
            "model_version": version,
            "config_hash": cfg_hash,
            "config": bundle.config_dict(),
            "limits": {
                "max_pdb_bytes": MAX_PDB_BYTES,
                "max_context": bundle.lm_cfg.max_context,
                "max_new_cap": 4096,
            },
        }

    return app

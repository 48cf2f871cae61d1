"""Message-passing backbone encoder over a k-nearest-neighbor residue graph.

Edge features are RBF-expanded inter-atom distances plus a clipped relative
sequence-position one-hot, so they are rigid-motion invariant by construction.
Node states can start at zeros or at the sequence embedding; decoder layers
are sequence-aware either way. Weights are frozen: nothing here is tracked.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ConfigError, EmptyStructureError
from .pdbio import BackboneStructure

AA_ALPHABET = "ACDEFGHIKLMNPQRSTVWYX"
AA_TO_ID = {a: i for i, a in enumerate(AA_ALPHABET)}

MAX_RELATIVE_OFFSET = 32
MESSAGE_SCALE = 30.0

INIT_ZEROS = "zeros"
INIT_SEQUENCE = "sequence"


@dataclass
class EncoderConfig:
    hidden_dim: int = 128
    encoder_layers: int = 3
    decoder_layers: int = 3
    neighbors: int = 16
    rbf_count: int = 16
    rbf_min: float = 2.0
    rbf_max: float = 22.0
    ensemble_size: int = 9
    init_mode: str = INIT_SEQUENCE
    seed: int = 0

    def __post_init__(self):
        for name in ("hidden_dim", "encoder_layers", "decoder_layers", "neighbors", "rbf_count", "ensemble_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.init_mode not in (INIT_ZEROS, INIT_SEQUENCE):
            raise ConfigError(f"unknown init_mode {self.init_mode!r}")

    @property
    def combined_dim(self) -> int:
        """Width of the ensemble-concatenated embedding."""
        return self.hidden_dim * self.ensemble_size

    @property
    def edge_feature_dim(self) -> int:
        return 16 * self.rbf_count + (2 * MAX_RELATIVE_OFFSET + 1)


@dataclass
class StructureFeatures:
    neighbor_idx: np.ndarray  # (n, k) int64, self at column 0
    neighbor_mask: np.ndarray  # (n, k) 1.0 real / 0.0 padded
    edges: np.ndarray  # (n, k, De)
    valid: np.ndarray  # (n,) backbone-completeness flags

    @property
    def n_residues(self) -> int:
        return self.neighbor_idx.shape[0]


def _rbf(d: np.ndarray, cfg: EncoderConfig) -> np.ndarray:
    centers = np.linspace(cfg.rbf_min, cfg.rbf_max, cfg.rbf_count)
    sigma = (cfg.rbf_max - cfg.rbf_min) / cfg.rbf_count
    return np.exp(-(((d[..., None] - centers) / sigma) ** 2))


def featurize(structure: BackboneStructure, cfg: EncoderConfig, dtype=np.float32) -> StructureFeatures:
    """k-NN by CA-CA distance plus RBF/positional edge features."""
    n = structure.n_residues
    if n == 0:
        raise EmptyStructureError("cannot featurize an empty structure")
    coords = structure.coords_array().astype(np.float64)  # (n, 4, 3)
    ca = coords[:, 1]

    diff = ca[:, None, :] - ca[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    order = dist.copy()
    np.fill_diagonal(order, -1.0)  # self is always neighbor 0
    k = cfg.neighbors
    take = min(k, n)
    idx = np.argsort(order, axis=1, kind="stable")[:, :take]
    mask = np.ones((n, take))
    if take < k:
        pad = np.repeat(np.arange(n)[:, None], k - take, axis=1)
        idx = np.concatenate([idx, pad], axis=1)
        mask = np.concatenate([mask, np.zeros((n, k - take))], axis=1)

    rows = np.arange(n)[:, None]
    feats = []
    for a in range(4):
        for b in range(4):
            d = np.sqrt(((coords[rows, a] - coords[idx, b]) ** 2).sum(-1))
            feats.append(_rbf(d, cfg))
    offsets = np.clip(idx - rows, -MAX_RELATIVE_OFFSET, MAX_RELATIVE_OFFSET) + MAX_RELATIVE_OFFSET
    onehot = np.eye(2 * MAX_RELATIVE_OFFSET + 1)[offsets]
    edges = np.concatenate(feats + [onehot], axis=-1)

    return StructureFeatures(
        neighbor_idx=idx.astype(np.int64),
        neighbor_mask=mask.astype(dtype),
        edges=edges.astype(dtype),
        valid=structure.validity_flags(),
    )


# ---------------------------------------------------------------------------
# weights


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int, dtype) -> Tensor:
    std = np.sqrt(2.0 / (fan_in + fan_out))
    return Tensor(rng.normal(0.0, std, size=(fan_in, fan_out)).astype(dtype))


def _linear_block(rng, dims: list[tuple[int, int]], prefix: str, dtype) -> dict[str, Tensor]:
    out = {}
    for i, (fi, fo) in enumerate(dims, start=1):
        out[f"{prefix}.w{i}"] = _xavier(rng, fi, fo, dtype)
        out[f"{prefix}.b{i}"] = Tensor(np.zeros(fo, dtype=dtype))
    return out


def _norm(prefix: str, dim: int, dtype) -> dict[str, Tensor]:
    return {
        f"{prefix}.gain": Tensor(np.ones(dim, dtype=dtype)),
        f"{prefix}.bias": Tensor(np.zeros(dim, dtype=dtype)),
    }


def init_encoder_weights(cfg: EncoderConfig, seed: int, dtype=np.float32) -> dict[str, Tensor]:
    """One ensemble member; all tensors untracked (frozen)."""
    rng = np.random.default_rng(seed)
    dh = cfg.hidden_dim
    w: dict[str, Tensor] = {}
    w["edge_in.w"] = _xavier(rng, cfg.edge_feature_dim, dh, dtype)
    w.update(_norm("edge_in.norm", dh, dtype))
    w["seq_embed"] = _xavier(rng, len(AA_ALPHABET), dh, dtype)
    for i in range(cfg.encoder_layers):
        p = f"enc{i}"
        w.update(_linear_block(rng, [(3 * dh, dh), (dh, dh), (dh, dh)], f"{p}.msg", dtype))
        w.update(_norm(f"{p}.norm1", dh, dtype))
        w.update(_linear_block(rng, [(dh, 4 * dh), (4 * dh, dh)], f"{p}.ffn", dtype))
        w.update(_norm(f"{p}.norm2", dh, dtype))
        w.update(_linear_block(rng, [(3 * dh, dh), (dh, dh), (dh, dh)], f"{p}.edge", dtype))
        w.update(_norm(f"{p}.norm3", dh, dtype))
    for i in range(cfg.decoder_layers):
        p = f"dec{i}"
        w.update(_linear_block(rng, [(4 * dh, dh), (dh, dh), (dh, dh)], f"{p}.msg", dtype))
        w.update(_norm(f"{p}.norm1", dh, dtype))
        w.update(_linear_block(rng, [(dh, 4 * dh), (4 * dh, dh)], f"{p}.ffn", dtype))
        w.update(_norm(f"{p}.norm2", dh, dtype))
    return w


def init_ensemble_weights(cfg: EncoderConfig, dtype=np.float32) -> list[dict[str, Tensor]]:
    """Members differ only by seed; member m uses cfg.seed + m."""
    return [init_encoder_weights(cfg, cfg.seed + m, dtype) for m in range(cfg.ensemble_size)]


def sequence_ids(sequence: str) -> np.ndarray:
    return np.array([AA_TO_ID.get(a, AA_TO_ID["X"]) for a in sequence], dtype=np.int64)


# ---------------------------------------------------------------------------
# forward


def _mlp3(x: Tensor, w: dict[str, Tensor], prefix: str) -> Tensor:
    h = ag.gelu(ag.matmul(x, w[f"{prefix}.w1"]) + w[f"{prefix}.b1"])
    h = ag.gelu(ag.matmul(h, w[f"{prefix}.w2"]) + w[f"{prefix}.b2"])
    return ag.matmul(h, w[f"{prefix}.w3"]) + w[f"{prefix}.b3"]


def _ffn(x: Tensor, w: dict[str, Tensor], prefix: str) -> Tensor:
    h = ag.gelu(ag.matmul(x, w[f"{prefix}.w1"]) + w[f"{prefix}.b1"])
    return ag.matmul(h, w[f"{prefix}.w2"]) + w[f"{prefix}.b2"]


def _ln(x: Tensor, w: dict[str, Tensor], prefix: str) -> Tensor:
    return ag.layer_norm(x, w[f"{prefix}.gain"], w[f"{prefix}.bias"])


def _expand_self(h_v: Tensor, k: int) -> Tensor:
    n, dh = h_v.shape
    return ag.reshape(h_v, (n, 1, dh)) + Tensor(np.zeros((n, k, dh), dtype=h_v.dtype))


def _aggregate(messages: Tensor, mask: Tensor) -> Tensor:
    masked = messages * ag.reshape(mask, (*mask.shape, 1))
    return ag.tsum(masked, axis=1) * (1.0 / MESSAGE_SCALE)


def _encode_stages(
    structure: BackboneStructure,
    weights: dict[str, Tensor],
    cfg: EncoderConfig,
    dtype=np.float32,
) -> tuple[Tensor, Tensor]:
    """(post-encoder-stack h_V, final h_V after decoder layers)."""
    feats = featurize(structure, cfg, dtype=dtype)
    dh = cfg.hidden_dim
    if weights["edge_in.w"].shape != (cfg.edge_feature_dim, dh):
        raise ConfigError("encoder weights do not match config dimensions")
    n, k = feats.neighbor_idx.shape
    idx = feats.neighbor_idx
    mask = Tensor(feats.neighbor_mask)

    h_e = _ln(ag.matmul(Tensor(feats.edges), weights["edge_in.w"]), weights, "edge_in.norm")

    ids = sequence_ids(structure.sequence)
    seq = ag.embedding_lookup(weights["seq_embed"], ids)  # (n, dh)
    if cfg.init_mode == INIT_SEQUENCE:
        h_v = seq
    else:
        h_v = Tensor(np.zeros((n, dh), dtype=dtype))

    for i in range(cfg.encoder_layers):
        p = f"enc{i}"
        neigh = ag.embedding_lookup(h_v, idx)  # (n, k, dh)
        h_ev = ag.concat([_expand_self(h_v, k), h_e, neigh], axis=-1)
        dh_msg = _aggregate(_mlp3(h_ev, weights, f"{p}.msg"), mask)
        h_v = _ln(h_v + dh_msg, weights, f"{p}.norm1")
        h_v = _ln(h_v + _ffn(h_v, weights, f"{p}.ffn"), weights, f"{p}.norm2")
        neigh = ag.embedding_lookup(h_v, idx)
        h_msg = _mlp3(ag.concat([_expand_self(h_v, k), h_e, neigh], axis=-1), weights, f"{p}.edge")
        h_e = _ln(h_e + h_msg, weights, f"{p}.norm3")

    h_enc = h_v
    seq_neigh = ag.embedding_lookup(seq, idx)  # (n, k, dh)
    for i in range(cfg.decoder_layers):
        p = f"dec{i}"
        neigh = ag.embedding_lookup(h_v, idx)
        h_esv = ag.concat([_expand_self(h_v, k), h_e, seq_neigh, neigh], axis=-1)
        dh_msg = _aggregate(_mlp3(h_esv, weights, f"{p}.msg"), mask)
        h_v = _ln(h_v + dh_msg, weights, f"{p}.norm1")
        h_v = _ln(h_v + _ffn(h_v, weights, f"{p}.ffn"), weights, f"{p}.norm2")

    return h_enc, h_v


def encode_protein(
    structure: BackboneStructure,
    weights: dict[str, Tensor],
    cfg: EncoderConfig,
    dtype=np.float32,
) -> Tensor:
    """Per-residue embedding of one ensemble member, shape (n, hidden_dim)."""
    _, h_v = _encode_stages(structure, weights, cfg, dtype=dtype)
    return h_v


def ensemble_encode(
    structure: BackboneStructure,
    members: list[dict[str, Tensor]],
    cfg: EncoderConfig,
    dtype=np.float32,
) -> Tensor:
    """Concatenate member outputs along the feature axis: (n, hidden * members)."""
    if len(members) != cfg.ensemble_size:
        raise ConfigError(f"expected {cfg.ensemble_size} ensemble members, got {len(members)}")
    outs = [encode_protein(structure, w, cfg, dtype=dtype) for w in members]
    widths = {o.shape[1] for o in outs}
    if widths != {cfg.hidden_dim}:
        raise ConfigError(f"member output widths {widths} do not match hidden_dim")
    return ag.concat(outs, axis=1)

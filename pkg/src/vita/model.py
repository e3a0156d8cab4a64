"""Token bank with hypernetwork decoding, plus inference on top of it.

Five query tokens (con, neu, agg, slope, elev) are each shifted by the mean of
the prompt tokens, passed through a dedicated one-hidden-layer tanh MLP, and
the resulting F-dimensional vector is dotted with every pixel's feature
vector. The first three heads give semantic logits, the last two are
sigmoided into risk maps. A separate linear head predicts relative depth.

Gradients are accumulated by hand (:func:`backward`), in a fixed order, so
training is bit-reproducible.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, fields

import numpy as np
from scipy.special import expit

from .features import FEATURE_DIM, extract_features, flatten_features
from .fusion import TraversabilityOutput, fuse
from .pdt_losses import HypothesisSet
from .uncertainty import DEFAULT_ALPHA, DEFAULT_EPSILON, estimate_uncertainty

__all__ = [
    "HEAD_NAMES",
    "TokenBank",
    "ForwardCache",
    "init_token_bank",
    "forward",
    "backward",
    "decode",
    "infer",
    "save_checkpoint",
    "load_checkpoint",
    "dumps_checkpoint",
    "loads_checkpoint",
    "CheckpointError",
]

HEAD_NAMES = ("con", "neu", "agg", "slope", "elev")
N_SEMANTIC = 3
N_GEOMETRIC = 2
N_HEADS = N_SEMANTIC + N_GEOMETRIC

CHECKPOINT_MAGIC = b"VTKB"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class TokenBank:
    """All trainable parameters.

    The field order below is also the serialization order of the checkpoint.
    """

    prompt: np.ndarray  # (N_p, D)
    tokens: np.ndarray  # (5, D): con, neu, agg, slope, elev
    w1: np.ndarray  # (5, hidden, D)
    b1: np.ndarray  # (5, hidden)
    w2: np.ndarray  # (5, F, hidden)
    b2: np.ndarray  # (5, F)
    depth_w: np.ndarray  # (F,)

    @property
    def num_prompt(self) -> int:
        return self.prompt.shape[0]

    @property
    def token_dim(self) -> int:
        return self.prompt.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.w2.shape[1]

    @property
    def semantic_tokens(self) -> np.ndarray:
        return self.tokens[:N_SEMANTIC]

    @property
    def geometric_tokens(self) -> np.ndarray:
        return self.tokens[N_SEMANTIC:]

    def arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self) -> "TokenBank":
        return TokenBank(**{k: v.copy() for k, v in self.arrays().items()})

    def zeros_like(self) -> "TokenBank":
        return TokenBank(**{k: np.zeros_like(v) for k, v in self.arrays().items()})

    @property
    def num_parameters(self) -> int:
        return sum(v.size for v in self.arrays().values())

    def flat(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self.arrays().values()])

    def _check(self):
        n_p, d = self.prompt.shape
        h = self.hidden_dim
        f = self.feature_dim
        expected = {
            "tokens": (N_HEADS, d),
            "w1": (N_HEADS, h, d),
            "b1": (N_HEADS, h),
            "w2": (N_HEADS, f, h),
            "b2": (N_HEADS, f),
            "depth_w": (f,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    def __post_init__(self):
        self._check()


def init_token_bank(
    seed: int,
    num_prompt: int = 4,
    token_dim: int = 32,
    hidden_dim: int = 32,
    feature_dim: int = FEATURE_DIM,
) -> TokenBank:
    """Seeded uniform initialization with bound ``1 / sqrt(fan_in)``.

    Tokens have no fan-in and use the unit bound; biases start at zero.
    """
    rng = np.random.default_rng(seed)

    def uni(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    return TokenBank(
        prompt=uni((num_prompt, token_dim), 1),
        tokens=uni((N_HEADS, token_dim), 1),
        w1=uni((N_HEADS, hidden_dim, token_dim), token_dim),
        b1=np.zeros((N_HEADS, hidden_dim)),
        w2=uni((N_HEADS, feature_dim, hidden_dim), hidden_dim),
        b2=np.zeros((N_HEADS, feature_dim)),
        depth_w=uni((feature_dim,), feature_dim),
    )


@dataclass
class ForwardCache:
    conditioned: np.ndarray  # (5, D)
    hidden: np.ndarray  # (5, hidden)
    projection: np.ndarray  # (5, F)
    maps: np.ndarray  # (N, 5) raw inner products
    depth: np.ndarray  # (N,)


def forward(bank: TokenBank, design: np.ndarray) -> ForwardCache:
    """Run all heads on an (N, F) design matrix of pixel features."""
    if design.shape[1] != bank.feature_dim:
        raise ValueError(f"features have {design.shape[1]} channels, token bank expects {bank.feature_dim}")
    conditioned = bank.tokens + bank.prompt.mean(axis=0)
    hidden = np.tanh(np.einsum("khd,kd->kh", bank.w1, conditioned) + bank.b1)
    projection = np.einsum("kfh,kh->kf", bank.w2, hidden) + bank.b2
    maps = design @ projection.T
    depth = design @ bank.depth_w
    return ForwardCache(conditioned, hidden, projection, maps, depth)


def backward(bank: TokenBank, design: np.ndarray, cache: ForwardCache, d_maps: np.ndarray, d_depth: np.ndarray) -> TokenBank:
    """Gradients of a loss given its gradients w.r.t. the raw head maps and depth."""
    d_proj = d_maps.T @ design
    d_w2 = np.einsum("kf,kh->kfh", d_proj, cache.hidden)
    d_hidden = np.einsum("kfh,kf->kh", bank.w2, d_proj)
    d_pre = d_hidden * (1.0 - cache.hidden**2)
    d_w1 = np.einsum("kh,kd->khd", d_pre, cache.conditioned)
    d_cond = np.einsum("khd,kh->kd", bank.w1, d_pre)
    d_prompt = np.broadcast_to(d_cond.sum(axis=0) / bank.num_prompt, bank.prompt.shape).copy()
    return TokenBank(
        prompt=d_prompt,
        tokens=d_cond,
        w1=d_w1,
        b1=d_pre,
        w2=d_w2,
        b2=d_proj,
        depth_w=design.T @ d_depth,
    )


def decode(bank: TokenBank, features: np.ndarray):
    """Decode a (F, H, W) feature stack.

    Returns ``(semantic_logits, risks, depth)``: a list of three logit maps,
    a list of two sigmoided risk maps (slope, elev) and the depth map.
    """
    _, h, w = features.shape
    cache = forward(bank, flatten_features(features))
    maps = cache.maps.T.reshape(N_HEADS, h, w)
    semantic = [maps[k] for k in range(N_SEMANTIC)]
    risks = [expit(maps[N_SEMANTIC + c]) for c in range(N_GEOMETRIC)]
    return semantic, risks, cache.depth.reshape(h, w)


def infer(bank: TokenBank, image, alpha: float = DEFAULT_ALPHA, epsilon: float = DEFAULT_EPSILON) -> TraversabilityOutput:
    """Full prediction for one (3, H, W) image."""
    semantic, (r_slope, r_elev), depth = decode(bank, extract_features(image))
    unc = estimate_uncertainty(HypothesisSet(tuple(semantic)), alpha, epsilon)
    # sigmoid outputs can round to exactly 0 or 1 but never leave [0, 1]
    mean_p = np.clip(unc.mean_p, 0.0, 1.0)
    score = fuse(unc.confidence, mean_p, r_slope, r_elev)
    return TraversabilityOutput(
        mean_p=mean_p,
        confidence=unc.confidence,
        slope_risk=r_slope,
        elevation_risk=r_elev,
        score=score,
        variance=unc.variance,
        depth=depth,
    )


# Checkpoint layout (all little-endian):
#   b"VTKB", u32 version,
#   u32 x 6: num_prompt, token_dim, feature_dim, hidden_dim, n_semantic, n_geometric,
#   float64 parameters: prompt, tokens, w1, b1, w2, b2, depth_w (C order each).
_DIMS = struct.Struct("<6I")


def dumps_checkpoint(bank: TokenBank) -> bytes:
    head = CHECKPOINT_MAGIC + struct.pack("<I", CHECKPOINT_VERSION)
    dims = _DIMS.pack(bank.num_prompt, bank.token_dim, bank.feature_dim, bank.hidden_dim, N_SEMANTIC, N_GEOMETRIC)
    return head + dims + bank.flat().astype("<f8").tobytes()


def loads_checkpoint(data: bytes) -> TokenBank:
    if data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError("not a token-bank checkpoint (bad magic)")
    if len(data) < 8 + _DIMS.size:
        raise CheckpointError("truncated checkpoint header")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    n_p, d, f, h, n_sem, n_geo = _DIMS.unpack_from(data, 8)
    if (n_sem, n_geo) != (N_SEMANTIC, N_GEOMETRIC):
        raise CheckpointError(f"unsupported head layout {n_sem}+{n_geo}")
    shapes = [
        ("prompt", (n_p, d)),
        ("tokens", (N_HEADS, d)),
        ("w1", (N_HEADS, h, d)),
        ("b1", (N_HEADS, h)),
        ("w2", (N_HEADS, f, h)),
        ("b2", (N_HEADS, f)),
        ("depth_w", (f,)),
    ]
    total = sum(int(np.prod(s)) for _, s in shapes)
    payload = data[8 + _DIMS.size :]
    if len(payload) != 8 * total:
        raise CheckpointError(f"checkpoint payload has {len(payload)} bytes, expected {8 * total}")
    flat = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    if not np.all(np.isfinite(flat)):
        raise CheckpointError("checkpoint contains non-finite parameters")
    arrays, pos = {}, 0
    for name, shape in shapes:
        size = int(np.prod(shape))
        arrays[name] = flat[pos : pos + size].reshape(shape).copy()
        pos += size
    return TokenBank(**arrays)


def save_checkpoint(bank: TokenBank, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_checkpoint(bank))


def load_checkpoint(path) -> TokenBank:
    with open(path, "rb") as fh:
        return loads_checkpoint(fh.read())

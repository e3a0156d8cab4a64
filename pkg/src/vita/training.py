"""Joint semantic + geometric training of a token bank with AdamW."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .dense_maps import NonFiniteError
from .features import extract_features, flatten_features
from .fusion import total_loss
from .geo_losses import GeoLossWeights, perturb_teacher, smooth_l1_geo, ssi_loss
from .geometry import DEFAULT_BETA, pseudo_risk_labels
from .model import N_SEMANTIC, TokenBank, backward, forward, init_token_bank
from .pdt_losses import DEFAULT_PERSPECTIVES, HypothesisSet, PerspectiveConfig, pdt_loss

__all__ = [
    "TrainConfig",
    "TrainingSample",
    "NonFiniteLossError",
    "LOSS_COLUMNS",
    "prepare_sample",
    "sample_loss",
    "train",
]

log = logging.getLogger(__name__)

LOSS_COLUMNS = ("L_con", "L_neu", "L_agg", "L_geo", "L_distill", "total")


@dataclass
class TrainConfig:
    epochs: int = 10
    learning_rate: float = 5e-4
    depth_learning_rate: float = 5e-4
    batch_size: int = 4
    # An epoch keeps cycling through reshuffled data until this many steps ran.
    min_steps_per_epoch: int = 50
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    num_prompt: int = 4
    token_dim: int = 32
    hidden_dim: int = 32
    perspectives: tuple[PerspectiveConfig, ...] = DEFAULT_PERSPECTIVES
    geo_weights: GeoLossWeights = field(default_factory=GeoLossWeights)
    beta: float = DEFAULT_BETA
    teacher_noise_sigma: float = 0.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0 or self.depth_learning_rate <= 0:
            raise ValueError("learning rates must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


class NonFiniteLossError(FloatingPointError):
    def __init__(self, epoch: int, batch: int, components: dict):
        self.epoch, self.batch, self.components = epoch, batch, components
        detail = ", ".join(f"{k}={v!r}" for k, v in components.items())
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}: {detail}")


@dataclass
class TrainingSample:
    design: np.ndarray  # (N, F)
    shape: tuple[int, int]
    label: np.ndarray
    pseudo_slope: np.ndarray
    pseudo_elev: np.ndarray
    teacher_depth: np.ndarray


def prepare_sample(scene, beta: float = DEFAULT_BETA, teacher_noise_sigma: float = 0.0, rng=None) -> TrainingSample:
    """Features and pseudo-labels for anything with ``rgb``, ``depth`` and ``label``."""
    teacher = np.asarray(scene.depth, dtype=np.float64)
    if teacher_noise_sigma > 0:
        teacher = perturb_teacher(teacher, teacher_noise_sigma, rng)
    pseudo = pseudo_risk_labels(teacher, scene.label, beta)
    feats = extract_features(scene.rgb)
    return TrainingSample(
        design=flatten_features(feats),
        shape=teacher.shape,
        label=np.asarray(scene.label, dtype=np.float64),
        pseudo_slope=pseudo.slope,
        pseudo_elev=pseudo.elevation,
        teacher_depth=teacher,
    )


def sample_loss(bank: TokenBank, sample: TrainingSample, config: TrainConfig) -> tuple[dict, TokenBank]:
    """Total loss ``L_sem + lambda_geo * (L_geo + L_distill)`` and its gradient."""
    h, w = sample.shape
    cache = forward(bank, sample.design)
    maps = cache.maps.T.reshape(-1, h, w)

    hyp = HypothesisSet(tuple(maps[:N_SEMANTIC]), config.perspectives)
    l_sem, per_token, sem_grads = pdt_loss(hyp, sample.label)

    risks = {"slope": expit(maps[N_SEMANTIC]), "elev": expit(maps[N_SEMANTIC + 1])}
    pseudo = {"slope": sample.pseudo_slope, "elev": sample.pseudo_elev}
    l_geo, geo_grads = smooth_l1_geo(risks, pseudo, config.geo_weights)

    l_distill, d_depth = ssi_loss(cache.depth.reshape(h, w), sample.teacher_depth)

    lam = config.geo_weights.lambda_geo
    total = total_loss(l_sem, l_geo, l_distill, lam)

    d_maps = np.empty_like(maps)
    d_maps[:N_SEMANTIC] = sem_grads
    for c, name in enumerate(("slope", "elev")):
        r = risks[name]
        d_maps[N_SEMANTIC + c] = lam * geo_grads[name] * r * (1.0 - r)
    grads = backward(bank, sample.design, cache, d_maps.reshape(len(maps), -1).T, lam * d_depth.ravel())

    components = {
        "L_con": per_token[0],
        "L_neu": per_token[1],
        "L_agg": per_token[2],
        "L_sem": l_sem,
        "L_geo": l_geo,
        "L_distill": l_distill,
        "total": total,
    }
    return components, grads


class _AdamW:
    def __init__(self, bank: TokenBank, config: TrainConfig, total_steps: int):
        self.config = config
        self.total_steps = total_steps
        self.step_count = 0
        self.m = bank.zeros_like()
        self.v = bank.zeros_like()

    def rates(self) -> dict[str, float]:
        c = self.config
        anneal = 0.5 * (1.0 + math.cos(math.pi * self.step_count / self.total_steps))
        return {"main": c.learning_rate * anneal, "depth": c.depth_learning_rate * anneal}

    def step(self, bank: TokenBank, grads: TokenBank) -> None:
        c = self.config
        rates = self.rates()
        self.step_count += 1
        t = self.step_count
        corr1 = 1.0 - c.beta1**t
        corr2 = 1.0 - c.beta2**t
        m, v, g = self.m.arrays(), self.v.arrays(), grads.arrays()
        for name, p in bank.arrays().items():
            lr = rates["depth" if name == "depth_w" else "main"]
            m[name] *= c.beta1
            m[name] += (1.0 - c.beta1) * g[name]
            v[name] *= c.beta2
            v[name] += (1.0 - c.beta2) * g[name] ** 2
            p *= 1.0 - lr * c.weight_decay
            p -= lr * (m[name] / corr1) / (np.sqrt(v[name] / corr2) + c.adam_eps)


def _accumulate(acc: TokenBank, grads: TokenBank, scale: float) -> None:
    for a, g in zip(acc.arrays().values(), grads.arrays().values()):
        a += scale * g


def train(dataset, config: TrainConfig = TrainConfig(), bank: TokenBank | None = None, history: list | None = None) -> TokenBank:
    """Optimize a token bank on a list of scenes (or prepared samples).

    Bit-reproducible for a given ``config.seed``: initialization, shuffling and
    teacher noise all derive from it and gradients are summed in batch order.
    When ``history`` is given, one dict of epoch-mean losses is appended per
    epoch.
    """
    if len(dataset) == 0:
        raise ValueError("training dataset is empty")
    rng = np.random.default_rng(config.seed)
    noise_rng = np.random.default_rng([config.seed, 1])
    samples = [
        s if isinstance(s, TrainingSample) else prepare_sample(s, config.beta, config.teacher_noise_sigma, noise_rng)
        for s in dataset
    ]
    if len({s.shape for s in samples}) != 1:
        raise ValueError("all scenes must share dimensions")

    if bank is None:
        bank = init_token_bank(config.seed, config.num_prompt, config.token_dim, config.hidden_dim)
    else:
        bank = bank.copy()

    n = len(samples)
    steps_per_epoch = max(math.ceil(n / config.batch_size), config.min_steps_per_epoch)
    opt = _AdamW(bank, config, config.epochs * steps_per_epoch)
    order: list[int] = []

    for epoch in range(config.epochs):
        sums = dict.fromkeys(("L_con", "L_neu", "L_agg", "L_sem", "L_geo", "L_distill", "total"), 0.0)
        count = 0
        for batch in range(steps_per_epoch):
            idx = []
            while len(idx) < min(config.batch_size, n):
                if not order:
                    order = rng.permutation(n).tolist()
                idx.append(order.pop(0))
            acc = bank.zeros_like()
            for i in sorted(idx):
                try:
                    with np.errstate(over="ignore", invalid="ignore"):
                        comps, grads = sample_loss(bank, samples[i], config)
                except NonFiniteError:
                    # diverged parameters make the head maps themselves non-finite
                    comps = dict.fromkeys(sums, math.nan)
                if not all(math.isfinite(v) for v in comps.values()):
                    raise NonFiniteLossError(epoch, batch, comps)
                _accumulate(acc, grads, 1.0 / len(idx))
                for k in sums:
                    sums[k] += comps[k]
                count += 1
            opt.step(bank, acc)
        means = {k: v / count for k, v in sums.items()}
        log.debug("epoch %d: %s", epoch, means)
        if history is not None:
            history.append(means)
    return bank

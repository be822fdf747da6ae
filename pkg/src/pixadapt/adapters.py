"""The three localization adapters: basic cosine threshold, pixel
classification, and Siamese contrastive pair matching.

The contrastive model evaluates one shared-weight embedding network twice
(reference slot first, target slot second), concatenates the embeddings,
and classifies the pair into the no-match class 0 or an RoI label.

Contrastive model file (PXC1): magic ``PXC1``, u32 pair class count, then
two length-prefixed PXN1 blocks (twin, head).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn
from .errors import BadMagicError, DataError, TruncatedPayloadError
from .formats import FeatureMap, LabelMask
from .sampling import ClassificationSet, PairSet, ReferenceSet, foreground_pixels

CONTRASTIVE_MAGIC = b"PXC1"


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters shared by both trained adapters."""

    epochs: int = 40
    batch_size: int = 64
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    clf_hidden: tuple[int, ...] = (256, 128)
    embed_dim: int = 64
    twin_hidden: tuple[int, ...] = (64,)
    head_hidden: tuple[int, ...] = (64,)

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise DataError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise DataError("learning_rate must be > 0")


@dataclass(frozen=True)
class ContrastiveModel:
    """Shared-weight twin embedding plus a pair-classification head."""

    twin: nn.MlpModel
    head: nn.MlpModel
    pair_class_count: int

    def __post_init__(self) -> None:
        if self.head.in_dim != 2 * self.twin.out_dim:
            raise DataError(
                f"head expects {self.head.in_dim} inputs but twin embeds into "
                f"{self.twin.out_dim} (need 2x)"
            )
        if self.pair_class_count != self.head.out_dim or self.pair_class_count < 2:
            raise DataError(
                f"pair_class_count {self.pair_class_count} must equal head output "
                f"{self.head.out_dim} and be >= 2"
            )


@dataclass(frozen=True)
class ScoreMap:
    """Per-pixel score grid: probability rows over classes, or a scalar
    cosine similarity channel for the basic adapter."""

    values: np.ndarray  # (H, W, C) float64
    kind: str = "probability"  # "probability" | "similarity"

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 3:
            raise DataError(f"score map must be (H, W, C), got {arr.shape}")
        if self.kind == "probability":
            sums = arr.sum(axis=-1)
            if np.abs(sums - 1.0).max() > 1e-6:
                raise DataError("probability rows must sum to 1 within 1e-6")
        elif self.kind == "similarity":
            if arr.shape[-1] != 1 or arr.min() < -1.0 or arr.max() > 1.0:
                raise DataError("similarity maps are single-channel with values in [-1, 1]")
        else:
            raise DataError(f"unknown score map kind {self.kind!r}")
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def _normalized_rows(feats: np.ndarray) -> np.ndarray:
    feats = feats.astype(np.float64)
    norms = np.linalg.norm(feats, axis=-1, keepdims=True)
    return np.where(norms == 0.0, 0.0, feats / np.where(norms == 0.0, 1.0, norms))


def basic_similarity_map(
    template_feats: FeatureMap,
    template_mask: LabelMask,
    label: int,
    target_feats: FeatureMap,
    aggregate: str = "mean",
) -> ScoreMap:
    """Cosine similarity of every target pixel to the template RoI.

    `aggregate` "mean" correlates against the mean of the normalized RoI
    features; "max" takes the best match over individual RoI pixels.
    """
    if template_feats.dim != target_feats.dim:
        raise DataError(
            f"template features have {template_feats.dim} channels, target has {target_feats.dim}"
        )
    if aggregate not in ("mean", "max"):
        raise DataError(f"unknown aggregate {aggregate!r}")
    roi = foreground_pixels(template_mask, label)
    if len(roi) == 0:
        raise DataError(f"label {label} is empty in the template mask")
    if (template_feats.height, template_feats.width) != (template_mask.height, template_mask.width):
        raise DataError("template features and mask dimensions differ")

    refs = _normalized_rows(template_feats.data[roi[:, 0], roi[:, 1]])
    pixels = _normalized_rows(target_feats.data.reshape(-1, target_feats.dim))
    if aggregate == "mean":
        template = _normalized_rows(refs.mean(axis=0)[None, :])[0]
        sims = pixels @ template
    else:
        sims = (pixels @ refs.T).max(axis=1)
    sims = np.clip(sims, -1.0, 1.0).reshape(target_feats.height, target_feats.width, 1)
    return ScoreMap(sims, kind="similarity")


def basic_localize(
    template_feats: FeatureMap,
    template_mask: LabelMask,
    label: int,
    target_feats: FeatureMap,
    threshold: float = 0.5,
    aggregate: str = "mean",
) -> LabelMask:
    """Threshold the cosine correlation map at a fixed value; no training."""
    if not -1.0 <= threshold <= 1.0:
        raise DataError(f"threshold must lie in [-1, 1], got {threshold}")
    sims = basic_similarity_map(template_feats, template_mask, label, target_feats, aggregate)
    fg = (sims.values[:, :, 0] >= threshold).astype(np.uint8)
    return LabelMask(fg, 1)


def _derived_seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def _batch_indices(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def _mean_ce_grad(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    probs = nn.softmax(logits)
    n = len(targets)
    picked = np.clip(probs[np.arange(n), targets], 1e-12, None)
    loss = float(-np.log(picked).mean())
    grad = probs
    grad[np.arange(n), targets] -= 1.0
    return loss, grad / n


def train_classification_adapter(
    dataset: ClassificationSet, hyper: TrainConfig, seed: int
) -> nn.MlpModel:
    """Fit the pixel classifier with softmax cross-entropy and Adam."""
    n = len(dataset.classes)
    if n == 0:
        raise DataError("classification set is empty")
    if dataset.class_count < 2:
        raise DataError("need at least two classes")
    counts = np.bincount(dataset.classes, minlength=dataset.class_count)
    missing = np.nonzero(counts == 0)[0]
    if len(missing):
        raise DataError(f"classes {missing.tolist()} have zero examples")

    dims = [dataset.features.shape[1], *hyper.clf_hidden]
    specs = [nn.LayerSpec(a, b, "relu") for a, b in zip(dims, dims[1:])]
    specs.append(nn.LayerSpec(dims[-1], dataset.class_count, "identity"))
    init_seed, shuffle_seed = _derived_seeds(seed, 2)
    model = nn.init_model(specs, init_seed)
    state = nn.init_adam(
        model, hyper.learning_rate, hyper.beta1, hyper.beta2, hyper.adam_epsilon
    )
    rng = np.random.default_rng(shuffle_seed)
    feats = dataset.features.astype(np.float64)
    targets = dataset.classes.astype(np.int64)
    for _ in range(hyper.epochs):
        for idx in _batch_indices(n, hyper.batch_size, rng):
            acts = nn.forward(model, feats[idx])
            _, grad = _mean_ce_grad(acts.logits, targets[idx])
            grads = nn.backward(model, acts, grad)
            model, state = nn.adam_step(model, grads, state)
    return model


def predict_classification(
    model: nn.MlpModel, target_feats: FeatureMap
) -> tuple[LabelMask, ScoreMap]:
    """Per-pixel argmax class; ties break toward the lower class index."""
    if model.in_dim != target_feats.dim:
        raise DataError(
            f"model expects {model.in_dim} channels, features have {target_feats.dim}"
        )
    flat = target_feats.data.reshape(-1, target_feats.dim).astype(np.float64)
    probs = nn.softmax(nn.forward(model, flat).logits)
    labels = probs.argmax(axis=1).astype(np.uint8)
    h, w = target_feats.height, target_feats.width
    mask = LabelMask(labels.reshape(h, w), model.out_dim - 1)
    return mask, ScoreMap(probs.reshape(h, w, model.out_dim))


def _add_gradients(a: nn.Gradients, b: nn.Gradients) -> nn.Gradients:
    return nn.Gradients(
        tuple(x + y for x, y in zip(a.weights, b.weights)),
        tuple(x + y for x, y in zip(a.biases, b.biases)),
    )


def train_contrastive_adapter(
    pairs: PairSet, hyper: TrainConfig, seed: int
) -> ContrastiveModel:
    """Fit the Siamese pair classifier.

    Both branches evaluate the single twin parameter store; its gradient is
    the sum of the two branch contributions, which keeps the weights shared
    exactly. The head consumes the reference embedding first.
    """
    n = len(pairs.pair_classes)
    if n == 0:
        raise DataError("pair set is empty")
    counts = np.bincount(pairs.pair_classes, minlength=pairs.pair_class_count)
    missing = np.nonzero(counts == 0)[0]
    if len(missing):
        raise DataError(f"pair classes {missing.tolist()} have zero examples")

    dim = pairs.features_a.shape[1]
    twin_dims = [dim, *hyper.twin_hidden]
    twin_specs = [nn.LayerSpec(a, b, "relu") for a, b in zip(twin_dims, twin_dims[1:])]
    twin_specs.append(nn.LayerSpec(twin_dims[-1], hyper.embed_dim, "identity"))
    head_dims = [2 * hyper.embed_dim, *hyper.head_hidden]
    head_specs = [nn.LayerSpec(a, b, "relu") for a, b in zip(head_dims, head_dims[1:])]
    head_specs.append(nn.LayerSpec(head_dims[-1], pairs.pair_class_count, "identity"))

    twin_seed, head_seed, shuffle_seed = _derived_seeds(seed, 3)
    twin = nn.init_model(twin_specs, twin_seed)
    head = nn.init_model(head_specs, head_seed)
    twin_state = nn.init_adam(twin, hyper.learning_rate, hyper.beta1, hyper.beta2, hyper.adam_epsilon)
    head_state = nn.init_adam(head, hyper.learning_rate, hyper.beta1, hyper.beta2, hyper.adam_epsilon)
    rng = np.random.default_rng(shuffle_seed)

    feats_a = pairs.features_a.astype(np.float64)
    feats_b = pairs.features_b.astype(np.float64)
    targets = pairs.pair_classes.astype(np.int64)
    e = hyper.embed_dim
    for _ in range(hyper.epochs):
        for idx in _batch_indices(n, hyper.batch_size, rng):
            acts_a = nn.forward(twin, feats_a[idx])
            acts_b = nn.forward(twin, feats_b[idx])
            cat = np.concatenate([acts_a.logits, acts_b.logits], axis=1)
            acts_h = nn.forward(head, cat)
            _, grad = _mean_ce_grad(acts_h.logits, targets[idx])
            head_grads = nn.backward(head, acts_h, grad)
            grad_cat = head_grads.input
            twin_grads = _add_gradients(
                nn.backward(twin, acts_a, grad_cat[:, :e]),
                nn.backward(twin, acts_b, grad_cat[:, e:]),
            )
            twin, twin_state = nn.adam_step(twin, twin_grads, twin_state)
            head, head_state = nn.adam_step(head, head_grads, head_state)
    return ContrastiveModel(twin, head, pairs.pair_class_count)


def pair_score(
    model: ContrastiveModel, reference_feat: np.ndarray, target_feat: np.ndarray
) -> np.ndarray:
    """Softmax pair-class distribution for one (reference, target) pair."""
    ref = np.asarray(reference_feat, dtype=np.float64)
    tgt = np.asarray(target_feat, dtype=np.float64)
    if ref.shape != (model.twin.in_dim,) or tgt.shape != (model.twin.in_dim,):
        raise DataError(f"pair features must both have {model.twin.in_dim} channels")
    z_ref = nn.forward(model.twin, ref).logits
    z_tgt = nn.forward(model.twin, tgt).logits
    logits = nn.forward(model.head, np.concatenate([z_ref, z_tgt])).logits
    return nn.softmax(logits)


def embed(model: ContrastiveModel, feats: np.ndarray) -> np.ndarray:
    """Twin embedding of one vector or a batch; identical in either slot."""
    return nn.forward(model.twin, np.asarray(feats, dtype=np.float64)).logits


def contrastive_localize(
    model: ContrastiveModel,
    references: list[ReferenceSet],
    target_feats: FeatureMap,
    background_margin: float = 0.0,
    reduce: str = "mean",
) -> tuple[LabelMask, ScoreMap]:
    """Label every target pixel by pairing it against the reference pixels.

    For label l the pixel's score is the reduction (mean or max) over that
    label's references of the pair-class-l probability; the no-match score
    reduces class-0 probability over all references.  A pixel takes the
    best label only when its score beats the no-match score by
    `background_margin`, otherwise it stays background.
    """
    if not references:
        raise DataError("need at least one reference set")
    if reduce not in ("mean", "max"):
        raise DataError(f"unknown reduce {reduce!r}")
    n_labels = model.pair_class_count - 1
    labels = sorted(r.label for r in references)
    if labels != list(range(1, n_labels + 1)):
        raise DataError(
            f"model declares labels 1..{n_labels}, got reference sets for {labels}"
        )
    for ref in references:
        if ref.k == 0:
            raise DataError(f"reference set for label {ref.label} is empty")
        if ref.features.shape[1] != model.twin.in_dim:
            raise DataError(
                f"references have {ref.features.shape[1]} channels, twin expects {model.twin.in_dim}"
            )
    if target_feats.dim != model.twin.in_dim:
        raise DataError(
            f"target features have {target_feats.dim} channels, twin expects {model.twin.in_dim}"
        )

    h, w = target_feats.height, target_feats.width
    pixel_emb = embed(model, target_feats.data.reshape(-1, target_feats.dim))
    n_pix = pixel_emb.shape[0]

    def _scores_for(ref_set: ReferenceSet) -> np.ndarray:
        # (k, n_pix, C) pair-class probabilities of every (reference, pixel) pair.
        ref_emb = embed(model, ref_set.features)
        out = np.empty((ref_set.k, n_pix, model.pair_class_count))
        for i in range(ref_set.k):
            cat = np.concatenate(
                [np.broadcast_to(ref_emb[i], pixel_emb.shape), pixel_emb], axis=1
            )
            out[i] = nn.softmax(nn.forward(model.head, cat).logits)
        return out

    label_scores = np.empty((n_pix, n_labels))
    bg_chunks = []
    for ref_set in sorted(references, key=lambda r: r.label):
        probs = _scores_for(ref_set)
        if reduce == "mean":
            label_scores[:, ref_set.label - 1] = probs[:, :, ref_set.label].mean(axis=0)
        else:
            label_scores[:, ref_set.label - 1] = probs[:, :, ref_set.label].max(axis=0)
        bg_chunks.append(probs[:, :, 0])
    bg_all = np.concatenate(bg_chunks, axis=0)
    bg_score = bg_all.mean(axis=0) if reduce == "mean" else bg_all.max(axis=0)

    best = label_scores.argmax(axis=1)
    best_score = label_scores[np.arange(n_pix), best]
    out_labels = np.where(best_score > bg_score + background_margin, best + 1, 0)
    mask = LabelMask(out_labels.reshape(h, w).astype(np.uint8), n_labels)

    assembled = np.concatenate([bg_score[:, None], label_scores], axis=1)
    assembled /= assembled.sum(axis=1, keepdims=True)
    return mask, ScoreMap(assembled.reshape(h, w, model.pair_class_count))


def encode_contrastive_model(model: ContrastiveModel) -> bytes:
    twin_block = nn.encode_model(model.twin)
    head_block = nn.encode_model(model.head)
    return (
        CONTRASTIVE_MAGIC
        + struct.pack("<I", model.pair_class_count)
        + struct.pack("<I", len(twin_block))
        + twin_block
        + struct.pack("<I", len(head_block))
        + head_block
    )


def write_contrastive_model(model: ContrastiveModel, path: str | Path) -> None:
    Path(path).write_bytes(encode_contrastive_model(model))


def read_contrastive_model(path: str | Path) -> ContrastiveModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    blob = path.read_bytes()
    if blob[:4] != CONTRASTIVE_MAGIC:
        raise BadMagicError(f"{path}: expected magic {CONTRASTIVE_MAGIC!r}, got {blob[:4]!r}")
    off = 4
    if len(blob) < off + 4:
        raise TruncatedPayloadError(f"{path}: header truncated")
    (pair_class_count,) = struct.unpack_from("<I", blob, off)
    off += 4
    blocks = []
    for name in ("twin", "head"):
        if len(blob) < off + 4:
            raise TruncatedPayloadError(f"{path}: {name} block length truncated")
        (block_len,) = struct.unpack_from("<I", blob, off)
        off += 4
        if len(blob) < off + block_len:
            raise TruncatedPayloadError(f"{path}: {name} block truncated")
        blocks.append(nn.decode_model(blob[off : off + block_len], f"{path}:{name}"))
        off += block_len
    if off != len(blob):
        raise TruncatedPayloadError(f"{path}: trailing bytes after head block")
    return ContrastiveModel(blocks[0], blocks[1], pair_class_count)

"""Trainable truth-factor networks and the deterministic context embedder.

One model is trained per predicate type and shared by all instances of
that type.  A model reads the (min, max) of every argument attribute's
current subdomain, normalized to [0, 1], concatenated with a context
embedding, and emits one softmax head of k truth factors per affecting
attribute.  Training minimises cross-entropy against the child choices
extracted from ground-truth groundings; everything is seeded and
reproducible bit-for-bit on the same build.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .domain_tree import DomainTree
from .predicates import ConfigError, SubdomainBox, TruthFactorProvider
from .statement import PRED_SPECS

EMBED_DIM = 96  # 8x8 occupancy block + 32-dim hashed bag of words
EMBEDDER_VERSION = "occupancy8x8-bow32-v1"

_LEAK = 0.01


def _stable_hash(text: str) -> int:
    return int.from_bytes(hashlib.md5(text.encode("utf-8")).digest()[:8], "big")


def _category_weight(category: str) -> float:
    # a fixed, build-independent scalar in [0.5, 1.5) per category name
    return 0.5 + (_stable_hash(category) % 1000) / 1000.0


def embed_context(scene, text: str | None = None) -> np.ndarray:
    """Deterministic embedding of (scene raster, text) into EMBED_DIM floats.

    The image block is an 8x8 category-weighted occupancy raster of the
    scene's fixed objects, flattened and L2-normalized.  The text block is
    a 32-dim signed hashed bag-of-words; empty text leaves it all-zero.
    """
    occ = np.zeros((8, 8))
    cw = scene.width / 8.0
    ch = scene.height / 8.0
    for obj in scene.objects:
        if obj.kind != "constant":
            continue
        b = obj.box
        left = b["x"] - b["w"] // 2
        top = b["y"] - b["h"] // 2
        right = left + b["w"]
        bottom = top + b["h"]
        weight = _category_weight(obj.category)
        for i in range(8):
            cy0, cy1 = i * ch, (i + 1) * ch
            oy = max(0.0, min(bottom, cy1) - max(top, cy0))
            if oy <= 0:
                continue
            for j in range(8):
                cx0, cx1 = j * cw, (j + 1) * cw
                ox = max(0.0, min(right, cx1) - max(left, cx0))
                if ox > 0:
                    occ[i, j] += weight * (ox * oy) / (cw * ch)
    occ = occ.reshape(64)
    norm = np.linalg.norm(occ)
    if norm > 0:
        occ = occ / norm
    bow = np.zeros(32)
    if text:
        for token in text.lower().split():
            h = _stable_hash(token)
            sign = 1.0 if (h >> 8) % 2 == 0 else -1.0
            bow[h % 32] += sign
        norm = np.linalg.norm(bow)
        if norm > 0:
            bow = bow / norm
    return np.concatenate([occ, bow])


def attribute_ranges(width: int, height: int) -> dict:
    """Full value range per attribute for a scene of the given size."""
    return {"x": (0, width - 1), "y": (0, height - 1), "w": (1, width), "h": (1, height)}


# ---------------------------------------------------------------------------
# Decision records


@dataclass
class DecisionRecord:
    """One supervised refinement decision on a ground-truth path."""

    pred: str
    args: tuple[str, ...]
    attr: str
    path: tuple[int, ...]
    box: dict                # (entity, attr) -> (lo, hi)
    correct: int
    n_children: int
    ctx: np.ndarray

    def to_json(self) -> dict:
        return {
            "pred": self.pred,
            "args": list(self.args),
            "attr": self.attr,
            "path": list(self.path),
            "box": {f"{e}.{a}": [lo, hi] for (e, a), (lo, hi) in sorted(self.box.items())},
            "correct": self.correct,
            "n_children": self.n_children,
            "ctx": [round(float(v), 7) for v in self.ctx],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DecisionRecord":
        box = {}
        for key, (lo, hi) in doc["box"].items():
            e, a = key.rsplit(".", 1)
            box[(e, a)] = (int(lo), int(hi))
        return cls(
            pred=doc["pred"],
            args=tuple(doc["args"]),
            attr=doc["attr"],
            path=tuple(doc["path"]),
            box=box,
            correct=int(doc["correct"]),
            n_children=int(doc["n_children"]),
            ctx=np.asarray(doc["ctx"], dtype=float),
        )


def decompose_grounding(tree: DomainTree, value: int):
    """Split a grounded value into its sequence of tree decisions.

    Returns one (node path, chosen child index) per internal node on the
    root-to-leaf path of `value`; concatenating the chosen indices
    reproduces path_to_value(value).
    """
    full = tree.path_to_value(value)
    return [(full[:i], full[i]) for i in range(len(full))]


def save_records(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), sort_keys=True))
            fh.write("\n")


def load_records(path):
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(DecisionRecord.from_json(json.loads(line)))
    return out


# ---------------------------------------------------------------------------
# The MLP


def model_input(pred: str, args, box, ranges, ctx: np.ndarray) -> np.ndarray:
    """Assemble the input vector: per argument attribute (min, max) scaled
    to [0, 1] by the attribute's full range, then the context embedding."""
    affect = PRED_SPECS[pred][1]
    vals = []
    for arg in args:
        for attr in affect:
            lo, hi = box[(arg, attr)]
            rlo, rhi = ranges[attr]
            span = rhi - rlo
            vals.append((lo - rlo) / span)
            vals.append((hi - rlo) / span)
    return np.concatenate([np.asarray(vals, dtype=float), ctx])


class MlpModel:
    """Three dense layers with leaky-ReLU, one softmax head per attribute."""

    def __init__(self, pred: str, k: int, ctx_dim: int = EMBED_DIM,
                 hidden: tuple[int, int] = (128, 64), seed: int = 0):
        arity, affect = PRED_SPECS[pred]
        self.pred = pred
        self.k = k
        self.ctx_dim = ctx_dim
        self.hidden = tuple(hidden)
        self.attrs = affect
        self.input_dim = 2 * arity * len(affect) + ctx_dim
        self.output_dim = k * len(affect)
        rng = np.random.default_rng(seed)
        sizes = [self.input_dim, hidden[0], hidden[1], self.output_dim]
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    def head_slice(self, attr: str) -> slice:
        i = self.attrs.index(attr)
        return slice(i * self.k, (i + 1) * self.k)

    def parameters(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b

    def logits(self, x: np.ndarray):
        """Forward pass; x is (batch, input_dim) or (input_dim,)."""
        squeeze = x.ndim == 1
        h = np.atleast_2d(x)
        caches = [h]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            if i < len(self.weights) - 1:
                h = np.where(z > 0, z, _LEAK * z)
            else:
                h = z
            caches.append(h)
        return (h[0] if squeeze else h), caches

    def head_factors(self, x: np.ndarray, attr: str, n_children: int | None = None) -> np.ndarray:
        """Softmax truth factors of one attribute head for a single input."""
        z, _ = self.logits(x)
        sl = self.head_slice(attr)
        head = z[sl]
        if n_children is not None and n_children < self.k:
            head = head[:n_children]
        head = head - head.max()
        e = np.exp(head)
        return e / e.sum()

    def to_json(self) -> dict:
        return {
            "pred": self.pred,
            "k": self.k,
            "ctx_dim": self.ctx_dim,
            "hidden": list(self.hidden),
            "weights": [w.reshape(-1).tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MlpModel":
        model = cls(doc["pred"], doc["k"], doc["ctx_dim"], tuple(doc["hidden"]), seed=0)
        for i, w in enumerate(doc["weights"]):
            model.weights[i] = np.asarray(w, dtype=float).reshape(model.weights[i].shape)
        for i, b in enumerate(doc["biases"]):
            model.biases[i] = np.asarray(b, dtype=float)
        return model


def _masked_softmax(logits: np.ndarray, n_children: np.ndarray, k: int) -> np.ndarray:
    """Row-wise softmax over the first n_children[i] entries; the rest 0."""
    mask = np.arange(k)[None, :] < n_children[:, None]
    z = np.where(mask, logits, -np.inf)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _head_probs(model: MlpModel, z: np.ndarray, heads: np.ndarray,
                n_children: np.ndarray) -> np.ndarray:
    """Per-row softmax of each row's own attribute head; (batch, k)."""
    k = model.k
    cols = heads[:, None] * k + np.arange(k)[None, :]
    logits = np.take_along_axis(z, cols, axis=1)
    return _masked_softmax(logits, n_children, k)


def cross_entropy(model: MlpModel, X: np.ndarray, heads: np.ndarray,
                  correct: np.ndarray, n_children: np.ndarray) -> float:
    """Mean cross-entropy of a batch against the correct child choices."""
    z, _ = model.logits(np.atleast_2d(X))
    p = _head_probs(model, z, heads, n_children)
    picked = p[np.arange(len(p)), correct]
    return float(np.mean(-np.log(np.maximum(picked, 1e-300))))


def _batch_grads(model: MlpModel, X, heads, correct, n_children):
    """Average gradients of the cross-entropy over one batch."""
    z, caches = model.logits(np.atleast_2d(X))
    n = len(z)
    p = _head_probs(model, z, heads, n_children)
    picked = p[np.arange(n), correct]
    loss = float(np.mean(-np.log(np.maximum(picked, 1e-300))))
    g = p.copy()
    g[np.arange(n), correct] -= 1.0
    dZ = np.zeros_like(z)
    cols = heads[:, None] * model.k + np.arange(model.k)[None, :]
    np.put_along_axis(dZ, cols, g, axis=1)
    dZ /= n
    grads = []
    delta = dZ
    for layer in range(len(model.weights) - 1, -1, -1):
        h_in = caches[layer]
        gw = h_in.T @ delta
        gb = delta.sum(axis=0)
        grads.append((gw, gb))
        if layer > 0:
            dh = delta @ model.weights[layer].T
            post_act = caches[layer]  # sign matches the pre-activation for leaky-ReLU
            delta = dh * np.where(post_act > 0, 1.0, _LEAK)
    grads.reverse()
    return loss, grads


@dataclass
class TrainConfig:
    learning_rate: float = 2e-4
    epochs: int = 200
    batch_size: int = 128
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    hidden: tuple[int, int] = (128, 64)

    def __post_init__(self):
        for name in ("epochs", "batch_size"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("beta1", "beta2", "eps"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be non-negative")


@dataclass
class TrainReport:
    initial_loss: dict = field(default_factory=dict)
    final_loss: dict = field(default_factory=dict)


def train(records, cfg: TrainConfig, k: int = 2, ranges: dict | None = None,
          report: TrainReport | None = None) -> dict:
    """Train one model per predicate type present in `records`.

    Adam with the configured moments; per-epoch shuffling is seeded, so a
    fixed seed reproduces the run exactly.
    """
    if not records:
        raise ConfigError("cannot train on an empty dataset")
    if ranges is None:
        raise ConfigError("attribute ranges are required to normalize inputs")
    ctx_dim = len(records[0].ctx)
    groups = {}
    for rec in records:
        groups.setdefault(rec.pred, []).append(rec)
    models = {}
    for pred, recs in sorted(groups.items()):
        model = MlpModel(pred, k, ctx_dim, cfg.hidden, seed=cfg.seed)
        X = np.stack([model_input(pred, r.args, r.box, ranges, r.ctx) for r in recs])
        heads = np.array([model.attrs.index(r.attr) for r in recs])
        correct = np.array([r.correct for r in recs])
        n_children = np.array([r.n_children for r in recs])
        if report is not None:
            report.initial_loss[pred] = cross_entropy(model, X, heads, correct, n_children)
        _fit(model, X, heads, correct, n_children, cfg)
        if report is not None:
            report.final_loss[pred] = cross_entropy(model, X, heads, correct, n_children)
        models[pred] = model
    return models


def _fit(model, X, heads, correct, n_children, cfg):
    rng = np.random.default_rng(cfg.seed + 1)
    params = list(model.parameters())
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    t = 0
    n = len(X)
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            _, grads = _batch_grads(model, X[idx], heads[idx], correct[idx], n_children[idx])
            flat = [g for gw_gb in grads for g in gw_gb]
            t += 1
            for p, g, mi, vi in zip(params, flat, m, v):
                mi *= cfg.beta1
                mi += (1 - cfg.beta1) * g
                vi *= cfg.beta2
                vi += (1 - cfg.beta2) * g * g
                m_hat = mi / (1 - cfg.beta1**t)
                v_hat = vi / (1 - cfg.beta2**t)
                p -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)


def gradient_check(model: MlpModel, record: DecisionRecord, ranges: dict,
                   eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients
    of the single-record cross-entropy, over every parameter."""
    if not 0.0 < eps <= 1e-2:
        raise ValueError("eps must be in (0, 1e-2]")
    X = model_input(record.pred, record.args, record.box, ranges, record.ctx)[None, :]
    heads = np.array([model.attrs.index(record.attr)])
    correct = np.array([record.correct])
    n_children = np.array([record.n_children])
    _, grads = _batch_grads(model, X, heads, correct, n_children)
    flat_grads = [g for gw_gb in grads for g in gw_gb]
    worst = 0.0
    for p, g in zip(model.parameters(), flat_grads):
        pf = p.reshape(-1)
        gf = g.reshape(-1)
        for i in range(pf.size):
            keep = pf[i]
            pf[i] = keep + eps
            up = cross_entropy(model, X, heads, correct, n_children)
            pf[i] = keep - eps
            down = cross_entropy(model, X, heads, correct, n_children)
            pf[i] = keep
            numeric = (up - down) / (2 * eps)
            err = abs(gf[i] - numeric) / max(1.0, abs(gf[i]))
            worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# Provider + checkpoints


class MlpProvider(TruthFactorProvider):
    """Serves truth factors from trained per-predicate-type models."""

    needs_context = True

    def __init__(self, models: dict, ranges: dict, k: int):
        self.models = models
        self.ranges = ranges
        self.k = k

    def factors(self, pred_name, args, attr, box: SubdomainBox, ctx):
        try:
            model = self.models[pred_name]
        except KeyError:
            raise ConfigError(f"checkpoint has no model for predicate {pred_name!r}") from None
        if ctx is None:
            ctx = np.zeros(model.ctx_dim)
        x = model_input(pred_name, args, box.intervals, self.ranges, ctx)
        return tuple(model.head_factors(x, attr))


def save_checkpoint(models: dict, ranges: dict, k: int, path, cfg: TrainConfig | None = None):
    doc = {
        "provider": "mlp",
        "embedder": EMBEDDER_VERSION,
        "k": k,
        "ranges": {a: list(r) for a, r in ranges.items()},
        "models": {p: m.to_json() for p, m in sorted(models.items())},
        "config": {
            "learning_rate": cfg.learning_rate,
            "epochs": cfg.epochs,
            "batch_size": cfg.batch_size,
            "seed": cfg.seed,
        }
        if cfg
        else None,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> MlpProvider:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("provider") != "mlp":
        raise ConfigError(f"{path} is not an MLP checkpoint")
    if doc.get("embedder") != EMBEDDER_VERSION:
        raise ConfigError(
            f"checkpoint was built with embedder {doc.get('embedder')!r}, expected {EMBEDDER_VERSION!r}"
        )
    models = {p: MlpModel.from_json(m) for p, m in doc["models"].items()}
    ranges = {a: tuple(r) for a, r in doc["ranges"].items()}
    return MlpProvider(models, ranges, doc["k"])

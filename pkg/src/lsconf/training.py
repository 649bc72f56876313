"""Losses, synthetic data, the fixed-target training loop and curve utilities.

Metrics CSV: header ``epoch,loss,accuracy,lr,wall_ms,diverged``; loss and
accuracy with 9 significant digits, ``diverged`` as ``true``/``false``.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .assignment import AssignmentTable, assign
from .nn_core import (ConfigError, DivergenceError, MLPModel, OptimizerState, backward, forward,
                      init_model, predict, step)
from .vector_systems import build_system, n_min, parse_label

LOSSES = ("cosine", "euclidean", "ce")
METRICS_HEADER = ("epoch", "loss", "accuracy", "lr", "wall_ms", "diverged")


# ------------------------------------------------------------------- losses


def cosine_loss(embeddings, targets):
    """Mean ``1 - cos(e_i, t_i)`` and its gradient w.r.t. the embeddings.

    Embedding norms are clamped at 1e-12; the number of clamped rows is
    returned as the third element.
    """
    e = np.asarray(embeddings, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if e.shape != t.shape:
        raise ValueError(f"shape mismatch {e.shape} vs {t.shape}")
    return _kernels.cosine_loss(e, t)


def euclidean_loss(embeddings, targets):
    e = np.asarray(embeddings, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if e.shape != t.shape:
        raise ValueError(f"shape mismatch {e.shape} vs {t.shape}")
    d = e - t
    b = e.shape[0]
    return float(np.einsum("ij,ij->", d, d) / b), 2.0 * d / b


def ce_loss(logits, labels):
    """Mean softmax cross-entropy and its gradient w.r.t. the logits."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels)
    b, k = z.shape
    if y.shape != (b,):
        raise ValueError("need one label per row")
    if np.any(y < 0) or np.any(y >= k):
        raise ValueError(f"labels must lie in [0, {k})")
    z = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(logsum - z[np.arange(b), y]))
    p = np.exp(z - logsum[:, None])
    p[np.arange(b), y] -= 1.0
    return loss, p / b


# ------------------------------------------------------------------- data


@dataclass(frozen=True)
class SyntheticDatasetSpec:
    n_classes: int = 200
    input_dim: int = 64
    samples_per_class: int = 50
    noise_sigma: float = 0.1
    seed: int = 0


@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray
    centers: np.ndarray


def make_blobs(spec: SyntheticDatasetSpec) -> Dataset:
    """Gaussian blobs around class centers drawn uniformly on the unit sphere."""
    if spec.n_classes < 1:
        raise ConfigError("n_classes must be >= 1")
    if spec.input_dim < 1 or spec.samples_per_class < 1 or spec.noise_sigma < 0:
        raise ConfigError("input_dim and samples_per_class must be >= 1, noise_sigma >= 0")
    rng = np.random.default_rng(spec.seed)
    centers = rng.standard_normal((spec.n_classes, spec.input_dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    y = np.repeat(np.arange(spec.n_classes), spec.samples_per_class)
    x = centers[y] + spec.noise_sigma * rng.standard_normal((y.size, spec.input_dim))
    return Dataset(x, y, centers)


def stratified_split(y: np.ndarray, fraction: float, seed: int):
    """Per-class held-out split; returns ``(train_idx, eval_idx)`` sorted."""
    rng = np.random.default_rng(seed)
    train, held = [], []
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(idx.size)]
        k = int(round(fraction * idx.size))
        if fraction > 0 and idx.size > 1:
            k = min(max(k, 1), idx.size - 1)
        held.append(idx[:k])
        train.append(idx[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(held))


# ------------------------------------------------------------------- config


@dataclass(frozen=True)
class TrainConfig:
    label: str = "21"
    n: int | None = None  # None: n_min for the dataset's class count
    strategy: str = "sequential"
    assign_seed: int = 0
    project: bool = False
    loss: str = "cosine"
    hidden: tuple[int, ...] = (256, 256)
    activation: str = "relu"
    epochs: int = 20
    batch_size: int = 64
    lr: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0
    divergence_multiplier: float = 10.0
    divergence_patience: int = 3
    eval_fraction: float = 0.1
    record_time: bool = False
    stop_at_accuracy: float | None = None  # end the run once eval accuracy reaches this
    dataset: SyntheticDatasetSpec = field(default_factory=SyntheticDatasetSpec)

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.loss not in LOSSES:
            raise ConfigError(f"loss: must be one of {LOSSES}, got {self.loss!r}")
        if self.strategy not in ("sequential", "shuffled"):
            raise ConfigError(f"strategy: unknown value {self.strategy!r}")
        if self.optimizer not in ("adam", "sgd_momentum"):
            raise ConfigError(f"optimizer: unknown value {self.optimizer!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.lr < 0:
            raise ConfigError("lr must be >= 0")
        if not 0 <= self.eval_fraction < 1:
            raise ConfigError("eval_fraction must lie in [0, 1)")
        if self.divergence_patience < 1 or self.divergence_multiplier <= 0:
            raise ConfigError("divergence_patience must be >= 1 and divergence_multiplier > 0")
        if self.stop_at_accuracy is not None and not 0 < self.stop_at_accuracy <= 1:
            raise ConfigError("stop_at_accuracy must lie in (0, 1]")
        try:
            parse_label(self.label)
        except ValueError as exc:
            raise ConfigError(f"label: {exc}") from None

    def resolved_n(self) -> int:
        if self.n is not None:
            return int(self.n)
        return n_min(parse_label(self.label), self.dataset.n_classes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden"] = list(self.hidden)
        return {
            "system": {k: d[k] for k in ("label", "n", "strategy", "assign_seed", "project")},
            "model": {k: d[k] for k in ("hidden", "activation")},
            "train": {k: d[k] for k in ("loss", "epochs", "batch_size", "lr", "optimizer", "seed",
                                        "divergence_multiplier", "divergence_patience",
                                        "eval_fraction", "record_time", "stop_at_accuracy")},
            "dataset": d["dataset"],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        sections = {"system", "model", "train", "dataset"}
        unknown = set(data) - sections
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        flat: dict = {}
        names = {f.name for f in dataclasses.fields(cls)} - {"dataset"}
        for sec in ("system", "model", "train"):
            for k, v in (data.get(sec) or {}).items():
                if k not in names:
                    raise ConfigError(f"unknown field {sec}.{k}")
                flat[k] = v
        ds_names = {f.name for f in dataclasses.fields(SyntheticDatasetSpec)}
        ds = data.get("dataset") or {}
        bad = set(ds) - ds_names
        if bad:
            raise ConfigError(f"unknown field(s) dataset.{sorted(bad)}")
        try:
            flat["dataset"] = SyntheticDatasetSpec(**ds)
            return cls(**flat)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def with_overrides(self, **kw) -> "TrainConfig":
        return dataclasses.replace(self, **kw)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]


# ------------------------------------------------------------------- metrics


@dataclass(frozen=True)
class EpochRow:
    epoch: int
    loss: float
    accuracy: float
    lr: float
    wall_ms: float
    diverged: bool


@dataclass
class RunMetrics:
    rows: list[EpochRow] = field(default_factory=list)
    config_hash: str = ""

    @property
    def diverged(self) -> bool:
        return bool(self.rows) and self.rows[-1].diverged

    @property
    def losses(self) -> list[float]:
        return [r.loss for r in self.rows]

    @property
    def accuracies(self) -> list[float]:
        return [r.accuracy for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for r in self.rows:
            w.writerow([r.epoch, f"{r.loss:.9g}", f"{r.accuracy:.9g}", f"{r.lr:.9g}",
                        f"{r.wall_ms:.3f}", "true" if r.diverged else "false"])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(self.to_csv())

    @classmethod
    def read_csv(cls, path) -> "RunMetrics":
        with open(path, encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if tuple(header or ()) != METRICS_HEADER:
                raise ValueError(f"{path}: bad metrics header {header}")
            rows = [EpochRow(int(r[0]), float(r[1]), float(r[2]), float(r[3]), float(r[4]),
                             r[5] == "true") for r in reader]
        return cls(rows)


def normalize_curve(metrics: RunMetrics) -> RunMetrics:
    """Divide every loss by the curve's maximum finite loss."""
    if not metrics.rows:
        raise ValueError("empty metrics")
    finite = [r.loss for r in metrics.rows if math.isfinite(r.loss)]
    top = max(finite, default=0.0)
    if top == 0.0:
        warnings.warn("loss curve is all zero; left unnormalized", RuntimeWarning, stacklevel=2)
        return RunMetrics(list(metrics.rows), metrics.config_hash)
    return RunMetrics([dataclasses.replace(r, loss=r.loss / top) for r in metrics.rows],
                      metrics.config_hash)


def epochs_to_accuracy(metrics: RunMetrics, threshold: float) -> int | None:
    """First epoch whose eval accuracy reaches ``threshold``; None if never."""
    for r in metrics.rows:
        if r.accuracy >= threshold:
            return r.epoch
    return None


# ------------------------------------------------------------------- training


@dataclass
class TrainResult:
    metrics: RunMetrics
    model: MLPModel
    table: AssignmentTable | None
    n_clamped: int = 0


def _accuracy(model: MLPModel, x, y, targets, ce: bool) -> float:
    if y.size == 0:
        return float("nan")
    out = predict(model, x)
    ok = np.all(np.isfinite(out), axis=1)
    if ce:
        pred = np.argmax(np.where(ok[:, None], out, 0.0), axis=1)
    else:
        ok &= np.linalg.norm(out, axis=1) > 0
        pred = np.full(y.size, -1)
        if ok.any():
            pred[ok] = _kernels.nearest(out[ok], targets)
    return float(np.mean(ok & (pred == y)))


def build_table(config: TrainConfig) -> AssignmentTable:
    system = build_system(config.label, config.resolved_n())
    return assign(system, config.dataset.n_classes, config.strategy, config.assign_seed,
                  normalize=True, project=config.project)


def train(config: TrainConfig, data: Dataset | None = None) -> TrainResult:
    """Fit an encoder to fixed targets (cosine/euclidean) or a CE classifier."""
    ce = config.loss == "ce"
    n_classes = config.dataset.n_classes
    table = build_table(config)
    n_dim = table.dim
    if data is None:
        data = make_blobs(config.dataset)
    if data.x.shape[1] != config.dataset.input_dim:
        raise ConfigError("dataset input width does not match dataset.input_dim")
    tr, ev = stratified_split(data.y, config.eval_fraction, config.dataset.seed + 1)
    xtr, ytr = data.x[tr], data.y[tr]
    xev, yev = data.x[ev], data.y[ev]
    targets = table.coords

    sizes = [config.dataset.input_dim, *config.hidden, n_dim]
    model = init_model(sizes, config.activation, config.seed, n_classes=n_classes if ce else None)
    opt = OptimizerState(config.optimizer, config.lr)
    rng = np.random.default_rng(config.seed + 0x5EED)

    metrics = RunMetrics(config_hash=config.config_hash())
    initial_loss = None
    over = 0
    clamped_total = 0
    m = ytr.size
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(m)
        total = 0.0
        diverged = False
        for s in range(0, m, config.batch_size):
            idx = order[s:s + config.batch_size]
            out, cache = forward(model, xtr[idx])
            if ce:
                loss, g = ce_loss(out, ytr[idx])
            elif config.loss == "cosine":
                loss, g, nc = cosine_loss(out, targets[ytr[idx]])
                clamped_total += nc
            else:
                loss, g = euclidean_loss(out, targets[ytr[idx]])
            total += loss * idx.size
            if not math.isfinite(loss):
                diverged = True
                break
            try:
                step(model, backward(model, cache, g), opt)
            except DivergenceError:
                diverged = True
                break
        epoch_loss = total / m if not diverged else float("nan")
        if not diverged:
            if initial_loss is None:
                initial_loss = epoch_loss
            if epoch_loss > initial_loss * config.divergence_multiplier:
                over += 1
                diverged = over >= config.divergence_patience
            else:
                over = 0
        acc = _accuracy(model, xev, yev, targets, ce)
        wall = (time.perf_counter() - t0) * 1000.0 if config.record_time else 0.0
        metrics.rows.append(EpochRow(epoch, epoch_loss, acc, config.lr, wall, diverged))
        if diverged:
            break
        if config.stop_at_accuracy is not None and acc >= config.stop_at_accuracy:
            break
    return TrainResult(metrics, model, table, clamped_total)


# ------------------------------------------------------------------- desk protocol

DESK_DATASET = SyntheticDatasetSpec(n_classes=200, input_dim=64, samples_per_class=50,
                                    noise_sigma=0.05, seed=0)
DESK_SEEDS = (0, 1, 2, 3, 4)


def desk_config(label: str, n: int | None = None, loss: str = "cosine", seed: int = 0,
                epochs: int = 60, project: bool | None = None,
                stop_at_accuracy: float | None = None) -> TrainConfig:
    """Configuration used for the configuration-ordering and n_min comparisons.

    200 blob classes in 64 input dimensions, 50 samples per class, Adam at
    lr 1e-4, batch 128, 256-256 relu encoder. Zero-sum systems (A, P) are
    projected to ``n - 1`` coordinates by default so that the embedding width
    matches the system's own dimension. ``seed`` drives data, init, batching
    and assignment together. Passing ``stop_at_accuracy`` cuts a run short
    once the threshold is hit, which leaves the epochs-to-threshold count
    unchanged.
    """
    lab = parse_label(label)
    if project is None:
        project = lab.permutohedron or lab.display_name == "11"
    if n is None:
        # projection keeps the count, so A and P land in n_min - 1 dimensions
        n = n_min(lab, DESK_DATASET.n_classes)
    return TrainConfig(label=lab.display_name, n=n, project=project, loss=loss, hidden=(256, 256),
                       epochs=epochs, batch_size=128, lr=1e-4, optimizer="adam", seed=seed,
                       assign_seed=seed, dataset=dataclasses.replace(DESK_DATASET, seed=seed),
                       stop_at_accuracy=stop_at_accuracy)


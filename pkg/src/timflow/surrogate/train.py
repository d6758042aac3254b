"""Adam training loop and random hyperparameter search for the surrogate.

Training is deterministic given (data, hyperparameters, seed): the seed fixes
weight initialization and the batch shuffle order, and the returned model
carries the weights from the epoch with the best validation loss. The search
samples configurations uniformly (learning rate log-uniformly), trains each
one several times with different seeds because badly initialized runs can
fail to converge, and scores a configuration by its best run.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import DivergedLoss, EmptyDataset
from ..metrics import error_mean
from ..pattern import TimGrid
from .model import Hyperparams, SurrogateModel, loss_bce


class Adam:
    """Per-tensor Adam with bias correction (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(self, params, learning_rate, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = dict(params)
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(arr) for name, arr in self.params.items()}
        self.v = {name: np.zeros_like(arr) for name, arr in self.params.items()}

    def step(self, grads):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for name, arr in self.params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            arr -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float | None


@dataclass
class TrainReport:
    epochs: list[EpochStats] = field(default_factory=list)
    wall_time_s: float = 0.0
    best_epoch: int = 0
    final_val_mre: float | None = None

    def to_jsonl(self) -> str:
        lines = [json.dumps({"epoch": e.epoch, "train_loss": e.train_loss,
                             "val_loss": e.val_loss}, sort_keys=True)
                 for e in self.epochs]
        lines.append(json.dumps({"wall_time_s": self.wall_time_s,
                                 "best_epoch": self.best_epoch,
                                 "final_val_mre": self.final_val_mre}, sort_keys=True))
        return "\n".join(lines) + "\n"


def _stack(pairs, dtype):
    xs = []
    ts = []
    for a, b in pairs:
        fa = a.amounts if isinstance(a, TimGrid) else np.asarray(a)
        fb = b.amounts if isinstance(b, TimGrid) else np.asarray(b)
        xs.append(fa.astype(dtype))
        ts.append(fb.astype(dtype))
    return np.stack(xs)[:, None, :, :], np.stack(ts)[:, None, :, :]


def train(train_pairs, val_pairs, hp: Hyperparams, seed: int,
          dtype=np.float32, log=None) -> tuple[SurrogateModel, TrainReport]:
    """Fit a surrogate on (dispensed, compressed) grid pairs.

    ``val_pairs`` may be empty; the best epoch is then picked by train loss.
    ``log`` is called with one JSON line per epoch when given.
    """
    train_pairs = list(train_pairs)
    val_pairs = list(val_pairs or [])
    if not train_pairs:
        raise EmptyDataset("no training pairs")
    begin = time.perf_counter()
    x_train, t_train = _stack(train_pairs, dtype)
    resolution = x_train.shape[2:]
    input_scale = float(x_train.max())
    if input_scale <= 0.0:
        input_scale = 1.0
    rng = np.random.default_rng(seed)
    model = SurrogateModel.from_hyperparams(resolution, hp, input_scale=input_scale,
                                            rng=rng, dtype=dtype)
    x_train /= input_scale
    if val_pairs:
        x_val, t_val = _stack(val_pairs, dtype)
        x_val /= input_scale
    optimizer = Adam(model.param_items(), hp.learning_rate)
    n = len(train_pairs)
    report = TrainReport()
    best_key = math.inf
    best_weights = model.get_weights()
    best_epoch = 0
    for epoch in range(1, hp.epochs + 1):
        order = rng.permutation(n)
        running = 0.0
        for start in range(0, n, hp.batch_size):
            idx = order[start:start + hp.batch_size]
            xb = x_train[idx]
            tb = t_train[idx]
            pred, ctxs = model.forward_batch(xb, with_ctx=True)
            batch_loss = loss_bce(pred, tb)
            if not math.isfinite(batch_loss):
                raise DivergedLoss(f"non-finite loss at epoch {epoch}")
            grads = model.backward_batch(ctxs, pred, tb)
            optimizer.step(grads)
            running += batch_loss * len(idx)
        train_loss = running / n
        val_loss = None
        if val_pairs:
            val_loss = loss_bce(model.forward_batch(x_val), t_val)
            if not math.isfinite(val_loss):
                raise DivergedLoss(f"non-finite validation loss at epoch {epoch}")
        stats = EpochStats(epoch, train_loss, val_loss)
        report.epochs.append(stats)
        if log is not None:
            log(json.dumps({"epoch": epoch, "train_loss": train_loss,
                            "val_loss": val_loss}, sort_keys=True))
        key = val_loss if val_loss is not None else train_loss
        if key < best_key:
            best_key = key
            best_weights = model.get_weights()
            best_epoch = epoch
    model.set_weights(best_weights)
    report.best_epoch = best_epoch
    report.wall_time_s = time.perf_counter() - begin
    if val_pairs:
        preds = model.forward_batch(x_val)
        pairs = [(t_val[k, 0], preds[k, 0]) for k in range(len(val_pairs))]
        report.final_val_mre = error_mean(pairs)
    return model, report


@dataclass(frozen=True)
class SearchSpace:
    conv_layers: tuple[int, int] = (2, 6)
    filters: tuple[int, ...] = (8, 32, 128, 512)
    kernel: tuple[int, ...] = (3, 5)
    dense_layers: tuple[int, int] = (0, 2)
    batch_size: tuple[int, ...] = (8, 32, 128)
    learning_rate: tuple[float, float] = (1e-5, 1e-2)


@dataclass(frozen=True)
class SearchBudget:
    """Per-trial training budget: subset sizes and epoch count."""

    train_n: int
    val_n: int
    epochs: int = 1


@dataclass
class TrialResult:
    hyperparams: Hyperparams
    scores: list[float]
    score: float
    error: str | None = None


def _sample_hyperparams(space: SearchSpace, rng, epochs: int) -> Hyperparams:
    lr_lo, lr_hi = space.learning_rate
    lr = 10.0 ** rng.uniform(math.log10(lr_lo), math.log10(lr_hi))
    return Hyperparams(
        conv_layers=int(rng.integers(space.conv_layers[0], space.conv_layers[1] + 1)),
        filters=int(rng.choice(space.filters)),
        kernel=int(rng.choice(space.kernel)),
        dense_layers=int(rng.integers(space.dense_layers[0], space.dense_layers[1] + 1)),
        batch_size=int(rng.choice(space.batch_size)),
        learning_rate=float(lr),
        epochs=epochs,
    )


def hyperparameter_search(pairs, trials: int, repeats: int, budget: SearchBudget,
                          seed: int, space: SearchSpace | None = None,
                          log=None) -> tuple[Hyperparams, list[TrialResult]]:
    """Random search; each trial trains ``repeats`` seeds and keeps the best
    validation loss. Failed runs score infinity instead of aborting the search."""
    if trials < 1 or repeats < 1:
        raise ValueError("trials and repeats must be >= 1")
    pairs = list(pairs)
    if len(pairs) < budget.train_n + budget.val_n:
        raise EmptyDataset(f"need {budget.train_n + budget.val_n} pairs, have {len(pairs)}")
    space = space or SearchSpace()
    train_pairs = pairs[:budget.train_n]
    val_pairs = pairs[budget.train_n:budget.train_n + budget.val_n]
    rng = np.random.default_rng(seed)
    results: list[TrialResult] = []
    for trial in range(trials):
        hp = _sample_hyperparams(space, rng, budget.epochs)
        scores = []
        error = None
        for repeat in range(repeats):
            run_seed = int(np.random.SeedSequence((seed, trial, repeat)).generate_state(1)[0])
            try:
                _, rep = train(train_pairs, val_pairs, hp, run_seed)
                scores.append(min(e.val_loss for e in rep.epochs))
            except Exception as exc:
                scores.append(math.inf)
                error = f"{type(exc).__name__}: {exc}"
        result = TrialResult(hp, scores, min(scores), error)
        results.append(result)
        if log is not None:
            log(json.dumps({"trial": trial, "score": result.score,
                            "hyperparams": {"conv_layers": hp.conv_layers,
                                            "filters": hp.filters, "kernel": hp.kernel,
                                            "dense_layers": hp.dense_layers,
                                            "batch_size": hp.batch_size,
                                            "learning_rate": hp.learning_rate},
                            "error": error}, sort_keys=True))
    best = min(results, key=lambda r: r.score)
    return best.hyperparams, results

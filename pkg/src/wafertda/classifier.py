"""Single-hidden-layer ReLU network with softmax cross-entropy, trained by Adam.

Everything is float64 numpy. Training touches only the rows of the first
weight matrix whose input feature is nonzero somewhere in the training set;
the other rows get zero gradient at every step, so Adam leaves them exactly
where they started and skipping them changes nothing.
"""
from __future__ import annotations

import json
import struct
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numba
import numpy as np

from .errors import FormatError, InvalidInput, InvalidParameter, LabelError, ShapeError

__all__ = [
    "PARAM_NAMES",
    "MLPModel",
    "TrainConfig",
    "AdamState",
    "EvalReport",
    "init_model",
    "forward",
    "predict",
    "loss_and_grad",
    "init_adam",
    "adam_step",
    "train",
    "evaluate",
    "confusion_matrix",
    "save_model",
    "load_model",
]

PARAM_NAMES = ("W1", "b1", "W2", "b2")
_MAGIC = b"WTDAMLP1"


@dataclass
class MLPModel:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    # optional input standardization (x - shift) / scale
    shift: np.ndarray | None = None
    scale: np.ndarray | None = None

    @property
    def input_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def n_classes(self) -> int:
        return self.W2.shape[1]

    def params(self) -> dict:
        return {k: getattr(self, k) for k in PARAM_NAMES}

    def copy(self) -> "MLPModel":
        dup = lambda a: None if a is None else a.copy()
        return MLPModel(*(getattr(self, k).copy() for k in PARAM_NAMES), dup(self.shift), dup(self.scale))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 700
    batch_size: int = 32
    seed: int = 0
    hidden: int = 1024
    standardize: bool = False

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InvalidParameter(f"learning_rate must be positive, got {self.learning_rate}")
        for name in ("beta1", "beta2"):
            if not 0 <= getattr(self, name) < 1:
                raise InvalidParameter(f"{name} must lie in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1 or self.hidden < 1:
            raise InvalidParameter("epochs, batch_size and hidden must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidParameter(f"unknown training options: {sorted(unknown)}")
        return cls(**data)


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0


@dataclass
class EvalReport:
    accuracy: float
    confusion: np.ndarray
    curves: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def recall(self) -> np.ndarray:
        rows = self.confusion.sum(axis=1)
        return np.divide(np.diag(self.confusion), rows, out=np.zeros(len(rows)), where=rows > 0)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
            "recall": self.recall.tolist(),
            "curves": self.curves,
            "config": self.config,
        }


def init_model(seed: int, input_dim: int = 800, hidden: int = 1024, n_classes: int = 5) -> MLPModel:
    """Weights uniform with standard deviation 1/sqrt(fan_in); zero biases."""
    rng = np.random.default_rng(seed)
    lim1 = np.sqrt(3.0 / input_dim)
    lim2 = np.sqrt(3.0 / hidden)
    W1 = rng.uniform(-lim1, lim1, (input_dim, hidden))
    W2 = rng.uniform(-lim2, lim2, (hidden, n_classes))
    return MLPModel(W1, np.zeros(hidden), W2, np.zeros(n_classes))


def _inputs(model: MLPModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ShapeError(f"expected feature vectors of length {model.input_dim}, got shape {X.shape}")
    if model.shift is not None:
        X = (X - model.shift) / model.scale
    return X


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _logits(W1, b1, W2, b2, X):
    h = X @ W1
    h += b1
    np.maximum(h, 0.0, out=h)
    return h, h @ W2 + b2


def forward(model: MLPModel, X) -> np.ndarray:
    """Class probabilities, one softmax row per input vector."""
    X = _inputs(model, X)
    _, z = _logits(model.W1, model.b1, model.W2, model.b2, X)
    return _softmax(z)


def predict(model: MLPModel, X) -> np.ndarray:
    X = _inputs(model, X)
    _, z = _logits(model.W1, model.b1, model.W2, model.b2, X)
    return np.argmax(z, axis=1)


def _labels(y, n: int, n_classes: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n,):
        raise LabelError(f"expected {n} labels, got shape {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.mod(y, 1) == 0):
            raise LabelError("labels must be integers")
        y = y.astype(np.int64)
    if n and (y.min() < 0 or y.max() >= n_classes):
        raise LabelError(f"labels must lie in 0..{n_classes - 1}")
    return y


def _backprop(W1, b1, W2, b2, X, y):
    n = X.shape[0]
    h, z = _logits(W1, b1, W2, b2, X)
    logp = _log_softmax(z)
    loss = -logp[np.arange(n), y].mean()
    dz = np.exp(logp)
    dz[np.arange(n), y] -= 1.0
    dz /= n
    dh = dz @ W2.T
    dh *= h > 0
    grads = {"W1": X.T @ dh, "b1": dh.sum(axis=0), "W2": h.T @ dz, "b2": dz.sum(axis=0)}
    return float(loss), grads, z


def loss_and_grad(model: MLPModel, X, y) -> tuple[float, dict]:
    """Mean softmax cross-entropy and its gradient for every parameter."""
    X = _inputs(model, X)
    y = _labels(y, X.shape[0], model.n_classes)
    loss, grads, _ = _backprop(model.W1, model.b1, model.W2, model.b2, X, y)
    return loss, grads


def init_adam(params: dict) -> AdamState:
    return AdamState({k: np.zeros(p.shape) for k, p in params.items()}, {k: np.zeros(p.shape) for k, p in params.items()})


@numba.njit(cache=True, error_model="numpy")
def _adam_kernel(p, g, m, v, lr, b1, b2, eps, c1, c2):
    # one fused pass; c1, c2 are the bias corrections 1 - beta^t
    pf, gf, mf, vf = p.ravel(), g.ravel(), m.ravel(), v.ravel()
    for i in range(pf.size):
        gi = gf[i]
        mi = b1 * mf[i] + (1.0 - b1) * gi
        vi = b2 * vf[i] + (1.0 - b2) * gi * gi
        mf[i] = mi
        vf[i] = vi
        pf[i] -= lr * (mi / c1) / (np.sqrt(vi / c2) + eps)


def _adam_update(params: dict, grads: dict, state: AdamState, cfg: TrainConfig) -> None:
    state.t += 1
    c1 = 1.0 - cfg.beta1 ** state.t
    c2 = 1.0 - cfg.beta2 ** state.t
    for k, p in params.items():
        if not p.flags.c_contiguous:
            raise InvalidParameter(f"parameter {k} must be C-contiguous")
        _adam_kernel(p, np.ascontiguousarray(grads[k]), state.m[k], state.v[k], cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps, c1, c2)


def adam_step(model: MLPModel, grads: dict, state: AdamState, cfg: TrainConfig) -> tuple[MLPModel, AdamState]:
    """One bias-corrected Adam update; returns a new model and state."""
    new = model.copy()
    st = AdamState({k: a.copy() for k, a in state.m.items()}, {k: a.copy() for k, a in state.v.items()}, state.t)
    _adam_update(new.params(), {k: np.asarray(grads[k], dtype=float) for k in PARAM_NAMES}, st, cfg)
    return new, st


def _accuracy_and_loss(params: dict, X, y) -> tuple[float, float]:
    _, z = _logits(params["W1"], params["b1"], params["W2"], params["b2"], X)
    logp = _log_softmax(z)
    return float(np.mean(np.argmax(z, axis=1) == y)), float(-logp[np.arange(len(y)), y].mean())


def train(X_train, y_train, X_val=None, y_val=None, config: TrainConfig = TrainConfig(), n_classes: int = 5):
    """Mini-batch Adam on softmax cross-entropy.

    Returns ``(model, curves)``. Per epoch the curves hold the running
    mini-batch loss and accuracy over the epoch (``train_loss``,
    ``train_acc``), the same on the validation set after the epoch when one
    is given, and the wall time of the epoch.
    """
    X = np.asarray(X_train, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InvalidInput("training set is empty")
    y = _labels(y_train, X.shape[0], n_classes)
    model = init_model(config.seed, X.shape[1], config.hidden, n_classes)
    if config.standardize:
        sd = X.std(axis=0)
        model.shift, model.scale = X.mean(axis=0), np.where(sd > 0, sd, 1.0)
        X = (X - model.shift) / model.scale
    have_val = X_val is not None and len(X_val) > 0
    if have_val:
        Xv = _inputs(model, X_val)
        yv = _labels(y_val, Xv.shape[0], n_classes)

    # rows of W1 fed by an always-zero input never move
    active = np.flatnonzero(np.any(X != 0, axis=0))
    Xa = np.ascontiguousarray(X[:, active])
    params = {"W1": model.W1[active], "b1": model.b1, "W2": model.W2, "b2": model.b2}
    state = init_adam(params)
    if have_val:
        Xva = np.ascontiguousarray(Xv[:, active])

    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), 1]))
    n, bs = X.shape[0], config.batch_size
    curves = {k: [] for k in ("train_loss", "train_acc", "val_loss", "val_acc", "epoch_time")}
    for _ in range(config.epochs):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        loss_sum, correct = 0.0, 0
        for lo in range(0, n, bs):
            idx = order[lo:lo + bs]
            xb, yb = Xa[idx], y[idx]
            loss, grads, z = _backprop(params["W1"], params["b1"], params["W2"], params["b2"], xb, yb)
            loss_sum += loss * len(idx)
            correct += int(np.count_nonzero(np.argmax(z, axis=1) == yb))
            _adam_update(params, grads, state, config)
        curves["train_loss"].append(loss_sum / n)
        curves["train_acc"].append(correct / n)
        if have_val:
            acc, vloss = _accuracy_and_loss(params, Xva, yv)
            curves["val_acc"].append(acc)
            curves["val_loss"].append(vloss)
        curves["epoch_time"].append(time.perf_counter() - t0)

    model.W1[active] = params["W1"]
    return model, curves


def confusion_matrix(y_true, y_pred, n_classes: int = 5) -> np.ndarray:
    """Counts with true class on rows and predicted class on columns."""
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
    return cm


def evaluate(model: MLPModel, X_test, y_test, curves: dict | None = None, config: dict | None = None) -> EvalReport:
    X = np.asarray(X_test, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InvalidInput("test set is empty")
    y = _labels(y_test, X.shape[0], model.n_classes)
    cm = confusion_matrix(y, predict(model, X), model.n_classes)
    return EvalReport(float(np.trace(cm) / cm.sum()), cm, curves or {}, config or {})


def save_model(model: MLPModel, path, config: TrainConfig | None = None) -> None:
    """Checkpoint: magic, header length, JSON header, then little-endian float64 arrays."""
    arrays = dict(model.params())
    if model.shift is not None:
        arrays["shift"], arrays["scale"] = model.shift, model.scale
    header = {
        "format": "wafertda-mlp",
        "version": 1,
        "dtype": "<f8",
        "arrays": [[k, list(a.shape)] for k, a in arrays.items()],
        "config": config.to_dict() if config else None,
    }
    hbytes = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(hbytes)))
        fh.write(hbytes)
        for a in arrays.values():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_model(path) -> tuple[MLPModel, dict]:
    """Inverse of :func:`save_model`; returns the model and the stored header."""
    data = Path(path).read_bytes()
    if data[:8] != _MAGIC:
        raise FormatError(f"{path} is not a model checkpoint")
    (hlen,) = struct.unpack("<Q", data[8:16])
    try:
        header = json.loads(data[16:16 + hlen])
    except json.JSONDecodeError as exc:
        raise FormatError(f"corrupt checkpoint header in {path}") from exc
    pos = 16 + hlen
    arrays = {}
    for name, shape in header["arrays"]:
        count = int(np.prod(shape))
        arrays[name] = np.frombuffer(data, dtype="<f8", count=count, offset=pos).reshape(shape).astype(float)
        pos += 8 * count
    if pos != len(data):
        raise FormatError(f"checkpoint {path} has {len(data) - pos} trailing bytes")
    model = MLPModel(*(arrays[k] for k in PARAM_NAMES), arrays.get("shift"), arrays.get("scale"))
    return model, header

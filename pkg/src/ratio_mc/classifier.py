"""Binary classifiers that approximate the class-1 posterior probability.

The workhorse is a small fully-connected network with a sigmoid output,
implemented directly on numpy so its gradients are explicit and checkable
against finite differences.  Training minimizes binary cross-entropy with
mini-batch Adam or SGD, early-stops on a held-out stratified validation
split, and is bit-reproducible given the config seed.

A logistic-regression baseline is the same machinery with no hidden layers
(``hidden_layer_sizes=()``).  ``OraclePosterior`` evaluates the exact
posterior from closed-form densities and is the ground truth the trained
models are measured against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin

from .dataset import LabeledDataset, stratified_split
from .errors import NonFiniteLoss, ParseError, UnsupportedDensity
from .rng import RngStream
from .validation import check_labels, check_points

# Probabilities are kept strictly inside (0, 1): expit saturates to exact
# 0.0 / 1.0 for |logit| beyond ~745 / ~37, which would break the odds
# transform downstream.
_P_LO = np.finfo(np.float64).tiny
_P_HI = float(np.nextafter(1.0, 0.0))

DEFAULT_CLAMP_EPS = 1e-7

# Stream ids used inside fit(); disjoint from the pipeline-level ids in cli.
_SPLIT_STREAM_ID = 11
_INIT_STREAM_ID = 12
_SHUFFLE_STREAM_ID = 13

_ACTIVATIONS = ("tanh", "relu")


@dataclass
class TrainConfig:
    """Hyperparameters of the training loop."""

    epochs: int = 200
    batch_size: int = 128
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    early_stop_patience: int = 20
    validation_fraction: float = 0.1

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not (np.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValueError("learning_rate must be finite and positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")
        if self.early_stop_patience < 0:
            raise ValueError("early_stop_patience must be >= 0")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in (0, 1)")


@dataclass
class LossTrace:
    """Mean per-sample losses recorded after each epoch.

    ``best_epoch`` indexes the epoch whose parameters were returned;
    0 means the initialization was never improved upon.  The losses of the
    freshly initialized network are kept so improvement is checkable.
    """

    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = 0
    init_train_loss: float = float("nan")
    init_val_loss: float = float("nan")

    def returned_train_loss(self) -> float:
        """Train loss at the parameters the training run returned."""
        if self.best_epoch == 0:
            return self.init_train_loss
        return self.train_loss[self.best_epoch - 1]


class MlpNetwork:
    """Feed-forward network: affine layers, tanh/relu hidden units, sigmoid out.

    Weights are (fan_in, fan_out) matrices so a batch forward pass is
    ``X @ W + b``.  The per-dimension input standardizer is frozen into the
    network and applied before the first layer.
    """

    def __init__(self, layer_sizes, activation, weights, biases, input_mean, input_scale):
        self.layer_sizes = [int(s) for s in layer_sizes]
        if self.layer_sizes[-1] != 1:
            raise ValueError("output layer width must be 1")
        if activation not in _ACTIVATIONS:
            raise ValueError(f"activation must be one of {_ACTIVATIONS}, got {activation!r}")
        self.activation = activation
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            fan_in, fan_out = self.layer_sizes[i], self.layer_sizes[i + 1]
            if w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
                raise ValueError(f"layer {i}: parameter shapes do not match layer sizes")
        self.input_mean = np.asarray(input_mean, dtype=np.float64).reshape(-1)
        self.input_scale = np.asarray(input_scale, dtype=np.float64).reshape(-1)

    @property
    def dim(self) -> int:
        return self.layer_sizes[0]

    @classmethod
    def initialize(cls, layer_sizes, activation, rng: RngStream,
                   input_mean=None, input_scale=None) -> "MlpNetwork":
        """Glorot-uniform weights, zero biases, drawn layer by layer."""
        d = layer_sizes[0]
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            u = rng.uniform(fan_in * fan_out).reshape(fan_in, fan_out)
            weights.append((2.0 * u - 1.0) * bound)
            biases.append(np.zeros(fan_out))
        if input_mean is None:
            input_mean = np.zeros(d)
        if input_scale is None:
            input_scale = np.ones(d)
        return cls(layer_sizes, activation, weights, biases, input_mean, input_scale)

    def _hidden_activations(self, x_std):
        acts = [x_std]
        a = x_std
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            z = a @ w + b
            a = np.tanh(z) if self.activation == "tanh" else np.maximum(z, 0.0)
            acts.append(a)
        return acts

    def logits(self, x) -> np.ndarray:
        pts = check_points(x, self.dim)
        acts = self._hidden_activations((pts - self.input_mean) / self.input_scale)
        return (acts[-1] @ self.weights[-1] + self.biases[-1]).reshape(-1)

    def forward(self, x) -> np.ndarray:
        """Posterior probabilities, strictly inside (0, 1)."""
        out = np.clip(expit(self.logits(x)), _P_LO, _P_HI)
        if np.ndim(x) == 1 and np.asarray(x).size == self.dim:
            return float(out[0])
        return out

    __call__ = forward

    def bce_loss(self, x, y, clamp_eps=DEFAULT_CLAMP_EPS) -> float:
        r = np.clip(self.forward(check_points(x, self.dim)), clamp_eps, 1.0 - clamp_eps)
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        return float(-np.sum(np.where(y == 1.0, np.log(r), np.log1p(-r))))

    def grad_bce(self, x, y, clamp_eps=DEFAULT_CLAMP_EPS):
        """Gradient of the summed BCE loss over the batch.

        Consistent with the clamp in ``bce_loss``: samples whose probability
        lies outside [eps, 1-eps] contribute zero gradient there, and zero
        here as well.
        """
        pts = check_points(x, self.dim)
        y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
        acts = self._hidden_activations((pts - self.input_mean) / self.input_scale)
        logits = acts[-1] @ self.weights[-1] + self.biases[-1]
        r = np.clip(expit(logits), _P_LO, _P_HI)
        inside = (r > clamp_eps) & (r < 1.0 - clamp_eps)
        delta = np.where(inside, r - y, 0.0)

        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        grads_w[-1] = acts[-1].T @ delta
        grads_b[-1] = delta.sum(axis=0)
        back = delta @ self.weights[-1].T
        for layer in range(len(self.weights) - 2, -1, -1):
            a = acts[layer + 1]
            deriv = (1.0 - a * a) if self.activation == "tanh" else (a > 0.0).astype(np.float64)
            d_layer = back * deriv
            grads_w[layer] = acts[layer].T @ d_layer
            grads_b[layer] = d_layer.sum(axis=0)
            back = d_layer @ self.weights[layer].T
        return grads_w, grads_b

    # --- parameter plumbing -------------------------------------------------

    def copy_params(self):
        return [w.copy() for w in self.weights], [b.copy() for b in self.biases]

    def set_params_(self, weights, biases):
        self.weights = [w.copy() for w in weights]
        self.biases = [b.copy() for b in biases]

    def flat_params(self) -> np.ndarray:
        return np.concatenate(
            [w.ravel() for w in self.weights] + [b.ravel() for b in self.biases]
        )

    def set_flat_params(self, flat):
        flat = np.asarray(flat, dtype=np.float64)
        pos = 0
        for i, w in enumerate(self.weights):
            self.weights[i] = flat[pos:pos + w.size].reshape(w.shape).copy()
            pos += w.size
        for i, b in enumerate(self.biases):
            self.biases[i] = flat[pos:pos + b.size].reshape(b.shape).copy()
            pos += b.size
        if pos != flat.size:
            raise ValueError("flat parameter vector has the wrong length")

    def to_dict(self) -> dict:
        return {
            "layer_sizes": self.layer_sizes,
            "activation": self.activation,
            "standardizer": {
                "mean": self.input_mean.tolist(),
                "scale": self.input_scale.tolist(),
            },
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d) -> "MlpNetwork":
        try:
            return cls(
                d["layer_sizes"],
                d["activation"],
                d["weights"],
                d["biases"],
                d["standardizer"]["mean"],
                d["standardizer"]["scale"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad network description: {exc}") from exc


def posterior_values(posterior, x) -> np.ndarray:
    """Evaluate any posterior-like object at a batch of points.

    Accepts a fitted MlpClassifier (``.posterior``), an MlpNetwork, or any
    plain callable mapping an (n, d) matrix to probabilities.
    """
    if hasattr(posterior, "posterior"):
        return posterior.posterior(x)
    return posterior(x)


def bce_loss(posterior, ds: LabeledDataset, clamp_eps=DEFAULT_CLAMP_EPS) -> float:
    """Summed binary cross-entropy of ``posterior`` on a labeled dataset."""
    if ds.n == 0:
        raise ValueError("dataset is empty")
    r = np.clip(
        np.asarray(posterior_values(posterior, ds.points), dtype=np.float64).reshape(-1),
        clamp_eps,
        1.0 - clamp_eps,
    )
    y = ds.labels.astype(np.float64)
    return float(-np.sum(np.where(y == 1.0, np.log(r), np.log1p(-r))))


class _Adam:
    def __init__(self, net, lr, beta1, beta2, eps):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m_w = [np.zeros_like(w) for w in net.weights]
        self.v_w = [np.zeros_like(w) for w in net.weights]
        self.m_b = [np.zeros_like(b) for b in net.biases]
        self.v_b = [np.zeros_like(b) for b in net.biases]

    def step(self, net, grads_w, grads_b):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for i in range(len(net.weights)):
            for params, grads, m, v in (
                (net.weights, grads_w, self.m_w, self.v_w),
                (net.biases, grads_b, self.m_b, self.v_b),
            ):
                g = grads[i]
                m[i] = self.b1 * m[i] + (1.0 - self.b1) * g
                v[i] = self.b2 * v[i] + (1.0 - self.b2) * g * g
                params[i] = params[i] - self.lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + self.eps)


class _Sgd:
    def __init__(self, lr):
        self.lr = lr

    def step(self, net, grads_w, grads_b):
        for i in range(len(net.weights)):
            net.weights[i] = net.weights[i] - self.lr * grads_w[i]
            net.biases[i] = net.biases[i] - self.lr * grads_b[i]


class MlpClassifier(BaseEstimator, ClassifierMixin):
    """Sklearn-style front end over MlpNetwork.

    ``fit(X, y)`` trains on binary labels with a stratified 90/10 (by
    default) validation split, early stopping, and returns the parameters
    of the best validation epoch.  Everything is deterministic given
    ``seed``.
    """

    def __init__(self, hidden_layer_sizes=(64, 64), activation="tanh",
                 epochs=200, batch_size=128, learning_rate=1e-3,
                 optimizer="adam", beta1=0.9, beta2=0.999, adam_eps=1e-8,
                 early_stop_patience=20, validation_fraction=0.1, seed=0,
                 loss_clamp_eps=DEFAULT_CLAMP_EPS):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.activation = activation
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.beta1 = beta1
        self.beta2 = beta2
        self.adam_eps = adam_eps
        self.early_stop_patience = early_stop_patience
        self.validation_fraction = validation_fraction
        self.seed = seed
        self.loss_clamp_eps = loss_clamp_eps

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            optimizer=self.optimizer,
            beta1=self.beta1,
            beta2=self.beta2,
            adam_eps=self.adam_eps,
            seed=self.seed,
            early_stop_patience=self.early_stop_patience,
            validation_fraction=self.validation_fraction,
        )

    def fit(self, X, y):
        cfg = self._train_config()
        X = check_points(X, name="X")
        y = check_labels(y, n=X.shape[0])
        ds = LabeledDataset(X, y)
        if ds.n0 == 0 or ds.n1 == 0:
            raise ValueError("training needs at least one sample of each class")

        split = stratified_split(
            ds, 1.0 - cfg.validation_fraction, RngStream(cfg.seed, _SPLIT_STREAM_ID)
        )
        tr, va = split.train, split.validation
        mean = tr.points.mean(axis=0)
        std = tr.points.std(axis=0)
        scale = np.where(std > 0.0, std, 1.0)

        layer_sizes = [ds.dim, *[int(h) for h in self.hidden_layer_sizes], 1]
        net = MlpNetwork.initialize(
            layer_sizes, self.activation, RngStream(cfg.seed, _INIT_STREAM_ID),
            input_mean=mean, input_scale=scale,
        )
        opt = (
            _Adam(net, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)
            if cfg.optimizer == "adam"
            else _Sgd(cfg.learning_rate)
        )
        shuffle_rng = RngStream(cfg.seed, _SHUFFLE_STREAM_ID)
        eps = self.loss_clamp_eps

        x_tr, y_tr = tr.points, tr.labels
        x_va, y_va = va.points, va.labels
        trace = LossTrace(
            init_train_loss=net.bce_loss(x_tr, y_tr, eps) / tr.n,
            init_val_loss=net.bce_loss(x_va, y_va, eps) / va.n,
        )
        best_val = trace.init_val_loss
        best_params = net.copy_params()
        best_epoch = 0
        since_improve = 0

        for epoch in range(1, cfg.epochs + 1):
            perm = shuffle_rng.permutation(tr.n)
            for start in range(0, tr.n, cfg.batch_size):
                idx = perm[start:start + cfg.batch_size]
                gw, gb = net.grad_bce(x_tr[idx], y_tr[idx], eps)
                inv = 1.0 / idx.size
                gw = [g * inv for g in gw]
                gb = [g * inv for g in gb]
                opt.step(net, gw, gb)
            tr_loss = net.bce_loss(x_tr, y_tr, eps) / tr.n
            va_loss = net.bce_loss(x_va, y_va, eps) / va.n
            if not (np.isfinite(tr_loss) and np.isfinite(va_loss)):
                raise NonFiniteLoss(
                    f"non-finite loss at epoch {epoch}: train={tr_loss}, val={va_loss}"
                )
            trace.train_loss.append(tr_loss)
            trace.val_loss.append(va_loss)
            if va_loss < best_val:
                best_val = va_loss
                best_params = net.copy_params()
                best_epoch = epoch
                since_improve = 0
            else:
                since_improve += 1
                if since_improve >= cfg.early_stop_patience:
                    break

        net.set_params_(*best_params)
        trace.best_epoch = best_epoch
        self.network_ = net
        self.loss_trace_ = trace
        self.n0_ = ds.n0
        self.n1_ = ds.n1
        self.classes_ = np.array([0, 1])
        return self

    def posterior(self, X) -> np.ndarray:
        """p(label=1 | x) for each row of X, strictly inside (0, 1)."""
        return self.network_.forward(check_points(X, self.network_.dim))

    def predict_proba(self, X) -> np.ndarray:
        r = self.posterior(X)
        return np.column_stack([1.0 - r, r])

    def predict(self, X) -> np.ndarray:
        return (self.posterior(X) >= 0.5).astype(np.int8)


def train(ds: LabeledDataset, cfg: TrainConfig | None = None,
          hidden_layer_sizes=(64, 64), activation="tanh"):
    """Train an MlpClassifier on a labeled dataset.

    Returns (classifier, loss trace).  Raises NonFiniteLoss if the loss
    diverges, TooFewSamples when a class cannot populate both sides of the
    validation split.
    """
    cfg = cfg if cfg is not None else TrainConfig()
    clf = MlpClassifier(
        hidden_layer_sizes=tuple(hidden_layer_sizes),
        activation=activation,
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        optimizer=cfg.optimizer,
        beta1=cfg.beta1,
        beta2=cfg.beta2,
        adam_eps=cfg.adam_eps,
        early_stop_patience=cfg.early_stop_patience,
        validation_fraction=cfg.validation_fraction,
        seed=cfg.seed,
    )
    clf.fit(ds.points, ds.labels)
    return clf, clf.loss_trace_


class OraclePosterior:
    """Exact posterior n1*p1(x) / (n1*p1(x) + n0*p0(x)), in log space."""

    def __init__(self, p1, p0, n1: int, n0: int):
        if not (p1.has_log_pdf and p0.has_log_pdf):
            raise UnsupportedDensity(
                "oracle posterior needs exact log-densities on both distributions"
            )
        if n1 < 1 or n0 < 1:
            raise ValueError("n1 and n0 must be >= 1")
        self.p1 = p1
        self.p0 = p0
        self.n1 = int(n1)
        self.n0 = int(n0)
        self._log_prior_odds = np.log(float(n1)) - np.log(float(n0))

    def __call__(self, x) -> np.ndarray:
        pts = check_points(x, self.p1.dim)
        t = self._log_prior_odds + self.p1.log_pdf(pts) - self.p0.log_pdf(pts)
        return np.clip(expit(t), _P_LO, _P_HI)


class ConstantPosterior:
    """Posterior that ignores its input; handy as a null model in tests."""

    def __init__(self, value: float):
        if not 0.0 < value < 1.0:
            raise ValueError("value must lie strictly inside (0, 1)")
        self.value = float(value)

    def __call__(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=np.float64)
        n = pts.shape[0] if pts.ndim > 1 else (pts.size if pts.ndim == 1 else 1)
        return np.full(n, self.value)


MODEL_FORMAT = "ratio-mc-model"
MODEL_FORMAT_VERSION = 1


def save_model(clf: MlpClassifier, path) -> None:
    """Persist a fitted classifier as human-readable JSON.

    Floats are written with shortest round-trip decimals, so a reload is
    bit-exact.
    """
    doc = {
        "format": MODEL_FORMAT,
        "format_version": MODEL_FORMAT_VERSION,
        "train_n0": int(clf.n0_),
        "train_n1": int(clf.n1_),
        **clf.network_.to_dict(),
    }
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> MlpClassifier:
    with open(path, "r") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"model file is not valid JSON: {exc}", line=exc.lineno) from exc
    if doc.get("format") != MODEL_FORMAT:
        raise ParseError(f"not a {MODEL_FORMAT} file: format={doc.get('format')!r}")
    net = MlpNetwork.from_dict(doc)
    clf = MlpClassifier(
        hidden_layer_sizes=tuple(net.layer_sizes[1:-1]), activation=net.activation
    )
    clf.network_ = net
    clf.n0_ = int(doc.get("train_n0", 1))
    clf.n1_ = int(doc.get("train_n1", 1))
    clf.classes_ = np.array([0, 1])
    clf.loss_trace_ = None
    return clf

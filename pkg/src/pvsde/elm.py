"""Single-hidden-layer extreme learning machine.

The hidden layer applies a random frozen affine map followed by a sigmoid;
only the linear output weights are trained, by (optionally ridge-damped)
least squares via a singular value decomposition.  Features are
standardized before the random projection so standard-normal weights do
not saturate the sigmoids on raw physical units.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, replace

import numpy as np

DEFAULT_RIDGE = 1e-8
_SV_CUTOFF = 1e-10          # singular values below cutoff * s_max are dropped
_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainSet:
    """Paired regression inputs (N x input_dim) and scalar targets (N)."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        y = np.asarray(self.targets, dtype=float).ravel()
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", y)
        if X.shape[0] != y.size or y.size < 1:
            raise ValueError("inputs and targets must pair up, N >= 1")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise ValueError("training data must be finite")

    @property
    def n(self) -> int:
        return self.targets.size


@dataclass(frozen=True)
class ElmModel:
    """Random-projection regressor; only output_weights change in training."""

    input_weights: np.ndarray       # (K, input_dim), frozen at init
    biases: np.ndarray              # (K,), frozen at init
    output_weights: np.ndarray      # (K,), zero until trained
    scaler_mean: np.ndarray         # (input_dim,)
    scaler_std: np.ndarray          # (input_dim,), zero-variance -> 1

    @property
    def hidden_size(self) -> int:
        return self.biases.size

    @property
    def input_dim(self) -> int:
        return self.input_weights.shape[1]


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))


def elm_init(input_dim: int, hidden_size: int, rng) -> ElmModel:
    """Draw the frozen random hidden layer from the given stream."""
    if hidden_size < 1 or input_dim < 1:
        raise ValueError("hidden_size and input_dim must be >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    W = rng.standard_normal((hidden_size, input_dim))
    b = rng.standard_normal(hidden_size)
    return ElmModel(input_weights=W, biases=b,
                    output_weights=np.zeros(hidden_size),
                    scaler_mean=np.zeros(input_dim),
                    scaler_std=np.ones(input_dim))


def fit_scaler(X):
    """Per-feature standardization constants; constant features get std 1."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return mean, std


def _hidden(model: ElmModel, X):
    Z = (np.atleast_2d(X) - model.scaler_mean) / model.scaler_std
    return _sigmoid(Z @ model.input_weights.T + model.biases)


def elm_train(model: ElmModel, data: TrainSet,
              ridge: float = DEFAULT_RIDGE, scaler=None) -> ElmModel:
    """Solve the output weights by (ridge) least squares on the hidden layer.

    With ridge = 0 this is the plain minimum-norm pseudoinverse solution
    (singular values below 1e-10 of the largest are treated as zero).  An
    externally fitted ``scaler`` (mean, std) may be supplied so ensemble
    members share one standardization; otherwise it is fitted from ``data``.
    """
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    if data.inputs.shape[1] != model.input_dim:
        raise ValueError("input dimension mismatch")
    mean, std = scaler if scaler is not None else fit_scaler(data.inputs)
    model = replace(model, scaler_mean=np.asarray(mean, dtype=float),
                    scaler_std=np.asarray(std, dtype=float))
    H = _hidden(model, data.inputs)
    U, s, Vt = np.linalg.svd(H, full_matrices=False)
    keep = s > _SV_CUTOFF * s[0] if s.size else np.zeros(0, dtype=bool)
    U, s, Vt = U[:, keep], s[keep], Vt[keep]
    gain = s / (s * s + ridge)
    v = Vt.T @ (gain * (U.T @ data.targets))
    return replace(model, output_weights=v)


def elm_predict(model: ElmModel, x):
    """Evaluate the trained network on one input vector (or a batch)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if np.atleast_2d(x).shape[1] != model.input_dim:
        raise ValueError("input dimension mismatch")
    out = _hidden(model, x) @ model.output_weights
    return float(out[0]) if single else out


def training_residual(model: ElmModel, data: TrainSet) -> float:
    """Max absolute training error of a trained model."""
    return float(np.max(np.abs(elm_predict(model, data.inputs)
                               - data.targets)))


# ---------------------------------------------------------------------------
# serialization


def _b64(a) -> str:
    return base64.b64encode(np.ascontiguousarray(a, dtype="<f8")
                            .tobytes()).decode("ascii")


def _unb64(s, shape):
    return np.frombuffer(base64.b64decode(s), dtype="<f8").reshape(shape).copy()


def model_to_json(model: ElmModel) -> str:
    doc = dict(format_version=_FORMAT_VERSION,
               hidden_size=model.hidden_size, input_dim=model.input_dim,
               input_weights=_b64(model.input_weights),
               biases=_b64(model.biases),
               output_weights=_b64(model.output_weights),
               scaler_mean=_b64(model.scaler_mean),
               scaler_std=_b64(model.scaler_std))
    return json.dumps(doc, sort_keys=True)


def model_from_json(text: str) -> ElmModel:
    doc = json.loads(text)
    if doc.get("format_version") != _FORMAT_VERSION:
        raise ValueError("unsupported model format version")
    K, p = doc["hidden_size"], doc["input_dim"]
    return ElmModel(input_weights=_unb64(doc["input_weights"], (K, p)),
                    biases=_unb64(doc["biases"], (K,)),
                    output_weights=_unb64(doc["output_weights"], (K,)),
                    scaler_mean=_unb64(doc["scaler_mean"], (p,)),
                    scaler_std=_unb64(doc["scaler_std"], (p,)))

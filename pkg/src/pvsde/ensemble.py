"""Bootstrap-aggregated ELM ensemble mapping weather features to SDE
parameters.

One scalar regression "slot" exists per (daytime hour, parameter) pair —
5 x m slots in total.  Each slot holds M ELMs trained on bootstrap
resamples of the training days; a prediction discards the largest and
smallest 20% of the member outputs and averages the rest.  Per-member
random streams derive from (master seed, slot index, member index), so
training order never affects the result, and persistence only needs each
member's output weights — the frozen hidden layers are regenerated from
the same seeds on load.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .elm import (ElmModel, TrainSet, _b64, _unb64, elm_init, elm_predict,
                  elm_train, fit_scaler)
from .sde import DayParams, project_params

PARAM_NAMES = ("a", "b", "beta", "c", "d")
DEFAULT_HIDDEN = 100
DEFAULT_MEMBERS = 200
TRIM_FRACTION = 0.20
MIN_SLOT_PAIRS = 10
_FORMAT_VERSION = 1


class TrainingError(RuntimeError):
    """A slot cannot be trained (too few valid pairs)."""


@dataclass(frozen=True)
class WeatherDay:
    """One day's flattened weather features, hour-major."""

    date: str
    features: np.ndarray            # (m * p,)
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        f = np.asarray(self.features, dtype=float).ravel()
        object.__setattr__(self, "features", f)
        if not np.isfinite(f).all():
            raise ValueError("weather features must be finite after imputation")


@dataclass
class EnsembleModel:
    """5 x m slots of M ELMs plus the shared feature scaler and metadata."""

    slots: list[list[ElmModel]]     # indexed hour * 5 + param
    m: int
    hidden_size: int
    n_members: int
    master_seed: int
    scaler_mean: np.ndarray
    scaler_std: np.ndarray
    feature_names: tuple[str, ...] = ()
    trim_fraction: float = TRIM_FRACTION
    hour_local: bool = False        # slots see only their hour's features
    train_rmse: dict = field(default_factory=dict)

    @property
    def input_dim(self) -> int:
        return self.scaler_mean.size

    def slot_columns(self, hour: int):
        """Feature columns feeding one hour's slots."""
        if not self.hour_local:
            return slice(None)
        p = self.input_dim // self.m
        return slice(hour * p, (hour + 1) * p)

    def slot_index(self, hour: int, param: str) -> int:
        return hour * len(PARAM_NAMES) + PARAM_NAMES.index(param)


def bootstrap_resample(data: TrainSet, rng) -> TrainSet:
    """Uniform with-replacement resample of the same size."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    idx = rng.integers(0, data.n, size=data.n)
    return TrainSet(inputs=data.inputs[idx], targets=data.targets[idx])


def _member_streams(master_seed: int, slot: int, member: int):
    """Independent (bootstrap, weight-init) streams for one member.

    Separate child streams keep the regenerated hidden layer independent of
    how many bootstrap indices were drawn, so persistence can rebuild it.
    """
    kids = np.random.SeedSequence([master_seed, slot, member]).spawn(2)
    return np.random.default_rng(kids[0]), np.random.default_rng(kids[1])


def train_ensemble(pairs, hidden_size: int = DEFAULT_HIDDEN,
                   n_members: int = DEFAULT_MEMBERS, master_seed: int = 0,
                   flags=None, ridge=None,
                   hour_local: bool = False) -> EnsembleModel:
    """Train all 5 x m slots from (WeatherDay, DayParams) training pairs.

    ``flags`` optionally maps each pair to a per-hour boolean mask marking
    unreliable hours; flagged hours are excluded from that hour's slots.
    With ``hour_local`` each hour's slots regress on that hour's feature
    slice only, instead of the full-day vector.
    """
    pairs = list(pairs)
    if len(pairs) < MIN_SLOT_PAIRS:
        raise TrainingError(f"need >= {MIN_SLOT_PAIRS} training days, "
                            f"got {len(pairs)}")
    m = pairs[0][1].m
    X_all = np.stack([w.features for w, _ in pairs])
    scaler = fit_scaler(X_all)
    targets = np.stack([dp.as_matrix() for _, dp in pairs])   # (N, 5, m)
    feature_names = pairs[0][0].feature_names

    slots: list[list[ElmModel]] = []
    rmse: dict[str, float] = {}
    kwargs = {} if ridge is None else dict(ridge=ridge)
    p_hour = X_all.shape[1] // m
    for hour in range(m):
        cols = (slice(hour * p_hour, (hour + 1) * p_hour) if hour_local
                else slice(None))
        hour_scaler = (scaler[0][cols], scaler[1][cols])
        for pi, pname in enumerate(PARAM_NAMES):
            slot_id = hour * len(PARAM_NAMES) + pi
            if flags is not None:
                keep = np.array([not flags[j][hour]
                                 for j in range(len(pairs))])
            else:
                keep = np.ones(len(pairs), dtype=bool)
            if int(keep.sum()) < MIN_SLOT_PAIRS:
                raise TrainingError(
                    f"slot hour={hour} param={pname}: only {int(keep.sum())} "
                    f"valid pairs (need {MIN_SLOT_PAIRS})")
            data = TrainSet(inputs=X_all[keep][:, cols],
                            targets=targets[keep, pi, hour])
            members = []
            for j in range(n_members):
                boot_rng, init_rng = _member_streams(master_seed, slot_id, j)
                boot = bootstrap_resample(data, boot_rng)
                model = elm_init(data.inputs.shape[1], hidden_size, init_rng)
                members.append(elm_train(model, boot, scaler=hour_scaler,
                                         **kwargs))
            slots.append(members)
            pred = predict_slot_batch(members, data.inputs)
            rmse[f"h{hour}_{pname}"] = float(
                np.sqrt(np.mean((pred - data.targets) ** 2)))
    return EnsembleModel(slots=slots, m=m, hidden_size=hidden_size,
                         n_members=n_members, master_seed=master_seed,
                         scaler_mean=scaler[0], scaler_std=scaler[1],
                         feature_names=tuple(feature_names),
                         hour_local=hour_local, train_rmse=rmse)


def trimmed_mean(values, trim_fraction: float = TRIM_FRACTION) -> float:
    """Mean after discarding floor(trim * n) values from each end."""
    v = np.sort(np.asarray(values, dtype=float))
    k = int(np.floor(trim_fraction * v.size))
    kept = v[k:v.size - k] if v.size - 2 * k > 0 else v
    return float(kept.mean())


def predict_slot(members, x, trim_fraction: float = TRIM_FRACTION) -> float:
    """Trimmed-mean aggregation of one slot's member outputs."""
    outs = np.array([elm_predict(mdl, np.asarray(x, dtype=float))
                     for mdl in members])
    return trimmed_mean(outs, trim_fraction)


def predict_slot_batch(members, X, trim_fraction: float = TRIM_FRACTION):
    """Vectorized predict_slot over the rows of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    outs = np.stack([elm_predict(mdl, X) for mdl in members])  # (M, N)
    outs.sort(axis=0)
    k = int(np.floor(trim_fraction * len(members)))
    kept = outs[k:len(members) - k] if len(members) - 2 * k > 0 else outs
    return kept.mean(axis=0)


def predict_day_params(model: EnsembleModel, day: WeatherDay, log=None):
    """Predict all hourly parameters for one day and project to validity."""
    x = day.features
    if x.size != model.input_dim:
        raise ValueError("feature length does not match the trained model")
    hours = []
    for hour in range(model.m):
        xh = x[model.slot_columns(hour)]
        raw = {p: predict_slot(model.slots[model.slot_index(hour, p)], xh,
                               model.trim_fraction)
               for p in PARAM_NAMES}
        hours.append(project_params(raw["a"], raw["b"], raw["beta"],
                                    raw["c"], raw["d"], log=log))
    return DayParams(hours=tuple(hours))


def predict_params_batch(model: EnsembleModel, days, log=None):
    """Predict DayParams for many WeatherDays with one pass per slot."""
    X = np.stack([d.features for d in days])
    if X.shape[1] != model.input_dim:
        raise ValueError("feature length does not match the trained model")
    raw = np.empty((len(days), model.m, len(PARAM_NAMES)))
    for hour in range(model.m):
        Xh = X[:, model.slot_columns(hour)]
        for pi, pname in enumerate(PARAM_NAMES):
            slot = model.slots[model.slot_index(hour, pname)]
            raw[:, hour, pi] = predict_slot_batch(slot, Xh,
                                                  model.trim_fraction)
    out = []
    for j in range(len(days)):
        hours = [project_params(*raw[j, h], log=log) for h in range(model.m)]
        out.append(DayParams(hours=tuple(hours)))
    return out


# ---------------------------------------------------------------------------
# persistence: manifest + per-slot output weights; hidden layers are
# regenerated from the deterministic member streams.


def save_ensemble(model: EnsembleModel, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    manifest = dict(format_version=_FORMAT_VERSION, m=model.m,
                    hidden_size=model.hidden_size,
                    n_members=model.n_members,
                    master_seed=model.master_seed,
                    trim_fraction=model.trim_fraction,
                    hour_local=model.hour_local,
                    input_dim=model.input_dim,
                    feature_names=list(model.feature_names),
                    scaler_mean=_b64(model.scaler_mean),
                    scaler_std=_b64(model.scaler_std),
                    train_rmse=model.train_rmse,
                    param_names=list(PARAM_NAMES))
    _atomic_write(os.path.join(out_dir, "manifest.json"),
                  json.dumps(manifest, sort_keys=True, indent=1))
    for hour in range(model.m):
        for pi, pname in enumerate(PARAM_NAMES):
            slot_id = hour * len(PARAM_NAMES) + pi
            V = np.stack([mdl.output_weights
                          for mdl in model.slots[slot_id]])
            doc = dict(slot=slot_id, hour=hour, param=pname,
                       output_weights=_b64(V))
            _atomic_write(
                os.path.join(out_dir, f"slot_{slot_id:03d}.json"),
                json.dumps(doc, sort_keys=True))


def load_ensemble(model_dir: str) -> EnsembleModel:
    with open(os.path.join(model_dir, "manifest.json")) as f:
        man = json.load(f)
    if man.get("format_version") != _FORMAT_VERSION:
        raise ValueError("unsupported ensemble format version")
    m, K, M = man["m"], man["hidden_size"], man["n_members"]
    p = man["input_dim"]
    hour_local = man.get("hour_local", False)
    mean = _unb64(man["scaler_mean"], (p,))
    std = _unb64(man["scaler_std"], (p,))
    p_hour = p // m
    slots = []
    for slot_id in range(m * len(PARAM_NAMES)):
        hour = slot_id // len(PARAM_NAMES)
        cols = (slice(hour * p_hour, (hour + 1) * p_hour) if hour_local
                else slice(None))
        dim = p_hour if hour_local else p
        with open(os.path.join(model_dir, f"slot_{slot_id:03d}.json")) as f:
            doc = json.load(f)
        V = _unb64(doc["output_weights"], (M, K))
        members = []
        for j in range(M):
            _, init_rng = _member_streams(man["master_seed"], slot_id, j)
            base = elm_init(dim, K, init_rng)
            members.append(ElmModel(input_weights=base.input_weights,
                                    biases=base.biases,
                                    output_weights=V[j],
                                    scaler_mean=mean[cols],
                                    scaler_std=std[cols]))
        slots.append(members)
    return EnsembleModel(slots=slots, m=m, hidden_size=K, n_members=M,
                         master_seed=man["master_seed"],
                         scaler_mean=mean, scaler_std=std,
                         feature_names=tuple(man["feature_names"]),
                         trim_fraction=man["trim_fraction"],
                         hour_local=hour_local,
                         train_rmse=man.get("train_rmse", {}))


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)

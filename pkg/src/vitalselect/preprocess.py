"""Missing-value repair and train-only standardization."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from vitalselect.features import FeatureMatrix


def _fill_block(x):
    valid = np.isfinite(x)
    n = x.shape[0]
    rows = np.arange(n)[:, None]
    # last valid row at or above each cell, else the next one below it
    last = np.maximum.accumulate(np.where(valid, rows, -1), axis=0)
    nxt = np.minimum.accumulate(np.where(valid, rows, n)[::-1], axis=0)[::-1]
    src = np.where(last >= 0, last, nxt)
    has_src = src < n
    cols = np.broadcast_to(np.arange(x.shape[1]), x.shape)
    out = np.full_like(x, np.nan)
    out[has_src] = x[src[has_src], cols[has_src]]
    return out


def impute_array(values, groups=None) -> np.ndarray:
    """Replace NaN/inf column-wise: forward fill, backward fill, column mean.

    Fills run in row order, within each run of equal ``groups`` labels when
    given (so values never cross a session boundary). Cells still empty
    take the column mean of the originally valid entries; columns with no
    valid entry become 0.
    """
    x = np.array(values, dtype=np.float64, copy=True)
    if x.size == 0:
        return x
    valid = np.isfinite(x)
    if groups is None:
        out = _fill_block(x)
    else:
        groups = np.asarray(groups)
        if groups.shape[0] != x.shape[0]:
            raise ValueError("one group label per row required")
        out = np.empty_like(x)
        cuts = np.flatnonzero(groups[1:] != groups[:-1]) + 1
        for a, b in zip(np.r_[0, cuts], np.r_[cuts, x.shape[0]]):
            out[a:b] = _fill_block(x[a:b])
    n_valid = valid.sum(axis=0)
    col_mean = np.divide(np.where(valid, x, 0.0).sum(axis=0), n_valid,
                         out=np.zeros(x.shape[1]), where=n_valid > 0)
    gaps = ~np.isfinite(out)
    out[gaps] = np.broadcast_to(col_mean, x.shape)[gaps]
    return out


def session_groups(matrix: FeatureMatrix) -> np.ndarray:
    """Integer id per row, constant over each (subject, activity, position) run."""
    keys = list(zip(matrix.subject.tolist(), matrix.activity.tolist(), matrix.position.tolist()))
    ids = np.zeros(len(keys), dtype=np.int64)
    for i in range(1, len(keys)):
        ids[i] = ids[i - 1] + (keys[i] != keys[i - 1])
    return ids


def impute(matrix: FeatureMatrix, by_session: bool = False) -> FeatureMatrix:
    groups = session_groups(matrix) if by_session else None
    return matrix.with_values(impute_array(matrix.values, groups))


@dataclass
class Scaler:
    mean: np.ndarray
    std: np.ndarray
    fitted_on: int

    def to_json(self) -> str:
        return json.dumps({"mean": [float(v) for v in self.mean],
                           "std": [float(v) for v in self.std],
                           "fitted_on": int(self.fitted_on)}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Scaler":
        d = json.loads(text)
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float),
                   int(d["fitted_on"]))


def fit_scaler_array(train: np.ndarray) -> Scaler:
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2 or train.shape[0] == 0:
        raise ValueError("cannot fit a scaler on an empty training set")
    return Scaler(train.mean(axis=0), train.std(axis=0), train.shape[0])


def apply_scaler_array(scaler: Scaler, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.shape[-1] != scaler.mean.shape[0]:
        raise ValueError("column count does not match the fitted scaler")
    safe = np.where(scaler.std > 0, scaler.std, 1.0)
    out = (values - scaler.mean) / safe
    out[..., scaler.std == 0] = 0.0
    return out


def fit_scaler(train: FeatureMatrix) -> Scaler:
    """Population mean/std per column of the training rows."""
    return fit_scaler_array(train.values)


def apply_scaler(scaler: Scaler, matrix: FeatureMatrix) -> FeatureMatrix:
    return matrix.with_values(apply_scaler_array(scaler, matrix.values))

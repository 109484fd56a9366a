"""Windowing and the 189-column per-window feature catalog.

Each window contributes 63 features per channel (chest, respiration,
cardiac), grouped as 12 statistical, 8 time-domain, 9 spectral, 6 entropy,
5 fractal/complexity and 23 peak-interval variability features. Column
names are ``<channel>_<feature>``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import signal as sps

from vitalselect import complexity as cx
from vitalselect.sigsynth import CHANNELS, SignalRecord

CATALOG_VERSION = "1"

STATISTICAL = ("mean", "min", "max", "std", "var", "median", "q1", "q3", "iqr",
               "range", "rms", "snr")
TIME_DOMAIN = ("slope", "energy", "line_length", "mean_abs_diff", "mean_abs_diff2",
               "zero_crossing_rate", "peak_count", "skewness")
SPECTRAL = ("total_power", "dominant_freq", "dominant_power", "spectral_centroid",
            "spectral_bandwidth", "band_power_0_0.5", "band_power_0.5_2", "band_power_2_5",
            "spectral_entropy")
ENTROPY = ("permutation_entropy", "approximate_entropy", "sample_entropy",
           "histogram_entropy", "svd_entropy", "spectral_flatness")
FRACTAL = ("katz_fd", "higuchi_fd", "petrosian_fd", "hjorth_mobility", "hjorth_complexity")
VARIABILITY = ("interval_mean", "interval_std", "interval_rmssd", "interval_pnn",
               "rate_per_min", "peak_amp_mean", "peak_amp_std", "inhale_exhale_ratio",
               "interval_min", "interval_max", "interval_range", "interval_median",
               "interval_q1", "interval_q3", "interval_iqr", "interval_cv",
               "succ_diff_mean", "succ_diff_std", "rise_time_mean", "fall_time_mean",
               "inst_rate_std", "peak_amp_range", "peak_amp_cv")
PER_CHANNEL = STATISTICAL + TIME_DOMAIN + SPECTRAL + ENTROPY + FRACTAL + VARIABILITY

BANDS = ((0.0, 0.5), (0.5, 2.0), (2.0, 5.0))


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class PeakConfig:
    min_distance_s: float
    prominence_factor: float = 0.3
    pnn_threshold_s: float = 0.05


@dataclass(frozen=True)
class CatalogConfig:
    channels: tuple = CHANNELS
    perm_order: int = 3
    entropy_m: int = 2
    entropy_r: float = 0.2
    higuchi_k_max: int = 10
    peaks: dict = field(default_factory=lambda: {
        "chest": PeakConfig(2.0, pnn_threshold_s=0.5),
        "respiration": PeakConfig(2.0, pnn_threshold_s=0.5),
        "cardiac": PeakConfig(0.4, pnn_threshold_s=0.05),
    })

    def names(self) -> list[str]:
        return [f"{ch}_{f}" for ch in self.channels for f in PER_CHANNEL]


DEFAULT_CATALOG = CatalogConfig()


@dataclass
class Window:
    channels: dict
    subject_id: int
    activity: str
    position: str
    sample_rate_hz: float
    window_index: int

    def __len__(self):
        return len(next(iter(self.channels.values())))


@dataclass
class FeatureVector:
    values: np.ndarray
    names: Sequence[str]
    subject_id: int
    activity: str
    position: str


@dataclass
class FeatureMatrix:
    """Rows are windows, columns named features, plus per-row labels."""

    values: np.ndarray
    names: list
    subject: np.ndarray
    activity: np.ndarray
    position: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.names = list(self.names)
        self.subject = np.asarray(self.subject, dtype=np.int64)
        self.activity = np.asarray(self.activity, dtype=object)
        self.position = np.asarray(self.position, dtype=object)
        n = self.values.shape[0]
        if self.values.ndim != 2 or self.values.shape[1] != len(self.names):
            raise FeatureError("values must be 2-D with one column per name")
        if len(set(self.names)) != len(self.names):
            raise FeatureError("feature names must be unique")
        if not (len(self.subject) == len(self.activity) == len(self.position) == n):
            raise FeatureError("label columns must match the row count")

    def __len__(self):
        return self.values.shape[0]

    @property
    def n_features(self):
        return self.values.shape[1]

    def row(self, i) -> FeatureVector:
        return FeatureVector(self.values[i], self.names, int(self.subject[i]),
                             self.activity[i], self.position[i])

    def rows(self):
        return (self.row(i) for i in range(len(self)))

    def take(self, rows) -> "FeatureMatrix":
        rows = np.asarray(rows)
        return FeatureMatrix(self.values[rows], self.names, self.subject[rows],
                             self.activity[rows], self.position[rows])

    def with_values(self, values) -> "FeatureMatrix":
        return FeatureMatrix(values, self.names, self.subject, self.activity, self.position)

    @classmethod
    def from_vectors(cls, vectors: Sequence[FeatureVector]) -> "FeatureMatrix":
        if not vectors:
            raise FeatureError("no feature vectors")
        names = list(vectors[0].names)
        for v in vectors:
            if list(v.names) != names:
                raise FeatureError("inconsistent feature catalogs")
        return cls(np.vstack([v.values for v in vectors]), names,
                   [v.subject_id for v in vectors], [v.activity for v in vectors],
                   [v.position for v in vectors])

    # -- CSV --------------------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([*self.names, "subject", "activity", "position"])
        for i in range(len(self)):
            w.writerow([repr(float(v)) for v in self.values[i]]
                       + [int(self.subject[i]), self.activity[i], self.position[i]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "FeatureMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise FeatureError("empty feature file")
        header = rows[0]
        if header[-3:] != ["subject", "activity", "position"]:
            raise FeatureError("missing label columns")
        names = header[:-3]
        body = rows[1:]
        values = np.array([[float(v) for v in r[:-3]] for r in body], dtype=float)
        values = values.reshape(len(body), len(names))
        return cls(values, names, [int(r[-3]) for r in body], [r[-2] for r in body],
                   [r[-1] for r in body])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def read_csv(cls, path) -> "FeatureMatrix":
        with open(path) as fh:
            return cls.from_csv(fh.read())


# -- windowing -------------------------------------------------------------

def _whole(value, what):
    r = round(value)
    if abs(value - r) > 1e-9 or r <= 0:
        raise FeatureError(f"{what} must be a positive whole number of samples, got {value}")
    return int(r)


def window_signal(record: SignalRecord, win_s: float = 10.0, step_s: float = 1.0) -> list[Window]:
    fs = record.sample_rate_hz
    w = _whole(win_s * fs, "window length")
    s = _whole(step_s * fs, "window step")
    length = len(record)
    if length < w:
        raise FeatureError(f"record has {length} samples, shorter than one window ({w})")
    count = (length - w) // s + 1
    return [
        Window(
            channels={c: np.asarray(record.channels[c][i * s:i * s + w]) for c in record.channels},
            subject_id=record.subject_id,
            activity=getattr(record.activity, "value", record.activity),
            position=getattr(record.position, "value", record.position),
            sample_rate_hz=fs,
            window_index=i,
        )
        for i in range(count)
    ]


def window_records(records: Iterable[SignalRecord], win_s=10.0, step_s=1.0) -> list[Window]:
    out = []
    for rec in records:
        out.extend(window_signal(rec, win_s, step_s))
    return out


# -- peaks and variability ---------------------------------------------------

def detect_peaks(x, fs: float, min_distance_s: float, min_prominence: float) -> np.ndarray:
    """Local maxima at least ``min_distance_s`` apart with enough prominence."""
    if fs <= 0:
        raise FeatureError("fs must be positive")
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 3:
        return np.zeros(0, dtype=np.intp)
    distance = max(1, int(math.ceil(min_distance_s * fs - 1e-9)))
    peaks, _ = sps.find_peaks(x, distance=distance, prominence=max(min_prominence, 0.0))
    if min_prominence <= 0 and peaks.size:
        # zero prominence threshold still rejects flat-topped noise-free plateaus
        prom = sps.peak_prominences(x, peaks)[0]
        peaks = peaks[prom > 0]
    return peaks.astype(np.intp)


def variability_features(peaks, x, fs: float, pnn_threshold_s: float = 0.05) -> dict:
    """Interval statistics between detected peaks; all NaN with < 2 peaks."""
    out = dict.fromkeys(VARIABILITY, math.nan)
    peaks = np.asarray(peaks, dtype=np.intp)
    if peaks.shape[0] < 2:
        return out
    x = np.asarray(x, dtype=float)
    iv = np.diff(peaks) / fs
    amp = x[peaks]
    q1, med, q3 = np.percentile(iv, [25, 50, 75])
    mean_iv = iv.mean()
    out.update(
        interval_mean=mean_iv,
        interval_std=iv.std(),
        rate_per_min=60.0 / mean_iv,
        peak_amp_mean=amp.mean(),
        peak_amp_std=amp.std(),
        interval_min=iv.min(),
        interval_max=iv.max(),
        interval_range=iv.max() - iv.min(),
        interval_median=med,
        interval_q1=q1,
        interval_q3=q3,
        interval_iqr=q3 - q1,
        interval_cv=iv.std() / mean_iv,
        inst_rate_std=(60.0 / iv).std(),
        peak_amp_range=amp.max() - amp.min(),
        peak_amp_cv=amp.std() / abs(amp.mean()) if amp.mean() != 0 else 0.0,
    )
    if iv.shape[0] >= 2:
        sd = np.diff(iv)
        out.update(
            interval_rmssd=math.sqrt(np.mean(sd ** 2)),
            interval_pnn=float(np.mean(np.abs(sd) > pnn_threshold_s)),
            succ_diff_mean=np.abs(sd).mean(),
            succ_diff_std=np.abs(sd).std(),
        )
    # troughs between consecutive peaks split each cycle into rise and fall
    troughs = np.array([peaks[i] + int(np.argmin(x[peaks[i]:peaks[i + 1] + 1]))
                        for i in range(peaks.shape[0] - 1)])
    rise = (peaks[1:] - troughs) / fs
    fall = (troughs - peaks[:-1]) / fs
    out["rise_time_mean"] = rise.mean()
    out["fall_time_mean"] = fall.mean()
    out["inhale_exhale_ratio"] = rise.mean() / fall.mean() if fall.mean() > 0 else math.nan
    return {k: float(v) for k, v in out.items()}


# -- per-channel blocks -------------------------------------------------------

def _statistical(x):
    mean = x.mean()
    std = x.std()
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    return [mean, x.min(), x.max(), std, x.var(), med, q1, q3, q3 - q1,
            x.max() - x.min(), math.sqrt(np.mean(x * x)), mean / std if std > 0 else 0.0]


def _time_domain(x, fs, n_peaks):
    n = x.shape[0]
    t = np.arange(n) / fs
    slope = np.polyfit(t, x, 1)[0] if np.ptp(x) > 0 else 0.0
    d1 = np.diff(x)
    d2 = np.diff(x, 2)
    centred = x - x.mean()
    signs = np.signbit(centred[centred != 0])
    zcr = np.count_nonzero(signs[1:] != signs[:-1]) / (n - 1)
    m2 = np.mean(centred ** 2)
    skew = float(np.mean(centred ** 3) / m2 ** 1.5) if m2 > 0 else 0.0
    return [slope, float(np.sum(x * x)), float(np.abs(d1).sum()), float(np.abs(d1).mean()),
            float(np.abs(d2).mean()) if d2.size else 0.0, zcr, float(n_peaks), skew]


def _hann_psd(x, fs):
    if np.ptp(x) == 0:
        f = np.fft.rfftfreq(x.shape[0], 1.0 / fs)
        return f, np.zeros_like(f)
    return sps.periodogram(x, fs=fs, window="hann", detrend="linear")


def _spectral(x, fs):
    f, psd = _hann_psd(x, fs)
    f, psd = f[1:], psd[1:]
    df = f[0] if f.size else 1.0
    total = psd.sum()
    bands = [float(psd[(f >= lo) & (f < hi)].sum() * df) for lo, hi in BANDS]
    if total <= 0:
        return [0.0, 0.0, 0.0, 0.0, 0.0, *bands, 0.0], 0.0
    k = int(np.argmax(psd))
    p = psd / total
    centroid = float((f * p).sum())
    bandwidth = math.sqrt(float(((f - centroid) ** 2 * p).sum()))
    flat = float(np.exp(np.mean(np.log(psd + 1e-300))) / np.mean(psd))
    return [float(total * df), float(f[k]), float(psd[k] * df), centroid, bandwidth, *bands,
            cx.spectral_entropy(x, fs)], flat


def channel_features(x, fs, peak_cfg: PeakConfig, cfg: CatalogConfig = DEFAULT_CATALOG) -> list:
    """The 63 per-channel values in ``PER_CHANNEL`` order."""
    x = np.asarray(x, dtype=float)
    peaks = detect_peaks(x, fs, peak_cfg.min_distance_s, peak_cfg.prominence_factor * x.std())
    spectral, flatness = _spectral(x, fs)
    mob, comp = cx.hjorth(x)
    entropy = [
        cx.permutation_entropy(x, order=cfg.perm_order),
        cx.approx_entropy(x, cfg.entropy_m, cfg.entropy_r),
        cx.sample_entropy(x, cfg.entropy_m, cfg.entropy_r),
        cx.histogram_entropy(x),
        cx.svd_entropy(x, order=cfg.perm_order),
        flatness,
    ]
    fractal = [cx.katz_fd(x), cx.higuchi_fd(x, cfg.higuchi_k_max), cx.petrosian_fd(x), mob, comp]
    var = variability_features(peaks, x, fs, peak_cfg.pnn_threshold_s)
    return (_statistical(x) + _time_domain(x, fs, peaks.shape[0]) + spectral + entropy
            + fractal + [var[k] for k in VARIABILITY])


def window_features(window: Window, cfg: CatalogConfig = DEFAULT_CATALOG) -> FeatureVector:
    values = []
    for ch in cfg.channels:
        values.extend(channel_features(window.channels[ch], window.sample_rate_hz, cfg.peaks[ch], cfg))
    return FeatureVector(np.asarray(values, dtype=float), cfg.names(), window.subject_id,
                         window.activity, window.position)


def extract_all(windows: Sequence[Window], cfg: CatalogConfig = DEFAULT_CATALOG) -> FeatureMatrix:
    """Feature matrix with one row per window, in input order."""
    if not windows:
        raise FeatureError("no windows to extract")
    n0, fs0 = len(windows[0]), windows[0].sample_rate_hz
    for w in windows:
        if len(w) != n0 or w.sample_rate_hz != fs0:
            raise FeatureError("windows must share length and sample rate")
        if any(len(v) != n0 for v in w.channels.values()):
            raise FeatureError("window channels have unequal lengths")
    return FeatureMatrix.from_vectors([window_features(w, cfg) for w in windows])

"""Entropy and fractal-dimension measures for short 1-D signals."""
from __future__ import annotations

import math

import numpy as np
from scipy import signal as sps

from vitalselect._backend import kernels


def _as_1d(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("expected a 1-D sequence")
    return x


def katz_fd(x) -> float:
    """Katz fractal dimension; constant input returns 1.0."""
    x = _as_1d(x)
    if x.shape[0] < 2:
        raise ValueError("katz_fd needs at least 2 samples")
    steps = np.abs(np.diff(x))
    length = steps.sum()
    if length == 0:
        return 1.0
    dist = np.max(np.abs(x - x[0]))
    n = x.shape[0] - 1
    ln = math.log10(n)
    return ln / (ln + math.log10(dist / length))


def higuchi_fd(x, k_max: int = 10) -> float:
    """Higuchi fractal dimension, slope of log L(k) against log(1/k)."""
    x = _as_1d(x)
    n = x.shape[0]
    if n < 2 * k_max:
        raise ValueError(f"higuchi_fd needs at least {2 * k_max} samples")
    lk = np.empty(k_max)
    for k in range(1, k_max + 1):
        lengths = []
        for m in range(k):
            seg = x[m::k]
            n_int = seg.shape[0] - 1
            if n_int < 1:
                continue
            curve = np.abs(np.diff(seg)).sum() * (n - 1) / (n_int * k)
            lengths.append(curve / k)
        lk[k - 1] = np.mean(lengths)
    if np.any(lk <= 0):
        return 1.0
    ks = np.arange(1, k_max + 1)
    slope = np.polyfit(np.log(1.0 / ks), np.log(lk), 1)[0]
    return float(slope)


def petrosian_fd(x) -> float:
    x = _as_1d(x)
    n = x.shape[0]
    if n < 2:
        raise ValueError("petrosian_fd needs at least 2 samples")
    d = np.diff(x)
    n_delta = int(np.count_nonzero(d[1:] * d[:-1] < 0))
    ln = math.log10(n)
    return ln / (ln + math.log10(n / (n + 0.4 * n_delta)))


def permutation_entropy(x, order: int = 3, delay: int = 1, normalized: bool = True) -> float:
    """Shannon entropy of ordinal patterns; ties are ranked by index."""
    x = _as_1d(x)
    n_vec = x.shape[0] - (order - 1) * delay
    if x.shape[0] <= order * delay or n_vec < 1:
        raise ValueError("series too short for the requested order and delay")
    emb = np.stack([x[i * delay:i * delay + n_vec] for i in range(order)], axis=1)
    ranks = np.argsort(emb, axis=1, kind="stable")
    codes = (ranks * (order ** np.arange(order))).sum(axis=1)
    _, counts = np.unique(codes, return_counts=True)
    p = counts / counts.sum()
    h = float(-(p * np.log(p)).sum())
    if normalized:
        h /= math.log(math.factorial(order))
    return max(h, 0.0)


def spectral_entropy(x, fs: float, normalized: bool = True) -> float:
    """Entropy of the one-sided periodogram with the DC bin excluded.

    An untapered periodogram is used so that a bin-centred tone occupies a
    single bin. Zero total power returns 0.0.
    """
    x = _as_1d(x)
    if x.shape[0] < 8:
        raise ValueError("spectral_entropy needs at least 8 samples")
    _, psd = sps.periodogram(x, fs=fs, window="boxcar", detrend="constant")
    psd = psd[1:]
    total = psd.sum()
    if total <= 0:
        return 0.0
    p = psd / total
    p = p[p > 0]
    h = float(-(p * np.log(p)).sum())
    if normalized:
        h /= math.log(psd.shape[0])
    return h


def _tolerance(x, r_factor):
    return r_factor * float(np.std(x))


def approx_entropy(x, m: int = 2, r_factor: float = 0.2) -> float:
    x = _as_1d(x)
    n = x.shape[0]
    if n < m + 2:
        raise ValueError("series too short for approximate entropy")
    cm, cm1, _, _ = kernels.template_counts(x, m, _tolerance(x, r_factor))
    # fsum makes the result independent of summation order
    phi_m = math.fsum(map(math.log, (cm / (n - m + 1.0)).tolist())) / cm.shape[0]
    phi_m1 = math.fsum(map(math.log, (cm1 / (n - m + 0.0)).tolist())) / cm1.shape[0]
    return phi_m - phi_m1


def sample_entropy(x, m: int = 2, r_factor: float = 0.2) -> float:
    """Sample entropy; returns ``inf`` when no (m+1)-length matches exist."""
    x = _as_1d(x)
    n = x.shape[0]
    if n < m + 2:
        raise ValueError("series too short for sample entropy")
    _, _, b, a = kernels.template_counts(x, m, _tolerance(x, r_factor))
    if a == 0 or b == 0:
        return math.inf
    return -math.log(a / b)


def histogram_entropy(x) -> float:
    x = _as_1d(x)
    if np.ptp(x) == 0:
        return 0.0
    bins = int(math.ceil(math.sqrt(x.shape[0])))
    counts, _ = np.histogram(x, bins=bins)
    p = counts[counts > 0] / x.shape[0]
    return float(-(p * np.log(p)).sum())


def svd_entropy(x, order: int = 3, delay: int = 1) -> float:
    x = _as_1d(x)
    n_vec = x.shape[0] - (order - 1) * delay
    emb = np.stack([x[i * delay:i * delay + n_vec] for i in range(order)], axis=1)
    s = np.linalg.svd(emb, compute_uv=False)
    if s.sum() <= 0:
        return 0.0
    s = s / s.sum()
    s = s[s > 0]
    return float(-(s * np.log(s)).sum())


def hjorth(x) -> tuple[float, float]:
    """Hjorth (mobility, complexity); zero-variance parts return 0."""
    x = _as_1d(x)
    dx = np.diff(x)
    ddx = np.diff(dx)
    vx, vdx, vddx = np.var(x), np.var(dx), np.var(ddx)
    if vx == 0 or vdx == 0:
        return 0.0, 0.0
    mob = math.sqrt(vdx / vx)
    return mob, math.sqrt(vddx / vdx) / mob

"""Synthetic radar vital-sign sessions.

The generator emits already-extracted waveforms (chest displacement,
respiration, cardiac) for a cohort of simulated subjects performing four
breathing activities in two positions. Subject identity is carried mainly
by the cardiac parameters, with breathing depth as a weaker trait, and
activity by the respiration pattern, so a feature subset that keeps one and
drops the other exists by construction.
The identity model is an artifact convention, not a physiological claim.
"""
from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

GUIDE_FREQ_HZ = 0.1
LYING_CHEST_FACTOR = 0.8
CARDIAC_RATE_RANGE = (0.9, 1.6)
BREATH_RATE_RANGE = (0.2, 0.35)
CARDIAC_VARIABILITY_RANGE = (0.01, 0.12)
CHEST_AMPLITUDE_RANGE = (0.5, 1.5)
CHANNELS = ("chest", "respiration", "cardiac")


class Activity(str, Enum):
    NORMAL = "Normal"
    READING = "Reading"
    GUIDED = "Guided"
    APNEA = "Apnea"


class Position(str, Enum):
    SITTING = "Sitting"
    LYING = "Lying"


ACTIVITIES = tuple(Activity)
POSITIONS = tuple(Position)


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SubjectProfile:
    subject_id: int
    cardiac_rate_hz: float
    cardiac_variability: float
    chest_amplitude: float
    breath_rate_hz: float
    noise_seed: int


@dataclass
class SignalRecord:
    subject_id: int
    activity: Activity
    position: Position
    sample_rate_hz: float
    channels: dict = field(default_factory=dict)
    seed: int = 0

    def __len__(self):
        return len(self.channels["respiration"])


def _profile_rng(master_seed, subject_id):
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(subject_id)]))


def generate_profiles(master_seed: int, n_subjects: int) -> list[SubjectProfile]:
    """Draw ``n_subjects`` profiles; profile ``i`` depends only on (seed, i)."""
    if n_subjects < 1:
        raise SynthError("empty cohort: n_subjects must be >= 1")
    profiles = []
    for sid in range(n_subjects):
        rng = _profile_rng(master_seed, sid)
        profiles.append(
            SubjectProfile(
                subject_id=sid,
                cardiac_rate_hz=float(rng.uniform(*CARDIAC_RATE_RANGE)),
                cardiac_variability=float(rng.uniform(*CARDIAC_VARIABILITY_RANGE)),
                chest_amplitude=float(rng.uniform(*CHEST_AMPLITUDE_RANGE)),
                breath_rate_hz=float(rng.uniform(*BREATH_RATE_RANGE)),
                noise_seed=int(rng.integers(0, 2**63 - 1)),
            )
        )
    return profiles


def _smooth_noise(rng, n, fs, cutoff_hz=0.2):
    """Unit-std low-pass noise via a moving average of white noise."""
    width = max(1, int(round(fs / cutoff_hz)))
    raw = rng.normal(size=n + width)
    sm = np.convolve(raw, np.ones(width) / width, mode="valid")[:n]
    s = sm.std()
    return sm / s if s > 0 else sm


def _normal_breathing(rng, t, fs, rate_hz):
    n = t.shape[0]
    freq = rate_hz * (1.0 + 0.05 * _smooth_noise(rng, n, fs))
    phase = 2 * np.pi * np.cumsum(freq) / fs + rng.uniform(0, 2 * np.pi)
    amp = 1.0 + 0.05 * np.clip(_smooth_noise(rng, n, fs), -2, 2)
    return amp * np.sin(phase)


def _reading_breathing(rng, n, fs):
    # speech breathing: irregular cycles with pauses held at end-expiration
    base = rng.uniform(0.2, 0.4)
    out = []
    total = 0
    while total < n:
        dur = max(2, int(round(fs / base * rng.uniform(0.6, 1.5))))
        amp = rng.uniform(0.3, 1.2)
        u = np.arange(dur) / dur
        out.append(-amp * np.cos(2 * np.pi * u))
        total += dur
        if rng.random() < 0.35:
            pause = int(round(fs * rng.uniform(1.0, 2.5)))
            out.append(np.full(pause, -amp))
            total += pause
    sig = np.concatenate(out)[:n]
    k = max(1, int(round(0.25 * fs)))
    return np.convolve(np.pad(sig, (k // 2, k - 1 - k // 2), mode="edge"), np.ones(k) / k, mode="valid")


def _apnea(rng, t, rate_hz):
    residual = 0.03 * np.sin(2 * np.pi * rate_hz * t + rng.uniform(0, 2 * np.pi))
    drift = 0.04 * np.sin(2 * np.pi * rng.uniform(0.01, 0.03) * t + rng.uniform(0, 2 * np.pi))
    return residual + drift


def _cardiac(rng, t, profile):
    duration = t[-1] + 1.0 / profile.cardiac_rate_hz if t.shape[0] else 0.0
    mean_iv = 1.0 / profile.cardiac_rate_hz
    beats = [-rng.uniform(0, mean_iv)]
    while beats[-1] <= duration:
        jitter = np.clip(rng.normal(), -3, 3)
        beats.append(beats[-1] + mean_iv * (1.0 + profile.cardiac_variability * jitter))
    beats = np.asarray(beats)
    phase = np.interp(t, beats, np.arange(beats.shape[0], dtype=float))
    return np.cos(2 * np.pi * phase) + 0.05 * rng.normal(size=t.shape[0])


def _record_seed(profile, activity, position):
    ss = np.random.SeedSequence(
        [profile.noise_seed, ACTIVITIES.index(Activity(activity)), POSITIONS.index(Position(position))]
    )
    return int(ss.generate_state(1, dtype=np.uint64)[0] & np.uint64(2**63 - 1))


def synthesize_session(profile: SubjectProfile, activity, position,
                       duration_s: float = 30.0, sample_rate_hz: float = 20.0) -> SignalRecord:
    """One session of three synchronized channels for ``profile``."""
    if duration_s <= 0 or sample_rate_hz <= 0:
        raise SynthError("duration_s and sample_rate_hz must be positive")
    activity = Activity(activity)
    position = Position(position)
    n = int(round(duration_s * sample_rate_hz))
    fs = float(sample_rate_hz)
    t = np.arange(n) / fs
    seed = _record_seed(profile, activity, position)
    rng = np.random.default_rng(seed)

    if activity is Activity.NORMAL:
        resp = _normal_breathing(rng, t, fs, profile.breath_rate_hz)
    elif activity is Activity.READING:
        resp = _reading_breathing(rng, n, fs)
    elif activity is Activity.GUIDED:
        resp = 1.2 * np.sin(2 * np.pi * GUIDE_FREQ_HZ * t + rng.uniform(0, 2 * np.pi))
    else:
        resp = _apnea(rng, t, profile.breath_rate_hz)

    cardiac = _cardiac(rng, t, profile)
    scale = profile.chest_amplitude
    # breathing depth is a subject trait, so respiration carries some identity too
    resp = scale * resp
    chest = resp + 0.15 * scale * cardiac
    if position is Position.LYING:
        chest = LYING_CHEST_FACTOR * chest
    chest = chest + 0.02 * rng.normal(size=n)
    if position is Position.LYING:
        chest = chest + 0.1 * np.sin(2 * np.pi * rng.uniform(0.01, 0.04) * t + rng.uniform(0, 2 * np.pi))

    return SignalRecord(
        subject_id=profile.subject_id,
        activity=activity,
        position=position,
        sample_rate_hz=fs,
        channels={"chest": chest, "respiration": resp, "cardiac": cardiac},
        seed=seed,
    )


def synthesize_dataset(master_seed: int, n_subjects: int,
                       activities: Sequence = ACTIVITIES, positions: Sequence = POSITIONS,
                       duration_s: float = 30.0, sample_rate_hz: float = 20.0) -> list[SignalRecord]:
    """One record per (subject, activity, position), in that nesting order."""
    activities = [Activity(a) for a in activities]
    positions = [Position(p) for p in positions]
    if not activities or not positions:
        raise SynthError("activity and position lists must be nonempty")
    records = []
    for profile in generate_profiles(master_seed, n_subjects):
        for act in activities:
            for pos in positions:
                records.append(synthesize_session(profile, act, pos, duration_s, sample_rate_hz))
    return records


# -- serialization ---------------------------------------------------------

def session_filename(record: SignalRecord) -> str:
    return f"s{record.subject_id:03d}_{record.activity.value}_{record.position.value}.csv"


def record_to_csv(record: SignalRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", *CHANNELS])
    fs = record.sample_rate_hz
    cols = [record.channels[c] for c in CHANNELS]
    for i in range(len(record)):
        w.writerow([repr(i / fs)] + [repr(float(c[i])) for c in cols])
    return buf.getvalue()


def record_from_csv(text: str, subject_id, activity, position, sample_rate_hz, seed=0) -> SignalRecord:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["t", *CHANNELS]:
        raise SynthError("bad session header")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, 4)
    if not np.all(np.isfinite(data)):
        raise SynthError("non-finite samples")
    return SignalRecord(
        subject_id=int(subject_id),
        activity=Activity(activity),
        position=Position(position),
        sample_rate_hz=float(sample_rate_hz),
        channels={c: data[:, i + 1].copy() for i, c in enumerate(CHANNELS)},
        seed=int(seed),
    )


def write_dataset(records: Iterable[SignalRecord], out_dir, master_seed: int,
                  profiles: Sequence[SubjectProfile] = ()) -> dict:
    """Write one CSV per session plus ``manifest.json``; returns the manifest."""
    os.makedirs(out_dir, exist_ok=True)
    sessions = []
    for rec in records:
        name = session_filename(rec)
        with open(os.path.join(out_dir, name), "w", newline="") as fh:
            fh.write(record_to_csv(rec))
        sessions.append({
            "file": name,
            "subject_id": rec.subject_id,
            "activity": rec.activity.value,
            "position": rec.position.value,
            "sample_rate_hz": rec.sample_rate_hz,
            "seed": rec.seed,
        })
    manifest = {
        "master_seed": int(master_seed),
        "profiles": [asdict(p) for p in profiles],
        "sessions": sessions,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def read_dataset(data_dir) -> list[SignalRecord]:
    """Load the sessions listed in ``manifest.json``.

    Raises ``SynthError`` naming the offending file on any parse failure.
    """
    path = os.path.join(data_dir, "manifest.json")
    if not os.path.exists(path):
        raise SynthError(f"missing manifest: {path}")
    with open(path) as fh:
        manifest = json.load(fh)
    records = []
    for s in manifest["sessions"]:
        fpath = os.path.join(data_dir, s["file"])
        try:
            with open(fpath) as fh:
                text = fh.read()
            records.append(record_from_csv(text, s["subject_id"], s["activity"], s["position"],
                                           s["sample_rate_hz"], s.get("seed", 0)))
        except (OSError, ValueError) as exc:
            raise SynthError(f"corrupt session file {fpath}: {exc}") from exc
    return records

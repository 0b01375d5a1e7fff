"""Reading and writing of FOA audio, DCASE-style label CSVs, manifests, and
the toolkit's binary feature container.

All readers are strict: wrong channel counts, sample rates, or malformed
rows are errors, never silently repaired. Nothing here resamples audio or
remaps channels; feature extraction downstream depends on bit-reproducible
input.
"""

from __future__ import annotations

import csv
import math
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import (
    BadMagic,
    ClassOutOfRange,
    MalformedRow,
    MalformedWav,
    SeldkitError,
    TooShort,
    TruncatedPayload,
    VersionMismatch,
    WrongChannelCount,
    WrongSampleRate,
)

SAMPLE_RATE = 24000
N_CHANNELS = 4
N_CLASSES = 13

_MAGIC = b"SLSA"
_VERSION = 1

# peak scale per integer PCM width; int16 full-scale -32768 maps to -1.0
_INT_SCALE = {np.dtype(np.int16): 2.0 ** 15, np.dtype(np.int32): 2.0 ** 31}


def normalize_azimuth(az: float) -> float:
    """Wrap an azimuth in degrees into [-180, 180)."""
    return (az + 180.0) % 360.0 - 180.0


@dataclass(frozen=True)
class MultichannelClip:
    """A 4-channel FOA waveform, channels in ACN order (W, Y, Z, X).

    samples is (4, n_samples) float64 in [-1, 1]; the array is locked
    read-only so clips can be shared freely between threads.
    """

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[0] != N_CHANNELS:
            raise WrongChannelCount(
                f"expected ({N_CHANNELS}, n) samples, got shape {samples.shape}"
            )
        if samples.shape[1] < 512:
            raise TooShort(
                f"clip has {samples.shape[1]} samples, need at least 512"
            )
        if not np.all(np.isfinite(samples)):
            raise SeldkitError("clip contains non-finite samples")
        if self.sample_rate != SAMPLE_RATE:
            raise WrongSampleRate(
                f"expected {SAMPLE_RATE} Hz, got {self.sample_rate}"
            )
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True, order=True)
class Event:
    """One active sound event in one 100 ms label frame."""

    frame: int
    class_id: int
    azimuth: float
    elevation: float


EventList = list  # list[Event]; kept as a plain list for numpy-friendly code


@dataclass(frozen=True)
class ManifestEntry:
    audio_path: str
    label_path: str
    split: str


@dataclass
class DatasetManifest:
    entries: list = field(default_factory=list)
    n_classes: int = N_CLASSES


def read_foa_wav(path) -> MultichannelClip:
    """Read a 4-channel 24 kHz PCM WAV into a normalized clip.

    Supports 16/24/32-bit integer and 32-bit float PCM. Integer samples are
    scaled by the type's full range, so int16 -32768 becomes exactly -1.0.
    Non-24 kHz files are rejected rather than resampled.
    """
    try:
        rate, data = wavfile.read(os.fspath(path))
    except FileNotFoundError:
        raise
    except (ValueError, EOFError, struct.error) as exc:
        raise MalformedWav(f"{path}: {exc}") from exc

    if data.ndim != 2 or data.shape[1] != N_CHANNELS:
        n_ch = 1 if data.ndim == 1 else data.shape[1]
        raise WrongChannelCount(f"{path}: expected {N_CHANNELS} channels, got {n_ch}")
    if rate != SAMPLE_RATE:
        raise WrongSampleRate(f"{path}: expected {SAMPLE_RATE} Hz, got {rate}")

    if data.dtype in _INT_SCALE:
        samples = data.astype(np.float64) / _INT_SCALE[data.dtype]
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise MalformedWav(
            f"{path}: unsupported sample format {data.dtype} "
            "(need 16/24/32-bit int or 32-bit float PCM)"
        )
    return MultichannelClip(samples.T)


def read_label_csv(path, n_classes: int = N_CLASSES) -> list:
    """Read a DCASE-style label CSV: frame,class,source,azimuth,elevation.

    The source/track column is discarded. Azimuths are wrapped into
    [-180, 180). Rows that become exact duplicates after that are dropped.
    Returns events sorted by (frame, class, azimuth, elevation).
    """
    events = []
    seen = set()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 5:
                raise MalformedRow(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            try:
                frame, class_id, _source, az, el = (int(v) for v in row)
            except ValueError as exc:
                raise MalformedRow(f"{path}:{lineno}: {exc}") from exc
            if frame < 0:
                raise MalformedRow(f"{path}:{lineno}: negative frame {frame}")
            if not 0 <= class_id < n_classes:
                raise ClassOutOfRange(
                    f"{path}:{lineno}: class {class_id} outside [0, {n_classes})"
                )
            if not -90 <= el < 90:
                raise MalformedRow(f"{path}:{lineno}: elevation {el} outside [-90, 90)")
            event = Event(frame, class_id, normalize_azimuth(float(az)), float(el))
            if event not in seen:
                seen.add(event)
                events.append(event)
    events.sort()
    return events


def write_label_csv(events, path) -> None:
    """Write events as frame,class,0,azimuth,elevation integer rows.

    Azimuth/elevation are rounded to whole degrees for emission (full
    precision stays with the in-memory events); azimuth is re-wrapped after
    rounding and elevation is clamped to [-90, 89] so the file always
    re-reads cleanly.
    """
    lines = []
    for ev in events:
        az = int(normalize_azimuth(round(ev.azimuth)))
        el = int(min(max(round(ev.elevation), -90), 89))
        lines.append(f"{ev.frame},{ev.class_id},0,{az},{el}\n")
    _atomic_write_bytes(path, "".join(lines).encode("utf-8"))


def write_feature_file(tensor: np.ndarray, path) -> None:
    """Serialize a tensor to the "SLSA" container (float32 payload).

    Layout: magic "SLSA", u32 version=1, u32 ndim, ndim u64 dims, then the
    row-major float32 payload, all little-endian.
    """
    arr = np.asarray(tensor)
    if not np.all(np.isfinite(arr)):
        raise SeldkitError("refusing to serialize non-finite tensor")
    arr = np.ascontiguousarray(arr, dtype="<f4")
    header = _MAGIC + struct.pack("<II", _VERSION, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    _atomic_write_bytes(path, header + arr.tobytes())


def read_feature_file(path) -> np.ndarray:
    """Read an "SLSA" container back into a float32 array (bit-exact)."""
    blob = Path(path).read_bytes()
    if len(blob) < 4 or blob[:4] != _MAGIC:
        raise BadMagic(f"{path}: not an SLSA container")
    if len(blob) < 12:
        raise TruncatedPayload(f"{path}: header truncated")
    version, ndim = struct.unpack_from("<II", blob, 4)
    if version != _VERSION:
        raise VersionMismatch(f"{path}: version {version}, expected {_VERSION}")
    offset = 12 + 8 * ndim
    if len(blob) < offset:
        raise TruncatedPayload(f"{path}: dimension list truncated")
    dims = struct.unpack_from(f"<{ndim}Q", blob, 12)
    count = math.prod(dims)
    if len(blob) < offset + 4 * count:
        raise TruncatedPayload(
            f"{path}: payload holds {len(blob) - offset} bytes, need {4 * count}"
        )
    if len(blob) > offset + 4 * count:
        raise SeldkitError(f"{path}: trailing bytes after payload")
    data = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
    return data.reshape(dims).copy()


def read_manifest(path, n_classes: int = N_CLASSES) -> DatasetManifest:
    """Read a dataset manifest CSV with header audio_path,label_path,split."""
    entries = []
    seen_audio = set()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"audio_path", "label_path", "split"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise MalformedRow(f"{path}: manifest needs columns {sorted(required)}")
        for lineno, row in enumerate(reader, start=2):
            audio = row["audio_path"].strip()
            label = row["label_path"].strip()
            if not audio:
                raise MalformedRow(f"{path}:{lineno}: empty audio_path")
            if audio == label:
                raise SeldkitError(f"{path}:{lineno}: audio and label paths collide")
            if audio in seen_audio:
                raise SeldkitError(f"{path}:{lineno}: duplicate audio path {audio}")
            seen_audio.add(audio)
            entries.append(ManifestEntry(audio, label, row["split"].strip()))
    return DatasetManifest(entries, n_classes)


def _atomic_write_bytes(path, blob: bytes) -> None:
    """Write via a sibling temp file + rename so readers never see partials."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise

"""CSI data types, dataset files and per-subcarrier min-max scaling.

A dataset is a stack of CSI magnitude frames ``|H|`` of shape
``(n_frames, sc)`` together with a tamper label and a free-form scenario tag.
Magnitudes are held as float32, which is also the on-disk precision.
"""

from __future__ import annotations

import csv
import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import CorruptError, DomainError, EmptyInputError, FormatError, ShapeError
from .validation import check_csi

DEFAULT_SC = 200

DATASET_MAGIC = b"CSID"
DATASET_VERSION = 1
_HEADER = struct.Struct("<4sHIIB")


class Label(enum.IntEnum):
    """Ground-truth antenna state of a dataset. ``R1``..``R7`` are rotations."""

    TAMPER_FREE = 0
    R1 = 1
    R2 = 2
    R3 = 3
    R4 = 4
    R5 = 5
    R6 = 6
    R7 = 7
    UNKNOWN = 255

    @property
    def is_tampered(self) -> bool:
        return 1 <= self.value <= 7

    @classmethod
    def parse(cls, text) -> "Label":
        """Map ``default``/``tamper-free``/``r3``/``3``/``unknown`` to a label."""
        if isinstance(text, (int, np.integer)):
            try:
                return cls(int(text))
            except ValueError:
                raise DomainError(f"unknown label code {text}") from None
        key = str(text).strip().lower()
        if key in ("default", "tamper-free", "tamper_free", "0"):
            return cls.TAMPER_FREE
        if key == "unknown":
            return cls.UNKNOWN
        if key.startswith("r") and key[1:].isdigit():
            key = key[1:]
        if key.isdigit() and 1 <= int(key) <= 7:
            return cls(int(key))
        raise DomainError(f"unknown orientation/label {text!r}")


@dataclass(frozen=True)
class CsiFrame:
    magnitudes: np.ndarray
    frame_index: int = 0


@dataclass(frozen=True, eq=False)
class CsiDataset:
    """Frames of CSI magnitudes sharing one subcarrier count."""

    magnitudes: np.ndarray
    label: Label = Label.UNKNOWN
    scenario_tag: str = ""
    sc: int = field(default=-1)

    def __post_init__(self):
        mags = np.asarray(self.magnitudes)
        sc = self.sc
        if mags.ndim == 1 and mags.size == 0:
            mags = mags.reshape(0, max(sc, 0))
        if mags.ndim != 2:
            raise ShapeError("magnitudes must be a (n_frames, sc) matrix")
        if sc < 0:
            sc = mags.shape[1]
        if mags.shape[1] != sc or sc < 1:
            raise ShapeError(f"frames have length {mags.shape[1]}, dataset declares sc={sc}")
        mags = np.ascontiguousarray(mags, dtype=np.float32)
        if mags.size and not np.all(np.isfinite(mags)):
            raise DomainError("magnitudes must be finite")
        if mags.size and mags.min() < 0:
            raise DomainError("magnitudes must be non-negative")
        mags.setflags(write=False)
        object.__setattr__(self, "magnitudes", mags)
        object.__setattr__(self, "sc", int(sc))
        object.__setattr__(self, "label", Label(self.label))

    def __len__(self):
        return self.magnitudes.shape[0]

    def __eq__(self, other):
        if not isinstance(other, CsiDataset):
            return NotImplemented
        return (
            self.sc == other.sc
            and self.label == other.label
            and self.scenario_tag == other.scenario_tag
            and self.magnitudes.shape == other.magnitudes.shape
            and self.magnitudes.tobytes() == other.magnitudes.tobytes()
        )

    __hash__ = None

    @property
    def frames(self) -> list[CsiFrame]:
        return [CsiFrame(row, i) for i, row in enumerate(self.magnitudes)]

    def head(self, n) -> "CsiDataset":
        return self.slice(0, n)

    def tail(self, n) -> "CsiDataset":
        return self.slice(max(len(self) - n, 0), len(self))

    def slice(self, start, stop) -> "CsiDataset":
        return CsiDataset(self.magnitudes[start:stop], self.label, self.scenario_tag, self.sc)

    @classmethod
    def concatenate(cls, datasets, label=None, scenario_tag=None) -> "CsiDataset":
        datasets = list(datasets)
        if not datasets:
            raise EmptyInputError("nothing to concatenate")
        sc = datasets[0].sc
        if any(d.sc != sc for d in datasets):
            raise ShapeError("datasets disagree on sc")
        if label is None:
            labels = {d.label for d in datasets}
            label = labels.pop() if len(labels) == 1 else Label.UNKNOWN
        if scenario_tag is None:
            scenario_tag = "+".join(dict.fromkeys(d.scenario_tag for d in datasets))
        mags = np.concatenate([d.magnitudes for d in datasets], axis=0)
        return cls(mags, label, scenario_tag, sc)


def dataset_bytes(dataset: CsiDataset) -> bytes:
    """Serialize to the little-endian CSID layout."""
    tag = dataset.scenario_tag.encode("utf-8")
    if len(tag) > 0xFFFF:
        raise DomainError("scenario tag longer than 65535 bytes")
    header = _HEADER.pack(DATASET_MAGIC, DATASET_VERSION, dataset.sc, len(dataset), int(dataset.label))
    return b"".join([
        header,
        struct.pack("<H", len(tag)),
        tag,
        dataset.magnitudes.astype("<f4", copy=False).tobytes(),
    ])


def save_dataset(dataset: CsiDataset, path) -> None:
    Path(path).write_bytes(dataset_bytes(dataset))


def load_dataset(path) -> CsiDataset:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size + 2:
        raise FormatError(f"{path}: too short for a CSID header")
    magic, version, sc, n_frames, label = _HEADER.unpack_from(data, 0)
    if magic != DATASET_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != DATASET_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if sc < 1:
        raise CorruptError(f"{path}: sc must be positive")
    offset = _HEADER.size
    (tag_len,) = struct.unpack_from("<H", data, offset)
    offset += 2
    if offset + tag_len > len(data):
        raise CorruptError(f"{path}: truncated scenario tag")
    try:
        tag = data[offset:offset + tag_len].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorruptError(f"{path}: scenario tag is not UTF-8") from exc
    offset += tag_len
    payload = data[offset:]
    if len(payload) != 4 * sc * n_frames:
        raise CorruptError(
            f"{path}: payload holds {len(payload)} bytes, header implies {4 * sc * n_frames}"
        )
    mags = np.frombuffer(payload, dtype="<f4").reshape(n_frames, sc)
    if mags.size and mags.min() < 0:
        raise DomainError(f"{path}: negative magnitude")
    try:
        label = Label(label)
    except ValueError:
        raise CorruptError(f"{path}: unknown label byte {label}") from None
    return CsiDataset(mags.astype(np.float32), label, tag, sc)


def save_csv(dataset: CsiDataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sc", "label", "tag"])
        writer.writerow([dataset.sc, int(dataset.label), dataset.scenario_tag])
        for row in dataset.magnitudes:
            writer.writerow([repr(float(v)) for v in row])


def load_csv(path) -> CsiDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or [c.strip() for c in rows[0]] != ["sc", "label", "tag"]:
        raise FormatError(f"{path}: expected header 'sc,label,tag'")
    meta = rows[1] + [""] * (3 - len(rows[1]))
    try:
        sc, label = int(meta[0]), Label(int(meta[1]))
    except ValueError as exc:
        raise CorruptError(f"{path}: bad metadata row {rows[1]}") from exc
    body = [r for r in rows[2:] if r]
    if any(len(r) != sc for r in body):
        raise CorruptError(f"{path}: row length differs from sc={sc}")
    mags = np.array(body, dtype=np.float64).reshape(len(body), sc)
    if mags.size and mags.min() < 0:
        raise DomainError(f"{path}: negative magnitude")
    return CsiDataset(mags.astype(np.float32), label, meta[2], sc)


@dataclass(frozen=True, eq=False)
class NormParams:
    per_subcarrier_min: np.ndarray
    per_subcarrier_max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.per_subcarrier_min, dtype=np.float32).copy()
        hi = np.asarray(self.per_subcarrier_max, dtype=np.float32).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ShapeError("min and max must be vectors of equal length")
        if np.any(hi < lo):
            raise DomainError("per-subcarrier max below min")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "per_subcarrier_min", lo)
        object.__setattr__(self, "per_subcarrier_max", hi)

    @property
    def sc(self) -> int:
        return self.per_subcarrier_min.shape[0]

    def __eq__(self, other):
        if not isinstance(other, NormParams):
            return NotImplemented
        return (
            np.array_equal(self.per_subcarrier_min, other.per_subcarrier_min)
            and np.array_equal(self.per_subcarrier_max, other.per_subcarrier_max)
        )

    __hash__ = None


def fit_normalizer(dataset) -> NormParams:
    X = check_csi(dataset, allow_empty=True)
    if X.shape[0] == 0:
        raise EmptyInputError("cannot fit a normalizer on an empty dataset")
    return NormParams(X.min(axis=0), X.max(axis=0))


def normalize(frames, params: NormParams) -> np.ndarray:
    """Scale frames to [0, 1] per subcarrier.

    Constant subcarriers map to 0.0. Values outside the fitted range are
    clamped, so online frames never leave the unit interval.
    """
    X = np.asarray(getattr(frames, "magnitudes", frames), dtype=np.float64)
    if X.shape[-1] != params.sc:
        raise ShapeError(f"frame length {X.shape[-1]} does not match normalizer sc={params.sc}")
    lo = params.per_subcarrier_min.astype(np.float64)
    span = params.per_subcarrier_max.astype(np.float64) - lo
    safe = np.where(span > 0, span, 1.0)
    out = np.where(span > 0, (X - lo) / safe, 0.0)
    return np.clip(out, 0.0, 1.0)


class MinMaxNormalizer(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`fit_normalizer` / :func:`normalize`."""

    def fit(self, X, y=None):
        self.params_ = fit_normalizer(check_csi(X))
        self.n_features_in_ = self.params_.sc
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        return normalize(check_csi(X, sc=self.params_.sc, non_negative=False), self.params_)

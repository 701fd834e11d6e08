"""Tamper detectors over CSI windows.

* Method 1 compares raw magnitude frames: the mean Euclidean distance over
  every (offline, online) frame pair is thresholded.
* Method 2 applies the same rule to autoencoder reconstruction errors.
* Method 3 compares the density of per-frame anomaly scores in an online
  window against the density stored offline, using their overlapping index.

Ties at the threshold resolve to tamper-free.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .csi import CsiDataset
from .dcae import (
    DcaeConfig,
    DcaeModel,
    TrainConfig,
    anomaly_scores,
    build_dcae,
    model_bytes,
    model_from_bytes,
    reconstruction_errors,
    train,
)
from .density import DEFAULT_BANDWIDTH, AnomalyPdf, fit_kde, overlapping_index, refit_like
from .exceptions import CorruptError, DomainError, FormatError, InsufficientDataError, ShapeError
from .validation import check_csi, check_positive_int

DEFAULT_WINDOW = 1000
DEFAULT_ETA_THRESHOLD = 0.5

PROFILE_MAGIC = b"TPRF"
PROFILE_VERSION = 1


class Decision(enum.Enum):
    TAMPER_FREE = "tamper-free"
    TAMPERING = "tampering"


@dataclass(frozen=True)
class Verdict:
    decision: Decision
    statistic: float
    threshold_used: float
    method: int

    @property
    def is_tampering(self) -> bool:
        return self.decision is Decision.TAMPERING


def distance_decision(statistic, threshold) -> Decision:
    return Decision.TAMPER_FREE if statistic <= threshold else Decision.TAMPERING


def overlap_decision(eta, threshold) -> Decision:
    return Decision.TAMPER_FREE if eta >= threshold else Decision.TAMPERING


def mean_pairwise_distance(a, b, metric="euclidean", chunk=2048) -> float:
    """Mean of ``metric(a_i, b_j)`` over all row pairs."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    total = 0.0
    for start in range(0, b.shape[0], chunk):
        total += float(cdist(a, b[start:start + chunk], metric=metric).sum())
    return total / (a.shape[0] * b.shape[0])


def _pair(h_off, h_on, non_negative=True):
    off = check_csi(h_off, name="h_off", non_negative=non_negative)
    on = check_csi(h_on, name="h_on", non_negative=non_negative)
    if off.shape[1] != on.shape[1]:
        raise ShapeError(f"offline frames have {off.shape[1]} subcarriers, online {on.shape[1]}")
    return off, on


def method1_statistic(h_off, h_on) -> float:
    """Mean pairwise Euclidean distance; rows may be magnitudes or error vectors."""
    return mean_pairwise_distance(*_pair(h_off, h_on, non_negative=False))


def method1_decide(h_off, h_on, threshold) -> Verdict:
    stat = method1_statistic(h_off, h_on)
    return Verdict(distance_decision(stat, threshold), stat, float(threshold), 1)


def method2_statistic(model: DcaeModel, h_off, h_on, offline_errors=None) -> float:
    off, on = _pair(h_off, h_on)
    e_off = reconstruction_errors(model, off) if offline_errors is None else offline_errors
    return mean_pairwise_distance(e_off, reconstruction_errors(model, on))


def method2_decide(model: DcaeModel, h_off, h_on, threshold) -> Verdict:
    stat = method2_statistic(model, h_off, h_on)
    return Verdict(distance_decision(stat, threshold), stat, float(threshold), 2)


# -- method 3 ---------------------------------------------------------------


@dataclass(eq=False)
class DetectorProfile:
    """Everything the online phase needs: the trained model and the offline score density."""

    model: DcaeModel
    offline_pdf: AnomalyPdf
    eta_threshold: float = DEFAULT_ETA_THRESHOLD
    window_n_on: int = DEFAULT_WINDOW

    def __post_init__(self):
        if not 0.0 <= self.eta_threshold <= 1.0:
            raise DomainError(f"eta_threshold must lie in [0, 1], got {self.eta_threshold}")
        if int(self.window_n_on) != self.window_n_on or self.window_n_on < 2:
            raise DomainError("window_n_on must be an integer >= 2")


def method3_offline(dataset, dcae_cfg: DcaeConfig | None = None, train_cfg: TrainConfig = TrainConfig(),
                    kde_bandwidth=DEFAULT_BANDWIDTH, window_n_on=DEFAULT_WINDOW,
                    eta_threshold=DEFAULT_ETA_THRESHOLD, init_seed=None) -> DetectorProfile:
    """Train the autoencoder on tamper-free frames and store the score density.

    ``init_seed`` seeds weight initialisation and defaults to ``train_cfg.seed``.
    """
    X = check_csi(dataset)
    if dcae_cfg is None:
        dcae_cfg = DcaeConfig(input_len=X.shape[1])
    seed = train_cfg.seed if init_seed is None else init_seed
    model, _ = train(build_dcae(dcae_cfg, seed), dataset, train_cfg)
    return profile_from_model(model, X, kde_bandwidth, window_n_on, eta_threshold)


def profile_from_model(model: DcaeModel, dataset, kde_bandwidth=DEFAULT_BANDWIDTH,
                       window_n_on=DEFAULT_WINDOW, eta_threshold=DEFAULT_ETA_THRESHOLD) -> DetectorProfile:
    scores = anomaly_scores(reconstruction_errors(model, dataset))
    # round to the persisted precision so a saved profile reloads identically
    scores = scores.astype(np.float32).astype(np.float64)
    return DetectorProfile(model, fit_kde(scores, kde_bandwidth), float(eta_threshold), int(window_n_on))


def online_pdf(profile: DetectorProfile, window) -> AnomalyPdf:
    X = check_csi(window, sc=profile.model.sc, non_negative=False, name="window")
    n = profile.window_n_on
    if X.shape[0] < n:
        raise InsufficientDataError(f"window holds {X.shape[0]} frames, the profile needs {n}")
    scores = anomaly_scores(reconstruction_errors(profile.model, X[-n:]))
    return refit_like(profile.offline_pdf, scores)


def method3_statistic(profile: DetectorProfile, window) -> float:
    """Overlapping index between the offline and the window's score density."""
    return overlapping_index(profile.offline_pdf, online_pdf(profile, window))


def method3_online(profile: DetectorProfile, window) -> Verdict:
    eta = method3_statistic(profile, window)
    return Verdict(overlap_decision(eta, profile.eta_threshold), eta, profile.eta_threshold, 3)


# -- profile persistence ----------------------------------------------------


def profile_bytes(profile: DetectorProfile) -> bytes:
    pdf = profile.offline_pdf
    return b"".join([
        struct.pack("<4sH", PROFILE_MAGIC, PROFILE_VERSION),
        model_bytes(profile.model),
        struct.pack("<BI", int(pdf.auto_bandwidth), pdf.samples.size),
        pdf.samples.astype("<f4").tobytes(),
        struct.pack("<d", pdf.bandwidth),
        struct.pack("<dI", profile.eta_threshold, profile.window_n_on),
    ])


def profile_from_bytes(data: bytes) -> DetectorProfile:
    try:
        magic, version = struct.unpack_from("<4sH", data, 0)
    except struct.error as exc:
        raise FormatError("too short for a profile header") from exc
    if magic != PROFILE_MAGIC:
        raise FormatError(f"bad profile magic {magic!r}")
    if version != PROFILE_VERSION:
        raise FormatError(f"unsupported profile version {version}")
    model, offset = model_from_bytes(data, struct.calcsize("<4sH"))
    try:
        auto, count = struct.unpack_from("<BI", data, offset)
        offset += struct.calcsize("<BI")
        end = offset + 4 * count
        if end > len(data):
            raise CorruptError("truncated anomaly-score samples")
        samples = np.frombuffer(data[offset:end], dtype="<f4").astype(np.float64)
        (bandwidth,) = struct.unpack_from("<d", data, end)
        eta, window = struct.unpack_from("<dI", data, end + 8)
    except struct.error as exc:
        raise CorruptError("truncated profile") from exc
    if end + 8 + struct.calcsize("<dI") != len(data):
        raise CorruptError("trailing bytes after profile")
    pdf = AnomalyPdf(samples, bandwidth, bool(auto))
    return DetectorProfile(model, pdf, eta, window)


def save_profile(profile: DetectorProfile, path) -> None:
    Path(path).write_bytes(profile_bytes(profile))


def load_profile(path) -> DetectorProfile:
    return profile_from_bytes(Path(path).read_bytes())


# -- estimators -------------------------------------------------------------


class _WindowDetector(BaseEstimator):
    """Shared window API: one verdict per window of frames.

    ``decision_function`` and ``predict`` take a sequence of windows;
    larger decision values mean more likely tampered, and ``predict`` returns
    1 for tampering and 0 for tamper-free.
    """

    _method = 0

    def statistic(self, window) -> float:
        raise NotImplementedError

    def _decide(self, stat) -> Decision:
        raise NotImplementedError

    def _threshold(self) -> float:
        raise NotImplementedError

    def verdict(self, window) -> Verdict:
        stat = self.statistic(window)
        return Verdict(self._decide(stat), stat, self._threshold(), self._method)

    def decision_function(self, windows):
        return np.array([self._signed(self.statistic(w)) for w in _as_windows(windows)])

    def predict(self, windows):
        return np.array([int(self._decide(self.statistic(w)) is Decision.TAMPERING)
                         for w in _as_windows(windows)])

    def _signed(self, stat):
        return stat


def _as_windows(windows):
    if isinstance(windows, CsiDataset):
        return [windows]
    arr = windows if isinstance(windows, list) else list(windows)
    if arr and np.ndim(arr[0]) == 1:
        return [np.asarray(arr)]
    return arr


class DistanceDetector(_WindowDetector):
    """Method 1: mean pairwise Euclidean distance between raw CSI frames."""

    _method = 1

    def __init__(self, threshold=1.0):
        self.threshold = threshold

    def fit(self, X, y=None):
        self.offline_ = check_csi(X)
        self.n_features_in_ = self.offline_.shape[1]
        return self

    def statistic(self, window):
        check_is_fitted(self, "offline_")
        return method1_statistic(self.offline_, window)

    def _decide(self, stat):
        return distance_decision(stat, self.threshold)

    def _threshold(self):
        return float(self.threshold)


class ErrorDistanceDetector(_WindowDetector):
    """Method 2: mean pairwise distance between reconstruction-error rows."""

    _method = 2

    def __init__(self, threshold=1.0, preset="dcae1", epochs=20, batch_size=100,
                 learning_rate=0.001, random_state=0):
        self.threshold = threshold
        self.preset = preset
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.random_state = random_state

    def fit(self, X, y=None, model: DcaeModel | None = None):
        """Train an autoencoder on ``X`` unless a trained ``model`` is supplied."""
        X_arr = check_csi(X)
        if model is None:
            config = (DcaeConfig.preset(self.preset, X_arr.shape[1]) if isinstance(self.preset, str)
                      else DcaeConfig(tuple(self.preset), X_arr.shape[1]))
            cfg = TrainConfig(self.epochs, self.batch_size, self.learning_rate, self.random_state)
            model, _ = train(build_dcae(config, self.random_state), X, cfg)
        self.model_ = model
        self.offline_errors_ = reconstruction_errors(model, X_arr)
        self.n_features_in_ = X_arr.shape[1]
        return self

    def statistic(self, window):
        check_is_fitted(self, "model_")
        return mean_pairwise_distance(self.offline_errors_, reconstruction_errors(self.model_, window))

    def _decide(self, stat):
        return distance_decision(stat, self.threshold)

    def _threshold(self):
        return float(self.threshold)


class OverlapDetector(_WindowDetector):
    """Method 3: overlapping index of offline and online anomaly-score densities.

    ``decision_function`` returns ``1 - eta`` so that larger means more anomalous.
    """

    _method = 3

    def __init__(self, preset="dcae1", epochs=20, batch_size=100, learning_rate=0.001,
                 bandwidth=DEFAULT_BANDWIDTH, window=DEFAULT_WINDOW,
                 eta_threshold=DEFAULT_ETA_THRESHOLD, random_state=0):
        self.preset = preset
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.bandwidth = bandwidth
        self.window = window
        self.eta_threshold = eta_threshold
        self.random_state = random_state

    def fit(self, X, y=None):
        X_arr = check_csi(X)
        check_positive_int(self.window, "window", minimum=2)
        config = (DcaeConfig.preset(self.preset, X_arr.shape[1]) if isinstance(self.preset, str)
                  else DcaeConfig(tuple(self.preset), X_arr.shape[1]))
        cfg = TrainConfig(self.epochs, self.batch_size, self.learning_rate, self.random_state)
        self.profile_ = method3_offline(X, config, cfg, self.bandwidth, self.window, self.eta_threshold)
        self.n_features_in_ = X_arr.shape[1]
        return self

    @classmethod
    def from_profile(cls, profile: DetectorProfile) -> "OverlapDetector":
        pdf = profile.offline_pdf
        est = cls(preset=profile.model.config.layers,
                  bandwidth="auto" if pdf.auto_bandwidth else pdf.bandwidth,
                  window=profile.window_n_on, eta_threshold=profile.eta_threshold,
                  random_state=profile.model.seed)
        est.profile_ = profile
        est.n_features_in_ = profile.model.sc
        return est

    def statistic(self, window):
        check_is_fitted(self, "profile_")
        return method3_statistic(self.profile_, window)

    def _decide(self, stat):
        return overlap_decision(stat, self.profile_.eta_threshold)

    def _threshold(self):
        return float(self.profile_.eta_threshold)

    def _signed(self, stat):
        return 1.0 - stat

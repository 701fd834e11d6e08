"""Deep convolutional autoencoder over CSI magnitude frames.

The encoder stacks ``Conv1D(F, L) + ReLU -> MaxPool(M)`` blocks; the decoder
mirrors them as ``Conv1D(F, L) + ReLU -> UpSample(M)`` in reverse order and
ends in a flatten plus a sigmoid dense layer with one neuron per subcarrier.
Frames are min-max scaled with parameters frozen at training time.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .csi import DEFAULT_SC, CsiDataset, NormParams, fit_normalizer, normalize
from .exceptions import (
    ConfigError,
    CorruptError,
    DomainError,
    EmptyInputError,
    FormatError,
    ShapeError,
    StateError,
)
from .nn import AdamState, Conv1D, Dense, Flatten, MaxPool1D, Sequential, UpSample1D, adam_update
from .validation import check_csi

PRESETS = {
    "dcae1": ((10, 52, 2), (10, 26, 2), (10, 1, 2)),
    "dcae2": ((10, 104, 2), (10, 52, 2), (10, 26, 2), (10, 1, 2)),
}

MODEL_MAGIC = b"DCAE"
MODEL_VERSION = 1


@dataclass(frozen=True)
class DcaeConfig:
    """Encoder layer table ``(filters, kernel_len, pool)`` and input length."""

    layers: tuple = PRESETS["dcae1"]
    input_len: int = DEFAULT_SC

    def __post_init__(self):
        layers = tuple(tuple(int(v) for v in layer) for layer in self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise ConfigError("at least one encoder layer is required")
        if any(len(layer) != 3 or min(layer) < 1 for layer in layers):
            raise ConfigError(f"every layer needs F, L, M >= 1, got {layers}")
        if self.input_len < 1:
            raise ConfigError("input_len must be >= 1")
        if self.encoder_lengths[-1] < 1:
            raise ConfigError(
                f"input length {self.input_len} collapses to an empty latent space with {layers}"
            )

    @classmethod
    def preset(cls, name, input_len=DEFAULT_SC) -> "DcaeConfig":
        try:
            return cls(PRESETS[name.lower()], input_len)
        except KeyError:
            raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None

    @property
    def encoder_lengths(self) -> list[int]:
        """Sequence lengths from the input down to the latent space."""
        lengths = [self.input_len]
        for _, _, m in self.layers:
            lengths.append(lengths[-1] // m)
        return lengths

    @property
    def latent_shape(self) -> tuple[int, int]:
        return self.layers[-1][0], self.encoder_lengths[-1]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 100
    learning_rate: float = 0.001
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")


def _build_network(config: DcaeConfig, rng, dtype=np.float32) -> Sequential:
    layers = []
    channels = 1
    for f, k, m in config.layers:
        layers += [Conv1D(channels, f, k, "relu", rng, dtype), MaxPool1D(m)]
        channels = f
    lengths = config.encoder_lengths
    for depth in reversed(range(len(config.layers))):
        f, k, m = config.layers[depth]
        layers += [Conv1D(channels, f, k, "relu", rng, dtype), UpSample1D(m, lengths[depth])]
        channels = f
    n = config.input_len
    layers += [Flatten(), Dense(channels * n, n, "sigmoid", rng, dtype)]
    return Sequential(layers)


@dataclass(eq=False)
class DcaeModel:
    config: DcaeConfig
    network: Sequential
    seed: int = 0
    norm_params: NormParams | None = None
    loss_history: list = field(default_factory=list)

    @property
    def sc(self) -> int:
        return self.config.input_len

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.network.params)

    def scale(self, frames) -> np.ndarray:
        if self.norm_params is None:
            raise StateError("model has no normalization parameters; train it first")
        X = check_csi(frames, sc=self.sc, non_negative=False)
        return normalize(X, self.norm_params)

    def forward_scaled(self, scaled, batch_size=500) -> np.ndarray:
        return self.network.predict(scaled[:, np.newaxis, :], batch_size=batch_size)

    def weights_equal(self, other: "DcaeModel") -> bool:
        return all(
            a.dtype == b.dtype and a.tobytes() == b.tobytes()
            for a, b in zip(self.network.params, other.network.params)
        ) and len(self.network.params) == len(other.network.params)


def build_dcae(config: DcaeConfig, seed=0) -> DcaeModel:
    """Initialise an untrained autoencoder; equal seeds give identical weights."""
    rng = np.random.default_rng(seed)
    return DcaeModel(config, _build_network(config, rng), int(seed))


def train(model: DcaeModel, dataset, cfg: TrainConfig = TrainConfig()):
    """Fit ``model`` on tamper-free frames with Adam on the reconstruction MSE.

    Returns ``(model, loss_history)``; the history holds the mean batch MSE
    of every epoch. The model is updated in place.
    """
    if isinstance(dataset, CsiDataset) and dataset.label.is_tampered:
        raise DomainError("the autoencoder is trained on tamper-free data only")
    X = check_csi(dataset, allow_empty=True)
    if X.shape[0] == 0:
        raise EmptyInputError("training set is empty")
    if X.shape[1] != model.sc:
        raise ShapeError(f"training frames have {X.shape[1]} subcarriers, model expects {model.sc}")

    model.norm_params = fit_normalizer(X)
    scaled = normalize(X, model.norm_params)
    net = model.network
    params = net.params
    state = AdamState(lr=cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    n = scaled.shape[0]
    history = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            batch = scaled[order[start:start + cfg.batch_size]]
            out = net.forward(batch[:, np.newaxis, :])
            diff = out - batch
            losses.append(float(np.mean(diff * diff)))
            adam_update(params, net.backward(batch), state)
        history.append(float(np.mean(losses)))
    model.loss_history = history
    return model, history


def train_best(config: DcaeConfig, dataset, cfg: TrainConfig = TrainConfig(), seeds=range(5)):
    """Train one model per initialisation seed and keep the lowest final loss."""
    best = None
    for seed in seeds:
        model, history = train(build_dcae(config, seed), dataset, cfg)
        if best is None or history[-1] < best[1][-1]:
            best = (model, history)
    if best is None:
        raise ConfigError("train_best needs at least one seed")
    return best


def reconstruct(model: DcaeModel, frames) -> np.ndarray:
    """Reconstructed frames in the normalised domain, shape (n_frames, sc)."""
    return model.forward_scaled(model.scale(frames))


def reconstruction_errors(model: DcaeModel, frames) -> np.ndarray:
    """Error matrix with rows ``scaled input - reconstruction``."""
    scaled = model.scale(frames)
    return scaled - model.forward_scaled(scaled)


def anomaly_scores(errors) -> np.ndarray:
    """Euclidean norm of each error row."""
    errors = np.asarray(errors, dtype=np.float64)
    if errors.ndim == 1:
        errors = errors[np.newaxis]
    if errors.size == 0:
        raise EmptyInputError("error matrix is empty")
    return np.sqrt(np.einsum("ij,ij->i", errors, errors))


# -- persistence ------------------------------------------------------------


def model_bytes(model: DcaeModel) -> bytes:
    if model.norm_params is None:
        raise StateError("only trained models (with normalization parameters) can be saved")
    cfg = model.config
    parts = [
        struct.pack("<4sHII", MODEL_MAGIC, MODEL_VERSION, cfg.input_len, len(cfg.layers)),
        b"".join(struct.pack("<III", *layer) for layer in cfg.layers),
        struct.pack("<Q", model.seed & 0xFFFFFFFFFFFFFFFF),
        model.norm_params.per_subcarrier_min.astype("<f4").tobytes(),
        model.norm_params.per_subcarrier_max.astype("<f4").tobytes(),
    ]
    parts += [p.astype("<f4").tobytes() for p in model.network.params]
    return b"".join(parts)


def model_from_bytes(data: bytes, offset=0) -> tuple[DcaeModel, int]:
    """Decode a model block; returns the model and the offset just past it."""
    try:
        magic, version, sc, n_layers = struct.unpack_from("<4sHII", data, offset)
    except struct.error as exc:
        raise FormatError("truncated DCAE header") from exc
    if magic != MODEL_MAGIC:
        raise FormatError(f"bad model magic {magic!r}")
    if version != MODEL_VERSION:
        raise FormatError(f"unsupported model version {version}")
    offset += struct.calcsize("<4sHII")
    try:
        layers = [struct.unpack_from("<III", data, offset + 12 * i) for i in range(n_layers)]
        offset += 12 * n_layers
        (seed,) = struct.unpack_from("<Q", data, offset)
    except struct.error as exc:
        raise CorruptError("truncated DCAE layer table") from exc
    offset += 8
    config = DcaeConfig(tuple(layers), sc)
    model = build_dcae(config, seed)

    def take(count):
        nonlocal offset
        end = offset + 4 * count
        if end > len(data):
            raise CorruptError("truncated DCAE payload")
        arr = np.frombuffer(data[offset:end], dtype="<f4").astype(np.float32)
        offset = end
        return arr

    model.norm_params = NormParams(take(sc), take(sc))
    for p in model.network.params:
        p[...] = take(p.size).reshape(p.shape)
    return model, offset


def save_model(model: DcaeModel, path) -> None:
    Path(path).write_bytes(model_bytes(model))


def load_model(path) -> DcaeModel:
    data = Path(path).read_bytes()
    model, end = model_from_bytes(data)
    if end != len(data):
        raise CorruptError(f"{path}: {len(data) - end} trailing bytes after model")
    return model


# -- estimator --------------------------------------------------------------


class DCAE(TransformerMixin, BaseEstimator):
    """Autoencoder anomaly scorer with the scikit-learn estimator API.

    ``transform`` returns the reconstruction-error matrix and
    ``anomaly_score`` its row norms. ``score_samples`` follows the
    scikit-learn convention that larger means more normal.

    Parameters
    ----------
    preset : {"dcae1", "dcae2"} or sequence of (filters, kernel_len, pool)
    epochs, batch_size, learning_rate : training schedule
    shuffle : reshuffle frames every epoch
    random_state : int, seeds both weight initialisation and batch order
    """

    def __init__(self, preset="dcae1", epochs=20, batch_size=100, learning_rate=0.001,
                 shuffle=True, random_state=0):
        self.preset = preset
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.shuffle = shuffle
        self.random_state = random_state

    def _config(self, sc):
        if isinstance(self.preset, str):
            return DcaeConfig.preset(self.preset, sc)
        return DcaeConfig(tuple(self.preset), sc)

    def fit(self, X, y=None):
        data = X if isinstance(X, CsiDataset) else check_csi(X)
        sc = data.sc if isinstance(data, CsiDataset) else data.shape[1]
        seed = 0 if self.random_state is None else int(self.random_state)
        cfg = TrainConfig(self.epochs, self.batch_size, self.learning_rate, seed, self.shuffle)
        self.model_, self.loss_history_ = train(build_dcae(self._config(sc), seed), data, cfg)
        self.n_features_in_ = sc
        return self

    @classmethod
    def from_model(cls, model: DcaeModel) -> "DCAE":
        est = cls(preset=model.config.layers, random_state=model.seed)
        est.model_ = model
        est.loss_history_ = list(model.loss_history)
        est.n_features_in_ = model.sc
        return est

    def reconstruct(self, X):
        check_is_fitted(self, "model_")
        return reconstruct(self.model_, X)

    def transform(self, X):
        check_is_fitted(self, "model_")
        return reconstruction_errors(self.model_, X)

    def anomaly_score(self, X):
        return anomaly_scores(self.transform(X))

    def score_samples(self, X):
        return -self.anomaly_score(X)

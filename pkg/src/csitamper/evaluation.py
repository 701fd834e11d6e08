"""ROC analysis and the three-method comparison harness."""

from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .csi import CsiDataset
from .dcae import DcaeConfig, TrainConfig, build_dcae, reconstruction_errors, train
from .density import DEFAULT_BANDWIDTH
from .detectors import (
    DEFAULT_WINDOW,
    mean_pairwise_distance,
    method3_statistic,
    profile_from_model,
)
from .exceptions import DegenerateLabelsError, InsufficientDataError, ShapeError
from .validation import check_csi

logger = logging.getLogger(__name__)


class Direction(enum.Enum):
    HIGHER_IS_POSITIVE = "higher"
    LOWER_IS_POSITIVE = "lower"


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def _check_labels(statistics, labels):
    stats = np.asarray(statistics, dtype=np.float64).ravel()
    labels = np.asarray(labels).astype(bool).ravel()
    if stats.shape != labels.shape:
        raise ShapeError(f"{stats.size} statistics but {labels.size} labels")
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.size:
        raise DegenerateLabelsError("ROC needs at least one positive and one negative")
    return stats, labels


def roc_curve(statistics, labels, direction=Direction.HIGHER_IS_POSITIVE) -> RocCurve:
    """ROC over every distinct statistic value plus infinite sentinels.

    ``labels`` are truthy for tampered windows. With ``HIGHER_IS_POSITIVE``
    a window is flagged when its statistic is strictly above the threshold;
    with ``LOWER_IS_POSITIVE`` when strictly below. Equality is never flagged.
    """
    stats, labels = _check_labels(statistics, labels)
    direction = Direction(direction)
    # orient so that larger oriented score = more positive
    score = stats if direction is Direction.HIGHER_IS_POSITIVE else -stats
    distinct = np.unique(score)[::-1]
    order = np.argsort(-score, kind="stable")
    sorted_score = score[order]
    pos_cum = np.concatenate([[0], np.cumsum(labels[order])])
    neg_cum = np.concatenate([[0], np.cumsum(~labels[order])])
    # frames flagged at threshold t: those with score > t
    flagged = np.searchsorted(-sorted_score, -distinct, side="left")
    n_pos, n_neg = labels.sum(), (~labels).sum()
    tpr = np.concatenate([[0.0], pos_cum[flagged] / n_pos, [1.0]])
    fpr = np.concatenate([[0.0], neg_cum[flagged] / n_neg, [1.0]])
    thr = np.concatenate([[np.inf], distinct, [-np.inf]])
    if direction is Direction.LOWER_IS_POSITIVE:
        thr = -thr
    return RocCurve(fpr, tpr, thr)


def auc(curve: RocCurve) -> float:
    return float(trapezoid(curve.tpr, curve.fpr))


def tpr_at_zero_fpr(curve: RocCurve) -> float:
    """Best detection rate among operating points without false alarms."""
    return float(curve.tpr[curve.fpr == 0].max())


# -- comparison harness -----------------------------------------------------


@dataclass
class CompareConfig:
    presets: tuple = ("dcae1",)
    train: TrainConfig = field(default_factory=TrainConfig)
    bandwidth: object = DEFAULT_BANDWIDTH
    window: int = DEFAULT_WINDOW
    seed: int = 0


@dataclass
class MethodResult:
    method: str
    auc: float
    tpr_at_fpr0: float
    curve: RocCurve
    statistics: np.ndarray
    labels: np.ndarray


def split_windows(frames, window):
    """Non-overlapping windows of ``window`` frames; a short tail is dropped."""
    X = check_csi(frames, allow_empty=True)
    n = X.shape[0] // window
    return [X[i * window:(i + 1) * window] for i in range(n)]


def compare_methods(train_set, test_tamper_free, test_tampered, config: CompareConfig = CompareConfig()):
    """Score every test window with each method and summarise the ROC.

    Returns one :class:`MethodResult` per row: method 1, method 2 (with the
    first preset) and method 3 for every preset.
    """
    X_train = check_csi(train_set)
    neg = split_windows(test_tamper_free, config.window)
    pos = split_windows(test_tampered, config.window)
    if not neg or not pos:
        raise InsufficientDataError(
            f"each test set needs at least one full window of {config.window} frames"
        )
    windows = neg + pos
    labels = np.array([0] * len(neg) + [1] * len(pos))
    results = []

    logger.info("method 1 over %d windows", len(windows))
    stats = np.array([mean_pairwise_distance(X_train, w) for w in windows])
    results.append(_result("method1", stats, labels, Direction.HIGHER_IS_POSITIVE))

    for i, preset in enumerate(config.presets):
        dcae_cfg = DcaeConfig.preset(preset, X_train.shape[1])
        logger.info("training %s", preset)
        model, _ = train(build_dcae(dcae_cfg, config.seed),
                         train_set if isinstance(train_set, CsiDataset) else X_train,
                         TrainConfig(config.train.epochs, config.train.batch_size,
                                     config.train.learning_rate, config.seed, config.train.shuffle))
        if i == 0:
            e_off = reconstruction_errors(model, X_train)
            stats = np.array([mean_pairwise_distance(e_off, reconstruction_errors(model, w))
                              for w in windows])
            results.append(_result(f"method2-{preset}", stats, labels, Direction.HIGHER_IS_POSITIVE))
        profile = profile_from_model(model, X_train, config.bandwidth, config.window)
        stats = np.array([method3_statistic(profile, w) for w in windows])
        results.append(_result(f"method3-{preset}", stats, labels, Direction.LOWER_IS_POSITIVE))
    return results


def _result(name, stats, labels, direction):
    curve = roc_curve(stats, labels, direction)
    return MethodResult(name, auc(curve), tpr_at_zero_fpr(curve), curve, stats, labels)


def write_results_csv(results, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "auc", "tpr_at_fpr0"])
        for r in results:
            writer.writerow([r.method, f"{r.auc:.6f}", f"{r.tpr_at_fpr0:.6f}"])


def plot_roc_svg(results, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # fixed hash salt keeps SVG ids stable between runs
    matplotlib.rcParams["svg.hashsalt"] = "csitamper"
    fig, ax = plt.subplots(figsize=(5, 5))
    for r in results:
        ax.plot(r.curve.fpr, r.curve.tpr,
                label=f"{r.method} (AUC={r.auc:.3f})")
    ax.plot([0, 1], [0, 1], color="grey", linestyle=":", linewidth=0.8)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_xlim(-0.01, 1.01)
    ax.set_ylim(-0.01, 1.01)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)

"""Physical tamper detection from OFDM channel state information.

A convolutional autoencoder is trained on tamper-free CSI magnitudes; the
density of its per-frame anomaly scores is compared between an offline
reference and an online window with the overlapping index. Two distance
baselines, a synthetic channel simulator and ROC tooling are included.
"""

__version__ = "0.1.0"

from .channel_sim import Scenario, SimConfig, scenario_dataset, simulate_csi
from .csi import CsiDataset, Label, MinMaxNormalizer, load_dataset, save_dataset
from .dcae import DCAE, DcaeConfig, TrainConfig, build_dcae, train
from .density import fit_kde, overlapping_index
from .detectors import (
    Decision,
    DetectorProfile,
    DistanceDetector,
    ErrorDistanceDetector,
    OverlapDetector,
    Verdict,
    load_profile,
    method3_offline,
    method3_online,
    save_profile,
)
from .evaluation import auc, compare_methods, roc_curve, tpr_at_zero_fpr

__all__ = [
    "CsiDataset",
    "DCAE",
    "DcaeConfig",
    "Decision",
    "DetectorProfile",
    "DistanceDetector",
    "ErrorDistanceDetector",
    "Label",
    "MinMaxNormalizer",
    "OverlapDetector",
    "Scenario",
    "SimConfig",
    "TrainConfig",
    "Verdict",
    "auc",
    "build_dcae",
    "compare_methods",
    "fit_kde",
    "load_dataset",
    "load_profile",
    "method3_offline",
    "method3_online",
    "overlapping_index",
    "roc_curve",
    "save_dataset",
    "save_profile",
    "scenario_dataset",
    "simulate_csi",
    "tpr_at_zero_fpr",
    "train",
]

"""Acceptance gate: one test per criterion, each reported in the terminal summary.

The end-to-end experiment trains on 4000 tamper-free frames from scenarios
A, C and E and tests on 3000 held-out tamper-free frames (D, F, G) plus 3000
rotated frames (r1..r7, scenarios C..G), all in windows of 1000. Every test
scenario has movement level >= 0.6, so criteria 1-3 share one run.
"""

import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.integrate import trapezoid

from csitamper import nn
from csitamper.channel_sim import scenario_dataset
from csitamper.csi import CsiDataset, Label
from csitamper.dcae import DcaeConfig, TrainConfig, build_dcae, train
from csitamper.density import eval_pdf, fit_kde, overlapping_index
from csitamper.detectors import method1_statistic, method3_statistic, online_pdf, profile_from_model
from csitamper.evaluation import (
    CompareConfig,
    Direction,
    auc,
    compare_methods,
    roc_curve,
    split_windows,
)

from .conftest import criterion
from .helpers import (
    adam_reference,
    finite_difference_check,
    pairwise_mean_distance_loop,
    rank_auc,
    roc_bruteforce,
)

WINDOW = 1000
ROTATION_SCENARIOS = "CDEFG"


def _train_set():
    sizes = (1334, 1333, 1333)
    return CsiDataset.concatenate(
        [scenario_dataset(s, "default", n, seed=100 + i) for i, (s, n) in enumerate(zip("ACE", sizes))])


def _test_sets():
    clean = CsiDataset.concatenate(
        [scenario_dataset(s, "default", 1000, seed=200 + i) for i, s in enumerate("DFG")])
    sizes = (429, 429, 429, 429, 428, 428, 428)
    rotated = CsiDataset.concatenate(
        [scenario_dataset(ROTATION_SCENARIOS[(r - 1) % 5], f"r{r}", n, seed=300 + r)
         for r, n in zip(range(1, 8), sizes)],
        label=Label.UNKNOWN,
    )
    return clean, rotated


@pytest.fixture(scope="module")
def experiment():
    train_set = _train_set()
    clean, rotated = _test_sets()
    start = time.perf_counter()
    results = compare_methods(train_set, clean, rotated, CompareConfig(presets=("dcae1",), window=WINDOW))
    elapsed = time.perf_counter() - start
    rows = {r.method: r for r in results}
    for r in results:
        print(f"{r.method}: AUC {r.auc:.4f} TPR@FPR=0 {r.tpr_at_fpr0:.4f} stats {np.round(r.statistics, 4)}")
    return {"train": train_set, "clean": clean, "rotated": rotated, "rows": rows, "elapsed": elapsed}


def test_criterion_1_end_to_end(experiment):
    with criterion(1, "method 3 end-to-end AUC >= 0.95, TPR >= 0.90 at FPR = 0, <= 5 min") as c:
        m3 = experiment["rows"]["method3-dcae1"]
        c["text"] = f"AUC {m3.auc:.4f}, TPR@FPR0 {m3.tpr_at_fpr0:.4f}, {experiment['elapsed']:.0f} s"
        assert m3.labels.tolist() == [0, 0, 0, 1, 1, 1]
        assert m3.auc >= 0.95
        assert m3.tpr_at_fpr0 >= 0.90
        assert experiment["elapsed"] <= 300


def test_criterion_2_method_ordering(experiment):
    with criterion(2, "AUC(m3) >= AUC(m2) >= AUC(m1) - 0.02 at movement >= 0.6") as c:
        rows = experiment["rows"]
        a1, a2, a3 = (rows[k].auc for k in ("method1", "method2-dcae1", "method3-dcae1"))
        c["text"] = f"m1 {a1:.4f}, m2 {a2:.4f}, m3 {a3:.4f}"
        assert a3 >= a2 >= a1 - 0.02


def test_criterion_3_dcae2_close_to_dcae1(experiment):
    with criterion(3, "|AUC(DCAE2) - AUC(DCAE1)| <= 0.05") as c:
        X = experiment["train"]
        model, _ = train(build_dcae(DcaeConfig.preset("dcae2", X.sc), 0), X, TrainConfig())
        profile = profile_from_model(model, X, window_n_on=WINDOW)
        windows = split_windows(experiment["clean"], WINDOW) + split_windows(experiment["rotated"], WINDOW)
        labels = [0] * 3 + [1] * 3
        stats = [method3_statistic(profile, w) for w in windows]
        a2 = auc(roc_curve(stats, labels, Direction.LOWER_IS_POSITIVE))
        a1 = experiment["rows"]["method3-dcae1"].auc
        c["text"] = f"DCAE1 {a1:.4f}, DCAE2 {a2:.4f}"
        assert abs(a2 - a1) <= 0.05


def test_criterion_4_gradients():
    with criterion(4, "backprop vs central differences < 1e-4 over 20 networks") as c:
        worst = max(finite_difference_check(seed) for seed in range(20))
        c["text"] = f"max relative error {worst:.2e}"
        assert worst < 1e-4


def test_criterion_5_adam():
    with criterion(5, "Adam matches the scalar reference over 10 steps to 1e-9") as c:
        grads = [1.0, -0.5, 2.0, 0.0, 0.3, -1.2, 0.7, 0.7, -3.0, 0.05]
        p = [np.array([1.0])]
        state = nn.AdamState()
        trace = []
        for g in grads:
            nn.adam_update(p, [np.array([g])], state)
            trace.append(float(p[0][0]))
        ref = adam_reference(1.0, grads)
        err = max(abs(a - b) for a, b in zip(trace, ref))
        c["text"] = f"first step {trace[0]:.9f}, max deviation {err:.1e}"
        assert abs(trace[0] - 0.999) < 1e-9
        assert err < 1e-9 and state.t == 10


def test_criterion_6_kde_suite(experiment):
    with criterion(6, "KDE mass, self-overlap, symmetry, disjointness, grid doubling") as c:
        rng = np.random.default_rng(6)
        pdfs = [fit_kde(rng.normal(rng.uniform(-5, 5), rng.uniform(0.1, 3), rng.integers(1, 200)), bw)
                for bw in (1.0, "auto", 0.3, 2.5) for _ in range(5)]
        # the densities of the real experiment: offline scores and every test window
        X = experiment["train"]
        model, _ = train(build_dcae(DcaeConfig.preset("dcae1", X.sc), 0), X.head(1000),
                         TrainConfig(epochs=2))
        profile = profile_from_model(model, X.head(1000), window_n_on=WINDOW)
        window_pdfs = [online_pdf(profile, w) for w in
                       split_windows(experiment["clean"], WINDOW) + split_windows(experiment["rotated"], WINDOW)]
        pdfs += [profile.offline_pdf] + window_pdfs
        masses = []
        for pdf in pdfs:
            lo = pdf.samples.min() - 5 * pdf.bandwidth
            hi = pdf.samples.max() + 5 * pdf.bandwidth
            grid = np.linspace(lo, hi, 20001)
            masses.append(float(trapezoid(eval_pdf(pdf, grid), grid)))
        self_eta = [overlapping_index(p, p) for p in pdfs]
        pairs = [(pdfs[i], pdfs[j]) for i in range(len(pdfs)) for j in range(i + 1, len(pdfs))]
        asym = max(abs(overlapping_index(p, q) - overlapping_index(q, p)) for p, q in pairs)
        doubling = max(abs(overlapping_index(profile.offline_pdf, q, 2048)
                           - overlapping_index(profile.offline_pdf, q, 4096)) for q in window_pdfs)
        doubling = max([doubling] + [abs(overlapping_index(p, q, 2048) - overlapping_index(p, q, 4096))
                                     for p, q in pairs[:60]])
        disjoint = overlapping_index(fit_kde(rng.normal(0, 1, 100), 1.0), fit_kde(rng.normal(1000, 1, 100), 1.0))
        c["text"] = (f"mass in [{min(masses):.5f}, {max(masses):.5f}], min self-eta {min(self_eta):.5f}, "
                     f"asymmetry {asym:.1e}, disjoint {disjoint:.1e}, grid doubling {doubling:.1e}")
        assert all(0.999 <= m <= 1.001 for m in masses)
        assert min(self_eta) >= 0.999
        assert asym == 0.0
        assert disjoint < 1e-6
        assert doubling < 1e-4


def test_criterion_7_roc_oracles():
    with criterion(7, "trapezoid AUC = rank AUC (100 cases, 1e-9); ROC = brute force (10 cases)") as c:
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(100):
            n = int(rng.integers(2, 200))
            stats = rng.permutation(n) + rng.random()  # distinct values
            labels = rng.integers(0, 2, n)
            labels[:2] = [0, 1]
            worst = max(worst, abs(auc(roc_curve(stats, labels)) - rank_auc(stats, labels)))
        exact = 0
        for _ in range(10):
            stats = rng.integers(0, 5, 8).astype(float)
            labels = rng.integers(0, 2, 8)
            labels[:2] = [1, 0]
            curve = roc_curve(stats, labels)
            exact += curve.points == roc_bruteforce(stats, labels, curve.thresholds)
        c["text"] = f"max AUC deviation {worst:.1e}, {exact}/10 curves exact"
        assert worst < 1e-9
        assert exact == 10


def _pipeline(tmp, tag):
    run = [sys.executable, "-m", "csitamper"]
    off, win, prof = tmp / f"off_{tag}.csid", tmp / f"win_{tag}.csid", tmp / f"prof_{tag}.tprf"
    subprocess.run(run + ["simulate", "--scenario", "C", "--frames", "600", "--seed", "5", "-o", str(off)],
                   check=True, capture_output=True)
    subprocess.run(run + ["simulate", "--scenario", "D", "--orientation", "r2", "--frames", "200",
                          "--seed", "6", "-o", str(win)], check=True, capture_output=True)
    subprocess.run(run + ["train", str(off), "--epochs", "2", "--window", "200", "--seed", "3", "-o", str(prof)],
                   check=True, capture_output=True)
    detect = subprocess.run(run + ["detect", str(win), "--profile", str(prof)], capture_output=True, text=True)
    return prof.read_bytes(), detect.returncode, detect.stdout


def test_criterion_8_determinism(tmp_path):
    with criterion(8, "simulate -> train -> detect twice gives identical profiles and verdicts") as c:
        first = _pipeline(tmp_path, "a")
        second = _pipeline(tmp_path, "b")
        c["text"] = f"profile {len(first[0])} bytes, exit codes {first[1]}/{second[1]}"
        assert first[0] == second[0]
        assert first[1:] == second[1:]
        assert first[1] in (0, 2)


def test_criterion_9_method1_oracle():
    with criterion(9, "method-1 statistic equals the double-loop oracle to 1e-9") as c:
        rng = np.random.default_rng(9)
        worst = 0.0
        for n_off, n_on, sc in ((20, 30, 8), (1, 1, 3), (50, 7, 200), (13, 40, 16)):
            a, b = rng.random((n_off, sc)) * 3, rng.random((n_on, sc)) * 3
            worst = max(worst, abs(method1_statistic(a, b) - pairwise_mean_distance_loop(a.tolist(), b.tolist())))
        c["text"] = f"max deviation {worst:.1e}"
        assert worst < 1e-9

"""Independent oracles shared by unit and acceptance tests."""

import numpy as np

from csitamper import nn


def tiny_autoencoder(seed, sc=16, dtype=np.float64):
    """Two conv blocks each way around a pooled latent, then a sigmoid dense."""
    rng = np.random.default_rng(seed)
    return nn.Sequential([
        nn.Conv1D(1, 3, 5, "relu", rng, dtype),
        nn.MaxPool1D(2),
        nn.Conv1D(3, 2, 3, "relu", rng, dtype),
        nn.MaxPool1D(2),
        nn.Conv1D(2, 2, 3, "relu", rng, dtype),
        nn.UpSample1D(2, sc // 2),
        nn.Conv1D(2, 3, 5, "relu", rng, dtype),
        nn.UpSample1D(2, sc),
        nn.Flatten(),
        nn.Dense(3 * sc, sc, "sigmoid", rng, dtype),
    ])


def _loss(net, x, t):
    out = net.forward(x)
    return np.mean((out - t) ** 2)


def _pattern(net):
    """ReLU on/off masks and pooling argmaxes of the last forward pass."""
    parts = []
    for layer in net.layers:
        if isinstance(layer, nn.Conv1D) and layer.activation == "relu":
            parts.append((layer._cache[1] > 0).tobytes())
        elif isinstance(layer, nn.MaxPool1D):
            parts.append(layer._cache[0].tobytes())
    return b"".join(parts)


def finite_difference_check(seed, h=1e-4, sc=16, batch=2):
    """Max relative error between backprop and central differences.

    Relative error per entry is ``|a - n| / max(|a|, |n|, 1e-7)``; the floor
    keeps entries whose true gradient is ~0 from dividing noise by noise.
    When a +-h probe flips a ReLU or a pooling argmax the loss is not
    differentiable across the interval, so that entry is re-probed with a
    step ten times smaller until the activation pattern is stable.
    """
    rng = np.random.default_rng(1000 + seed)
    net = tiny_autoencoder(seed, sc)
    for p in net.params:
        if p.ndim == 1:
            p[...] = rng.normal(scale=0.1, size=p.shape)
    x = rng.random((batch, 1, sc))
    t = rng.random((batch, sc))
    net.forward(x)
    base = _pattern(net)
    analytic = net.backward(t)
    worst = 0.0
    for p, g in zip(net.params, analytic):
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            step = h
            while True:
                flat[i] = orig + step
                up = _loss(net, x, t)
                stable = _pattern(net) == base
                flat[i] = orig - step
                down = _loss(net, x, t)
                stable = stable and _pattern(net) == base
                flat[i] = orig
                if stable or step < 1e-7:
                    break
                step /= 10
            numeric = (up - down) / (2 * step)
            denom = max(abs(gflat[i]), abs(numeric), 1e-7)
            worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst


def adam_reference(p0, grads, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
    """Scalar Adam trace written out longhand."""
    p, m, v, trace = p0, 0.0, 0.0, []
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        p = p - lr * m_hat / (v_hat**0.5 + eps)
        trace.append(p)
    return trace


def pairwise_mean_distance_loop(a, b):
    total = 0.0
    for i in range(len(a)):
        for j in range(len(b)):
            total += sum((a[i][k] - b[j][k]) ** 2 for k in range(len(a[i]))) ** 0.5
    return total / (len(a) * len(b))


def roc_bruteforce(stats, labels, thresholds, higher_is_positive=True):
    """(fpr, tpr) per threshold by direct counting."""
    pos = sum(1 for l in labels if l)
    neg = len(labels) - pos
    pts = []
    for thr in thresholds:
        tp = fp = 0
        for s, l in zip(stats, labels):
            flagged = s > thr if higher_is_positive else s < thr
            if flagged and l:
                tp += 1
            elif flagged:
                fp += 1
        pts.append((fp / neg, tp / pos))
    return pts


def rank_auc(stats, labels):
    """Mann-Whitney AUC from the rank sum of the positives (average ranks for ties)."""
    from scipy.stats import rankdata

    labels = np.asarray(labels, dtype=bool)
    ranks = rankdata(np.asarray(stats, dtype=np.float64))
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)

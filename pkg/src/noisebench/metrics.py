"""Outcome-distribution metrics: total variation distance, its shot-noise
propagation, application accuracies, and exponential decay fits."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .sim import Counts, Distribution, as_distribution


def tvd(h: Distribution | Counts, m: Distribution | Counts) -> float:
    """Total variation distance (1/2) sum_k |r_H(k) - r_M(k)|.

    Counts are normalized to probabilities first; both inputs must describe
    the same measurement register.
    """
    hd, md = as_distribution(h), as_distribution(m)
    if hd.n_bits != md.n_bits:
        raise ValueError(f"register mismatch: {hd.n_bits} vs {md.n_bits} bits")
    keys = set(hd.probs) | set(md.probs)
    return 0.5 * math.fsum(abs(hd.prob(k) - md.prob(k)) for k in keys)


def _variance_sum(counts: Counts, keys: set[str]) -> float:
    if counts.shots == 0:
        raise ValueError("zero shots")
    total = 0.0
    for k in keys:
        p = counts.counts.get(k, 0) / counts.shots
        total += p * (1 - p) / counts.shots
    return total


def tvd_error(h: Counts, m: Counts, model_exact: bool = False) -> float:
    """Shot-noise propagation for the TVD: (1/2) sqrt(sum of delta^2), with
    delta = sqrt(p(1-p)/N) for every state of both distributions.

    With ``model_exact`` the second argument contributes no variance (it is
    an exact model distribution rather than sampled data).
    """
    keys = set(h.counts) | set(m.counts)
    total = _variance_sum(h, keys)
    if not model_exact:
        total += _variance_sum(m, keys)
    return 0.5 * math.sqrt(total)


def bv_accuracy(counts: Counts, secret: str) -> float:
    """Fraction of shots that returned the encoded secret string."""
    if counts.n_bits != len(secret):
        raise ValueError(f"register of {counts.n_bits} bits cannot encode {secret!r}")
    return counts.counts.get(secret, 0) / counts.shots


def ghz_expected_rate(counts: Counts, n: int) -> float:
    """Fraction of shots in the all-zero or all-one state."""
    if counts.n_bits != n:
        raise ValueError(f"register has {counts.n_bits} bits, expected {n}")
    return (counts.counts.get("0" * n, 0) + counts.counts.get("1" * n, 0)) / counts.shots


def fit_exp_decay(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float, float]:
    """Fit y = a * exp(b x) by least squares on log y; returns (a, b, R^2).

    R^2 is computed in log space.  Rejects nonpositive y values.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 2:
        raise ValueError("need at least two points")
    if np.any(ys <= 0):
        raise ValueError("nonpositive y value; an exponential cannot fit it")
    logy = np.log(ys)
    b, loga = np.polyfit(xs, logy, 1)
    pred = loga + b * xs
    ss_res = float(np.sum((logy - pred) ** 2))
    ss_tot = float(np.sum((logy - logy.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(np.exp(loga)), float(b), r2


def format_decay(a: float, b: float, r2: float) -> str:
    """Human-readable decay summary, e.g. '1.112e^(-0.0834x) with R^2=0.989'."""
    return f"{a:.4g}e^({b:.4g}x) with R^2={r2:.3g}"

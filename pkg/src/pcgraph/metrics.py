"""Set and signal error measures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EvalReport:
    f1: float
    hamming: int
    nmse: float | None = None


def hamming(c_hat, c) -> int:
    """Size of the symmetric difference."""
    return len(set(c_hat) ^ set(c))


def f1(c_hat, c) -> float:
    """``2 |C & C_hat| / (|C| + |C_hat|)``; 0 when the estimate is empty."""
    c_hat, c = set(c_hat), set(c)
    if not c:
        raise ValueError("ground-truth set must be nonempty")
    if not c_hat:
        return 0.0
    return 2.0 * len(c & c_hat) / (len(c) + len(c_hat))


def nmse(x_hat, x) -> float:
    x_hat = np.asarray(x_hat, dtype=float)
    x = np.asarray(x, dtype=float)
    denom = float(x @ x)
    if denom == 0:
        raise ValueError("reference signal has zero norm")
    d = x_hat - x
    return float(d @ d) / denom


def evaluate(c_hat, c, x_hat=None, x=None) -> EvalReport:
    return EvalReport(
        f1(c_hat, c),
        hamming(c_hat, c),
        None if x is None else nmse(x_hat, x),
    )

"""Multi-chain convergence diagnostics used as acceptance gates.

Implements the classical potential scale reduction factor (Gelman-Rubin)
per marginal, without chain splitting, plus a simple batch-means effective
sample size.  The conventional pass gate is PSRF < 1.1 on every marginal.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ZeroVariance

PSRF_GATE = 1.1


@dataclass(frozen=True)
class ChainSet:
    """m chains of n samples in d coordinates, with provenance."""

    samples: np.ndarray               # (m, n, d)
    seeds: tuple = ()
    walk_params: dict = field(default_factory=dict)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 3:
            raise ValueError("samples must have shape (chains, draws, dim)")
        m, n, _ = s.shape
        if m < 2:
            raise ValueError("need at least two chains")
        if n < 10:
            raise ValueError("need at least ten draws per chain")
        object.__setattr__(self, "samples", s)


def psrf(chains: ChainSet | np.ndarray) -> np.ndarray:
    """Potential scale reduction factor per coordinate.

    With m chains of length n: W is the mean within-chain variance, B/n the
    variance of chain means, and the pooled estimate is
    ``V = (n-1)/n W + B/n``; the statistic is sqrt(V / W).  Raises
    ZeroVariance when any coordinate is constant within every chain.
    """
    s = chains.samples if isinstance(chains, ChainSet) else ChainSet(np.asarray(chains)).samples
    m, n, d = s.shape
    chain_means = s.mean(axis=1)                       # (m, d)
    within = s.var(axis=1, ddof=1).mean(axis=0)        # (d,)
    if np.any(within == 0.0):
        bad = int(np.argmin(within))
        raise ZeroVariance(f"coordinate {bad} is constant within every chain")
    b_over_n = chain_means.var(axis=0, ddof=1)         # B/n
    pooled = (n - 1) / n * within + b_over_n
    return np.sqrt(pooled / within)


def ess_batch_means(x: np.ndarray, n_batches: int = 20) -> float:
    """Effective sample size of one scalar chain via batch means."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    k = max(2, min(n_batches, n // 2))
    usable = (n // k) * k
    batches = x[:usable].reshape(k, -1).mean(axis=1)
    var_batch = batches.var(ddof=1)
    var_all = x.var(ddof=1)
    if var_batch == 0.0:
        return float(n)
    return float(n * var_all / (var_batch * (usable // k)))


def summarize(counters: dict) -> dict:
    """JSON-ready walk-counter report with the derived violation rate."""
    steps = int(counters.get("steps", 0))
    violations = int(counters.get("budget_violations", 0))
    return {
        "steps": steps,
        "boundary_failures": int(counters.get("boundary_failures", 0)),
        "budget_violations": violations,
        "reflections": int(counters.get("reflections", 0)),
        "violation_rate": violations / steps if steps else 0.0,
    }

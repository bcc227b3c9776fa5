"""Importance-sampled Monte-Carlo integration of complex integrands on R^d.

Samples are drawn from a multivariate normal proposal.  The work is split
into one independent stream per worker, spawned from a single
:class:`numpy.random.SeedSequence`, so a fixed ``(seed, workers)`` pair gives
bit-identical results regardless of thread scheduling.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

Integrand = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class MCEstimate:
    value: complex
    stderr: float
    samples: int

    def agrees_with(self, exact: complex, n_sigma: float = 3.0) -> bool:
        return abs(self.value - exact) <= n_sigma * self.stderr

    @property
    def relative_error(self) -> float:
        return self.stderr / abs(self.value) if self.value != 0 else np.inf


def _worker_sums(func, mean, chol, logq_const, n, seq, chunk):
    rng = np.random.default_rng(seq)
    d = mean.size
    s1 = 0.0 + 0.0j
    s2 = 0.0
    done = 0
    while done < n:
        m = min(chunk, n - done)
        z = rng.standard_normal((m, d))
        x = mean + z @ chol.T
        logq = logq_const - 0.5 * np.sum(z * z, axis=1)
        w = func(x) * np.exp(-logq)
        s1 += w.sum()
        s2 += np.sum(np.abs(w) ** 2)
        done += m
    return s1, s2


def integrate(func: Integrand, mean, cov, samples: int = 10**6, seed: int = 0,
              workers: int = 1, chunk: int = 2**18) -> MCEstimate:
    """Estimate the integral of ``func`` over R^d with a N(mean, cov) proposal.

    ``func`` maps an ``(N, d)`` array of points to ``N`` complex values.  The
    proposal must have heavier tails than ``|func|`` for a finite variance.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    d = mean.size
    chol = np.linalg.cholesky(cov)
    logq_const = -0.5 * d * np.log(2 * np.pi) - np.sum(np.log(np.diag(chol)))
    counts = [samples // workers + (1 if k < samples % workers else 0) for k in range(workers)]
    seqs = np.random.SeedSequence(seed).spawn(workers)
    args = [(func, mean, chol, logq_const, counts[k], seqs[k], chunk) for k in range(workers)]
    if workers == 1:
        results = [_worker_sums(*args[0])]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda a: _worker_sums(*a), args))
    # reduce in worker order so the float sums do not depend on completion order
    s1 = sum(r[0] for r in results)
    s2 = sum(r[1] for r in results)
    mean_w = s1 / samples
    var = max(s2 / samples - abs(mean_w) ** 2, 0.0)
    return MCEstimate(complex(mean_w), float(np.sqrt(var / samples)), samples)


def adaptive_integrate(func: Integrand, mean, cov, samples: int = 10**6, seed: int = 0,
                       workers: int = 1, pilot: int = 2**16, inflate: float = 1.5) -> MCEstimate:
    """Two-stage estimate: a pilot run fits the proposal to ``|func|``.

    The pilot draws from N(mean, cov); the weighted first and second moments
    of ``|func|`` then define the main proposal, widened by ``inflate`` so its
    tails dominate the integrand.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7919]))
    x = rng.multivariate_normal(mean, cov, size=pilot)
    diff = x - mean
    logq = -0.5 * np.einsum("ni,ij,nj->n", diff, np.linalg.inv(cov), diff)
    w = np.abs(func(x)) * np.exp(-logq + logq.max())
    if not np.any(w > 0):
        return integrate(func, mean, cov, samples, seed, workers)
    w = w / w.sum()
    m = w @ x
    C = (x - m).T @ ((x - m) * w[:, None])
    C = 0.5 * (C + C.T) * inflate + 1e-12 * np.trace(C) * np.eye(mean.size)
    return integrate(func, m, C, samples, seed, workers)

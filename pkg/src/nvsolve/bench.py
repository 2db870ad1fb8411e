"""Timing harness and rank-based confidence intervals for runtime ratios.

For candidate timings ``o`` and baseline timings ``c``, the interval for the
ratio is the set of factors gamma for which a two-sided Mann-Whitney test
does not reject equal location of ``gamma * c`` and ``o``.
"""

from __future__ import annotations

import itertools
import math
import shlex
import statistics
import subprocess
import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import IllegalInputError

DEFAULT_LEVEL = 0.995
# total sample counts below this use the exact permutation distribution
EXACT_LIMIT = 16


def time_repeated(task: Callable[[], object], reps: int, trials: int) -> list[float]:
    """Wall-clock seconds of ``reps`` back-to-back calls, measured ``trials`` times."""
    if reps < 1 or trials < 1:
        raise IllegalInputError("reps and trials must be at least 1")
    samples = [0.0] * trials
    clock = time.perf_counter
    for k in range(trials):
        start = clock()
        for _ in range(reps):
            task()
        samples[k] = clock() - start
    return samples


def command_task(cmd: str) -> Callable[[], None]:
    """A task that runs ``cmd`` as a child process and fails if it fails."""
    argv = shlex.split(cmd)

    def run():
        subprocess.run(argv, check=True, stdout=subprocess.DEVNULL)

    return run


def midranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks, tied values sharing the mean of their positions."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="mergesort")
    ranks = np.empty(v.size)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


@lru_cache(maxsize=64)
def _subsets(n: int, k: int) -> np.ndarray:
    return np.array(list(itertools.combinations(range(n), k)), dtype=np.intp).reshape(-1, k)


def rank_sum_pvalue(x: Sequence[float], y: Sequence[float]) -> float:
    """Two-sided p-value of the rank-sum test of ``x`` against ``y``."""
    nx, ny = len(x), len(y)
    if nx == 0 or ny == 0:
        raise IllegalInputError("both samples must be nonempty")
    n = nx + ny
    ranks = midranks(list(x) + list(y))
    w = ranks[:nx].sum()
    mean = nx * (n + 1) / 2.0
    if n < EXACT_LIMIT:
        sums = ranks[_subsets(n, nx)].sum(axis=1)
        dev = abs(w - mean)
        extreme = np.abs(sums - mean) >= dev - 1e-9
        return float(extreme.mean())
    _, counts = np.unique(ranks, return_counts=True)
    ties = float(np.sum(counts ** 3 - counts))
    var = nx * ny / 12.0 * ((n + 1) - ties / (n * (n - 1)))
    if var <= 0.0:
        return 1.0
    z = max(abs(w - mean) - 0.5, 0.0) / math.sqrt(var)
    return math.erfc(z / math.sqrt(2.0))


def mann_whitney_reject(x: Sequence[float], y: Sequence[float], level: float = DEFAULT_LEVEL) -> bool:
    """True when the two-sided test rejects at confidence ``level``."""
    if not 0.0 < level < 1.0:
        raise IllegalInputError("level must lie in (0, 1)")
    return rank_sum_pvalue(x, y) <= 1.0 - level


@dataclass(frozen=True)
class RatioCI:
    lo: float
    hi: float
    level: float
    median_ratio: float

    def __contains__(self, gamma: float) -> bool:
        return self.lo <= gamma <= self.hi


def _check_samples(s, name):
    a = np.asarray(s, dtype=float)
    if a.size == 0 or not np.all(np.isfinite(a)) or np.any(a <= 0.0):
        raise IllegalInputError(f"{name} must be nonempty, finite and positive")
    return a


def ratio_confidence_interval(o_samples: Sequence[float], c_samples: Sequence[float],
                              level: float = DEFAULT_LEVEL) -> RatioCI:
    """Confidence interval for the ratio of candidate to baseline running time.

    The acceptance set can only change where some ``gamma * c_j`` crosses an
    ``o_i``, so it is scanned over the sorted ratios ``o_i / c_j``, the
    midpoints between them, and one point beyond each end. The bounds are
    the infimum and supremum of the accepted set; 0 and infinity mean it is
    unbounded on that side.
    """
    o = _check_samples(o_samples, "o_samples")
    c = _check_samples(c_samples, "c_samples")
    cands = np.unique(np.divide.outer(o, c).ravel())

    def accepted(g):
        return not mann_whitney_reject(g * c, o, level)

    probes = [(cands[0] * 0.5, None)]
    for k, r in enumerate(cands):
        probes.append((r, k))
        if k + 1 < cands.size:
            probes.append((0.5 * (r + cands[k + 1]), k))
    probes.append((cands[-1] * 2.0, None))
    flags = [accepted(g) for g, _ in probes]
    median_ratio = statistics.median(o) / statistics.median(c)
    if not any(flags):
        return RatioCI(math.nan, math.nan, level, median_ratio)
    first = flags.index(True)
    last = len(flags) - 1 - flags[::-1].index(True)
    lo = 0.0 if first == 0 else float(cands[probes[first][1]])
    if last == len(probes) - 1:
        hi = math.inf
    else:
        g, k = probes[last]
        hi = float(g) if g == cands[k] else float(cands[k + 1])
    return RatioCI(lo, hi, level, median_ratio)

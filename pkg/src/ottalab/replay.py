"""Prioritized-sampling math for dual-objective replay.

Contents: a sum tree, the Curious-Replay count-plus-loss priority, thresholded
and inverse TD-error priorities, the Huber loss, lambda-returns and TD errors,
min-k / max-k sub-batching for the actor and critic, and a replay buffer that
blends uniform with Curious-Replay sampling.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, UsageError


class SumTree:
    """Binary sum tree over ``capacity`` non-negative leaf priorities.

    Stored as a flat array of length ``2 * size`` (``size`` is the next power
    of two); node ``i`` has children ``2i`` and ``2i + 1`` and the root is 1.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigurationError("capacity must be >= 1")
        self.capacity = capacity
        self.size = 1 << (capacity - 1).bit_length()
        self.tree = np.zeros(2 * self.size)

    @property
    def total(self) -> float:
        return float(self.tree[1])

    def __getitem__(self, i: int) -> float:
        return float(self.tree[self.size + i])

    def leaves(self) -> np.ndarray:
        return self.tree[self.size:self.size + self.capacity].copy()

    def update(self, i: int, priority: float) -> None:
        if not 0 <= i < self.capacity:
            raise IndexError(i)
        if not priority >= 0 or not np.isfinite(priority):
            raise UsageError(f"priority must be finite and >= 0, got {priority}")
        tree = self.tree
        j = self.size + i
        tree[j] = priority
        j >>= 1
        while j:
            # recompute from children so rounding error never accumulates
            tree[j] = tree[2 * j] + tree[2 * j + 1]
            j >>= 1

    def sample(self, u: float) -> int:
        """Leaf whose cumulative-priority interval ``[lo, hi)`` contains ``u``."""
        tree = self.tree
        if tree[1] <= 0:
            raise UsageError("cannot sample from an empty sum tree")
        u = min(max(u, 0.0), np.nextafter(tree[1], 0.0))
        j = 1
        while j < self.size:
            left = 2 * j
            if u < tree[left]:
                j = left
            else:
                u -= tree[left]
                j = left + 1
        i = j - self.size
        if tree[j] <= 0:
            # float round-off pushed us onto an empty leaf; fall back to the last positive one
            nz = np.flatnonzero(self.tree[self.size:self.size + i + 1] > 0)
            i = int(nz[-1]) if len(nz) else int(np.flatnonzero(self.tree[self.size:] > 0)[0])
        return i


def sumtree_sample(tree: SumTree, u: float) -> int:
    return tree.sample(u)


# -- priorities ---------------------------------------------------------------

@dataclass(frozen=True)
class CRParams:
    """Curious-Replay constants. Defaults are implementation choices."""

    c: float = 1e4
    beta: float = 0.7
    eps: float = 0.1
    alpha: float = 0.7

    def __post_init__(self):
        if self.c <= 0 or not 0 < self.beta < 1 or self.eps < 0 or self.alpha <= 0:
            raise ConfigurationError(f"invalid Curious-Replay parameters {self}")


def cr_priority(visits, loss, p: CRParams = CRParams()):
    """``c * beta**visits + (|loss| + eps)**alpha``; works elementwise on arrays."""
    return p.c * np.power(p.beta, visits) + np.power(np.abs(loss) + p.eps, p.alpha)


def _thresholded(deltas, alpha: float) -> np.ndarray:
    d = np.asarray(deltas, dtype=float)
    if d.size == 0:
        raise UsageError("priority of an empty list")
    return np.maximum(np.abs(d) ** alpha, 1.0)


def per_priority(deltas: Sequence[float], alpha: float = 1.0) -> np.ndarray:
    """Normalized ``max(|delta|**alpha, 1)`` weights."""
    w = _thresholded(deltas, alpha)
    return w / w.sum()


def iper_priority(deltas: Sequence[float], alpha: float = 1.0) -> np.ndarray:
    """Normalized reciprocal of the thresholded TD priority."""
    w = 1.0 / _thresholded(deltas, alpha)
    return w / w.sum()


def huber(delta):
    """Quadratic within ``|delta| <= 1``, linear outside."""
    a = np.abs(delta)
    out = np.where(a <= 1.0, 0.5 * np.square(delta), a - 0.5)
    return float(out) if np.ndim(out) == 0 else out


def huber_grad(delta):
    out = np.clip(delta, -1.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


# -- returns ------------------------------------------------------------------

def lambda_return(rewards: Sequence[float], values: Sequence[float], discounts, lam: float) -> np.ndarray:
    """Backward lambda-return recursion.

    ``rewards`` has length H, ``values`` length H + 1 (the last entry is the
    bootstrap value) and ``discounts`` is a scalar or length H. Returns H + 1
    entries: ``V_0 .. V_{H-1}`` followed by the tail ``V_H = values[H]``.
    """
    r = np.asarray(rewards, dtype=float)
    v = np.asarray(values, dtype=float)
    H = len(r)
    if len(v) != H + 1:
        raise UsageError(f"need {H + 1} values for {H} rewards, got {len(v)}")
    g = np.broadcast_to(np.asarray(discounts, dtype=float), (H,)) if np.ndim(discounts) == 0 else np.asarray(discounts, dtype=float)
    if len(g) != H:
        raise UsageError(f"need {H} discounts, got {len(g)}")
    if not 0.0 <= lam <= 1.0:
        raise UsageError("lambda must lie in [0, 1]")
    out = np.empty(H + 1)
    out[H] = v[H]
    for t in range(H - 1, -1, -1):
        out[t] = r[t] + g[t] * ((1.0 - lam) * v[t + 1] + lam * out[t + 1])
    return out


def td_errors(returns: Sequence[float], values: Sequence[float]) -> np.ndarray:
    """``values - returns`` elementwise (the critic's regression error)."""
    R = np.asarray(returns, dtype=float)
    v = np.asarray(values, dtype=float)
    if R.shape != v.shape:
        raise UsageError(f"length mismatch: {R.shape} vs {v.shape}")
    return v - R


# -- dual-objective sub-batching ----------------------------------------------

@dataclass(frozen=True)
class DopsParams:
    overlap: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.overlap <= 1.0:
            raise ConfigurationError("overlap W must lie in [0, 1]")

    @property
    def k(self) -> float:
        return 1.0 / (2.0 - self.overlap)


def subbatch_size(n: int, overlap: float) -> int:
    """``round(n / (2 - W))`` with halves rounded up."""
    return int(np.floor(n * DopsParams(overlap).k + 0.5))


def dops_subsample(deltas: Sequence[float], overlap: float, alpha: float = 1.0):
    """Split a batch into actor and critic index sets.

    Items are ordered by thresholded TD priority, ties by position. The actor
    gets the ``m`` lowest-priority items and the critic the ``m`` highest,
    with ``m = round(N / (2 - W))``; the sets share ``2m - N`` items.
    """
    prio = _thresholded(deltas, alpha)
    n = len(prio)
    m = subbatch_size(n, overlap)
    order = np.lexsort((np.arange(n), prio))
    return np.sort(order[:m]), np.sort(order[n - m:])


# -- replay buffer ------------------------------------------------------------

class ReplayBuffer:
    """Ring buffer with blended uniform / Curious-Replay sampling.

    Args:
        capacity: maximum number of stored items.
        uniform_fraction: share of each batch drawn uniformly (default 0.2).
        new_item_priority: ``"max"`` inserts at the largest priority seen so
            far; ``"count"`` inserts at the Curious-Replay value for zero
            visits and the stored initial loss.
    """

    def __init__(self, capacity: int, cr: CRParams = CRParams(), uniform_fraction: float = 0.2,
                 new_item_priority: str = "max"):
        if not 0.0 <= uniform_fraction <= 1.0:
            raise ConfigurationError("uniform_fraction must lie in [0, 1]")
        if new_item_priority not in ("max", "count"):
            raise ConfigurationError("new_item_priority must be 'max' or 'count'")
        self.capacity = capacity
        self.cr = cr
        self.uniform_fraction = uniform_fraction
        self.new_item_priority = new_item_priority
        self.tree = SumTree(capacity)
        self.items: list[Any] = [None] * capacity
        self.visits = np.zeros(capacity, dtype=np.int64)
        self.losses = np.zeros(capacity)
        self.max_priority = float(cr_priority(0, 0.0, cr))
        self.size = 0
        self._next = 0

    def __len__(self):
        return self.size

    def add(self, item, loss: float = 0.0) -> int:
        i = self._next
        self.items[i] = item
        self.visits[i] = 0
        self.losses[i] = loss
        p = cr_priority(0, loss, self.cr)
        if self.new_item_priority == "max":
            p = max(p, self.max_priority)
        self.tree.update(i, float(p))
        self.max_priority = max(self.max_priority, float(p))
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        return i

    def probabilities(self) -> np.ndarray:
        """Analytic per-item sampling probability of one draw."""
        n = self.size
        pri = self.tree.leaves()[:n]
        return self.uniform_fraction / n + (1.0 - self.uniform_fraction) * pri / pri.sum()

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Sample ``n`` indices without touching visit counts."""
        if self.size == 0:
            raise UsageError("cannot sample from an empty buffer")
        out = np.empty(n, dtype=np.int64)
        uniform = rng.random(n) < self.uniform_fraction
        total = self.tree.total
        for j in range(n):
            if uniform[j]:
                out[j] = rng.integers(self.size)
            else:
                out[j] = self.tree.sample(rng.random() * total)
        return out

    def sample(self, n: int, rng: np.random.Generator):
        """Sample ``n`` items, counting each draw as a visit."""
        idx = self.draw(n, rng)
        for i in idx:
            self.visits[i] += 1
            self._refresh(int(i))
        return idx, [self.items[i] for i in idx]

    def update_losses(self, idx: Sequence[int], losses: Sequence[float]) -> None:
        for i, loss in zip(idx, losses):
            self.losses[i] = loss
            self._refresh(int(i))

    def _refresh(self, i: int) -> None:
        p = float(cr_priority(self.visits[i], self.losses[i], self.cr))
        self.tree.update(i, p)
        self.max_priority = max(self.max_priority, p)


def bench(n_items: int = 10_000, n_ops: int = 50_000, batch: int = 64, seed: int = 0) -> dict:
    """Sample / update throughput of :class:`ReplayBuffer` (operations per second)."""
    rng = np.random.default_rng(seed)
    buf = ReplayBuffer(n_items)
    t0 = time.perf_counter()
    for i in range(n_items):
        buf.add(i, float(rng.random()))
    t_add = time.perf_counter() - t0
    t0 = time.perf_counter()
    done = 0
    while done < n_ops:
        idx, _ = buf.sample(batch, rng)
        done += batch
    t_sample = time.perf_counter() - t0
    t0 = time.perf_counter()
    for start in range(0, n_ops, batch):
        idx = rng.integers(n_items, size=batch)
        buf.update_losses(idx, rng.random(batch))
    t_update = time.perf_counter() - t0
    return {
        "items": n_items,
        "ops": n_ops,
        "add_per_s": n_items / t_add,
        "sample_per_s": done / t_sample,
        "update_per_s": n_ops / t_update,
    }

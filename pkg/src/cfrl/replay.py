"""Prioritized experience replay over a sum tree.

Leaf priorities are (|td| + floor)^beta, written at update time; sampling
draws one leaf per equal-mass segment (stratified) with probability
proportional to priority. Importance weights correct the induced bias and
are normalized by the batch maximum, so uniform priorities give weight 1.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError


class SumTree:
    def __init__(self, capacity: int):
        if capacity < 1 or capacity & (capacity - 1):
            raise ConfigError("sum tree capacity must be a power of two")
        self.capacity = capacity
        # nodes[1] is the root; leaves live at [capacity, 2*capacity)
        self.nodes = np.zeros(2 * capacity)

    @property
    def total(self) -> float:
        return float(self.nodes[1])

    def get(self, leaf: int) -> float:
        return float(self.nodes[self.capacity + leaf])

    def update(self, leaf: int, priority: float) -> None:
        if priority < 0:
            raise ConfigError("priorities must be non-negative")
        i = self.capacity + leaf
        self.nodes[i] = priority
        i >>= 1
        while i >= 1:
            # recompute instead of delta-adjusting: parents stay exactly
            # the sum of their children under any update sequence
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1]
            i >>= 1

    def find(self, mass: float) -> int:
        """Leaf index whose cumulative priority interval contains ``mass``."""
        i = 1
        while i < self.capacity:
            left = 2 * i
            if mass < self.nodes[left] or self.nodes[left + 1] == 0.0:
                i = left
            else:
                mass -= self.nodes[left]
                i = left + 1
        return i - self.capacity


class Batch:
    def __init__(self, records, indices, weights):
        self.records = records
        self.indices = indices
        self.weights = weights

    def __len__(self):
        return len(self.records)


class PrioritizedReplay:
    """FIFO ring of transitions with priority-proportional sampling.

    ``beta`` is the priority exponent (how much prioritization is used);
    ``is_exponent`` shapes the importance weights and is annealed toward 1
    by the training loop.
    """

    def __init__(self, capacity: int, beta: float = 0.6, is_exponent: float = 0.4,
                 priority_floor: float = 1e-3):
        cap = 1
        while cap < capacity:
            cap *= 2
        self.capacity = cap
        self.beta = beta
        self.is_exponent = is_exponent
        self.priority_floor = priority_floor
        self.tree = SumTree(cap)
        self.records = [None] * cap
        self.size = 0
        self._cursor = 0
        self._max_priority = 1.0

    def __len__(self) -> int:
        return self.size

    def _shape(self, td_error: float) -> float:
        return (abs(float(td_error)) + self.priority_floor) ** self.beta

    def push(self, record, td_error: float | None = None) -> int:
        """Store a record; without a td estimate it enters at the maximum
        priority seen so far. Oldest entries are overwritten at capacity."""
        leaf = self._cursor
        self.records[leaf] = record
        priority = self._max_priority if td_error is None else self._shape(td_error)
        self._max_priority = max(self._max_priority, priority)
        self.tree.update(leaf, priority)
        self._cursor = (self._cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        return leaf

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if self.size == 0:
            raise ConfigError("cannot sample from an empty buffer")
        if batch_size > self.size:
            raise ConfigError(f"batch size {batch_size} exceeds buffer size {self.size}")
        total = self.tree.total
        seg = total / batch_size
        indices = np.empty(batch_size, dtype=np.int64)
        priorities = np.empty(batch_size)
        for j in range(batch_size):
            mass = (j + rng.uniform()) * seg
            leaf = self.tree.find(min(mass, np.nextafter(total, 0.0)))
            indices[j] = leaf
            priorities[j] = self.tree.get(leaf)
        probs = priorities / total
        weights = (self.size * probs) ** (-self.is_exponent)
        weights = weights / weights.max()
        return Batch([self.records[i] for i in indices], indices, weights)

    def update_priorities(self, indices, td_errors) -> None:
        for leaf, td in zip(indices, td_errors):
            self.tree.update(int(leaf), self._shape(td))
            self._max_priority = max(self._max_priority, self._shape(td))

"""Random-network-distillation novelty bonuses, at two levels.

A frozen randomly-initialized target embeds inputs; a trainable predictor
learns to match it. The squared embedding error is the novelty bonus: it
shrinks for inputs seen often. One module scores states, a second scores
(state, action) pairs; only the state bonus is added to stored rewards,
the action module contributes solely through the policy loss.
"""

from __future__ import annotations

import numpy as np

from . import nets
from .errors import ConfigError


class RndModule:
    """Fixed random target net + trainable predictor of matching shape."""

    def __init__(self, input_dim: int, hidden: int = 64, embed_dim: int = 32, seed: int = 0,
                 learning_rate: float = 1e-4, normalize: bool = True, scale: float = 1.0):
        if input_dim < 1:
            raise ConfigError("RND input dimension must be positive")
        sizes = [input_dim, hidden, embed_dim]
        self.target = nets.init_net(sizes, "identity", seed=seed)
        self.predictor = nets.init_net(sizes, "identity", seed=seed + 10_000)
        self.optimizer = nets.Optimizer("adam", learning_rate)
        self.normalize = normalize
        self.scale = scale
        # running stats of raw bonuses (Welford)
        self._count = 0
        self._mean = 0.0
        self._m2 = 0.0

    @property
    def input_dim(self) -> int:
        return self.target.n_in

    def _observe(self, value: float) -> None:
        self._count += 1
        d = value - self._mean
        self._mean += d / self._count
        self._m2 += d * (value - self._mean)

    def _running_std(self) -> float:
        if self._count < 2:
            return 1.0
        return float(np.sqrt(self._m2 / (self._count - 1))) or 1.0

    def raw_bonus(self, inputs: np.ndarray) -> np.ndarray:
        """Squared L2 embedding error per row; no normalization, no stats
        update."""
        X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        t_out, _ = nets.forward(self.target, X)
        p_out, _ = nets.forward(self.predictor, X)
        return ((p_out - t_out) ** 2).sum(axis=1)

    def bonus(self, x: np.ndarray) -> float:
        """Scaled novelty of one input, divided by the running bonus std
        when normalization is on. Returns 0 when the module is disabled
        (scale 0)."""
        if self.scale == 0.0:
            return 0.0
        raw = float(self.raw_bonus(x)[0])
        self._observe(raw)
        if self.normalize:
            raw = raw / self._running_std()
        return self.scale * raw

    def distill_step(self, batch: np.ndarray):
        """One predictor gradient step toward the frozen target on a batch;
        returns the mean squared-error loss and its gradients (already
        applied)."""
        loss, grads = self.distill_loss(batch)
        nets.apply_update(self.predictor, grads, self.optimizer)
        return loss

    def distill_loss(self, batch: np.ndarray):
        """Mean distillation loss over the batch and predictor gradients,
        without applying them. The target never receives gradients."""
        X = np.atleast_2d(np.asarray(batch, dtype=np.float64))
        t_out, _ = nets.forward(self.target, X)
        p_out, tape = nets.forward(self.predictor, X)
        diff = p_out - t_out
        loss = float((diff**2).sum(axis=1).mean())
        gout = 2.0 * diff / len(X)
        grads = nets.backward(self.predictor, tape, gout)
        return loss, grads


def combine_reward(reward: float, state_bonus: float) -> float:
    """Modified reward stored in the replay buffer."""
    return reward + state_bonus

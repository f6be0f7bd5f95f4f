"""Ground-truth valuation references: one-step utilities, Shapley values, leave-one-out.

The value of a subset S of a batch is the validation-loss decrease produced
by one SGD step from the frozen checkpoint along the subset's summed gradient:

    v(S) = loss_val(theta) - loss_val(theta - eta * sum_{i in S} grad_i),   v({}) = 0

The step is additive in subset members, so a zero-gradient sample is a null
player exactly: it leaves every coalition's step unchanged.

Shapley values of this game are the fidelity reference the influence
estimators are correlated against. Exact enumeration covers batches up to
10; Monte-Carlo permutation sampling scales beyond that.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .data import Sample
from .network import MLP, Activation, evaluate_sample, param_grads


@dataclass
class ShapleyEstimate:
    values: np.ndarray
    stderr: np.ndarray
    permutations_used: int  # 0 marks exact subset enumeration
    seed: int


class UtilityFn:
    """One-step validation-loss-decrease game over a frozen checkpoint.

    Evaluations are pure: the frozen parameters are never mutated, and v(S)
    values are cached by subset bitmask. Call bind_batch (or pass the batch
    to the Shapley helpers, which do it) before querying subsets.
    """

    def __init__(self, net: MLP, val_samples: list[Sample], learning_rate: float):
        if learning_rate <= 0.0:
            raise ValueError("learning rate must be positive")
        if not val_samples:
            raise ValueError("validation set must be nonempty")
        self.net = net.copy()
        self.learning_rate = learning_rate
        self.val_x = np.stack([s.features for s in val_samples])
        self.val_y = np.array([s.label for s in val_samples], dtype=np.int64)
        self._theta = np.concatenate(
            [np.concatenate([l.weights.ravel(), l.bias]) for l in self.net.layers])
        self._shapes = [(l.weights.shape, l.bias.shape) for l in self.net.layers]
        self._acts = [l.spec.activation for l in self.net.layers]
        self._base_loss = self._val_loss(self._theta)
        self._batch: list[Sample] | None = None
        self._grads: np.ndarray | None = None  # (n, P) per-sample flat gradients
        self._cache: dict[int, float] = {}

    def _val_loss(self, theta: np.ndarray) -> float:
        """Mean softmax cross-entropy over the validation block at parameters theta."""
        a = self.val_x
        s = a
        offset = 0
        for (w_shape, b_shape), act in zip(self._shapes, self._acts):
            w = theta[offset:offset + w_shape[0] * w_shape[1]].reshape(w_shape)
            offset += w_shape[0] * w_shape[1]
            b = theta[offset:offset + b_shape[0]]
            offset += b_shape[0]
            s = a @ w.T + b
            if act is Activation.RELU:
                a = np.maximum(s, 0.0)
            elif act is Activation.TANH:
                a = np.tanh(s)
            else:
                a = s
        logits = s
        shifted = logits - logits.max(axis=1, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=1))
        picked = shifted[np.arange(logits.shape[0]), self.val_y]
        return float(np.mean(lse - picked))

    def bind_batch(self, batch: list[Sample]) -> None:
        """Precompute per-sample flat gradients for subsequent subset queries."""
        grads = []
        for s in batch:
            taps = evaluate_sample(self.net, s.features, s.label)
            grads.append(param_grads(taps).flatten())
        self._batch = list(batch)
        self._grads = np.stack(grads)
        self._cache = {}

    def _ensure_batch(self, batch: list[Sample] | None = None) -> list[Sample]:
        if batch is not None:
            if self._batch is None or len(self._batch) != len(batch) or any(
                    a is not b for a, b in zip(self._batch, batch)):
                self.bind_batch(batch)
        if self._batch is None:
            raise ValueError("no batch bound to the utility; call bind_batch first")
        return self._batch

    def utility_of_mask(self, mask: int) -> float:
        """v(S) for the subset encoded as a bitmask over bound-batch positions."""
        if mask == 0:
            return 0.0
        batch = self._ensure_batch()
        cached = self._cache.get(mask)
        if cached is not None:
            return cached
        idx = [i for i in range(len(batch)) if mask >> i & 1]
        step_grad = self._grads[idx].sum(axis=0)
        value = self._base_loss - self._val_loss(self._theta - self.learning_rate * step_grad)
        self._cache[mask] = value
        return value


def subset_utility(u: UtilityFn, subset: set[int] | list[int]) -> float:
    """v(S) for an index subset of the bound batch; the empty set is worth 0."""
    batch = u._ensure_batch()
    mask = 0
    for i in subset:
        if not 0 <= i < len(batch):
            raise ValueError(f"subset index {i} outside the batch")
        mask |= 1 << i
    return u.utility_of_mask(mask)


def shapley_exact(u: UtilityFn, batch: list[Sample]) -> ShapleyEstimate:
    """Exact Shapley values by 2^n subset enumeration (n <= 10)."""
    n = len(batch)
    if n == 0:
        raise ValueError("empty batch")
    if n > 10:
        raise ValueError(f"exact enumeration limited to 10 samples, got {n}")
    u._ensure_batch(batch)
    fact = [math.factorial(k) for k in range(n + 1)]
    values = np.zeros(n)
    for mask in range(1 << n):
        size = bin(mask).count("1")
        v_s = u.utility_of_mask(mask)
        for i in range(n):
            if mask >> i & 1:
                continue
            weight = fact[size] * fact[n - size - 1] / fact[n]
            values[i] += weight * (u.utility_of_mask(mask | (1 << i)) - v_s)
    return ShapleyEstimate(values=values, stderr=np.zeros(n), permutations_used=0, seed=0)


def shapley_mc(u: UtilityFn, batch: list[Sample], permutations: int, seed: int,
               exhaustive: bool = False) -> ShapleyEstimate:
    """Monte-Carlo permutation Shapley; stderr = std(marginals)/sqrt(draws).

    With exhaustive=True every one of the n! orderings is visited once
    (matching exact enumeration) and the permutations argument is ignored.
    """
    n = len(batch)
    if n == 0:
        raise ValueError("empty batch")
    if not exhaustive and permutations < 1:
        raise ValueError("need at least one permutation")
    u._ensure_batch(batch)
    rng = np.random.default_rng(seed)
    if exhaustive:
        orderings = list(itertools.permutations(range(n)))
    else:
        orderings = [rng.permutation(n).tolist() for _ in range(permutations)]
    marginals = np.zeros((len(orderings), n))
    for r, order in enumerate(orderings):
        mask = 0
        prev = 0.0
        for i in order:
            mask |= 1 << i
            cur = u.utility_of_mask(mask)
            marginals[r, i] = cur - prev
            prev = cur
    values = marginals.mean(axis=0)
    if len(orderings) >= 2:
        stderr = marginals.std(axis=0, ddof=1) / math.sqrt(len(orderings))
    else:
        stderr = np.zeros(n)
    return ShapleyEstimate(values=values, stderr=stderr,
                           permutations_used=len(orderings), seed=seed)


def loo_influence(u: UtilityFn, batch: list[Sample]) -> np.ndarray:
    """One-step leave-one-out: v(B) - v(B without i) per member."""
    n = len(batch)
    if n == 0:
        raise ValueError("empty batch")
    u._ensure_batch(batch)
    full = (1 << n) - 1
    v_full = u.utility_of_mask(full)
    return np.array([v_full - u.utility_of_mask(full & ~(1 << i)) for i in range(n)])

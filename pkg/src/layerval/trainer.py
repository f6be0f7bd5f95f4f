"""Online-valuation training loop: SGD with momentum plus per-batch curation.

Each curated step scores the batch against a cached validation subsample
(or against the rest of the batch in self-influence mode), drops members
whose benefit score falls below the threshold, and applies the SGD update
with the survivors. A cost ledger tracks the multiply-accumulate work and
cache footprint of the scoring pass per estimator.

Cache layouts per estimator family (per validation sample):
    lai / precond_lai : concatenated augmented activations + output gradient
    lli               : last augmented activation + output gradient
    ghost             : concatenated augmented activations + all layer gradients
    ip                : flattened parameter gradient
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .data import DatasetBundle, Sample
from .influence import (
    Estimator,
    Preconditioner,
    augmented,
    update_preconditioner,
)
from .network import (
    MLP,
    SampleTaps,
    backward_taps,
    evaluate_sample,
    forward,
    loss_and_output_grad,
    param_grads,
)


class CurationMode(str, Enum):
    VALIDATION = "validation"
    SELF = "self"
    OFF = "off"


class EmptyBatchPolicy(str, Enum):
    SKIP_STEP = "skip"
    KEEP_TOP1 = "keep_top1"


class StaleCacheError(RuntimeError):
    pass


class NonFiniteGradientError(RuntimeError):
    pass


@dataclass
class TrainerConfig:
    learning_rate: float = 0.05
    momentum: float = 0.0
    batch_size: int = 16
    epochs: int = 10
    warmup_epochs: int = 3
    estimator: Estimator = Estimator.LAI
    mode: CurationMode = CurationMode.VALIDATION
    threshold: float = 0.0  # benefit sign: keep when benefit >= threshold
    val_fraction_per_batch: float = 0.1
    cache_refresh_steps: int = 1
    seed: int = 0
    empty_batch_policy: EmptyBatchPolicy = EmptyBatchPolicy.SKIP_STEP
    checkpoint_every: int = 0  # steps between checkpoint hooks; 0 disables
    probe_sample_count: int = 3
    layer_calibration: bool = False  # divide alpha(l) by dim(a~(l-1)) when scoring
    precond_decay: float = 0.9
    precond_floor: float = 1e-8

    def __post_init__(self):
        self.estimator = Estimator(self.estimator)
        self.mode = CurationMode(self.mode)
        self.empty_batch_policy = EmptyBatchPolicy(self.empty_batch_policy)
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0 or self.warmup_epochs < 0:
            raise ValueError("batch_size must be >= 1 and epoch counts nonnegative")
        if self.warmup_epochs > self.epochs:
            raise ValueError("warmup_epochs cannot exceed epochs")
        if not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")
        if not 0.0 < self.val_fraction_per_batch <= 1.0:
            raise ValueError("val_fraction_per_batch must lie in (0, 1]")
        if self.cache_refresh_steps < 1:
            raise ValueError("cache_refresh_steps must be >= 1")


# --- cost accounting -------------------------------------------------------


def _act_dims(net: MLP) -> list[int]:
    return [layer.spec.in_dim for layer in net.layers]


def _grad_dims(net: MLP) -> list[int]:
    return [layer.spec.out_dim for layer in net.layers]


def backward_extra_macs(net: MLP) -> int:
    """MACs of the backward chain below the logits: matvec plus gating per layer."""
    total = 0
    for layer in net.layers[1:]:
        total += layer.spec.out_dim * layer.spec.in_dim + layer.spec.in_dim
    return total


def outer_product_macs(net: MLP) -> int:
    """MACs to materialize per-sample weight gradients g(l) a(l-1)^T."""
    return sum(layer.spec.out_dim * layer.spec.in_dim for layer in net.layers)


def pair_macs(net: MLP, estimator: Estimator) -> int:
    """MACs of scoring one (train, validation) pair from cached vectors."""
    aug = [d + 1 for d in _act_dims(net)]
    gdims = _grad_dims(net)
    if estimator in (Estimator.LAI, Estimator.PRECOND_LAI):
        return sum(aug) + gdims[-1] + 1
    if estimator is Estimator.LLI:
        return aug[-1] + gdims[-1] + 1
    if estimator is Estimator.GHOST:
        return sum(a + g + 1 for a, g in zip(aug, gdims))
    if estimator is Estimator.IP:
        return net.num_params
    raise ValueError(f"no pair cost for estimator {estimator}")


def cache_reals_per_sample(net: MLP, estimator: Estimator) -> int:
    """Cached 64-bit reals per validation sample for an estimator family."""
    aug = [d + 1 for d in _act_dims(net)]
    gdims = _grad_dims(net)
    if estimator in (Estimator.LAI, Estimator.PRECOND_LAI):
        return sum(aug) + gdims[-1]
    if estimator is Estimator.LLI:
        return aug[-1] + gdims[-1]
    if estimator is Estimator.GHOST:
        return sum(aug) + sum(gdims)
    if estimator is Estimator.IP:
        return net.num_params
    raise ValueError(f"no cache layout for estimator {estimator}")


def per_sample_extra_macs(net: MLP, estimator: Estimator) -> int:
    """Scoring work beyond the shared forward pass, per sample whose taps are built."""
    if estimator is Estimator.GHOST:
        return backward_extra_macs(net)
    if estimator is Estimator.IP:
        return backward_extra_macs(net) + outer_product_macs(net)
    if estimator is Estimator.PRECOND_LAI:
        return net.out_dim  # rescaling the output gradient
    return 0


@dataclass
class LedgerEntry:
    step: int
    method: str
    macs: int
    cache_bytes: int
    samples_scored: int
    samples_kept: int
    config_key: tuple


@dataclass
class CostLedger:
    entries: list[LedgerEntry] = field(default_factory=list)

    def record(self, entry: LedgerEntry) -> None:
        self.entries.append(entry)

    def totals(self, method: str) -> dict:
        rows = [e for e in self.entries if e.method == method]
        return {
            "macs": sum(e.macs for e in rows),
            "cache_bytes": max((e.cache_bytes for e in rows), default=0),
            "samples_scored": sum(e.samples_scored for e in rows),
            "samples_kept": sum(e.samples_kept for e in rows),
            "steps": len(rows),
        }


def ledger_compare(ledger: CostLedger, methods: list[Estimator]) -> dict:
    """Compare per-method scoring MACs and cache bytes recorded for one configuration.

    All requested methods must have entries with an identical
    (net dims, batch size, validation size) fingerprint. Raises if the
    LAI < Ghost orderings fail for depth > 1.
    """
    per_method = {}
    keys = set()
    for est in methods:
        rows = [e for e in ledger.entries if e.method == est.value]
        if not rows:
            raise ValueError(f"ledger has no entries for method {est.value}")
        keys.update(e.config_key for e in rows)
        per_method[est.value] = {
            "macs": sum(e.macs for e in rows) // len(rows),
            "cache_bytes": rows[0].cache_bytes,
        }
    if len(keys) != 1:
        raise ValueError(f"methods ran on mismatched configurations: {sorted(keys)}")
    key = keys.pop()
    depth = len(key[0]) - 1
    record = {
        "config": {"dims": list(key[0]), "batch_size": key[1], "validation_size": key[2]},
        "depth": depth,
        "methods": per_method,
    }
    if Estimator.LAI.value in per_method and Estimator.GHOST.value in per_method:
        lai, ghost = per_method[Estimator.LAI.value], per_method[Estimator.GHOST.value]
        if depth > 1:
            ok = lai["macs"] < ghost["macs"] and lai["cache_bytes"] < ghost["cache_bytes"]
            record["lai_cheaper_than_ghost"] = ok
            if not ok:
                raise RuntimeError("cost ordering violated: expected LAI < Ghost for depth > 1")
        else:
            record["lai_cheaper_than_ghost"] = False
            if lai["macs"] != ghost["macs"]:
                raise RuntimeError("depth-1 scoring MACs should match between LAI and Ghost")
    return record


# --- validation cache ------------------------------------------------------


@dataclass
class ValidationCache:
    step_id: int
    estimator: Estimator
    sample_count: int
    segment_dims: list[int]
    activation_block: np.ndarray | None = None
    output_grads: np.ndarray | None = None
    layer_grad_blocks: list[np.ndarray] | None = None
    param_grad_block: np.ndarray | None = None

    @property
    def byte_size(self) -> int:
        total = 0
        for block in (self.activation_block, self.output_grads, self.param_grad_block):
            if block is not None:
                total += block.size * 8
        if self.layer_grad_blocks is not None:
            # ghost family: the full per-layer gradient stack, g(L) included
            total += sum(b.size for b in self.layer_grad_blocks) * 8
        return total


def _concat_augmented(taps: SampleTaps) -> np.ndarray:
    return np.concatenate([augmented(a) for a in taps.activations])


def build_validation_cache(net: MLP, val_subset: list[Sample], estimator: Estimator,
                           step_id: int = 0, calibrate: bool = False) -> ValidationCache:
    """Forward (and for Ghost/IP, backward) every validation sample once and
    store the vectors the estimator needs for cheap batch scoring."""
    if not val_subset:
        raise ValueError("validation subset must be nonempty")
    if estimator is Estimator.NONE:
        raise ValueError("cannot build a cache for estimator 'none'")
    aug_dims = [d + 1 for d in _act_dims(net)]
    acts = []
    grads = []
    layer_blocks: list[list[np.ndarray]] = [[] for _ in range(net.depth)]
    pgs = []
    for s in val_subset:
        if estimator in (Estimator.GHOST, Estimator.IP):
            taps = evaluate_sample(net, s.features, s.label)
            if estimator is Estimator.GHOST:
                acts.append(_concat_augmented(taps))
                for l, g in enumerate(taps.layer_grads):
                    layer_blocks[l].append(g)
            else:
                pgs.append(param_grads(taps).flatten())
        else:
            logits, taps = forward(net, s.features)
            _, gl = loss_and_output_grad(logits, s.label)
            vec = augmented(taps.activations[-1]) if estimator is Estimator.LLI \
                else _concat_augmented(taps)
            if calibrate:
                vec = _calibrated(vec, net, estimator)
            acts.append(vec)
            grads.append(gl)
    cache = ValidationCache(step_id=step_id, estimator=estimator,
                            sample_count=len(val_subset), segment_dims=aug_dims)
    if estimator is Estimator.IP:
        cache.param_grad_block = np.stack(pgs)
    elif estimator is Estimator.GHOST:
        cache.activation_block = np.stack(acts)
        cache.layer_grad_blocks = [np.stack(bs) for bs in layer_blocks]
    else:
        cache.activation_block = np.stack(acts)
        cache.output_grads = np.stack(grads)
    return cache


# --- curation --------------------------------------------------------------


@dataclass
class CurationDecision:
    kept_mask: list[bool]
    benefit_scores: list[float]
    estimator: Estimator
    step_id: int
    note: str = ""
    losses: list[float] = field(default_factory=list)
    output_grads: list[np.ndarray] = field(default_factory=list)


def _train_sample_vectors(net: MLP, sample: Sample, estimator: Estimator,
                          calibrate: bool) -> dict:
    """Build the per-sample pieces scoring needs; backward only for Ghost/IP."""
    if estimator in (Estimator.GHOST, Estimator.IP):
        taps = evaluate_sample(net, sample.features, sample.label)
        out = {"loss": taps.loss, "gl": taps.output_grad}
        if estimator is Estimator.IP:
            out["pg"] = param_grads(taps).flatten()
        else:
            out["concat"] = _concat_augmented(taps)
            out["layer_grads"] = taps.layer_grads
        return out
    logits, taps = forward(net, sample.features)
    loss, gl = loss_and_output_grad(logits, sample.label)
    out = {"loss": loss, "gl": gl}
    if estimator is Estimator.LLI:
        out["concat"] = augmented(taps.activations[-1])
    else:
        out["concat"] = _concat_augmented(taps)
    if calibrate:
        out["concat"] = _calibrated(out["concat"], net, estimator)
    return out


def _calibrated(concat: np.ndarray, net: MLP, estimator: Estimator) -> np.ndarray:
    aug = [d + 1 for d in _act_dims(net)]
    if estimator is Estimator.LLI:
        return concat / math.sqrt(aug[-1])
    scaled = concat.copy()
    offset = 0
    for dim in aug:
        scaled[offset:offset + dim] /= math.sqrt(dim)
        offset += dim
    return scaled


def _benefit_against_cache(vec: dict, cache: ValidationCache,
                           precond: Preconditioner | None) -> float:
    est = cache.estimator
    if est is Estimator.IP:
        return float((cache.param_grad_block @ vec["pg"]).sum())
    if est is Estimator.GHOST:
        total = 0.0
        offset = 0
        concat = vec["concat"]
        for l, dim in enumerate(cache.segment_dims):
            a_dot = cache.activation_block[:, offset:offset + dim] @ concat[offset:offset + dim]
            g_dot = cache.layer_grad_blocks[l] @ vec["layer_grads"][l]
            total += float(np.dot(a_dot, g_dot))
            offset += dim
        return total
    block = cache.activation_block
    a_dot = block @ vec["concat"]
    if est is Estimator.PRECOND_LAI:
        scale = 1.0 / np.sqrt(precond.diag)
        g_dot = (cache.output_grads * scale) @ (vec["gl"] * scale)
    else:
        g_dot = cache.output_grads @ vec["gl"]
    return float(np.dot(a_dot, g_dot))


def curate_batch(net: MLP, batch: list[Sample], cache: ValidationCache,
                 cfg: TrainerConfig, step_id: int = 0,
                 ledger: CostLedger | None = None,
                 preconditioner: Preconditioner | None = None) -> CurationDecision:
    """Score batch members against the cached validation subsample.

    Benefit is the negated influence-sign aggregate; a member is kept when
    benefit >= cfg.threshold (inclusive boundary).
    """
    if cfg.estimator is Estimator.NONE:
        raise ValueError("estimator 'none' cannot curate; use mode 'off' instead")
    if cache.estimator is not cfg.estimator:
        raise ValueError(f"cache was built for {cache.estimator.value}, not {cfg.estimator.value}")
    age = step_id - cache.step_id
    if age < 0 or age >= cfg.cache_refresh_steps:
        raise StaleCacheError(
            f"cache from step {cache.step_id} is stale at step {step_id} "
            f"(refresh every {cfg.cache_refresh_steps})")
    if cfg.estimator is Estimator.PRECOND_LAI and preconditioner is None:
        raise ValueError("preconditioned scoring needs a Preconditioner")
    benefits = []
    losses = []
    gls = []
    for s in batch:
        vec = _train_sample_vectors(net, s, cfg.estimator, cfg.layer_calibration)
        benefits.append(_benefit_against_cache(vec, cache, preconditioner))
        losses.append(vec["loss"])
        gls.append(vec["gl"])
    kept = [b >= cfg.threshold for b in benefits]
    if ledger is not None:
        macs = (len(batch) * cache.sample_count * pair_macs(net, cfg.estimator)
                + len(batch) * per_sample_extra_macs(net, cfg.estimator))
        if cfg.estimator is Estimator.PRECOND_LAI:
            macs += cache.sample_count * net.out_dim  # rescaling cached gradients
        ledger.record(LedgerEntry(
            step=step_id, method=cfg.estimator.value, macs=macs,
            cache_bytes=cache.byte_size, samples_scored=len(batch),
            samples_kept=sum(kept),
            config_key=(tuple([net.in_dim] + _grad_dims(net)), len(batch),
                        cache.sample_count)))
    return CurationDecision(kept_mask=kept, benefit_scores=benefits,
                            estimator=cfg.estimator, step_id=step_id,
                            losses=losses, output_grads=gls)


def self_influence_curate(net: MLP, batch: list[Sample], cfg: TrainerConfig,
                          step_id: int = 0, ledger: CostLedger | None = None,
                          preconditioner: Preconditioner | None = None) -> CurationDecision:
    """Score each member against the rest of its own batch (self-pairs excluded)."""
    if cfg.estimator is Estimator.NONE:
        raise ValueError("estimator 'none' cannot curate; use mode 'off' instead")
    if cfg.estimator is Estimator.PRECOND_LAI and preconditioner is None:
        raise ValueError("preconditioned scoring needs a Preconditioner")
    vecs = [_train_sample_vectors(net, s, cfg.estimator, cfg.layer_calibration)
            for s in batch]
    losses = [v["loss"] for v in vecs]
    gls = [v["gl"] for v in vecs]
    if len(batch) == 1:
        return CurationDecision(kept_mask=[True], benefit_scores=[0.0],
                                estimator=cfg.estimator, step_id=step_id,
                                note="degenerate batch of one: kept unconditionally",
                                losses=losses, output_grads=gls)
    n = len(batch)
    est = cfg.estimator
    if est is Estimator.IP:
        block = np.stack([v["pg"] for v in vecs])
        gram = block @ block.T
        pair = gram
    elif est is Estimator.GHOST:
        concat = np.stack([v["concat"] for v in vecs])
        pair = np.zeros((n, n))
        offset = 0
        for l, dim in enumerate([d + 1 for d in _act_dims(net)]):
            a_gram = concat[:, offset:offset + dim] @ concat[:, offset:offset + dim].T
            g_block = np.stack([v["layer_grads"][l] for v in vecs])
            pair += a_gram * (g_block @ g_block.T)
            offset += dim
    else:
        a_block = np.stack([v["concat"] for v in vecs])
        g_block = np.stack(gls)
        if est is Estimator.PRECOND_LAI:
            g_block = g_block / np.sqrt(preconditioner.diag)
        pair = (a_block @ a_block.T) * (g_block @ g_block.T)
    benefits = [float(pair[i].sum() - pair[i, i]) for i in range(n)]
    kept = [b >= cfg.threshold for b in benefits]
    if ledger is not None:
        macs = (n * (n - 1) // 2 * pair_macs(net, est)
                + n * per_sample_extra_macs(net, est))
        ledger.record(LedgerEntry(
            step=step_id, method=est.value, macs=macs,
            cache_bytes=n * cache_reals_per_sample(net, est) * 8,
            samples_scored=n, samples_kept=sum(kept),
            config_key=(tuple([net.in_dim] + _grad_dims(net)), n, n - 1)))
    return CurationDecision(kept_mask=kept, benefit_scores=benefits,
                            estimator=est, step_id=step_id,
                            losses=losses, output_grads=gls)


# --- optimizer -------------------------------------------------------------


MomentumState = list[tuple[np.ndarray, np.ndarray]]


def init_momentum(net: MLP) -> MomentumState:
    return [(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in net.layers]


def sgd_step(net: MLP, kept: list[Sample], cfg: TrainerConfig,
             state: MomentumState | None) -> tuple[MLP, MomentumState, float]:
    """One momentum-SGD update with the mean gradient over the kept samples.

    velocity <- momentum * velocity + grad;  theta <- theta - lr * velocity.
    Returns the updated net, state, and mean loss over the kept samples.
    """
    if not kept:
        raise ValueError("sgd_step needs at least one sample")
    if state is None:
        state = init_momentum(net)
    sums = [(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in net.layers]
    loss_total = 0.0
    for s in kept:
        taps = evaluate_sample(net, s.features, s.label)
        loss_total += taps.loss
        pg = param_grads(taps)
        for (ws, bs), w, b in zip(sums, pg.weight_grads, pg.bias_grads):
            ws += w
            bs += b
    scale = 1.0 / len(kept)
    new_state: MomentumState = []
    for layer, (vw, vb), (ws, bs) in zip(net.layers, state, sums):
        gw = ws * scale
        gb = bs * scale
        if not (np.all(np.isfinite(gw)) and np.all(np.isfinite(gb))):
            raise NonFiniteGradientError(
                f"non-finite gradient in layer {layer.spec.in_dim}x{layer.spec.out_dim}; "
                f"|grad W| max={np.abs(gw).max()}")
        vw = cfg.momentum * vw + gw
        vb = cfg.momentum * vb + gb
        layer.weights -= cfg.learning_rate * vw
        layer.bias -= cfg.learning_rate * vb
        new_state.append((vw, vb))
    return net, new_state, loss_total * scale


# --- training loop ---------------------------------------------------------


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    test_accuracy: float
    kept_count: int
    scored_count: int
    histogram_edges: list[float]
    histogram_counts: list[int]


@dataclass
class TrainingReport:
    epoch_stats: list[EpochStats]
    sample_ids: list[int]
    inclusion: list[list[bool]]  # [epoch][train position]
    score_rows: list[tuple[int, int, str, float]]  # step, sample_id, estimator, benefit
    probe_traces: dict[int, list[tuple[int, float]]]
    ledger: CostLedger
    seed: int
    mode: str
    estimator: str
    steps_total: int


def _mean_loss(net: MLP, samples: list[Sample]) -> float:
    total = 0.0
    for s in samples:
        logits, _ = forward(net, s.features)
        loss, _ = loss_and_output_grad(logits, s.label)
        total += loss
    return total / len(samples)


def _accuracy(net: MLP, samples: list[Sample]) -> float:
    hits = 0
    for s in samples:
        logits, _ = forward(net, s.features)
        if int(np.argmax(logits)) == s.label:
            hits += 1
    return hits / len(samples)


def _histogram(values: list[float], bins: int = 20) -> tuple[list[float], list[int]]:
    if not values:
        return [], []
    counts, edges = np.histogram(np.asarray(values), bins=bins)
    return [float(e) for e in edges], [int(c) for c in counts]


def train(net: MLP, cfg: TrainerConfig, data: DatasetBundle,
          checkpoint_hook: Callable[[int, MLP], None] | None = None
          ) -> tuple[TrainingReport, MLP]:
    """Warm up for cfg.warmup_epochs, then curate each batch before each update.

    Warm-up epochs (and mode 'off') run vanilla SGD over full batches. In
    curated epochs each refresh draws a fresh validation subsample of size
    ceil(val_fraction_per_batch * |validation|) without replacement, builds
    the estimator cache against the current parameters, and batches are
    filtered by benefit threshold before the SGD step.
    """
    if not data.train:
        raise ValueError("empty training split")
    if cfg.mode is CurationMode.VALIDATION and cfg.estimator is not Estimator.NONE \
            and cfg.warmup_epochs < cfg.epochs and not data.validation:
        raise ValueError("validation-influence curation needs a validation split")
    net = net.copy()
    seed_seq = np.random.SeedSequence(cfg.seed)
    shuffle_ss, val_ss = seed_seq.spawn(2)
    rng_shuffle = np.random.default_rng(shuffle_ss)
    rng_val = np.random.default_rng(val_ss)
    state: MomentumState | None = None
    ledger = CostLedger()
    precond = (Preconditioner.identity(net.out_dim, cfg.precond_decay, cfg.precond_floor)
               if cfg.estimator is Estimator.PRECOND_LAI else None)
    probe_ids = [s.id for s in data.train[:cfg.probe_sample_count]]
    probe_traces: dict[int, list[tuple[int, float]]] = {pid: [] for pid in probe_ids}
    n = len(data.train)
    epoch_stats: list[EpochStats] = []
    inclusion: list[list[bool]] = []
    score_rows: list[tuple[int, int, str, float]] = []
    cache: ValidationCache | None = None
    step = 0
    checkpoints_fired = 0
    for epoch in range(cfg.epochs):
        order = rng_shuffle.permutation(n)
        row = [False] * n
        epoch_losses: list[float] = []
        epoch_benefits: list[float] = []
        scored = 0
        for start in range(0, n, cfg.batch_size):
            positions = order[start:start + cfg.batch_size].tolist()
            batch = [data.train[p] for p in positions]
            curating = (epoch >= cfg.warmup_epochs and cfg.mode is not CurationMode.OFF
                        and cfg.estimator is not Estimator.NONE)
            if curating:
                if cfg.mode is CurationMode.VALIDATION:
                    if cache is None or step - cache.step_id >= cfg.cache_refresh_steps:
                        k = math.ceil(cfg.val_fraction_per_batch * len(data.validation))
                        idx = rng_val.choice(len(data.validation), size=k, replace=False)
                        subset = [data.validation[i] for i in sorted(idx.tolist())]
                        cache = build_validation_cache(net, subset, cfg.estimator, step,
                                                       cfg.layer_calibration)
                    decision = curate_batch(net, batch, cache, cfg, step, ledger, precond)
                else:
                    decision = self_influence_curate(net, batch, cfg, step, ledger, precond)
                if precond is not None:
                    precond = update_preconditioner(precond, decision.output_grads)
                epoch_losses.extend(decision.losses)
                epoch_benefits.extend(decision.benefit_scores)
                scored += len(batch)
                for s, benefit in zip(batch, decision.benefit_scores):
                    score_rows.append((step, s.id, cfg.estimator.value, benefit))
                    if s.id in probe_traces:
                        probe_traces[s.id].append((step, benefit))
                kept_flags = list(decision.kept_mask)
                if not any(kept_flags) and cfg.empty_batch_policy is EmptyBatchPolicy.KEEP_TOP1:
                    kept_flags[int(np.argmax(decision.benefit_scores))] = True
            else:
                kept_flags = [True] * len(batch)
            kept_samples = [s for s, keep in zip(batch, kept_flags) if keep]
            for p, keep in zip(positions, kept_flags):
                row[p] = keep
            if kept_samples:
                net, state, mean_loss = sgd_step(net, kept_samples, cfg, state)
                if not curating:
                    # repeat so the epoch mean weights every sample equally
                    epoch_losses.extend([mean_loss] * len(kept_samples))
            step += 1
            if checkpoint_hook is not None and cfg.checkpoint_every > 0 \
                    and step % cfg.checkpoint_every == 0:
                checkpoint_hook(step, net.copy())
                checkpoints_fired += 1
        edges, counts = _histogram(epoch_benefits)
        epoch_stats.append(EpochStats(
            epoch=epoch,
            train_loss=float(np.mean(epoch_losses)) if epoch_losses else 0.0,
            val_loss=_mean_loss(net, data.validation) if data.validation else 0.0,
            test_accuracy=_accuracy(net, data.test) if data.test else 0.0,
            kept_count=sum(row),
            scored_count=scored,
            histogram_edges=edges,
            histogram_counts=counts,
        ))
        inclusion.append(row)
    if checkpoint_hook is not None and cfg.checkpoint_every > 0 and checkpoints_fired == 0 \
            and step > 0:
        checkpoint_hook(step, net.copy())
    report = TrainingReport(
        epoch_stats=epoch_stats,
        sample_ids=[s.id for s in data.train],
        inclusion=inclusion,
        score_rows=score_rows,
        probe_traces=probe_traces,
        ledger=ledger,
        seed=cfg.seed,
        mode=cfg.mode.value,
        estimator=cfg.estimator.value,
        steps_total=step,
    )
    return report, net
